#pragma once

// Client-side I/O path tuner.
//
// Every observation period the tuner looks at one window of client-library
// metrics and nudges one of the two RPC parameters by a factor of two. The
// parameters are visited alternately. If the previous action improved the
// delivered bandwidth its direction is kept, otherwise it is inverted. The
// verdict either steers whichever parameter comes next (global memory) or
// only the parameter that was actually moved (per-parameter memory).
// When the metrics show delivery collapsing while RPC supply holds and the
// dirty backlog grows, the previous action is blamed and undone.
//
// Everything here is pure: no clocks, no I/O, no hidden state.

#include <cstdint>
#include <array>
#include <optional>
#include <string>
#include <variant>

#include "iopathtune/params.hpp"

namespace iopathtune {

enum class Direction { Multiply, Divide };

constexpr Direction opposite(Direction d) noexcept {
  return d == Direction::Multiply ? Direction::Divide : Direction::Multiply;
}

constexpr std::string_view to_string(Direction d) noexcept {
  return d == Direction::Multiply ? "multiply" : "divide";
}

Direction direction_from_string(std::string_view s);

enum class DirectionMemory { Global, PerParam };

constexpr std::string_view to_string(DirectionMemory m) noexcept {
  return m == DirectionMemory::Global ? "global" : "per_param";
}

DirectionMemory direction_memory_from_string(std::string_view s);

/// Metrics over one observation window, all derived from client counters.
struct WindowMetrics {
  double dirty_bytes = 0;      // at window end
  double page_cache_rate = 0;  // pages/s
  double rpc_gen_rate = 0;     // RPCs/s
  double transfer_bw = 0;      // bytes/s
  double window_len = 0;       // s

  bool valid() const noexcept;
  bool operator==(const WindowMetrics&) const = default;
};

struct TunerConfig {
  double period_s = 10.0;
  double improve_eps = 0.02;
  double contention_drop = 0.30;  // delivery must fall below (1 - drop) of the previous window
  double supply_hold = 0.90;      // RPC generation must stay above this fraction
  double idle_threshold = 1e6;    // bytes/s
  std::uint32_t page_size = 4096;
  Bounds mppr_bounds = kDefaultPagesBounds;
  Bounds mrif_bounds = kDefaultInFlightBounds;
  Direction initial_direction = Direction::Multiply;
  Param initial_param = Param::MaxPagesPerRpc;
  DirectionMemory memory = DirectionMemory::PerParam;

  const Bounds& bounds(Param p) const noexcept {
    return p == Param::MaxPagesPerRpc ? mppr_bounds : mrif_bounds;
  }

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  bool operator==(const TunerConfig&) const = default;
};

struct TuningAction {
  Param param = Param::MaxPagesPerRpc;
  Direction direction = Direction::Multiply;
  std::uint32_t pre_value = 0;
  std::uint32_t post_value = 0;
  bool operator==(const TuningAction&) const = default;
};

struct Hold {
  bool operator==(const Hold&) const = default;
};
struct Apply {
  TuningAction action;
  bool operator==(const Apply&) const = default;
};
struct Revert {
  Param param = Param::MaxPagesPerRpc;
  std::uint32_t restored_value = 0;
  std::uint32_t replaced_value = 0;
  bool operator==(const Revert&) const = default;
};

using ActionDecision = std::variant<Hold, Apply, Revert>;

/// Short label used in CSV output: `hold`, `apply` or `revert`.
std::string_view decision_kind(const ActionDecision& d) noexcept;

struct TunerState {
  std::uint64_t turn = 0;
  Param next_param = Param::MaxPagesPerRpc;
  std::optional<TuningAction> last_action;
  std::optional<WindowMetrics> prev_window;
  TunableParams params;
  // Direction each parameter moves in next, indexed by Param.
  std::array<Direction, 2> directions{Direction::Multiply, Direction::Multiply};
  bool operator==(const TunerState&) const = default;
};

enum class Improvement { Improved, NotImproved };

/// Which row of the decision table produced a plan.
enum class Rule { Idle, Bootstrap, Contention, Normal };

struct Plan {
  TunerState state;
  ActionDecision decision;
  Rule rule = Rule::Normal;
};

TunerState init_state(const TunerConfig& cfg, const TunableParams& initial);

/// One multiplicative step, clamped into `bounds`.
std::uint32_t apply_step(std::uint32_t value, Direction direction, const Bounds& bounds) noexcept;

Improvement evaluate_improvement(double prev_bw, double cur_bw, double eps) noexcept;

bool detect_contention(const WindowMetrics& prev, const WindowMetrics& cur,
                       const TunerConfig& cfg) noexcept;

/// Decide the next action. Rules, first match wins:
///   Idle       - neither transfers nor caching reach the idle threshold: Hold.
///   Bootstrap  - no previous action: step the scheduled parameter in the
///                initial direction.
///   Contention - undo the previous action exactly.
///   Normal     - keep or invert the previous direction based on bandwidth
///                improvement and step the scheduled parameter.
///                With per-parameter memory the verdict is stored for the
///                parameter that moved and the scheduled parameter steps in
///                its own stored direction.
/// The turn counter always advances and the window becomes `prev_window`.
Plan plan_action(const TunerConfig& cfg, const TunerState& state, const WindowMetrics& window);

/// Convenience owner of a config and evolving state.
class Tuner {
 public:
  Tuner(TunerConfig cfg, const TunableParams& initial)
      : cfg_(std::move(cfg)), state_(init_state(cfg_, initial)) {}

  const ActionDecision& observe(const WindowMetrics& window) {
    Plan plan = plan_action(cfg_, state_, window);
    state_ = std::move(plan.state);
    last_ = plan.decision;
    last_rule_ = plan.rule;
    return last_;
  }

  const TunerConfig& config() const noexcept { return cfg_; }
  const TunerState& state() const noexcept { return state_; }
  const TunableParams& params() const noexcept { return state_.params; }
  Rule last_rule() const noexcept { return last_rule_; }

 private:
  TunerConfig cfg_;
  TunerState state_;
  ActionDecision last_ = Hold{};
  Rule last_rule_ = Rule::Idle;
};

}  // namespace iopathtune
