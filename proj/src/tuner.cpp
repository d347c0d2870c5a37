#include "iopathtune/tuner.hpp"

#include <cmath>

namespace iopathtune {

Param param_from_string(std::string_view s) {
  if (s == "max_pages_per_rpc" || s == "mppr") return Param::MaxPagesPerRpc;
  if (s == "max_rpcs_in_flight" || s == "mrif") return Param::MaxRpcsInFlight;
  throw ConfigError("", "unknown parameter '" + std::string(s) + "'");
}

Direction direction_from_string(std::string_view s) {
  if (s == "multiply") return Direction::Multiply;
  if (s == "divide") return Direction::Divide;
  throw ConfigError("", "unknown direction '" + std::string(s) + "'");
}

DirectionMemory direction_memory_from_string(std::string_view s) {
  if (s == "global") return DirectionMemory::Global;
  if (s == "per_param") return DirectionMemory::PerParam;
  throw ConfigError("", "unknown direction memory '" + std::string(s) + "' (expected global or per_param)");
}

namespace {

void check_bounds(const Bounds& b, const std::string& key) {
  if (!is_power_of_two(b.min) || !is_power_of_two(b.max))
    throw ConfigError(key, "bounds must be powers of two");
  if (b.min > b.max) throw ConfigError(key, "min exceeds max");
}

void check_value(std::uint32_t v, const Bounds& b, const std::string& key) {
  if (!is_power_of_two(v))
    throw ConfigError(key, std::to_string(v) + " is not a power of two");
  if (!b.contains(v))
    throw ConfigError(key, std::to_string(v) + " outside [" + std::to_string(b.min) + ", " +
                               std::to_string(b.max) + "]");
}

}  // namespace

void validate_params(const TunableParams& params, const Bounds& mppr, const Bounds& mrif) {
  check_value(params.max_pages_per_rpc, mppr, "max_pages_per_rpc");
  check_value(params.max_rpcs_in_flight, mrif, "max_rpcs_in_flight");
}

bool WindowMetrics::valid() const noexcept {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0; };
  return ok(dirty_bytes) && ok(page_cache_rate) && ok(rpc_gen_rate) && ok(transfer_bw) &&
         std::isfinite(window_len) && window_len > 0;
}

void TunerConfig::validate() const {
  if (!(period_s > 0)) throw ConfigError("period_s", "must be positive");
  if (!(improve_eps > 0 && improve_eps < 1)) throw ConfigError("improve_eps", "must be in (0, 1)");
  if (!(contention_drop > 0 && contention_drop < 1))
    throw ConfigError("contention_drop", "must be in (0, 1)");
  if (!(supply_hold > 0 && supply_hold <= 1))
    throw ConfigError("supply_hold", "must be in (0, 1]");
  if (!(idle_threshold >= 0)) throw ConfigError("idle_threshold", "must be non-negative");
  if (page_size == 0) throw ConfigError("page_size", "must be positive");
  check_bounds(mppr_bounds, "mppr_bounds");
  check_bounds(mrif_bounds, "mrif_bounds");
}

std::string_view decision_kind(const ActionDecision& d) noexcept {
  switch (d.index()) {
    case 0: return "hold";
    case 1: return "apply";
    default: return "revert";
  }
}

TunerState init_state(const TunerConfig& cfg, const TunableParams& initial) {
  cfg.validate();
  validate_params(initial, cfg.mppr_bounds, cfg.mrif_bounds);
  TunerState s;
  s.next_param = cfg.initial_param;
  s.params = initial;
  s.directions = {cfg.initial_direction, cfg.initial_direction};
  return s;
}

std::uint32_t apply_step(std::uint32_t value, Direction direction, const Bounds& bounds) noexcept {
  const std::uint64_t stepped =
      direction == Direction::Multiply ? std::uint64_t{value} * 2 : std::uint64_t{value} / 2;
  if (stepped < bounds.min) return bounds.min;
  if (stepped > bounds.max) return bounds.max;
  return static_cast<std::uint32_t>(stepped);
}

Improvement evaluate_improvement(double prev_bw, double cur_bw, double eps) noexcept {
  if (prev_bw == 0) return cur_bw > 0 ? Improvement::Improved : Improvement::NotImproved;
  return cur_bw >= prev_bw * (1.0 + eps) ? Improvement::Improved : Improvement::NotImproved;
}

bool detect_contention(const WindowMetrics& prev, const WindowMetrics& cur,
                       const TunerConfig& cfg) noexcept {
  const bool delivery_collapsed = cur.transfer_bw < (1.0 - cfg.contention_drop) * prev.transfer_bw;
  const bool supply_sustained = cur.rpc_gen_rate >= cfg.supply_hold * prev.rpc_gen_rate;
  const bool backlog_growing = cur.dirty_bytes >= prev.dirty_bytes;
  return delivery_collapsed && supply_sustained && backlog_growing;
}

Plan plan_action(const TunerConfig& cfg, const TunerState& state, const WindowMetrics& window) {
  Plan plan{state, Hold{}, Rule::Idle};
  TunerState& next = plan.state;
  next.turn = state.turn + 1;
  next.prev_window = window;

  const double cached_bytes_rate = window.page_cache_rate * static_cast<double>(cfg.page_size);
  if (window.transfer_bw < cfg.idle_threshold && cached_bytes_rate < cfg.idle_threshold) {
    return plan;
  }

  auto step = [&](Param param, Direction dir) {
    const std::uint32_t pre = next.params.get(param);
    const std::uint32_t post = apply_step(pre, dir, cfg.bounds(param));
    const TuningAction action{param, dir, pre, post};
    next.params.set(param, post);
    next.last_action = action;
    next.next_param = other(param);
    plan.decision = Apply{action};
  };

  if (!state.last_action) {
    plan.rule = Rule::Bootstrap;
    step(state.next_param, cfg.initial_direction);
    return plan;
  }

  const TuningAction& last = *state.last_action;
  if (state.prev_window && detect_contention(*state.prev_window, window, cfg)) {
    plan.rule = Rule::Contention;
    const std::uint32_t replaced = next.params.get(last.param);
    next.params.set(last.param, last.pre_value);
    next.last_action = TuningAction{last.param, opposite(last.direction), replaced, last.pre_value};
    plan.decision = Revert{last.param, last.pre_value, replaced};
    return plan;
  }

  plan.rule = Rule::Normal;
  // A state without a previous window has nothing to compare against.
  const Improvement verdict =
      state.prev_window
          ? evaluate_improvement(state.prev_window->transfer_bw, window.transfer_bw, cfg.improve_eps)
          : Improvement::NotImproved;
  const Direction learned = verdict == Improvement::Improved ? last.direction : opposite(last.direction);
  if (cfg.memory == DirectionMemory::Global) {
    next.directions = {learned, learned};
  } else {
    next.directions[static_cast<std::size_t>(last.param)] = learned;
  }
  step(state.next_param, next.directions[static_cast<std::size_t>(state.next_param)]);
  return plan;
}

}  // namespace iopathtune
