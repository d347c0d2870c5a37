#pragma once

// Deterministic simulation of N PFS clients sharing one storage server.
//
// Time advances in fixed ticks. At each tick start the application streams
// write into the dirty cache (or issue synchronous reads), dirty pages are
// packed into RPCs and RPCs are dispatched up to the in-flight window.
// Between tick starts the server, the network and the acknowledgements are
// resolved at nanosecond resolution, so per-RPC costs far below the tick
// length still add up exactly. Tuning periods fall on tick boundaries.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iopathtune/metrics.hpp"
#include "iopathtune/tuner.hpp"
#include "iopathtune/workload.hpp"

namespace iopathtune {

inline constexpr std::uint64_t kMiB = std::uint64_t{1} << 20;

/// One storage server with a single FIFO service queue shared by all clients.
///
/// Serving an RPC costs
///   rpc_overhead + (extents - 1) * extent_overhead
///     + bytes / capacity * (1 + (queued / congestion_knee)^congestion_exponent)
/// where `queued` is the byte count dispatched to the server and not yet
/// served. The last factor models the loss of streaming efficiency when the
/// server backlog grows.
struct ServerModel {
  double capacity = 1.25e9;        // bytes/s
  double rpc_overhead = 0.4e-3;    // s per RPC
  double rtt = 0.5e-3;             // s round trip
  double extent_overhead = 20e-6;  // s per additional discontiguous extent
  double congestion_knee = 128.0 * kMiB;  // bytes; 0 disables the congestion term
  double congestion_exponent = 2.0;

  void validate() const;
  bool operator==(const ServerModel&) const = default;
};

struct ClientSpec {
  std::string id;
  PhaseSchedule schedule;
  std::uint64_t max_dirty_bytes = 256 * kMiB;
  std::optional<TunableParams> params;  // overrides Scenario::defaults
  bool operator==(const ClientSpec&) const = default;
};

struct SimConfig {
  double duration_s = 600;
  std::uint32_t tick_ms = 10;
  std::uint64_t seed = 1;
  std::uint32_t page_size = 4096;
  double flush_age_s = 1.0;
  bool operator==(const SimConfig&) const = default;
};

struct Scenario {
  std::string name;
  std::vector<ClientSpec> clients;
  ServerModel server;
  SimConfig sim;
  TunerConfig tuner;
  bool tuner_enabled = true;
  TunableParams defaults;

  /// Throws ConfigError with a dotted key path.
  void validate() const;
  TunableParams initial_params(std::size_t client) const {
    return clients[client].params.value_or(defaults);
  }
  bool operator==(const Scenario&) const = default;
};

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One tuning turn as seen by the simulation.
struct TurnRecord {
  std::uint64_t turn = 0;
  double time_s = 0;
  TunableParams params;  // in effect during the window
  WindowMetrics window;
  ActionDecision decision;
};

struct PhaseSummary {
  std::size_t index = 0;
  double start_s = 0;
  double end_s = 0;
  double mean_bw = 0;    // bytes/s over the whole phase
  double steady_bw = 0;  // bytes/s over the final half of the phase
};

struct ClientResult {
  std::string id;
  std::vector<Snapshot> snapshots;  // one per tuning period, starting at t = 0
  std::vector<TurnRecord> turns;
  std::vector<std::uint64_t> acked_at_tick;  // cumulative acked bytes at each tick boundary
  std::vector<PhaseSummary> phases;
  TunableParams final_params;
};

struct SimResult {
  std::string scenario;
  double tick_s = 0.01;
  double duration_s = 0;
  std::vector<ClientResult> clients;

  /// Mean acked bandwidth of one client over [t0, t1] (tick resolution).
  double client_bw(std::size_t client, double t0, double t1) const;
  double total_bw(double t0, double t1) const;
  /// Total bandwidth over the final half of the run.
  double steady_total_bw() const { return total_bw(duration_s / 2, duration_s); }
};

/// Live simulation. `run()` drives one to completion; tests may step manually.
class Simulation {
 public:
  struct Options {
    bool check_invariants = false;  // verify conservation and window bounds every tick
  };

  explicit Simulation(Scenario scenario);
  Simulation(Scenario scenario, Options options);
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  /// Takes effect for formation and dispatch from the next tick on. RPCs that
  /// are already formed or in flight keep their size and are not recalled.
  void set_params(std::string_view client_id, const TunableParams& params);
  TunableParams params(std::string_view client_id) const;

  Snapshot snapshot(std::string_view client_id) const;

  double now() const noexcept;
  bool finished() const noexcept;
  /// Advance one tick (including any tuning turn at its start).
  void step();
  SimResult run();
  /// Result for the portion simulated so far.
  SimResult result() const;

  struct ClientProbe {
    std::uint64_t in_flight = 0;
    std::uint64_t queued_rpcs = 0;
    std::uint64_t unformed_bytes = 0;
    std::uint64_t queued_bytes = 0;
    std::uint64_t in_flight_bytes = 0;
    std::uint64_t acked_write_bytes = 0;
    std::uint64_t issued_write_bytes = 0;
    std::uint32_t largest_rpc_pages_formed = 0;
  };
  ClientProbe probe(std::string_view client_id) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SimResult run(const Scenario& scenario);

/// Full power-of-two grid within the tuner bounds of `scenario`.
struct SweepGrid {
  std::vector<std::uint32_t> mppr;
  std::vector<std::uint32_t> mrif;

  static SweepGrid full(const TunerConfig& cfg);
  std::size_t size() const noexcept { return mppr.size() * mrif.size(); }
};

struct SweepPoint {
  TunableParams params;
  double mean_bw = 0;                 // total steady-state bandwidth (final half of the run)
  std::vector<double> phase_steady;   // total steady-state bandwidth per phase
};

struct SweepResult {
  SweepGrid grid;
  std::vector<SweepPoint> points;  // mppr-major order
  std::size_t argmax = 0;          // first strict maximum in grid order
  std::vector<std::size_t> phase_argmax;

  const SweepPoint& best() const { return points.at(argmax); }
  const SweepPoint& at(std::uint32_t mppr, std::uint32_t mrif) const;
};

/// Runs `scenario` with the tuner off once per grid point, every client using
/// the grid point's params. Points are independent and run on up to `jobs`
/// threads; results do not depend on `jobs`.
SweepResult sweep(const Scenario& scenario, const SweepGrid& grid, unsigned jobs = 1);

/// Phase boundaries shared by every client, or the first client's when they differ.
std::vector<double> phase_starts(const Scenario& scenario);

}  // namespace iopathtune
