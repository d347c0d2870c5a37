#pragma once

// Output files and the trace replay used by the command-line tool.

#include <filesystem>
#include <string>
#include <vector>

#include "iopathtune/metrics.hpp"
#include "iopathtune/sim.hpp"

namespace iopathtune {

/// One row of decisions.csv.
struct DecisionRow {
  std::string client_id;
  std::uint64_t turn = 0;
  ActionDecision decision;
};

std::vector<DecisionRow> decision_log(const SimResult& result);

/// CSV text: client_id,turn,decision,param,old,new
std::string decisions_csv(const std::vector<DecisionRow>& rows);

/// CSV text: time_s,client_id,mppr,mrif,dirty_bytes,page_cache_rate,rpc_gen_rate,transfer_bw_mbps,decision
/// One row per client per tuning turn; params are the ones in effect during the window.
std::string timeseries_csv(const SimResult& result);

/// CSV text: client_id,phase,start_s,end_s,mean_bw_mbps,steady_bw_mbps
/// Per client per phase, then one `total` row per shared phase and for the whole run.
std::string summary_csv(const Scenario& scenario, const SimResult& result);

/// Concatenated snapshot records in time order, clients interleaved.
std::string snapshot_trace(const SimResult& result);

/// CSV text: mppr,mrif,mean_bw_mbps plus a `# argmax:` trailer.
std::string sweep_csv(const SweepResult& sweep);

class ReplayError : public std::runtime_error {
 public:
  ReplayError(int line, const std::string& what) : std::runtime_error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Runs the tuner over windows derived from a recorded trace, per client.
/// Initial params come from each client's first snapshot. Rows are ordered by
/// turn, then by first appearance of the client in the trace.
std::vector<DecisionRow> replay_trace(std::string_view trace_text, const TunerConfig& cfg);

/// Writes text to `path`, throwing std::system_error on failure.
void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

enum class ReportFormat { Svg, Ascii };

/// Renders a report from simulate output directories. `tuned_dir` must hold
/// timeseries.csv and summary.csv; `baseline_dir` may be empty.
std::string render_report(const std::filesystem::path& tuned_dir,
                          const std::filesystem::path& baseline_dir, ReportFormat format);

inline double to_mbps(double bytes_per_s) { return bytes_per_s / 1e6; }

}  // namespace iopathtune
