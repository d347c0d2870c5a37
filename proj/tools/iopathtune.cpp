// iopathtune: simulate, sweep, replay and report.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 trace parse error,
// 4 I/O error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <system_error>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "iopathtune/harness.hpp"
#include "iopathtune/scenario.hpp"

namespace fs = std::filesystem;
using namespace iopathtune;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kTraceError = 3;
constexpr int kIoError = 4;

void init_logging() {
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("IOPATHTUNE_LOG")) {
    const std::string v = env;
    if (v == "error") spdlog::set_level(spdlog::level::err);
    else if (v == "warn") spdlog::set_level(spdlog::level::warn);
    else if (v == "info") spdlog::set_level(spdlog::level::info);
    else if (v == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring IOPATHTUNE_LOG={} (expected error, warn, info or debug)", v);
  }
}

Scenario load_or_exit(const std::string& path, int& code) {
  try {
    return load_scenario(path);
  } catch (const ConfigError& e) {
    spdlog::error("config error in {}: {}", path, e.what());
    code = kConfigError;
  } catch (const std::system_error& e) {
    spdlog::error("{}", e.what());
    code = kIoError;
  }
  return {};
}

int cmd_simulate(const std::string& config, const std::string& out_dir, std::optional<std::uint64_t> seed,
                 bool no_tuner) {
  int code = kOk;
  Scenario scn = load_or_exit(config, code);
  if (code != kOk) return code;
  if (seed) scn.sim.seed = *seed;
  if (no_tuner) scn.tuner_enabled = false;

  spdlog::info("simulating '{}' for {} s ({} clients, tuner {})", scn.name, scn.sim.duration_s,
               scn.clients.size(), scn.tuner_enabled ? "on" : "off");
  const SimResult result = run(scn);
  try {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "timeseries.csv", timeseries_csv(result));
    write_file(fs::path(out_dir) / "snapshots.trace", snapshot_trace(result));
    write_file(fs::path(out_dir) / "summary.csv", summary_csv(scn, result));
    write_file(fs::path(out_dir) / "decisions.csv", decisions_csv(decision_log(result)));
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kIoError;
  }
  for (std::size_t i = 0; i < result.clients.size(); ++i) {
    const auto& c = result.clients[i];
    spdlog::info("{}: steady {:.1f} MB/s, final mppr={} mrif={}", c.id,
                 to_mbps(result.client_bw(i, result.duration_s / 2, result.duration_s)),
                 c.final_params.max_pages_per_rpc, c.final_params.max_rpcs_in_flight);
  }
  return kOk;
}

int cmd_sweep(const std::string& config, const std::string& out_path, unsigned jobs) {
  int code = kOk;
  const Scenario scn = load_or_exit(config, code);
  if (code != kOk) return code;
  const SweepGrid grid = SweepGrid::full(scn.tuner);
  spdlog::info("sweeping '{}' over {} points with {} jobs", scn.name, grid.size(), jobs);
  const SweepResult result = sweep(scn, grid, jobs);
  try {
    const fs::path p(out_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file(p, sweep_csv(result));
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kIoError;
  }
  return kOk;
}

int cmd_replay(const std::string& trace, const std::string& out_path, const std::string& config) {
  TunerConfig cfg;
  if (!config.empty()) {
    int code = kOk;
    const Scenario scn = load_or_exit(config, code);
    if (code != kOk) return code;
    cfg = scn.tuner;
  }
  std::string text;
  try {
    text = read_file(trace);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kIoError;
  }
  std::vector<DecisionRow> rows;
  try {
    rows = replay_trace(text, cfg);
  } catch (const ReplayError& e) {
    spdlog::error("trace {}: {}", trace, e.what());
    return kTraceError;
  }
  try {
    const fs::path p(out_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file(p, decisions_csv(rows));
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kIoError;
  }
  spdlog::info("replayed {} decisions", rows.size());
  return kOk;
}

int cmd_report(const std::string& in_dir, const std::string& out_path, const std::string& format,
               const std::string& baseline) {
  fs::path tuned = in_dir;
  fs::path base = baseline;
  // A directory holding `tuned/` and `default/` runs is reported as a comparison.
  if (!fs::exists(tuned / "timeseries.csv") && fs::exists(tuned / "tuned" / "timeseries.csv")) {
    if (base.empty() && fs::exists(tuned / "default" / "summary.csv")) base = tuned / "default";
    tuned = tuned / "tuned";
  }
  try {
    const std::string text =
        render_report(tuned, base, format == "svg" ? ReportFormat::Svg : ReportFormat::Ascii);
    if (out_path.empty() || out_path == "-") {
      std::cout << text;
    } else {
      const fs::path p(out_path);
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      write_file(p, text);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kIoError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Client-side RPC parameter tuner and I/O path simulator"};
  app.require_subcommand(1);

  std::string config, out, trace, in_dir, format = "ascii", baseline, replay_config;
  std::optional<std::uint64_t> seed;
  bool no_tuner = false;
  unsigned jobs = 1;

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write CSV time series");
  sim->add_option("config", config, "Scenario file")->required();
  sim->add_option("-o,--out", out, "Output directory")->required();
  sim->add_option("--seed", seed, "Override the scenario seed");
  sim->add_flag("--no-tuner", no_tuner, "Keep the initial parameters for the whole run");

  auto* sw = app.add_subcommand("sweep", "Evaluate every static parameter pair on the grid");
  sw->add_option("config", config, "Scenario file")->required();
  sw->add_option("-o,--out", out, "Output CSV path")->required();
  sw->add_option("-j,--jobs", jobs, "Parallel simulations")->check(CLI::PositiveNumber);

  auto* rp = app.add_subcommand("replay", "Run the tuner over a recorded snapshot trace");
  rp->add_option("trace", trace, "Snapshot trace")->required();
  rp->add_option("-o,--out", out, "Output decisions CSV")->required();
  rp->add_option("--config", replay_config, "Scenario file whose tuner settings to use");

  auto* rep = app.add_subcommand("report", "Chart a simulate output directory");
  rep->add_option("in_dir", in_dir, "simulate output directory")->required();
  rep->add_option("-o,--out", out, "Output path (default stdout)");
  rep->add_option("--format", format, "svg or ascii")->check(CLI::IsMember({"svg", "ascii"}));
  rep->add_option("--baseline", baseline, "simulate output of a --no-tuner run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (*sim) return cmd_simulate(config, out, seed, no_tuner);
  if (*sw) return cmd_sweep(config, out, jobs);
  if (*rp) return cmd_replay(trace, out, replay_config);
  return cmd_report(in_dir, out, format, baseline);
}
