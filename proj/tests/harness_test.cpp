#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "iopathtune/harness.hpp"
#include "iopathtune/scenario.hpp"

namespace fs = std::filesystem;
using namespace iopathtune;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iopathtune-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + IOPATHTUNE_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path template_path(const std::string& name) {
  return fs::path(IOPATHTUNE_SOURCE_DIR) / "scenarios" / (name + ".json");
}

// A short copy of a template so CLI round trips stay quick.
fs::path short_scenario(const fs::path& dir, const std::string& name, double duration) {
  Scenario s = load_scenario(template_path(name));
  s.sim.duration_s = duration;
  const fs::path out = dir / (name + ".json");
  write_file(out, scenario_to_json(s));
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("csv headers") {
  Scenario s = load_scenario(template_path("multiclient-5"));
  s.sim.duration_s = 30;
  const SimResult r = run(s);
  CHECK(lines(timeseries_csv(r)).front() ==
        "time_s,client_id,mppr,mrif,dirty_bytes,page_cache_rate,rpc_gen_rate,transfer_bw_mbps,decision");
  CHECK(lines(summary_csv(s, r)).front() == "client_id,phase,start_s,end_s,mean_bw_mbps,steady_bw_mbps");
  CHECK(lines(decisions_csv(decision_log(r))).front() == "client_id,turn,decision,param,old,new");
  // 3 turns per client, clients interleaved
  const auto ts = lines(timeseries_csv(r));
  CHECK(ts.size() == 1 + 3 * 5);
  CHECK(ts[1].find(",node1,") != std::string::npos);
  CHECK(ts[2].find(",node2,") != std::string::npos);
  const auto summary = lines(summary_csv(s, r));
  CHECK(summary.back().rfind("total,all,", 0) == 0);
}

TEST_CASE("simulate writes the four outputs and replay reproduces its decisions") {
  const fs::path dir = scratch("sim");
  const fs::path cfg = short_scenario(dir, "multiclient-5-contention", 120);
  REQUIRE(cli("simulate " + q(cfg) + " -o " + q(dir / "out")) == 0);
  for (const char* f : {"timeseries.csv", "snapshots.trace", "summary.csv", "decisions.csv"})
    CHECK(fs::exists(dir / "out" / f));

  REQUIRE(cli("replay " + q(dir / "out" / "snapshots.trace") + " -o " + q(dir / "replay.csv") + " --config " +
              q(cfg)) == 0);
  CHECK(read_file(dir / "replay.csv") == read_file(dir / "out" / "decisions.csv"));
  CHECK(read_file(dir / "replay.csv").find(",revert,") != std::string::npos);

  // same thing in process
  const Scenario s = load_scenario(cfg);
  const SimResult r = run(s);
  CHECK(decisions_csv(replay_trace(snapshot_trace(r), s.tuner)) == decisions_csv(decision_log(r)));

  REQUIRE(cli("simulate " + q(cfg) + " -o " + q(dir / "again")) == 0);
  for (const char* f : {"timeseries.csv", "snapshots.trace", "summary.csv", "decisions.csv"})
    CHECK(read_file(dir / "again" / f) == read_file(dir / "out" / f));
}

TEST_CASE("--no-tuner holds every turn") {
  const fs::path dir = scratch("notuner");
  const fs::path cfg = short_scenario(dir, "standalone-seqwrite-1m", 60);
  REQUIRE(cli("simulate " + q(cfg) + " --no-tuner -o " + q(dir / "out")) == 0);
  const auto rows = lines(read_file(dir / "out" / "decisions.csv"));
  REQUIRE(rows.size() == 1 + 6);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i] == "node1," + std::to_string(i) + ",hold,,,");
  for (const auto& row : lines(read_file(dir / "out" / "timeseries.csv")))
    if (row.rfind("time_s", 0) != 0) CHECK(row.find(",node1,256,8,") != std::string::npos);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  write_file(dir / "bad.json", R"({"clients": [{"id": "a"}]})");
  CHECK(cli("simulate " + q(dir / "bad.json") + " -o " + q(dir / "out")) == 2);
  CHECK_FALSE(fs::exists(dir / "out"));
  CHECK(cli("simulate " + q(dir / "missing.json") + " -o " + q(dir / "out")) == 4);
  CHECK(cli("sweep " + q(dir / "bad.json") + " -o " + q(dir / "s.csv")) == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("simulate") == 2);
  CHECK(cli("sweep " + q(template_path("standalone-seqwrite-1m")) + " -o x.csv --jobs 0") == 2);

  CHECK(cli("replay " + q(dir / "missing.trace") + " -o " + q(dir / "d.csv")) == 4);
  write_file(dir / "garbled.trace", "snapshot_version: 1\ntimestamp_ms: soon\n");
  CHECK(cli("replay " + q(dir / "garbled.trace") + " -o " + q(dir / "d.csv")) == 3);

  // counter regression between two well-formed records
  Snapshot a;
  a.client_id = "node1";
  a.bytes_transferred_total = 1000;
  a.max_pages_per_rpc = 256;
  a.max_rpcs_in_flight = 8;
  Snapshot b = a;
  b.timestamp_ms = 10000;
  b.bytes_transferred_total = 10;
  write_file(dir / "regress.trace", serialize_snapshot(a) + serialize_snapshot(b));
  CHECK(cli("replay " + q(dir / "regress.trace") + " -o " + q(dir / "d.csv")) == 3);
  try {
    replay_trace(serialize_snapshot(a) + serialize_snapshot(b), {});
    FAIL("regression accepted");
  } catch (const ReplayError& e) {
    CHECK(e.line() == 11);
  }

  write_file(dir / "single.trace", serialize_snapshot(a));
  REQUIRE(cli("replay " + q(dir / "single.trace") + " -o " + q(dir / "single.csv")) == 0);
  CHECK(read_file(dir / "single.csv") == "client_id,turn,decision,param,old,new\n");

  CHECK(cli("report " + q(dir / "nothing") + " --format ascii") == 4);
}

TEST_CASE("sweep csv is the same for any job count") {
  const fs::path dir = scratch("sweep");
  const fs::path cfg = short_scenario(dir, "standalone-randwrite-1m", 20);
  REQUIRE(cli("sweep " + q(cfg) + " -o " + q(dir / "one.csv") + " --jobs 1") == 0);
  REQUIRE(cli("sweep " + q(cfg) + " -o " + q(dir / "eight.csv") + " -j 8") == 0);
  const std::string text = read_file(dir / "one.csv");
  CHECK(text == read_file(dir / "eight.csv"));
  const auto rows = lines(text);
  REQUIRE(rows.size() == 1 + 81 + 1);
  CHECK(rows.front() == "mppr,mrif,mean_bw_mbps");
  CHECK(rows[1].rfind("16,1,", 0) == 0);
  CHECK(rows[81].rfind("4096,256,", 0) == 0);
  CHECK(rows.back().rfind("# argmax: mppr=", 0) == 0);
}

TEST_CASE("report") {
  const fs::path dir = scratch("report");
  const fs::path cfg = short_scenario(dir, "multiclient-5", 60);
  REQUIRE(cli("simulate " + q(cfg) + " -o " + q(dir / "run" / "tuned")) == 0);
  REQUIRE(cli("simulate " + q(cfg) + " --no-tuner -o " + q(dir / "run" / "default")) == 0);

  REQUIRE(cli("report " + q(dir / "run" / "tuned") + " --format svg -o " + q(dir / "solo.svg")) == 0);
  const std::string solo = read_file(dir / "solo.svg");
  CHECK(solo.rfind("<svg", 0) == 0);
  std::size_t polylines = 0;
  for (auto p = solo.find("<polyline"); p != std::string::npos; p = solo.find("<polyline", p + 1)) ++polylines;
  CHECK(polylines == 3 * 5);  // bandwidth, mppr and mrif per client
  CHECK(solo.find("change</text>") == std::string::npos);

  REQUIRE(cli("report " + q(dir / "run") + " --format svg -o " + q(dir / "both.svg")) == 0);
  CHECK(read_file(dir / "both.svg").find("change</text>") != std::string::npos);

  REQUIRE(cli("report " + q(dir / "run") + " --format ascii -o " + q(dir / "both.txt")) == 0);
  const std::string ascii = read_file(dir / "both.txt");
  for (const char* id : {"node1", "node2", "node3", "node4", "node5"})
    CHECK(ascii.find(std::string("client ") + id + ":") != std::string::npos);
  CHECK(ascii.find("Total BW") != std::string::npos);

  // the improvement column is arithmetic on the two summary files
  const std::string text = render_report(dir / "run" / "tuned", dir / "run" / "default", ReportFormat::Ascii);
  CHECK(text == ascii);
  auto total_of = [](const std::string& summary) {
    for (const auto& l : lines(summary))
      if (l.rfind("total,all,", 0) == 0) {
        std::istringstream in(l);
        std::string f;
        for (int i = 0; i < 5; ++i) std::getline(in, f, ',');
        return std::stod(f);
      }
    return 0.0;
  };
  const double base = total_of(read_file(dir / "run" / "default" / "summary.csv"));
  const double tuned = total_of(read_file(dir / "run" / "tuned" / "summary.csv"));
  char want[128];
  std::snprintf(want, sizeof want, "%-14s %14.1f %14.1f %+9.2f%%", "Total BW", base, tuned,
                (tuned / base - 1) * 100);
  CHECK(ascii.find(want) != std::string::npos);
}
