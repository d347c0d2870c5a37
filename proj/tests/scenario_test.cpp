#include <doctest.h>

#include <filesystem>

#include "iopathtune/scenario.hpp"

using namespace iopathtune;

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  FAIL("accepted: " << text);
  return {};
}

const char* kMinimal = R"({
  "clients": [{"id": "a", "schedule": [{"start_s": 0, "workload": {"pattern": "random", "op": "write", "request_size": 8192}}]}]
})";

}  // namespace

TEST_CASE("minimal scenario takes defaults") {
  const Scenario s = parse_scenario(kMinimal);
  CHECK(s.sim.duration_s == 600);
  CHECK(s.sim.tick_ms == 10);
  CHECK(s.server.capacity == 1.25e9);
  CHECK(s.server.rpc_overhead == 0.4e-3);
  CHECK(s.server.rtt == 0.5e-3);
  CHECK(s.tuner_enabled);
  CHECK(s.tuner == TunerConfig{});
  CHECK(s.defaults == TunableParams{256, 8});
  REQUIRE(s.clients.size() == 1);
  CHECK(s.clients[0].max_dirty_bytes == 256ull << 20);
  CHECK(s.clients[0].schedule.phases[0].spec.streams == 1);
  CHECK_FALSE(s.clients[0].schedule.phases[0].spec.rate_limit);
}

TEST_CASE("templates load and survive a round trip") {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(IOPATHTUNE_SOURCE_DIR) / "scenarios")) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().filename().string());
    const Scenario s = load_scenario(e.path());
    CHECK(s.name == e.path().stem().string());
    const std::string canon = scenario_to_json(s);
    CHECK(parse_scenario(canon) == s);
    CHECK(scenario_to_json(parse_scenario(canon)) == canon);
    ++n;
  }
  CHECK(n >= 16);
}

TEST_CASE("template shapes") {
  const auto dir = std::filesystem::path(IOPATHTUNE_SOURCE_DIR) / "scenarios";
  const Scenario sd = load_scenario(dir / "dynamic-6x300.json");
  CHECK(sd.sim.duration_s == 2100);
  REQUIRE(sd.clients[0].schedule.phases.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(sd.clients[0].schedule.phases[i].start_s == 300.0 * i);

  const Scenario s2 = load_scenario(dir / "multiclient-5.json");
  REQUIRE(s2.clients.size() == 5);
  CHECK(s2.clients[0].schedule.phases[0].spec.streams == 5);
  for (const auto& c : s2.clients) CHECK(c.schedule.phases[0].spec.request_size == 1u << 20);
  CHECK(s2.clients[4].schedule.phases[0].spec.whole_file);
}

TEST_CASE("errors name the offending key") {
  CHECK(error_key("{") == "<root>");
  CHECK(error_key("{}") == "clients");
  CHECK(error_key(R"({"clients": [], "colour": 1})") == "colour");
  CHECK(error_key(R"({"clients": []})") == "clients");
  CHECK(error_key(R"({"sim": {"duration_s": "long"}, "clients": []})") == "sim.duration_s");
  CHECK(error_key(R"({"server": {"capcity": 1}, "clients": []})") == "server.capcity");
  CHECK(error_key(R"({"tuner": {"initial_direction": "up"}, "clients": []})") == "tuner.initial_direction");
  CHECK(error_key(R"({"tuner": {"direction_memory": "both"}, "clients": []})") == "tuner.direction_memory");
  CHECK(error_key(R"({"tuner": {"mppr_bounds": [16]}, "clients": []})") == "tuner.mppr_bounds");
  CHECK(error_key(R"({"defaults": {"max_pages_per_rpc": 300, "max_rpcs_in_flight": 8}, )"
                  R"("clients": [{"id": "a", "schedule": [{"start_s": 0, "workload": {"pattern": "random", "op": "write", "request_size": 8192}}]}]})") ==
        "defaults.max_pages_per_rpc");
  CHECK(error_key(R"({"clients": [{"id": "a", "schedule": [{"start_s": 0, "workload": {"pattern": "zigzag", "op": "write", "request_size": 8192}}]}]})") ==
        "clients[0].schedule[0].workload.pattern");
  CHECK(error_key(R"({"clients": [{"id": "a", "schedule": [{"start_s": 0, "workload": {"pattern": "random", "op": "write", "request_size": -4}}]}]})") ==
        "clients[0].schedule[0].workload.request_size");
  CHECK(error_key(R"({"clients": [{"id": "a", "schedule": [{"start_s": 0, "workload": {"pattern": "random", "op": "write", "request_size": 8192}}, )"
                  R"({"start_s": 0.005, "workload": {"pattern": "random", "op": "write", "request_size": 8192}}]}]})") ==
        "clients[0].schedule[1].start_s");
}

TEST_CASE("unreadable file is an I/O error, not a config error") {
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), std::system_error);
}
