#include "iopathtune/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace iopathtune {

namespace {

using nlohmann::json;

// Strict view over one JSON object: tracks the key path and rejects keys
// that were never asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  ~Reader() = default;

  std::string key_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  bool has(std::string_view key) {
    known_.insert(std::string(key));
    return j_.contains(key) && !j_.at(std::string(key)).is_null();
  }

  const json& raw(std::string_view key) {
    known_.insert(std::string(key));
    if (!j_.contains(key)) throw ConfigError(key_path(key), "missing required key");
    return j_.at(std::string(key));
  }

  double number(std::string_view key, std::optional<double> fallback = std::nullopt) {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(key_path(key), "missing required key");
    }
    const json& v = j_.at(std::string(key));
    if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
    return v.get<double>();
  }

  std::uint64_t unsigned_int(std::string_view key, std::optional<std::uint64_t> fallback = std::nullopt) {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(key_path(key), "missing required key");
    }
    const json& v = j_.at(std::string(key));
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0 && d == static_cast<double>(static_cast<std::uint64_t>(d)))
        return static_cast<std::uint64_t>(d);
    }
    throw ConfigError(key_path(key), "expected a non-negative integer");
  }

  std::uint32_t u32(std::string_view key, std::optional<std::uint32_t> fallback = std::nullopt) {
    const std::uint64_t v = unsigned_int(key, fallback);
    if (v > 0xffffffffu) throw ConfigError(key_path(key), "value too large");
    return static_cast<std::uint32_t>(v);
  }

  std::string string(std::string_view key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(key_path(key), "missing required key");
    }
    const json& v = j_.at(std::string(key));
    if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(std::string_view key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(std::string(key));
    if (!v.is_boolean()) throw ConfigError(key_path(key), "expected true or false");
    return v.get<bool>();
  }

  Bounds bounds(std::string_view key, Bounds fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(std::string(key));
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned())
      throw ConfigError(key_path(key), "expected [min, max]");
    return Bounds{v[0].get<std::uint32_t>(), v[1].get<std::uint32_t>()};
  }

  /// Call after reading every key.
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!known_.count(k)) throw ConfigError(key_path(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

template <typename Fn>
auto with_key(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(key, e.message());
  }
}

TunableParams read_params(const json& j, const std::string& path) {
  Reader r(j, path);
  TunableParams p;
  p.max_pages_per_rpc = r.u32("max_pages_per_rpc");
  p.max_rpcs_in_flight = r.u32("max_rpcs_in_flight");
  r.finish();
  return p;
}

WorkloadSpec read_workload(const json& j, const std::string& path) {
  Reader r(j, path);
  WorkloadSpec w;
  w.pattern = with_key(r.key_path("pattern"), [&] { return pattern_from_string(r.string("pattern")); });
  w.op = with_key(r.key_path("op"), [&] { return op_from_string(r.string("op")); });
  w.request_size = r.unsigned_int("request_size");
  w.streams = r.u32("streams", 1);
  if (r.has("rate_limit")) w.rate_limit = r.number("rate_limit");
  if (r.has("whole_file")) w.whole_file = r.unsigned_int("whole_file");
  w.extent_bytes = r.unsigned_int("extent_bytes", kDefaultExtentBytes);
  r.finish();
  return w;
}

ClientSpec read_client(const json& j, const std::string& path) {
  Reader r(j, path);
  ClientSpec c;
  c.id = r.string("id");
  c.max_dirty_bytes = r.unsigned_int("max_dirty_bytes", 256 * kMiB);
  if (r.has("params")) c.params = read_params(r.raw("params"), r.key_path("params"));
  const json& sched = r.raw("schedule");
  if (!sched.is_array()) throw ConfigError(r.key_path("schedule"), "expected an array of phases");
  for (std::size_t i = 0; i < sched.size(); ++i) {
    const std::string where = r.key_path("schedule") + "[" + std::to_string(i) + "]";
    Reader pr(sched[i], where);
    Phase p;
    p.start_s = pr.number("start_s");
    p.spec = read_workload(pr.raw("workload"), pr.key_path("workload"));
    pr.finish();
    c.schedule.phases.push_back(p);
  }
  r.finish();
  return c;
}

}  // namespace

Scenario parse_scenario(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }

  Scenario s;
  Reader r(root, "");
  s.name = r.string("name", "unnamed");

  if (r.has("sim")) {
    Reader sr(r.raw("sim"), "sim");
    s.sim.duration_s = sr.number("duration_s", s.sim.duration_s);
    s.sim.tick_ms = sr.u32("tick_ms", s.sim.tick_ms);
    s.sim.seed = sr.unsigned_int("seed", s.sim.seed);
    s.sim.page_size = sr.u32("page_size", s.sim.page_size);
    s.sim.flush_age_s = sr.number("flush_age_s", s.sim.flush_age_s);
    sr.finish();
  }
  if (r.has("server")) {
    Reader sr(r.raw("server"), "server");
    s.server.capacity = sr.number("capacity", s.server.capacity);
    s.server.rpc_overhead = sr.number("rpc_overhead", s.server.rpc_overhead);
    s.server.rtt = sr.number("rtt", s.server.rtt);
    s.server.extent_overhead = sr.number("extent_overhead", s.server.extent_overhead);
    s.server.congestion_knee = sr.number("congestion_knee", s.server.congestion_knee);
    s.server.congestion_exponent = sr.number("congestion_exponent", s.server.congestion_exponent);
    sr.finish();
  }
  if (r.has("tuner")) {
    Reader tr(r.raw("tuner"), "tuner");
    TunerConfig& t = s.tuner;
    s.tuner_enabled = tr.boolean("enabled", true);
    t.period_s = tr.number("period_s", t.period_s);
    t.improve_eps = tr.number("improve_eps", t.improve_eps);
    t.contention_drop = tr.number("contention_drop", t.contention_drop);
    t.supply_hold = tr.number("supply_hold", t.supply_hold);
    t.idle_threshold = tr.number("idle_threshold", t.idle_threshold);
    t.mppr_bounds = tr.bounds("mppr_bounds", t.mppr_bounds);
    t.mrif_bounds = tr.bounds("mrif_bounds", t.mrif_bounds);
    t.initial_direction = with_key(tr.key_path("initial_direction"), [&] {
      return direction_from_string(tr.string("initial_direction", "multiply"));
    });
    t.initial_param = with_key(tr.key_path("initial_param"), [&] {
      return param_from_string(tr.string("initial_param", "max_pages_per_rpc"));
    });
    t.memory = with_key(tr.key_path("direction_memory"), [&] {
      return direction_memory_from_string(tr.string("direction_memory", "per_param"));
    });
    tr.finish();
  }
  s.tuner.page_size = s.sim.page_size;
  if (r.has("defaults")) s.defaults = read_params(r.raw("defaults"), "defaults");

  const json& clients = r.raw("clients");
  if (!clients.is_array()) throw ConfigError("clients", "expected an array");
  for (std::size_t i = 0; i < clients.size(); ++i)
    s.clients.push_back(read_client(clients[i], "clients[" + std::to_string(i) + "]"));
  r.finish();

  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                            "cannot read " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string scenario_to_json(const Scenario& s) {
  auto params = [](const TunableParams& p) {
    return json{{"max_pages_per_rpc", p.max_pages_per_rpc}, {"max_rpcs_in_flight", p.max_rpcs_in_flight}};
  };
  json root;
  root["name"] = s.name;
  root["sim"] = {{"duration_s", s.sim.duration_s}, {"tick_ms", s.sim.tick_ms}, {"seed", s.sim.seed},
                 {"page_size", s.sim.page_size}, {"flush_age_s", s.sim.flush_age_s}};
  root["server"] = {{"capacity", s.server.capacity},
                    {"rpc_overhead", s.server.rpc_overhead},
                    {"rtt", s.server.rtt},
                    {"extent_overhead", s.server.extent_overhead},
                    {"congestion_knee", s.server.congestion_knee},
                    {"congestion_exponent", s.server.congestion_exponent}};
  root["tuner"] = {{"enabled", s.tuner_enabled},
                   {"period_s", s.tuner.period_s},
                   {"improve_eps", s.tuner.improve_eps},
                   {"contention_drop", s.tuner.contention_drop},
                   {"supply_hold", s.tuner.supply_hold},
                   {"idle_threshold", s.tuner.idle_threshold},
                   {"mppr_bounds", {s.tuner.mppr_bounds.min, s.tuner.mppr_bounds.max}},
                   {"mrif_bounds", {s.tuner.mrif_bounds.min, s.tuner.mrif_bounds.max}},
                   {"initial_direction", std::string(to_string(s.tuner.initial_direction))},
                   {"initial_param", std::string(to_string(s.tuner.initial_param))},
                   {"direction_memory", std::string(to_string(s.tuner.memory))}};
  root["defaults"] = params(s.defaults);
  json clients = json::array();
  for (const ClientSpec& c : s.clients) {
    json jc{{"id", c.id}, {"max_dirty_bytes", c.max_dirty_bytes}};
    if (c.params) jc["params"] = params(*c.params);
    json sched = json::array();
    for (const Phase& p : c.schedule.phases) {
      const WorkloadSpec& w = p.spec;
      json jw{{"pattern", std::string(to_string(w.pattern))},
              {"op", std::string(to_string(w.op))},
              {"request_size", w.request_size},
              {"streams", w.streams},
              {"rate_limit", w.rate_limit ? json(*w.rate_limit) : json(nullptr)},
              {"whole_file", w.whole_file ? json(*w.whole_file) : json(nullptr)},
              {"extent_bytes", w.extent_bytes}};
      sched.push_back(json{{"start_s", p.start_s}, {"workload", jw}});
    }
    jc["schedule"] = sched;
    clients.push_back(jc);
  }
  root["clients"] = clients;
  return root.dump(2) + "\n";
}

}  // namespace iopathtune
