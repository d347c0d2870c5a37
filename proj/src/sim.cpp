#include "iopathtune/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

namespace iopathtune {

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

std::int64_t to_ns(double seconds) { return std::llround(seconds * 1e9); }

bool is_token(const std::string& s) {
  return !s.empty() && s.find_first_of(" \t\r\n,") == std::string::npos;
}

}  // namespace

void ServerModel::validate() const {
  if (!(capacity > 0) || !std::isfinite(capacity)) throw ConfigError("server.capacity", "must be positive");
  if (!(rpc_overhead >= 0)) throw ConfigError("server.rpc_overhead", "must be non-negative");
  if (!(rtt >= 0)) throw ConfigError("server.rtt", "must be non-negative");
  if (!(extent_overhead >= 0)) throw ConfigError("server.extent_overhead", "must be non-negative");
  if (!(congestion_knee >= 0)) throw ConfigError("server.congestion_knee", "must be non-negative");
  if (!(congestion_exponent >= 1) || !std::isfinite(congestion_exponent))
    throw ConfigError("server.congestion_exponent", "must be at least 1");
}

void Scenario::validate() const {
  if (clients.empty()) throw ConfigError("clients", "at least one client is required");
  if (!(sim.duration_s > 0)) throw ConfigError("sim.duration_s", "must be positive");
  if (sim.tick_ms == 0) throw ConfigError("sim.tick_ms", "must be positive");
  if (sim.page_size == 0) throw ConfigError("sim.page_size", "must be positive");
  if (!(sim.flush_age_s >= 0)) throw ConfigError("sim.flush_age_s", "must be non-negative");
  const std::int64_t tick_ns = std::int64_t{sim.tick_ms} * 1'000'000;
  if (to_ns(sim.duration_s) % tick_ns != 0)
    throw ConfigError("sim.duration_s", "must be a whole number of ticks");
  server.validate();
  try {
    tuner.validate();
  } catch (const ConfigError& e) {
    throw e.nested("tuner");
  }
  if (to_ns(tuner.period_s) % tick_ns != 0)
    throw ConfigError("sim.tick_ms", "must divide tuner.period_s");
  if (tuner.page_size != sim.page_size)
    throw ConfigError("tuner.page_size", "must equal sim.page_size");
  try {
    validate_params(defaults, tuner.mppr_bounds, tuner.mrif_bounds);
  } catch (const ConfigError& e) {
    throw e.nested("defaults");
  }

  std::set<std::string> ids;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const ClientSpec& c = clients[i];
    const std::string where = "clients[" + std::to_string(i) + "]";
    if (!is_token(c.id)) throw ConfigError(where + ".id", "must be a non-empty token");
    if (!ids.insert(c.id).second) throw ConfigError(where + ".id", "duplicate client id '" + c.id + "'");
    if (c.max_dirty_bytes == 0) throw ConfigError(where + ".max_dirty_bytes", "must be positive");
    if (c.params) {
      try {
        validate_params(*c.params, tuner.mppr_bounds, tuner.mrif_bounds);
      } catch (const ConfigError& e) {
        throw e.nested(where + ".params");
      }
    }
    try {
      c.schedule.validate();
    } catch (const ConfigError& e) {
      throw e.nested(where);
    }
    for (std::size_t p = 0; p < c.schedule.phases.size(); ++p) {
      const WorkloadSpec& w = c.schedule.phases[p].spec;
      const std::uint64_t pages = (w.request_size + sim.page_size - 1) / sim.page_size;
      if (w.op != Op::Read && pages * sim.page_size > c.max_dirty_bytes)
        throw ConfigError(where + ".schedule[" + std::to_string(p) + "].workload.request_size",
                          "write requests must fit in max_dirty_bytes");
      if (to_ns(c.schedule.phases[p].start_s) % tick_ns != 0)
        throw ConfigError(where + ".schedule[" + std::to_string(p) + "].start_s",
                          "must fall on a tick boundary");
    }
  }
}

// ---------------------------------------------------------------------------

struct Simulation::Impl {
  struct Rpc {
    std::uint32_t client = 0;
    bool is_read = false;
    std::uint32_t pages = 0;
    std::uint32_t extents = 1;
    std::uint64_t bytes = 0;
    std::uint64_t stream_key = 0;
    std::int64_t arrival_ns = 0;
    std::int64_t ack_ns = 0;
  };

  struct Chunk {
    std::uint32_t pages = 0;
    std::uint32_t extents = 0;
    std::int64_t born_ns = 0;
  };

  struct StreamDirty {
    std::deque<Chunk> chunks;
    std::uint64_t pages = 0;
  };

  struct Stream {
    std::uint64_t key;
    StreamGenerator gen;
    RateWindow rate;
    std::uint32_t reads_outstanding = 0;
    std::uint64_t last_write_end = std::numeric_limits<std::uint64_t>::max();
  };

  struct Client {
    ClientSpec spec;
    TunableParams params;
    std::optional<Tuner> tuner;
    std::size_t phase = std::numeric_limits<std::size_t>::max();
    std::vector<Stream> streams;
    std::map<std::uint64_t, StreamDirty> dirty;
    std::deque<std::uint32_t> rpc_queue;

    std::uint64_t in_flight = 0;
    std::uint64_t shrink_carry = 0;  // in-flight count left over from a window shrink
    std::uint64_t cache_used = 0;    // unacked write bytes

    std::uint64_t issued_w = 0, unformed_w = 0, queued_w = 0, inflight_w = 0, acked_w = 0;
    std::uint64_t requested_r = 0, queued_r = 0, inflight_r = 0, acked_r = 0;

    std::uint64_t pages_cached_total = 0;
    std::uint64_t rpcs_formed_total = 0;
    std::uint64_t bytes_transferred_total = 0;
    std::uint32_t largest_rpc_pages = 0;

    ClientResult result;
  };

  Scenario scn;
  Options opts;
  std::int64_t tick_ns;
  std::int64_t period_ns;
  std::int64_t duration_ns;
  std::int64_t half_rtt_ns;
  std::int64_t flush_age_ns;
  std::uint64_t page;

  std::int64_t tick_index = 0;
  bool done = false;

  std::vector<Client> clients;
  std::uint64_t next_stream_key = 1;

  std::vector<Rpc> pool;
  std::vector<std::uint32_t> free_ids;

  std::deque<std::uint32_t> srv_fifo;  // dispatched, waiting for service (arrival ordered)
  std::uint64_t srv_pending_bytes = 0;  // dispatched and not yet served
  bool srv_busy = false;
  std::uint32_t srv_current = 0;
  std::int64_t srv_busy_until = 0;
  std::int64_t srv_free_at = 0;
  std::int64_t srv_busy_total = 0;
  std::deque<std::uint32_t> ack_fifo;  // served, ack in transit (ack ordered)

  Impl(Scenario s, Options o) : scn(std::move(s)), opts(o) {
    scn.validate();
    tick_ns = std::int64_t{scn.sim.tick_ms} * 1'000'000;
    period_ns = to_ns(scn.tuner.period_s);
    duration_ns = to_ns(scn.sim.duration_s);
    half_rtt_ns = to_ns(scn.server.rtt / 2);
    flush_age_ns = to_ns(scn.sim.flush_age_s);
    page = scn.sim.page_size;
    clients.reserve(scn.clients.size());
    for (std::size_t i = 0; i < scn.clients.size(); ++i) {
      Client c;
      c.spec = scn.clients[i];
      c.params = scn.initial_params(i);
      if (scn.tuner_enabled) c.tuner.emplace(scn.tuner, c.params);
      c.result.id = c.spec.id;
      clients.push_back(std::move(c));
    }
  }

  std::size_t index_of(std::string_view id) const {
    for (std::size_t i = 0; i < clients.size(); ++i)
      if (clients[i].spec.id == id) return i;
    throw SimError("unknown client '" + std::string(id) + "'");
  }

  std::uint32_t alloc_rpc() {
    if (!free_ids.empty()) {
      const std::uint32_t id = free_ids.back();
      free_ids.pop_back();
      pool[id] = Rpc{};
      return id;
    }
    pool.emplace_back();
    return static_cast<std::uint32_t>(pool.size() - 1);
  }

  // --- client side --------------------------------------------------------

  void update_phase(std::size_t ci, std::int64_t now) {
    Client& c = clients[ci];
    const auto& phases = c.spec.schedule.phases;
    std::size_t idx = 0;
    while (idx + 1 < phases.size() && to_ns(phases[idx + 1].start_s) <= now) ++idx;
    if (idx == c.phase) return;
    c.phase = idx;
    c.streams.clear();
    const WorkloadSpec& spec = phases[idx].spec;
    for (std::uint32_t s = 0; s < spec.streams; ++s) {
      c.streams.push_back(Stream{next_stream_key++,
                                 StreamGenerator(spec, stream_seed(scn.sim.seed, ci, idx, s)),
                                 RateWindow(spec.rate_limit)});
    }
  }

  void issue_stream(std::size_t ci, Stream& s, std::int64_t now) {
    Client& c = clients[ci];
    while (true) {
      const IoRequest& req = s.gen.peek();
      const std::uint64_t pages = (req.size + page - 1) / page;
      const std::uint64_t bytes = pages * page;
      if (req.is_read) {
        if (s.reads_outstanding > 0) return;
        if (!s.rate.admit(now, req.size)) return;
        s.gen.next();
        const std::uint32_t per_rpc = c.params.max_pages_per_rpc;
        std::uint64_t left = pages;
        while (left > 0) {
          const auto n = static_cast<std::uint32_t>(std::min<std::uint64_t>(left, per_rpc));
          const std::uint32_t id = alloc_rpc();
          Rpc& r = pool[id];
          r.client = static_cast<std::uint32_t>(ci);
          r.is_read = true;
          r.pages = n;
          r.extents = 1;
          r.bytes = std::uint64_t{n} * page;
          r.stream_key = s.key;
          c.rpc_queue.push_back(id);
          c.queued_r += r.bytes;
          c.rpcs_formed_total += 1;
          c.largest_rpc_pages = std::max(c.largest_rpc_pages, n);
          s.reads_outstanding += 1;
          left -= n;
        }
        c.requested_r += bytes;
        return;  // synchronous: wait for completion
      }
      if (c.cache_used + bytes > c.spec.max_dirty_bytes) return;
      if (!s.rate.admit(now, req.size)) return;
      const bool contiguous = req.offset == s.last_write_end;
      s.last_write_end = req.offset + req.size;
      s.gen.next();

      StreamDirty& d = c.dirty[s.key];
      if (!d.chunks.empty() && d.chunks.back().born_ns == now) {
        d.chunks.back().pages += static_cast<std::uint32_t>(pages);
        d.chunks.back().extents += contiguous ? 0 : 1;
      } else {
        d.chunks.push_back(Chunk{static_cast<std::uint32_t>(pages), contiguous ? 0u : 1u, now});
      }
      d.pages += pages;
      c.unformed_w += bytes;
      c.cache_used += bytes;
      c.issued_w += bytes;
      c.pages_cached_total += pages;
    }
  }

  void issue(std::size_t ci, std::int64_t now) {
    for (Stream& s : clients[ci].streams) issue_stream(ci, s, now);
  }

  void make_write_rpc(std::size_t ci, std::uint64_t key, StreamDirty& d, std::uint32_t pages) {
    Client& c = clients[ci];
    std::uint32_t need = pages;
    std::uint64_t extents = 0;
    while (need > 0) {
      Chunk& ch = d.chunks.front();
      const std::uint32_t take = std::min(need, ch.pages);
      const std::uint32_t ext =
          take == ch.pages
              ? ch.extents
              : static_cast<std::uint32_t>((std::uint64_t{take} * ch.extents + ch.pages - 1) / ch.pages);
      ch.extents -= ext;
      ch.pages -= take;
      extents += ext;
      need -= take;
      if (ch.pages == 0) d.chunks.pop_front();
    }
    d.pages -= pages;

    const std::uint32_t id = alloc_rpc();
    Rpc& r = pool[id];
    r.client = static_cast<std::uint32_t>(ci);
    r.is_read = false;
    r.pages = pages;
    r.extents = static_cast<std::uint32_t>(std::max<std::uint64_t>(1, extents));
    r.bytes = std::uint64_t{pages} * page;
    r.stream_key = key;
    c.rpc_queue.push_back(id);
    c.unformed_w -= r.bytes;
    c.queued_w += r.bytes;
    c.rpcs_formed_total += 1;
    c.largest_rpc_pages = std::max(c.largest_rpc_pages, pages);
  }

  void form(std::size_t ci, std::int64_t now) {
    Client& c = clients[ci];
    const std::uint32_t full = c.params.max_pages_per_rpc;
    for (auto it = c.dirty.begin(); it != c.dirty.end();) {
      StreamDirty& d = it->second;
      while (d.pages >= full) make_write_rpc(ci, it->first, d, full);
      while (d.pages > 0 && d.chunks.front().born_ns <= now - flush_age_ns) {
        make_write_rpc(ci, it->first, d,
                       static_cast<std::uint32_t>(std::min<std::uint64_t>(d.pages, full)));
      }
      it = d.pages == 0 ? c.dirty.erase(it) : std::next(it);
    }
  }

  void dispatch(std::size_t ci, std::int64_t now) {
    Client& c = clients[ci];
    while (c.in_flight < c.params.max_rpcs_in_flight && !c.rpc_queue.empty()) {
      const std::uint32_t id = c.rpc_queue.front();
      c.rpc_queue.pop_front();
      Rpc& r = pool[id];
      if (r.is_read) {
        c.queued_r -= r.bytes;
        c.inflight_r += r.bytes;
      } else {
        c.queued_w -= r.bytes;
        c.inflight_w += r.bytes;
      }
      c.in_flight += 1;
      r.arrival_ns = now + half_rtt_ns;
      srv_fifo.push_back(id);
      srv_pending_bytes += r.bytes;
    }
  }

  // --- server and network ---------------------------------------------------

  std::int64_t service_ns(const Rpc& r) const {
    const ServerModel& m = scn.server;
    double stretch = 1.0;
    if (m.congestion_knee > 0) {
      const double q = static_cast<double>(srv_pending_bytes) / m.congestion_knee;
      stretch += m.congestion_exponent == 2.0 ? q * q : std::pow(q, m.congestion_exponent);
    }
    const double seconds = m.rpc_overhead + (r.extents - 1) * m.extent_overhead +
                           static_cast<double>(r.bytes) / m.capacity * stretch;
    return std::max<std::int64_t>(1, to_ns(seconds));
  }

  void on_ack(std::uint32_t id, std::int64_t now) {
    const Rpc r = pool[id];
    free_ids.push_back(id);
    Client& c = clients[r.client];
    c.in_flight -= 1;
    if (c.in_flight <= c.params.max_rpcs_in_flight) c.shrink_carry = 0;
    c.bytes_transferred_total += r.bytes;
    if (r.is_read) {
      c.inflight_r -= r.bytes;
      c.acked_r += r.bytes;
      c.pages_cached_total += r.pages;
      for (Stream& s : c.streams) {
        if (s.key != r.stream_key) continue;
        if (s.reads_outstanding > 0 && --s.reads_outstanding == 0) issue_stream(r.client, s, now);
        break;
      }
    } else {
      c.inflight_w -= r.bytes;
      c.acked_w += r.bytes;
      c.cache_used -= r.bytes;
    }
    dispatch(r.client, now);
  }

  void process_events(std::int64_t limit) {
    while (true) {
      const std::int64_t t_ack = ack_fifo.empty() ? kNever : pool[ack_fifo.front()].ack_ns;
      std::int64_t t_srv = kNever;
      if (srv_busy) {
        t_srv = srv_busy_until;
      } else if (!srv_fifo.empty()) {
        t_srv = std::max(srv_free_at, pool[srv_fifo.front()].arrival_ns);
      }
      const std::int64_t t = std::min(t_ack, t_srv);
      if (t > limit) return;

      if (t_ack <= t_srv) {
        const std::uint32_t id = ack_fifo.front();
        ack_fifo.pop_front();
        on_ack(id, t);
      } else if (srv_busy) {
        Rpc& r = pool[srv_current];
        r.ack_ns = t + half_rtt_ns;
        ack_fifo.push_back(srv_current);
        srv_pending_bytes -= r.bytes;
        srv_busy = false;
        srv_free_at = t;
      } else {
        srv_current = srv_fifo.front();
        srv_fifo.pop_front();
        const std::int64_t cost = service_ns(pool[srv_current]);
        srv_busy = true;
        srv_busy_until = t + cost;
        srv_busy_total += cost;
      }
    }
  }

  // --- observation ----------------------------------------------------------

  Snapshot snapshot_of(std::size_t ci, std::int64_t now) const {
    const Client& c = clients[ci];
    Snapshot s;
    s.timestamp_ms = now / 1'000'000;
    s.client_id = c.spec.id;
    s.cur_dirty_bytes = c.cache_used;
    s.pages_cached_total = c.pages_cached_total;
    s.rpcs_formed_total = c.rpcs_formed_total;
    s.bytes_transferred_total = c.bytes_transferred_total;
    s.max_pages_per_rpc = c.params.max_pages_per_rpc;
    s.max_rpcs_in_flight = c.params.max_rpcs_in_flight;
    return s;
  }

  void apply_params(std::size_t ci, const TunableParams& p) {
    Client& c = clients[ci];
    if (p.max_rpcs_in_flight < c.params.max_rpcs_in_flight && c.in_flight > p.max_rpcs_in_flight)
      c.shrink_carry = std::max(c.shrink_carry, c.in_flight);
    c.params = p;
  }

  void tuning_turn(std::int64_t now) {
    for (std::size_t ci = 0; ci < clients.size(); ++ci) {
      Client& c = clients[ci];
      Snapshot snap = snapshot_of(ci, now);
      if (!c.result.snapshots.empty()) {
        TurnRecord rec;
        rec.turn = c.result.snapshots.size();
        rec.time_s = static_cast<double>(now) / 1e9;
        rec.params = c.params;
        rec.window = derive_window(c.result.snapshots.back(), snap);
        rec.decision = Hold{};
        if (c.tuner) {
          rec.decision = c.tuner->observe(rec.window);
          if (c.tuner->params() != c.params) apply_params(ci, c.tuner->params());
        }
        c.result.turns.push_back(std::move(rec));
      }
      c.result.snapshots.push_back(std::move(snap));
    }
  }

  void check_invariants(std::int64_t now) const {
    auto fail = [&](const Client& c, const std::string& what) {
      throw SimError("invariant violated at t=" + std::to_string(now) + "ns for client '" +
                     c.spec.id + "': " + what);
    };
    for (const Client& c : clients) {
      std::uint64_t unformed = 0;
      for (const auto& [key, d] : c.dirty) unformed += d.pages * page;
      std::uint64_t queued_w = 0, queued_r = 0;
      for (std::uint32_t id : c.rpc_queue) {
        const Rpc& r = pool[id];
        (r.is_read ? queued_r : queued_w) += r.bytes;
        if (r.pages == 0) fail(c, "empty rpc");
      }
      if (unformed != c.unformed_w) fail(c, "unformed byte count drifted");
      if (queued_w != c.queued_w || queued_r != c.queued_r) fail(c, "queued byte count drifted");
      if (c.issued_w != c.unformed_w + c.queued_w + c.inflight_w + c.acked_w)
        fail(c, "write bytes not conserved");
      if (c.requested_r != c.queued_r + c.inflight_r + c.acked_r) fail(c, "read bytes not conserved");
      if (c.cache_used != c.unformed_w + c.queued_w + c.inflight_w) fail(c, "dirty accounting drifted");
      if (c.cache_used > c.spec.max_dirty_bytes) fail(c, "dirty cache above max_dirty_bytes");
      if (c.in_flight > std::max<std::uint64_t>(c.params.max_rpcs_in_flight, c.shrink_carry))
        fail(c, "in-flight window exceeded");
    }
    // The RPC in service may run past `now`; nothing else can.
    const std::int64_t overhang = srv_busy ? srv_busy_until - now : 0;
    if (srv_busy_total > now + overhang) throw SimError("server used more time than elapsed");
  }

  void step() {
    if (done) return;
    const std::int64_t now = tick_index * tick_ns;
    process_events(now);
    for (Client& c : clients) c.result.acked_at_tick.push_back(c.bytes_transferred_total);
    if (now % period_ns == 0) tuning_turn(now);
    if (now >= duration_ns) {
      done = true;
      return;
    }
    for (std::size_t ci = 0; ci < clients.size(); ++ci) {
      update_phase(ci, now);
      issue(ci, now);
      form(ci, now);
      dispatch(ci, now);
    }
    if (opts.check_invariants) check_invariants(now);
    ++tick_index;
  }

  SimResult result() const {
    SimResult out;
    out.scenario = scn.name;
    out.tick_s = static_cast<double>(tick_ns) / 1e9;
    out.duration_s = static_cast<double>(std::min<std::int64_t>(tick_index * tick_ns, duration_ns)) / 1e9;
    for (const Client& c : clients) {
      ClientResult r = c.result;
      r.final_params = c.params;
      out.clients.push_back(std::move(r));
    }
    for (std::size_t ci = 0; ci < out.clients.size(); ++ci) {
      const auto& phases = clients[ci].spec.schedule.phases;
      for (std::size_t p = 0; p < phases.size(); ++p) {
        const double start = phases[p].start_s;
        if (start >= out.duration_s) break;
        const double end = p + 1 < phases.size() ? std::min(phases[p + 1].start_s, out.duration_s)
                                                 : out.duration_s;
        PhaseSummary s;
        s.index = p;
        s.start_s = start;
        s.end_s = end;
        s.mean_bw = out.client_bw(ci, start, end);
        s.steady_bw = out.client_bw(ci, start + (end - start) / 2, end);
        out.clients[ci].phases.push_back(s);
      }
    }
    return out;
  }
};

Simulation::Simulation(Scenario scenario) : Simulation(std::move(scenario), Options{}) {}
Simulation::Simulation(Scenario scenario, Options options)
    : impl_(std::make_unique<Impl>(std::move(scenario), options)) {}
Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

void Simulation::set_params(std::string_view client_id, const TunableParams& params) {
  const std::size_t ci = impl_->index_of(client_id);
  validate_params(params, impl_->scn.tuner.mppr_bounds, impl_->scn.tuner.mrif_bounds);
  impl_->apply_params(ci, params);
}

TunableParams Simulation::params(std::string_view client_id) const {
  return impl_->clients[impl_->index_of(client_id)].params;
}

Snapshot Simulation::snapshot(std::string_view client_id) const {
  const std::size_t ci = impl_->index_of(client_id);
  return impl_->snapshot_of(ci, std::min(impl_->tick_index * impl_->tick_ns, impl_->duration_ns));
}

double Simulation::now() const noexcept {
  return static_cast<double>(impl_->tick_index * impl_->tick_ns) / 1e9;
}

bool Simulation::finished() const noexcept { return impl_->done; }

void Simulation::step() { impl_->step(); }

SimResult Simulation::run() {
  while (!impl_->done) impl_->step();
  return impl_->result();
}

SimResult Simulation::result() const { return impl_->result(); }

Simulation::ClientProbe Simulation::probe(std::string_view client_id) const {
  const auto& c = impl_->clients[impl_->index_of(client_id)];
  ClientProbe p;
  p.in_flight = c.in_flight;
  p.queued_rpcs = c.rpc_queue.size();
  p.unformed_bytes = c.unformed_w;
  p.queued_bytes = c.queued_w + c.queued_r;
  p.in_flight_bytes = c.inflight_w + c.inflight_r;
  p.acked_write_bytes = c.acked_w;
  p.issued_write_bytes = c.issued_w;
  p.largest_rpc_pages_formed = c.largest_rpc_pages;
  return p;
}

SimResult run(const Scenario& scenario) { return Simulation(scenario).run(); }

// ---------------------------------------------------------------------------

double SimResult::client_bw(std::size_t client, double t0, double t1) const {
  const auto& acked = clients.at(client).acked_at_tick;
  if (acked.empty()) return 0;
  const auto last = static_cast<std::int64_t>(acked.size()) - 1;
  const auto i0 = std::clamp<std::int64_t>(std::llround(t0 / tick_s), 0, last);
  const auto i1 = std::clamp<std::int64_t>(std::llround(t1 / tick_s), 0, last);
  if (i1 <= i0) return 0;
  return static_cast<double>(acked[i1] - acked[i0]) / (static_cast<double>(i1 - i0) * tick_s);
}

double SimResult::total_bw(double t0, double t1) const {
  double sum = 0;
  for (std::size_t i = 0; i < clients.size(); ++i) sum += client_bw(i, t0, t1);
  return sum;
}

SweepGrid SweepGrid::full(const TunerConfig& cfg) {
  SweepGrid g;
  for (std::uint64_t v = cfg.mppr_bounds.min; v <= cfg.mppr_bounds.max; v *= 2)
    g.mppr.push_back(static_cast<std::uint32_t>(v));
  for (std::uint64_t v = cfg.mrif_bounds.min; v <= cfg.mrif_bounds.max; v *= 2)
    g.mrif.push_back(static_cast<std::uint32_t>(v));
  return g;
}

const SweepPoint& SweepResult::at(std::uint32_t mppr, std::uint32_t mrif) const {
  for (const SweepPoint& p : points)
    if (p.params.max_pages_per_rpc == mppr && p.params.max_rpcs_in_flight == mrif) return p;
  throw SimError("grid point (" + std::to_string(mppr) + ", " + std::to_string(mrif) + ") not swept");
}

std::vector<double> phase_starts(const Scenario& scenario) {
  std::vector<double> starts;
  for (const Phase& p : scenario.clients.front().schedule.phases)
    if (p.start_s < scenario.sim.duration_s) starts.push_back(p.start_s);
  return starts;
}

SweepResult sweep(const Scenario& scenario, const SweepGrid& grid, unsigned jobs) {
  scenario.validate();
  if (grid.size() == 0) throw ConfigError("grid", "empty sweep grid");
  SweepResult out;
  out.grid = grid;
  out.points.resize(grid.size());
  const std::vector<double> starts = phase_starts(scenario);

  auto run_point = [&](std::size_t i) {
    Scenario s = scenario;
    s.tuner_enabled = false;
    const TunableParams p{grid.mppr[i / grid.mrif.size()], grid.mrif[i % grid.mrif.size()]};
    validate_params(p, s.tuner.mppr_bounds, s.tuner.mrif_bounds);
    for (ClientSpec& c : s.clients) c.params = p;
    const SimResult r = run(s);
    SweepPoint& pt = out.points[i];
    pt.params = p;
    pt.mean_bw = r.steady_total_bw();
    for (std::size_t k = 0; k < starts.size(); ++k) {
      const double end = k + 1 < starts.size() ? starts[k + 1] : r.duration_s;
      pt.phase_steady.push_back(r.total_bw(starts[k] + (end - starts[k]) / 2, end));
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(grid.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::exception_ptr error;
    std::mutex error_mu;
    for (unsigned j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) {
          try {
            run_point(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
  }

  for (std::size_t i = 1; i < out.points.size(); ++i)
    if (out.points[i].mean_bw > out.points[out.argmax].mean_bw) out.argmax = i;
  out.phase_argmax.assign(starts.size(), 0);
  for (std::size_t k = 0; k < starts.size(); ++k)
    for (std::size_t i = 1; i < out.points.size(); ++i)
      if (out.points[i].phase_steady[k] > out.points[out.phase_argmax[k]].phase_steady[k])
        out.phase_argmax[k] = i;
  return out;
}

}  // namespace iopathtune
