#include "iopathtune/workload.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "iopathtune/params.hpp"

namespace iopathtune {

std::string_view to_string(Pattern p) noexcept {
  return p == Pattern::Random ? "random" : "sequential";
}

std::string_view to_string(Op op) noexcept {
  switch (op) {
    case Op::Write: return "write";
    case Op::Read: return "read";
    default: return "readwrite";
  }
}

Pattern pattern_from_string(std::string_view s) {
  if (s == "random") return Pattern::Random;
  if (s == "sequential") return Pattern::Sequential;
  throw ConfigError("pattern", "expected 'random' or 'sequential', got '" + std::string(s) + "'");
}

Op op_from_string(std::string_view s) {
  if (s == "write") return Op::Write;
  if (s == "read") return Op::Read;
  if (s == "readwrite") return Op::ReadWrite;
  throw ConfigError("op", "expected 'write', 'read' or 'readwrite', got '" + std::string(s) + "'");
}

void WorkloadSpec::validate() const {
  if (request_size == 0) throw ConfigError("request_size", "must be positive");
  if (streams == 0) throw ConfigError("streams", "must be at least 1");
  if (rate_limit && !(std::isfinite(*rate_limit) && *rate_limit >= 0))
    throw ConfigError("rate_limit", "must be a non-negative number or null");
  if (whole_file && *whole_file < request_size)
    throw ConfigError("whole_file", "must be at least request_size");
  if (extent_bytes < request_size) throw ConfigError("extent_bytes", "must be at least request_size");
}

void PhaseSchedule::validate() const {
  if (phases.empty()) throw ConfigError("schedule", "needs at least one phase");
  if (phases.front().start_s != 0) throw ConfigError("schedule[0].start_s", "first phase must start at 0");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string where = "schedule[" + std::to_string(i) + "]";
    if (i > 0 && !(phases[i].start_s > phases[i - 1].start_s))
      throw ConfigError(where + ".start_s", "start times must strictly increase");
    try {
      phases[i].spec.validate();
    } catch (const ConfigError& e) {
      throw e.nested(where + ".workload");
    }
  }
}

std::size_t PhaseSchedule::phase_index(double t) const {
  auto it = std::upper_bound(phases.begin(), phases.end(), t,
                             [](double v, const Phase& p) { return v < p.start_s; });
  return it == phases.begin() ? 0 : static_cast<std::size_t>(it - phases.begin() - 1);
}

const WorkloadSpec& active_spec(const PhaseSchedule& schedule, double t) {
  return schedule.phases.at(schedule.phase_index(t)).spec;
}

StreamGenerator::StreamGenerator(const WorkloadSpec& spec, std::uint64_t seed)
    : spec_(spec), rng_(seed) {
  extent_ = spec.whole_file ? *spec.whole_file : spec.extent_bytes;
  slots_ = std::max<std::uint64_t>(1, extent_ / spec.request_size);
  pending_ = generate();
}

IoRequest StreamGenerator::next() {
  IoRequest out = pending_;
  pending_ = generate();
  return out;
}

IoRequest StreamGenerator::generate() {
  IoRequest r;
  r.size = spec_.request_size;

  if (spec_.whole_file) {
    // Write the file front to back, then read it back (readwrite) or rewrite it.
    r.is_read = spec_.op == Op::Read || (spec_.op == Op::ReadWrite && whole_file_reading_);
    r.offset = cursor_;
    r.size = std::min(spec_.request_size, extent_ - cursor_);
    cursor_ += r.size;
    if (cursor_ >= extent_) {
      cursor_ = 0;
      if (spec_.op == Op::ReadWrite) whole_file_reading_ = !whole_file_reading_;
    }
    ++ops_;
    return r;
  }

  switch (spec_.op) {
    case Op::Write: r.is_read = false; break;
    case Op::Read: r.is_read = true; break;
    case Op::ReadWrite: r.is_read = (ops_ % 2) == 1; break;
  }
  if (spec_.pattern == Pattern::Random) {
    std::uniform_int_distribution<std::uint64_t> slot(0, slots_ - 1);
    r.offset = slot(rng_) * spec_.request_size;
  } else {
    // Sequential streams append; they never revisit a range within a phase.
    r.offset = cursor_;
    cursor_ += spec_.request_size;
  }
  ++ops_;
  return r;
}

bool RateWindow::admit(std::int64_t now_ns, std::uint64_t bytes) {
  if (!limit_) return true;
  constexpr std::int64_t kWindowNs = 1'000'000'000;
  while (!recent_.empty() && recent_.front().first <= now_ns - kWindowNs) {
    in_window_ -= recent_.front().second;
    recent_.pop_front();
  }
  if (static_cast<double>(in_window_ + bytes) > *limit_) return false;
  recent_.emplace_back(now_ns, bytes);
  in_window_ += bytes;
  return true;
}

std::uint64_t stream_seed(std::uint64_t scenario_seed, std::size_t client, std::size_t phase,
                          std::size_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(scenario_seed),
                    static_cast<std::uint32_t>(scenario_seed >> 32),
                    static_cast<std::uint32_t>(client), static_cast<std::uint32_t>(phase),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (std::uint64_t{words[0]} << 32) | words[1];
}

std::vector<StreamGenerator> build_workload(const WorkloadSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<StreamGenerator> streams;
  streams.reserve(spec.streams);
  for (std::uint32_t i = 0; i < spec.streams; ++i) {
    streams.emplace_back(spec, stream_seed(seed, 0, 0, i));
  }
  return streams;
}

}  // namespace iopathtune
