#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace iopathtune {

enum class Pattern { Random, Sequential };
enum class Op { Write, Read, ReadWrite };

std::string_view to_string(Pattern p) noexcept;
std::string_view to_string(Op op) noexcept;
Pattern pattern_from_string(std::string_view s);
Op op_from_string(std::string_view s);

inline constexpr std::uint64_t kDefaultExtentBytes = std::uint64_t{1} << 30;

struct WorkloadSpec {
  Pattern pattern = Pattern::Sequential;
  Op op = Op::Write;
  std::uint64_t request_size = 1 << 20;
  std::uint32_t streams = 1;
  std::optional<double> rate_limit;          // bytes/s per stream; empty = unbounded
  std::optional<std::uint64_t> whole_file;   // file size for write-then-read cycles
  std::uint64_t extent_bytes = kDefaultExtentBytes;  // per-stream file extent

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Zero-rate workloads never issue a request.
  bool is_null() const noexcept { return rate_limit && *rate_limit == 0; }
  bool operator==(const WorkloadSpec&) const = default;
};

struct Phase {
  double start_s = 0;
  WorkloadSpec spec;
  bool operator==(const Phase&) const = default;
};

/// Ordered phases; the first starts at 0 and start times strictly increase.
struct PhaseSchedule {
  std::vector<Phase> phases;

  void validate() const;
  /// Index of the phase active at `t` (greatest start time <= t).
  std::size_t phase_index(double t) const;
  bool operator==(const PhaseSchedule&) const = default;
};

const WorkloadSpec& active_spec(const PhaseSchedule& schedule, double t);

struct IoRequest {
  bool is_read = false;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  bool operator==(const IoRequest&) const = default;
};

/// Deterministic request source for one application stream.
class StreamGenerator {
 public:
  StreamGenerator(const WorkloadSpec& spec, std::uint64_t seed);

  /// Request that `next()` would return, without consuming it.
  const IoRequest& peek() const noexcept { return pending_; }
  IoRequest next();

  /// File extent this stream addresses.
  std::uint64_t extent() const noexcept { return extent_; }

 private:
  IoRequest generate();

  WorkloadSpec spec_;
  std::mt19937_64 rng_;
  std::uint64_t extent_;
  std::uint64_t slots_;
  std::uint64_t cursor_ = 0;       // sequential position
  std::uint64_t ops_ = 0;          // requests generated
  bool whole_file_reading_ = false;
  IoRequest pending_;
};

/// Per-stream sliding one-second rate window. `admit` never lets the bytes
/// admitted in any window of one second exceed the limit.
class RateWindow {
 public:
  explicit RateWindow(std::optional<double> limit) : limit_(limit) {}

  bool admit(std::int64_t now_ns, std::uint64_t bytes);
  bool unbounded() const noexcept { return !limit_; }

 private:
  std::optional<double> limit_;
  std::deque<std::pair<std::int64_t, std::uint64_t>> recent_;
  std::uint64_t in_window_ = 0;
};

/// Seed for stream `stream` of phase `phase` of client `client`.
std::uint64_t stream_seed(std::uint64_t scenario_seed, std::size_t client, std::size_t phase,
                          std::size_t stream);

std::vector<StreamGenerator> build_workload(const WorkloadSpec& spec, std::uint64_t seed);

}  // namespace iopathtune
