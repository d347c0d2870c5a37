#pragma once

// Client statistics snapshots and the windows derived from them.
//
// A snapshot is a `key: value` record, one key per line, terminated by a
// blank line. Counters are cumulative; the tuner only ever sees rates derived
// by differencing two snapshots of the same client.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iopathtune/tuner.hpp"

namespace iopathtune {

struct Snapshot {
  std::int64_t timestamp_ms = 0;
  std::string client_id;
  std::uint64_t cur_dirty_bytes = 0;
  std::uint64_t pages_cached_total = 0;
  std::uint64_t rpcs_formed_total = 0;
  std::uint64_t bytes_transferred_total = 0;
  std::uint32_t max_pages_per_rpc = 0;
  std::uint32_t max_rpcs_in_flight = 0;

  TunableParams params() const noexcept { return {max_pages_per_rpc, max_rpcs_in_flight}; }
  bool operator==(const Snapshot&) const = default;
};

inline constexpr int kSnapshotVersion = 1;

class SnapshotParseError : public std::runtime_error {
 public:
  enum class Kind { MissingKey, DuplicateKey, UnknownKey, MalformedValue, UnsupportedVersion };

  SnapshotParseError(Kind kind, std::string key, int line, const std::string& what)
      : std::runtime_error(what), kind_(kind), key_(std::move(key)), line_(line) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& key() const noexcept { return key_; }
  /// 1-based line within the parsed text; 0 when the error is record-wide.
  int line() const noexcept { return line_; }

 private:
  Kind kind_;
  std::string key_;
  int line_;
};

/// Parses exactly one record. A trailing blank line is accepted.
Snapshot parse_snapshot(std::string_view text);

/// Canonical form, including the terminating blank line.
std::string serialize_snapshot(const Snapshot& s);

/// Splits a trace into records. Line numbers in errors refer to the whole trace.
std::vector<Snapshot> parse_trace(std::string_view text);

class WindowError : public std::runtime_error {
 public:
  enum class Kind { ClientMismatch, ClockRegression, CounterRegression };

  WindowError(Kind kind, std::string field, const std::string& what)
      : std::runtime_error(what), kind_(kind), field_(std::move(field)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

WindowMetrics derive_window(const Snapshot& prev, const Snapshot& cur);

}  // namespace iopathtune
