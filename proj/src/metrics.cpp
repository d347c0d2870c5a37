#include "iopathtune/metrics.hpp"

#include <array>
#include <charconv>
#include <limits>
#include <optional>

namespace iopathtune {

namespace {

using Kind = SnapshotParseError::Kind;

constexpr std::array<std::string_view, 9> kKeys = {
    "snapshot_version",   "timestamp_ms",      "client_id",
    "cur_dirty_bytes",    "pages_cached_total", "rpcs_formed_total",
    "bytes_transferred_total", "max_pages_per_rpc", "max_rpcs_in_flight"};

template <typename T>
T parse_integer(std::string_view key, std::string_view value, int line) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  // from_chars accepts a leading '-' for signed types only; reject '+' and blanks.
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (value.empty() || ec != std::errc{} || ptr != last) {
    throw SnapshotParseError(Kind::MalformedValue, std::string(key), line,
                             "line " + std::to_string(line) + ": malformed value for '" +
                                 std::string(key) + "': '" + std::string(value) + "'");
  }
  return out;
}

struct Line {
  std::string_view text;
  int number;
};

Snapshot parse_lines(const std::vector<Line>& lines, int record_line) {
  std::array<std::optional<Line>, kKeys.size()> seen;
  std::array<std::string_view, kKeys.size()> values;

  for (const Line& l : lines) {
    const auto colon = l.text.find(':');
    if (colon == std::string_view::npos) {
      throw SnapshotParseError(Kind::MalformedValue, "", l.number,
                               "line " + std::to_string(l.number) + ": expected 'key: value'");
    }
    const std::string_view key = l.text.substr(0, colon);
    std::string_view value = l.text.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    while (!value.empty() && (value.back() == ' ' || value.back() == '\r')) value.remove_suffix(1);

    std::size_t idx = 0;
    while (idx < kKeys.size() && kKeys[idx] != key) ++idx;
    if (idx == kKeys.size()) {
      throw SnapshotParseError(Kind::UnknownKey, std::string(key), l.number,
                               "line " + std::to_string(l.number) + ": unknown key '" +
                                   std::string(key) + "'");
    }
    if (seen[idx]) {
      throw SnapshotParseError(Kind::DuplicateKey, std::string(key), l.number,
                               "line " + std::to_string(l.number) + ": duplicate key '" +
                                   std::string(key) + "'");
    }
    seen[idx] = l;
    values[idx] = value;
  }

  for (std::size_t i = 0; i < kKeys.size(); ++i) {
    if (!seen[i]) {
      throw SnapshotParseError(Kind::MissingKey, std::string(kKeys[i]), record_line,
                               "record at line " + std::to_string(record_line) +
                                   ": missing key '" + std::string(kKeys[i]) + "'");
    }
  }

  const auto version = parse_integer<std::int64_t>(kKeys[0], values[0], seen[0]->number);
  if (version != kSnapshotVersion) {
    throw SnapshotParseError(Kind::UnsupportedVersion, std::string(kKeys[0]), seen[0]->number,
                             "line " + std::to_string(seen[0]->number) +
                                 ": unsupported snapshot_version " + std::to_string(version));
  }

  auto u64 = [&](std::size_t i) {
    return parse_integer<std::uint64_t>(kKeys[i], values[i], seen[i]->number);
  };
  auto u32 = [&](std::size_t i) {
    return parse_integer<std::uint32_t>(kKeys[i], values[i], seen[i]->number);
  };

  Snapshot s;
  s.timestamp_ms = parse_integer<std::int64_t>(kKeys[1], values[1], seen[1]->number);
  if (values[2].empty() || values[2].find_first_of(" \t") != std::string_view::npos) {
    throw SnapshotParseError(Kind::MalformedValue, "client_id", seen[2]->number,
                             "line " + std::to_string(seen[2]->number) +
                                 ": client_id must be a non-empty token");
  }
  s.client_id = std::string(values[2]);
  s.cur_dirty_bytes = u64(3);
  s.pages_cached_total = u64(4);
  s.rpcs_formed_total = u64(5);
  s.bytes_transferred_total = u64(6);
  s.max_pages_per_rpc = u32(7);
  s.max_rpcs_in_flight = u32(8);
  return s;
}

// Walks `text` line by line, grouping non-blank lines into records.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& on_record) {
  std::vector<Line> current;
  int record_line = 0;
  int number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(pos, end - pos);
    ++number;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (!current.empty()) {
        on_record(current, record_line);
        current.clear();
      }
      continue;
    }
    if (current.empty()) record_line = number;
    current.push_back({line, number});
  }
  if (!current.empty()) on_record(current, record_line);
}

}  // namespace

Snapshot parse_snapshot(std::string_view text) {
  std::optional<Snapshot> out;
  for_each_record(text, [&](const std::vector<Line>& lines, int record_line) {
    if (out) {
      throw SnapshotParseError(Kind::MalformedValue, "", lines.front().number,
                               "line " + std::to_string(lines.front().number) +
                                   ": more than one record");
    }
    out = parse_lines(lines, record_line);
  });
  if (!out) {
    throw SnapshotParseError(Kind::MissingKey, std::string(kKeys[0]), 0, "empty snapshot record");
  }
  return *out;
}

std::string serialize_snapshot(const Snapshot& s) {
  std::string out;
  out.reserve(256);
  auto line = [&](std::string_view key, const std::string& value) {
    out.append(key);
    out.append(": ");
    out.append(value);
    out.push_back('\n');
  };
  line(kKeys[0], std::to_string(kSnapshotVersion));
  line(kKeys[1], std::to_string(s.timestamp_ms));
  line(kKeys[2], s.client_id);
  line(kKeys[3], std::to_string(s.cur_dirty_bytes));
  line(kKeys[4], std::to_string(s.pages_cached_total));
  line(kKeys[5], std::to_string(s.rpcs_formed_total));
  line(kKeys[6], std::to_string(s.bytes_transferred_total));
  line(kKeys[7], std::to_string(s.max_pages_per_rpc));
  line(kKeys[8], std::to_string(s.max_rpcs_in_flight));
  out.push_back('\n');
  return out;
}

std::vector<Snapshot> parse_trace(std::string_view text) {
  std::vector<Snapshot> out;
  for_each_record(text, [&](const std::vector<Line>& lines, int record_line) {
    out.push_back(parse_lines(lines, record_line));
  });
  return out;
}

WindowMetrics derive_window(const Snapshot& prev, const Snapshot& cur) {
  using WK = WindowError::Kind;
  if (prev.client_id != cur.client_id) {
    throw WindowError(WK::ClientMismatch, "client_id",
                      "snapshots belong to '" + prev.client_id + "' and '" + cur.client_id + "'");
  }
  if (cur.timestamp_ms <= prev.timestamp_ms) {
    throw WindowError(WK::ClockRegression, "timestamp_ms",
                      "timestamp does not advance (" + std::to_string(prev.timestamp_ms) +
                          " -> " + std::to_string(cur.timestamp_ms) + ")");
  }
  auto delta = [](std::uint64_t a, std::uint64_t b, const char* field) {
    if (b < a) {
      throw WindowError(WK::CounterRegression, field,
                        std::string("counter ") + field + " decreased (" + std::to_string(a) +
                            " -> " + std::to_string(b) + ")");
    }
    return static_cast<double>(b - a);
  };
  const double pages = delta(prev.pages_cached_total, cur.pages_cached_total, "pages_cached_total");
  const double rpcs = delta(prev.rpcs_formed_total, cur.rpcs_formed_total, "rpcs_formed_total");
  const double bytes =
      delta(prev.bytes_transferred_total, cur.bytes_transferred_total, "bytes_transferred_total");

  WindowMetrics w;
  w.window_len = static_cast<double>(cur.timestamp_ms - prev.timestamp_ms) / 1000.0;
  w.page_cache_rate = pages / w.window_len;
  w.rpc_gen_rate = rpcs / w.window_len;
  w.transfer_bw = bytes / w.window_len;
  w.dirty_bytes = static_cast<double>(cur.cur_dirty_bytes);
  return w;
}

}  // namespace iopathtune
