#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace iopathtune {

/// Raised for any invalid configuration value. `key()` names the offending
/// setting (a dotted path for scenario files).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, std::string message)
      : std::runtime_error(key.empty() ? message : key + ": " + message),
        key_(std::move(key)),
        message_(std::move(message)) {}

  const std::string& key() const noexcept { return key_; }
  const std::string& message() const noexcept { return message_; }

  /// Same error re-rooted under `prefix` (`prefix.key`).
  ConfigError nested(const std::string& prefix) const {
    return ConfigError(key_.empty() ? prefix : prefix + "." + key_, message_);
  }

 private:
  std::string key_;
  std::string message_;
};

enum class Param { MaxPagesPerRpc, MaxRpcsInFlight };

constexpr Param other(Param p) noexcept {
  return p == Param::MaxPagesPerRpc ? Param::MaxRpcsInFlight : Param::MaxPagesPerRpc;
}

constexpr std::string_view to_string(Param p) noexcept {
  return p == Param::MaxPagesPerRpc ? "max_pages_per_rpc" : "max_rpcs_in_flight";
}

/// Accepts the long names and the short `mppr` / `mrif` forms.
Param param_from_string(std::string_view s);

constexpr bool is_power_of_two(std::uint64_t v) noexcept { return v != 0 && (v & (v - 1)) == 0; }

/// Closed range of allowed values for one parameter. Both ends are powers of two.
struct Bounds {
  std::uint32_t min = 1;
  std::uint32_t max = 1;

  constexpr bool contains(std::uint32_t v) const noexcept { return v >= min && v <= max; }
  constexpr std::uint32_t clamp(std::uint32_t v) const noexcept {
    return v < min ? min : (v > max ? max : v);
  }
  bool operator==(const Bounds&) const = default;
};

struct TunableParams {
  std::uint32_t max_pages_per_rpc = 256;
  std::uint32_t max_rpcs_in_flight = 8;

  constexpr std::uint32_t get(Param p) const noexcept {
    return p == Param::MaxPagesPerRpc ? max_pages_per_rpc : max_rpcs_in_flight;
  }
  constexpr void set(Param p, std::uint32_t v) noexcept {
    (p == Param::MaxPagesPerRpc ? max_pages_per_rpc : max_rpcs_in_flight) = v;
  }
  bool operator==(const TunableParams&) const = default;
};

inline constexpr Bounds kDefaultPagesBounds{16, 4096};
inline constexpr Bounds kDefaultInFlightBounds{1, 256};

/// Throws ConfigError unless both values are powers of two inside their bounds.
void validate_params(const TunableParams& params, const Bounds& mppr, const Bounds& mrif);

}  // namespace iopathtune
