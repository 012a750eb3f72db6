#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace craft {

std::uint64_t fnv1a64(std::string_view bytes);

/// One output step of splitmix64; advances `state` and returns the mixed word.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// Deterministic pseudo-random stream with a splitmix64 core.
///
/// The raw u64 sequence is fully specified (see docs/FORMATS.md), so stream
/// seeds recorded in manifests can be replayed by any implementation.
/// Gaussian draws consume exactly two raw words each (Box-Muller).
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1]; safe as a log argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. Two raw words per call, no caching.
  double normal();

  /// Uniform integer on [lo, hi] inclusive (modulo rule, documented).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 0;
};

/// Collision-resistant stream-seed derivation: master seed, a registered
/// domain label, and an index tuple. Unregistered labels are a contract error.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::span<const std::uint64_t> idx);

RngStream derive_stream(std::uint64_t master, std::string_view label,
                        std::initializer_list<std::uint64_t> idx);

bool is_registered_label(std::string_view label);
std::span<const std::string_view> registered_labels();

}  // namespace craft
