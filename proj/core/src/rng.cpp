#include "craft/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "craft/errors.hpp"

namespace craft {

namespace {

constexpr std::uint64_t kSplitmixGamma = 0x9E3779B97F4A7C15ull;

// Every stream domain used by the pipeline. Derivation refuses anything else
// so that two call sites can never silently share a stream by typo.
constexpr std::array<std::string_view, 13> kLabels = {
    "prompt/class-embed", "prompt/id-jitter", "refine/perturb",
    "curation/generate",  "train/init",       "train/batch",
    "train/draw",         "select/random",    "eval/sample",
    "verify/draws",       "verify/direction", "verify/groups",
    "ablate/cell",
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += kSplitmixGamma;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double RngStream::normal() {
  const double u1 = uniform_pos();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw ContractError("uniform_int: empty range");
  const std::uint64_t span =
      static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  return lo + static_cast<std::int64_t>(next_u64() % span);
}

bool is_registered_label(std::string_view label) {
  return std::find(kLabels.begin(), kLabels.end(), label) != kLabels.end();
}

std::span<const std::string_view> registered_labels() { return kLabels; }

std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::span<const std::uint64_t> idx) {
  if (!is_registered_label(label)) {
    throw ContractError("derive_seed: unregistered stream label '" +
                        std::string(label) + "'");
  }
  std::uint64_t s = master ^ fnv1a64(label);
  s = [&] {
    std::uint64_t st = s;
    return splitmix64_next(st);
  }();
  for (std::uint64_t e : idx) {
    std::uint64_t st = s ^ e;
    s = splitmix64_next(st);
  }
  return s;
}

RngStream derive_stream(std::uint64_t master, std::string_view label,
                        std::initializer_list<std::uint64_t> idx) {
  return RngStream(derive_seed(
      master, label, std::span<const std::uint64_t>(idx.begin(), idx.size())));
}

}  // namespace craft
