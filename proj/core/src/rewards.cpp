#include "craft/rewards.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "craft/errors.hpp"

namespace craft {

namespace {

// Bounded deterministic noise in [-1, 1] from the sample bits and the class.
double hash_noise_pm1(std::span<const double> x0, std::uint32_t cls) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto fold = [&h](std::uint64_t w) {
    for (int i = 0; i < 8; ++i) {
      h ^= (w >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  for (double v : x0) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    fold(bits);
  }
  fold(cls);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0,1)
  return 2.0 * u - 1.0;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

const std::vector<double>& RewardParams::mu_for(std::uint32_t prompt_id) const {
  if (mu.empty()) throw DomainError("RewardParams: empty mu table");
  return mu[prompt_id % mu.size()];
}

double score(std::span<const double> x0, const Condition& original,
             RewardChannel which, const RewardParams& rp) {
  if (original.variant != 0) {
    throw ContractError(
        "score: rewards must be evaluated against the original prompt "
        "(variant 0), got variant " +
        std::to_string(original.variant));
  }
  const std::vector<double>& mu = rp.mu_for(original.id);
  if (mu.size() != x0.size()) {
    throw DomainError("score: mu dimension does not match sample dimension");
  }
  const std::uint32_t cls =
      original.id % static_cast<std::uint32_t>(rp.mu.size());

  auto r_h = [&] {
    double d2 = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const double d = x0[i] - mu[i];
      d2 += d * d;
    }
    return -d2;
  };
  auto r_a = [&] {
    const double n2 = norm2(x0);
    return -rp.lambda * n2 * n2 / (1.0 + n2);
  };

  switch (which) {
    case RewardChannel::H: return r_h();
    case RewardChannel::A: return r_a();
    case RewardChannel::P:
      return 0.7 * r_h() + 0.3 * r_a() +
             rp.noise_amp * hash_noise_pm1(x0, cls);
  }
  throw ContractError("score: bad reward channel");
}

RewardVector score_all(std::span<const double> x0, const Condition& original,
                       const RewardParams& rp) {
  return RewardVector{score(x0, original, RewardChannel::H, rp),
                      score(x0, original, RewardChannel::P, rp),
                      score(x0, original, RewardChannel::A, rp)};
}

std::array<double, 3> RewardScaler::scale(const RewardVector& rv) const {
  return {(rv.h - mean[0]) / std[0], (rv.p - mean[1]) / std[1],
          (rv.a - mean[2]) / std[2]};
}

RewardScaler fit_scaler(std::span<const RewardVector> pool) {
  if (pool.empty()) throw DomainError("fit_scaler: empty pool");
  RewardScaler sc;
  sc.pool_size = pool.size();
  const double n = static_cast<double>(pool.size());
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (const RewardVector& rv : pool) {
      mean += rv.get(static_cast<RewardChannel>(c));
    }
    mean /= n;
    double var = 0.0;
    for (const RewardVector& rv : pool) {
      const double d = rv.get(static_cast<RewardChannel>(c)) - mean;
      var += d * d;
    }
    var /= n;  // population convention
    sc.mean[static_cast<std::size_t>(c)] = mean;
    sc.std[static_cast<std::size_t>(c)] =
        std::max(std::sqrt(var), RewardScaler::kStdFloor);
  }
  return sc;
}

void CompositeWeights::validate() const {
  if (h < 0.0 || p < 0.0 || a < 0.0) {
    throw DomainError("composite weights must be nonnegative");
  }
  if (std::abs(h + p + a - 1.0) > 1e-12) {
    throw DomainError("composite weights must sum to 1");
  }
}

double composite(const RewardVector& rv, const RewardScaler& sc,
                 const CompositeWeights& w) {
  if (sc.pool_size == 0) {
    throw ContractError("composite: scaler has not been fitted");
  }
  const std::array<double, 3> z = sc.scale(rv);
  return w.h * z[0] + w.p * z[1] + w.a * z[2];
}

}  // namespace craft
