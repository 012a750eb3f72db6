#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "craft/prompts.hpp"

namespace craft {

enum class RewardChannel { H = 0, P = 1, A = 2 };

/// Raw, unscaled scores of the three synthetic judges.
struct RewardVector {
  double h = 0.0;
  double p = 0.0;
  double a = 0.0;

  double get(RewardChannel ch) const {
    switch (ch) {
      case RewardChannel::H: return h;
      case RewardChannel::P: return p;
      default: return a;
    }
  }
};

/// Synthetic reward definitions. The H channel scores closeness to the
/// per-class target mean, A scores compactness around the origin (the two
/// conflict away from the target), and P is a correlated third judge with
/// bounded deterministic hash-noise.
struct RewardParams {
  std::vector<std::vector<double>> mu;  // per-class target mean, size d each
  double lambda = 1.0;                  // compactness strength
  double noise_amp = 0.5;               // judge-noise amplitude

  int class_count() const { return static_cast<int>(mu.size()); }
  const std::vector<double>& mu_for(std::uint32_t prompt_id) const;
};

/// Scores one sample against the ORIGINAL prompt; `original.variant` must
/// be 0 (refined variants only diversify generation, never scoring).
double score(std::span<const double> x0, const Condition& original,
             RewardChannel which, const RewardParams& rp);
RewardVector score_all(std::span<const double> x0, const Condition& original,
                       const RewardParams& rp);

/// Per-channel affine map fitted on a candidate pool (population moments),
/// bringing the three signals onto comparable scales.
struct RewardScaler {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
  std::size_t pool_size = 0;

  static constexpr double kStdFloor = 1e-8;

  std::array<double, 3> scale(const RewardVector& rv) const;
};

RewardScaler fit_scaler(std::span<const RewardVector> pool);

/// Relative-importance weights of the composite reward; nonnegative, sum 1.
struct CompositeWeights {
  double h = 0.4;
  double p = 0.4;
  double a = 0.2;

  void validate() const;
};

/// r_total = alpha_h z_h + alpha_p z_p + alpha_a z_a on scaled values.
double composite(const RewardVector& rv, const RewardScaler& sc,
                 const CompositeWeights& w);

}  // namespace craft
