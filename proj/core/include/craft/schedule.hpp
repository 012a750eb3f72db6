#pragma once

#include <span>
#include <vector>

namespace craft {

/// Forward-noising coefficients indexed by timestep t = 1..T.
/// Reverse-process variances use the small-variance choice sigma_t^2 = beta_t.
struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;      // 1 - beta_t
  std::vector<double> alpha_bar;  // prod_{s<=t} alpha_s
  std::vector<double> sigma;      // sqrt(beta_t)

  int steps() const { return static_cast<int>(beta.size()); }

  double beta_at(int t) const;
  double alpha_at(int t) const;
  double alpha_bar_at(int t) const;
  double sigma_at(int t) const;

  /// Validates beta in (0,1), nondecreasing, and derives the other arrays.
  /// Accepts T >= 1 so single-step chains can be built directly for tests.
  static NoiseSchedule from_betas(std::vector<double> betas);
};

/// Linear beta interpolation over T >= 2 steps.
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
std::vector<double> forward_diffuse(std::span<const double> x0, int t,
                                    std::span<const double> eps,
                                    const NoiseSchedule& s);

/// Per-timestep loss weight (1 / (2 sigma_t^2)) * ((1 - abar_t) / abar_t).
double weight_w(int t, const NoiseSchedule& s);

}  // namespace craft
