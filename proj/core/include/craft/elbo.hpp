#pragma once

#include <span>
#include <vector>

#include "craft/model.hpp"
#include "craft/rng.hpp"
#include "craft/schedule.hpp"

namespace craft {

struct ElboEstimate {
  double mean = 0.0;       // Monte-Carlo mean of w(t)*||eps_hat - eps||^2
  double std_error = 0.0;  // standard error of that mean
  int draws = 0;
};

/// K-draw Monte-Carlo estimate of E_{t,eps}[ w(t) ||eps_hat(x_t,t) - eps||^2 ]
/// for an arbitrary predictor eps_fn(x_t, t). Draw order per k: t, then the
/// eps components.
template <typename Pred>
ElboEstimate weighted_mse_stats(Pred&& eps_fn, std::span<const double> x0,
                                const NoiseSchedule& s, int K, RngStream rng) {
  if (K < 1) throw DomainError("weighted_mse_stats: K must be >= 1");
  const int T = s.steps();
  std::vector<double> eps(x0.size());
  double mean = 0.0;
  double m2 = 0.0;
  for (int k = 0; k < K; ++k) {
    const int t = static_cast<int>(rng.uniform_int(1, T));
    rng.fill_normal(eps);
    const std::vector<double> x_t = forward_diffuse(x0, t, eps, s);
    const std::vector<double> pred = eps_fn(std::span<const double>(x_t), t);
    double sq = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double e = pred[i] - eps[i];
      sq += e * e;
    }
    const double term = weight_w(t, s) * sq;
    const double delta = term - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (term - mean);
  }
  ElboEstimate est;
  est.mean = mean;
  est.draws = K;
  if (K > 1) {
    const double var = m2 / static_cast<double>(K - 1);
    est.std_error = std::sqrt(var / static_cast<double>(K));
  }
  return est;
}

template <typename Pred>
double weighted_mse_estimate(Pred&& eps_fn, std::span<const double> x0,
                             const NoiseSchedule& s, int K, RngStream rng) {
  return weighted_mse_stats(eps_fn, x0, s, K, rng).mean;
}

/// Model-backed estimator of the negative-ELBO noise term; the likelihood
/// surrogate is (-estimate + const).
double elbo_neg_mse(const EpsMlp& m, std::span<const double> x0,
                    std::span<const double> cond, const NoiseSchedule& s,
                    int K, RngStream rng);
ElboEstimate elbo_neg_mse_stats(const EpsMlp& m, std::span<const double> x0,
                                std::span<const double> cond,
                                const NoiseSchedule& s, int K, RngStream rng);

/// Additive constant c(x0, s) such that
///   -T * E[w(t)||eps_hat - eps||^2] + c(x0, s)
/// lower-bounds log p(x0 | c) under the Gaussian reverse model with
/// variances sigma_t^2. Aggregates the prior KL, the posterior-variance
/// mismatch terms, and the reconstruction normalizer.
double elbo_log_const(std::span<const double> x0, const NoiseSchedule& s);

}  // namespace craft
