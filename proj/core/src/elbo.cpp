#include "craft/elbo.hpp"

#include <cmath>
#include <numbers>

namespace craft {

double elbo_neg_mse(const EpsMlp& m, std::span<const double> x0,
                    std::span<const double> cond, const NoiseSchedule& s,
                    int K, RngStream rng) {
  return weighted_mse_estimate(
      [&](std::span<const double> x_t, int t) {
        return m.predict(x_t, t, cond);
      },
      x0, s, K, rng);
}

ElboEstimate elbo_neg_mse_stats(const EpsMlp& m, std::span<const double> x0,
                                std::span<const double> cond,
                                const NoiseSchedule& s, int K, RngStream rng) {
  return weighted_mse_stats(
      [&](std::span<const double> x_t, int t) {
        return m.predict(x_t, t, cond);
      },
      x0, s, K, rng);
}

double elbo_log_const(std::span<const double> x0, const NoiseSchedule& s) {
  const int T = s.steps();
  const double d = static_cast<double>(x0.size());
  const double two_pi = 2.0 * std::numbers::pi;

  // KL(q(x_T|x0) || N(0,I)) for q(x_T|x0) = N(sqrt(abar_T) x0, (1-abar_T) I).
  const double abar_T = s.alpha_bar_at(T);
  double nx0 = 0.0;
  for (double v : x0) nx0 += v * v;
  const double kl_prior =
      0.5 * (abar_T * nx0 - d * abar_T - d * std::log(1.0 - abar_T));

  // Variance-mismatch constants of the per-step KLs, t = 2..T, with
  // posterior variance beta_tilde = (1-abar_{t-1})/(1-abar_t) * beta_t.
  double kl_var = 0.0;
  for (int t = 2; t <= T; ++t) {
    const double beta_tilde = (1.0 - s.alpha_bar_at(t - 1)) /
                              (1.0 - s.alpha_bar_at(t)) * s.beta_at(t);
    const double sig2 = s.sigma_at(t) * s.sigma_at(t);
    const double r = beta_tilde / sig2;
    kl_var += 0.5 * d * (r - 1.0 - std::log(r));
  }

  // Reconstruction normalizer of log p(x0|x1) = N(x0; mu, sigma_1^2 I).
  const double sig2_1 = s.sigma_at(1) * s.sigma_at(1);
  const double recon_norm = 0.5 * d * std::log(two_pi * sig2_1);

  return -kl_prior - kl_var - recon_norm;
}

}  // namespace craft
