#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "craft/errors.hpp"
#include "craft/model.hpp"
#include "craft/rng.hpp"
#include "craft/schedule.hpp"

namespace craft {

struct SamplerOptions {
  double divergence_bound = 1e6;  // any |component| above this aborts
};

/// Ancestral reverse chain. Draw order: x_T components first, then one
/// Gaussian vector per step T..2; the final step adds no noise.
/// `eps_fn(x_t, t)` must return the predicted noise vector.
template <typename Pred>
std::vector<double> ancestral_sample(Pred&& eps_fn, int data_dim,
                                     const NoiseSchedule& s, RngStream rng,
                                     const SamplerOptions& opt = {}) {
  const int T = s.steps();
  std::vector<double> x(static_cast<std::size_t>(data_dim));
  rng.fill_normal(x);
  std::vector<double> z(static_cast<std::size_t>(data_dim));
  for (int t = T; t >= 1; --t) {
    const std::vector<double> eps_hat =
        eps_fn(std::span<const double>(x), t);
    const double a = s.alpha_at(t);
    const double abar = s.alpha_bar_at(t);
    const double coef = s.beta_at(t) / std::sqrt(1.0 - abar);
    const double inv_sqrt_a = 1.0 / std::sqrt(a);
    if (t > 1) {
      rng.fill_normal(z);
    } else {
      std::fill(z.begin(), z.end(), 0.0);
    }
    const double sig = s.sigma_at(t);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = inv_sqrt_a * (x[i] - coef * eps_hat[i]) + sig * z[i];
      if (!(std::abs(x[i]) <= opt.divergence_bound)) {
        throw NumericError("ancestral_sample: divergence at t=" +
                           std::to_string(t));
      }
    }
  }
  return x;
}

/// Model-backed sampler; bit-reproducible given (params, cond, stream seed).
std::vector<double> sample_x0(const EpsMlp& m, std::span<const double> cond,
                              const NoiseSchedule& s, RngStream rng,
                              const SamplerOptions& opt = {});

}  // namespace craft
