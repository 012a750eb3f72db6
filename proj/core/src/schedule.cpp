#include "craft/schedule.hpp"

#include <cmath>
#include <string>

#include "craft/errors.hpp"

namespace craft {

namespace {

void check_t(int t, const NoiseSchedule& s) {
  if (t < 1 || t > s.steps()) {
    throw DomainError("timestep " + std::to_string(t) + " outside [1, " +
                      std::to_string(s.steps()) + "]");
  }
}

}  // namespace

double NoiseSchedule::beta_at(int t) const {
  check_t(t, *this);
  return beta[static_cast<std::size_t>(t) - 1];
}
double NoiseSchedule::alpha_at(int t) const {
  check_t(t, *this);
  return alpha[static_cast<std::size_t>(t) - 1];
}
double NoiseSchedule::alpha_bar_at(int t) const {
  check_t(t, *this);
  return alpha_bar[static_cast<std::size_t>(t) - 1];
}
double NoiseSchedule::sigma_at(int t) const {
  check_t(t, *this);
  return sigma[static_cast<std::size_t>(t) - 1];
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw DomainError("schedule needs at least one step");
  NoiseSchedule s;
  s.beta = std::move(betas);
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  s.sigma.resize(s.beta.size());
  double prod = 1.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < s.beta.size(); ++i) {
    const double b = s.beta[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw DomainError("beta[" + std::to_string(i + 1) +
                        "] must lie strictly in (0,1)");
    }
    if (b < prev) {
      throw DomainError("beta must be nondecreasing (violated at t=" +
                        std::to_string(i + 1) + ")");
    }
    prev = b;
    s.alpha[i] = 1.0 - b;
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
    s.sigma[i] = std::sqrt(b);
  }
  return s;
}

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
  if (T < 2) throw DomainError("build_schedule: T must be >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw DomainError("build_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    betas[static_cast<std::size_t>(t)] =
        beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                         static_cast<double>(T - 1);
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

std::vector<double> forward_diffuse(std::span<const double> x0, int t,
                                    std::span<const double> eps,
                                    const NoiseSchedule& s) {
  if (x0.size() != eps.size()) {
    throw DomainError("forward_diffuse: x0/eps dimension mismatch");
  }
  const double abar = s.alpha_bar_at(t);
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

double weight_w(int t, const NoiseSchedule& s) {
  const double abar = s.alpha_bar_at(t);
  const double sig2 = s.sigma_at(t) * s.sigma_at(t);
  return (1.0 / (2.0 * sig2)) * ((1.0 - abar) / abar);
}

}  // namespace craft
