#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "craft/model.hpp"
#include "craft/prompts.hpp"
#include "craft/rewards.hpp"
#include "craft/rng.hpp"
#include "craft/schedule.hpp"

namespace craft {

/// One verification group: members sampled under a shared original prompt,
/// with zero-sum normalized advantages.
struct VerifyGroup {
  Condition condition;                       // original prompt, variant 0
  std::vector<std::vector<double>> members;  // x0 per member
  std::vector<double> advantages;            // zero-sum within the group
};

/// Materialized common random numbers: the same (t, eps) draws are reused
/// for every parameter point and both gradient routes, so Monte-Carlo noise
/// cancels exactly in differences.
struct GroupDraws {
  int K = 0;
  std::vector<int> t;          // [member * K + k]
  std::vector<double> eps;     // [(member * K + k) * d + i]
};

std::vector<GroupDraws> make_draws(std::span<const VerifyGroup> groups, int K,
                                   int data_dim, const NoiseSchedule& s,
                                   std::uint64_t master);

/// Per-member Monte-Carlo estimates of E[w(t) ||eps_hat - eps||^2] under
/// shared draws.
std::vector<double> estimate_M(const EpsMlp& model, const VerifyGroup& g,
                               const GroupDraws& d, const NoiseSchedule& s);
/// Fresh-draw convenience overload.
std::vector<double> estimate_M(const EpsMlp& model, const VerifyGroup& g,
                               int K, const NoiseSchedule& s, RngStream rng);

/// Importance-surrogate objective
///   mean over groups of (1/G) sum_i exp(-(M_i(theta) - M_i(theta_old))) A_i.
/// Exactly zero at theta == theta_old by the zero-sum identity. Aborts when
/// |delta M| exceeds 50 (the step is far outside the linearization regime).
double estimate_surrogate_objective(const EpsMlp& model,
                                    const EpsMlp& model_old,
                                    std::span<const VerifyGroup> groups,
                                    std::span<const GroupDraws> draws,
                                    const NoiseSchedule& s);

/// Gradient of the surrogate objective at `model`, chain rule through the
/// exp factors (which reduce to one when model == model_old).
std::vector<double> surrogate_gradient(const EpsMlp& model,
                                       const EpsMlp& model_old,
                                       std::span<const VerifyGroup> groups,
                                       std::span<const GroupDraws> draws,
                                       const NoiseSchedule& s);

/// Gradient of mean_g (1/G) sum_i A_i * (1/K) sum_k w(t) ||eps_hat - eps||^2,
/// accumulated in one pass over every draw.
std::vector<double> weighted_mse_gradient(const EpsMlp& model,
                                          std::span<const VerifyGroup> groups,
                                          std::span<const GroupDraws> draws,
                                          const NoiseSchedule& s);

struct GradCheck {
  double relative_error = 0.0;
  bool degenerate = false;          // all-zero advantages, both sides zero
  std::vector<double> g_surrogate;  // gradient of the surrogate at theta_old
  std::vector<double> g_mse;        // minus gradient of the weighted MSE
};

/// Two independently-coded routes to the same gradient at theta_old: the
/// surrogate's chain rule (exp factors linearize to one) versus the
/// advantage-weighted noise-MSE with w(t) included. Returns the relative
/// L2 difference.
GradCheck gradient_equivalence(const EpsMlp& model_old,
                               std::span<const VerifyGroup> groups,
                               std::span<const GroupDraws> draws,
                               const NoiseSchedule& s);

struct PerturbationSpec {
  std::vector<double> direction;  // unit norm, size = param count
  std::vector<double> eta_grid;   // strictly decreasing, positive

  void validate(std::size_t param_count) const;
  static PerturbationSpec random_direction(std::size_t param_count,
                                           std::span<const double> eta_grid,
                                           RngStream rng);
};

std::vector<double> geometric_grid(double eta_max, double eta_min, int points);

struct EtaSweepResult {
  std::vector<double> eta;
  std::vector<double> residual;   // |J(eta) - eta * <grad, dir>|
  double slope = 0.0;             // log-log least squares
  int points_used = 0;
  double noise_floor = 0.0;
  double linear_coef = 0.0;       // <grad, dir>
};

/// First-order Taylor-residual scan along a fixed direction, with shared
/// draws across the whole grid. Residuals under the floating-point noise
/// floor are excluded from the slope fit.
EtaSweepResult eta_sweep(const EpsMlp& model_old, const PerturbationSpec& spec,
                         std::span<const VerifyGroup> groups,
                         std::span<const GroupDraws> draws,
                         const NoiseSchedule& s);

/// Max over groups of |sum of advantages|.
double zero_sum_audit(std::span<const VerifyGroup> groups);
std::vector<double> zero_sum_residuals(std::span<const VerifyGroup> groups);

struct VerifierThresholds {
  double grad_relative_error = 1e-8;
  double slope_lo = 1.8;
  double slope_hi = 2.2;
  double zero_sum = 1e-12;
};

struct VerificationReport {
  double grad_relative_error = 0.0;
  bool grad_degenerate = false;
  double residual_slope = 0.0;
  int eta_points_used = 0;
  std::vector<std::pair<double, double>> eta_residuals;
  double zero_sum_max = 0.0;
  std::vector<double> per_group_zero_sum;
  int groups = 0;
  int group_size = 0;
  int draws = 0;
  bool pass_grad = false;
  bool pass_slope = false;
  bool pass_zero_sum = false;
  std::uint64_t seed = 0;
};

/// Builds groups by sampling the model under shared original prompts and
/// normalizing composite rewards within each group.
std::vector<VerifyGroup> make_verification_groups(
    const EpsMlp& model, std::span<const Condition> prompts, int group_size,
    const NoiseSchedule& s, const RewardParams& rp, const CompositeWeights& w,
    double eps_stab, std::uint64_t master, const SamplerOptions& opt = {});

VerificationReport run_verification(const EpsMlp& model,
                                    std::span<const VerifyGroup> groups,
                                    int K, std::span<const double> eta_grid,
                                    const NoiseSchedule& s,
                                    std::uint64_t master,
                                    const VerifierThresholds& thr = {});

}  // namespace craft
