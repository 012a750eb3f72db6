#include "craft/verifier.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "craft/errors.hpp"
#include "craft/sampler.hpp"
#include "craft/trainer.hpp"

namespace craft {

namespace {

constexpr double kExpGuard = 50.0;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> member_xt(const VerifyGroup& g, const GroupDraws& d,
                              std::size_t member, int k,
                              const NoiseSchedule& s, int* t_out,
                              std::span<const double>* eps_out) {
  const std::size_t dim = g.members[member].size();
  const std::size_t idx = member * static_cast<std::size_t>(d.K) +
                          static_cast<std::size_t>(k);
  const int t = d.t[idx];
  const std::span<const double> eps(&d.eps[idx * dim], dim);
  *t_out = t;
  *eps_out = eps;
  return forward_diffuse(g.members[member], t, eps, s);
}

}  // namespace

std::vector<GroupDraws> make_draws(std::span<const VerifyGroup> groups, int K,
                                   int data_dim, const NoiseSchedule& s,
                                   std::uint64_t master) {
  if (K < 1) throw DomainError("make_draws: K must be >= 1");
  std::vector<GroupDraws> out;
  out.reserve(groups.size());
  const int T = s.steps();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const std::size_t members = groups[gi].members.size();
    GroupDraws d;
    d.K = K;
    d.t.resize(members * static_cast<std::size_t>(K));
    d.eps.resize(members * static_cast<std::size_t>(K) *
                 static_cast<std::size_t>(data_dim));
    for (std::size_t m = 0; m < members; ++m) {
      RngStream rng = derive_stream(master, "verify/draws",
                                    {static_cast<std::uint64_t>(gi),
                                     static_cast<std::uint64_t>(m)});
      for (int k = 0; k < K; ++k) {
        const std::size_t idx =
            m * static_cast<std::size_t>(K) + static_cast<std::size_t>(k);
        d.t[idx] = static_cast<int>(rng.uniform_int(1, T));
        rng.fill_normal(std::span<double>(
            &d.eps[idx * static_cast<std::size_t>(data_dim)],
            static_cast<std::size_t>(data_dim)));
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<double> estimate_M(const EpsMlp& model, const VerifyGroup& g,
                               const GroupDraws& d, const NoiseSchedule& s) {
  std::vector<double> M(g.members.size(), 0.0);
  for (std::size_t m = 0; m < g.members.size(); ++m) {
    double acc = 0.0;
    for (int k = 0; k < d.K; ++k) {
      int t = 0;
      std::span<const double> eps;
      const std::vector<double> x_t = member_xt(g, d, m, k, s, &t, &eps);
      const std::vector<double> pred =
          model.predict(x_t, t, g.condition.embedding);
      double sq = 0.0;
      for (std::size_t i = 0; i < eps.size(); ++i) {
        const double e = pred[i] - eps[i];
        sq += e * e;
      }
      acc += weight_w(t, s) * sq;
    }
    M[m] = acc / static_cast<double>(d.K);
  }
  return M;
}

std::vector<double> estimate_M(const EpsMlp& model, const VerifyGroup& g,
                               int K, const NoiseSchedule& s, RngStream rng) {
  const int dim = model.arch().data_dim;
  const int T = s.steps();
  GroupDraws d;
  d.K = K;
  d.t.resize(g.members.size() * static_cast<std::size_t>(K));
  d.eps.resize(d.t.size() * static_cast<std::size_t>(dim));
  for (std::size_t idx = 0; idx < d.t.size(); ++idx) {
    d.t[idx] = static_cast<int>(rng.uniform_int(1, T));
    rng.fill_normal(std::span<double>(
        &d.eps[idx * static_cast<std::size_t>(dim)],
        static_cast<std::size_t>(dim)));
  }
  return estimate_M(model, g, d, s);
}

double estimate_surrogate_objective(const EpsMlp& model,
                                    const EpsMlp& model_old,
                                    std::span<const VerifyGroup> groups,
                                    std::span<const GroupDraws> draws,
                                    const NoiseSchedule& s) {
  if (groups.size() != draws.size()) {
    throw ContractError("surrogate: groups/draws size mismatch");
  }
  double total = 0.0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const VerifyGroup& g = groups[gi];
    const std::vector<double> M_new = estimate_M(model, g, draws[gi], s);
    const std::vector<double> M_old = estimate_M(model_old, g, draws[gi], s);
    double group_val = 0.0;
    for (std::size_t m = 0; m < g.members.size(); ++m) {
      const double dm = M_new[m] - M_old[m];
      if (std::abs(dm) > kExpGuard) {
        throw NumericError(
            "surrogate: |delta M| = " + std::to_string(std::abs(dm)) +
            " exceeds the exp guard; the parameter step is too large");
      }
      group_val += std::exp(-dm) * g.advantages[m];
    }
    total += group_val / static_cast<double>(g.members.size());
  }
  return total / static_cast<double>(groups.size());
}

std::vector<double> surrogate_gradient(const EpsMlp& model,
                                       const EpsMlp& model_old,
                                       std::span<const VerifyGroup> groups,
                                       std::span<const GroupDraws> draws,
                                       const NoiseSchedule& s) {
  if (groups.size() != draws.size()) {
    throw ContractError("surrogate_gradient: groups/draws size mismatch");
  }
  const std::size_t P = model.arch().param_count();
  const double G = static_cast<double>(groups.size());
  std::vector<double> grad(P, 0.0);
  std::vector<double> member_grad(P);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const VerifyGroup& g = groups[gi];
    const GroupDraws& d = draws[gi];
    const std::vector<double> M_new = estimate_M(model, g, d, s);
    const std::vector<double> M_old = estimate_M(model_old, g, d, s);
    const double inv_members = 1.0 / static_cast<double>(g.members.size());
    for (std::size_t m = 0; m < g.members.size(); ++m) {
      std::fill(member_grad.begin(), member_grad.end(), 0.0);
      for (int k = 0; k < d.K; ++k) {
        int t = 0;
        std::span<const double> eps;
        const std::vector<double> x_t = member_xt(g, d, m, k, s, &t, &eps);
        model.accumulate_sq_err_grad(
            x_t, t, g.condition.embedding, eps,
            weight_w(t, s) / static_cast<double>(d.K), member_grad);
      }
      const double dm = M_new[m] - M_old[m];
      if (std::abs(dm) > kExpGuard) {
        throw NumericError("surrogate_gradient: |delta M| exceeds exp guard");
      }
      const double coef = -g.advantages[m] * std::exp(-dm) * inv_members / G;
      for (std::size_t i = 0; i < P; ++i) grad[i] += coef * member_grad[i];
    }
  }
  return grad;
}

std::vector<double> weighted_mse_gradient(const EpsMlp& model,
                                          std::span<const VerifyGroup> groups,
                                          std::span<const GroupDraws> draws,
                                          const NoiseSchedule& s) {
  if (groups.size() != draws.size()) {
    throw ContractError("weighted_mse_gradient: groups/draws size mismatch");
  }
  const double G = static_cast<double>(groups.size());
  std::vector<double> grad(model.arch().param_count(), 0.0);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const VerifyGroup& g = groups[gi];
    const GroupDraws& d = draws[gi];
    const double inv = 1.0 / (G * static_cast<double>(g.members.size()) *
                              static_cast<double>(d.K));
    for (std::size_t m = 0; m < g.members.size(); ++m) {
      for (int k = 0; k < d.K; ++k) {
        int t = 0;
        std::span<const double> eps;
        const std::vector<double> x_t = member_xt(g, d, m, k, s, &t, &eps);
        model.accumulate_sq_err_grad(x_t, t, g.condition.embedding, eps,
                                     g.advantages[m] * weight_w(t, s) * inv,
                                     grad);
      }
    }
  }
  return grad;
}

GradCheck gradient_equivalence(const EpsMlp& model_old,
                               std::span<const VerifyGroup> groups,
                               std::span<const GroupDraws> draws,
                               const NoiseSchedule& s) {
  GradCheck out;
  out.g_surrogate =
      surrogate_gradient(model_old, model_old, groups, draws, s);
  out.g_mse = weighted_mse_gradient(model_old, groups, draws, s);
  for (double& v : out.g_mse) v = -v;

  const double n2 = norm(out.g_mse);
  if (n2 == 0.0) {
    out.degenerate = true;
    out.relative_error = 0.0;
    return out;
  }
  double diff2 = 0.0;
  for (std::size_t i = 0; i < out.g_mse.size(); ++i) {
    const double dlt = out.g_surrogate[i] - out.g_mse[i];
    diff2 += dlt * dlt;
  }
  out.relative_error = std::sqrt(diff2) / n2;
  return out;
}

void PerturbationSpec::validate(std::size_t param_count) const {
  if (direction.size() != param_count) {
    throw ContractError("PerturbationSpec: direction size mismatch");
  }
  const double n = norm(direction);
  if (std::abs(n - 1.0) > 1e-12) {
    throw ContractError("PerturbationSpec: direction must have unit norm");
  }
  if (eta_grid.empty()) throw DomainError("PerturbationSpec: empty eta grid");
  for (std::size_t i = 0; i < eta_grid.size(); ++i) {
    if (!(eta_grid[i] > 0.0)) {
      throw DomainError("PerturbationSpec: eta must be positive");
    }
    if (i > 0 && !(eta_grid[i] < eta_grid[i - 1])) {
      throw DomainError("PerturbationSpec: eta grid must strictly decrease");
    }
  }
}

PerturbationSpec PerturbationSpec::random_direction(
    std::size_t param_count, std::span<const double> eta_grid, RngStream rng) {
  PerturbationSpec spec;
  spec.direction.resize(param_count);
  double n = 0.0;
  do {
    rng.fill_normal(spec.direction);
    n = norm(spec.direction);
  } while (n == 0.0);
  for (double& v : spec.direction) v /= n;
  // renormalize once more so the norm is 1 to the last ulp
  n = norm(spec.direction);
  for (double& v : spec.direction) v /= n;
  spec.eta_grid.assign(eta_grid.begin(), eta_grid.end());
  return spec;
}

std::vector<double> geometric_grid(double eta_max, double eta_min,
                                   int points) {
  if (!(eta_max > eta_min && eta_min > 0.0) || points < 2) {
    throw DomainError("geometric_grid: need eta_max > eta_min > 0, points >= 2");
  }
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double ratio = std::log(eta_min / eta_max) / (points - 1);
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = eta_max * std::exp(ratio * i);
  }
  return grid;
}

EtaSweepResult eta_sweep(const EpsMlp& model_old, const PerturbationSpec& spec,
                         std::span<const VerifyGroup> groups,
                         std::span<const GroupDraws> draws,
                         const NoiseSchedule& s) {
  spec.validate(model_old.arch().param_count());
  const std::vector<double> g0 =
      surrogate_gradient(model_old, model_old, groups, draws, s);
  const double lin = dot(g0, spec.direction);

  EtaSweepResult res;
  res.linear_coef = lin;
  res.eta = spec.eta_grid;
  res.residual.resize(spec.eta_grid.size());

  EpsMlp probe = model_old;
  std::vector<double> theta(model_old.params().begin(),
                            model_old.params().end());
  double max_scale = 1.0;
  for (std::size_t i = 0; i < spec.eta_grid.size(); ++i) {
    const double eta = spec.eta_grid[i];
    std::vector<double> shifted = theta;
    for (std::size_t p = 0; p < shifted.size(); ++p) {
      shifted[p] += eta * spec.direction[p];
    }
    probe.set_params(shifted);
    const double J =
        estimate_surrogate_objective(probe, model_old, groups, draws, s);
    res.residual[i] = std::abs(J - eta * lin);
    max_scale = std::max({max_scale, std::abs(J), std::abs(eta * lin)});
  }

  res.noise_floor =
      100.0 * std::numeric_limits<double>::epsilon() * max_scale;

  // log-log least-squares fit over points above the noise floor
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < res.eta.size(); ++i) {
    if (res.residual[i] <= res.noise_floor) continue;
    const double lx = std::log(res.eta[i]);
    const double ly = std::log(res.residual[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  res.points_used = n;
  if (n >= 2) {
    res.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return res;
}

std::vector<double> zero_sum_residuals(std::span<const VerifyGroup> groups) {
  std::vector<double> out;
  out.reserve(groups.size());
  for (const VerifyGroup& g : groups) {
    double sum = 0.0;
    for (double a : g.advantages) sum += a;
    out.push_back(std::abs(sum));
  }
  return out;
}

double zero_sum_audit(std::span<const VerifyGroup> groups) {
  double worst = 0.0;
  for (double r : zero_sum_residuals(groups)) worst = std::max(worst, r);
  return worst;
}

std::vector<VerifyGroup> make_verification_groups(
    const EpsMlp& model, std::span<const Condition> prompts, int group_size,
    const NoiseSchedule& s, const RewardParams& rp, const CompositeWeights& w,
    double eps_stab, std::uint64_t master, const SamplerOptions& opt) {
  if (group_size < 1) {
    throw DomainError("make_verification_groups: group_size >= 1");
  }
  std::vector<VerifyGroup> groups;
  std::vector<RewardVector> flat;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    VerifyGroup g;
    g.condition = prompts[p];
    for (int m = 0; m < group_size; ++m) {
      RngStream rng = derive_stream(master, "verify/groups",
                                    {prompts[p].id,
                                     static_cast<std::uint64_t>(m)});
      g.members.push_back(
          sample_x0(model, prompts[p].embedding, s, rng, opt));
      flat.push_back(score_all(g.members.back(), prompts[p], rp));
    }
    groups.push_back(std::move(g));
  }
  const RewardScaler scaler = fit_scaler(flat);
  std::size_t idx = 0;
  for (VerifyGroup& g : groups) {
    std::vector<double> totals;
    totals.reserve(g.members.size());
    for (std::size_t m = 0; m < g.members.size(); ++m) {
      totals.push_back(composite(flat[idx++], scaler, w));
    }
    g.advantages = group_advantage(totals, eps_stab);
  }
  return groups;
}

VerificationReport run_verification(const EpsMlp& model,
                                    std::span<const VerifyGroup> groups,
                                    int K, std::span<const double> eta_grid,
                                    const NoiseSchedule& s,
                                    std::uint64_t master,
                                    const VerifierThresholds& thr) {
  VerificationReport rep;
  rep.seed = master;
  rep.groups = static_cast<int>(groups.size());
  rep.group_size =
      groups.empty() ? 0 : static_cast<int>(groups[0].members.size());
  rep.draws = K;

  rep.per_group_zero_sum = zero_sum_residuals(groups);
  rep.zero_sum_max = zero_sum_audit(groups);
  rep.pass_zero_sum = rep.zero_sum_max < thr.zero_sum;

  const std::vector<GroupDraws> draws =
      make_draws(groups, K, model.arch().data_dim, s, master);

  const GradCheck gc = gradient_equivalence(model, groups, draws, s);
  rep.grad_relative_error = gc.relative_error;
  rep.grad_degenerate = gc.degenerate;
  rep.pass_grad = !gc.degenerate && gc.relative_error < thr.grad_relative_error;

  const PerturbationSpec spec = PerturbationSpec::random_direction(
      model.arch().param_count(), eta_grid,
      derive_stream(master, "verify/direction", {}));
  const EtaSweepResult sweep = eta_sweep(model, spec, groups, draws, s);
  rep.residual_slope = sweep.slope;
  rep.eta_points_used = sweep.points_used;
  for (std::size_t i = 0; i < sweep.eta.size(); ++i) {
    rep.eta_residuals.emplace_back(sweep.eta[i], sweep.residual[i]);
  }
  rep.pass_slope =
      sweep.points_used >= 2 && sweep.slope >= thr.slope_lo &&
      sweep.slope <= thr.slope_hi;
  return rep;
}

}  // namespace craft
