#include "craft/evaluator.hpp"

#include <cmath>
#include <set>

#include "craft/errors.hpp"
#include "craft/sampler.hpp"

namespace craft {

namespace {

double metric_value(const RewardVector& rv, WinMetric m,
                    const RewardScaler& sc, const CompositeWeights& w) {
  switch (m) {
    case WinMetric::H: return rv.h;
    case WinMetric::P: return rv.p;
    case WinMetric::A: return rv.a;
    case WinMetric::Composite: return composite(rv, sc, w);
  }
  throw ContractError("win_rate: bad metric");
}

void check_held_out(std::span<const Condition> prompts, const Pool& pool) {
  std::set<std::uint32_t> train_ids;
  for (const Condition& c : pool.prompts.originals) train_ids.insert(c.id);
  for (const Condition& c : prompts) {
    if (train_ids.count(c.id)) {
      throw ContractError("evaluation prompt id " + std::to_string(c.id) +
                          " overlaps the curation prompt set");
    }
  }
}

int cell_steps(std::size_t data_size, std::size_t ref_size, int base_steps) {
  if (ref_size == 0 || data_size == 0) return base_steps;
  const double scaled =
      static_cast<double>(base_steps) *
      std::sqrt(static_cast<double>(data_size) / static_cast<double>(ref_size));
  return std::max(1, static_cast<int>(std::lround(scaled)));
}

AblationCell train_and_eval_cell(const std::string& name,
                                 std::vector<TrainingPair> dataset,
                                 const CompositeWeights& eval_weights,
                                 const CellContext& ctx, int steps,
                                 std::uint64_t cell_seed) {
  AblationCell cell;
  cell.name = name;
  cell.steps = steps;
  cell.data_size = dataset.size();
  if (dataset.empty()) {
    cell.empty_cell = true;
    return cell;
  }
  TrainConfig cfg = ctx.train_cfg;
  cfg.total_steps = steps;
  try {
    TrainResult tr = train(cfg, dataset, ctx.pool->prompts.originals,
                           ctx.schedule, *ctx.base_model, ctx.rule, cell_seed);
    cell.report = evaluate(tr.model, ctx.schedule, ctx.eval_prompts,
                           ctx.reward_params, ctx.pool->scaler, eval_weights,
                           ctx.eval_draws_per_prompt, cell_seed, 1,
                           ctx.sampler_opts);
  } catch (const NumericError& e) {
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

SampleFn model_sampler(const EpsMlp& m, const NoiseSchedule& s,
                       const SamplerOptions& opt) {
  return [&m, &s, opt](const Condition& c,
                       RngStream rng) -> std::optional<std::vector<double>> {
    try {
      return sample_x0(m, c.embedding, s, rng, opt);
    } catch (const NumericError&) {
      return std::nullopt;
    }
  };
}

EvalReport evaluate(const SampleFn& sampler,
                    std::span<const Condition> prompts,
                    const RewardParams& rp, const RewardScaler& scaler,
                    const CompositeWeights& w, int draws_per_prompt,
                    std::uint64_t master, std::uint64_t role) {
  if (draws_per_prompt < 1) {
    throw DomainError("evaluate: draws_per_prompt must be >= 1");
  }
  EvalReport rep;
  rep.seed = master;
  rep.prompts = static_cast<int>(prompts.size());
  rep.draws_per_prompt = draws_per_prompt;
  for (const Condition& c : prompts) {
    for (int k = 0; k < draws_per_prompt; ++k) {
      RngStream rng = derive_stream(
          master, "eval/sample", {role, c.id, static_cast<std::uint64_t>(k)});
      const std::optional<std::vector<double>> x0 = sampler(c, rng);
      if (!x0) {
        rep.divergent_count += 1;
        continue;
      }
      const RewardVector rv = score_all(*x0, c, rp);
      const std::array<double, 3> z = scaler.scale(rv);
      rep.raw_mean[0] += rv.h;
      rep.raw_mean[1] += rv.p;
      rep.raw_mean[2] += rv.a;
      for (int i = 0; i < 3; ++i) {
        rep.scaled_mean[static_cast<std::size_t>(i)] +=
            z[static_cast<std::size_t>(i)];
      }
      rep.composite_mean += composite(rv, scaler, w);
      rep.sample_count += 1;
    }
  }
  if (rep.sample_count > 0) {
    const double n = static_cast<double>(rep.sample_count);
    for (int i = 0; i < 3; ++i) {
      rep.raw_mean[static_cast<std::size_t>(i)] /= n;
      rep.scaled_mean[static_cast<std::size_t>(i)] /= n;
    }
    rep.composite_mean /= n;
  }
  return rep;
}

EvalReport evaluate(const EpsMlp& model, const NoiseSchedule& s,
                    std::span<const Condition> prompts,
                    const RewardParams& rp, const RewardScaler& scaler,
                    const CompositeWeights& w, int draws_per_prompt,
                    std::uint64_t master, std::uint64_t role,
                    const SamplerOptions& opt) {
  return evaluate(model_sampler(model, s, opt), prompts, rp, scaler, w,
                  draws_per_prompt, master, role);
}

double win_rate(const SampleFn& model, const SampleFn& base,
                std::span<const Condition> prompts, WinMetric metric,
                const RewardParams& rp, const RewardScaler& scaler,
                const CompositeWeights& w, std::uint64_t master,
                std::uint64_t role_model, std::uint64_t role_base) {
  if (prompts.empty()) throw DomainError("win_rate: empty prompt set");
  double wins = 0.0;
  for (const Condition& c : prompts) {
    RngStream rng_m =
        derive_stream(master, "eval/sample", {role_model, c.id, 0});
    RngStream rng_b =
        derive_stream(master, "eval/sample", {role_base, c.id, 0});
    const std::optional<std::vector<double>> xm = model(c, rng_m);
    const std::optional<std::vector<double>> xb = base(c, rng_b);
    if (!xm && !xb) {
      wins += 0.5;
      continue;
    }
    if (!xm) continue;  // divergent candidate loses
    if (!xb) {
      wins += 1.0;
      continue;
    }
    const double vm = metric_value(score_all(*xm, c, rp), metric, scaler, w);
    const double vb = metric_value(score_all(*xb, c, rp), metric, scaler, w);
    if (vm > vb) {
      wins += 1.0;
    } else if (vm == vb) {
      wins += 0.5;
    }
  }
  return wins / static_cast<double>(prompts.size());
}

WinRateTable win_rates(const SampleFn& model, const SampleFn& base,
                       std::span<const Condition> prompts,
                       const RewardParams& rp, const RewardScaler& scaler,
                       const CompositeWeights& w, std::uint64_t master,
                       std::uint64_t role_model, std::uint64_t role_base) {
  WinRateTable t;
  t.h = win_rate(model, base, prompts, WinMetric::H, rp, scaler, w, master,
                 role_model, role_base);
  t.p = win_rate(model, base, prompts, WinMetric::P, rp, scaler, w, master,
                 role_model, role_base);
  t.a = win_rate(model, base, prompts, WinMetric::A, rp, scaler, w, master,
                 role_model, role_base);
  t.composite = win_rate(model, base, prompts, WinMetric::Composite, rp,
                         scaler, w, master, role_model, role_base);
  return t;
}

CompositeWeights restrict_weights(const CompositeWeights& w, FilterRule rule) {
  const std::span<const RewardChannel> channels = rule_channels(rule);
  CompositeWeights r{0.0, 0.0, 0.0};
  double total = 0.0;
  for (RewardChannel ch : channels) {
    switch (ch) {
      case RewardChannel::H: r.h = w.h; total += w.h; break;
      case RewardChannel::P: r.p = w.p; total += w.p; break;
      case RewardChannel::A: r.a = w.a; total += w.a; break;
    }
  }
  if (total <= 0.0) {
    throw DomainError("restrict_weights: rule carries zero total weight");
  }
  r.h /= total;
  r.p /= total;
  r.a /= total;
  return r;
}

std::vector<AblationCell> ablate_selection(
    std::span<const SelectionStrategy> strategies, const CellContext& ctx,
    std::span<const int> steps_override, std::uint64_t master) {
  check_held_out(ctx.eval_prompts, *ctx.pool);
  if (!steps_override.empty() && steps_override.size() != strategies.size()) {
    throw DomainError("ablate_selection: steps override size mismatch");
  }

  std::vector<TrainingPair> retained =
      flatten_retained(ctx.pool->groups, ctx.rule);

  std::vector<AblationCell> cells;
  std::size_t ref_size = 0;
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    SelectionStrategy st = strategies[i];
    const std::string name = st.to_string();
    const std::uint64_t cell_seed =
        derive_seed(master, "ablate/cell",
                    std::array<std::uint64_t, 2>{fnv1a64("selection"),
                                                 fnv1a64(name)});
    if (st.kind == SelectionStrategy::Kind::Random) {
      st.seed = derive_seed(cell_seed, "select/random", {});
    }
    std::vector<TrainingPair> dataset = select(retained, st);
    if (ref_size == 0) ref_size = std::max<std::size_t>(1, dataset.size());
    const int steps =
        steps_override.empty()
            ? cell_steps(dataset.size(), ref_size, ctx.train_cfg.total_steps)
            : steps_override[i];
    cells.push_back(train_and_eval_cell(name, std::move(dataset),
                                        ctx.pool->weights, ctx, steps,
                                        cell_seed));
  }
  return cells;
}

std::vector<AblationCell> ablate_reward_combos(
    std::span<const FilterRule> rules, const SelectionStrategy& strategy,
    const CellContext& ctx, std::uint64_t master) {
  check_held_out(ctx.eval_prompts, *ctx.pool);
  std::vector<AblationCell> cells;
  for (FilterRule rule : rules) {
    const std::string name(rule_name(rule));
    const std::uint64_t cell_seed = derive_seed(
        master, "ablate/cell",
        std::array<std::uint64_t, 2>{fnv1a64("rule"), fnv1a64(name)});

    // Recompute r_total and advantages under the rule-restricted weights.
    const CompositeWeights rw = restrict_weights(ctx.pool->weights, rule);
    Pool scoped = *ctx.pool;
    scoped.weights = rw;
    for (GenerationGroup& g : scoped.groups) {
      for (std::size_t j = 0; j < g.rewards.size(); ++j) {
        g.r_total[j] = composite(g.rewards[j], scoped.scaler, rw);
      }
    }
    annotate_advantages(scoped, ctx.eps_stab);

    SelectionStrategy st = strategy;
    if (st.kind == SelectionStrategy::Kind::Random) {
      st.seed = derive_seed(cell_seed, "select/random", {});
    }
    std::vector<TrainingPair> dataset =
        select(flatten_retained(scoped.groups, rule), st);

    CellContext cell_ctx = ctx;
    cell_ctx.pool = &scoped;
    cell_ctx.rule = rule;
    // Evaluation stays on the full composite so cells are comparable.
    cells.push_back(train_and_eval_cell(name, std::move(dataset),
                                        ctx.pool->weights, cell_ctx,
                                        ctx.train_cfg.total_steps, cell_seed));
  }
  return cells;
}

VanillaComparison vanilla_sft_baseline(const SelectionStrategy& strategy,
                                       const CellContext& ctx,
                                       std::uint64_t master) {
  check_held_out(ctx.eval_prompts, *ctx.pool);
  SelectionStrategy st = strategy;
  const std::uint64_t cell_seed = derive_seed(
      master, "ablate/cell",
      std::array<std::uint64_t, 2>{fnv1a64("vanilla"), fnv1a64(st.to_string())});
  if (st.kind == SelectionStrategy::Kind::Random) {
    st.seed = derive_seed(cell_seed, "select/random", {});
  }
  const std::vector<TrainingPair> dataset =
      select(flatten_retained(ctx.pool->groups, ctx.rule), st);
  if (dataset.empty()) throw DomainError("vanilla baseline: empty dataset");

  VanillaComparison out;
  out.dataset_size = dataset.size();

  TrainConfig weighted_cfg = ctx.train_cfg;
  weighted_cfg.vanilla_mode = false;
  TrainResult weighted =
      train(weighted_cfg, dataset, ctx.pool->prompts.originals, ctx.schedule,
            *ctx.base_model, ctx.rule, cell_seed);
  out.weighted = evaluate(weighted.model, ctx.schedule, ctx.eval_prompts,
                          ctx.reward_params, ctx.pool->scaler,
                          ctx.pool->weights, ctx.eval_draws_per_prompt,
                          cell_seed, 1, ctx.sampler_opts);

  TrainConfig vanilla_cfg = ctx.train_cfg;
  vanilla_cfg.vanilla_mode = true;
  TrainResult vanilla =
      train(vanilla_cfg, dataset, ctx.pool->prompts.originals, ctx.schedule,
            *ctx.base_model, ctx.rule, cell_seed);
  out.vanilla = evaluate(vanilla.model, ctx.schedule, ctx.eval_prompts,
                         ctx.reward_params, ctx.pool->scaler,
                         ctx.pool->weights, ctx.eval_draws_per_prompt,
                         cell_seed, 1, ctx.sampler_opts);
  return out;
}

}  // namespace craft
