#include "craft/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "craft/errors.hpp"

namespace craft {

std::vector<double> group_advantage(std::span<const double> r_totals,
                                    double eps_stab) {
  if (r_totals.empty()) throw DomainError("group_advantage: empty group");
  if (!(eps_stab > 0.0)) throw DomainError("group_advantage: eps must be > 0");
  const double n = static_cast<double>(r_totals.size());
  double mean = 0.0;
  for (double r : r_totals) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : r_totals) {
    const double d = r - mean;
    var += d * d;
  }
  var /= n;
  const double denom = std::sqrt(var) + eps_stab;
  std::vector<double> adv(r_totals.size());
  for (std::size_t i = 0; i < r_totals.size(); ++i) {
    adv[i] = (r_totals[i] - mean) / denom;
  }
  return adv;
}

AdvantageTable AdvantageTable::from_pool(const Pool& pool, double eps_stab) {
  AdvantageTable table;
  table.epsilon_stab = eps_stab;
  for (const GenerationGroup& g : pool.groups) {
    if (g.advantage.empty()) {
      throw ContractError("AdvantageTable: pool not annotated");
    }
    for (int j = 1; j <= g.refined_count(); ++j) {
      table.values[{g.prompt_id, static_cast<std::uint32_t>(j)}] =
          g.advantage[static_cast<std::size_t>(j - 1)];
    }
  }
  return table;
}

std::optional<double> AdvantageTable::lookup(std::uint32_t id,
                                             std::uint32_t variant) const {
  auto it = values.find({id, variant});
  if (it == values.end()) return std::nullopt;
  return it->second;
}

double AdvantageTable::max_group_residual(const Pool& pool) const {
  double worst = 0.0;
  for (const GenerationGroup& g : pool.groups) {
    double sum = 0.0;
    for (int j = 1; j <= g.refined_count(); ++j) {
      auto v = lookup(g.prompt_id, static_cast<std::uint32_t>(j));
      if (!v) throw ContractError("max_group_residual: missing advantage");
      sum += *v;
    }
    worst = std::max(worst, std::abs(sum));
  }
  return worst;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("training.learning_rate > 0");
  if (batch_size < 1) throw DomainError("training.batch_size >= 1");
  if (grad_accumulation < 1) throw DomainError("training.grad_accumulation >= 1");
  if (total_steps < 0) throw DomainError("training.total_steps >= 0");
  if (checkpoint_every < 1) throw DomainError("training.checkpoint_every >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("training betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw DomainError("training.adam_eps > 0");
  if (weight_decay < 0.0) throw DomainError("training.weight_decay >= 0");
}

void adamw_step(OptimizerState& state, std::span<double> params,
                std::span<const double> grad, const TrainConfig& cfg) {
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || grad.size() != params.size()) {
    throw ContractError("adamw_step: shape mismatch");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("adamw_step: non-finite gradient at index " +
                         std::to_string(i));
    }
  }
  state.step += 1;
  const double bc1 =
      1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    params[i] -= cfg.learning_rate * cfg.weight_decay * params[i];
  }
}

LossGrad weighted_sft_loss(const EpsMlp& m,
                           std::span<const AnnotatedSample> batch,
                           FilterRule rule, const NoiseSchedule& s,
                           bool vanilla) {
  std::vector<BatchItem> items;
  items.reserve(batch.size());
  for (const AnnotatedSample& a : batch) {
    if (!vanilla && !a.advantage.has_value()) {
      throw ContractError("weighted_sft_loss: sample (" +
                          std::to_string(a.prompt_id) + ", " +
                          std::to_string(a.variant) +
                          ") has no advantage annotation");
    }
    const bool in_set = (a.retained_mask >> static_cast<int>(rule)) & 1;
    const double adv = vanilla ? 1.0 : *a.advantage;
    BatchItem it;
    it.x0 = a.x0;
    it.cond = a.original_cond;
    it.weight = in_set ? adv : 0.0;
    it.draw_seed = a.draw_seed;
    items.push_back(it);
  }
  return loss_and_grad(m, items, s);
}

TrainResult train(const TrainConfig& cfg,
                  std::span<const TrainingPair> dataset,
                  std::span<const Condition> originals,
                  const NoiseSchedule& s, EpsMlp init, FilterRule rule,
                  std::uint64_t master, const CheckpointSink& sink) {
  cfg.validate();
  if (dataset.empty()) throw DomainError("train: empty dataset");

  std::unordered_map<std::uint32_t, const Condition*> cond_by_id;
  for (const Condition& c : originals) {
    if (c.variant != 0) {
      throw ContractError("train: conditioning set must hold originals");
    }
    cond_by_id.emplace(c.id, &c);
  }

  // Canonical order: results do not depend on how the dataset was stored.
  std::vector<const TrainingPair*> data;
  data.reserve(dataset.size());
  for (const TrainingPair& tp : dataset) data.push_back(&tp);
  std::sort(data.begin(), data.end(),
            [](const TrainingPair* a, const TrainingPair* b) {
              return std::make_pair(a->prompt_id, a->variant) <
                     std::make_pair(b->prompt_id, b->variant);
            });
  for (const TrainingPair* tp : data) {
    if (!cond_by_id.count(tp->prompt_id)) {
      throw ContractError("train: no original condition for prompt id " +
                          std::to_string(tp->prompt_id));
    }
  }

  TrainResult res{std::move(init), OptimizerState{}, {}};
  std::vector<std::uint64_t> visits(data.size(), 0);
  std::vector<double> grad_sum(res.model.arch().param_count());
  std::vector<std::size_t> order(data.size());

  const std::size_t b =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                            data.size());

  for (int step = 1; step <= cfg.total_steps; ++step) {
    std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
    double loss_acc = 0.0;
    for (int micro = 0; micro < cfg.grad_accumulation; ++micro) {
      RngStream pick =
          derive_stream(master, "train/batch",
                        {static_cast<std::uint64_t>(step),
                         static_cast<std::uint64_t>(micro)});
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(pick.uniform_int(
                    0, static_cast<std::int64_t>(order.size() - 1 - i)));
        std::swap(order[i], order[j]);
      }

      std::vector<AnnotatedSample> batch(b);
      for (std::size_t i = 0; i < b; ++i) {
        const TrainingPair& tp = *data[order[i]];
        visits[order[i]] += 1;
        AnnotatedSample& a = batch[i];
        a.prompt_id = tp.prompt_id;
        a.variant = tp.variant;
        a.x0 = tp.x0;
        a.original_cond = cond_by_id.at(tp.prompt_id)->embedding;
        a.advantage = tp.advantage;
        a.retained_mask = tp.retained_mask;
        a.draw_seed = derive_seed(
            master, "train/draw",
            std::array<std::uint64_t, 3>{tp.prompt_id, tp.variant,
                                         visits[order[i]]});
      }
      LossGrad lg;
      try {
        lg = weighted_sft_loss(res.model, batch, rule, s, cfg.vanilla_mode);
      } catch (const NumericError&) {
        if (sink) sink(step - 1, res.model, res.opt);
        throw;
      }
      loss_acc += lg.loss;
      for (std::size_t i = 0; i < grad_sum.size(); ++i) {
        grad_sum[i] += lg.grad[i];
      }
    }
    const double inv_acc = 1.0 / static_cast<double>(cfg.grad_accumulation);
    double gn = 0.0;
    for (std::size_t i = 0; i < grad_sum.size(); ++i) {
      grad_sum[i] *= inv_acc;
      gn += grad_sum[i] * grad_sum[i];
    }
    try {
      adamw_step(res.opt, res.model.params(), grad_sum, cfg);
    } catch (const NumericError&) {
      if (sink) sink(step - 1, res.model, res.opt);
      throw;
    }
    res.log.push_back(TrainLogRecord{step, loss_acc * inv_acc, std::sqrt(gn),
                                     cfg.learning_rate});
    if (sink && (step % cfg.checkpoint_every == 0)) {
      sink(step, res.model, res.opt);
    }
  }
  if (sink && (cfg.total_steps % cfg.checkpoint_every != 0)) {
    sink(cfg.total_steps, res.model, res.opt);
  }
  return res;
}

}  // namespace craft
