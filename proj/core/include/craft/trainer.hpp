#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "craft/curation.hpp"
#include "craft/model.hpp"
#include "craft/prompts.hpp"

namespace craft {

/// Group-normalized advantages: (r - mean) / (std + eps) with population
/// std over the refined members only. Zero-sum per group by construction.
std::vector<double> group_advantage(std::span<const double> r_totals,
                                    double eps_stab);

/// Advantages keyed by (prompt id, variant); the trainer treats a missing
/// entry as a contract violation.
struct AdvantageTable {
  double epsilon_stab = 1e-8;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> values;

  static AdvantageTable from_pool(const Pool& pool, double eps_stab);
  std::optional<double> lookup(std::uint32_t id, std::uint32_t variant) const;
  /// Max over groups of |sum of advantages|, refined members only.
  double max_group_residual(const Pool& pool) const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 16;
  int grad_accumulation = 1;
  int total_steps = 300;
  int checkpoint_every = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  bool vanilla_mode = false;  // force unit advantages (plain SFT baseline)

  void validate() const;
};

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// Decoupled-weight-decay Adam update with bias correction, in place.
void adamw_step(OptimizerState& state, std::span<double> params,
                std::span<const double> grad, const TrainConfig& cfg);

/// One annotated training sample; conditioning always uses the ORIGINAL
/// prompt embedding c_i^(0).
struct AnnotatedSample {
  std::uint32_t prompt_id = 0;
  std::uint32_t variant = 0;
  std::span<const double> x0;
  std::span<const double> original_cond;
  std::optional<double> advantage;
  std::uint8_t retained_mask = 0;
  std::uint64_t draw_seed = 0;
};

/// Advantage-weighted denoising loss with the filter-rule indicator:
/// per-sample weight = advantage * [retained under rule]; with
/// `vanilla` the advantage is replaced by 1. The timestep weight w(t) is
/// intentionally absent.
LossGrad weighted_sft_loss(const EpsMlp& m,
                           std::span<const AnnotatedSample> batch,
                           FilterRule rule, const NoiseSchedule& s,
                           bool vanilla = false);

struct TrainLogRecord {
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  EpsMlp model;
  OptimizerState opt;
  std::vector<TrainLogRecord> log;
};

using CheckpointSink =
    std::function<void(int step, const EpsMlp&, const OptimizerState&)>;

/// Fixed-step minibatch loop with gradient accumulation in deterministic
/// order. The dataset is canonicalized by (prompt id, variant) first, so the
/// result is independent of input ordering. On a numeric abort the last
/// finished state is flushed to the sink before the error propagates.
TrainResult train(const TrainConfig& cfg,
                  std::span<const TrainingPair> dataset,
                  std::span<const Condition> originals,
                  const NoiseSchedule& s, EpsMlp init, FilterRule rule,
                  std::uint64_t master, const CheckpointSink& sink = {});

}  // namespace craft
