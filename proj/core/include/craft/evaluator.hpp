#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "craft/curation.hpp"
#include "craft/model.hpp"
#include "craft/prompts.hpp"
#include "craft/rewards.hpp"
#include "craft/trainer.hpp"

namespace craft {

/// Draws one x0 for a prompt; returns nullopt when the sampler diverges.
using SampleFn = std::function<std::optional<std::vector<double>>(
    const Condition&, RngStream)>;

SampleFn model_sampler(const EpsMlp& m, const NoiseSchedule& s,
                       const SamplerOptions& opt = {});

struct EvalReport {
  std::array<double, 3> raw_mean{0.0, 0.0, 0.0};     // h, p, a
  std::array<double, 3> scaled_mean{0.0, 0.0, 0.0};  // via the shared scaler
  double composite_mean = 0.0;
  std::size_t sample_count = 0;
  std::size_t divergent_count = 0;
  std::uint64_t seed = 0;
  int prompts = 0;
  int draws_per_prompt = 0;
};

/// Samples K draws per held-out prompt, scores against the originals, and
/// aggregates. `role` separates the stream family per model under paired
/// evaluation (same role + same master = identical draws).
EvalReport evaluate(const SampleFn& sampler,
                    std::span<const Condition> prompts,
                    const RewardParams& rp, const RewardScaler& scaler,
                    const CompositeWeights& w, int draws_per_prompt,
                    std::uint64_t master, std::uint64_t role);
EvalReport evaluate(const EpsMlp& model, const NoiseSchedule& s,
                    std::span<const Condition> prompts,
                    const RewardParams& rp, const RewardScaler& scaler,
                    const CompositeWeights& w, int draws_per_prompt,
                    std::uint64_t master, std::uint64_t role,
                    const SamplerOptions& opt = {});

enum class WinMetric { H, P, A, Composite };

/// Paired win rate: one draw per prompt and side, strict improvement counts
/// 1, ties count 0.5, a divergent side loses (double divergence ties).
double win_rate(const SampleFn& model, const SampleFn& base,
                std::span<const Condition> prompts, WinMetric metric,
                const RewardParams& rp, const RewardScaler& scaler,
                const CompositeWeights& w, std::uint64_t master,
                std::uint64_t role_model = 1, std::uint64_t role_base = 0);

struct WinRateTable {
  double h = 0.0;
  double p = 0.0;
  double a = 0.0;
  double composite = 0.0;
  std::string tie_convention = "ties scored 0.5";
};

WinRateTable win_rates(const SampleFn& model, const SampleFn& base,
                       std::span<const Condition> prompts,
                       const RewardParams& rp, const RewardScaler& scaler,
                       const CompositeWeights& w, std::uint64_t master,
                       std::uint64_t role_model = 1,
                       std::uint64_t role_base = 0);

/// Everything the ablation grids need to retrain a cell from a shared pool.
struct CellContext {
  const Pool* pool = nullptr;
  std::span<const Condition> eval_prompts;
  NoiseSchedule schedule;
  RewardParams reward_params;
  TrainConfig train_cfg;
  EpsMlp const* base_model = nullptr;
  FilterRule rule = FilterRule::HPA;
  double eps_stab = 1e-8;
  int eval_draws_per_prompt = 2;
  SamplerOptions sampler_opts;
};

struct AblationCell {
  std::string name;
  int steps = 0;
  std::size_t data_size = 0;
  EvalReport report;
  bool empty_cell = false;
  std::string error;  // non-empty when the cell's training aborted
};

/// One trained model + report per selection strategy over the shared
/// filtered pool. Cell seeds are keyed by the strategy name, never by its
/// position in the list. `steps_override` pins per-cell budgets; otherwise
/// steps scale with sqrt(dataset size) relative to the first cell.
std::vector<AblationCell> ablate_selection(
    std::span<const SelectionStrategy> strategies, const CellContext& ctx,
    std::span<const int> steps_override, std::uint64_t master);

/// One cell per filter rule; the composite weights are restricted to the
/// rule's channels and renormalized before r_total and advantages are
/// recomputed.
std::vector<AblationCell> ablate_reward_combos(
    std::span<const FilterRule> rules, const SelectionStrategy& strategy,
    const CellContext& ctx, std::uint64_t master);

CompositeWeights restrict_weights(const CompositeWeights& w, FilterRule rule);

struct VanillaComparison {
  EvalReport weighted;  // advantage-weighted objective
  EvalReport vanilla;   // same dataset, unit weights
  std::size_t dataset_size = 0;
};

/// Trains twice on the identical selected dataset: advantage-weighted
/// versus unit weights.
VanillaComparison vanilla_sft_baseline(const SelectionStrategy& strategy,
                                       const CellContext& ctx,
                                       std::uint64_t master);

}  // namespace craft
