#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "craft/model.hpp"
#include "craft/prompts.hpp"
#include "craft/rewards.hpp"
#include "craft/sampler.hpp"

namespace craft {

/// A generated datum plus the stream seed that reproduces it bit-for-bit.
struct Sample {
  std::vector<double> x0;
  std::uint64_t seed = 0;
  std::uint32_t prompt_id = 0;
  std::uint32_t variant = 0;
};

enum class FilterRule { H, P, A, HA, PA, HPA };

inline constexpr int kFilterRuleCount = 6;

std::span<const RewardChannel> rule_channels(FilterRule rule);
std::string_view rule_name(FilterRule rule);
std::optional<FilterRule> parse_rule(std::string_view name);

/// One prompt's generation group: the original sample (j = 0), its N refined
/// samples, and all scores. Every reward is computed against the original
/// prompt. `retained_mask` carries one bit per FilterRule (bit = enum value);
/// `advantage[j-1]` is the group-normalized advantage of refined sample j.
struct GenerationGroup {
  std::uint32_t prompt_id = 0;
  std::vector<Sample> samples;        // index j = 0..N
  std::vector<RewardVector> rewards;  // parallel to samples
  std::vector<double> r_total;        // parallel to samples
  std::vector<double> advantage;      // size N
  std::uint8_t retained_mask = 0;

  int refined_count() const { return static_cast<int>(samples.size()) - 1; }
  bool retained_under(FilterRule rule) const {
    return (retained_mask >> static_cast<int>(rule)) & 1;
  }
};

struct CurationAudit {
  std::vector<std::uint32_t> divergent_prompt_ids;  // excluded groups
  std::vector<std::string> warnings;
};

struct Pool {
  PromptSet prompts;
  std::vector<GenerationGroup> groups;
  RewardScaler scaler;
  CompositeWeights weights;
  CurationAudit audit;
};

/// Samples one x0 per (prompt, variant), scores every sample against the
/// original prompt, fits the scale map on the full pre-filter pool, fills
/// r_total, and stamps the retained-rule mask. Groups whose sampler diverges
/// are excluded and recorded in the audit.
Pool generate_and_score(const PromptSet& ps, const EpsMlp& model,
                        const NoiseSchedule& s, const RewardParams& rp,
                        const CompositeWeights& w, std::uint64_t master,
                        const SamplerOptions& opt = {});

/// True when some refined sample beats the original on every channel of the
/// rule simultaneously.
bool group_passes(const GenerationGroup& g, FilterRule rule);

/// Group-level retention per the composite filtering rules.
std::vector<const GenerationGroup*> apply_filter(
    std::span<const GenerationGroup> groups, FilterRule rule);

/// Group-normalized advantages for every group (refined members only);
/// requires r_total to be filled.
void annotate_advantages(Pool& pool, double eps_stab);

/// A flattened training candidate. Originals (variant 0) never appear.
struct TrainingPair {
  std::uint32_t prompt_id = 0;
  std::uint32_t variant = 0;
  std::uint64_t gen_seed = 0;
  std::vector<double> x0;
  double r_total = 0.0;
  std::optional<double> advantage;
  std::uint8_t retained_mask = 0;
};

/// Refined samples of the groups retained under `rule`, in group order.
std::vector<TrainingPair> flatten_retained(std::span<const GenerationGroup>,
                                           FilterRule rule);

struct SelectionStrategy {
  enum class Kind { Top, Random, Low, All };
  Kind kind = Kind::Top;
  std::size_t k = 0;
  std::uint64_t seed = 0;  // Random only

  static std::optional<SelectionStrategy> parse(std::string_view text);
  std::string to_string() const;
};

/// Final training-set selection. Top/Low order by r_total with ties broken
/// by (prompt id, variant) ascending; Random draws uniformly without
/// replacement; k larger than the pool keeps the whole pool and records a
/// warning.
std::vector<TrainingPair> select(std::vector<TrainingPair> pool,
                                 const SelectionStrategy& strategy,
                                 CurationAudit* audit = nullptr);

/// Optional re-normalization of advantages within the selected set.
void renormalize_advantages(std::vector<TrainingPair>& selected,
                            double eps_stab);

}  // namespace craft
