#include "craft/curation.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "craft/errors.hpp"
#include "craft/trainer.hpp"

namespace craft {

namespace {

constexpr std::array<RewardChannel, 1> kH = {RewardChannel::H};
constexpr std::array<RewardChannel, 1> kP = {RewardChannel::P};
constexpr std::array<RewardChannel, 1> kA = {RewardChannel::A};
constexpr std::array<RewardChannel, 2> kHA = {RewardChannel::H,
                                              RewardChannel::A};
constexpr std::array<RewardChannel, 2> kPA = {RewardChannel::P,
                                              RewardChannel::A};
constexpr std::array<RewardChannel, 3> kHPA = {
    RewardChannel::H, RewardChannel::P, RewardChannel::A};

}  // namespace

std::span<const RewardChannel> rule_channels(FilterRule rule) {
  switch (rule) {
    case FilterRule::H: return kH;
    case FilterRule::P: return kP;
    case FilterRule::A: return kA;
    case FilterRule::HA: return kHA;
    case FilterRule::PA: return kPA;
    case FilterRule::HPA: return kHPA;
  }
  throw ContractError("rule_channels: bad rule");
}

std::string_view rule_name(FilterRule rule) {
  switch (rule) {
    case FilterRule::H: return "h";
    case FilterRule::P: return "p";
    case FilterRule::A: return "a";
    case FilterRule::HA: return "ha";
    case FilterRule::PA: return "pa";
    case FilterRule::HPA: return "hpa";
  }
  throw ContractError("rule_name: bad rule");
}

std::optional<FilterRule> parse_rule(std::string_view name) {
  for (int r = 0; r < kFilterRuleCount; ++r) {
    if (name == rule_name(static_cast<FilterRule>(r))) {
      return static_cast<FilterRule>(r);
    }
  }
  return std::nullopt;
}

Pool generate_and_score(const PromptSet& ps, const EpsMlp& model,
                        const NoiseSchedule& s, const RewardParams& rp,
                        const CompositeWeights& w, std::uint64_t master,
                        const SamplerOptions& opt) {
  if (ps.refined.size() != ps.originals.size()) {
    throw ContractError("generate_and_score: prompts not refined yet");
  }
  w.validate();

  Pool pool;
  pool.prompts = ps;
  pool.weights = w;

  const int N = ps.refinements_per_prompt();
  for (std::size_t p = 0; p < ps.originals.size(); ++p) {
    const Condition& orig = ps.originals[p];
    GenerationGroup g;
    g.prompt_id = orig.id;
    bool diverged = false;
    for (int j = 0; j <= N; ++j) {
      const Condition& cond =
          (j == 0) ? orig : ps.refined[p][static_cast<std::size_t>(j - 1)];
      RngStream rng = derive_stream(master, "curation/generate",
                                    {orig.id, static_cast<std::uint64_t>(j)});
      Sample smp;
      smp.prompt_id = orig.id;
      smp.variant = static_cast<std::uint32_t>(j);
      smp.seed = rng.seed();
      try {
        smp.x0 = sample_x0(model, cond.embedding, s, rng, opt);
      } catch (const NumericError&) {
        diverged = true;
        break;
      }
      g.rewards.push_back(score_all(smp.x0, orig, rp));
      g.samples.push_back(std::move(smp));
    }
    if (diverged) {
      pool.audit.divergent_prompt_ids.push_back(orig.id);
      continue;
    }
    pool.groups.push_back(std::move(g));
  }

  // Scale map fitted on the full pre-filter pool, originals included.
  std::vector<RewardVector> flat;
  for (const GenerationGroup& g : pool.groups) {
    flat.insert(flat.end(), g.rewards.begin(), g.rewards.end());
  }
  if (flat.empty()) {
    throw NumericError("generate_and_score: every group diverged");
  }
  pool.scaler = fit_scaler(flat);

  for (GenerationGroup& g : pool.groups) {
    g.r_total.resize(g.rewards.size());
    for (std::size_t j = 0; j < g.rewards.size(); ++j) {
      g.r_total[j] = composite(g.rewards[j], pool.scaler, w);
    }
    g.retained_mask = 0;
    for (int r = 0; r < kFilterRuleCount; ++r) {
      if (group_passes(g, static_cast<FilterRule>(r))) {
        g.retained_mask |= static_cast<std::uint8_t>(1u << r);
      }
    }
  }
  return pool;
}

bool group_passes(const GenerationGroup& g, FilterRule rule) {
  const std::span<const RewardChannel> channels = rule_channels(rule);
  const int N = g.refined_count();
  for (int j = 1; j <= N; ++j) {
    bool beats_all = true;
    for (RewardChannel ch : channels) {
      if (!(g.rewards[static_cast<std::size_t>(j)].get(ch) >
            g.rewards[0].get(ch))) {
        beats_all = false;
        break;
      }
    }
    if (beats_all) return true;
  }
  return false;
}

std::vector<const GenerationGroup*> apply_filter(
    std::span<const GenerationGroup> groups, FilterRule rule) {
  std::vector<const GenerationGroup*> kept;
  for (const GenerationGroup& g : groups) {
    if (group_passes(g, rule)) kept.push_back(&g);
  }
  return kept;
}

void annotate_advantages(Pool& pool, double eps_stab) {
  for (GenerationGroup& g : pool.groups) {
    if (g.r_total.size() != g.samples.size()) {
      throw ContractError("annotate_advantages: r_total not filled");
    }
    const std::span<const double> refined(g.r_total.data() + 1,
                                          g.r_total.size() - 1);
    g.advantage = group_advantage(refined, eps_stab);
  }
}

std::vector<TrainingPair> flatten_retained(
    std::span<const GenerationGroup> groups, FilterRule rule) {
  std::vector<TrainingPair> out;
  for (const GenerationGroup& g : groups) {
    if (!g.retained_under(rule)) continue;
    for (int j = 1; j <= g.refined_count(); ++j) {
      const std::size_t sj = static_cast<std::size_t>(j);
      TrainingPair tp;
      tp.prompt_id = g.prompt_id;
      tp.variant = static_cast<std::uint32_t>(j);
      tp.gen_seed = g.samples[sj].seed;
      tp.x0 = g.samples[sj].x0;
      tp.r_total = g.r_total[sj];
      if (!g.advantage.empty()) tp.advantage = g.advantage[sj - 1];
      tp.retained_mask = g.retained_mask;
      out.push_back(std::move(tp));
    }
  }
  return out;
}

std::optional<SelectionStrategy> SelectionStrategy::parse(
    std::string_view text) {
  SelectionStrategy st;
  if (text == "all") {
    st.kind = Kind::All;
    return st;
  }
  const std::size_t colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const std::string_view head = text.substr(0, colon);
  const std::string_view tail = text.substr(colon + 1);
  if (head == "top") {
    st.kind = Kind::Top;
  } else if (head == "random") {
    st.kind = Kind::Random;
  } else if (head == "low") {
    st.kind = Kind::Low;
  } else {
    return std::nullopt;
  }
  try {
    std::size_t used = 0;
    const unsigned long long k = std::stoull(std::string(tail), &used);
    if (used != tail.size() || k == 0) return std::nullopt;
    st.k = static_cast<std::size_t>(k);
  } catch (...) {
    return std::nullopt;
  }
  return st;
}

std::string SelectionStrategy::to_string() const {
  switch (kind) {
    case Kind::All: return "all";
    case Kind::Top: return "top:" + std::to_string(k);
    case Kind::Random: return "random:" + std::to_string(k);
    case Kind::Low: return "low:" + std::to_string(k);
  }
  throw ContractError("SelectionStrategy::to_string: bad kind");
}

std::vector<TrainingPair> select(std::vector<TrainingPair> pool,
                                 const SelectionStrategy& strategy,
                                 CurationAudit* audit) {
  using Kind = SelectionStrategy::Kind;
  if (strategy.kind == Kind::All) return pool;

  std::size_t k = strategy.k;
  if (k > pool.size()) {
    if (audit) {
      audit->warnings.push_back(
          "selection k=" + std::to_string(k) + " exceeds pool size " +
          std::to_string(pool.size()) + "; taking the whole pool");
    }
    k = pool.size();
  }

  auto id_lt = [](const TrainingPair& a, const TrainingPair& b) {
    return std::make_pair(a.prompt_id, a.variant) <
           std::make_pair(b.prompt_id, b.variant);
  };

  switch (strategy.kind) {
    case Kind::Top:
      std::sort(pool.begin(), pool.end(),
                [&](const TrainingPair& a, const TrainingPair& b) {
                  if (a.r_total != b.r_total) return a.r_total > b.r_total;
                  return id_lt(a, b);
                });
      pool.resize(k);
      return pool;
    case Kind::Low:
      std::sort(pool.begin(), pool.end(),
                [&](const TrainingPair& a, const TrainingPair& b) {
                  if (a.r_total != b.r_total) return a.r_total < b.r_total;
                  return id_lt(a, b);
                });
      pool.resize(k);
      return pool;
    case Kind::Random: {
      RngStream rng(strategy.seed);
      // partial Fisher-Yates over the first k slots
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(
                                      0, static_cast<std::int64_t>(
                                             pool.size() - 1 - i)));
        std::swap(pool[i], pool[j]);
      }
      pool.resize(k);
      return pool;
    }
    case Kind::All: break;
  }
  return pool;
}

void renormalize_advantages(std::vector<TrainingPair>& selected,
                            double eps_stab) {
  if (selected.empty()) return;
  std::vector<double> r;
  r.reserve(selected.size());
  for (const TrainingPair& tp : selected) r.push_back(tp.r_total);
  const std::vector<double> adv = group_advantage(r, eps_stab);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    selected[i].advantage = adv[i];
  }
}

}  // namespace craft
