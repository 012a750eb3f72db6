#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "craft/curation.hpp"
#include "craft/model.hpp"
#include "craft/prompts.hpp"
#include "craft/rewards.hpp"
#include "craft/sampler.hpp"
#include "craft/schedule.hpp"
#include "craft/trainer.hpp"

namespace craft {

struct DiffusionConfig {
  int data_dim = 2;
  int timesteps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int hidden1 = 32;
  int hidden2 = 32;
  int time_dim = 8;
  int cond_dim = 4;
  double sample_bound = 1e6;
};

struct RewardConfig {
  std::vector<std::vector<double>> mu = {
      {1.5, 0.0}, {-0.75, 1.3}, {-0.75, -1.3}};
  double lambda = 1.0;
  double noise_amp = 0.5;
  double alpha_h = 0.4;
  double alpha_p = 0.4;
  double alpha_a = 0.2;
  double id_jitter = 0.05;
};

struct CurationConfig {
  int n_prompts = 200;
  int refinements = 4;  // N
  double radius = 0.25;
  std::string provider = "perturb";  // or "file"
  std::string requests_path = "refine_requests.jsonl";
  std::string responses_path = "refine_responses.jsonl";
  FilterRule rule = FilterRule::HPA;
  SelectionStrategy strategy{SelectionStrategy::Kind::Top, 50, 0};
  bool renormalize_after_selection = false;
  double eps_stab = 1e-8;
};

struct VerificationConfig {
  int draws = 1000;  // K
  double eta_max = 1e-1;
  double eta_min = 1e-4;
  int eta_points = 13;
  int groups = 8;
  int group_size = 4;
};

struct EvaluationConfig {
  int prompts = 200;  // held-out prompt count
  int draws_per_prompt = 2;
  int seeds = 5;
  std::string ablate_strategies = "top:50,random:150,low:150,all";
  std::string ablate_steps;  // comma list; empty = sqrt(data size) rule
  std::string ablate_rules = "h,p,ha,hpa";
};

/// The whole run configuration. Parsed from an INI-style file with
/// [sections]; unknown sections or keys are rejected with a field path,
/// and serialization is canonical so the 64-bit config hash is stable.
struct RunConfig {
  DiffusionConfig diffusion;
  RewardConfig rewards;
  CurationConfig curation;
  TrainConfig training;
  VerificationConfig verification;
  EvaluationConfig evaluation;
  std::uint64_t seed = 42;

  void validate() const;
  std::string serialize() const;
  std::uint64_t config_hash() const;

  static RunConfig parse_string(std::string_view text);
  static RunConfig parse_file(const std::filesystem::path& path);

  // derived pieces
  NoiseSchedule make_schedule() const;
  MlpArch make_arch() const;
  RewardParams reward_params() const;
  CompositeWeights composite_weights() const;
  PromptModelOptions prompt_options() const;
  SamplerOptions sampler_options() const;

  bool operator==(const RunConfig& other) const {
    return serialize() == other.serialize();
  }
};

std::string config_hash_hex(std::uint64_t hash);

}  // namespace craft
