#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "craft/rng.hpp"

namespace craft {

/// A prompt instance: id, variant (0 = original, 1..N = refined) and its
/// conditioning embedding. Variant-0 embeddings are canonical per id.
struct Condition {
  std::uint32_t id = 0;
  std::uint32_t variant = 0;
  std::vector<double> embedding;
};

/// Originals plus their refined variants.
struct PromptSet {
  std::vector<Condition> originals;             // variant 0, unique ids
  std::vector<std::vector<Condition>> refined;  // [prompt][variant-1]

  int refinements_per_prompt() const {
    return refined.empty() ? 0 : static_cast<int>(refined[0].size());
  }
  const Condition& original(std::uint32_t id) const;
};

struct PromptModelOptions {
  int cond_dim = 4;
  int class_count = 3;
  double id_jitter = 0.05;  // per-id offset away from the class embedding
};

/// Deterministic toy prompt embedding: a unit class vector plus a small
/// per-id offset. Independent of the run's master seed so datasets built
/// under different seeds describe the same prompts.
Condition make_condition(std::uint32_t id, const PromptModelOptions& opt);

/// Conditions for ids [first_id, first_id + count).
std::vector<Condition> make_conditions(std::uint32_t first_id,
                                       std::uint32_t count,
                                       const PromptModelOptions& opt);

/// Produces the refined variants of each original. Implementations must be
/// deterministic given (prompt id, variant index, seed) and keep every
/// refined embedding within `radius` of the original.
class RefinementProvider {
 public:
  virtual ~RefinementProvider() = default;
  virtual void refine(PromptSet& ps, int variants_per_prompt,
                      double radius) = 0;
};

/// Structured perturbation of the original embedding; fully offline.
class PerturbProvider final : public RefinementProvider {
 public:
  explicit PerturbProvider(std::uint64_t master) : master_(master) {}
  void refine(PromptSet& ps, int variants_per_prompt, double radius) override;

 private:
  std::uint64_t master_;
};

/// Line-delimited file exchange with an external refinement process:
/// writes one request record per (prompt, variant) and reads the response
/// file back, enforcing a one-to-one id match and the radius bound.
class FileExchangeProvider final : public RefinementProvider {
 public:
  FileExchangeProvider(std::filesystem::path requests,
                       std::filesystem::path responses)
      : requests_(std::move(requests)), responses_(std::move(responses)) {}
  void refine(PromptSet& ps, int variants_per_prompt, double radius) override;

 private:
  std::filesystem::path requests_;
  std::filesystem::path responses_;
};

/// Populates ps.refined via the provider and validates the outcome.
void refine_prompts(PromptSet& ps, RefinementProvider& provider,
                    int variants_per_prompt, double radius);

}  // namespace craft
