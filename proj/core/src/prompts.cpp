#include "craft/prompts.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "craft/errors.hpp"

namespace craft {

namespace {

// Fixed derivation key for prompt embeddings; documented in docs/FORMATS.md.
const std::uint64_t kPromptKey = fnv1a64("craft-prompt-embedding-v1");

std::vector<double> unit_gaussian(RngStream rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  do {
    rng.fill_normal(v);
    norm = 0.0;
    for (double x : v) norm += x * x;
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

const Condition& PromptSet::original(std::uint32_t id) const {
  for (const Condition& c : originals) {
    if (c.id == id) return c;
  }
  throw ContractError("PromptSet: unknown prompt id " + std::to_string(id));
}

Condition make_condition(std::uint32_t id, const PromptModelOptions& opt) {
  if (opt.cond_dim < 1 || opt.class_count < 1) {
    throw DomainError("prompt model: cond_dim and class_count must be >= 1");
  }
  const std::uint32_t cls = id % static_cast<std::uint32_t>(opt.class_count);
  std::vector<double> emb =
      unit_gaussian(derive_stream(kPromptKey, "prompt/class-embed", {cls}),
                    opt.cond_dim);
  if (opt.id_jitter > 0.0) {
    const std::vector<double> j =
        unit_gaussian(derive_stream(kPromptKey, "prompt/id-jitter", {id}),
                      opt.cond_dim);
    for (int k = 0; k < opt.cond_dim; ++k) {
      emb[static_cast<std::size_t>(k)] +=
          opt.id_jitter * j[static_cast<std::size_t>(k)];
    }
  }
  return Condition{id, 0, std::move(emb)};
}

std::vector<Condition> make_conditions(std::uint32_t first_id,
                                       std::uint32_t count,
                                       const PromptModelOptions& opt) {
  std::vector<Condition> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    out.push_back(make_condition(first_id + i, opt));
  }
  return out;
}

void PerturbProvider::refine(PromptSet& ps, int variants_per_prompt,
                             double radius) {
  ps.refined.assign(ps.originals.size(), {});
  for (std::size_t p = 0; p < ps.originals.size(); ++p) {
    const Condition& orig = ps.originals[p];
    auto& row = ps.refined[p];
    row.reserve(static_cast<std::size_t>(variants_per_prompt));
    for (int j = 1; j <= variants_per_prompt; ++j) {
      RngStream rng = derive_stream(master_, "refine/perturb",
                                    {orig.id, static_cast<std::uint64_t>(j)});
      std::vector<double> dir =
          unit_gaussian(rng, static_cast<int>(orig.embedding.size()));
      const double mag = radius * rng.uniform01();
      Condition c;
      c.id = orig.id;
      c.variant = static_cast<std::uint32_t>(j);
      c.embedding = orig.embedding;
      for (std::size_t k = 0; k < c.embedding.size(); ++k) {
        c.embedding[k] += mag * dir[k];
      }
      row.push_back(std::move(c));
    }
  }
}

void FileExchangeProvider::refine(PromptSet& ps, int variants_per_prompt,
                                  double radius) {
  using nlohmann::json;
  {
    std::ofstream out(requests_, std::ios::trunc);
    if (!out) {
      throw FormatError("file provider: cannot write " + requests_.string());
    }
    for (const Condition& orig : ps.originals) {
      for (int j = 1; j <= variants_per_prompt; ++j) {
        json rec;
        rec["prompt_id"] = orig.id;
        rec["variant"] = j;
        rec["radius"] = radius;
        rec["embedding"] = orig.embedding;
        out << rec.dump() << "\n";
      }
    }
  }

  std::ifstream in(responses_);
  if (!in) {
    throw FormatError("file provider: response file " + responses_.string() +
                      " not found; produce it from " + requests_.string());
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<double>> resp;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw FormatError("file provider: malformed response line");
    }
    const std::uint32_t id = rec.at("prompt_id").get<std::uint32_t>();
    const std::uint32_t variant = rec.at("variant").get<std::uint32_t>();
    auto [it, fresh] =
        resp.emplace(std::make_pair(id, variant),
                     rec.at("embedding").get<std::vector<double>>());
    (void)it;
    if (!fresh) {
      throw FormatError("file provider: duplicate response for prompt " +
                        std::to_string(id) + " variant " +
                        std::to_string(variant));
    }
  }

  const std::size_t expected =
      ps.originals.size() * static_cast<std::size_t>(variants_per_prompt);
  if (resp.size() != expected) {
    throw FormatError("file provider: expected " + std::to_string(expected) +
                      " responses, got " + std::to_string(resp.size()));
  }

  ps.refined.assign(ps.originals.size(), {});
  for (std::size_t p = 0; p < ps.originals.size(); ++p) {
    const Condition& orig = ps.originals[p];
    auto& row = ps.refined[p];
    for (int j = 1; j <= variants_per_prompt; ++j) {
      auto it = resp.find({orig.id, static_cast<std::uint32_t>(j)});
      if (it == resp.end()) {
        throw FormatError("file provider: missing response for prompt " +
                          std::to_string(orig.id) + " variant " +
                          std::to_string(j));
      }
      if (it->second.size() != orig.embedding.size()) {
        throw FormatError("file provider: embedding size mismatch for prompt " +
                          std::to_string(orig.id));
      }
      double dist2 = 0.0;
      for (std::size_t k = 0; k < orig.embedding.size(); ++k) {
        const double dlt = it->second[k] - orig.embedding[k];
        dist2 += dlt * dlt;
      }
      if (std::sqrt(dist2) > radius + 1e-9) {
        throw FormatError("file provider: refinement outside radius for "
                          "prompt " +
                          std::to_string(orig.id) + " variant " +
                          std::to_string(j));
      }
      Condition c;
      c.id = orig.id;
      c.variant = static_cast<std::uint32_t>(j);
      c.embedding = it->second;
      row.push_back(std::move(c));
    }
  }
}

void refine_prompts(PromptSet& ps, RefinementProvider& provider,
                    int variants_per_prompt, double radius) {
  if (variants_per_prompt < 1) {
    throw DomainError("refine_prompts: need at least one variant per prompt");
  }
  if (radius < 0.0) throw DomainError("refine_prompts: negative radius");
  provider.refine(ps, variants_per_prompt, radius);
  if (ps.refined.size() != ps.originals.size()) {
    throw ContractError("refinement provider returned a ragged prompt set");
  }
  for (std::size_t p = 0; p < ps.originals.size(); ++p) {
    if (static_cast<int>(ps.refined[p].size()) != variants_per_prompt) {
      throw ContractError("refinement provider failed for prompt id " +
                          std::to_string(ps.originals[p].id));
    }
  }
}

}  // namespace craft
