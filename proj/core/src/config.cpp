#include "craft/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "craft/errors.hpp"
#include "craft/rng.hpp"

namespace craft {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double parse_double(const std::string& path, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw DomainError(path + ": cannot parse real value '" + v + "'");
  }
}

int parse_int(const std::string& path, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return static_cast<int>(i);
  } catch (...) {
    throw DomainError(path + ": cannot parse integer '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& path, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long i = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return static_cast<std::uint64_t>(i);
  } catch (...) {
    throw DomainError(path + ": cannot parse unsigned value '" + v + "'");
  }
}

bool parse_bool(const std::string& path, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw DomainError(path + ": cannot parse boolean '" + v + "'");
}

// mu rows: "x y; x y; ..." -> vector of row vectors
std::vector<std::vector<double>> parse_mu(const std::string& path,
                                          const std::string& v) {
  std::vector<std::vector<double>> rows;
  std::stringstream row_stream(v);
  std::string row;
  while (std::getline(row_stream, row, ';')) {
    const std::string trimmed = trim(row);
    if (trimmed.empty()) continue;
    std::vector<double> vals;
    std::stringstream vs(trimmed);
    std::string tok;
    while (vs >> tok) vals.push_back(parse_double(path, tok));
    if (vals.empty()) throw DomainError(path + ": empty mu row");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw DomainError(path + ": empty mu table");
  return rows;
}

std::string mu_to_string(const std::vector<std::vector<double>>& mu) {
  std::string out;
  for (std::size_t r = 0; r < mu.size(); ++r) {
    if (r) out += "; ";
    for (std::size_t c = 0; c < mu[r].size(); ++c) {
      if (c) out += ' ';
      out += fmt_double(mu[r][c]);
    }
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& path,
                                  const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s = [] {
    std::map<std::string, std::map<std::string, Setter>> m;
    auto& diff = m["diffusion"];
    diff["d"] = [](RunConfig& c, const std::string& p, const std::string& v) {
      c.diffusion.data_dim = parse_int(p, v);
    };
    diff["timesteps"] = [](RunConfig& c, const std::string& p,
                           const std::string& v) {
      c.diffusion.timesteps = parse_int(p, v);
    };
    diff["beta_start"] = [](RunConfig& c, const std::string& p,
                            const std::string& v) {
      c.diffusion.beta_start = parse_double(p, v);
    };
    diff["beta_end"] = [](RunConfig& c, const std::string& p,
                          const std::string& v) {
      c.diffusion.beta_end = parse_double(p, v);
    };
    diff["hidden1"] = [](RunConfig& c, const std::string& p,
                         const std::string& v) {
      c.diffusion.hidden1 = parse_int(p, v);
    };
    diff["hidden2"] = [](RunConfig& c, const std::string& p,
                         const std::string& v) {
      c.diffusion.hidden2 = parse_int(p, v);
    };
    diff["time_dim"] = [](RunConfig& c, const std::string& p,
                          const std::string& v) {
      c.diffusion.time_dim = parse_int(p, v);
    };
    diff["cond_dim"] = [](RunConfig& c, const std::string& p,
                          const std::string& v) {
      c.diffusion.cond_dim = parse_int(p, v);
    };
    diff["sample_bound"] = [](RunConfig& c, const std::string& p,
                              const std::string& v) {
      c.diffusion.sample_bound = parse_double(p, v);
    };

    auto& rew = m["rewards"];
    rew["mu"] = [](RunConfig& c, const std::string& p, const std::string& v) {
      c.rewards.mu = parse_mu(p, v);
    };
    rew["lambda"] = [](RunConfig& c, const std::string& p,
                       const std::string& v) {
      c.rewards.lambda = parse_double(p, v);
    };
    rew["noise_amp"] = [](RunConfig& c, const std::string& p,
                          const std::string& v) {
      c.rewards.noise_amp = parse_double(p, v);
    };
    rew["alpha_h"] = [](RunConfig& c, const std::string& p,
                        const std::string& v) {
      c.rewards.alpha_h = parse_double(p, v);
    };
    rew["alpha_p"] = [](RunConfig& c, const std::string& p,
                        const std::string& v) {
      c.rewards.alpha_p = parse_double(p, v);
    };
    rew["alpha_a"] = [](RunConfig& c, const std::string& p,
                        const std::string& v) {
      c.rewards.alpha_a = parse_double(p, v);
    };
    rew["id_jitter"] = [](RunConfig& c, const std::string& p,
                          const std::string& v) {
      c.rewards.id_jitter = parse_double(p, v);
    };

    auto& cur = m["curation"];
    cur["n_prompts"] = [](RunConfig& c, const std::string& p,
                          const std::string& v) {
      c.curation.n_prompts = parse_int(p, v);
    };
    cur["refinements"] = [](RunConfig& c, const std::string& p,
                            const std::string& v) {
      c.curation.refinements = parse_int(p, v);
    };
    cur["radius"] = [](RunConfig& c, const std::string& p,
                       const std::string& v) {
      c.curation.radius = parse_double(p, v);
    };
    cur["provider"] = [](RunConfig& c, const std::string& p,
                         const std::string& v) {
      if (v != "perturb" && v != "file") {
        throw DomainError(p + ": provider must be 'perturb' or 'file'");
      }
      c.curation.provider = v;
    };
    cur["requests_path"] = [](RunConfig& c, const std::string&,
                              const std::string& v) {
      c.curation.requests_path = v;
    };
    cur["responses_path"] = [](RunConfig& c, const std::string&,
                               const std::string& v) {
      c.curation.responses_path = v;
    };
    cur["rule"] = [](RunConfig& c, const std::string& p,
                     const std::string& v) {
      const auto r = parse_rule(v);
      if (!r) throw DomainError(p + ": unknown rule '" + v + "'");
      c.curation.rule = *r;
    };
    cur["strategy"] = [](RunConfig& c, const std::string& p,
                         const std::string& v) {
      const auto st = SelectionStrategy::parse(v);
      if (!st) throw DomainError(p + ": unknown strategy '" + v + "'");
      c.curation.strategy = *st;
    };
    cur["renormalize_after_selection"] = [](RunConfig& c, const std::string& p,
                                            const std::string& v) {
      c.curation.renormalize_after_selection = parse_bool(p, v);
    };
    cur["eps_stab"] = [](RunConfig& c, const std::string& p,
                         const std::string& v) {
      c.curation.eps_stab = parse_double(p, v);
    };

    auto& tr = m["training"];
    tr["learning_rate"] = [](RunConfig& c, const std::string& p,
                             const std::string& v) {
      c.training.learning_rate = parse_double(p, v);
    };
    tr["batch_size"] = [](RunConfig& c, const std::string& p,
                          const std::string& v) {
      c.training.batch_size = parse_int(p, v);
    };
    tr["grad_accumulation"] = [](RunConfig& c, const std::string& p,
                                 const std::string& v) {
      c.training.grad_accumulation = parse_int(p, v);
    };
    tr["total_steps"] = [](RunConfig& c, const std::string& p,
                           const std::string& v) {
      c.training.total_steps = parse_int(p, v);
    };
    tr["checkpoint_every"] = [](RunConfig& c, const std::string& p,
                                const std::string& v) {
      c.training.checkpoint_every = parse_int(p, v);
    };
    tr["beta1"] = [](RunConfig& c, const std::string& p,
                     const std::string& v) {
      c.training.beta1 = parse_double(p, v);
    };
    tr["beta2"] = [](RunConfig& c, const std::string& p,
                     const std::string& v) {
      c.training.beta2 = parse_double(p, v);
    };
    tr["adam_eps"] = [](RunConfig& c, const std::string& p,
                        const std::string& v) {
      c.training.adam_eps = parse_double(p, v);
    };
    tr["weight_decay"] = [](RunConfig& c, const std::string& p,
                            const std::string& v) {
      c.training.weight_decay = parse_double(p, v);
    };

    auto& ver = m["verification"];
    ver["draws"] = [](RunConfig& c, const std::string& p,
                      const std::string& v) {
      c.verification.draws = parse_int(p, v);
    };
    ver["eta_max"] = [](RunConfig& c, const std::string& p,
                        const std::string& v) {
      c.verification.eta_max = parse_double(p, v);
    };
    ver["eta_min"] = [](RunConfig& c, const std::string& p,
                        const std::string& v) {
      c.verification.eta_min = parse_double(p, v);
    };
    ver["eta_points"] = [](RunConfig& c, const std::string& p,
                           const std::string& v) {
      c.verification.eta_points = parse_int(p, v);
    };
    ver["groups"] = [](RunConfig& c, const std::string& p,
                       const std::string& v) {
      c.verification.groups = parse_int(p, v);
    };
    ver["group_size"] = [](RunConfig& c, const std::string& p,
                           const std::string& v) {
      c.verification.group_size = parse_int(p, v);
    };

    auto& ev = m["evaluation"];
    ev["prompts"] = [](RunConfig& c, const std::string& p,
                       const std::string& v) {
      c.evaluation.prompts = parse_int(p, v);
    };
    ev["draws_per_prompt"] = [](RunConfig& c, const std::string& p,
                                const std::string& v) {
      c.evaluation.draws_per_prompt = parse_int(p, v);
    };
    ev["seeds"] = [](RunConfig& c, const std::string& p,
                     const std::string& v) {
      c.evaluation.seeds = parse_int(p, v);
    };
    ev["ablate_strategies"] = [](RunConfig& c, const std::string&,
                                 const std::string& v) {
      c.evaluation.ablate_strategies = v;
    };
    ev["ablate_steps"] = [](RunConfig& c, const std::string&,
                            const std::string& v) {
      c.evaluation.ablate_steps = v;
    };
    ev["ablate_rules"] = [](RunConfig& c, const std::string&,
                            const std::string& v) {
      c.evaluation.ablate_rules = v;
    };

    auto& run = m["run"];
    run["seed"] = [](RunConfig& c, const std::string& p,
                     const std::string& v) {
      c.seed = parse_u64(p, v);
    };
    return m;
  }();
  return s;
}

}  // namespace

RunConfig RunConfig::parse_string(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::stringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw DomainError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!schema().count(section)) {
        throw DomainError("config: unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DomainError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) {
      throw DomainError("config: key '" + key + "' outside any section");
    }
    const auto& keys = schema().at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) {
      throw DomainError("config: unknown key " + section + "." + key);
    }
    it->second(cfg, section + "." + key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

void RunConfig::validate() const {
  const auto req = [](bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
  };
  req(diffusion.data_dim >= 1, "diffusion.d: must be >= 1");
  req(diffusion.timesteps >= 2, "diffusion.timesteps: must be >= 2");
  req(diffusion.beta_start > 0.0 &&
          diffusion.beta_start <= diffusion.beta_end &&
          diffusion.beta_end < 1.0,
      "diffusion: need 0 < beta_start <= beta_end < 1");
  req(diffusion.time_dim >= 2 && diffusion.time_dim % 2 == 0,
      "diffusion.time_dim: must be even and >= 2");
  req(diffusion.cond_dim >= 1, "diffusion.cond_dim: must be >= 1");
  req(diffusion.hidden1 >= 1 && diffusion.hidden2 >= 1,
      "diffusion.hidden1/hidden2: must be >= 1");
  req(diffusion.sample_bound > 0.0, "diffusion.sample_bound: must be > 0");

  req(!rewards.mu.empty(), "rewards.mu: table must be nonempty");
  for (const auto& row : rewards.mu) {
    req(static_cast<int>(row.size()) == diffusion.data_dim,
        "rewards.mu: row dimension must equal diffusion.d");
  }
  req(rewards.lambda >= 0.0, "rewards.lambda: must be >= 0");
  req(rewards.noise_amp >= 0.0, "rewards.noise_amp: must be >= 0");
  req(rewards.id_jitter >= 0.0, "rewards.id_jitter: must be >= 0");
  composite_weights().validate();

  req(curation.n_prompts >= 1, "curation.n_prompts: must be >= 1");
  req(curation.refinements >= 1, "curation.refinements: must be >= 1");
  req(curation.radius >= 0.0, "curation.radius: must be >= 0");
  req(curation.eps_stab > 0.0, "curation.eps_stab: must be > 0");

  training.validate();

  req(verification.draws >= 1, "verification.draws: must be >= 1");
  req(verification.eta_max > verification.eta_min &&
          verification.eta_min > 0.0,
      "verification: need eta_max > eta_min > 0");
  req(verification.eta_points >= 2, "verification.eta_points: must be >= 2");
  req(verification.groups >= 1, "verification.groups: must be >= 1");
  req(verification.group_size >= 1,
      "verification.group_size: must be >= 1");

  req(evaluation.prompts >= 1, "evaluation.prompts: must be >= 1");
  req(evaluation.draws_per_prompt >= 1,
      "evaluation.draws_per_prompt: must be >= 1");
  req(evaluation.seeds >= 1, "evaluation.seeds: must be >= 1");
}

std::string RunConfig::serialize() const {
  std::string out;
  const auto kv = [&out](std::string_view k, const std::string& v) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  };
  out += "[diffusion]\n";
  kv("d", std::to_string(diffusion.data_dim));
  kv("timesteps", std::to_string(diffusion.timesteps));
  kv("beta_start", fmt_double(diffusion.beta_start));
  kv("beta_end", fmt_double(diffusion.beta_end));
  kv("hidden1", std::to_string(diffusion.hidden1));
  kv("hidden2", std::to_string(diffusion.hidden2));
  kv("time_dim", std::to_string(diffusion.time_dim));
  kv("cond_dim", std::to_string(diffusion.cond_dim));
  kv("sample_bound", fmt_double(diffusion.sample_bound));
  out += "\n[rewards]\n";
  kv("mu", mu_to_string(rewards.mu));
  kv("lambda", fmt_double(rewards.lambda));
  kv("noise_amp", fmt_double(rewards.noise_amp));
  kv("alpha_h", fmt_double(rewards.alpha_h));
  kv("alpha_p", fmt_double(rewards.alpha_p));
  kv("alpha_a", fmt_double(rewards.alpha_a));
  kv("id_jitter", fmt_double(rewards.id_jitter));
  out += "\n[curation]\n";
  kv("n_prompts", std::to_string(curation.n_prompts));
  kv("refinements", std::to_string(curation.refinements));
  kv("radius", fmt_double(curation.radius));
  kv("provider", curation.provider);
  kv("requests_path", curation.requests_path);
  kv("responses_path", curation.responses_path);
  kv("rule", std::string(rule_name(curation.rule)));
  kv("strategy", curation.strategy.to_string());
  kv("renormalize_after_selection",
     curation.renormalize_after_selection ? "true" : "false");
  kv("eps_stab", fmt_double(curation.eps_stab));
  out += "\n[training]\n";
  kv("learning_rate", fmt_double(training.learning_rate));
  kv("batch_size", std::to_string(training.batch_size));
  kv("grad_accumulation", std::to_string(training.grad_accumulation));
  kv("total_steps", std::to_string(training.total_steps));
  kv("checkpoint_every", std::to_string(training.checkpoint_every));
  kv("beta1", fmt_double(training.beta1));
  kv("beta2", fmt_double(training.beta2));
  kv("adam_eps", fmt_double(training.adam_eps));
  kv("weight_decay", fmt_double(training.weight_decay));
  out += "\n[verification]\n";
  kv("draws", std::to_string(verification.draws));
  kv("eta_max", fmt_double(verification.eta_max));
  kv("eta_min", fmt_double(verification.eta_min));
  kv("eta_points", std::to_string(verification.eta_points));
  kv("groups", std::to_string(verification.groups));
  kv("group_size", std::to_string(verification.group_size));
  out += "\n[evaluation]\n";
  kv("prompts", std::to_string(evaluation.prompts));
  kv("draws_per_prompt", std::to_string(evaluation.draws_per_prompt));
  kv("seeds", std::to_string(evaluation.seeds));
  kv("ablate_strategies", evaluation.ablate_strategies);
  kv("ablate_steps", evaluation.ablate_steps);
  kv("ablate_rules", evaluation.ablate_rules);
  out += "\n[run]\n";
  kv("seed", std::to_string(seed));
  return out;
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(serialize()); }

std::string config_hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

NoiseSchedule RunConfig::make_schedule() const {
  return build_schedule(diffusion.timesteps, diffusion.beta_start,
                        diffusion.beta_end);
}

MlpArch RunConfig::make_arch() const {
  MlpArch a;
  a.data_dim = diffusion.data_dim;
  a.time_dim = diffusion.time_dim;
  a.cond_dim = diffusion.cond_dim;
  a.hidden1 = diffusion.hidden1;
  a.hidden2 = diffusion.hidden2;
  return a;
}

RewardParams RunConfig::reward_params() const {
  RewardParams rp;
  rp.mu = rewards.mu;
  rp.lambda = rewards.lambda;
  rp.noise_amp = rewards.noise_amp;
  return rp;
}

CompositeWeights RunConfig::composite_weights() const {
  return CompositeWeights{rewards.alpha_h, rewards.alpha_p, rewards.alpha_a};
}

PromptModelOptions RunConfig::prompt_options() const {
  PromptModelOptions opt;
  opt.cond_dim = diffusion.cond_dim;
  opt.class_count = static_cast<int>(rewards.mu.size());
  opt.id_jitter = rewards.id_jitter;
  return opt;
}

SamplerOptions RunConfig::sampler_options() const {
  return SamplerOptions{diffusion.sample_bound};
}

}  // namespace craft
