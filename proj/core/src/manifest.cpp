#include "craft/manifest.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "craft/errors.hpp"

namespace craft {

namespace {

using nlohmann::json;

json header_to_json(const ManifestHeader& h) {
  json j;
  j["kind"] = h.kind;
  j["format_version"] = h.format_version;
  j["config_hash"] = h.config_hash;
  j["scaler"] = {{"mean", h.scaler.mean},
                 {"std", h.scaler.std},
                 {"pool_size", h.scaler.pool_size},
                 {"fit", h.scaler_fit}};
  j["weights"] = {{"h", h.weights.h}, {"p", h.weights.p}, {"a", h.weights.a}};
  j["n_prompts"] = h.n_prompts;
  j["refinements"] = h.refinements;
  j["record_count"] = h.record_count;
  j["rule"] = h.rule;
  j["strategy"] = h.strategy;
  j["divergent_prompt_ids"] = h.divergent_prompt_ids;
  j["warnings"] = h.warnings;
  return j;
}

ManifestHeader header_from_json(const json& j) {
  ManifestHeader h;
  h.kind = j.at("kind").get<std::string>();
  h.format_version = j.at("format_version").get<int>();
  if (h.format_version > kManifestVersion) {
    throw FormatError("manifest format version " +
                      std::to_string(h.format_version) +
                      " is newer than supported version " +
                      std::to_string(kManifestVersion));
  }
  h.config_hash = j.at("config_hash").get<std::uint64_t>();
  const json& sc = j.at("scaler");
  h.scaler.mean = sc.at("mean").get<std::array<double, 3>>();
  h.scaler.std = sc.at("std").get<std::array<double, 3>>();
  h.scaler.pool_size = sc.at("pool_size").get<std::size_t>();
  h.scaler_fit = sc.at("fit").get<std::string>();
  const json& w = j.at("weights");
  h.weights = CompositeWeights{w.at("h").get<double>(),
                               w.at("p").get<double>(),
                               w.at("a").get<double>()};
  h.n_prompts = j.at("n_prompts").get<int>();
  h.refinements = j.at("refinements").get<int>();
  h.record_count = j.at("record_count").get<std::size_t>();
  h.rule = j.at("rule").get<std::string>();
  h.strategy = j.at("strategy").get<std::string>();
  h.divergent_prompt_ids =
      j.at("divergent_prompt_ids").get<std::vector<std::uint32_t>>();
  h.warnings = j.at("warnings").get<std::vector<std::string>>();
  return h;
}

json record_to_json(const ManifestRecord& r) {
  json j;
  j["prompt_id"] = r.prompt_id;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["x0"] = r.x0;
  j["r_h"] = r.r_h;
  j["r_p"] = r.r_p;
  j["r_a"] = r.r_a;
  j["r_total"] = r.r_total;
  if (r.advantage) {
    j["advantage"] = *r.advantage;
  } else {
    j["advantage"] = nullptr;
  }
  json flags;
  for (int rule = 0; rule < kFilterRuleCount; ++rule) {
    flags[std::string(rule_name(static_cast<FilterRule>(rule)))] =
        static_cast<bool>((r.retained_mask >> rule) & 1);
  }
  j["retained_under"] = flags;
  return j;
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord r;
  r.prompt_id = j.at("prompt_id").get<std::uint32_t>();
  r.variant = j.at("variant").get<std::uint32_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.x0 = j.at("x0").get<std::vector<double>>();
  r.r_h = j.at("r_h").get<double>();
  r.r_p = j.at("r_p").get<double>();
  r.r_a = j.at("r_a").get<double>();
  r.r_total = j.at("r_total").get<double>();
  if (!j.at("advantage").is_null()) {
    r.advantage = j.at("advantage").get<double>();
  }
  const json& flags = j.at("retained_under");
  for (int rule = 0; rule < kFilterRuleCount; ++rule) {
    if (flags.at(std::string(rule_name(static_cast<FilterRule>(rule))))
            .get<bool>()) {
      r.retained_mask |= static_cast<std::uint8_t>(1u << rule);
    }
  }
  return r;
}

}  // namespace

void write_manifest(const std::filesystem::path& path,
                    const ManifestHeader& header,
                    std::span<const ManifestRecord> records) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  ManifestHeader h = header;
  h.record_count = records.size();
  out << header_to_json(h).dump() << "\n";
  for (const ManifestRecord& r : records) {
    out << record_to_json(r).dump() << "\n";
  }
}

ManifestData read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("manifest not found: " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("manifest " + path.string() + " is empty");
  }
  json jh = json::parse(line, nullptr, false);
  if (jh.is_discarded()) {
    throw FormatError("manifest " + path.string() + ": malformed header");
  }
  ManifestData data;
  data.header = header_from_json(jh);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json jr = json::parse(line, nullptr, false);
    if (jr.is_discarded()) {
      throw FormatError("manifest " + path.string() + ": malformed record");
    }
    data.records.push_back(record_from_json(jr));
  }
  if (data.records.size() != data.header.record_count) {
    throw FormatError("manifest " + path.string() + ": header promises " +
                      std::to_string(data.header.record_count) +
                      " records, found " +
                      std::to_string(data.records.size()));
  }
  return data;
}

ManifestHeader read_manifest_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("manifest not found: " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("manifest " + path.string() + " is empty");
  }
  json jh = json::parse(line, nullptr, false);
  if (jh.is_discarded()) {
    throw FormatError("manifest " + path.string() + ": malformed header");
  }
  return header_from_json(jh);
}

ManifestRecord record_from_pair(const TrainingPair& tp,
                                const RewardVector& rv) {
  ManifestRecord r;
  r.prompt_id = tp.prompt_id;
  r.variant = tp.variant;
  r.seed = tp.gen_seed;
  r.x0 = tp.x0;
  r.r_h = rv.h;
  r.r_p = rv.p;
  r.r_a = rv.a;
  r.r_total = tp.r_total;
  r.advantage = tp.advantage;
  r.retained_mask = tp.retained_mask;
  return r;
}

TrainingPair pair_from_record(const ManifestRecord& rec) {
  TrainingPair tp;
  tp.prompt_id = rec.prompt_id;
  tp.variant = rec.variant;
  tp.gen_seed = rec.seed;
  tp.x0 = rec.x0;
  tp.r_total = rec.r_total;
  tp.advantage = rec.advantage;
  tp.retained_mask = rec.retained_mask;
  return tp;
}

}  // namespace craft
