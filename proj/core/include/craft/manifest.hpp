#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "craft/curation.hpp"
#include "craft/rewards.hpp"

namespace craft {

inline constexpr int kManifestVersion = 1;

/// Header record of a line-delimited dataset manifest. The config hash ties
/// every artifact to the run that produced it; mixing hashes is refused.
struct ManifestHeader {
  std::string kind;  // "pool" | "filtered" | "training_set"
  int format_version = kManifestVersion;
  std::uint64_t config_hash = 0;
  RewardScaler scaler;
  CompositeWeights weights;
  std::string scaler_fit = "pre_filter_pool";
  int n_prompts = 0;
  int refinements = 0;
  std::size_t record_count = 0;
  std::string rule;      // filtered / training_set
  std::string strategy;  // training_set
  std::vector<std::uint32_t> divergent_prompt_ids;
  std::vector<std::string> warnings;
};

/// One sample line. Originals (variant 0) carry no advantage.
struct ManifestRecord {
  std::uint32_t prompt_id = 0;
  std::uint32_t variant = 0;
  std::uint64_t seed = 0;
  std::vector<double> x0;
  double r_h = 0.0;
  double r_p = 0.0;
  double r_a = 0.0;
  double r_total = 0.0;
  std::optional<double> advantage;
  std::uint8_t retained_mask = 0;
};

void write_manifest(const std::filesystem::path& path,
                    const ManifestHeader& header,
                    std::span<const ManifestRecord> records);

struct ManifestData {
  ManifestHeader header;
  std::vector<ManifestRecord> records;
};

/// Fails closed on unknown format versions and malformed lines.
ManifestData read_manifest(const std::filesystem::path& path);

/// Header-only read, for stage guards.
ManifestHeader read_manifest_header(const std::filesystem::path& path);

ManifestRecord record_from_pair(const TrainingPair& tp,
                                const RewardVector& rv);
TrainingPair pair_from_record(const ManifestRecord& rec);

}  // namespace craft
