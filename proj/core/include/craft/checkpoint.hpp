#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "craft/model.hpp"
#include "craft/trainer.hpp"

namespace craft {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary model checkpoint: magic "CRFT", version, architecture descriptor,
/// config hash, step counter, then parameters as little-endian f64 in layer
/// order, optionally followed by the optimizer moments. Byte layout in
/// docs/FORMATS.md.
struct Checkpoint {
  MlpArch arch;
  std::vector<double> params;
  std::uint64_t config_hash = 0;
  std::int64_t step = 0;
  std::optional<OptimizerState> opt;

  EpsMlp to_model() const;
  static Checkpoint from_model(const EpsMlp& m, std::uint64_t config_hash,
                               std::int64_t step,
                               std::optional<OptimizerState> opt = {});
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);

/// Fails closed on bad magic, newer versions, or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace craft
