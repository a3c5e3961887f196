#pragma once

#include <cstdint>
#include <string>

#include "nmt/train/trainer.hpp"

namespace nmt::train {

// Artifact provenance stored alongside the weights. Hashes are FNV-1a of
// the referenced files; 0 means "not applicable" (e.g. word mode carries no
// merges).
struct CheckpointMeta {
  std::uint64_t config_fingerprint = 0;
  std::uint64_t src_vocab_hash = 0;
  std::uint64_t tgt_vocab_hash = 0;
  std::uint64_t src_merges_hash = 0;
  std::uint64_t tgt_merges_hash = 0;
  std::uint64_t seed = 0;
};

std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t config_fingerprint(const model::ModelConfig& config);

// Single binary file: magic, version, config, meta, step counters, named
// tensors with Adam moments, FNV-1a checksum footer.
void save_checkpoint(const std::string& path, const TrainState& state,
                     const CheckpointMeta& meta);

// Verifies the checksum and, when `expect` is given, that the stored config
// fingerprint matches it. Throws DataError otherwise.
TrainState load_checkpoint(const std::string& path, CheckpointMeta* meta_out,
                           const model::ModelConfig* expect = nullptr);

}  // namespace nmt::train
