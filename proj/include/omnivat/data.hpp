#pragma once

#include "omnivat/mffa.hpp"
#include "omnivat/numeric/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace omnivat {

struct LabeledEmbedding {
  RealVector vector;
  std::uint16_t category = 0;
  std::uint16_t domain = 0;
  Modality modality = Modality::kVis;
  std::uint64_t pair_id = 0;
};

using Dataset = std::vector<LabeledEmbedding>;

struct DomainSuite {
  Index dim = 0;
  Index classes = 0;
  Dataset source;
  std::vector<Dataset> targets;
};

struct SynthConfig {
  Index classes = 5;
  Index dim = 32;
  Index per_class = 40;
  Index targets = 3;
  double shift = 0.4;
  double noise_var = 0.1;
  Index lang_per_class = 80;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on classes < 2, dim < 8, or non-positive counts.
void validate(const SynthConfig& config);

/// Source domain 0 and targets 1..K. Every domain, the source included, gets
/// its own rotation and bias; shift = 0 makes them the identity and zero.
DomainSuite synth_suite(const SynthConfig& config);

/// VIS/TAC pair sharing a pair id.
struct PairedSample {
  RealMatrix vis;  // 1 x D
  RealMatrix tac;
  int label = 0;
  std::uint64_t pair_id = 0;
};

/// Matches VIS and TAC records by pair id, ordered by pair id. Throws
/// IncompleteDataError when a record has no partner or partners disagree on
/// category or domain.
std::vector<PairedSample> paired_samples(const Dataset& data);

/// LANG vectors grouped by category (1 x D rows).
std::vector<std::vector<RealMatrix>> language_by_class(const Dataset& data, Index classes);

/// Split used for the source held-out evaluation: pair_id % 5 == 4.
bool is_holdout(std::uint64_t pair_id);
Dataset holdout_split(const Dataset& data, bool holdout);

// ---- OVEM files ----------------------------------------------------------

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

/// Writes records as single precision. Throws DimensionError on records of
/// differing length and Error when the file cannot be written.
void save_embeddings(const std::filesystem::path& path, std::span<const LabeledEmbedding> records);
std::vector<std::uint8_t> encode_embeddings(std::span<const LabeledEmbedding> records);

/// Throws FormatError (with byte offset) on bad magic, version, truncation,
/// or trailing bytes.
Dataset load_embeddings(const std::filesystem::path& path);
Dataset decode_embeddings(std::span<const std::uint8_t> bytes);

}  // namespace omnivat
