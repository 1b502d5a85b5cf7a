#pragma once

#include "omnivat/data.hpp"
#include "omnivat/model.hpp"
#include "omnivat/numeric/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace omnivat {

/// Throws DimensionError on length mismatch, DegenerateError when empty.
double top1_accuracy(std::span<const int> preds, std::span<const int> labels);

struct ClassScore {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;    // true samples
  std::size_t predicted = 0;  // predicted samples
};

/// kAllClasses averages over every configured class (absent ones give 0);
/// kSkipAbsent drops classes with neither support nor predictions.
enum class F1Averaging { kAllClasses, kSkipAbsent };

struct F1Scores {
  double macro = 0;
  std::vector<ClassScore> per_class;
};

/// Throws RangeError for labels or predictions outside 0..classes-1.
F1Scores f1_scores(std::span<const int> preds, std::span<const int> labels, Index classes,
                   F1Averaging averaging = F1Averaging::kAllClasses);
double macro_f1(std::span<const int> preds, std::span<const int> labels, Index classes,
                F1Averaging averaging = F1Averaging::kAllClasses);

/// Mean cosine over intra-class pairs minus mean cosine over inter-class
/// pairs of the rows of features. Each group is sampled without replacement
/// up to max_pairs, or taken whole when smaller. Throws DegenerateError with
/// fewer than two classes, no intra-class pair, or a zero row.
double cosine_margin(const RealMatrix& features, std::span<const int> labels,
                     std::size_t max_pairs, std::uint64_t seed);

struct EvalReport {
  double accuracy = 0;
  double macro_f1 = 0;
  std::vector<ClassScore> per_class;
  double cosine_margin = 0;
  /// Mean cross-entropy of the inference logits; the alignment and tree
  /// terms need language and are absent outside training.
  double ce = 0;
  std::size_t count = 0;
  std::vector<int> predictions;
};

/// Runs inference over the VIS/TAC pairs of one domain.
EvalReport evaluate(const InferenceModel& model, const Dataset& domain, Index classes,
                    std::size_t max_pairs = 2000, std::uint64_t seed = 0);

}  // namespace omnivat
