#include "omnivat/metrics.hpp"

#include "omnivat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace omnivat {

namespace {

void check_lengths(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw DimensionError("predictions and labels differ in length");
  }
  if (preds.empty()) throw DegenerateError("no samples");
}

// Pairs (i, j), i < j, packed as i * n + j.
double mean_cosine(const RealMatrix& unit, std::vector<std::uint64_t> pairs,
                   std::size_t max_pairs, std::mt19937_64& rng) {
  if (pairs.size() > max_pairs) {
    // Partial Fisher-Yates: the first max_pairs slots become the sample.
    for (std::size_t k = 0; k < max_pairs; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pairs.size() - 1);
      std::swap(pairs[k], pairs[pick(rng)]);
    }
    pairs.resize(max_pairs);
  }
  const auto n = static_cast<std::uint64_t>(unit.rows());
  double sum = 0;
  for (std::uint64_t p : pairs) {
    sum += unit.row(static_cast<Index>(p / n)).dot(unit.row(static_cast<Index>(p % n)));
  }
  return sum / static_cast<double>(pairs.size());
}

}  // namespace

double top1_accuracy(std::span<const int> preds, std::span<const int> labels) {
  check_lengths(preds, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

F1Scores f1_scores(std::span<const int> preds, std::span<const int> labels, Index classes,
                   F1Averaging averaging) {
  check_lengths(preds, labels);
  if (classes < 1) throw RangeError("need at least one class");
  F1Scores out;
  out.per_class.resize(static_cast<std::size_t>(classes));
  std::vector<std::size_t> hits(out.per_class.size(), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes || preds[i] < 0 || preds[i] >= classes) {
      throw RangeError("class id outside 0.." + std::to_string(classes - 1));
    }
    ++out.per_class[labels[i]].support;
    ++out.per_class[preds[i]].predicted;
    if (preds[i] == labels[i]) ++hits[labels[i]];
  }
  double sum = 0;
  std::size_t averaged = 0;
  for (std::size_t c = 0; c < out.per_class.size(); ++c) {
    ClassScore& s = out.per_class[c];
    const auto tp = static_cast<double>(hits[c]);
    s.precision = s.predicted ? tp / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support ? tp / static_cast<double>(s.support) : 0.0;
    s.f1 = s.precision + s.recall > 0
               ? 2 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    if (averaging == F1Averaging::kSkipAbsent && s.support == 0 && s.predicted == 0) continue;
    sum += s.f1;
    ++averaged;
  }
  out.macro = averaged ? sum / static_cast<double>(averaged) : 0.0;
  return out;
}

double macro_f1(std::span<const int> preds, std::span<const int> labels, Index classes,
                F1Averaging averaging) {
  return f1_scores(preds, labels, classes, averaging).macro;
}

double cosine_margin(const RealMatrix& features, std::span<const int> labels,
                     std::size_t max_pairs, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw DimensionError("cosine_margin: one label per feature row");
  if (max_pairs == 0) throw RangeError("cosine_margin: max_pairs must be positive");
  std::vector<int> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw DegenerateError("cosine_margin: need at least two classes");

  RealMatrix unit = features;
  for (Index i = 0; i < unit.rows(); ++i) {
    const double norm = unit.row(i).norm();
    if (norm == 0) throw DegenerateError("cosine_margin: zero feature row");
    unit.row(i) /= norm;
  }
  std::vector<std::uint64_t> intra, inter;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      (labels[i] == labels[j] ? intra : inter).push_back(i * n + j);
    }
  }
  if (intra.empty()) throw DegenerateError("cosine_margin: no two samples share a class");
  std::mt19937_64 rng(seed);
  const double same = mean_cosine(unit, std::move(intra), max_pairs, rng);
  const double other = mean_cosine(unit, std::move(inter), max_pairs, rng);
  return same - other;
}

EvalReport evaluate(const InferenceModel& model, const Dataset& domain, Index classes,
                    std::size_t max_pairs, std::uint64_t seed) {
  const std::vector<PairedSample> pairs = paired_samples(domain);
  if (pairs.empty()) throw IncompleteDataError("domain has no VIS/TAC pairs");
  std::vector<InferSample> samples;
  std::vector<int> labels;
  for (const PairedSample& p : pairs) {
    if (p.label < 0 || p.label >= classes) throw RangeError("category outside the model's classes");
    samples.push_back({p.vis, p.tac});
    labels.push_back(p.label);
  }
  const std::vector<Prediction> preds = infer(model, samples);
  if (preds.front().logits.cols() != classes) {
    throw DimensionError("model and data disagree on the class count");
  }
  EvalReport r;
  r.count = preds.size();
  RealMatrix features(static_cast<Index>(preds.size()), preds.front().features.cols());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    r.predictions.push_back(preds[i].label);
    features.row(static_cast<Index>(i)) = preds[i].features;
    const RealMatrix& z = preds[i].logits;
    const double m = z.maxCoeff();
    r.ce += m + std::log((z.array() - m).exp().sum()) - z(0, labels[i]);
  }
  r.ce /= static_cast<double>(preds.size());
  r.accuracy = top1_accuracy(r.predictions, labels);
  F1Scores f1 = f1_scores(r.predictions, labels, classes);
  r.macro_f1 = f1.macro;
  r.per_class = std::move(f1.per_class);
  r.cosine_margin = cosine_margin(features, labels, max_pairs, seed);
  return r;
}

}  // namespace omnivat
