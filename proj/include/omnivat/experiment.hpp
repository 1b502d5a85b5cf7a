#pragma once

#include "omnivat/data.hpp"
#include "omnivat/metrics.hpp"
#include "omnivat/model.hpp"

#include <cstdint>
#include <vector>

namespace omnivat {

/// One training run on a suite's source (held-out pairs excluded) with
/// evaluation on the held-out source pairs and on every target domain.
struct ExperimentResult {
  TrainResult training;
  EvalReport holdout;
  std::vector<EvalReport> targets;
  double target_accuracy = 0;  // unweighted mean over targets
  double target_macro_f1 = 0;
  double target_margin = 0;
  double seconds = 0;
};

ExperimentResult run_experiment(const DomainSuite& suite, const TrainConfig& config,
                                std::size_t max_pairs = 2000);

/// Mean cosine margin over the suite's targets of an untrained model.
double untrained_target_margin(const DomainSuite& suite, const TrainConfig& config,
                               std::size_t max_pairs = 2000);

}  // namespace omnivat
