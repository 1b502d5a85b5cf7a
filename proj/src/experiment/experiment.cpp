#include "omnivat/experiment.hpp"

#include "omnivat/errors.hpp"

#include <chrono>

namespace omnivat {

ExperimentResult run_experiment(const DomainSuite& suite, const TrainConfig& config,
                                std::size_t max_pairs) {
  if (suite.targets.empty()) throw ConfigError("suite has no target domains");
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult r;
  r.training = train(TrainingSet::From(holdout_split(suite.source, false), suite.classes), config);
  const InferenceModel model = InferenceModel::From(r.training.params, config);
  r.holdout = evaluate(model, holdout_split(suite.source, true), suite.classes, max_pairs,
                       config.seed);
  for (const Dataset& t : suite.targets) {
    r.targets.push_back(evaluate(model, t, suite.classes, max_pairs, config.seed));
    r.target_accuracy += r.targets.back().accuracy;
    r.target_macro_f1 += r.targets.back().macro_f1;
    r.target_margin += r.targets.back().cosine_margin;
  }
  const auto k = static_cast<double>(r.targets.size());
  r.target_accuracy /= k;
  r.target_macro_f1 /= k;
  r.target_margin /= k;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

double untrained_target_margin(const DomainSuite& suite, const TrainConfig& config,
                               std::size_t max_pairs) {
  if (suite.targets.empty()) throw ConfigError("suite has no target domains");
  const ModelParams params = ModelParams::Init(config, suite.classes);
  const InferenceModel model = InferenceModel::From(params, config);
  double sum = 0;
  for (const Dataset& t : suite.targets) {
    sum += evaluate(model, t, suite.classes, max_pairs, config.seed).cosine_margin;
  }
  return sum / static_cast<double>(suite.targets.size());
}

}  // namespace omnivat
