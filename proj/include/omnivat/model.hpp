#pragma once

#include "omnivat/data.hpp"
#include "omnivat/dfrft.hpp"
#include "omnivat/dtg.hpp"
#include "omnivat/mffa.hpp"
#include "omnivat/numeric/tape.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace omnivat {

/// Which components take part in training and inference.
enum class Variant {
  kCeOnly,  // shared classifier on the raw embeddings
  kMffa,    // adapter + MMA, no tree
  kDtg,     // tree over the raw embeddings, no adapter
  kFull,    // adapter + tree
};

const char* to_string(Variant v);
Variant parse_variant(std::string_view name);
bool uses_mffa(Variant v);
bool uses_dtg(Variant v);

struct TrainConfig {
  Index dim = 32;
  Index expansion = 4;
  Index depth = 3;
  double lambda = 10.0;
  FractionalOrder order{0.5, true};
  Index batch = 16;
  Index epochs = 20;
  double lr = 0.05;
  double momentum = 0.9;
  double warmup_fraction = 0.05;
  std::uint64_t seed = 0;
  Generator generator = Generator::kDtg;
  bool standard_attn_scale = false;
  Variant variant = Variant::kFull;
  double init_noise = 0.02;
  /// Global gradient-norm cap applied before each step; 0 disables.
  double clip_norm = 1.0;

  AttentionOptions attention() const { return {standard_attn_scale}; }
  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// Every trainable tensor plus the matching momentum buffers.
struct ModelParams {
  Index classes = 0;
  MffaParams mffa;
  TreeWeights tree;
  RealMatrix classifier;  // 2D x C
  RealMatrix bias;        // 1 x C
  RealMatrix order;       // 1 x 1
  bool order_trainable = true;
  std::vector<RealMatrix> momentum;  // aligned with tensors()

  static ModelParams Init(const TrainConfig& config, Index classes);

  /// Named views in a fixed order; "order" is last.
  std::vector<std::pair<std::string, RealMatrix*>> tensors();
  std::vector<std::pair<std::string, const RealMatrix*>> tensors() const;
  std::size_t scalar_count() const;
};

/// What inference may see: no tree weights, no momentum.
struct InferenceModel {
  Variant variant = Variant::kFull;
  const MffaParams* mffa = nullptr;
  const RealMatrix* classifier = nullptr;
  const RealMatrix* bias = nullptr;
  double order = 0.5;
  AttentionOptions attention;

  static InferenceModel From(const ModelParams& params, const TrainConfig& config);
};

/// Tape leaves for one step, in tensors() order.
struct ModelVars {
  MffaVars mffa;
  std::vector<Var> tree;
  Var classifier;
  Var bias;
  Var order;
  std::vector<Var> all;

  static ModelVars Leaves(GradTape& tape, const ModelParams& params);
  /// Builds from externally created leaves laid out like tensors().
  static ModelVars FromList(const std::vector<Var>& list, Index depth);
};

/// 1 x C logits = (clf(flat v) + clf(flat t)) / 2.
Var classify(GradTape& tape, const ComplexVar& vis, const ComplexVar& tac, Var classifier, Var bias);
RealMatrix classify(const ComplexMatrix& vis, const ComplexMatrix& tac, const RealMatrix& classifier,
                    const RealMatrix& bias);

struct LossTerms {
  Var total, mma, nod, ce;
};

struct LossBreakdown {
  double total = 0, mma = 0, nod = 0, ce = 0;
};

/// Joint loss over one batch, each term averaged over the batch.
LossTerms joint_loss(GradTape& tape, FractionalMatrixCache& cache, const ModelVars& vars,
                     std::span<const TrainSample> batch, const TrainConfig& config);

double lr_schedule(Index step, Index total_steps, const TrainConfig& config);
Index warmup_steps(Index total_steps, const TrainConfig& config);

/// Rescales grads so their joint Frobenius norm is at most max_norm
/// (no-op for max_norm = 0). Returns the norm before clipping.
double clip_global_norm(std::span<RealMatrix> grads, double max_norm);

/// buffer <- momentum * buffer + grad; param <- param - lr * buffer. A
/// frozen order is left untouched.
void sgd_step(ModelParams& params, std::span<const RealMatrix> grads, double lr, double momentum);

struct TrainingSet {
  Index classes = 0;
  std::vector<PairedSample> pairs;
  std::vector<std::vector<RealMatrix>> language;  // per class

  /// Throws IncompleteDataError when pairs or per-class LANG are missing.
  static TrainingSet From(const Dataset& source, Index classes);
};

struct EpochLog {
  Index epoch = 0;
  double lr = 0;
  double order = 0;
  LossBreakdown mean;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

TrainResult train(const TrainingSet& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});
/// Continues from given parameters; used by train() and by tests.
TrainResult train_from(ModelParams params, const TrainingSet& data, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

struct Prediction {
  int label = 0;
  RealMatrix logits;    // 1 x C
  RealMatrix features;  // 1 x 4D: flat(v) followed by flat(t)
};

Prediction infer_one(const InferenceModel& model, const InferSample& sample);
std::vector<Prediction> infer(const InferenceModel& model, std::span<const InferSample> samples);

// ---- Checkpoints -------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string config_text(const TrainConfig& config, Index classes);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const TrainConfig& config);
std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const TrainConfig& config);

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Applies one key=value pair to a config. Returns false for unknown keys;
/// throws ConfigError on malformed values.
bool apply_config_key(TrainConfig& config, const std::string& key, const std::string& value);

}  // namespace omnivat
