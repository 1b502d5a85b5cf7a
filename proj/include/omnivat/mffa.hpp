#pragma once

#include "omnivat/dfrft.hpp"
#include "omnivat/numeric/tape.hpp"
#include "omnivat/numeric/types.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace omnivat {

enum class Modality : std::uint8_t { kVis = 0, kTac = 1, kLang = 2 };

const char* to_string(Modality m);

/// Complex feature block: E x D after fractional projection, 1 x D after
/// attention pooling.
struct FractionalFeature {
  ComplexMatrix values;
  Modality modality = Modality::kVis;
};

/// Trainable tensors of the multimodal fractional adapter. Expansion scalers
/// are E x 1 columns; projection and FFN matrices are D x D acting from the
/// right on row features; FFN biases are 1 x D.
struct MffaParams {
  RealMatrix expand_lang, expand_vis, expand_tac;
  RealMatrix query, key, value;
  RealMatrix ffn_w1, ffn_b1, ffn_w2, ffn_b2;

  /// Identity projections, zero biases, expansion scalers all equal to one.
  static MffaParams Identity(Index dim, Index expansion);
  /// Identity plus N(0, noise^2) on every matrix; expansion scalers drawn
  /// around one.
  static MffaParams Random(Index dim, Index expansion, double noise, std::mt19937_64& rng);

  Index dim() const { return query.rows(); }
  Index expansion() const { return expand_vis.rows(); }
  const RealMatrix& expand(Modality m) const;
};

/// MffaParams recorded on a tape, as leaves or constants.
struct MffaVars {
  Var expand_lang, expand_vis, expand_tac;
  Var query, key, value;
  Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;

  static MffaVars Constants(GradTape& tape, const MffaParams& p);
  Var expand(Modality m) const;
};

struct AttentionOptions {
  /// false: softmax(scores) / sqrt(D) as written in the method;
  /// true: softmax(scores / sqrt(D)).
  bool standard_scale = false;
};

/// Instrumentation of one fratt call.
struct AttentionTrace {
  /// Row sums of the softmax weights before any sqrt(D) division.
  std::vector<double> weight_row_sums;
};

// ---- Tape-level building blocks ----------------------------------------

/// Rows i = ReLU(Re(F_p (s_i e))) + j ReLU(Im(F_p (s_i e))) for expansion
/// scalers s (E x 1) and a 1 x D embedding e.
ComplexVar frft_process(GradTape& tape, FractionalMatrixCache& cache, Var order,
                        const ComplexVar& embedding, Var expand);

/// Mean of the row-averages of the given feature blocks.
ComplexVar mean_of_row_means(GradTape& tape, std::span<const ComplexVar> blocks);

/// Fractional attention: query rows attend over (g (+) features) and the
/// pooled context passes through the FFN on each plane.
ComplexVar fratt(GradTape& tape, const ComplexVar& query, const ComplexVar& features,
                 const ComplexVar& token, const MffaVars& params, AttentionOptions options,
                 AttentionTrace* trace = nullptr);

/// lambda * (KL(l || v) + KL(l || t)) where each 1 x D complex feature is
/// flattened to [Re | Im] and turned into a distribution by softmax.
Var mma_loss(GradTape& tape, const ComplexVar& lang, const ComplexVar& vis,
             const ComplexVar& tac, double lambda);

/// One training sample as seen by the adapter.
struct TrainSample {
  RealMatrix vis;   // 1 x D
  RealMatrix tac;   // 1 x D
  RealMatrix lang;  // 1 x D
  int label = 0;
};

/// One inference sample. Carries no label.
struct InferSample {
  RealMatrix vis;
  RealMatrix tac;
};

struct MffaOutput {
  ComplexVar lang_bar;  // invalid in inference
  ComplexVar vis_bar;
  ComplexVar tac_bar;
  ComplexVar vis_feature;  // E x D block fed to attention
  ComplexVar tac_feature;
  ComplexVar vis_token;
  ComplexVar tac_token;
};

/// Training path: language features attend to themselves with the
/// class-mean token; VIS/TAC are projected under language guidance and
/// queried by the language feature. Throws DegenerateError on an empty batch
/// and IncompleteDataError when a sample is missing a modality.
std::vector<MffaOutput> mffa_forward_train(GradTape& tape, FractionalMatrixCache& cache,
                                           Var order, const MffaVars& params,
                                           std::span<const TrainSample> batch,
                                           AttentionOptions options);

/// Inference path: zero language guidance, each modality queries itself and
/// its token is its own row-average.
MffaOutput mffa_forward_infer(GradTape& tape, FractionalMatrixCache& cache, Var order,
                              const MffaVars& params, const InferSample& sample,
                              AttentionOptions options);

// ---- Value-level operations --------------------------------------------

FractionalFeature frft_process(const ComplexMatrix& embedding, const RealMatrix& expand,
                               const DfrftPlan& plan, double order,
                               Modality modality = Modality::kLang);

/// Mean over same-label samples of each sample's row-averaged block. Throws
/// DegenerateError when no sample carries target_label.
ComplexMatrix global_class_token(std::span<const FractionalFeature> batch,
                                 std::span<const int> labels, int target_label);
/// Inference rule: the row-average of the target itself.
ComplexMatrix global_class_token(const FractionalFeature& target);

ComplexMatrix fratt(const ComplexMatrix& query, const FractionalFeature& features,
                    const ComplexMatrix& token, const MffaParams& params,
                    AttentionOptions options = {}, AttentionTrace* trace = nullptr);

/// frft_process(lang_bar + e) with e promoted to complex; no guidance when
/// lang_bar is empty.
FractionalFeature guided_project(const std::optional<ComplexMatrix>& lang_bar,
                                 const RealMatrix& embedding, const RealMatrix& expand,
                                 const DfrftPlan& plan, double order, Modality modality);

double mma_loss(const ComplexMatrix& lang, const ComplexMatrix& vis, const ComplexMatrix& tac,
                double lambda);

struct MffaResult {
  std::optional<ComplexMatrix> lang_bar;
  ComplexMatrix vis_bar;
  ComplexMatrix tac_bar;
};

std::vector<MffaResult> mffa_forward(std::span<const TrainSample> batch,
                                     const MffaParams& params, const DfrftPlan& plan,
                                     double order, AttentionOptions options = {});
std::vector<MffaResult> mffa_forward(std::span<const InferSample> batch,
                                     const MffaParams& params, const DfrftPlan& plan,
                                     double order, AttentionOptions options = {});

}  // namespace omnivat
