#include "omnivat/mffa.hpp"

#include "omnivat/errors.hpp"

#include <cmath>

namespace omnivat {

namespace {

RealMatrix noisy_identity(Index n, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, noise);
  RealMatrix m = RealMatrix::Identity(n, n);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] += normal(rng);
  return m;
}

ComplexVar complex_mean_rows(GradTape& tape, const ComplexVar& x) {
  return {tape.mean_rows(x.re), tape.mean_rows(x.im)};
}

ComplexVar complex_add_row(GradTape& tape, const ComplexVar& m, const ComplexVar& row) {
  return {tape.add_row(m.re, row.re), tape.add_row(m.im, row.im)};
}

Var ffn_plane(GradTape& tape, Var x, const MffaVars& p) {
  Var hidden = tape.relu(tape.add_row(tape.matmul(x, p.ffn_w1), p.ffn_b1));
  return tape.add_row(tape.matmul(hidden, p.ffn_w2), p.ffn_b2);
}

void require_row(const RealMatrix& m, Index dim, const char* what) {
  if (m.rows() != 1 || m.cols() != dim) {
    throw IncompleteDataError(std::string("mffa: ") + what + " must be a 1 x " +
                              std::to_string(dim) + " embedding");
  }
}

ComplexMatrix values(const ComplexVar& v) { return {v.re.value(), v.im.value()}; }

}  // namespace

const char* to_string(Modality m) {
  switch (m) {
    case Modality::kVis:
      return "VIS";
    case Modality::kTac:
      return "TAC";
    case Modality::kLang:
      return "LANG";
  }
  return "?";
}

MffaParams MffaParams::Identity(Index dim, Index expansion) {
  MffaParams p;
  p.expand_lang = p.expand_vis = p.expand_tac = RealMatrix::Ones(expansion, 1);
  p.query = p.key = p.value = RealMatrix::Identity(dim, dim);
  p.ffn_w1 = p.ffn_w2 = RealMatrix::Identity(dim, dim);
  p.ffn_b1 = p.ffn_b2 = RealMatrix::Zero(1, dim);
  return p;
}

MffaParams MffaParams::Random(Index dim, Index expansion, double noise, std::mt19937_64& rng) {
  MffaParams p;
  std::uniform_real_distribution<double> around_one(0.5, 1.5);
  for (RealMatrix* e : {&p.expand_lang, &p.expand_vis, &p.expand_tac}) {
    e->resize(expansion, 1);
    for (Index i = 0; i < expansion; ++i) (*e)(i, 0) = around_one(rng);
  }
  p.query = noisy_identity(dim, noise, rng);
  p.key = noisy_identity(dim, noise, rng);
  p.value = noisy_identity(dim, noise, rng);
  p.ffn_w1 = noisy_identity(dim, noise, rng);
  p.ffn_w2 = noisy_identity(dim, noise, rng);
  p.ffn_b1 = RealMatrix::Zero(1, dim);
  p.ffn_b2 = RealMatrix::Zero(1, dim);
  return p;
}

const RealMatrix& MffaParams::expand(Modality m) const {
  switch (m) {
    case Modality::kVis:
      return expand_vis;
    case Modality::kTac:
      return expand_tac;
    case Modality::kLang:
      break;
  }
  return expand_lang;
}

MffaVars MffaVars::Constants(GradTape& tape, const MffaParams& p) {
  return {tape.constant(p.expand_lang), tape.constant(p.expand_vis),
          tape.constant(p.expand_tac),  tape.constant(p.query),
          tape.constant(p.key),         tape.constant(p.value),
          tape.constant(p.ffn_w1),      tape.constant(p.ffn_b1),
          tape.constant(p.ffn_w2),      tape.constant(p.ffn_b2)};
}

Var MffaVars::expand(Modality m) const {
  switch (m) {
    case Modality::kVis:
      return expand_vis;
    case Modality::kTac:
      return expand_tac;
    case Modality::kLang:
      break;
  }
  return expand_lang;
}

ComplexVar frft_process(GradTape& tape, FractionalMatrixCache& cache, Var order,
                        const ComplexVar& embedding, Var expand) {
  if (embedding.re.rows() != 1 || embedding.re.cols() != cache.plan().size()) {
    throw DimensionError("frft_process: embedding must be 1 x N for the plan");
  }
  if (expand.cols() != 1 || expand.rows() < 1) {
    throw DimensionError("frft_process: expansion scalers must be E x 1");
  }
  const ComplexVar expanded{tape.matmul(expand, embedding.re), tape.matmul(expand, embedding.im)};
  return tape.relu(fractional_transform_rows(tape, cache, order, expanded));
}

ComplexVar mean_of_row_means(GradTape& tape, std::span<const ComplexVar> blocks) {
  if (blocks.empty()) throw DegenerateError("global token: no same-label samples");
  std::vector<Var> re, im;
  for (const ComplexVar& b : blocks) {
    re.push_back(tape.mean_rows(b.re));
    im.push_back(tape.mean_rows(b.im));
  }
  if (blocks.size() == 1) return {re[0], im[0]};
  return {tape.mean_rows(tape.concat_rows(re)), tape.mean_rows(tape.concat_rows(im))};
}

ComplexVar fratt(GradTape& tape, const ComplexVar& query, const ComplexVar& features,
                 const ComplexVar& token, const MffaVars& params, AttentionOptions options,
                 AttentionTrace* trace) {
  const Index dim = params.query.rows();
  if (query.re.cols() != dim || features.re.cols() != dim || token.re.cols() != dim ||
      token.re.rows() != 1) {
    throw DimensionError("fratt: feature width must equal D and the token must be 1 x D");
  }
  const ComplexVar keyed = complex_add_row(tape, features, token);
  const ComplexVar q = tape.matmul(query, params.query);
  const ComplexVar k = tape.matmul(keyed, params.key);
  const ComplexVar v = tape.matmul(keyed, params.value);

  // Re(Q K^H) = Qr Kr^T + Qi Ki^T.
  Var scores = tape.add(tape.matmul(q.re, tape.transpose(k.re)),
                        tape.matmul(q.im, tape.transpose(k.im)));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));
  Var weights;
  if (options.standard_scale) {
    weights = tape.softmax_rows(tape.scale(scores, inv_sqrt_d));
    if (trace) {
      for (Index r = 0; r < weights.rows(); ++r) {
        trace->weight_row_sums.push_back(weights.value().row(r).sum());
      }
    }
  } else {
    Var normalized = tape.softmax_rows(scores);
    if (trace) {
      for (Index r = 0; r < normalized.rows(); ++r) {
        trace->weight_row_sums.push_back(normalized.value().row(r).sum());
      }
    }
    weights = tape.scale(normalized, inv_sqrt_d);
  }
  const ComplexVar context{tape.matmul(weights, v.re), tape.matmul(weights, v.im)};
  const ComplexVar pooled = complex_mean_rows(tape, context);
  return {ffn_plane(tape, pooled.re, params), ffn_plane(tape, pooled.im, params)};
}

Var mma_loss(GradTape& tape, const ComplexVar& lang, const ComplexVar& vis,
             const ComplexVar& tac, double lambda) {
  Var l = tape.flatten(lang);
  Var kl_v = tape.kl_softmax(l, tape.flatten(vis));
  Var kl_t = tape.kl_softmax(l, tape.flatten(tac));
  return tape.scale(tape.add(kl_v, kl_t), lambda);
}

std::vector<MffaOutput> mffa_forward_train(GradTape& tape, FractionalMatrixCache& cache,
                                           Var order, const MffaVars& params,
                                           std::span<const TrainSample> batch,
                                           AttentionOptions options) {
  if (batch.empty()) throw DegenerateError("mffa_forward_train: empty batch");
  const Index dim = cache.plan().size();
  for (const TrainSample& s : batch) {
    require_row(s.vis, dim, "VIS");
    require_row(s.tac, dim, "TAC");
    require_row(s.lang, dim, "LANG");
  }
  const std::size_t n = batch.size();

  auto same_label_token = [&](const std::vector<ComplexVar>& blocks, std::size_t i) {
    std::vector<ComplexVar> members;
    for (std::size_t j = 0; j < n; ++j) {
      if (batch[j].label == batch[i].label) members.push_back(blocks[j]);
    }
    return mean_of_row_means(tape, members);
  };

  std::vector<ComplexVar> lang_features;
  for (const TrainSample& s : batch) {
    const ComplexVar e{tape.constant(s.lang), tape.constant(RealMatrix::Zero(1, dim))};
    lang_features.push_back(frft_process(tape, cache, order, e, params.expand_lang));
  }
  std::vector<MffaOutput> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ComplexVar token = same_label_token(lang_features, i);
    out[i].lang_bar = fratt(tape, lang_features[i], lang_features[i], token, params, options);
  }

  for (Modality m : {Modality::kVis, Modality::kTac}) {
    std::vector<ComplexVar> blocks;
    for (std::size_t i = 0; i < n; ++i) {
      const RealMatrix& e = m == Modality::kVis ? batch[i].vis : batch[i].tac;
      const ComplexVar guided{tape.add(out[i].lang_bar.re, tape.constant(e)), out[i].lang_bar.im};
      blocks.push_back(frft_process(tape, cache, order, guided, params.expand(m)));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const ComplexVar token = same_label_token(blocks, i);
      const ComplexVar bar = fratt(tape, out[i].lang_bar, blocks[i], token, params, options);
      if (m == Modality::kVis) {
        out[i].vis_feature = blocks[i];
        out[i].vis_token = token;
        out[i].vis_bar = bar;
      } else {
        out[i].tac_feature = blocks[i];
        out[i].tac_token = token;
        out[i].tac_bar = bar;
      }
    }
  }
  return out;
}

MffaOutput mffa_forward_infer(GradTape& tape, FractionalMatrixCache& cache, Var order,
                              const MffaVars& params, const InferSample& sample,
                              AttentionOptions options) {
  const Index dim = cache.plan().size();
  require_row(sample.vis, dim, "VIS");
  require_row(sample.tac, dim, "TAC");
  MffaOutput out;
  for (Modality m : {Modality::kVis, Modality::kTac}) {
    const RealMatrix& e = m == Modality::kVis ? sample.vis : sample.tac;
    const ComplexVar input{tape.constant(e), tape.constant(RealMatrix::Zero(1, dim))};
    const ComplexVar block = frft_process(tape, cache, order, input, params.expand(m));
    const ComplexVar token = complex_mean_rows(tape, block);
    const ComplexVar bar = fratt(tape, block, block, token, params, options);
    if (m == Modality::kVis) {
      out.vis_feature = block;
      out.vis_token = token;
      out.vis_bar = bar;
    } else {
      out.tac_feature = block;
      out.tac_token = token;
      out.tac_bar = bar;
    }
  }
  return out;
}

// ---- Value-level wrappers ----------------------------------------------

FractionalFeature frft_process(const ComplexMatrix& embedding, const RealMatrix& expand,
                               const DfrftPlan& plan, double order, Modality modality) {
  GradTape tape;
  FractionalMatrixCache cache(plan);
  Var p = tape.constant(RealMatrix::Constant(1, 1, order));
  const ComplexVar out =
      frft_process(tape, cache, p, tape.complex_constant(embedding), tape.constant(expand));
  return {values(out), modality};
}

ComplexMatrix global_class_token(std::span<const FractionalFeature> batch,
                                 std::span<const int> labels, int target_label) {
  if (batch.size() != labels.size()) {
    throw DimensionError("global_class_token: batch and labels differ in length");
  }
  ComplexMatrix sum;
  int count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (labels[i] != target_label) continue;
    const ComplexMatrix avg{batch[i].values.re.colwise().mean(),
                            batch[i].values.im.colwise().mean()};
    sum = count == 0 ? avg : sum + avg;
    ++count;
  }
  if (count == 0) throw DegenerateError("global_class_token: no sample shares the label");
  return {sum.re / count, sum.im / count};
}

ComplexMatrix global_class_token(const FractionalFeature& target) {
  return {target.values.re.colwise().mean(), target.values.im.colwise().mean()};
}

ComplexMatrix fratt(const ComplexMatrix& query, const FractionalFeature& features,
                    const ComplexMatrix& token, const MffaParams& params,
                    AttentionOptions options, AttentionTrace* trace) {
  GradTape tape;
  const MffaVars vars = MffaVars::Constants(tape, params);
  return values(fratt(tape, tape.complex_constant(query), tape.complex_constant(features.values),
                      tape.complex_constant(token), vars, options, trace));
}

FractionalFeature guided_project(const std::optional<ComplexMatrix>& lang_bar,
                                 const RealMatrix& embedding, const RealMatrix& expand,
                                 const DfrftPlan& plan, double order, Modality modality) {
  ComplexMatrix input = ComplexMatrix::FromReal(embedding);
  if (lang_bar) {
    if (lang_bar->rows() != input.rows() || lang_bar->cols() != input.cols()) {
      throw DimensionError("guided_project: guidance and embedding shapes differ");
    }
    input = input + *lang_bar;
  }
  return frft_process(input, expand, plan, order, modality);
}

double mma_loss(const ComplexMatrix& lang, const ComplexMatrix& vis, const ComplexMatrix& tac,
                double lambda) {
  GradTape tape;
  return mma_loss(tape, tape.complex_constant(lang), tape.complex_constant(vis),
                  tape.complex_constant(tac), lambda)
      .scalar();
}

std::vector<MffaResult> mffa_forward(std::span<const TrainSample> batch,
                                     const MffaParams& params, const DfrftPlan& plan,
                                     double order, AttentionOptions options) {
  GradTape tape;
  FractionalMatrixCache cache(plan);
  const MffaVars vars = MffaVars::Constants(tape, params);
  Var p = tape.constant(RealMatrix::Constant(1, 1, order));
  std::vector<MffaResult> results;
  for (const MffaOutput& o : mffa_forward_train(tape, cache, p, vars, batch, options)) {
    results.push_back({values(o.lang_bar), values(o.vis_bar), values(o.tac_bar)});
  }
  return results;
}

std::vector<MffaResult> mffa_forward(std::span<const InferSample> batch,
                                     const MffaParams& params, const DfrftPlan& plan,
                                     double order, AttentionOptions options) {
  std::vector<MffaResult> results;
  FractionalMatrixCache cache(plan);
  for (const InferSample& s : batch) {
    GradTape tape;
    const MffaVars vars = MffaVars::Constants(tape, params);
    Var p = tape.constant(RealMatrix::Constant(1, 1, order));
    const MffaOutput o = mffa_forward_infer(tape, cache, p, vars, s, options);
    results.push_back({std::nullopt, values(o.vis_bar), values(o.tac_bar)});
  }
  return results;
}

}  // namespace omnivat
