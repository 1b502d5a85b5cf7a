#include "omnivat/model.hpp"

#include "omnivat/binary_io.hpp"
#include "omnivat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

namespace omnivat {

namespace {

constexpr char kMagic[] = "OVAT";

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  if (used != value.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  if (used != value.size()) throw ConfigError(key + ": expected an integer, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ComplexVar real_feature(GradTape& tape, const RealMatrix& e) {
  return {tape.constant(e), tape.constant(RealMatrix::Zero(e.rows(), e.cols()))};
}

Var batch_mean(GradTape& tape, const std::vector<Var>& terms) {
  return tape.mean_rows(tape.concat_rows(terms));
}

int argmax(const RealMatrix& row) {
  Index best = 0;
  for (Index c = 1; c < row.cols(); ++c) {
    if (row(0, c) > row(0, best)) best = c;
  }
  return static_cast<int>(best);
}

Prediction infer_with(const InferenceModel& model, FractionalMatrixCache* cache,
                      const InferSample& sample) {
  GradTape tape;
  ComplexVar vis, tac;
  if (uses_mffa(model.variant)) {
    const MffaVars vars = MffaVars::Constants(tape, *model.mffa);
    Var p = tape.constant(RealMatrix::Constant(1, 1, model.order));
    const MffaOutput out = mffa_forward_infer(tape, *cache, p, vars, sample, model.attention);
    vis = out.vis_bar;
    tac = out.tac_bar;
  } else {
    vis = real_feature(tape, sample.vis);
    tac = real_feature(tape, sample.tac);
  }
  Prediction pred;
  pred.logits = classify(tape, vis, tac, tape.constant(*model.classifier),
                         tape.constant(*model.bias))
                    .value();
  pred.label = argmax(pred.logits);
  const Var parts[] = {tape.flatten(vis), tape.flatten(tac)};
  pred.features = tape.concat_cols(parts).value();
  return pred;
}

}  // namespace

double clip_global_norm(std::span<RealMatrix> grads, double max_norm) {
  double sq = 0;
  for (const RealMatrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    for (RealMatrix& g : grads) g *= max_norm / norm;
  }
  return norm;
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kCeOnly:
      return "ce-only";
    case Variant::kMffa:
      return "+mffa";
    case Variant::kDtg:
      return "+dtg";
    case Variant::kFull:
      return "+mffa+dtg";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kCeOnly, Variant::kMffa, Variant::kDtg, Variant::kFull}) {
    if (name == to_string(v)) return v;
  }
  if (name == "full") return Variant::kFull;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected ce-only, +mffa, +dtg, +mffa+dtg or full)");
}

bool uses_mffa(Variant v) { return v == Variant::kMffa || v == Variant::kFull; }
bool uses_dtg(Variant v) { return v == Variant::kDtg || v == Variant::kFull; }

void TrainConfig::validate() const {
  if (dim < 2) throw ConfigError("dim must be at least 2");
  if (expansion < 1) throw ConfigError("expansion must be at least 1");
  if (depth < 1 || depth > 10) throw ConfigError("depth must be in 1..10");
  if (lambda < 0) throw ConfigError("lambda must be nonnegative");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (!(lr >= 0)) throw ConfigError("lr must be nonnegative");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
  if (!(warmup_fraction >= 0 && warmup_fraction < 1)) {
    throw ConfigError("warmup must be in [0, 1)");
  }
  if (!(init_noise >= 0)) throw ConfigError("init_noise must be nonnegative");
  if (!(clip_norm >= 0)) throw ConfigError("clip_norm must be nonnegative");
}

// ---- Parameters -----------------------------------------------------------

ModelParams ModelParams::Init(const TrainConfig& config, Index classes) {
  config.validate();
  if (classes < 2) throw ConfigError("need at least 2 classes");
  std::seed_seq seq{config.seed, std::uint64_t{0x1417}};
  std::mt19937_64 rng(seq);
  ModelParams p;
  p.classes = classes;
  p.mffa = MffaParams::Random(config.dim, config.expansion, config.init_noise, rng);
  p.tree = TreeWeights::Random(config.dim, config.depth, 0.02, rng);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(2.0 * config.dim));
  p.classifier.resize(2 * config.dim, classes);
  for (Index i = 0; i < p.classifier.size(); ++i) p.classifier.data()[i] = normal(rng);
  p.bias = RealMatrix::Zero(1, classes);
  p.order = RealMatrix::Constant(1, 1, config.order.value);
  p.order_trainable = config.order.trainable;
  for (const auto& [name, t] : p.tensors()) {
    p.momentum.push_back(RealMatrix::Zero(t->rows(), t->cols()));
  }
  return p;
}

std::vector<std::pair<std::string, RealMatrix*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, RealMatrix*>> out{
      {"mffa.expand_lang", &mffa.expand_lang},
      {"mffa.expand_vis", &mffa.expand_vis},
      {"mffa.expand_tac", &mffa.expand_tac},
      {"mffa.query", &mffa.query},
      {"mffa.key", &mffa.key},
      {"mffa.value", &mffa.value},
      {"mffa.ffn_w1", &mffa.ffn_w1},
      {"mffa.ffn_b1", &mffa.ffn_b1},
      {"mffa.ffn_w2", &mffa.ffn_w2},
      {"mffa.ffn_b2", &mffa.ffn_b2},
  };
  for (std::size_t k = 0; k < tree.matrices.size(); ++k) {
    out.emplace_back("tree." + std::to_string(k), &tree.matrices[k]);
  }
  out.emplace_back("classifier.weight", &classifier);
  out.emplace_back("classifier.bias", &bias);
  out.emplace_back("order", &order);
  return out;
}

std::vector<std::pair<std::string, const RealMatrix*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const RealMatrix*>> out;
  for (const auto& [name, t] : const_cast<ModelParams*>(this)->tensors()) {
    out.emplace_back(name, t);
  }
  return out;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

InferenceModel InferenceModel::From(const ModelParams& params, const TrainConfig& config) {
  return {config.variant, &params.mffa, &params.classifier, &params.bias, params.order(0, 0),
          config.attention()};
}

ModelVars ModelVars::Leaves(GradTape& tape, const ModelParams& params) {
  std::vector<Var> list;
  for (const auto& [name, t] : params.tensors()) list.push_back(tape.leaf(*t));
  return FromList(list, params.tree.depth);
}

ModelVars ModelVars::FromList(const std::vector<Var>& list, Index depth) {
  const std::size_t trees = TreeWeights::count_for(depth);
  if (list.size() != 10 + trees + 3) throw DimensionError("ModelVars: wrong tensor count");
  ModelVars v;
  v.mffa = {list[0], list[1], list[2], list[3], list[4],
            list[5], list[6], list[7], list[8], list[9]};
  v.tree.assign(list.begin() + 10, list.begin() + 10 + static_cast<std::ptrdiff_t>(trees));
  v.classifier = list[10 + trees];
  v.bias = list[11 + trees];
  v.order = list[12 + trees];
  v.all = list;
  return v;
}

// ---- Forward and loss -----------------------------------------------------

Var classify(GradTape& tape, const ComplexVar& vis, const ComplexVar& tac, Var classifier,
             Var bias) {
  if (vis.re.rows() != 1 || tac.re.rows() != 1 || vis.re.cols() != tac.re.cols() ||
      classifier.rows() != 2 * vis.re.cols() || bias.cols() != classifier.cols()) {
    throw DimensionError("classify: features must be 1 x D with a 2D x C classifier");
  }
  Var lv = tape.add(tape.matmul(tape.flatten(vis), classifier), bias);
  Var lt = tape.add(tape.matmul(tape.flatten(tac), classifier), bias);
  return tape.scale(tape.add(lv, lt), 0.5);
}

RealMatrix classify(const ComplexMatrix& vis, const ComplexMatrix& tac,
                    const RealMatrix& classifier, const RealMatrix& bias) {
  GradTape tape;
  return classify(tape, tape.complex_constant(vis), tape.complex_constant(tac),
                  tape.constant(classifier), tape.constant(bias))
      .value();
}

LossTerms joint_loss(GradTape& tape, FractionalMatrixCache& cache, const ModelVars& vars,
                     std::span<const TrainSample> batch, const TrainConfig& config) {
  if (batch.empty()) throw DegenerateError("joint_loss: empty batch");
  std::vector<MffaOutput> outs;
  if (uses_mffa(config.variant)) {
    outs = mffa_forward_train(tape, cache, vars.order, vars.mffa, batch, config.attention());
  }
  std::vector<Var> mma, nod, ce;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ComplexVar v, t, l;
    if (uses_mffa(config.variant)) {
      v = outs[i].vis_bar;
      t = outs[i].tac_bar;
      l = outs[i].lang_bar;
      mma.push_back(mma_loss(tape, l, v, t, config.lambda));
    } else {
      v = real_feature(tape, batch[i].vis);
      t = real_feature(tape, batch[i].tac);
      l = real_feature(tape, batch[i].lang);
    }
    ComplexVar vh = v, th = t;
    if (uses_dtg(config.variant)) {
      const ComplexVar root = tape.add(tape.add(v, t), l);
      const TreeLayers tree = expand_tree(tape, root, vars.tree, config.depth, config.generator);
      nod.push_back(nod_loss(tape, tree));
      std::tie(vh, th) = enhance(tape, tree, v, t);
    }
    ce.push_back(tape.softmax_cross_entropy(classify(tape, vh, th, vars.classifier, vars.bias),
                                            batch[i].label));
  }
  LossTerms terms;
  const Var zero = tape.constant(RealMatrix::Zero(1, 1));
  terms.mma = mma.empty() ? zero : batch_mean(tape, mma);
  terms.nod = nod.empty() ? zero : batch_mean(tape, nod);
  terms.ce = batch_mean(tape, ce);
  terms.total = tape.add(tape.add(terms.mma, terms.nod), terms.ce);
  return terms;
}

// ---- Optimisation ---------------------------------------------------------

Index warmup_steps(Index total_steps, const TrainConfig& config) {
  return static_cast<Index>(std::floor(config.warmup_fraction * static_cast<double>(total_steps)));
}

double lr_schedule(Index step, Index total_steps, const TrainConfig& config) {
  if (step < 0) throw RangeError("lr_schedule: negative step");
  if (step >= total_steps) return 0.0;
  const Index w = warmup_steps(total_steps, config);
  if (step < w) return config.lr * static_cast<double>(step) / static_cast<double>(w);
  const double progress =
      static_cast<double>(step - w) / static_cast<double>(total_steps - w);
  return config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void sgd_step(ModelParams& params, std::span<const RealMatrix> grads, double lr, double momentum) {
  auto tensors = params.tensors();
  if (grads.size() != tensors.size()) throw DimensionError("sgd_step: gradient count mismatch");
  if (params.momentum.size() != tensors.size()) {
    throw DimensionError("sgd_step: momentum buffers missing");
  }
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    RealMatrix& p = *tensors[k].second;
    if (grads[k].rows() != p.rows() || grads[k].cols() != p.cols()) {
      throw DimensionError("sgd_step: gradient shape mismatch for " + tensors[k].first);
    }
    if (&p == &params.order && !params.order_trainable) continue;
    RealMatrix& buf = params.momentum[k];
    buf = momentum * buf + grads[k];
    p -= lr * buf;
  }
}

TrainingSet TrainingSet::From(const Dataset& source, Index classes) {
  TrainingSet set;
  set.classes = classes;
  set.pairs = paired_samples(source);
  set.language = language_by_class(source, classes);
  if (set.pairs.empty()) throw IncompleteDataError("training set has no VIS/TAC pairs");
  for (const PairedSample& p : set.pairs) {
    if (p.label < 0 || p.label >= classes) throw RangeError("pair category out of range");
    if (set.language[p.label].empty()) {
      throw IncompleteDataError("category " + std::to_string(p.label) +
                                " has no LANG embeddings");
    }
  }
  return set;
}

TrainResult train(const TrainingSet& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  return train_from(ModelParams::Init(config, data.classes), data, config, on_epoch);
}

TrainResult train_from(ModelParams params, const TrainingSet& data, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  config.validate();
  if (data.pairs.empty()) throw IncompleteDataError("training set has no VIS/TAC pairs");
  const Index n = static_cast<Index>(data.pairs.size());
  for (const PairedSample& p : data.pairs) {
    if (p.vis.cols() != config.dim || p.tac.cols() != config.dim) {
      throw DimensionError("training data dimension differs from the model's");
    }
  }
  const Index per_epoch = (n + config.batch - 1) / config.batch;
  const Index total = per_epoch * config.epochs;
  std::seed_seq seq{config.seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  const DfrftPlan plan(config.dim);

  TrainResult result;
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  Index step = 0;
  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    for (Index start = 0; start < n; start += config.batch) {
      const Index stop = std::min(n, start + config.batch);
      std::vector<TrainSample> batch;
      for (Index i = start; i < stop; ++i) {
        const PairedSample& p = data.pairs[order[static_cast<std::size_t>(i)]];
        const auto& pool = data.language[static_cast<std::size_t>(p.label)];
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        batch.push_back({p.vis, p.tac, pool[pick(rng)], p.label});
      }
      const double lr = lr_schedule(step, total, config);
      GradTape tape;
      FractionalMatrixCache cache(plan);
      const ModelVars vars = ModelVars::Leaves(tape, params);
      const LossTerms terms = joint_loss(tape, cache, vars, batch, config);
      tape.backward(terms.total);
      std::vector<RealMatrix> grads;
      for (const Var& v : vars.all) grads.push_back(tape.grad(v));
      clip_global_norm(grads, config.clip_norm);
      sgd_step(params, grads, lr, config.momentum);
      log.mean.mma += terms.mma.scalar();
      log.mean.nod += terms.nod.scalar();
      log.mean.ce += terms.ce.scalar();
      log.mean.total += terms.total.scalar();
      log.lr = lr;
      ++step;
    }
    log.mean.mma /= static_cast<double>(per_epoch);
    log.mean.nod /= static_cast<double>(per_epoch);
    log.mean.ce /= static_cast<double>(per_epoch);
    log.mean.total /= static_cast<double>(per_epoch);
    log.order = params.order(0, 0);
    if (!params.order.allFinite()) throw Error("training diverged");
    if (on_epoch) on_epoch(log);
    result.log.push_back(log);
  }
  result.params = std::move(params);
  return result;
}

Prediction infer_one(const InferenceModel& model, const InferSample& sample) {
  const DfrftPlan plan(model.classifier->rows() / 2);
  FractionalMatrixCache cache(plan);
  return infer_with(model, &cache, sample);
}

std::vector<Prediction> infer(const InferenceModel& model, std::span<const InferSample> samples) {
  const DfrftPlan plan(model.classifier->rows() / 2);
  FractionalMatrixCache cache(plan);
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (const InferSample& s : samples) out.push_back(infer_with(model, &cache, s));
  return out;
}

// ---- Config text and checkpoints -----------------------------------------

bool apply_config_key(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "dim") {
    c.dim = parse_int(key, value);
  } else if (key == "expansion") {
    c.expansion = parse_int(key, value);
  } else if (key == "depth") {
    c.depth = parse_int(key, value);
  } else if (key == "lambda") {
    c.lambda = parse_double(key, value);
  } else if (key == "order") {
    c.order = FractionalOrder::Parse(value);
  } else if (key == "batch") {
    c.batch = parse_int(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_int(key, value);
  } else if (key == "lr") {
    c.lr = parse_double(key, value);
  } else if (key == "momentum") {
    c.momentum = parse_double(key, value);
  } else if (key == "warmup") {
    c.warmup_fraction = parse_double(key, value);
  } else if (key == "seed") {
    const std::int64_t s = parse_int(key, value);
    if (s < 0) throw ConfigError("seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "generator") {
    c.generator = parse_generator(value);
  } else if (key == "standard_attn_scale") {
    c.standard_attn_scale = parse_bool(key, value);
  } else if (key == "variant") {
    c.variant = parse_variant(value);
  } else if (key == "init_noise") {
    c.init_noise = parse_double(key, value);
  } else if (key == "clip_norm") {
    c.clip_norm = parse_double(key, value);
  } else {
    return false;
  }
  return true;
}

std::string config_text(const TrainConfig& c, Index classes) {
  std::ostringstream out;
  out << "classes=" << classes << "\n"
      << "dim=" << c.dim << "\n"
      << "expansion=" << c.expansion << "\n"
      << "depth=" << c.depth << "\n"
      << "lambda=" << format_double(c.lambda) << "\n"
      << "order=" << c.order.ToString() << "\n"
      << "batch=" << c.batch << "\n"
      << "epochs=" << c.epochs << "\n"
      << "lr=" << format_double(c.lr) << "\n"
      << "momentum=" << format_double(c.momentum) << "\n"
      << "warmup=" << format_double(c.warmup_fraction) << "\n"
      << "seed=" << c.seed << "\n"
      << "generator=" << to_string(c.generator) << "\n"
      << "standard_attn_scale=" << (c.standard_attn_scale ? "true" : "false") << "\n"
      << "variant=" << to_string(c.variant) << "\n"
      << "init_noise=" << format_double(c.init_noise) << "\n"
      << "clip_norm=" << format_double(c.clip_norm) << "\n";
  return out.str();
}

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const TrainConfig& config) {
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string text = config_text(config, params.classes);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  const auto tensors = params.tensors();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(2 * tensors.size()));
  auto put_tensor = [&w](const std::string& name, const RealMatrix& m) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.put<std::uint32_t>(2);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) w.put<double>(m.data()[i]);
  };
  for (const auto& [name, t] : tensors) put_tensor(name, *t);
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    put_tensor("momentum/" + tensors[k].first, params.momentum[k]);
  }
  return w.data();
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const TrainConfig& config) {
  write_file(path, encode_checkpoint(params, config));
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() == 0) throw FormatError("empty checkpoint file", 0);
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not an OVAT checkpoint", 0);
  }
  const std::size_t version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  const auto text_len = r.get<std::uint32_t>("config length");
  const std::size_t text_at = r.offset();
  const std::string text = r.bytes(text_len, "config block");

  Checkpoint ck;
  Index classes = 0;
  std::istringstream lines(text);
  std::string line;
  try {
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
      const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      if (key == "classes") {
        classes = parse_int(key, value);
      } else if (!apply_config_key(ck.config, key, value)) {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
    ck.params = ModelParams::Init(ck.config, classes);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad config block: ") + e.what(), text_at);
  }

  std::map<std::string, RealMatrix*> slots;
  auto tensors = ck.params.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    slots[tensors[k].first] = tensors[k].second;
    slots["momentum/" + tensors[k].first] = &ck.params.momentum[k];
  }
  const std::size_t count_at = r.offset();
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != slots.size()) {
    throw FormatError("expected " + std::to_string(slots.size()) + " tensors, found " +
                          std::to_string(count),
                      count_at);
  }
  std::map<std::string, bool> seen;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::size_t name_at = r.offset();
    const auto name_len = r.get<std::uint32_t>("name length");
    const std::string name = r.bytes(name_len, "tensor name");
    auto it = slots.find(name);
    if (it == slots.end()) throw FormatError("unknown tensor '" + name + "'", name_at);
    if (seen[name]) throw FormatError("duplicate tensor '" + name + "'", name_at);
    seen[name] = true;
    const std::size_t rank_at = r.offset();
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank != 2) throw FormatError("tensor rank must be 2", rank_at);
    const auto rows = r.get<std::uint64_t>("rows");
    const auto cols = r.get<std::uint64_t>("cols");
    RealMatrix& dst = *it->second;
    if (rows != static_cast<std::uint64_t>(dst.rows()) ||
        cols != static_cast<std::uint64_t>(dst.cols())) {
      throw FormatError("tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", config implies " +
                            std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()),
                        rank_at);
    }
    for (Index i = 0; i < dst.size(); ++i) dst.data()[i] = r.get<double>("tensor payload");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last tensor", r.offset());
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace omnivat
