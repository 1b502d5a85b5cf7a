#include "omnivat/cli.hpp"

#include "omnivat/dtg.hpp"
#include "omnivat/errors.hpp"
#include "omnivat/experiment.hpp"
#include "omnivat/metrics.hpp"
#include "omnivat/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace omnivat {

namespace {

using json = nlohmann::json;

std::int64_t parse_count(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

// ---- Flags ----------------------------------------------------------------

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

constexpr FlagSpec kTrainFlags[] = {
    {"--seed", "seed", "Seed for data generation and training"},
    {"--dim", "dim", "Embedding dimension D"},
    {"--expansion", "expansion", "Expansion factor E"},
    {"--depth", "depth", "Tree depth R"},
    {"--lambda", "lambda", "Alignment loss weight"},
    {"--order", "order", "Fractional order: 0.5 (learnable) or fixed:<p>"},
    {"--generator", "generator", "Tree generator: dtg, interp, series, parallel"},
    {"--epochs", "epochs", "Training epochs"},
    {"--batch", "batch", "Mini-batch size"},
    {"--lr", "lr", "Base learning rate"},
    {"--momentum", "momentum", "SGD momentum"},
    {"--warmup", "warmup", "Warm-up fraction of total steps"},
    {"--variant", "variant", "ce-only, +mffa, +dtg or +mffa+dtg"},
    {"--clip-norm", "clip_norm", "Global gradient-norm cap (0 disables)"},
    {"--init-noise", "init_noise", "Std of the identity-init perturbation"},
};

constexpr FlagSpec kSynthFlags[] = {
    {"--classes", "classes", "Number of categories"},
    {"--per-class", "per_class", "Paired samples per category and domain"},
    {"--targets", "targets", "Number of unseen target domains"},
    {"--shift", "shift", "Domain shift strength"},
    {"--noise-var", "noise_var", "Per-coordinate noise variance"},
    {"--lang-per-class", "lang_per_class", "LANG samples per category"},
};

class Flags {
 public:
  void add(CLI::App* app, bool train, bool synth) {
    app->add_option("--config", config_path_, "key=value configuration file");
    if (train || synth) {
      for (const FlagSpec& f : kTrainFlags) {
        const std::string key = f.key;
        if (!train && key != "seed" && key != "dim") continue;
        options_.emplace_back(key, app->add_option(f.flag, values_[key], f.help));
      }
    }
    if (synth) {
      for (const FlagSpec& f : kSynthFlags) {
        options_.emplace_back(f.key, app->add_option(f.flag, values_[f.key], f.help));
      }
    }
    if (train) {
      standard_ = app->add_flag("--standard-attn-scale", "softmax(QK/sqrt(D)) instead of softmax(QK)/sqrt(D)");
    }
  }

  /// Defaults, then the config file, then explicit flags.
  RunConfig resolve() {
    RunConfig c;
    if (!config_path_.empty()) apply_config_file_tracking(c, config_path_);
    for (const auto& [key, opt] : options_) {
      if (opt->count() == 0) continue;
      if (!apply_run_key(c, key, values_[key])) throw ConfigError("unknown key " + key);
      explicit_.insert(key);
    }
    if (standard_ && standard_->count() > 0) {
      c.train.standard_attn_scale = true;
      explicit_.insert("standard_attn_scale");
    }
    return c;
  }

  bool is_set(const std::string& key) const { return explicit_.count(key) > 0; }

 private:
  void apply_config_file_tracking(RunConfig& c, const std::string& path) {
    apply_config_file(c, path);
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      const auto eq = line.find('=');
      if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
      explicit_.insert(trim(line.substr(0, eq)));
    }
  }

  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
  CLI::Option* standard_ = nullptr;
  std::set<std::string> explicit_;
};

json config_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  return {
      {"dim", t.dim},
      {"expansion", t.expansion},
      {"depth", t.depth},
      {"lambda", t.lambda},
      {"order", t.order.value},
      {"order_trainable", t.order.trainable},
      {"batch", t.batch},
      {"epochs", t.epochs},
      {"lr", t.lr},
      {"momentum", t.momentum},
      {"warmup", t.warmup_fraction},
      {"seed", t.seed},
      {"generator", to_string(t.generator)},
      {"standard_attn_scale", t.standard_attn_scale},
      {"variant", to_string(t.variant)},
      {"init_noise", t.init_noise},
      {"clip_norm", t.clip_norm},
      {"classes", c.synth.classes},
      {"per_class", c.synth.per_class},
      {"targets", c.synth.targets},
      {"shift", c.synth.shift},
      {"noise_var", c.synth.noise_var},
      {"lang_per_class", c.synth.lang_per_class},
  };
}

json report_json(const std::string& domain, const EvalReport& r) {
  json per_class = json::array();
  for (const ClassScore& s : r.per_class) per_class.push_back(s.f1);
  return {
      {"domain", domain},
      {"count", r.count},
      {"accuracy", r.accuracy},
      {"macro_f1", r.macro_f1},
      {"per_class_f1", per_class},
      {"cosine_margin", r.cosine_margin},
      {"loss_terms", {{"mma", nullptr}, {"nod", nullptr}, {"ce", r.ce}}},
  };
}

Index class_count(const Dataset& d) {
  int top = -1;
  for (const LabeledEmbedding& e : d) top = std::max(top, static_cast<int>(e.category));
  return top + 1;
}

Index data_dim(const Dataset& d, const std::string& what) {
  if (d.empty()) throw IncompleteDataError(what + " holds no records");
  return d.front().vector.size();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---- Commands ---------------------------------------------------------------

int cmd_synth(Flags& flags, const std::string& out_dir, std::ostream& out) {
  const RunConfig c = flags.resolve();
  if (out_dir.empty()) throw ConfigError("synth needs --out DIR");
  const DomainSuite suite = synth_suite(c.synth);
  std::filesystem::create_directories(out_dir);
  json files = json::array();
  const auto source = std::filesystem::path(out_dir) / "source.ovem";
  save_embeddings(source, suite.source);
  files.push_back(source.string());
  for (std::size_t k = 0; k < suite.targets.size(); ++k) {
    const auto p = std::filesystem::path(out_dir) / ("target_" + std::to_string(k + 1) + ".ovem");
    save_embeddings(p, suite.targets[k]);
    files.push_back(p.string());
  }
  out << json{{"event", "synth"},   {"dim", suite.dim},          {"classes", suite.classes},
              {"seed", c.synth.seed}, {"files", files}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_train(Flags& flags, const std::string& data_path, const std::string& out_path,
              std::ostream& out) {
  RunConfig c = flags.resolve();
  if (out_path.empty()) throw ConfigError("train needs --out FILE");
  if (data_path.empty()) throw ConfigError("train needs --data FILE");
  const Dataset source = load_embeddings(data_path);
  const Index dim = data_dim(source, data_path);
  if (dim != c.train.dim) {
    if (flags.is_set("dim")) {
      throw DimensionError("data has D=" + std::to_string(dim) + " but the configuration asks for " +
                           std::to_string(c.train.dim));
    }
    c.train.dim = dim;
  }
  c.train.validate();
  const Index classes = class_count(source);
  const auto start = std::chrono::steady_clock::now();
  const TrainingSet data = TrainingSet::From(holdout_split(source, false), classes);
  const TrainResult r = train(data, c.train, [&](const EpochLog& l) {
    out << json{{"event", "epoch"},
                {"epoch", l.epoch},
                {"lr", l.lr},
                {"order", l.order},
                {"loss", {{"total", l.mean.total}, {"mma", l.mean.mma}, {"nod", l.mean.nod},
                          {"ce", l.mean.ce}}}}
               .dump()
        << "\n"
        << std::flush;
  });
  save_checkpoint(out_path, r.params, c.train);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << json{{"event", "done"},
              {"checkpoint", out_path},
              {"pairs", data.pairs.size()},
              {"classes", classes},
              {"seconds", round6(seconds)}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::vector<std::string>& targets,
             const std::string& holdout, std::size_t max_pairs, std::uint64_t seed,
             std::ostream& out) {
  if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint FILE");
  if (targets.empty()) throw ConfigError("eval needs at least one target file");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const InferenceModel model = InferenceModel::From(ck.params, ck.config);
  auto check = [&](const Dataset& d, const std::string& path) {
    const Index dim = data_dim(d, path);
    if (dim != ck.config.dim) {
      throw DimensionError(path + " has D=" + std::to_string(dim) + ", the checkpoint expects " +
                           std::to_string(ck.config.dim));
    }
    if (class_count(d) > ck.params.classes) {
      throw DimensionError(path + " has more categories than the checkpoint");
    }
  };
  std::vector<Dataset> loaded;
  for (const std::string& t : targets) {
    loaded.push_back(load_embeddings(t));
    check(loaded.back(), t);
  }
  if (!holdout.empty()) {
    const Dataset src = load_embeddings(holdout);
    check(src, holdout);
    const EvalReport r = evaluate(model, holdout_split(src, true), ck.params.classes, max_pairs, seed);
    json j = report_json(holdout, r);
    j["split"] = "holdout";
    out << j.dump() << "\n";
  }
  double acc = 0, f1 = 0, margin = 0;
  for (std::size_t k = 0; k < loaded.size(); ++k) {
    const EvalReport r = evaluate(model, loaded[k], ck.params.classes, max_pairs, seed);
    json j = report_json(targets[k], r);
    j["split"] = "target";
    out << j.dump() << "\n";
    acc += r.accuracy;
    f1 += r.macro_f1;
    margin += r.cosine_margin;
  }
  const auto n = static_cast<double>(loaded.size());
  out << json{{"average", {{"accuracy", acc / n}, {"macro_f1", f1 / n}, {"cosine_margin", margin / n}}},
              {"domains", loaded.size()}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_check(bool dfrft_only, bool inject_fault, std::ostream& out) {
  std::vector<CheckRow> rows = check_dfrft(inject_fault);
  if (!dfrft_only) {
    for (auto suite : {check_gradients, check_nod, check_tree}) {
      for (CheckRow& r : suite()) rows.push_back(std::move(r));
    }
  }
  std::size_t failed = 0;
  out << std::left << std::setw(10) << "suite" << std::setw(58) << "invariant" << std::setw(14)
      << "measured" << std::setw(12) << "tolerance" << "status\n";
  for (const CheckRow& r : rows) {
    std::ostringstream m, t;
    m << std::scientific << std::setprecision(2) << r.measured;
    t << std::scientific << std::setprecision(0) << r.tolerance;
    out << std::left << std::setw(10) << r.suite << std::setw(58) << r.name << std::setw(14)
        << m.str() << std::setw(12) << t.str() << (r.pass ? "PASS" : "FAIL") << "\n";
    failed += !r.pass;
  }
  out << rows.size() - failed << "/" << rows.size() << " invariants hold\n";
  return failed ? kExitInvariant : kExitOk;
}

int cmd_ablate(Flags& flags, const std::string& variants_arg, const std::string& generators_arg,
               Index seeds, std::ostream& out) {
  const RunConfig base = flags.resolve();
  if (seeds < 1) throw ConfigError("--seeds must be at least 1");
  std::vector<Variant> variants;
  for (const std::string& v : split_list(variants_arg)) variants.push_back(parse_variant(v));
  std::vector<Generator> generators;
  for (const std::string& g : split_list(generators_arg)) generators.push_back(parse_generator(g));
  if (variants.empty()) throw ConfigError("--variants is empty");
  if (generators.empty()) throw ConfigError("--generators is empty");

  struct Cell {
    Variant variant;
    std::optional<Generator> generator;
    double accuracy = 0, f1 = 0, holdout = 0, margin = 0;
  };
  std::vector<Cell> cells;
  for (Variant v : variants) {
    if (uses_dtg(v)) {
      for (Generator g : generators) cells.push_back({v, g});
    } else {
      cells.push_back({v, std::nullopt});
    }
  }
  for (Index s = 0; s < seeds; ++s) {
    RunConfig rc = base;
    rc.synth.seed = base.synth.seed + static_cast<std::uint64_t>(s);
    rc.train.seed = base.train.seed + static_cast<std::uint64_t>(s);
    const DomainSuite suite = synth_suite(rc.synth);
    for (Cell& cell : cells) {
      TrainConfig tc = rc.train;
      tc.variant = cell.variant;
      if (cell.generator) tc.generator = *cell.generator;
      const ExperimentResult r = run_experiment(suite, tc);
      // Counted from the trained tree so a generator that drops nodes shows up.
      const Index nodes =
          uses_dtg(cell.variant)
              ? expand_tree(ComplexMatrix::Zero(1, tc.dim), r.training.params.tree, tc.generator)
                    .node_count()
              : 0;
      cell.accuracy += r.target_accuracy / static_cast<double>(seeds);
      cell.f1 += r.target_macro_f1 / static_cast<double>(seeds);
      cell.holdout += r.holdout.accuracy / static_cast<double>(seeds);
      cell.margin += r.target_margin / static_cast<double>(seeds);
      out << json{{"event", "run"},
                  {"variant", to_string(cell.variant)},
                  {"generator", cell.generator ? json(to_string(*cell.generator)) : json(nullptr)},
                  {"seed", rc.train.seed},
                  {"target_accuracy", r.target_accuracy},
                  {"target_macro_f1", r.target_macro_f1},
                  {"holdout_accuracy", r.holdout.accuracy},
                  {"target_cosine_margin", r.target_margin},
                  {"node_count", nodes},
                  {"seconds", round6(r.seconds)}}
                     .dump()
          << "\n"
          << std::flush;
    }
  }
  json rows = json::array();
  for (const Cell& c : cells) {
    rows.push_back({{"variant", to_string(c.variant)},
                    {"generator", c.generator ? json(to_string(*c.generator)) : json(nullptr)},
                    {"target_accuracy", c.accuracy},
                    {"target_macro_f1", c.f1},
                    {"holdout_accuracy", c.holdout},
                    {"target_cosine_margin", c.margin}});
  }
  out << json{{"event", "summary"},
              {"seeds", seeds},
              {"variant_count", variants.size()},
              {"rows", rows}}
             .dump()
      << "\n";
  return kExitOk;
}

}  // namespace

bool apply_run_key(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "seed") {
    if (!apply_config_key(c.train, key, value)) return false;
    c.synth.seed = c.train.seed;
  } else if (key == "dim") {
    if (!apply_config_key(c.train, key, value)) return false;
    c.synth.dim = c.train.dim;
  } else if (key == "classes") {
    c.synth.classes = parse_count(key, value);
  } else if (key == "per_class") {
    c.synth.per_class = parse_count(key, value);
  } else if (key == "targets") {
    c.synth.targets = parse_count(key, value);
  } else if (key == "lang_per_class") {
    c.synth.lang_per_class = parse_count(key, value);
  } else if (key == "shift") {
    c.synth.shift = parse_real(key, value);
  } else if (key == "noise_var") {
    c.synth.noise_var = parse_real(key, value);
  } else {
    return apply_config_key(c.train, key, value);
  }
  return true;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (!apply_run_key(config, key, trim(line.substr(eq + 1)))) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

std::string run_config_text(const RunConfig& c) {
  std::ostringstream out;
  out << config_text(c.train, c.synth.classes) << "per_class=" << c.synth.per_class << "\n"
      << "targets=" << c.synth.targets << "\n"
      << "shift=" << c.synth.shift << "\n"
      << "noise_var=" << c.synth.noise_var << "\n"
      << "lang_per_class=" << c.synth.lang_per_class << "\n";
  return out.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"OmniVaT: fractional-Fourier visual-tactile domain generalization"};
  app.require_subcommand(1);

  Flags synth_flags, train_flags, ablate_flags, dump_flags;
  std::string synth_out, train_data, train_out, checkpoint, holdout;
  std::vector<std::string> targets;
  std::size_t max_pairs = 2000;
  std::uint64_t eval_seed = 0;
  bool dfrft_only = false, inject_fault = false;
  std::string variants = "ce-only,+mffa,+dtg,+mffa+dtg", generators = "dtg,interp,series,parallel";
  Index seeds = 1;

  auto* synth = app.add_subcommand("synth", "Write a synthetic domain suite as OVEM files");
  synth_flags.add(synth, false, true);
  synth->add_option("--out", synth_out, "Output directory");

  auto* trn = app.add_subcommand("train", "Train on a source OVEM file and write a checkpoint");
  train_flags.add(trn, true, false);
  trn->add_option("--data", train_data, "Source-domain OVEM file");
  trn->add_option("--out", train_out, "Checkpoint path");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on target OVEM files");
  eval->add_option("--checkpoint", checkpoint, "OVAT checkpoint");
  eval->add_option("targets", targets, "Target-domain OVEM files");
  eval->add_option("--holdout", holdout, "Source OVEM file whose held-out pairs are also scored");
  eval->add_option("--max-pairs", max_pairs, "Pairs sampled per group for the cosine margin");
  eval->add_option("--seed", eval_seed, "Seed for cosine-margin pair sampling");

  auto* check = app.add_subcommand("check", "Run the invariant suites");
  check->add_flag("--dfrft-only", dfrft_only, "Only the transform suite");
  check->add_flag("--inject-fault", inject_fault, "Shift one Hermite index before checking");

  auto* ablate = app.add_subcommand("ablate", "Compare variants and tree generators");
  ablate_flags.add(ablate, true, true);
  ablate->add_option("--variants", variants, "Comma-separated variant list");
  ablate->add_option("--generators", generators, "Comma-separated generator list");
  ablate->add_option("--seeds", seeds, "Number of consecutive seeds to average");

  auto* dump = app.add_subcommand("dump-config", "Print the effective configuration as JSON");
  dump_flags.add(dump, true, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(synth_flags, synth_out, out);
    if (*trn) return cmd_train(train_flags, train_data, train_out, out);
    if (*eval) return cmd_eval(checkpoint, targets, holdout, max_pairs, eval_seed, out);
    if (*check) return cmd_check(dfrft_only, inject_fault, out);
    if (*ablate) return cmd_ablate(ablate_flags, variants, generators, seeds, out);
    if (*dump) {
      const RunConfig c = dump_flags.resolve();
      c.train.validate();
      validate(c.synth);
      out << config_json(c).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "missing input: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const FormatError& e) {
    err << "unreadable input: " << e.what() << " (byte " << e.offset() << ")\n";
    return kExitMissingInput;
  } catch (const IncompleteDataError& e) {
    err << "missing input: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const DimensionError& e) {
    err << "incompatible input: " << e.what() << "\n";
    return kExitIncompatible;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitConfig;
}

}  // namespace omnivat
