#include "omnivat/data.hpp"

#include "omnivat/binary_io.hpp"
#include "omnivat/errors.hpp"

#include <Eigen/QR>

#include <cmath>
#include <map>
#include <random>

namespace omnivat {

namespace {

constexpr char kMagic[] = "OVEM";

RealMatrix gaussian(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RealMatrix m(rows, cols);
  // Column-major fill so the stream order does not depend on storage order.
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  return m;
}

// Orthonormal factor of a with the signs of R's diagonal made positive.
RealMatrix orthonormal_factor(const RealMatrix& a) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Index k = 0; k < a.cols(); ++k) {
    if (r(k, k) < 0) q.col(k) = -q.col(k);
  }
  return q;
}

struct DomainShift {
  RealMatrix rotation;
  RealVector bias;
};

DomainShift draw_shift(std::mt19937_64& rng, Index dim, double shift) {
  const double scale = shift / std::sqrt(static_cast<double>(dim));
  const RealMatrix g = gaussian(rng, dim, dim);
  const RealVector b = gaussian(rng, dim, 1).col(0);
  if (shift == 0.0) return {RealMatrix::Identity(dim, dim), RealVector::Zero(dim)};
  return {orthonormal_factor(RealMatrix::Identity(dim, dim) + scale * g), scale * b};
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.classes < 2) throw ConfigError("classes must be at least 2");
  if (c.dim < 8) throw ConfigError("dim must be at least 8");
  if (c.classes > c.dim) throw ConfigError("classes must not exceed dim");
  if (c.per_class < 1) throw ConfigError("per_class must be positive");
  if (c.targets < 0) throw ConfigError("targets must be nonnegative");
  if (c.lang_per_class < 1) throw ConfigError("lang_per_class must be positive");
  if (!(c.shift >= 0.0) || !std::isfinite(c.shift)) throw ConfigError("shift must be >= 0");
  if (!(c.noise_var >= 0.0) || !std::isfinite(c.noise_var)) {
    throw ConfigError("noise variance must be >= 0");
  }
  if (c.classes > 65535 || c.targets > 65534) throw ConfigError("ids exceed 16 bits");
}

DomainSuite synth_suite(const SynthConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  const Index d = config.dim;
  const RealMatrix prototypes = orthonormal_factor(gaussian(rng, d, config.classes));
  const double sigma = std::sqrt(config.noise_var);
  const Index kept = (d + 1) / 2;

  auto noisy = [&](Index c) {
    return RealVector(prototypes.col(c) + sigma * gaussian(rng, d, 1).col(0));
  };

  DomainSuite suite;
  suite.dim = d;
  suite.classes = config.classes;
  std::uint64_t next_id = 0;
  for (Index dom = 0; dom <= config.targets; ++dom) {
    const DomainShift s = draw_shift(rng, d, config.shift);
    Dataset records;
    for (Index c = 0; c < config.classes; ++c) {
      for (Index i = 0; i < config.per_class; ++i) {
        const RealVector vis = s.rotation * noisy(c) + s.bias;
        RealVector masked = noisy(c);
        masked.tail(d - kept).setZero();
        const RealVector tac = s.rotation * masked + s.bias;
        const auto cat = static_cast<std::uint16_t>(c);
        const auto dm = static_cast<std::uint16_t>(dom);
        records.push_back({vis, cat, dm, Modality::kVis, next_id});
        records.push_back({tac, cat, dm, Modality::kTac, next_id});
        ++next_id;
      }
    }
    if (dom == 0) {
      for (Index c = 0; c < config.classes; ++c) {
        for (Index i = 0; i < config.lang_per_class; ++i) {
          records.push_back(
              {noisy(c), static_cast<std::uint16_t>(c), 0, Modality::kLang, next_id++});
        }
      }
      suite.source = std::move(records);
    } else {
      suite.targets.push_back(std::move(records));
    }
  }
  for (const Dataset& t : suite.targets) {
    for (const LabeledEmbedding& e : t) {
      if (e.modality == Modality::kLang) throw Error("synth_suite: target carries LANG records");
    }
  }
  return suite;
}

std::vector<PairedSample> paired_samples(const Dataset& data) {
  std::map<std::uint64_t, std::pair<const LabeledEmbedding*, const LabeledEmbedding*>> by_id;
  for (const LabeledEmbedding& e : data) {
    if (e.modality == Modality::kLang) continue;
    auto& slot = by_id[e.pair_id];
    auto*& place = e.modality == Modality::kVis ? slot.first : slot.second;
    if (place) {
      throw IncompleteDataError("pair " + std::to_string(e.pair_id) + " has two " +
                                to_string(e.modality) + " records");
    }
    place = &e;
  }
  std::vector<PairedSample> out;
  for (const auto& [id, slot] : by_id) {
    const auto [vis, tac] = slot;
    if (!vis || !tac) {
      throw IncompleteDataError("pair " + std::to_string(id) + " is missing its " +
                                (vis ? "TAC" : "VIS") + " record");
    }
    if (vis->category != tac->category || vis->domain != tac->domain) {
      throw IncompleteDataError("pair " + std::to_string(id) +
                                " mixes categories or domains");
    }
    out.push_back({vis->vector.transpose(), tac->vector.transpose(), vis->category, id});
  }
  return out;
}

std::vector<std::vector<RealMatrix>> language_by_class(const Dataset& data, Index classes) {
  std::vector<std::vector<RealMatrix>> out(classes);
  for (const LabeledEmbedding& e : data) {
    if (e.modality != Modality::kLang) continue;
    if (e.category >= classes) throw RangeError("LANG record category out of range");
    out[e.category].push_back(e.vector.transpose());
  }
  return out;
}

bool is_holdout(std::uint64_t pair_id) { return pair_id % 5 == 4; }

Dataset holdout_split(const Dataset& data, bool holdout) {
  Dataset out;
  for (const LabeledEmbedding& e : data) {
    if (e.modality == Modality::kLang) {
      if (!holdout) out.push_back(e);
      continue;
    }
    if (is_holdout(e.pair_id) == holdout) out.push_back(e);
  }
  return out;
}

std::vector<std::uint8_t> encode_embeddings(std::span<const LabeledEmbedding> records) {
  const Index dim = records.empty() ? 0 : records.front().vector.size();
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kEmbeddingFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.put<std::uint64_t>(records.size());
  for (const LabeledEmbedding& e : records) {
    if (e.vector.size() != dim) throw DimensionError("save_embeddings: records differ in length");
    w.put<std::uint16_t>(e.category);
    w.put<std::uint16_t>(e.domain);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(e.modality));
    w.put<std::uint64_t>(e.pair_id);
    for (Index i = 0; i < dim; ++i) w.put<float>(static_cast<float>(e.vector[i]));
  }
  return w.data();
}

void save_embeddings(const std::filesystem::path& path,
                     std::span<const LabeledEmbedding> records) {
  write_file(path, encode_embeddings(records));
}

Dataset decode_embeddings(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() == 0) throw FormatError("empty embedding file", 0);
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not an OVEM embedding file", 0);
  }
  const std::size_t version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kEmbeddingFormatVersion) {
    throw FormatError("unsupported OVEM version " + std::to_string(version), version_at);
  }
  const auto dim = r.get<std::uint32_t>("dimension");
  const std::size_t count_at = r.offset();
  const auto count = r.get<std::uint64_t>("record count");
  const std::uint64_t record_size = 2 + 2 + 1 + 8 + 4ull * dim;
  if (count > 0 && dim == 0) throw FormatError("zero dimension with records present", count_at);
  if (count > r.remaining() / record_size) {
    throw FormatError("record count " + std::to_string(count) + " exceeds the file size",
                      count_at);
  }
  Dataset out;
  out.reserve(count);
  for (std::uint64_t n = 0; n < count; ++n) {
    LabeledEmbedding e;
    e.category = r.get<std::uint16_t>("category");
    e.domain = r.get<std::uint16_t>("domain");
    const std::size_t mod_at = r.offset();
    const auto mod = r.get<std::uint8_t>("modality");
    if (mod > 2) throw FormatError("invalid modality " + std::to_string(mod), mod_at);
    e.modality = static_cast<Modality>(mod);
    e.pair_id = r.get<std::uint64_t>("pair id");
    e.vector.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      const std::size_t at = r.offset();
      const float v = r.get<float>("vector");
      if (!std::isfinite(v)) throw FormatError("non-finite vector entry", at);
      e.vector[i] = v;
    }
    out.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last record", r.offset());
  return out;
}

Dataset load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file(path));
}

}  // namespace omnivat
