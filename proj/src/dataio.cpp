#include "ldc/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ldc/bytes.hpp"
#include "ldc/linalg.hpp"
#include "ldc/rng.hpp"

namespace ldc {

namespace {

Vector sphere_point(Rng& rng, std::size_t d, double radius) {
  Vector v(d);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
  } while (n2 == 0.0);
  double s = radius / std::sqrt(n2);
  for (auto& x : v) x *= s;
  return v;
}

// Eigenvectors of a random symmetric matrix give a deterministic rotation.
Matrix random_rotation(Rng& rng, std::size_t d) {
  Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double v = rng.normal();
      a(i, j) = v;
      a(j, i) = v;
    }
  return eigen_symmetric(a).vectors;
}

}  // namespace

SynthResult synth_generate(const SynthSpec& spec) {
  if (spec.n_classes < 1 || spec.dim < 1 || spec.samples_per_class < 1)
    fail(Err::BadSpec, "synth_generate: counts must be >= 1");
  if (!(spec.mean_separation > 0.0) || !(spec.cov_scale > 0.0) || !(spec.cov_anisotropy > 0.0))
    fail(Err::BadSpec, "synth_generate: separation and scales must be > 0");

  const std::size_t d = spec.dim;
  // Radius chosen so random pairs clear the separation with room to spare;
  // typical distance between two uniform sphere points is radius*sqrt(2).
  const double radius = 1.1 * spec.mean_separation;

  Rng rng(derive_seed(spec.seed, 1));
  std::vector<Vector> means;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      Vector cand = sphere_point(rng, d, radius);
      placed = true;
      for (const Vector& m : means) {
        double dist2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double t = cand[j] - m[j];
          dist2 += t * t;
        }
        if (dist2 < spec.mean_separation * spec.mean_separation) {
          placed = false;
          break;
        }
      }
      if (placed) means.push_back(std::move(cand));
    }
    if (!placed)
      fail(Err::PlacementFailure, "synth_generate: class " + std::to_string(c) +
                                      " not placeable after 10000 attempts");
  }

  SynthResult out;
  const double lo = spec.cov_scale / spec.cov_anisotropy;
  const double hi = spec.cov_scale;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    Rng crng(derive_seed(spec.seed, 100 + c));
    Matrix q = random_rotation(crng, d);
    Matrix cov(d, d);
    for (std::size_t k = 0; k < d; ++k) {
      double lambda = d == 1 ? hi : lo + (hi - lo) * double(k) / double(d - 1);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) cov(i, j) += lambda * q(i, k) * q(j, k);
    }
    cov.symmetrize();

    GaussianStats g;
    g.mean = means[c];
    g.cov = std::move(cov);
    out.samples.append(
        sample_gaussian(g, spec.samples_per_class, derive_seed(spec.seed, 1000 + c), int(c)));
    out.truth.push_back(std::move(g));
  }
  return out;
}

const char* few_shot_mode_name(FewShotMode m) {
  return m == FewShotMode::Normal ? "normal" : "outlier";
}

FewShotMode few_shot_mode_from_name(const std::string& name) {
  if (name == "normal") return FewShotMode::Normal;
  if (name == "outlier") return FewShotMode::Outlier;
  fail(Err::BadSpec, "unknown few-shot mode: " + name);
}

namespace {

// k distinct indices from pool, order given by a partial Fisher-Yates pass.
std::vector<std::size_t> pick_without_replacement(std::vector<std::size_t> pool, std::size_t k,
                                                  Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + std::size_t(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

Matrix sample_few_shot(const Matrix& class_samples, std::size_t k, FewShotMode mode,
                       std::uint64_t seed) {
  const std::size_t n = class_samples.rows();
  const std::size_t d = class_samples.cols();
  if (k < 1) fail(Err::BadSpec, "sample_few_shot: k must be >= 1");
  if (n < k) fail(Err::InsufficientSamples, "sample_few_shot: class has fewer than k rows");

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (mode == FewShotMode::Normal) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    chosen = pick_without_replacement(std::move(pool), k, rng);
  } else {
    if (n < 5 * k)
      fail(Err::InsufficientSamples, "sample_few_shot: outlier mode needs >= 5k rows");
    GaussianStats fit = estimate_mean_cov(class_samples);
    Matrix prec = spd_inverse(fit.cov, 1e-9);
    std::vector<std::pair<double, std::size_t>> scored(n);
    Vector delta(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) delta[j] = class_samples(i, j) - fit.mean[j];
      double m2 = 0.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) m2 += delta[a] * prec(a, b) * delta[b];
      scored[i] = {m2, i};
    }
    // Descending distance; index breaks ties so the pool is deterministic.
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    std::vector<std::size_t> pool(n / 5);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = scored[i].second;
    chosen = pick_without_replacement(std::move(pool), k, rng);
  }

  Matrix out(k, d);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = class_samples(chosen[i], j);
  return out;
}

std::vector<std::uint8_t> write_embedding_bytes(const SampleSet& s) {
  if (s.features.rows() != s.labels.size())
    fail(Err::DimensionMismatch, "write_embedding_bytes: label count vs rows");
  for (int l : s.labels)
    if (l < 0) fail(Err::BadSpec, "write_embedding_bytes: negative label");
  ByteWriter w;
  w.magic("LDCE");
  w.u32(1);
  w.u32(std::uint32_t(s.size()));
  w.u32(std::uint32_t(s.dim()));
  for (int l : s.labels) w.u32(std::uint32_t(l));
  for (std::size_t i = 0; i < s.features.size(); ++i) w.f64(s.features.data()[i]);
  return w.take();
}

SampleSet read_embedding_bytes(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.expect_magic("LDCE");
  std::uint32_t version = r.u32();
  if (version != 1)
    fail(Err::BadMagic, "embedding version " + std::to_string(version) + " unsupported");
  std::uint32_t n = r.u32();
  std::uint32_t d = r.u32();
  SampleSet s;
  s.labels.resize(n);
  for (auto& l : s.labels) l = int(r.u32());
  s.features = Matrix(n, d);
  for (std::size_t i = 0; i < s.features.size(); ++i) s.features.data()[i] = r.f64();
  if (!r.done()) fail(Err::TruncatedFile, "embedding blob has trailing bytes");
  return s;
}

std::string write_embedding_csv(const SampleSet& s) {
  if (s.features.rows() != s.labels.size())
    fail(Err::DimensionMismatch, "write_embedding_csv: label count vs rows");
  std::string out = "label";
  for (std::size_t j = 0; j < s.dim(); ++j) out += ",f" + std::to_string(j + 1);
  out += "\n";
  char buf[64];
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += std::to_string(s.labels[i]);
    for (std::size_t j = 0; j < s.dim(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", s.features(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    fail(Err::RaggedCsv, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  if (pos != s.size())
    fail(Err::RaggedCsv, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

SampleSet read_embedding_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(Err::RaggedCsv, "empty csv");
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "label")
    fail(Err::RaggedCsv, "csv header must start with 'label,f1,...'");
  const std::size_t d = header.size() - 1;

  std::vector<int> labels;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != d + 1)
      fail(Err::RaggedCsv, "line " + std::to_string(line_no) + ": expected " +
                               std::to_string(d + 1) + " fields, got " +
                               std::to_string(fields.size()));
    double lv = parse_double(fields[0], line_no);
    if (lv != std::floor(lv) || lv < 0)
      fail(Err::RaggedCsv, "line " + std::to_string(line_no) + ": label must be a non-negative integer");
    labels.push_back(int(lv));
    for (std::size_t j = 1; j < fields.size(); ++j) values.push_back(parse_double(fields[j], line_no));
  }

  SampleSet s;
  s.labels = std::move(labels);
  s.features = Matrix(s.labels.size(), d);
  std::copy(values.begin(), values.end(), s.features.data());
  return s;
}

void write_embedding_file(const std::string& path, const SampleSet& s) {
  bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::IoError, "cannot open for writing: " + path);
  if (csv) {
    std::string text = write_embedding_csv(s);
    out.write(text.data(), std::streamsize(text.size()));
  } else {
    std::vector<std::uint8_t> bytes = write_embedding_bytes(s);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  }
  if (!out) fail(Err::IoError, "write failed: " + path);
}

SampleSet read_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::IoError, "cannot open: " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() >= 4 && raw[0] == 'L' && raw[1] == 'D' && raw[2] == 'C' && raw[3] == 'E') {
    std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
    return read_embedding_bytes(bytes);
  }
  return read_embedding_csv(std::string(raw.begin(), raw.end()));
}

}  // namespace ldc
