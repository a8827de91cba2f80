#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldc/linstats.hpp"

namespace ldc {

// Synthetic benchmark geometry. Defaults match the end-to-end benchmark:
// 20 classes = 12 base + 4 sessions of 2, small enough for sub-minute runs.
struct SynthSpec {
  std::size_t n_classes = 20;
  std::size_t dim = 16;
  std::size_t samples_per_class = 200;
  double mean_separation = 2.5;
  double cov_scale = 1.0;
  double cov_anisotropy = 2.0;
  std::uint64_t seed = 0;
};

struct SynthResult {
  SampleSet samples;                 // labels 0..n_classes-1, contiguous blocks
  std::vector<GaussianStats> truth;  // ground-truth per class
};

// Means rejection-sampled on a sphere until pairwise distances reach
// mean_separation; covariances are random rotations of a linear spectrum in
// [cov_scale/cov_anisotropy, cov_scale].
SynthResult synth_generate(const SynthSpec& spec);

enum class FewShotMode { Normal, Outlier };

const char* few_shot_mode_name(FewShotMode m);
FewShotMode few_shot_mode_from_name(const std::string& name);

// k rows from one class's sample matrix. Normal picks uniformly without
// replacement. Outlier picks uniformly among the top 20% rows by Mahalanobis
// distance to the Gaussian fitted to class_samples, so it needs >= 5k rows.
Matrix sample_few_shot(const Matrix& class_samples, std::size_t k, FewShotMode mode,
                       std::uint64_t seed);

// Binary embedding format "LDCE" v1: u32 n, u32 d, n x u32 labels,
// n*d f64 features, little-endian.
std::vector<std::uint8_t> write_embedding_bytes(const SampleSet& s);
SampleSet read_embedding_bytes(const std::vector<std::uint8_t>& bytes);

// CSV form: one header line "label,f1,...,fd", then one row per sample.
std::string write_embedding_csv(const SampleSet& s);
SampleSet read_embedding_csv(const std::string& text);

// File wrappers. read_embedding_file sniffs the magic and falls back to CSV.
void write_embedding_file(const std::string& path, const SampleSet& s);
SampleSet read_embedding_file(const std::string& path);

}  // namespace ldc
