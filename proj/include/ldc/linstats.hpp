#pragma once

#include <cstdint>

#include "ldc/linalg.hpp"
#include "ldc/matrix.hpp"

namespace ldc {

struct GaussianStats {
  Vector mean;
  Matrix cov;

  std::size_t dim() const { return mean.size(); }
};

// The single stored covariance plus the seen-class count. Serialized size
// depends on the dimension only; that is the point of the whole method.
struct SharedCovariance {
  Matrix sigma;
  std::int64_t n_classes = 0;

  static SharedCovariance zero(std::size_t d) { return {Matrix(d, d), 0}; }
  std::size_t dim() const { return sigma.rows(); }
};

struct SampleSet {
  Matrix features;          // n x d
  std::vector<int> labels;  // n class ids, each >= 0

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  void append(const SampleSet& other);
};

// Arithmetic mean and population covariance (divisor n) of the rows.
GaussianStats estimate_mean_cov(const Matrix& samples);

// Running class-count-weighted mean of per-class covariances:
// sigma' = sigma * N/(N+k) + mean(per-class covs) * k/(N+k).
// Single-row classes contribute a zero matrix and are flagged on stderr.
SharedCovariance update_shared_cov(const SharedCovariance& prev,
                                   const std::vector<Matrix>& new_class_samples);

// Rows are mean + L u with u standard normal; L from cholesky_psd.
SampleSet sample_gaussian(const GaussianStats& stats, std::size_t n, std::uint64_t rng_seed,
                          int label = 0, double jitter_start = 1e-9);

enum class DivergenceKind { KL, JS, Hellinger, W2 };

const char* divergence_name(DivergenceKind k);
DivergenceKind divergence_from_name(const std::string& name);

// Closed-form divergences between Gaussians. JS uses the moment-matched
// midpoint Gaussian (the true JS between Gaussians has no closed form);
// W2 is the Bures 2-Wasserstein distance.
double gaussian_divergence(DivergenceKind kind, const GaussianStats& p, const GaussianStats& q);

}  // namespace ldc
