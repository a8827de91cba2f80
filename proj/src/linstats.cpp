#include "ldc/linstats.hpp"

#include <cmath>
#include <cstdio>

#include "ldc/rng.hpp"

namespace ldc {

void SampleSet::append(const SampleSet& other) {
  if (other.size() == 0) return;
  if (features.cols() == 0 && labels.empty()) {
    *this = other;
    return;
  }
  if (other.dim() != dim()) fail(Err::DimensionMismatch, "append: feature width differs");
  Matrix merged(features.rows() + other.features.rows(), features.cols());
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = 0; j < features.cols(); ++j) merged(i, j) = features(i, j);
  for (std::size_t i = 0; i < other.features.rows(); ++i)
    for (std::size_t j = 0; j < features.cols(); ++j)
      merged(features.rows() + i, j) = other.features(i, j);
  features = std::move(merged);
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

GaussianStats estimate_mean_cov(const Matrix& samples) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  if (n == 0 || d == 0) fail(Err::EmptyInput, "estimate_mean_cov: no samples");
  if (!samples.all_finite()) fail(Err::NonFinite, "estimate_mean_cov: non-finite entry");

  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) kern::vadd(samples.row(i), mean.data(), d);
  kern::scale(1.0 / double(n), mean.data(), d);

  // Two-pass: center first, then accumulate outer products with divisor n.
  Matrix cov(d, d);
  Vector centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = samples(i, j) - mean[j];
    rank1_update(cov, 1.0 / double(n), centered.data(), centered.data());
  }
  cov.symmetrize();
  return {std::move(mean), std::move(cov)};
}

SharedCovariance update_shared_cov(const SharedCovariance& prev,
                                   const std::vector<Matrix>& new_class_samples) {
  if (new_class_samples.empty()) fail(Err::EmptyInput, "update_shared_cov: no new classes");
  const std::size_t d = prev.dim();
  Matrix batch_mean(d, d);
  for (const Matrix& cls : new_class_samples) {
    if (cls.cols() != d) fail(Err::DimensionMismatch, "update_shared_cov: class dim differs");
    if (cls.rows() == 0) fail(Err::EmptyInput, "update_shared_cov: empty class");
    if (cls.rows() == 1) {
      std::fprintf(stderr, "[linstats] single-sample class contributes zero covariance\n");
      continue;  // zero matrix contribution
    }
    batch_mean += estimate_mean_cov(cls).cov;
  }
  const double k = double(new_class_samples.size());
  batch_mean *= 1.0 / k;

  const double n_prev = double(prev.n_classes);
  const double n_new = n_prev + k;
  SharedCovariance out;
  out.sigma = prev.sigma;
  out.sigma *= n_prev / n_new;
  batch_mean *= k / n_new;
  out.sigma += batch_mean;
  out.sigma.symmetrize();
  out.n_classes = prev.n_classes + std::int64_t(new_class_samples.size());
  return out;
}

SampleSet sample_gaussian(const GaussianStats& stats, std::size_t n, std::uint64_t rng_seed,
                          int label, double jitter_start) {
  if (n == 0) fail(Err::EmptyInput, "sample_gaussian: n = 0");
  const std::size_t d = stats.dim();
  const Matrix lower = cholesky_psd(stats.cov, jitter_start).lower;

  Rng rng(rng_seed);
  SampleSet out;
  out.features = Matrix(n, d);
  out.labels.assign(n, label);
  Vector u(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) u[j] = rng.normal();
    double* row = out.features.row(i);
    for (std::size_t r = 0; r < d; ++r) row[r] = stats.mean[r] + kern::dot(lower.row(r), u.data(), r + 1);
  }
  return out;
}

const char* divergence_name(DivergenceKind k) {
  switch (k) {
    case DivergenceKind::KL: return "kl";
    case DivergenceKind::JS: return "js";
    case DivergenceKind::Hellinger: return "hellinger";
    case DivergenceKind::W2: return "w2";
  }
  return "?";
}

DivergenceKind divergence_from_name(const std::string& name) {
  if (name == "kl") return DivergenceKind::KL;
  if (name == "js") return DivergenceKind::JS;
  if (name == "hellinger") return DivergenceKind::Hellinger;
  if (name == "w2") return DivergenceKind::W2;
  fail(Err::BadSpec, "unknown divergence kind: " + name);
}

namespace {

constexpr double kDivJitter = 1e-9;

// 0.5 (|Lq^-1 Lp|_F^2 + |Lq^-1 (mp - mq)|^2 - d + logdet q - logdet p)
double kl_from_parts(const Vector& mp, const Matrix& lp, const Vector& mq, const Matrix& lq) {
  const std::size_t d = mp.size();
  const Matrix w = solve_lower_matrix(lq, lp);
  double quad = w.frobenius_norm();
  quad *= quad;

  Vector delta(d);
  for (std::size_t i = 0; i < d; ++i) delta[i] = mp[i] - mq[i];
  solve_lower_inplace(lq, delta.data());
  const double maha = kern::sumsq(delta.data(), d);

  const double logdet_p = logdet_from_cholesky(lp);
  const double logdet_q = logdet_from_cholesky(lq);
  return 0.5 * (quad + maha - double(d) + logdet_q - logdet_p);
}

GaussianStats midpoint_gaussian(const GaussianStats& p, const GaussianStats& q) {
  const std::size_t d = p.dim();
  GaussianStats m;
  m.mean.resize(d);
  for (std::size_t i = 0; i < d; ++i) m.mean[i] = 0.5 * (p.mean[i] + q.mean[i]);
  m.cov = p.cov;
  m.cov += q.cov;
  m.cov *= 0.5;
  Vector delta(d);
  for (std::size_t i = 0; i < d; ++i) delta[i] = p.mean[i] - q.mean[i];
  rank1_update(m.cov, 0.25, delta.data(), delta.data());
  m.cov.symmetrize();
  return m;
}

}  // namespace

double gaussian_divergence(DivergenceKind kind, const GaussianStats& p, const GaussianStats& q) {
  const std::size_t d = p.dim();
  if (q.dim() != d || p.cov.rows() != d || q.cov.rows() != d)
    fail(Err::DimensionMismatch, "gaussian_divergence: dimension differs");

  switch (kind) {
    case DivergenceKind::KL: {
      const Matrix lp = cholesky_psd(p.cov, kDivJitter).lower;
      const Matrix lq = cholesky_psd(q.cov, kDivJitter).lower;
      return kl_from_parts(p.mean, lp, q.mean, lq);
    }
    case DivergenceKind::JS: {
      const GaussianStats mid = midpoint_gaussian(p, q);
      const Matrix lp = cholesky_psd(p.cov, kDivJitter).lower;
      const Matrix lq = cholesky_psd(q.cov, kDivJitter).lower;
      const Matrix lm = cholesky_psd(mid.cov, kDivJitter).lower;
      return 0.5 * kl_from_parts(p.mean, lp, mid.mean, lm) +
             0.5 * kl_from_parts(q.mean, lq, mid.mean, lm);
    }
    case DivergenceKind::Hellinger: {
      Matrix avg = p.cov;
      avg += q.cov;
      avg *= 0.5;
      const Matrix lp = cholesky_psd(p.cov, kDivJitter).lower;
      const Matrix lq = cholesky_psd(q.cov, kDivJitter).lower;
      const Matrix la = cholesky_psd(avg, kDivJitter).lower;
      Vector delta(d);
      for (std::size_t i = 0; i < d; ++i) delta[i] = p.mean[i] - q.mean[i];
      solve_lower_inplace(la, delta.data());
      const double maha = kern::sumsq(delta.data(), d);
      const double log_bc = 0.25 * logdet_from_cholesky(lp) + 0.25 * logdet_from_cholesky(lq) -
                            0.5 * logdet_from_cholesky(la) - 0.125 * maha;
      const double h2 = 1.0 - std::exp(log_bc);
      return std::sqrt(std::max(0.0, h2));
    }
    case DivergenceKind::W2: {
      // Bures: |dmu|^2 + tr p + tr q - 2 tr((q^1/2 p q^1/2)^1/2)
      Vector delta(d);
      for (std::size_t i = 0; i < d; ++i) delta[i] = p.mean[i] - q.mean[i];
      const Matrix rq = sym_sqrt(q.cov);
      Matrix inner = matmul(matmul(rq, p.cov), rq);
      inner.symmetrize();
      const Matrix cross = sym_sqrt(inner);
      const double tr_p = p.cov.trace(), tr_q = q.cov.trace();
      // The trace difference cancels catastrophically for near-equal
      // covariances and the sqrt amplifies what is left, so anything below
      // the eigensolver's noise floor counts as zero. The mean term has no
      // cancellation and is kept exact.
      double trace_part = tr_p + tr_q - 2.0 * cross.trace();
      if (std::fabs(trace_part) < 1e-12 * (tr_p + tr_q)) trace_part = 0.0;
      const double w2sq = kern::sumsq(delta.data(), d) + trace_part;
      return std::sqrt(std::max(0.0, w2sq));
    }
  }
  fail(Err::BadSpec, "gaussian_divergence: unknown kind");
}

}  // namespace ldc
