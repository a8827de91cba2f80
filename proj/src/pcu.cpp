#include "ldc/pcu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ldc/bytes.hpp"
#include "ldc/rng.hpp"

namespace ldc {

namespace {

constexpr double kFitJitter = 1e-9;

void scale_last_layer(Net& net, double factor) {
  Layer& last = net.layers.back();
  kern::scale(factor, last.w.data(), last.w.size());
}

// The matching loss has steep curvature when a fitted covariance drifts
// toward singular; a global-norm clip keeps plain SGD from overshooting.
constexpr double kGradClipNorm = 1.0;

void clip_grads(GradBundle& g) {
  double sq = 0.0;
  for (const auto& m : g.dw) sq += kern::sumsq(m.data(), m.size());
  for (const auto& b : g.db) sq += kern::sumsq(b.data(), b.size());
  const double norm = std::sqrt(sq);
  if (norm > kGradClipNorm) g.scale(kGradClipNorm / norm);
}

}  // namespace

PcuState make_pcu(std::size_t d, std::uint64_t seed, std::size_t samples_per_class,
                  std::size_t recur_iters) {
  if (d == 0) fail(Err::BadSpec, "make_pcu: zero dimension");
  if (samples_per_class == 0) fail(Err::BadSpec, "make_pcu: zero samples_per_class");
  PcuState pcu;
  pcu.mapping_net = init_net({2 * d * d, 4 * d, d * d}, InitScheme::He, derive_seed(seed, 1));
  pcu.calib_net = init_net({d, 4 * d, d}, InitScheme::He, derive_seed(seed, 2), true);
  // Start near the identity: tiny mapping output, tiny residual correction.
  scale_last_layer(pcu.mapping_net, 0.01);
  scale_last_layer(pcu.calib_net, 0.01);
  pcu.shared = SharedCovariance::zero(d);
  pcu.samples_per_class = samples_per_class;
  pcu.recur_iters = recur_iters;
  return pcu;
}

namespace {

// Input layout: vec(w w^T) followed by vec(shared sigma), both row-major.
Matrix mapping_input(const PcuState& pcu, const Vector& w) {
  const std::size_t d = pcu.dim();
  Matrix in(1, 2 * d * d);
  double* p = in.row(0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) p[i * d + j] = w[i] * w[j];
  const double* s = pcu.shared.sigma.data();
  for (std::size_t k = 0; k < d * d; ++k) p[d * d + k] = s[k];
  return in;
}

}  // namespace

Matrix map_covariance(const PcuState& pcu, const Vector& w, MapCovCache* cache) {
  const std::size_t d = pcu.dim();
  if (w.size() != d) fail(Err::DimensionMismatch, "map_covariance: vector width");
  for (double v : w)
    if (!std::isfinite(v)) fail(Err::NonFinite, "map_covariance: non-finite vector");

  Matrix in = mapping_input(pcu, w);
  ForwardCache local_cache;
  ForwardCache* fc = cache ? &cache->net_cache : &local_cache;
  Matrix y = forward(pcu.mapping_net, in, fc);
  if (!y.all_finite()) fail(Err::NonFinite, "map_covariance: net output");

  Matrix b(d, d);
  const double* yp = y.row(0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) b(i, j) = 0.5 * (yp[i * d + j] + yp[j * d + i]);
  b += pcu.shared.sigma;
  b.symmetrize();

  EigResult eig = eigen_symmetric(b);
  Matrix mapped = psd_clamp_from_eigen(eig, kPsdClampFloor);
  if (cache) {
    cache->eig = std::move(eig);
    cache->mapped = mapped;
  }
  return mapped;
}

void map_covariance_backward(const PcuState& pcu, const MapCovCache& cache,
                             const Matrix& mapped_bar, GradBundle& mapping_grads) {
  const std::size_t d = pcu.dim();
  // clamp, then the symmetrize-and-add-residual reshape
  Matrix b_bar = psd_clamp_backward(cache.eig, kPsdClampFloor, mapped_bar);
  Matrix upstream(1, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) upstream(0, i * d + j) = b_bar(i, j);
  BackwardResult r = backward(pcu.mapping_net, cache.net_cache, upstream);
  mapping_grads.accumulate(r.grads);
}

SampleSet sample_biased(const PcuState& pcu, const ClassifierState& classifier,
                        const std::vector<int>& class_ids, std::uint64_t seed) {
  const std::size_t d = pcu.dim();
  if (classifier.dim() != d) fail(Err::DimensionMismatch, "sample_biased: classifier width");
  if (class_ids.empty()) fail(Err::EmptyInput, "sample_biased: no classes");

  const std::size_t n = pcu.samples_per_class;
  SampleSet out;
  out.features = Matrix(class_ids.size() * n, d);
  out.labels.resize(class_ids.size() * n);

  Vector w(d), u(d);
  for (std::size_t c = 0; c < class_ids.size(); ++c) {
    const int id = class_ids[c];
    if (id < 0 || std::size_t(id) >= classifier.n_classes())
      fail(Err::UnknownClass, "sample_biased: class " + std::to_string(id));
    for (std::size_t j = 0; j < d; ++j) w[j] = classifier.vectors(std::size_t(id), j);

    Matrix sigma = map_covariance(pcu, w);
    Matrix lower = cholesky_psd(sigma, kFitJitter).lower;

    Rng rng(derive_seed(seed, std::uint64_t(id)));
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < d; ++j) u[j] = rng.normal();
      double* row = out.features.row(c * n + k);
      for (std::size_t r = 0; r < d; ++r)
        row[r] = w[r] + kern::dot(lower.row(r), u.data(), r + 1);
      out.labels[c * n + k] = id;
    }
  }
  return out;
}

SampleSet calibrate(const PcuState& pcu, const SampleSet& biased) {
  if (biased.dim() != pcu.dim()) fail(Err::DimensionMismatch, "calibrate: feature width");
  SampleSet out = biased;
  for (std::size_t r = 0; r < pcu.recur_iters; ++r)
    out.features = forward(pcu.calib_net, out.features);
  return out;
}

namespace {

struct ClassRows {
  std::vector<std::size_t> rows;
};

std::map<int, ClassRows> group_rows(const SampleSet& s) {
  std::map<int, ClassRows> g;
  for (std::size_t i = 0; i < s.size(); ++i) g[s.labels[i]].rows.push_back(i);
  return g;
}

Matrix gather(const Matrix& features, const std::vector<std::size_t>& rows) {
  Matrix m(rows.size(), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < features.cols(); ++j) m(i, j) = features(rows[i], j);
  return m;
}

// Divergence gradient wrt the first argument's mean and covariance. g_sigma
// follows the symmetric full-matrix Frobenius convention.
struct FitGrad {
  Vector g_mu;
  Matrix g_sigma;
};

FitGrad divergence_fit_grad(DivergenceKind kind, const GaussianStats& p, const GaussianStats& q) {
  const std::size_t d = p.dim();
  Vector delta(d);
  for (std::size_t i = 0; i < d; ++i) delta[i] = p.mean[i] - q.mean[i];

  FitGrad g;
  g.g_mu.assign(d, 0.0);
  g.g_sigma = Matrix(d, d);

  switch (kind) {
    case DivergenceKind::KL: {
      Matrix qi = spd_inverse(q.cov);
      Matrix pi = spd_inverse(p.cov);
      g.g_mu = matvec(qi, delta);
      g.g_sigma = qi;
      g.g_sigma -= pi;
      g.g_sigma *= 0.5;
      break;
    }
    case DivergenceKind::JS: {
      // Midpoint-path terms cancel: the moment-matched midpoint is the
      // stationary M-projection of the pair, so only the direct KL(p||m)
      // partials survive.
      Matrix mid = p.cov;
      mid += q.cov;
      mid *= 0.5;
      rank1_update(mid, 0.25, delta.data(), delta.data());
      mid.symmetrize();
      Matrix mi = spd_inverse(mid);
      Matrix pi = spd_inverse(p.cov);
      Vector miv = matvec(mi, delta);
      for (std::size_t i = 0; i < d; ++i) g.g_mu[i] = 0.25 * miv[i];
      g.g_sigma = mi;
      g.g_sigma -= pi;
      g.g_sigma *= 0.25;
      break;
    }
    case DivergenceKind::Hellinger: {
      Matrix avg = p.cov;
      avg += q.cov;
      avg *= 0.5;
      const Matrix la = cholesky_psd(avg, kFitJitter).lower;
      const Matrix lp = cholesky_psd(p.cov, kFitJitter).lower;
      const Matrix lq = cholesky_psd(q.cov, kFitJitter).lower;
      Vector solved = delta;
      solve_lower_inplace(la, solved.data());
      const double maha = kern::sumsq(solved.data(), d);
      const double log_bc = 0.25 * logdet_from_cholesky(lp) + 0.25 * logdet_from_cholesky(lq) -
                            0.5 * logdet_from_cholesky(la) - 0.125 * maha;
      const double bc = std::exp(log_bc);
      const double h = std::sqrt(std::max(1.0 - bc, 1e-16));

      Matrix ai = spd_inverse(avg);
      Matrix pi = spd_inverse(p.cov);
      Vector aid = matvec(ai, delta);

      // dH/dx = -(bc / 2H) dlogBC/dx
      const double coef = -bc / (2.0 * h);
      for (std::size_t i = 0; i < d; ++i) g.g_mu[i] = coef * (-0.25) * aid[i];
      // dlogBC/dSigma_p = 0.25 pi - 0.25 ai + (1/16) ai delta delta^T ai
      Matrix glog = pi;
      glog *= 0.25;
      Matrix ai_scaled = ai;
      ai_scaled *= -0.25;
      glog += ai_scaled;
      rank1_update(glog, 1.0 / 16.0, aid.data(), aid.data());
      glog.symmetrize();
      glog *= coef;
      g.g_sigma = glog;
      break;
    }
    case DivergenceKind::W2: {
      const Matrix rq = sym_sqrt(q.cov);
      Matrix inner = matmul(matmul(rq, p.cov), rq);
      inner.symmetrize();
      const Matrix cross = sym_sqrt(inner);
      const double w2sq = kern::sumsq(delta.data(), d) + p.cov.trace() + q.cov.trace() -
                          2.0 * cross.trace();
      const double w2 = std::sqrt(std::max(w2sq, 1e-16));
      const double coef = 1.0 / (2.0 * w2);

      for (std::size_t i = 0; i < d; ++i) g.g_mu[i] = coef * 2.0 * delta[i];
      // d(w2^2)/dSigma_p = I - rq (rq Sigma_p rq)^{-1/2} rq
      Matrix inner_inv_sqrt = sym_inv_sqrt(inner, 1e-10);
      Matrix corr = matmul(matmul(rq, inner_inv_sqrt), rq);
      g.g_sigma = Matrix::identity(d);
      g.g_sigma -= corr;
      g.g_sigma.symmetrize();
      g.g_sigma *= coef;
      break;
    }
  }
  return g;
}

}  // namespace

MatchingLossResult matching_loss(const SampleSet& calibrated, const SampleSet& real,
                                 DivergenceKind kind) {
  if (calibrated.size() == 0 || real.size() == 0)
    fail(Err::EmptyInput, "matching_loss: empty sample set");
  if (calibrated.dim() != real.dim()) fail(Err::DimensionMismatch, "matching_loss: widths");

  auto cal_groups = group_rows(calibrated);
  auto real_groups = group_rows(real);
  if (cal_groups.size() != real_groups.size())
    fail(Err::ClassMismatch, "matching_loss: class sets differ");
  for (const auto& [id, rows] : cal_groups) {
    if (!real_groups.count(id))
      fail(Err::ClassMismatch, "matching_loss: class " + std::to_string(id) + " missing");
    if (rows.rows.empty() || real_groups[id].rows.empty())
      fail(Err::EmptyClass, "matching_loss: class " + std::to_string(id));
  }

  MatchingLossResult out{0.0, Matrix(calibrated.features.rows(), calibrated.dim())};
  const double class_weight = 1.0 / double(cal_groups.size());

  for (const auto& [id, rows] : cal_groups) {
    Matrix cal_rows = gather(calibrated.features, rows.rows);
    Matrix real_rows = gather(real.features, real_groups[id].rows);
    GaussianStats p = estimate_mean_cov(cal_rows);
    GaussianStats q = estimate_mean_cov(real_rows);

    out.loss += class_weight * gaussian_divergence(kind, p, q);

    FitGrad fg = divergence_fit_grad(kind, p, q);
    const double n = double(rows.rows.size());
    Vector centered(calibrated.dim());
    for (std::size_t k = 0; k < rows.rows.size(); ++k) {
      const std::size_t r = rows.rows[k];
      for (std::size_t j = 0; j < calibrated.dim(); ++j)
        centered[j] = calibrated.features(r, j) - p.mean[j];
      Vector gsig = matvec(fg.g_sigma, centered);
      double* grow = out.dfeatures.row(r);
      for (std::size_t j = 0; j < calibrated.dim(); ++j)
        grow[j] = class_weight * (fg.g_mu[j] / n + 2.0 / n * gsig[j]);
    }
  }
  return out;
}

PcuTrainResult train_pcu_base(PcuState pcu, const ClassifierState& classifier,
                              const SampleSet& base_data, std::size_t epochs, double lr,
                              std::uint64_t seed, DivergenceKind kind) {
  const std::size_t d = pcu.dim();
  if (classifier.dim() != d || base_data.dim() != d)
    fail(Err::DimensionMismatch, "train_pcu_base: widths");

  // Base classes are the distinct labels present in the data; each needs a
  // classifier row.
  auto groups = group_rows(base_data);
  std::vector<int> class_ids;
  for (const auto& [id, rows] : groups) {
    if (id < 0 || std::size_t(id) >= classifier.n_classes())
      fail(Err::UnknownClass, "train_pcu_base: label " + std::to_string(id));
    class_ids.push_back(id);
  }

  PcuTrainResult result;
  const std::size_t n = pcu.samples_per_class;
  const std::size_t n_cls = class_ids.size();

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    // forward: per class draw, map, sample, calibrate
    std::vector<MapCovCache> cov_caches(n_cls);
    std::vector<Matrix> us(n_cls);
    std::vector<std::vector<ForwardCache>> calib_caches(n_cls);

    SampleSet calibrated;
    calibrated.features = Matrix(n_cls * n, d);
    calibrated.labels.resize(n_cls * n);

    Vector w(d);
    for (std::size_t c = 0; c < n_cls; ++c) {
      const int id = class_ids[c];
      for (std::size_t j = 0; j < d; ++j) w[j] = classifier.vectors(std::size_t(id), j);

      Matrix sigma = map_covariance(pcu, w, &cov_caches[c]);
      CholResult chol = cholesky_psd(sigma, kFitJitter);
      cov_caches[c].lower = chol.lower;
      cov_caches[c].jitter = chol.jitter;

      Rng rng(derive_seed(seed, epoch * 1000003ULL + std::uint64_t(id)));
      Matrix u(n, d);
      for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = rng.normal();
      us[c] = u;

      Matrix x(n, d);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t r = 0; r < d; ++r)
          x(k, r) = w[r] + kern::dot(chol.lower.row(r), u.row(k), r + 1);

      calib_caches[c].resize(pcu.recur_iters);
      for (std::size_t it = 0; it < pcu.recur_iters; ++it)
        x = forward(pcu.calib_net, x, &calib_caches[c][it]);

      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < d; ++j) calibrated.features(c * n + k, j) = x(k, j);
        calibrated.labels[c * n + k] = id;
      }
    }

    MatchingLossResult ml = matching_loss(calibrated, base_data, kind);
    result.loss_trace.push_back(ml.loss);

    // backward
    GradBundle map_grads = GradBundle::zeros_like(pcu.mapping_net);
    GradBundle calib_grads = GradBundle::zeros_like(pcu.calib_net);

    for (std::size_t c = 0; c < n_cls; ++c) {
      Matrix g(n, d);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < d; ++j) g(k, j) = ml.dfeatures(c * n + k, j);

      for (std::size_t it = pcu.recur_iters; it-- > 0;) {
        BackwardResult br = backward(pcu.calib_net, calib_caches[c][it], g);
        calib_grads.accumulate(br.grads);
        g = std::move(br.input_grad);
      }

      // reparameterized draw: x_k = w + L u_k, so dL = sum_k g_k u_k^T
      // restricted to the lower triangle.
      const Matrix& lower = cov_caches[c].lower;
      Matrix lbar(d, d);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < d; ++i)
          kern::axpy(g(k, i), us[c].row(k), lbar.row(i), i + 1);

      Matrix mapped_bar = cholesky_backward(lower, lbar);
      map_covariance_backward(pcu, cov_caches[c], mapped_bar, map_grads);
    }

    clip_grads(map_grads);
    clip_grads(calib_grads);
    pcu.mapping_net = sgd_step(std::move(pcu.mapping_net), map_grads, lr);
    if (pcu.recur_iters > 0)
      pcu.calib_net = sgd_step(std::move(pcu.calib_net), calib_grads, lr);
  }

  result.pcu = std::move(pcu);
  return result;
}

std::vector<std::uint8_t> serialize_pcu(const PcuState& pcu) {
  ByteWriter w;
  w.magic("LDCP");
  w.u32(1);
  w.u32(std::uint32_t(pcu.dim()));
  w.u32(std::uint32_t(pcu.samples_per_class));
  w.u32(std::uint32_t(pcu.recur_iters));
  serialize_net(pcu.mapping_net, w);
  serialize_net(pcu.calib_net, w);
  for (std::size_t i = 0; i < pcu.shared.sigma.size(); ++i) w.f64(pcu.shared.sigma.data()[i]);
  w.u64(std::uint64_t(pcu.shared.n_classes));
  return w.take();
}

PcuState deserialize_pcu(const std::vector<std::uint8_t>& blob) {
  ByteReader r(blob);
  r.expect_magic("LDCP");
  const std::uint32_t version = r.u32();
  if (version != 1) fail(Err::BadMagic, "pcu blob version " + std::to_string(version));
  PcuState pcu;
  const std::uint32_t d = r.u32();
  pcu.samples_per_class = r.u32();
  pcu.recur_iters = r.u32();
  pcu.mapping_net = deserialize_net(r);
  pcu.calib_net = deserialize_net(r);
  pcu.shared.sigma = Matrix(d, d);
  for (std::size_t i = 0; i < pcu.shared.sigma.size(); ++i) pcu.shared.sigma.data()[i] = r.f64();
  pcu.shared.n_classes = std::int64_t(r.u64());
  if (!r.done()) fail(Err::TruncatedFile, "pcu blob has trailing bytes");
  return pcu;
}

}  // namespace ldc
