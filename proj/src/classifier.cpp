#include "ldc/classifier.hpp"

#include <cmath>

namespace ldc {

ClassifierState init_prototypes(const std::vector<Matrix>& per_class_features, double scale) {
  if (per_class_features.empty()) fail(Err::EmptyInput, "init_prototypes: no classes");
  const std::size_t d = per_class_features.front().cols();
  ClassifierState c;
  c.scale = scale;
  c.vectors = Matrix(per_class_features.size(), d);
  for (std::size_t i = 0; i < per_class_features.size(); ++i) {
    const Matrix& f = per_class_features[i];
    if (f.rows() == 0) fail(Err::EmptyClass, "init_prototypes: class " + std::to_string(i));
    if (f.cols() != d) fail(Err::DimensionMismatch, "init_prototypes: feature width");
    double* row = c.vectors.row(i);
    for (std::size_t r = 0; r < f.rows(); ++r) kern::vadd(f.row(r), row, d);
    kern::scale(1.0 / double(f.rows()), row, d);
  }
  return c;
}

Vector cosine_logits(const Vector& x, const ClassifierState& c) {
  if (x.size() != c.dim()) fail(Err::DimensionMismatch, "cosine_logits: input width");
  const double xn = norm2(x);
  if (xn == 0.0) fail(Err::ZeroVector, "cosine_logits: zero input");
  Vector out(c.n_classes());
  for (std::size_t i = 0; i < c.n_classes(); ++i) {
    const double wn = std::sqrt(kern::sumsq(c.vectors.row(i), c.dim()));
    if (wn == 0.0) fail(Err::ZeroVector, "cosine_logits: zero classifier row");
    out[i] = c.scale * kern::dot(x.data(), c.vectors.row(i), c.dim()) / (xn * wn);
  }
  return out;
}

int predict(const Vector& x, const ClassifierState& c) {
  Vector l = cosine_logits(x, c);
  std::size_t best = 0;
  for (std::size_t i = 1; i < l.size(); ++i)
    if (l[i] > l[best]) best = i;
  return int(best);
}

CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  if (labels.size() != n) fail(Err::DimensionMismatch, "cross_entropy: label count");
  if (n == 0) fail(Err::EmptyInput, "cross_entropy: empty batch");

  CrossEntropyResult r{0.0, Matrix(n, k)};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || std::size_t(y) >= k)
      fail(Err::LabelOutOfRange, "cross_entropy: label " + std::to_string(y));
    const double* l = logits.row(i);
    double m = l[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, l[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(l[j] - m);
    const double lse = m + std::log(z);
    r.loss += lse - l[y];
    double* g = r.dlogits.row(i);
    for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(l[j] - m) / z;
    g[y] -= 1.0;
  }
  r.loss /= double(n);
  r.dlogits *= 1.0 / double(n);
  return r;
}

ClassifierState expand(const ClassifierState& c, const Matrix& new_prototypes) {
  if (new_prototypes.rows() == 0) return c;
  if (new_prototypes.cols() != c.dim()) fail(Err::DimensionMismatch, "expand: feature width");
  ClassifierState out;
  out.scale = c.scale;
  out.vectors = Matrix(c.n_classes() + new_prototypes.rows(), c.dim());
  for (std::size_t i = 0; i < c.n_classes(); ++i)
    for (std::size_t j = 0; j < c.dim(); ++j) out.vectors(i, j) = c.vectors(i, j);
  for (std::size_t i = 0; i < new_prototypes.rows(); ++i)
    for (std::size_t j = 0; j < c.dim(); ++j)
      out.vectors(c.n_classes() + i, j) = new_prototypes(i, j);
  return out;
}

ClassifierGrad classifier_gradient(const ClassifierState& c, const SampleSet& data) {
  if (data.size() == 0) fail(Err::EmptyInput, "classifier_gradient: no data");
  if (data.dim() != c.dim()) fail(Err::DimensionMismatch, "classifier_gradient: feature width");

  const std::size_t n = data.size();
  const std::size_t nc = c.n_classes();
  const std::size_t d = c.dim();

  Matrix logits(n, nc);
  Vector x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[j] = data.features(i, j);
    Vector l = cosine_logits(x, c);
    for (std::size_t j = 0; j < nc; ++j) logits(i, j) = l[j];
  }
  CrossEntropyResult ce = cross_entropy(logits, data.labels);

  // d logit_i / d w_i = s * (x / (|x||w|) - (x.w) w / (|x||w|^3))
  ClassifierGrad out{ce.loss, Matrix(nc, d)};
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = data.features.row(i);
    const double xn = std::sqrt(kern::sumsq(xi, d));
    for (std::size_t cls = 0; cls < nc; ++cls) {
      const double g = ce.dlogits(i, cls);
      if (g == 0.0) continue;
      const double* w = c.vectors.row(cls);
      const double wn = std::sqrt(kern::sumsq(w, d));
      const double xw = kern::dot(xi, w, d);
      const double a = c.scale * g / (xn * wn);
      const double b = -c.scale * g * xw / (xn * wn * wn * wn);
      kern::axpy(a, xi, out.dvectors.row(cls), d);
      kern::axpy(b, w, out.dvectors.row(cls), d);
    }
  }
  return out;
}

ClassifierState train_classifier(ClassifierState c, const SampleSet& data, std::size_t epochs,
                                 double lr, TrainableRows rows, std::size_t first_new_row) {
  if (data.size() == 0) fail(Err::EmptyInput, "train_classifier: no data");
  if (data.dim() != c.dim()) fail(Err::DimensionMismatch, "train_classifier: feature width");
  if (lr < 0) fail(Err::BadSpec, "train_classifier: negative lr");

  const std::size_t nc = c.n_classes();
  const std::size_t d = c.dim();

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Matrix dw = classifier_gradient(c, data).dvectors;
    const std::size_t start = rows == TrainableRows::NewOnly ? first_new_row : 0;
    for (std::size_t cls = start; cls < nc; ++cls)
      kern::axpy(-lr, dw.row(cls), c.vectors.row(cls), d);
  }
  return c;
}

double classification_accuracy(const ClassifierState& c, const SampleSet& data) {
  if (data.size() == 0) fail(Err::EmptyInput, "classification_accuracy: no data");
  std::size_t hits = 0;
  Vector x(c.dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < c.dim(); ++j) x[j] = data.features(i, j);
    if (predict(x, c) == data.labels[i]) ++hits;
  }
  return double(hits) / double(data.size());
}

}  // namespace ldc
