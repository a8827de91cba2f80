#include <cmath>

#include "doctest.h"
#include "ldc/classifier.hpp"
#include "ldc/rng.hpp"

using namespace ldc;

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (auto& r : rows) {
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("prototypes are class means") {
  ClassifierState c = init_prototypes({rows_of({{2, 0}, {0, 2}}), rows_of({{4, 4}})});
  CHECK(c.n_classes() == 2);
  CHECK(c.vectors(0, 0) == 1.0);
  CHECK(c.vectors(0, 1) == 1.0);
  CHECK(c.vectors(1, 0) == 4.0);

  // 5-shot random class vs brute-force mean
  Rng rng(5);
  Matrix f(5, 3);
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = rng.normal();
  ClassifierState one = init_prototypes({f});
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < 5; ++i) m += f(i, j);
    CHECK(one.vectors(0, j) == doctest::Approx(m / 5.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(init_prototypes({Matrix(0, 3)}), LdcError);
}

TEST_CASE("cosine logits hit scale on the matching row and zero when orthogonal") {
  ClassifierState c = init_prototypes({rows_of({{1, 0}}), rows_of({{0, 1}})});
  c.scale = 16.0;
  Vector l = cosine_logits({1, 0}, c);
  CHECK(l[0] == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(l[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(predict({1, 0}, c) == 0);
  CHECK_THROWS_AS(cosine_logits({0, 0}, c), LdcError);
}

TEST_CASE("argmax is invariant to positive input rescaling") {
  Rng rng(123);
  Matrix protos(7, 5);
  for (std::size_t i = 0; i < protos.size(); ++i) protos.data()[i] = rng.normal();
  ClassifierState c{protos, 16.0};

  for (int t = 0; t < 100; ++t) {
    Vector x(5);
    for (auto& v : x) v = rng.normal();
    int base = predict(x, c);
    double lam = 0.01 + 10.0 * rng.uniform();
    Vector xs = x;
    for (auto& v : xs) v *= lam;
    CHECK(predict(xs, c) == base);
  }
}

TEST_CASE("prototype classifier is exact on its own prototypes") {
  Rng rng(9);
  Matrix protos(10, 6);
  for (std::size_t i = 0; i < protos.size(); ++i) protos.data()[i] = rng.normal();
  ClassifierState c{protos, 16.0};
  for (std::size_t i = 0; i < 10; ++i) {
    Vector x(6);
    for (std::size_t j = 0; j < 6; ++j) x[j] = protos(i, j);
    CHECK(predict(x, c) == int(i));
  }
}

TEST_CASE("cross entropy of uniform logits is ln K") {
  Matrix logits(3, 5, 0.7);  // equal entries, any constant
  CrossEntropyResult r = cross_entropy(logits, {0, 2, 4});
  CHECK(r.loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("large-margin correct logits give near-zero loss") {
  // margin m = 20, K = 5: loss <= ln(1 + 4 e^-20) < 1e-7
  Matrix logits(1, 5);
  logits(0, 2) = 20.0;
  CrossEntropyResult r = cross_entropy(logits, {2});
  CHECK(r.loss < 1e-7);
  CHECK(r.loss >= 0.0);
}

TEST_CASE("cross entropy gradient rows sum to zero") {
  Rng rng(77);
  Matrix logits(4, 6);
  for (std::size_t i = 0; i < logits.size(); ++i) logits.data()[i] = 3.0 * rng.normal();
  CrossEntropyResult r = cross_entropy(logits, {0, 5, 3, 1});
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += r.dlogits(i, j);
    CHECK(std::fabs(s) < 1e-12);
  }
}

TEST_CASE("cross entropy matches an independent log-sum-exp recomputation") {
  Rng rng(31);
  Matrix logits(5, 4);
  for (std::size_t i = 0; i < logits.size(); ++i) logits.data()[i] = 50.0 * rng.normal();
  std::vector<int> labels{1, 0, 3, 2, 2};
  CrossEntropyResult r = cross_entropy(logits, labels);

  double want = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    long double m = logits(i, 0);
    for (std::size_t j = 1; j < 4; ++j) m = std::max<long double>(m, logits(i, j));
    long double z = 0.0;
    for (std::size_t j = 0; j < 4; ++j) z += std::exp((long double)logits(i, j) - m);
    want += double(m + std::log(z) - (long double)logits(i, labels[i]));
  }
  want /= 5.0;
  CHECK(r.loss == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  Matrix logits(1, 3);
  CHECK_THROWS_AS(cross_entropy(logits, {3}), LdcError);
  CHECK_THROWS_AS(cross_entropy(logits, {-1}), LdcError);
}

TEST_CASE("expand appends rows and leaves old bytes untouched") {
  Rng rng(15);
  Matrix protos(60, 4);
  for (std::size_t i = 0; i < protos.size(); ++i) protos.data()[i] = rng.normal();
  ClassifierState c{protos, 16.0};

  Matrix extra(5, 4);
  for (std::size_t i = 0; i < extra.size(); ++i) extra.data()[i] = rng.normal();
  ClassifierState big = expand(c, extra);
  CHECK(big.n_classes() == 65);
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(big.vectors(i, j) == c.vectors(i, j));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(big.vectors(60 + i, j) == extra(i, j));

  ClassifierState same = expand(c, Matrix(0, 4));
  CHECK(same.vectors == c.vectors);
  CHECK_THROWS_AS(expand(c, Matrix(2, 5)), LdcError);
}

namespace {

SampleSet two_blob_set(std::uint64_t seed, std::size_t per_class) {
  Rng rng(seed);
  SampleSet s;
  s.features = Matrix(2 * per_class, 2);
  s.labels.resize(2 * per_class);
  for (std::size_t i = 0; i < per_class; ++i) {
    s.features(i, 0) = 2.0 + 0.3 * rng.normal();
    s.features(i, 1) = 0.2 * rng.normal();
    s.labels[i] = 0;
    s.features(per_class + i, 0) = 0.2 * rng.normal();
    s.features(per_class + i, 1) = 2.0 + 0.3 * rng.normal();
    s.labels[per_class + i] = 1;
  }
  return s;
}

}  // namespace

TEST_CASE("training with lr 0 leaves the classifier unchanged") {
  SampleSet s = two_blob_set(1, 10);
  ClassifierState c{rows_of({{1, 0.5}, {0.5, 1}}), 16.0};
  ClassifierState after = train_classifier(c, s, 5, 0.0);
  CHECK(after.vectors == c.vectors);
}

TEST_CASE("training separates a linearly separable set") {
  SampleSet s = two_blob_set(2, 50);
  // deliberately bad starting rows
  ClassifierState c{rows_of({{0.4, 0.6}, {0.6, 0.4}}), 16.0};
  ClassifierState trained = train_classifier(c, s, 100, 0.05);
  CHECK(classification_accuracy(trained, s) >= 0.99);
}

TEST_CASE("new_only masking keeps old rows bitwise") {
  SampleSet s = two_blob_set(3, 20);
  ClassifierState c{rows_of({{1, 0.1}, {0.1, 1}}), 16.0};
  ClassifierState trained =
      train_classifier(c, s, 10, 0.05, TrainableRows::NewOnly, 1);
  for (std::size_t j = 0; j < 2; ++j) CHECK(trained.vectors(0, j) == c.vectors(0, j));
  bool row1_moved = false;
  for (std::size_t j = 0; j < 2; ++j) row1_moved |= trained.vectors(1, j) != c.vectors(1, j);
  CHECK(row1_moved);
}
