#include "ldc/experiment.hpp"

#include <cmath>
#include <functional>

#include "doctest.h"
#include "ldc/dataio.hpp"
#include "ldc/rng.hpp"

using namespace ldc;

namespace {

bool raises(Err code, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const LdcError& e) {
    return e.code() == code;
  }
  return false;
}

// Small config so a full run stays under a second.
ExperimentConfig quick() {
  ExperimentConfig c;
  c.classes = 8;
  c.dim = 6;
  c.samples_per_class = 60;
  c.separation = 4.0;
  c.base_classes = 4;
  c.n_way = 2;
  c.k_shot = 5;
  c.protocol.classifier_epochs = 20;
  c.protocol.classifier_lr = 0.5;
  c.protocol.pcu_epochs = 3;
  c.protocol.pcu_lr = 0.01;
  c.protocol.incremental_epochs = 30;
  c.protocol.incremental_lr = 0.1;
  c.protocol.samples_per_class = 12;
  return c;
}

}  // namespace

TEST_CASE("a full cell runs every session and fills the record") {
  ExperimentConfig cfg = quick();
  SessionResult r = run_full(cfg, BaselineKind::Ldc, 7);
  CHECK(r.method == BaselineKind::Ldc);
  CHECK(r.seed == 7);
  REQUIRE(r.accuracies.size() == 3);  // base + (8-4)/2 sessions
  for (double a : r.accuracies) {
    CHECK(a >= 0.0);
    CHECK(a <= 100.0);
  }
  CHECK(r.pd == doctest::Approx(r.accuracies.front() - r.accuracies.back()));
  CHECK(r.pr == doctest::Approx(100.0 * r.accuracies.back() / r.accuracies.front()));
  REQUIRE(r.state_bytes.size() == 3);
  CHECK(r.state_bytes[0] > 0);
  CHECK(r.state_bytes[0] == r.state_bytes[2]);  // recovery unit never grows
  REQUIRE(r.wall_ms.size() == 3);
}

TEST_CASE("cells are bitwise reproducible per seed and distinct across seeds") {
  ExperimentConfig cfg = quick();
  SessionResult a = run_full(cfg, BaselineKind::EmpiricalCalib, 11);
  SessionResult b = run_full(cfg, BaselineKind::EmpiricalCalib, 11);
  SessionResult c = run_full(cfg, BaselineKind::EmpiricalCalib, 12);
  CHECK(a.accuracies == b.accuracies);
  CHECK(a.state_bytes == b.state_bytes);
  CHECK(a.accuracies != c.accuracies);
}

TEST_CASE("json records are stable and carry no timing") {
  ExperimentConfig cfg = quick();
  SessionResult r = run_full(cfg, BaselineKind::PrototypeOnly, 3);
  std::string one = session_result_json(r);
  r.wall_ms.assign(r.wall_ms.size(), 9999.0);  // timing must not leak into the record
  std::string two = session_result_json(r);
  CHECK(one == two);
  CHECK(one.find("wall") == std::string::npos);
  CHECK(one.find("\"method\":\"PrototypeOnly\"") != std::string::npos);
  CHECK(one.find("\"seed\":3") != std::string::npos);
  CHECK(one.find("\"accuracies\":[") != std::string::npos);
  CHECK(one.find('\n') == std::string::npos);
}

TEST_CASE("the accuracy table averages per method across seeds") {
  SessionResult a;
  a.method = BaselineKind::Ldc;
  a.accuracies = {80.0, 70.0};
  SessionResult b;
  b.method = BaselineKind::Ldc;
  b.accuracies = {90.0, 80.0};
  for (SessionResult* r : {&a, &b}) {
    PdPr m = compute_pd_pr(r->accuracies);
    r->pd = m.pd;
    r->pr = m.pr;
  }
  std::string csv = accuracy_table_csv({a, b});
  CHECK(csv.find("method,session_0,session_1,pd,pr") == 0);
  CHECK(csv.find("LDC,85.0000,75.0000,10.0000,") != std::string::npos);
}

TEST_CASE("planar projection recovers an axis-aligned plane") {
  // Variance 25 along x0, 4 along x1, zero elsewhere.
  Rng rng(5);
  SampleSet s;
  s.features = Matrix(400, 5);
  for (std::size_t i = 0; i < 400; ++i) {
    s.features(i, 0) = 5.0 * rng.normal();
    s.features(i, 1) = 2.0 * rng.normal();
    s.labels.push_back(int(i % 3));
  }
  Projection p = project2d({s});
  CHECK(p.coords.rows() == 400);
  CHECK(p.explained == doctest::Approx(1.0));
  CHECK(p.set_idx == std::vector<int>(400, 0));
  CHECK(p.labels == s.labels);

  // PC1 must align with x0: the projected x must correlate with feature 0.
  double dot = 0.0, nx = 0.0, nf = 0.0;
  double mx = 0.0, mf = 0.0;
  for (std::size_t i = 0; i < 400; ++i) {
    mx += p.coords(i, 0) / 400.0;
    mf += s.features(i, 0) / 400.0;
  }
  for (std::size_t i = 0; i < 400; ++i) {
    double a = p.coords(i, 0) - mx, b = s.features(i, 0) - mf;
    dot += a * b;
    nx += a * a;
    nf += b * b;
  }
  CHECK(std::fabs(dot / std::sqrt(nx * nf)) > 0.999);
}

TEST_CASE("projection output is deterministic including eigenvector sign") {
  SynthSpec spec;
  spec.n_classes = 4;
  spec.dim = 7;
  spec.samples_per_class = 30;
  spec.seed = 9;
  SampleSet s = synth_generate(spec).samples;
  Projection p = project2d({s});
  Projection q = project2d({s});
  CHECK(p.coords == q.coords);
  CHECK(projection_csv(p) == projection_csv(q));
  CHECK(projection_csv(p).rfind("# explained ", 0) == 0);

  // Two sets keep their origin index.
  Projection two = project2d({s, s});
  CHECK(two.coords.rows() == 2 * s.size());
  CHECK(two.set_idx.front() == 0);
  CHECK(two.set_idx.back() == 1);
}

TEST_CASE("projection rejects unusable input") {
  SampleSet tiny;
  tiny.features = Matrix(2, 4);
  tiny.labels = {0, 1};
  CHECK(raises(Err::EmptyInput, [&] { project2d({tiny}); }));

  SampleSet a, b;
  a.features = Matrix(5, 4);
  a.labels.assign(5, 0);
  b.features = Matrix(5, 3);
  b.labels.assign(5, 0);
  CHECK(raises(Err::DimensionMismatch, [&] { project2d({a, b}); }));

  SampleSet thin;
  thin.features = Matrix(6, 1);
  thin.labels.assign(6, 0);
  CHECK(raises(Err::BadSpec, [&] { project2d({thin}); }));

  SampleSet flat;
  flat.features = Matrix(6, 3);  // all zeros, no variance
  flat.labels.assign(6, 0);
  CHECK(raises(Err::DegenerateSpectrum, [&] { project2d({flat}); }));
}

TEST_CASE("gradient audit passes at an arbitrary seed") {
  GradcheckReport r = run_gradcheck(4);
  CHECK(r.ok);
  CHECK(r.text.find("mapping") != std::string::npos);
  CHECK(r.text.find("matching") != std::string::npos);
}
