#include "ldc/protocol.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "doctest.h"
#include "ldc/classifier.hpp"
#include "ldc/dataio.hpp"
#include "ldc/linstats.hpp"
#include "ldc/pcu.hpp"
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

// Small well-separated synthetic world plus its session plan.
struct World {
  SynthResult synth;
  Split split;
  SessionPlan plan;
};

World make_world(std::size_t classes, std::size_t base, std::size_t way, double separation,
                 std::uint64_t seed) {
  SynthSpec spec;
  spec.n_classes = classes;
  spec.dim = 6;
  spec.samples_per_class = 60;
  spec.mean_separation = separation;
  spec.seed = seed;
  World w{synth_generate(spec), {}, {}};
  w.split = split_per_class(w.synth.samples, 0.2, derive_seed(seed, 1));
  w.plan = make_plan(classes, base, way, 5, derive_seed(seed, 2));
  return w;
}

ProtocolConfig quick_config() {
  ProtocolConfig c;
  c.classifier_epochs = 30;
  c.classifier_lr = 0.5;
  c.pcu_epochs = 4;
  c.pcu_lr = 0.01;
  c.incremental_epochs = 40;
  c.incremental_lr = 0.1;
  c.samples_per_class = 16;
  return c;
}

SampleSet shots_for(const World& w, const std::vector<int>& classes, std::size_t k,
                    std::uint64_t seed) {
  SampleSet out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    SampleSet block;
    block.features = sample_few_shot(class_rows(w.split.train, classes[i]), k,
                                     FewShotMode::Normal, derive_seed(seed, i));
    block.labels.assign(k, classes[i]);
    out.append(block);
  }
  return out;
}

}  // namespace

TEST_CASE("plans split the class universe as configured") {
  SessionPlan a = make_plan(100, 60, 5, 5);
  CHECK(a.base_classes.size() == 60);
  CHECK(a.n_sessions() == 8);
  for (const auto& s : a.sessions) CHECK(s.size() == 5);
  CHECK(a.shots_per_class == 5);

  SessionPlan b = make_plan(200, 100, 10, 5);
  CHECK(b.base_classes.size() == 100);
  CHECK(b.n_sessions() == 10);
  for (const auto& s : b.sessions) CHECK(s.size() == 10);
}

TEST_CASE("plan classes are disjoint and exhaustive") {
  SessionPlan p = make_plan(40, 22, 3, 5, 77);
  std::set<int> seen(p.base_classes.begin(), p.base_classes.end());
  CHECK(seen.size() == p.base_classes.size());
  for (const auto& s : p.sessions)
    for (int c : s) CHECK(seen.insert(c).second);
  CHECK(seen.size() == 40);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 39);
}

TEST_CASE("plan is deterministic per seed and varies across seeds") {
  SessionPlan a = make_plan(30, 18, 4, 5, 9);
  SessionPlan b = make_plan(30, 18, 4, 5, 9);
  SessionPlan c = make_plan(30, 18, 4, 5, 10);
  CHECK(a.base_classes == b.base_classes);
  CHECK(a.sessions == b.sessions);
  CHECK(a.base_classes != c.base_classes);
}

TEST_CASE("impossible splits are rejected") {
  CHECK(raises(Err::BadSplit, [] { make_plan(10, 6, 3, 5); }));
  CHECK(raises(Err::BadSplit, [] { make_plan(10, 10, 1, 5); }));
  CHECK(raises(Err::BadSplit, [] { make_plan(10, 0, 2, 5); }));
  CHECK(raises(Err::BadSplit, [] { make_plan(10, 6, 2, 0); }));
}

TEST_CASE("per-class split keeps fractions and never mixes rows") {
  SynthSpec spec;
  spec.n_classes = 4;
  spec.dim = 3;
  spec.samples_per_class = 50;
  spec.seed = 3;
  SynthResult synth = synth_generate(spec);
  Split s = split_per_class(synth.samples, 0.2, 11);

  CHECK(s.test.size() == 4 * 10);
  CHECK(s.train.size() == 4 * 40);

  // Row multisets per class must partition the originals.
  for (int c = 0; c < 4; ++c) {
    Matrix orig = class_rows(synth.samples, c);
    Matrix tr = class_rows(s.train, c);
    Matrix te = class_rows(s.test, c);
    CHECK(tr.rows() + te.rows() == orig.rows());
    auto key = [](const Matrix& m, std::size_t r) {
      std::vector<double> k(m.cols());
      for (std::size_t j = 0; j < m.cols(); ++j) k[j] = m(r, j);
      return k;
    };
    std::multiset<std::vector<double>> have;
    for (std::size_t r = 0; r < tr.rows(); ++r) have.insert(key(tr, r));
    for (std::size_t r = 0; r < te.rows(); ++r) have.insert(key(te, r));
    for (std::size_t r = 0; r < orig.rows(); ++r) {
      auto it = have.find(key(orig, r));
      REQUIRE(it != have.end());
      have.erase(it);
    }
    CHECK(have.empty());
  }

  Split again = split_per_class(synth.samples, 0.2, 11);
  CHECK(again.train.features == s.train.features);
  CHECK(again.test.labels == s.test.labels);
}

TEST_CASE("base session learns well-separated classes") {
  World w = make_world(10, 10 - 2 * 2, 2, 6.0, 5);
  BaseResult r = run_base_session(w.plan, subset_classes(w.split.train, w.plan.base_classes),
                                  subset_classes(w.split.test, w.plan.base_classes),
                                  quick_config(), BaselineKind::Ldc, 13);
  CHECK(r.accuracy >= 95.0);
  CHECK(r.state.cls.n_classes() == w.plan.base_classes.size());
  CHECK(r.state.seen == w.plan.base_classes);
}

TEST_CASE("base shared covariance equals the mean of per-class covariances") {
  World w = make_world(8, 4, 2, 5.0, 21);
  SampleSet base_train = subset_classes(w.split.train, w.plan.base_classes);
  BaseResult r = run_base_session(w.plan, base_train,
                                  subset_classes(w.split.test, w.plan.base_classes),
                                  quick_config(), BaselineKind::Ldc, 17);

  Matrix want(6, 6);
  for (int c : w.plan.base_classes) want += estimate_mean_cov(class_rows(base_train, c)).cov;
  want *= 1.0 / double(w.plan.base_classes.size());

  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
    worst = std::max(worst, std::fabs(want.data()[i] - r.state.pcu.shared.sigma.data()[i]));
  CHECK(worst < 1e-10);
  CHECK(r.state.pcu.shared.n_classes == std::int64_t(w.plan.base_classes.size()));
}

TEST_CASE("zero matching epochs leave the calibration nets at their initialization") {
  World w = make_world(8, 4, 2, 5.0, 33);
  ProtocolConfig cfg = quick_config();
  cfg.pcu_epochs = 0;
  BaseResult r = run_base_session(w.plan, subset_classes(w.split.train, w.plan.base_classes),
                                  subset_classes(w.split.test, w.plan.base_classes), cfg,
                                  BaselineKind::Ldc, 29);

  PcuState fresh = make_pcu(6, derive_seed(29, 0xDC), cfg.samples_per_class, cfg.recur_iters);
  CHECK(serialize_net(r.state.pcu.mapping_net) == serialize_net(fresh.mapping_net));
  CHECK(serialize_net(r.state.pcu.calib_net) == serialize_net(fresh.calib_net));
}

TEST_CASE("base data must cover exactly the base classes with enough rows") {
  World w = make_world(8, 4, 2, 5.0, 41);
  SampleSet base_train = subset_classes(w.split.train, w.plan.base_classes);
  SampleSet base_test = subset_classes(w.split.test, w.plan.base_classes);

  // Missing one base class.
  std::vector<int> short_list(w.plan.base_classes.begin(), w.plan.base_classes.end() - 1);
  SampleSet missing = subset_classes(w.split.train, short_list);
  CHECK(raises(Err::BadSplit, [&] {
    run_base_session(w.plan, missing, base_test, quick_config(), BaselineKind::Ldc, 1);
  }));

  // A stray non-base class.
  CHECK(raises(Err::BadSplit, [&] {
    run_base_session(w.plan, w.split.train, base_test, quick_config(), BaselineKind::Ldc, 1);
  }));

  // Fewer than 2K rows for one class.
  SampleSet thin = base_train;
  SampleSet pruned;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < thin.size(); ++i) {
    if (thin.labels[i] == w.plan.base_classes[0] && ++kept > 5) continue;
    SampleSet row;
    row.features = Matrix(1, thin.dim());
    for (std::size_t j = 0; j < thin.dim(); ++j) row.features(0, j) = thin.features(i, j);
    row.labels = {thin.labels[i]};
    pruned.append(row);
  }
  CHECK(raises(Err::BadSplit, [&] {
    run_base_session(w.plan, pruned, base_test, quick_config(), BaselineKind::Ldc, 1);
  }));
}

TEST_CASE("incremental sessions grow the classifier and keep LDC state flat") {
  World w = make_world(10, 6, 2, 5.0, 55);
  ProtocolConfig cfg = quick_config();
  BaseResult base = run_base_session(w.plan, subset_classes(w.split.train, w.plan.base_classes),
                                     subset_classes(w.split.test, w.plan.base_classes), cfg,
                                     BaselineKind::Ldc, 3);
  MethodState st = std::move(base.state);

  std::size_t bytes0 = state_bytes(st);
  std::vector<std::uint8_t> map0 = serialize_net(st.pcu.mapping_net);
  std::vector<std::uint8_t> cal0 = serialize_net(st.pcu.calib_net);

  std::vector<int> seen = w.plan.base_classes;
  for (std::size_t t = 0; t < w.plan.n_sessions(); ++t) {
    const std::vector<int>& classes = w.plan.sessions[t];
    seen.insert(seen.end(), classes.begin(), classes.end());
    SampleSet shots = shots_for(w, classes, w.plan.shots_per_class, 100 + t);
    double acc = run_incremental_session(st, shots, classes, subset_classes(w.split.test, seen),
                                         cfg, 200 + t);
    CHECK(acc > 0.0);
    CHECK(st.cls.n_classes() == 6 + (t + 1) * 2);
    CHECK(st.seen == seen);
    // Fixed-memory claim: byte count never moves, nets stay frozen.
    CHECK(state_bytes(st) == bytes0);
    CHECK(serialize_net(st.pcu.mapping_net) == map0);
    CHECK(serialize_net(st.pcu.calib_net) == cal0);
  }
}

TEST_CASE("empirical-calibration memory grows by one record per class") {
  World w = make_world(10, 6, 2, 5.0, 55);
  ProtocolConfig cfg = quick_config();
  BaseResult base = run_base_session(w.plan, subset_classes(w.split.train, w.plan.base_classes),
                                     subset_classes(w.split.test, w.plan.base_classes), cfg,
                                     BaselineKind::EmpiricalCalib, 3);
  MethodState st = std::move(base.state);
  CHECK(st.memory.size() == 6);

  // Record layout: u32 dim + d doubles (mean) + d*d doubles (cov).
  const std::size_t d = 6;
  const std::size_t record = 4 + 8 * d + 8 * d * d;
  CHECK(state_bytes(st) == 12 + 6 * record);

  std::size_t prev = state_bytes(st);
  std::vector<int> seen = w.plan.base_classes;
  for (std::size_t t = 0; t < w.plan.n_sessions(); ++t) {
    const std::vector<int>& classes = w.plan.sessions[t];
    seen.insert(seen.end(), classes.begin(), classes.end());
    SampleSet shots = shots_for(w, classes, w.plan.shots_per_class, 300 + t);
    run_incremental_session(st, shots, classes, subset_classes(w.split.test, seen), cfg, 400 + t);
    CHECK(st.memory.size() == seen.size());
    std::size_t now = state_bytes(st);
    CHECK(now - prev == classes.size() * record);
    prev = now;
  }
}

TEST_CASE("session classes must be new and shots complete") {
  World w = make_world(10, 6, 2, 5.0, 61);
  ProtocolConfig cfg = quick_config();
  BaseResult base = run_base_session(w.plan, subset_classes(w.split.train, w.plan.base_classes),
                                     subset_classes(w.split.test, w.plan.base_classes), cfg,
                                     BaselineKind::PrototypeOnly, 3);
  MethodState st = std::move(base.state);

  const std::vector<int>& first = w.plan.sessions[0];
  std::vector<int> seen = w.plan.base_classes;
  seen.insert(seen.end(), first.begin(), first.end());
  SampleSet test_seen = subset_classes(w.split.test, seen);

  // Replaying a base class collides.
  std::vector<int> collide = {w.plan.base_classes[0], first[0]};
  SampleSet bad_shots = shots_for(w, collide, w.plan.shots_per_class, 7);
  MethodState tmp = st;
  CHECK(raises(Err::ClassCollision, [&] {
    run_incremental_session(tmp, bad_shots, collide, test_seen, cfg, 9);
  }));

  // Shots for a class outside the session list collide too.
  SampleSet stray = shots_for(w, {first[0], w.plan.sessions[1][0]}, w.plan.shots_per_class, 7);
  MethodState tmp2 = st;
  CHECK(raises(Err::ClassCollision, [&] {
    run_incremental_session(tmp2, stray, first, test_seen, cfg, 9);
  }));

  // Wrong shot count.
  SampleSet four = shots_for(w, first, 4, 7);
  MethodState tmp3 = st;
  CHECK(raises(Err::ShotCountMismatch, [&] {
    run_incremental_session(tmp3, four, first, test_seen, cfg, 9);
  }));
}

TEST_CASE("full runs are bitwise reproducible") {
  auto one = [](std::uint64_t seed) {
    World w = make_world(10, 6, 2, 4.0, seed);
    ProtocolConfig cfg = quick_config();
    BaseResult base = run_base_session(w.plan, subset_classes(w.split.train, w.plan.base_classes),
                                       subset_classes(w.split.test, w.plan.base_classes), cfg,
                                       BaselineKind::Ldc, derive_seed(seed, 9));
    MethodState st = std::move(base.state);
    std::vector<double> accs{base.accuracy};
    std::vector<int> seen = w.plan.base_classes;
    for (std::size_t t = 0; t < w.plan.n_sessions(); ++t) {
      const std::vector<int>& classes = w.plan.sessions[t];
      seen.insert(seen.end(), classes.begin(), classes.end());
      SampleSet shots = shots_for(w, classes, w.plan.shots_per_class, derive_seed(seed, 50 + t));
      accs.push_back(run_incremental_session(st, shots, classes,
                                             subset_classes(w.split.test, seen), cfg,
                                             derive_seed(seed, 90 + t)));
    }
    return std::pair{accs, serialize_pcu(st.pcu)};
  };
  auto a = one(123);
  auto b = one(123);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("evaluation scores exact fractions") {
  MethodState st;
  st.method = BaselineKind::PrototypeOnly;
  st.seen = {3, 7};
  st.n_base = 2;
  st.cls.vectors = Matrix(2, 2);
  st.cls.vectors(0, 0) = 1.0;  // class 3 points along +x
  st.cls.vectors(1, 1) = 1.0;  // class 7 points along +y

  SampleSet test;
  test.features = Matrix(4, 2);
  test.features(0, 0) = 2.0;                            // -> class 3
  test.features(1, 1) = 5.0;                            // -> class 7
  test.features(2, 0) = 1.0; test.features(2, 1) = 0.2; // -> class 3
  test.features(3, 0) = 0.1; test.features(3, 1) = 3.0; // -> class 7
  test.labels = {3, 7, 3, 7};
  CHECK(evaluate(st, test) == doctest::Approx(100.0));

  test.labels = {3, 7, 7, 7};  // row 2 now wrong
  CHECK(evaluate(st, test) == doctest::Approx(75.0));

  test.labels = {3, 7, 7, 9};
  CHECK(raises(Err::UnseenLabel, [&] { evaluate(st, test); }));
}

TEST_CASE("prototype classifier is perfect on its own prototypes") {
  World w = make_world(6, 4, 2, 6.0, 71);
  SampleSet base_train = subset_classes(w.split.train, w.plan.base_classes);
  ProtocolConfig cfg = quick_config();
  cfg.classifier_epochs = 0;
  BaseResult r = run_base_session(w.plan, base_train,
                                  subset_classes(w.split.test, w.plan.base_classes), cfg,
                                  BaselineKind::PrototypeOnly, 3);

  SampleSet protos;
  protos.features = Matrix(w.plan.base_classes.size(), 6);
  for (std::size_t c = 0; c < w.plan.base_classes.size(); ++c) {
    GaussianStats g = estimate_mean_cov(class_rows(base_train, w.plan.base_classes[c]));
    for (std::size_t j = 0; j < 6; ++j) protos.features(c, j) = g.mean[j];
    protos.labels.push_back(w.plan.base_classes[c]);
  }
  CHECK(evaluate(r.state, protos) == doctest::Approx(100.0));
}

TEST_CASE("drop and retention arithmetic matches the published rows") {
  PdPr ldc = compute_pd_pr({77.89, 70.0, 61.58});
  CHECK(std::fabs(ldc.pd - 16.31) < 0.005);
  CHECK(std::fabs(ldc.pr - 79.06) < 0.01);

  PdPr ft = compute_pd_pr({68.68, 30.0, 17.18});
  CHECK(std::fabs(ft.pd - 51.50) < 0.005);
  CHECK(std::fabs(ft.pr - 25.01) < 0.02);

  PdPr flat = compute_pd_pr({64.0, 64.0, 64.0});
  CHECK(flat.pd == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(flat.pr == doctest::Approx(100.0).epsilon(1e-12));

  CHECK(raises(Err::EmptyList, [] { compute_pd_pr({}); }));
  CHECK(raises(Err::BadSpec, [] { compute_pd_pr({0.0, 10.0}); }));
  CHECK(raises(Err::BadSpec, [] { compute_pd_pr({50.0, 101.0}); }));
}

TEST_CASE("method names round-trip") {
  for (BaselineKind k :
       {BaselineKind::Ldc, BaselineKind::PrototypeOnly, BaselineKind::EmpiricalCalib})
    CHECK(baseline_from_name(baseline_name(k)) == k);
  CHECK(raises(Err::BadSpec, [] { baseline_from_name("NearestMean"); }));
}
