#include "ldc/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "ldc/bytes.hpp"
#include "ldc/rng.hpp"

namespace ldc {

SessionPlan make_plan(std::size_t n_classes, std::size_t n_base, std::size_t n_way,
                      std::size_t k_shot, std::uint64_t seed) {
  if (n_classes < 2 || n_base < 1 || n_way < 1 || k_shot < 1)
    fail(Err::BadSplit, "make_plan: counts must be positive");
  if (n_base >= n_classes) fail(Err::BadSplit, "make_plan: no classes left for sessions");
  std::size_t rest = n_classes - n_base;
  if (rest % n_way != 0)
    fail(Err::BadSplit, "make_plan: " + std::to_string(rest) + " not divisible by " +
                            std::to_string(n_way));

  std::vector<int> ids(n_classes);
  for (std::size_t i = 0; i < n_classes; ++i) ids[i] = int(i);
  Rng rng(derive_seed(seed, 0x9'1a57));
  for (std::size_t i = 0; i + 1 < n_classes; ++i) {
    std::size_t j = i + std::size_t(rng.below(n_classes - i));
    std::swap(ids[i], ids[j]);
  }

  SessionPlan plan;
  plan.shots_per_class = k_shot;
  plan.base_classes.assign(ids.begin(), ids.begin() + std::ptrdiff_t(n_base));
  for (std::size_t s = 0; s < rest / n_way; ++s) {
    auto begin = ids.begin() + std::ptrdiff_t(n_base + s * n_way);
    plan.sessions.emplace_back(begin, begin + std::ptrdiff_t(n_way));
  }
  return plan;
}

const char* baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::Ldc: return "LDC";
    case BaselineKind::PrototypeOnly: return "PrototypeOnly";
    case BaselineKind::EmpiricalCalib: return "EmpiricalCalib";
  }
  return "?";
}

BaselineKind baseline_from_name(const std::string& name) {
  if (name == "LDC") return BaselineKind::Ldc;
  if (name == "PrototypeOnly") return BaselineKind::PrototypeOnly;
  if (name == "EmpiricalCalib") return BaselineKind::EmpiricalCalib;
  fail(Err::BadSpec, "unknown method: " + name);
}

std::size_t dense_id(const MethodState& state, int class_id) {
  for (std::size_t r = 0; r < state.seen.size(); ++r)
    if (state.seen[r] == class_id) return r;
  fail(Err::UnseenLabel, "class " + std::to_string(class_id) + " not seen");
}

Split split_per_class(const SampleSet& data, double test_fraction, std::uint64_t seed) {
  if (data.size() == 0) fail(Err::EmptyInput, "split_per_class: empty set");
  if (!(test_fraction >= 0.0) || !(test_fraction < 1.0))
    fail(Err::BadSpec, "split_per_class: test_fraction must be in [0, 1)");

  std::vector<int> classes;
  for (int l : data.labels)
    if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
  std::sort(classes.begin(), classes.end());

  Split out;
  const std::size_t d = data.dim();
  for (int c : classes) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.labels[i] == c) rows.push_back(i);

    Rng rng(derive_seed(seed, 0xF0 + std::uint64_t(c)));
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      std::size_t j = i + std::size_t(rng.below(rows.size() - i));
      std::swap(rows[i], rows[j]);
    }

    std::size_t n_test = std::size_t(double(rows.size()) * test_fraction);
    if (test_fraction > 0.0 && n_test == 0 && rows.size() >= 2) n_test = 1;

    for (std::size_t i = 0; i < rows.size(); ++i) {
      SampleSet one;
      one.features = Matrix(1, d);
      for (std::size_t j = 0; j < d; ++j) one.features(0, j) = data.features(rows[i], j);
      one.labels = {c};
      (i < n_test ? out.test : out.train).append(one);
    }
  }
  return out;
}

Matrix class_rows(const SampleSet& data, int class_id) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] == class_id) rows.push_back(i);
  Matrix m(rows.size(), data.dim());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < data.dim(); ++j) m(i, j) = data.features(rows[i], j);
  return m;
}

SampleSet subset_classes(const SampleSet& data, const std::vector<int>& classes) {
  SampleSet out;
  for (int c : classes) {
    SampleSet block;
    block.features = class_rows(data, c);
    block.labels.assign(block.features.rows(), c);
    if (block.features.rows() > 0) out.append(block);
  }
  return out;
}

namespace {

// Same features, labels replaced by classifier row indices.
SampleSet densify(const MethodState& state, const SampleSet& data) {
  SampleSet out;
  out.features = data.features;
  out.labels.reserve(data.size());
  for (int l : data.labels) out.labels.push_back(int(dense_id(state, l)));
  return out;
}

}  // namespace

BaseResult run_base_session(const SessionPlan& plan, const SampleSet& base_train,
                            const SampleSet& base_test, const ProtocolConfig& config,
                            BaselineKind method, std::uint64_t seed) {
  if (plan.base_classes.empty()) fail(Err::BadSplit, "run_base_session: empty base set");
  if (base_train.size() == 0) fail(Err::EmptyInput, "run_base_session: empty train set");

  for (int l : base_train.labels)
    if (std::find(plan.base_classes.begin(), plan.base_classes.end(), l) ==
        plan.base_classes.end())
      fail(Err::BadSplit, "run_base_session: label " + std::to_string(l) + " not a base class");

  std::vector<Matrix> per_class;
  per_class.reserve(plan.base_classes.size());
  for (int c : plan.base_classes) {
    Matrix rows = class_rows(base_train, c);
    if (rows.rows() < 2 * plan.shots_per_class)
      fail(Err::BadSplit, "run_base_session: class " + std::to_string(c) +
                              " has fewer than 2K samples");
    per_class.push_back(std::move(rows));
  }

  MethodState state;
  state.method = method;
  state.seen = plan.base_classes;
  state.shots_per_class = plan.shots_per_class;
  state.n_base = plan.base_classes.size();

  state.cls = init_prototypes(per_class, config.classifier_scale);
  state.cls = train_classifier(state.cls, densify(state, base_train), config.classifier_epochs,
                               config.classifier_lr);

  const std::size_t d = base_train.dim();
  state.pcu = make_pcu(d, derive_seed(seed, 0xDC), config.samples_per_class, config.recur_iters);
  state.pcu.shared = update_shared_cov(SharedCovariance::zero(d), per_class);

  if (method == BaselineKind::Ldc && config.pcu_epochs > 0) {
    PcuTrainResult r = train_pcu_base(state.pcu, state.cls, densify(state, base_train),
                                      config.pcu_epochs, config.pcu_lr,
                                      derive_seed(seed, 0xDD), config.divergence);
    state.pcu = std::move(r.pcu);
  }
  if (method == BaselineKind::EmpiricalCalib)
    for (const Matrix& rows : per_class) state.memory.push_back(estimate_mean_cov(rows));

  BaseResult out;
  out.accuracy = evaluate(state, base_test);
  out.state = std::move(state);
  return out;
}

double run_incremental_session(MethodState& state, const SampleSet& session_data,
                               const std::vector<int>& session_classes,
                               const SampleSet& test_seen, const ProtocolConfig& config,
                               std::uint64_t seed) {
  if (session_classes.empty()) fail(Err::BadSplit, "incremental session with no classes");
  for (int c : session_classes)
    if (std::find(state.seen.begin(), state.seen.end(), c) != state.seen.end())
      fail(Err::ClassCollision, "class " + std::to_string(c) + " already seen");
  for (int l : session_data.labels)
    if (std::find(session_classes.begin(), session_classes.end(), l) == session_classes.end())
      fail(Err::ClassCollision, "label " + std::to_string(l) + " outside this session");

  std::vector<Matrix> shot_rows;
  for (int c : session_classes) {
    Matrix rows = class_rows(session_data, c);
    if (rows.rows() != state.shots_per_class)
      fail(Err::ShotCountMismatch, "class " + std::to_string(c) + " has " +
                                       std::to_string(rows.rows()) + " shots, expected " +
                                       std::to_string(state.shots_per_class));
    shot_rows.push_back(std::move(rows));
  }

  Matrix prototypes(session_classes.size(), session_data.dim());
  for (std::size_t c = 0; c < shot_rows.size(); ++c)
    for (std::size_t i = 0; i < shot_rows[c].rows(); ++i)
      for (std::size_t j = 0; j < shot_rows[c].cols(); ++j)
        prototypes(c, j) += shot_rows[c](i, j) / double(shot_rows[c].rows());

  state.cls = expand(state.cls, prototypes);
  for (int c : session_classes) state.seen.push_back(c);

  SampleSet reals = densify(state, session_data);
  SampleSet train_set = reals;

  if (state.method == BaselineKind::Ldc) {
    state.pcu.shared = update_shared_cov(state.pcu.shared, shot_rows);

    std::vector<int> all_rows(state.seen.size());
    for (std::size_t r = 0; r < all_rows.size(); ++r) all_rows[r] = int(r);
    SampleSet biased =
        sample_biased(state.pcu, state.cls, all_rows, derive_seed(seed, 0xB1A5));
    train_set.append(calibrate(state.pcu, biased));
  } else if (state.method == BaselineKind::EmpiricalCalib) {
    // New-class stats lean on the two most similar base-class records.
    for (std::size_t c = 0; c < session_classes.size(); ++c) {
      Vector proto(session_data.dim());
      for (std::size_t j = 0; j < proto.size(); ++j) proto[j] = prototypes(c, j);

      std::vector<std::pair<double, std::size_t>> sims;
      double pn = norm2(proto);
      for (std::size_t b = 0; b < state.n_base; ++b) {
        const Vector& m = state.memory[b].mean;
        double dot = 0.0;
        for (std::size_t j = 0; j < proto.size(); ++j) dot += proto[j] * m[j];
        double denom = pn * norm2(m);
        sims.push_back({denom > 0.0 ? dot / denom : -1.0, b});
      }
      std::sort(sims.begin(), sims.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
      });
      std::size_t k = std::min<std::size_t>(2, sims.size());

      GaussianStats rec;
      rec.mean = proto;
      rec.cov = Matrix(proto.size(), proto.size());
      for (std::size_t t = 0; t < k; ++t) {
        const GaussianStats& src = state.memory[sims[t].second];
        for (std::size_t j = 0; j < proto.size(); ++j) rec.mean[j] += src.mean[j];
        rec.cov += src.cov;
      }
      for (auto& v : rec.mean) v /= double(k + 1);
      rec.cov *= 1.0 / double(k);
      state.memory.push_back(std::move(rec));
    }
    for (std::size_t r = 0; r < state.seen.size(); ++r)
      train_set.append(sample_gaussian(state.memory[r], config.samples_per_class,
                                       derive_seed(seed, 0xEC00 + r), int(r)));
  }

  state.cls = train_classifier(state.cls, train_set, config.incremental_epochs,
                               config.incremental_lr);
  return evaluate(state, test_seen);
}

double evaluate(const MethodState& state, const SampleSet& test) {
  if (test.size() == 0) fail(Err::EmptyInput, "evaluate: empty test set");
  std::size_t correct = 0;
  Vector x(test.dim());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t want = dense_id(state, test.labels[i]);
    for (std::size_t j = 0; j < test.dim(); ++j) x[j] = test.features(i, j);
    if (std::size_t(predict(x, state.cls)) == want) ++correct;
  }
  return 100.0 * double(correct) / double(test.size());
}

PdPr compute_pd_pr(const std::vector<double>& accuracies) {
  if (accuracies.empty()) fail(Err::EmptyList, "compute_pd_pr: no accuracies");
  for (double a : accuracies)
    if (!(a >= 0.0 && a <= 100.0)) fail(Err::BadSpec, "accuracy outside [0, 100]");
  if (accuracies.front() == 0.0) fail(Err::BadSpec, "session-0 accuracy is zero");
  PdPr out;
  out.pd = accuracies.front() - accuracies.back();
  out.pr = 100.0 * accuracies.back() / accuracies.front();
  return out;
}

std::vector<std::uint8_t> serialize_memory(const std::vector<GaussianStats>& memory) {
  ByteWriter w;
  w.magic("LDCM");
  w.u32(1);
  w.u32(std::uint32_t(memory.size()));
  for (const GaussianStats& g : memory) {
    w.u32(std::uint32_t(g.dim()));
    for (double v : g.mean) w.f64(v);
    for (std::size_t i = 0; i < g.cov.size(); ++i) w.f64(g.cov.data()[i]);
  }
  return w.take();
}

std::uint64_t state_bytes(const MethodState& state) {
  switch (state.method) {
    case BaselineKind::Ldc: return serialize_pcu(state.pcu).size();
    case BaselineKind::PrototypeOnly: return 0;
    case BaselineKind::EmpiricalCalib: return serialize_memory(state.memory).size();
  }
  return 0;
}

}  // namespace ldc
