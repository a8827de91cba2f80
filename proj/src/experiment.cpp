#include "ldc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "ldc/dataio.hpp"
#include "ldc/linalg.hpp"
#include "ldc/rng.hpp"

namespace ldc {

namespace {

SynthSpec synth_spec_for(const ExperimentConfig& config, std::uint64_t seed) {
  SynthSpec s;
  s.n_classes = config.classes;
  s.dim = config.dim;
  s.samples_per_class = config.samples_per_class;
  s.mean_separation = config.separation;
  s.cov_scale = config.cov_scale;
  s.cov_anisotropy = config.cov_anisotropy;
  s.seed = derive_seed(seed, 0xDA7A);
  return s;
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

SessionResult run_full(const ExperimentConfig& config, BaselineKind method, std::uint64_t seed) {
  SynthResult synth = synth_generate(synth_spec_for(config, seed));
  Split split = split_per_class(synth.samples, 0.2, derive_seed(seed, 0x5817));
  SessionPlan plan = make_plan(config.classes, config.base_classes, config.n_way, config.k_shot,
                               derive_seed(seed, 0x91a5));

  SessionResult out;
  out.method = method;
  out.seed = seed;

  double t0 = now_ms();
  BaseResult base = run_base_session(plan, subset_classes(split.train, plan.base_classes),
                                     subset_classes(split.test, plan.base_classes), config.protocol,
                                     method, derive_seed(seed, 0xBA5E));
  MethodState state = std::move(base.state);
  out.accuracies.push_back(base.accuracy);
  out.state_bytes.push_back(state_bytes(state));
  out.wall_ms.push_back(now_ms() - t0);

  for (std::size_t t = 0; t < plan.n_sessions(); ++t) {
    t0 = now_ms();
    const std::vector<int>& classes = plan.sessions[t];

    SampleSet shots;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      SampleSet block;
      block.features = sample_few_shot(class_rows(split.train, classes[i]), plan.shots_per_class,
                                       config.few_shot,
                                       derive_seed(seed, 0xF5 + 1000 * t + i));
      block.labels.assign(plan.shots_per_class, classes[i]);
      shots.append(block);
    }

    std::vector<int> seen_after = state.seen;
    seen_after.insert(seen_after.end(), classes.begin(), classes.end());
    double acc = run_incremental_session(state, shots, classes,
                                         subset_classes(split.test, seen_after), config.protocol,
                                         derive_seed(seed, 0x1000 + t));
    out.accuracies.push_back(acc);
    out.state_bytes.push_back(state_bytes(state));
    out.wall_ms.push_back(now_ms() - t0);
  }

  PdPr m = compute_pd_pr(out.accuracies);
  out.pd = m.pd;
  out.pr = m.pr;
  return out;
}

std::string session_result_json(const SessionResult& r) {
  nlohmann::json j;
  j["method"] = baseline_name(r.method);
  j["seed"] = r.seed;
  j["accuracies"] = r.accuracies;
  j["pd"] = r.pd;
  j["pr"] = r.pr;
  j["state_bytes"] = r.state_bytes;
  return j.dump();
}

std::string accuracy_table_csv(const std::vector<SessionResult>& results) {
  std::vector<BaselineKind> methods;
  std::size_t n_sessions = 0;
  for (const SessionResult& r : results) {
    bool known = false;
    for (BaselineKind m : methods) known = known || m == r.method;
    if (!known) methods.push_back(r.method);
    n_sessions = std::max(n_sessions, r.accuracies.size());
  }

  std::string csv = "method";
  for (std::size_t s = 0; s < n_sessions; ++s) csv += ",session_" + std::to_string(s);
  csv += ",pd,pr\n";

  char buf[64];
  for (BaselineKind m : methods) {
    std::vector<double> acc(n_sessions, 0.0);
    double pd = 0.0, pr = 0.0;
    std::size_t count = 0;
    for (const SessionResult& r : results)
      if (r.method == m) {
        for (std::size_t s = 0; s < r.accuracies.size(); ++s) acc[s] += r.accuracies[s];
        pd += r.pd;
        pr += r.pr;
        ++count;
      }
    csv += baseline_name(m);
    for (std::size_t s = 0; s < n_sessions; ++s) {
      std::snprintf(buf, sizeof buf, ",%.4f", acc[s] / double(count));
      csv += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.4f,%.4f\n", pd / double(count), pr / double(count));
    csv += buf;
  }
  return csv;
}

namespace {

std::string timestamp_utc() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

int run_cells(const ExperimentConfig& config, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream jsonl(out_dir + "/results.jsonl", std::ios::binary);
  std::ofstream timing(out_dir + "/timing.log");
  if (!jsonl || !timing) {
    std::fprintf(stderr, "cannot write into %s\n", out_dir.c_str());
    return 3;
  }

  std::vector<SessionResult> results;
  for (BaselineKind method : config.methods)
    for (std::uint64_t seed : config.seeds) {
      SessionResult r = run_full(config, method, seed);
      jsonl << session_result_json(r) << "\n";
      jsonl.flush();
      timing << timestamp_utc() << " method=" << baseline_name(method) << " seed=" << seed
             << " wall_ms=";
      for (std::size_t i = 0; i < r.wall_ms.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%.1f", i ? "," : "", r.wall_ms[i]);
        timing << buf;
      }
      timing << "\n";
      timing.flush();
      results.push_back(std::move(r));
    }

  std::ofstream table(out_dir + "/accuracy_table.csv", std::ios::binary);
  table << accuracy_table_csv(results);
  return table ? 0 : 3;
}

}  // namespace

int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::vector<std::uint64_t>& seeds_override) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
    if (!out_override.empty()) config.out_dir = out_override;
    if (!seeds_override.empty()) config.seeds = seeds_override;
  } catch (const LdcError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  try {
    return run_cells(config, config.out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  }
}

namespace {

struct MeanRow {
  std::vector<double> acc;
  double pd = 0.0;
  double pr = 0.0;
};

MeanRow mean_over_seeds(const ExperimentConfig& config, BaselineKind method) {
  MeanRow row;
  for (std::uint64_t seed : config.seeds) {
    SessionResult r = run_full(config, method, seed);
    if (row.acc.empty()) row.acc.assign(r.accuracies.size(), 0.0);
    for (std::size_t s = 0; s < r.accuracies.size(); ++s) row.acc[s] += r.accuracies[s];
    row.pd += r.pd;
    row.pr += r.pr;
  }
  double n = double(config.seeds.size());
  for (double& a : row.acc) a /= n;
  row.pd /= n;
  row.pr /= n;
  return row;
}

std::string row_csv(const std::string& tag, const MeanRow& row) {
  std::string out = tag;
  char buf[64];
  for (double a : row.acc) {
    std::snprintf(buf, sizeof buf, ",%.4f", a);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, ",%.4f,%.4f\n", row.pd, row.pr);
  return out + buf;
}

std::string acc_header(const std::string& key, std::size_t n_sessions) {
  std::string h = key;
  for (std::size_t s = 0; s < n_sessions; ++s) h += ",session_" + std::to_string(s);
  return h + ",pd,pr\n";
}

std::string ablate_sampler(const ExperimentConfig& config) {
  MeanRow on = mean_over_seeds(config, BaselineKind::Ldc);
  MeanRow off = mean_over_seeds(config, BaselineKind::PrototypeOnly);
  return acc_header("sampler", on.acc.size()) + row_csv("on", on) + row_csv("off", off);
}

std::string ablate_recurrent(const ExperimentConfig& config) {
  MeanRow full = mean_over_seeds(config, BaselineKind::Ldc);
  ExperimentConfig bare = config;
  bare.protocol.recur_iters = 0;
  MeanRow r0 = mean_over_seeds(bare, BaselineKind::Ldc);
  return acc_header("recur_iters", full.acc.size()) +
         row_csv("R=" + std::to_string(config.protocol.recur_iters), full) + row_csv("R=0", r0);
}

std::string ablate_divergence(const ExperimentConfig& config) {
  std::string csv;
  for (DivergenceKind kind : {DivergenceKind::KL, DivergenceKind::JS, DivergenceKind::Hellinger,
                              DivergenceKind::W2}) {
    ExperimentConfig c = config;
    c.protocol.divergence = kind;
    MeanRow row = mean_over_seeds(c, BaselineKind::Ldc);
    if (csv.empty()) csv = acc_header("divergence", row.acc.size());
    csv += row_csv(divergence_name(kind), row);
  }
  return csv;
}

std::string ablate_outlier(const ExperimentConfig& config) {
  std::string csv;
  for (FewShotMode mode : {FewShotMode::Normal, FewShotMode::Outlier}) {
    ExperimentConfig c = config;
    c.few_shot = mode;
    for (BaselineKind method : {BaselineKind::Ldc, BaselineKind::EmpiricalCalib}) {
      MeanRow row = mean_over_seeds(c, method);
      if (csv.empty()) csv = acc_header("mode_method", row.acc.size());
      csv += row_csv(std::string(few_shot_mode_name(mode)) + "_" + baseline_name(method), row);
    }
  }
  return csv;
}

// Byte growth against class count. Training budgets are slashed since the
// serialized sizes do not depend on how converged the runs are.
std::string ablate_memory(const ExperimentConfig& config) {
  std::string csv = "classes,ldc_bytes,empirical_bytes\n";
  for (std::size_t n : {std::size_t(10), std::size_t(20), std::size_t(50), std::size_t(100)}) {
    ExperimentConfig c = config;
    c.classes = n;
    c.base_classes = n / 2;
    c.n_way = n / 10;
    c.samples_per_class = std::min<std::size_t>(c.samples_per_class, 60);
    c.protocol.classifier_epochs = std::min<std::size_t>(c.protocol.classifier_epochs, 10);
    c.protocol.pcu_epochs = std::min<std::size_t>(c.protocol.pcu_epochs, 2);
    c.protocol.incremental_epochs = std::min<std::size_t>(c.protocol.incremental_epochs, 10);
    c.seeds = {config.seeds.front()};

    SessionResult ldc = run_full(c, BaselineKind::Ldc, c.seeds.front());
    SessionResult ec = run_full(c, BaselineKind::EmpiricalCalib, c.seeds.front());
    csv += std::to_string(n) + "," + std::to_string(ldc.state_bytes.back()) + "," +
           std::to_string(ec.state_bytes.back()) + "\n";
  }
  return csv;
}

}  // namespace

int cmd_ablate(const std::string& which, const std::string& config_path,
               const std::string& out_override) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
    if (!out_override.empty()) config.out_dir = out_override;
    if (which != "sampler" && which != "recurrent" && which != "divergence" &&
        which != "outlier" && which != "memory")
      fail(Err::ConfigError, "unknown ablation '" + which + "'");
  } catch (const LdcError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  try {
    std::string csv;
    if (which == "sampler") csv = ablate_sampler(config);
    if (which == "recurrent") csv = ablate_recurrent(config);
    if (which == "divergence") csv = ablate_divergence(config);
    if (which == "outlier") csv = ablate_outlier(config);
    if (which == "memory") csv = ablate_memory(config);

    std::filesystem::create_directories(config.out_dir);
    std::string path = config.out_dir + "/ablate_" + which + ".csv";
    std::ofstream out(path, std::ios::binary);
    out << csv;
    return out ? 0 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  }
}

Projection project2d(const std::vector<SampleSet>& sets) {
  Matrix pooled;
  Projection p;
  std::size_t total = 0, d = 0;
  for (const SampleSet& s : sets) total += s.size();
  if (total < 3) fail(Err::EmptyInput, "project2d: need at least 3 rows");
  for (std::size_t k = 0; k < sets.size(); ++k) {
    if (sets[k].size() == 0) continue;
    if (d == 0) {
      d = sets[k].dim();
      pooled = Matrix(total, d);
    }
    if (sets[k].dim() != d) fail(Err::DimensionMismatch, "project2d: set widths differ");
  }
  if (d < 2) fail(Err::BadSpec, "project2d: need dimension >= 2");

  std::size_t at = 0;
  for (std::size_t k = 0; k < sets.size(); ++k)
    for (std::size_t i = 0; i < sets[k].size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) pooled(at, j) = sets[k].features(i, j);
      p.set_idx.push_back(int(k));
      p.labels.push_back(sets[k].labels[i]);
      ++at;
    }

  GaussianStats fit = estimate_mean_cov(pooled);
  EigResult eig = eigen_symmetric(fit.cov);
  double trace = 0.0;
  for (double v : eig.values) trace += v;
  double top2 = eig.values[d - 1] + eig.values[d - 2];
  if (!(trace > 0.0) || !(top2 > 0.0))
    fail(Err::DegenerateSpectrum, "project2d: pooled variance is zero");
  p.explained = top2 / trace;

  Matrix axes(d, 2);
  for (std::size_t a = 0; a < 2; ++a) {
    std::size_t col = d - 1 - a;
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::fabs(eig.vectors(j, col)) > std::fabs(eig.vectors(arg, col))) arg = j;
    double sign = eig.vectors(arg, col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) axes(j, a) = sign * eig.vectors(j, col);
  }

  p.coords = Matrix(total, 2);
  for (std::size_t i = 0; i < total; ++i)
    for (std::size_t a = 0; a < 2; ++a) {
      double v = 0.0;
      for (std::size_t j = 0; j < d; ++j) v += (pooled(i, j) - fit.mean[j]) * axes(j, a);
      p.coords(i, a) = v;
    }
  return p;
}

std::string projection_csv(const Projection& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "# explained %.17g\n", p.explained);
  std::string out = buf;
  out += "set,label,x,y\n";
  for (std::size_t i = 0; i < p.coords.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", p.set_idx[i], p.labels[i],
                  p.coords(i, 0), p.coords(i, 1));
    out += buf;
  }
  return out;
}

int cmd_project(const std::vector<std::string>& inputs, const std::string& out_path) {
  try {
    if (inputs.empty()) {
      std::fprintf(stderr, "project: no input files\n");
      return 2;
    }
    std::vector<SampleSet> sets;
    for (const std::string& path : inputs) sets.push_back(read_embedding_file(path));
    Projection p = project2d(sets);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
      return 3;
    }
    out << projection_csv(p);
    return out ? 0 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  }
}

namespace {

double* net_param(Net& net, std::size_t idx) {
  for (Layer& layer : net.layers) {
    if (idx < layer.w.size()) return layer.w.data() + idx;
    idx -= layer.w.size();
    if (idx < layer.b.size()) return &layer.b[idx];
    idx -= layer.b.size();
  }
  fail(Err::BadSpec, "net_param: index out of range");
}

double bundle_at(const GradBundle& g, std::size_t idx) {
  for (std::size_t l = 0; l < g.dw.size(); ++l) {
    if (idx < g.dw[l].size()) return g.dw[l].data()[idx];
    idx -= g.dw[l].size();
    if (idx < g.db[l].size()) return g.db[l][idx];
    idx -= g.db[l].size();
  }
  fail(Err::BadSpec, "bundle_at: index out of range");
}

double rel_err(double fd, double an) {
  double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
  return std::fabs(fd - an) / denom;
}

Matrix random_spd_like(Rng& rng, std::size_t d, double ridge) {
  Matrix g(d, d);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  Matrix a = matmul(g.transposed(), g);
  a *= 1.0 / double(d);
  for (std::size_t i = 0; i < d; ++i) a(i, i) += ridge;
  a.symmetrize();
  return a;
}

struct CheckResult {
  std::size_t hits = 0;
  std::size_t total = 0;
};

CheckResult check_mapping_chain(std::uint64_t seed) {
  const std::size_t d = 6;
  PcuState pcu = make_pcu(d, derive_seed(seed, 1), 16, 3);
  Rng rng(derive_seed(seed, 2));
  pcu.shared.sigma = random_spd_like(rng, d, 0.3);
  pcu.shared.n_classes = 4;

  Vector w(d);
  for (auto& v : w) v = rng.normal();
  Matrix g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double v = rng.normal();
      g(i, j) = v;
      g(j, i) = v;
    }

  auto loss = [&](const PcuState& state) {
    Matrix mapped = map_covariance(state, w);
    double sum = 0.0;
    for (std::size_t i = 0; i < mapped.size(); ++i) sum += mapped.data()[i] * g.data()[i];
    return sum;
  };

  MapCovCache cache;
  map_covariance(pcu, w, &cache);
  GradBundle grads = GradBundle::zeros_like(pcu.mapping_net);
  map_covariance_backward(pcu, cache, g, grads);

  const double h = 1e-5;
  const std::size_t n_params = pcu.mapping_net.param_count();
  CheckResult r;
  r.total = 200;
  for (std::size_t k = 0; k < r.total; ++k) {
    std::size_t idx = std::size_t(rng.below(n_params));
    double* p = net_param(pcu.mapping_net, idx);
    double keep = *p;
    *p = keep + h;
    double up = loss(pcu);
    *p = keep - h;
    double down = loss(pcu);
    *p = keep;
    if (rel_err((up - down) / (2 * h), bundle_at(grads, idx)) < 1e-4) ++r.hits;
  }
  return r;
}

CheckResult check_calibration_net(std::uint64_t seed) {
  const std::size_t d = 6;
  PcuState pcu = make_pcu(d, derive_seed(seed, 3), 16, 3);
  Rng rng(derive_seed(seed, 4));

  Matrix x(8, d), g(8, d);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();

  auto loss = [&](const Net& net) {
    Matrix y = forward(net, x);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += y.data()[i] * g.data()[i];
    return sum;
  };

  ForwardCache cache;
  forward(pcu.calib_net, x, &cache);
  BackwardResult back = backward(pcu.calib_net, cache, g);

  const double h = 1e-5;
  const std::size_t n_params = pcu.calib_net.param_count();
  CheckResult r;
  r.total = 200;
  for (std::size_t k = 0; k < r.total; ++k) {
    std::size_t idx = std::size_t(rng.below(n_params));
    double* p = net_param(pcu.calib_net, idx);
    double keep = *p;
    *p = keep + h;
    double up = loss(pcu.calib_net);
    *p = keep - h;
    double down = loss(pcu.calib_net);
    *p = keep;
    if (rel_err((up - down) / (2 * h), bundle_at(back.grads, idx)) < 1e-4) ++r.hits;
  }
  return r;
}

CheckResult check_classifier(std::uint64_t seed) {
  const std::size_t nc = 5, d = 8, n = 40;
  Rng rng(derive_seed(seed, 5));
  ClassifierState c;
  c.vectors = Matrix(nc, d);
  for (std::size_t i = 0; i < c.vectors.size(); ++i) c.vectors.data()[i] = rng.normal();

  SampleSet data;
  data.features = Matrix(n, d);
  for (std::size_t i = 0; i < data.features.size(); ++i) data.features.data()[i] = rng.normal();
  for (std::size_t i = 0; i < n; ++i) data.labels.push_back(int(rng.below(nc)));

  ClassifierGrad an = classifier_gradient(c, data);

  const double h = 1e-6;
  CheckResult r;
  r.total = 200;
  for (std::size_t k = 0; k < r.total; ++k) {
    std::size_t idx = std::size_t(rng.below(c.vectors.size()));
    double keep = c.vectors.data()[idx];
    c.vectors.data()[idx] = keep + h;
    double up = classifier_gradient(c, data).loss;
    c.vectors.data()[idx] = keep - h;
    double down = classifier_gradient(c, data).loss;
    c.vectors.data()[idx] = keep;
    if (rel_err((up - down) / (2 * h), an.dvectors.data()[idx]) < 1e-4) ++r.hits;
  }
  return r;
}

CheckResult check_matching_loss(std::uint64_t seed) {
  const std::size_t d = 5, per_class = 30;
  Rng rng(derive_seed(seed, 6));

  auto random_set = [&](double shift) {
    SampleSet s;
    s.features = Matrix(3 * per_class, d);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t j = 0; j < d; ++j)
          s.features(c * per_class + i, j) = rng.normal() + shift * double(c);
        s.labels.push_back(int(c));
      }
    return s;
  };
  SampleSet cal = random_set(0.5);
  SampleSet real = random_set(0.7);

  const double h = 1e-5;
  CheckResult r;
  for (DivergenceKind kind : {DivergenceKind::KL, DivergenceKind::JS, DivergenceKind::Hellinger,
                              DivergenceKind::W2}) {
    MatchingLossResult ml = matching_loss(cal, real, kind);
    for (std::size_t k = 0; k < 50; ++k) {
      std::size_t idx = std::size_t(rng.below(cal.features.size()));
      double keep = cal.features.data()[idx];
      cal.features.data()[idx] = keep + h;
      double up = matching_loss(cal, real, kind).loss;
      cal.features.data()[idx] = keep - h;
      double down = matching_loss(cal, real, kind).loss;
      cal.features.data()[idx] = keep;
      if (rel_err((up - down) / (2 * h), ml.dfeatures.data()[idx]) < 1e-3) ++r.hits;
      ++r.total;
    }
  }
  return r;
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed) {
  struct Row {
    const char* name;
    CheckResult res;
    double need;
  };
  Row rows[] = {
      {"mapping net chain", check_mapping_chain(seed), 0.95},
      {"calibration net", check_calibration_net(seed), 0.95},
      {"classifier rows", check_classifier(seed), 0.95},
      {"matching loss", check_matching_loss(seed), 0.95},
  };

  GradcheckReport report;
  report.ok = true;
  char buf[128];
  for (const Row& row : rows) {
    bool pass = double(row.res.hits) >= row.need * double(row.res.total);
    report.ok = report.ok && pass;
    std::snprintf(buf, sizeof buf, "%-18s %3zu/%zu coordinates within tolerance  [%s]\n",
                  row.name, row.res.hits, row.res.total, pass ? "ok" : "FAIL");
    report.text += buf;
  }
  return report;
}

int cmd_gradcheck(std::uint64_t seed) {
  GradcheckReport report = run_gradcheck(seed);
  std::fputs(report.text.c_str(), stdout);
  return report.ok ? 0 : 1;
}

}  // namespace ldc
