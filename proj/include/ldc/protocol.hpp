#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldc/classifier.hpp"
#include "ldc/pcu.hpp"

namespace ldc {

// Class-incremental split: a base set plus T disjoint n-way sessions.
struct SessionPlan {
  std::vector<int> base_classes;
  std::vector<std::vector<int>> sessions;
  std::size_t shots_per_class = 0;

  std::size_t n_sessions() const { return sessions.size(); }
};

// Deterministic per seed: class ids 0..n_classes-1 are shuffled once, the
// first n_base become the base set, the rest split into n_way chunks.
SessionPlan make_plan(std::size_t n_classes, std::size_t n_base, std::size_t n_way,
                      std::size_t k_shot, std::uint64_t seed = 0);

enum class BaselineKind { Ldc, PrototypeOnly, EmpiricalCalib };

const char* baseline_name(BaselineKind k);
BaselineKind baseline_from_name(const std::string& name);

struct ProtocolConfig {
  std::size_t classifier_epochs = 200;  // base-session cross-entropy
  double classifier_lr = 1.0;
  std::size_t pcu_epochs = 60;          // 0 disables distribution matching
  double pcu_lr = 0.05;
  std::size_t incremental_epochs = 300;
  double incremental_lr = 0.2;
  std::size_t samples_per_class = 48;   // recovered/replayed rows per class
  std::size_t recur_iters = 3;
  DivergenceKind divergence = DivergenceKind::KL;
  double classifier_scale = 8.0;
};

// Everything a method carries between sessions. Labels are external class
// ids; classifier row r belongs to class seen[r]. The recovery unit's nets
// are frozen after the base session; only the shared covariance updates.
struct MethodState {
  BaselineKind method = BaselineKind::Ldc;
  ClassifierState cls;
  PcuState pcu;
  std::vector<GaussianStats> memory;  // EmpiricalCalib: one record per seen class
  std::vector<int> seen;
  std::size_t shots_per_class = 0;
  std::size_t n_base = 0;
};

// Classifier row for an external class id.
std::size_t dense_id(const MethodState& state, int class_id);

// Rows of one class, in input order.
Matrix class_rows(const SampleSet& data, int class_id);

// Rows whose labels appear in classes, grouped in the given class order.
SampleSet subset_classes(const SampleSet& data, const std::vector<int>& classes);

// Per-class split of a labeled set; test_fraction of each class's rows
// (rounded down, at least 1 when the class has 2+) go to the test side.
struct Split {
  SampleSet train;
  SampleSet test;
};
Split split_per_class(const SampleSet& data, double test_fraction, std::uint64_t seed);

struct BaseResult {
  MethodState state;
  double accuracy = 0.0;
};

// Base session: prototypes from base_train, cross-entropy training, shared
// covariance from per-class covariances, then (Ldc) distribution-matching
// training of the recovery unit. Accuracy is measured on base_test.
BaseResult run_base_session(const SessionPlan& plan, const SampleSet& base_train,
                            const SampleSet& base_test, const ProtocolConfig& config,
                            BaselineKind method, std::uint64_t seed);

// One incremental session. session_data holds exactly shots_per_class rows
// for each id in session_classes; test_seen covers only seen classes and is
// evaluated after the update. Returns accuracy over all seen classes.
double run_incremental_session(MethodState& state, const SampleSet& session_data,
                               const std::vector<int>& session_classes,
                               const SampleSet& test_seen, const ProtocolConfig& config,
                               std::uint64_t seed);

// 100 * correct / total over test rows; labels must be seen.
double evaluate(const MethodState& state, const SampleSet& test);

struct PdPr {
  double pd = 0.0;  // accuracy[0] - accuracy.back()
  double pr = 0.0;  // 100 * accuracy.back() / accuracy[0]
};
PdPr compute_pd_pr(const std::vector<double>& accuracies);

// Bytes a method must persist across sessions beyond the classifier itself:
// Ldc stores the recovery unit (size independent of class count),
// EmpiricalCalib stores one mean+cov record per seen class, PrototypeOnly
// stores nothing.
std::vector<std::uint8_t> serialize_memory(const std::vector<GaussianStats>& memory);
std::uint64_t state_bytes(const MethodState& state);

// Per-run record emitted by the experiment driver.
struct SessionResult {
  BaselineKind method = BaselineKind::Ldc;
  std::uint64_t seed = 0;
  std::vector<double> accuracies;          // length T+1
  double pd = 0.0;
  double pr = 0.0;
  std::vector<std::uint64_t> state_bytes;  // per session
  std::vector<double> wall_ms;             // per session, reported separately
};

}  // namespace ldc
