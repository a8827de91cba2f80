#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldc/config.hpp"
#include "ldc/protocol.hpp"

namespace ldc {

// One (method, seed) cell of the benchmark: generate data, split, run the
// base session and every incremental session, collect metrics.
SessionResult run_full(const ExperimentConfig& config, BaselineKind method, std::uint64_t seed);

// One-line JSON record. Wall times are deliberately absent so reruns with
// the same config are byte-identical; they belong in the timing log.
std::string session_result_json(const SessionResult& r);

// rows = methods, cols = sessions, cells = mean accuracy over seeds.
std::string accuracy_table_csv(const std::vector<SessionResult>& results);

// Exit codes: 0 success, 2 config problem, 3 runtime failure.
int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::vector<std::uint64_t>& seeds_override);

// which: sampler | recurrent | divergence | outlier | memory.
int cmd_ablate(const std::string& which, const std::string& config_path,
               const std::string& out_override);

struct Projection {
  Matrix coords;             // n x 2
  std::vector<int> set_idx;  // input set each row came from
  std::vector<int> labels;
  double explained = 0.0;    // (l1 + l2) / trace of the pooled covariance
};

// Top-2 PCA of the pooled rows. Eigenvector signs are fixed by making each
// vector's largest-magnitude entry positive, so output is reproducible.
Projection project2d(const std::vector<SampleSet>& sets);

// "# explained <v>" line, then "set,label,x,y" rows.
std::string projection_csv(const Projection& p);

int cmd_project(const std::vector<std::string>& inputs, const std::string& out_path);

struct GradcheckReport {
  bool ok = false;
  std::string text;
};

// Finite-difference audit of every analytic gradient in the project:
// mapping-net chain, calibration net, classifier rows, matching loss.
GradcheckReport run_gradcheck(std::uint64_t seed = 0);

int cmd_gradcheck(std::uint64_t seed = 0);

}  // namespace ldc
