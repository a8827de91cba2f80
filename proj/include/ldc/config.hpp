#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ldc/dataio.hpp"
#include "ldc/protocol.hpp"

namespace ldc {

// Full description of one experiment: data geometry, session plan, training
// hyperparameters, methods and seeds. Parsed from a flat key=value file.
struct ExperimentConfig {
  std::size_t classes = 20;
  std::size_t dim = 16;
  std::size_t samples_per_class = 200;
  double separation = 2.5;
  double cov_scale = 1.0;
  double cov_anisotropy = 2.0;

  std::size_t base_classes = 12;
  std::size_t n_way = 2;
  std::size_t k_shot = 5;

  ProtocolConfig protocol;
  FewShotMode few_shot = FewShotMode::Normal;
  std::vector<BaselineKind> methods = {BaselineKind::Ldc, BaselineKind::PrototypeOnly,
                                       BaselineKind::EmpiricalCalib};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::string out_dir = "out";
};

// "key = value" lines; '#' starts a comment; blank lines ignored.
// Duplicate keys keep the last value.
std::map<std::string, std::string> parse_kv(const std::string& text);

// Typed validation. Unknown keys are rejected by name; every count and rate
// is range-checked; plan arithmetic (divisibility) is checked here so a bad
// config never reaches the session engine.
ExperimentConfig config_from_kv(const std::map<std::string, std::string>& kv);

ExperimentConfig load_config(const std::string& path);

// The exact key set config_from_kv accepts, for help text.
std::vector<std::string> config_keys();

}  // namespace ldc
