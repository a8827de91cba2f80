#include "ldc/config.hpp"

#include <fstream>
#include <sstream>

namespace ldc {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Comma or whitespace separated; empty fields are dropped so "a, b" and
// "a b" parse the same.
std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long n = std::stoll(v, &pos);
    if (pos != v.size() || n < 0) throw std::invalid_argument(v);
    return std::size_t(n);
  } catch (const std::exception&) {
    fail(Err::ConfigError, "key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(Err::ConfigError, "key '" + key + "': expected a number, got '" + v + "'");
  }
}

}  // namespace

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(Err::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(Err::ConfigError, "line " + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

std::vector<std::string> config_keys() {
  return {"classes",          "dim",
          "samples_per_class", "separation",
          "cov_scale",        "cov_anisotropy",
          "base_classes",     "n_way",
          "k_shot",           "classifier_epochs",
          "classifier_lr",    "classifier_scale",
          "pcu_epochs",       "pcu_lr",
          "incremental_epochs", "incremental_lr",
          "pcu_samples_per_class", "recur_iters",
          "divergence",       "few_shot_mode",
          "methods",          "seeds",
          "out_dir"};
}

ExperimentConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  std::vector<std::string> known = config_keys();
  for (const auto& [key, value] : kv) {
    (void)value;
    bool ok = false;
    for (const std::string& k : known) ok = ok || k == key;
    if (!ok) fail(Err::ConfigError, "unknown key '" + key + "'");
  }
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  ExperimentConfig c;
  if (auto* v = get("classes")) c.classes = parse_count("classes", *v);
  if (auto* v = get("dim")) c.dim = parse_count("dim", *v);
  if (auto* v = get("samples_per_class"))
    c.samples_per_class = parse_count("samples_per_class", *v);
  if (auto* v = get("separation")) c.separation = parse_real("separation", *v);
  if (auto* v = get("cov_scale")) c.cov_scale = parse_real("cov_scale", *v);
  if (auto* v = get("cov_anisotropy")) c.cov_anisotropy = parse_real("cov_anisotropy", *v);
  if (auto* v = get("base_classes")) c.base_classes = parse_count("base_classes", *v);
  if (auto* v = get("n_way")) c.n_way = parse_count("n_way", *v);
  if (auto* v = get("k_shot")) c.k_shot = parse_count("k_shot", *v);

  if (auto* v = get("classifier_epochs"))
    c.protocol.classifier_epochs = parse_count("classifier_epochs", *v);
  if (auto* v = get("classifier_lr")) c.protocol.classifier_lr = parse_real("classifier_lr", *v);
  if (auto* v = get("classifier_scale"))
    c.protocol.classifier_scale = parse_real("classifier_scale", *v);
  if (auto* v = get("pcu_epochs")) c.protocol.pcu_epochs = parse_count("pcu_epochs", *v);
  if (auto* v = get("pcu_lr")) c.protocol.pcu_lr = parse_real("pcu_lr", *v);
  if (auto* v = get("incremental_epochs"))
    c.protocol.incremental_epochs = parse_count("incremental_epochs", *v);
  if (auto* v = get("incremental_lr"))
    c.protocol.incremental_lr = parse_real("incremental_lr", *v);
  if (auto* v = get("pcu_samples_per_class"))
    c.protocol.samples_per_class = parse_count("pcu_samples_per_class", *v);
  if (auto* v = get("recur_iters")) c.protocol.recur_iters = parse_count("recur_iters", *v);
  if (auto* v = get("divergence")) {
    try {
      c.protocol.divergence = divergence_from_name(*v);
    } catch (const LdcError& e) {
      fail(Err::ConfigError, std::string("key 'divergence': ") + e.what());
    }
  }
  if (auto* v = get("few_shot_mode")) {
    try {
      c.few_shot = few_shot_mode_from_name(*v);
    } catch (const LdcError& e) {
      fail(Err::ConfigError, std::string("key 'few_shot_mode': ") + e.what());
    }
  }
  if (auto* v = get("methods")) {
    c.methods.clear();
    for (const std::string& name : split_list(*v)) {
      try {
        c.methods.push_back(baseline_from_name(name));
      } catch (const LdcError& e) {
        fail(Err::ConfigError, std::string("key 'methods': ") + e.what());
      }
    }
  }
  if (auto* v = get("seeds")) {
    c.seeds.clear();
    for (const std::string& s : split_list(*v))
      c.seeds.push_back(parse_count("seeds", s));
  }
  if (auto* v = get("out_dir")) c.out_dir = *v;

  if (c.classes < 2) fail(Err::ConfigError, "key 'classes': need at least 2");
  if (c.dim < 1) fail(Err::ConfigError, "key 'dim': need at least 1");
  if (c.k_shot < 1) fail(Err::ConfigError, "key 'k_shot': need at least 1");
  if (c.n_way < 1) fail(Err::ConfigError, "key 'n_way': need at least 1");
  if (c.base_classes < 1 || c.base_classes >= c.classes)
    fail(Err::ConfigError, "key 'base_classes': must be in [1, classes)");
  if ((c.classes - c.base_classes) % c.n_way != 0)
    fail(Err::ConfigError, "key 'n_way': " + std::to_string(c.classes - c.base_classes) +
                               " incremental classes not divisible by " +
                               std::to_string(c.n_way));
  // The 20% test split must leave 2K train rows per class, and outlier-mode
  // few-shot sampling needs 5K.
  std::size_t train_rows = c.samples_per_class - c.samples_per_class / 5;
  std::size_t need = std::max<std::size_t>(2 * c.k_shot,
                                           c.few_shot == FewShotMode::Outlier ? 5 * c.k_shot : 0);
  if (train_rows < need)
    fail(Err::ConfigError, "key 'samples_per_class': " + std::to_string(train_rows) +
                               " train rows per class, need " + std::to_string(need));
  if (!(c.separation > 0.0) || !(c.cov_scale > 0.0) || !(c.cov_anisotropy > 0.0))
    fail(Err::ConfigError, "separation, cov_scale, cov_anisotropy must be positive");
  if (!(c.protocol.classifier_lr >= 0.0) || !(c.protocol.pcu_lr >= 0.0) ||
      !(c.protocol.incremental_lr >= 0.0))
    fail(Err::ConfigError, "learning rates must be non-negative");
  if (!(c.protocol.classifier_scale > 0.0))
    fail(Err::ConfigError, "key 'classifier_scale': must be positive");
  if (c.protocol.samples_per_class < 2)
    fail(Err::ConfigError, "key 'pcu_samples_per_class': need at least 2");
  if (c.methods.empty()) fail(Err::ConfigError, "key 'methods': empty list");
  if (c.seeds.empty()) fail(Err::ConfigError, "key 'seeds': empty list");
  if (c.out_dir.empty()) fail(Err::ConfigError, "key 'out_dir': empty");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::IoError, "cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_kv(parse_kv(buf.str()));
}

}  // namespace ldc
