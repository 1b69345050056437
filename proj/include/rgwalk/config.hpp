#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rgwalk {

inline constexpr int kSchemaVersion = 1;

/// Every tunable of every subcommand. Files hold `key = value` lines; `#`
/// starts a comment; lists are comma separated.
struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  // kernel
  std::string preset = "two_step_nn";
  int dim = 1;
  double hold = 0.5;
  std::string custom_kernel;  // path to a kernel JSON file for preset = custom
  int grid = 0;               // 0: default per dimension
  double tail_tol = 1e-12;
  // environment
  std::string model = "iid";
  double epsilon = 0.0;
  double lambda = 1.0;
  double coupling = 0.2;
  double cml_gamma = 0.05;
  double cml_nonlinearity = 0.2;
  int burn_in = 64;
  int time_extent = 256;
  int box_radius = 64;
  // RG flow
  int L = 2;
  int levels = 4;
  int replicas = 64;
  int sources = 16;
  int blocks = 1;
  bool antithetic = true;
  double zeta_kmax = 0.5;
  // cumulants
  int n0 = 4;
  std::vector<int> orders{2, 3};
  int max_sep = 8;
  int cumulant_replicas = 2000;
  int level = 0;
  int anchors = 8;
  // walks and scaling
  int T = 4096;
  long paths = 100000;
  int dump_paths = 0;
  int env_seeds = 10;
  std::vector<double> times{0.25, 0.5, 1.0};
  double alpha = 0.01;
  // run
  std::uint64_t seed = 1;
  int threads = 0;  // 0: RGWALK_THREADS or hardware concurrency
  std::string out_dir = ".";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses `key = value` text. Throws SchemaError naming the first unknown key,
/// malformed value or failed range check.
ExperimentConfig parse_config(const std::string& text);
/// Throws IoError if the file cannot be read.
ExperimentConfig load_config(const std::string& path);
/// Sets one key from its text form (used for CLI overrides). Throws SchemaError.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Range checks across keys. Throws SchemaError.
void validate_config(const ExperimentConfig& cfg);
/// Canonical text form: one line per key in schema order; parse_config(to_text(c)) == c.
std::string config_to_text(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace rgwalk
