#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bintest/harness.hpp"

namespace bintest {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { bintest, detector_test, sweep, tune, zoo_demo };

std::string to_string(RunMode mode);

/// Everything a CLI run needs. Settings are applied through the key schema
/// below; `given` remembers which keys were set explicitly so that entry
/// profiles only supply the rest.
struct RunConfig {
  RunMode mode = RunMode::bintest;
  std::string entry = "clean_mlp";
  std::string model_path;
  std::string cache_dir;
  std::string dataset;
  std::string dataset_format = "csv";
  std::string dataset_scale = "unit";
  std::string dataset_labels;
  /// Attack kinds, or "weak" / "strong" for the entry's own attacks.
  std::vector<std::string> attacks{"strong"};
  AttackSpec attack_overrides;
  std::vector<double> kappas{0.999};
  std::vector<double> ladder_kappa{0.999, 0.99, 0.9, 0.5};
  std::vector<std::size_t> ladder_inner;
  double detector_fpr = 0.05;
  std::string output_dir = "bintest-out";
  TestConfig test;
  std::map<std::string, std::string> given;

  bool has(const std::string& key) const { return given.count(key) > 0; }
};

struct ConfigKey {
  std::string name;
  std::string type;
  std::string default_value;
  std::string help;
};

/// The published schema, one entry per accepted key.
const std::vector<ConfigKey>& config_schema();
std::string schema_text();

/// Validates and stores one setting. Throws ConfigError for unknown keys and
/// malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Flat document: `key = value` per line, `#` starts a comment, lists are
/// comma separated.
std::map<std::string, std::string> parse_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Applies BINTEST_SEED when set; explicit seed settings given afterwards
/// still win.
void apply_environment(RunConfig& config);

/// Entry profile `base` with every explicitly given test setting applied.
TestConfig effective_test_config(const RunConfig& config, const TestConfig& base);

/// Attack list resolved against an entry's weak and strong attacks.
std::vector<AttackSpec> effective_attacks(const RunConfig& config, const AttackSpec& weak, const AttackSpec& strong);

/// Whole-config checks that do not depend on loaded models.
void validate_run_config(const RunConfig& config);

}  // namespace bintest
