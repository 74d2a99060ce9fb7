#include "bintest/run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace bintest {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("key '" + key + "': invalid value '" + value + "' (expected " + expected + ")");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) bad(key, v, "a non-negative integer");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    bad(key, v, "a non-negative integer");
  }
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  bad(key, v, "a finite real number");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "true or false");
}

std::vector<std::string> split_list(const std::string& key, const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad(key, v, "a comma-separated list without empty items");
    out.push_back(item);
  }
  if (out.empty()) bad(key, v, "a non-empty list");
  return out;
}

template <typename T>
T parse_enum(const std::string& key, const std::string& v, T (*from)(const std::string&), const std::string& choices) {
  try {
    return from(v);
  } catch (const std::invalid_argument&) {
    bad(key, v, "one of " + choices);
  }
}

RunMode mode_from_string(const std::string& s) {
  if (s == "bintest") return RunMode::bintest;
  if (s == "detector-test") return RunMode::detector_test;
  if (s == "sweep") return RunMode::sweep;
  if (s == "tune") return RunMode::tune;
  if (s == "zoo-demo") return RunMode::zoo_demo;
  throw std::invalid_argument(s);
}

BoundaryMode boundary_from_string(const std::string& s) {
  if (s == "corner") return BoundaryMode::corner;
  if (s == "surface") return BoundaryMode::surface;
  throw std::invalid_argument(s);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

struct KeyDef {
  ConfigKey key;
  Setter set;
};

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    auto add = [&](std::string name, std::string type, std::string def, std::string help, Setter s) {
      t.push_back({{std::move(name), std::move(type), std::move(def), std::move(help)}, std::move(s)});
    };
    const AttackSpec da;
    const TestConfig dt;
    auto num = [](double v) {
      std::ostringstream os;
      os << v;
      return os.str();
    };

    add("mode", "enum(bintest|detector-test|sweep|tune|zoo-demo)", "bintest", "what to run",
        [](RunConfig& c, auto& k, auto& v) {
          c.mode = parse_enum(k, v, mode_from_string, "bintest, detector-test, sweep, tune, zoo-demo");
        });
    add("entry", "string", "clean_mlp", "zoo entry supplying model, attacks and test profile",
        [](RunConfig& c, auto&, auto& v) { c.entry = v; });
    add("model", "path", "", "weight file replacing the entry's trained model",
        [](RunConfig& c, auto&, auto& v) { c.model_path = v; });
    add("cache-dir", "path", "", "directory caching trained zoo weights",
        [](RunConfig& c, auto&, auto& v) { c.cache_dir = v; });
    add("dataset", "path", "", "clean samples to test on (default: the entry's held-out blobs)",
        [](RunConfig& c, auto&, auto& v) { c.dataset = v; });
    add("dataset-format", "enum(csv|idx)", "csv", "dataset file format", [](RunConfig& c, auto& k, auto& v) {
      if (v != "csv" && v != "idx") bad(k, v, "csv or idx");
      c.dataset_format = v;
    });
    add("dataset-scale", "enum(unit|image|minmax)", "unit", "mapping of CSV values into [0, 1]",
        [](RunConfig& c, auto& k, auto& v) {
          if (v != "unit" && v != "image" && v != "minmax") bad(k, v, "unit, image or minmax");
          c.dataset_scale = v;
        });
    add("dataset-labels", "path", "", "IDX label file", [](RunConfig& c, auto&, auto& v) { c.dataset_labels = v; });
    add("attack", "list(weak|strong|pgd|bpda|random|feature-match)", "strong", "attacks under test",
        [](RunConfig& c, auto& k, auto& v) {
          auto items = split_list(k, v);
          for (const auto& a : items)
            if (a != "weak" && a != "strong") parse_enum(k, a, attack_kind_from_string, "weak, strong, pgd, bpda, random, feature-match");
          c.attacks = std::move(items);
        });
    add("steps", "count", std::to_string(da.steps), "gradient steps per restart",
        [](RunConfig& c, auto& k, auto& v) { c.attack_overrides.steps = parse_count(k, v); });
    add("step-size", "real", num(da.step_size), "step size as a fraction of epsilon",
        [](RunConfig& c, auto& k, auto& v) {
          c.attack_overrides.step_size = parse_real(k, v);
          if (c.attack_overrides.step_size < 0) bad(k, v, "a value >= 0");
        });
    add("restarts", "count", std::to_string(da.restarts), "random restarts",
        [](RunConfig& c, auto& k, auto& v) { c.attack_overrides.restarts = parse_count(k, v); });
    add("random-init", "bool", "true", "start gradient attacks from a random ball point",
        [](RunConfig& c, auto& k, auto& v) { c.attack_overrides.random_init = parse_bool(k, v); });
    add("attack-inner", "count", "200", "uniform ball queries of a random attack under test",
        [](RunConfig& c, auto& k, auto& v) { c.attack_overrides.n_inner = parse_count(k, v); });
    add("attack-corner", "count", "200", "corner queries of a random attack under test",
        [](RunConfig& c, auto& k, auto& v) { c.attack_overrides.n_corner = parse_count(k, v); });
    add("lambda", "real", num(da.lambda), "feature-matching weight", [](RunConfig& c, auto& k, auto& v) {
      c.attack_overrides.lambda = parse_real(k, v);
      if (c.attack_overrides.lambda < 0) bad(k, v, "a value >= 0");
    });
    add("detector-goal", "enum(ignore|undetected|detected)", "ignore", "detector constraint the attack optimises for",
        [](RunConfig& c, auto& k, auto& v) {
          c.attack_overrides.detector_goal = parse_enum(k, v, detector_goal_from_string, "ignore, undetected, detected");
        });
    add("unfrozen", "bool", "false", "attack a copy with live normalization statistics",
        [](RunConfig& c, auto& k, auto& v) { c.attack_overrides.unfrozen_statistics = parse_bool(k, v); });

    add("epsilon", "real", num(dt.threat.epsilon), "l-inf radius", [](RunConfig& c, auto& k, auto& v) {
      c.test.threat.epsilon = parse_real(k, v);
    });
    add("domain-lo", "real", "0", "lower input bound",
        [](RunConfig& c, auto& k, auto& v) { c.test.threat.lo = parse_real(k, v); });
    add("domain-hi", "real", "1", "upper input bound",
        [](RunConfig& c, auto& k, auto& v) { c.test.threat.hi = parse_real(k, v); });
    add("xi", "real", num(dt.sampling.xi), "inner radius as a fraction of epsilon",
        [](RunConfig& c, auto& k, auto& v) { c.test.sampling.xi = parse_real(k, v); });
    add("eta", "real", num(dt.sampling.eta), "reference radius as a multiple of epsilon",
        [](RunConfig& c, auto& k, auto& v) { c.test.sampling.eta = parse_real(k, v); });
    add("n-inner", "count", std::to_string(dt.sampling.n_inner), "inner points besides the clean sample",
        [](RunConfig& c, auto& k, auto& v) { c.test.sampling.n_inner = parse_count(k, v); });
    add("n-boundary", "count", std::to_string(dt.sampling.n_boundary), "planted boundary points",
        [](RunConfig& c, auto& k, auto& v) { c.test.sampling.n_boundary = parse_count(k, v); });
    add("n-reference", "count", std::to_string(dt.sampling.n_reference), "class-1 reference points outside the ball",
        [](RunConfig& c, auto& k, auto& v) { c.test.sampling.n_reference = parse_count(k, v); });
    add("boundary-mode", "enum(corner|surface)", "corner", "where boundary points are drawn",
        [](RunConfig& c, auto& k, auto& v) {
          c.test.sampling.boundary_mode = parse_enum(k, v, boundary_from_string, "corner, surface");
        });
    add("max-attempts", "count", std::to_string(dt.sampling.max_attempts), "rejection-sampling draws per point",
        [](RunConfig& c, auto& k, auto& v) { c.test.sampling.max_attempts = parse_count(k, v); });
    add("kappa", "list(real)", "0.999", "hardness; sweeps use every value, other modes the first",
        [](RunConfig& c, auto& k, auto& v) {
          std::vector<double> ks;
          for (const auto& s : split_list(k, v)) ks.push_back(parse_real(k, s));
          c.kappas = ks;
          c.test.kappa = ks.front();
        });
    add("logit-range", "real", "", "largest absolute readout logit (default: original model's range)",
        [](RunConfig& c, auto& k, auto& v) { c.test.logit_range = parse_real(k, v); });
    add("margin-floor", "real", num(dt.margin_floor), "smallest separating gap before a sample is skipped",
        [](RunConfig& c, auto& k, auto& v) { c.test.margin_floor = parse_real(k, v); });
    add("n-samples", "count", "64", "clean samples tested (entry profile)",
        [](RunConfig& c, auto& k, auto& v) { c.test.n_samples = parse_count(k, v); });
    add("rasr-inner", "count", std::to_string(dt.rasr_inner), "uniform queries of the random baseline",
        [](RunConfig& c, auto& k, auto& v) { c.test.rasr_inner = parse_count(k, v); });
    add("rasr-corner", "count", std::to_string(dt.rasr_corner), "corner queries of the random baseline",
        [](RunConfig& c, auto& k, auto& v) { c.test.rasr_corner = parse_count(k, v); });
    add("rasr-mode", "enum(fixed|matched)", "fixed", "random baseline budget: fixed counts or the attack's budget",
        [](RunConfig& c, auto& k, auto& v) {
          c.test.rasr_mode = parse_enum(k, v, rasr_mode_from_string, "fixed, matched");
        });
    add("threshold", "real", num(dt.threshold), "score needed to pass",
        [](RunConfig& c, auto& k, auto& v) { c.test.threshold = parse_real(k, v); });
    add("weak-margin", "real", num(dt.weak_margin), "flag the attack weak unless asr >= rasr + margin",
        [](RunConfig& c, auto& k, auto& v) { c.test.weak_margin = parse_real(k, v); });
    add("seed", "u64", "0", "base seed (BINTEST_SEED overrides the config file)",
        [](RunConfig& c, auto& k, auto& v) { c.test.seed = parse_u64(k, v); });
    add("workers", "count", "1", "worker threads",
        [](RunConfig& c, auto& k, auto& v) {
          c.test.workers = parse_count(k, v);
          if (c.test.workers == 0) bad(k, v, "at least 1");
        });
    add("ladder-kappa", "list(real)", "0.999,0.99,0.9,0.5", "tune: kappa rungs, hardest first",
        [](RunConfig& c, auto& k, auto& v) {
          c.ladder_kappa.clear();
          for (const auto& s : split_list(k, v)) c.ladder_kappa.push_back(parse_real(k, s));
        });
    add("ladder-inner", "list(count)", "", "tune: inner-count levels, hardest first (default: n-inner, n-inner/10)",
        [](RunConfig& c, auto& k, auto& v) {
          c.ladder_inner.clear();
          for (const auto& s : split_list(k, v)) c.ladder_inner.push_back(parse_count(k, s));
        });
    add("detector-fpr", "real", "0.05", "false-positive rate the entry's detector is calibrated to",
        [](RunConfig& c, auto& k, auto& v) { c.detector_fpr = parse_real(k, v); });
    add("output-dir", "path", "bintest-out", "directory receiving every output file",
        [](RunConfig& c, auto&, auto& v) { c.output_dir = v; });
    return t;
  }();
  return table;
}

const KeyDef& find_key(const std::string& key) {
  for (const KeyDef& d : key_table())
    if (d.key.name == key) return d;
  throw ConfigError("unknown configuration key '" + key + "'");
}

bool is_attack_key(const std::string& key) {
  static const char* keys[] = {"steps", "step-size", "restarts", "random-init", "attack-inner",
                               "attack-corner", "lambda", "detector-goal", "unfrozen"};
  for (const char* k : keys)
    if (key == k) return true;
  return false;
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::bintest: return "bintest";
    case RunMode::detector_test: return "detector-test";
    case RunMode::sweep: return "sweep";
    case RunMode::tune: return "tune";
    case RunMode::zoo_demo: return "zoo-demo";
  }
  return "bintest";
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = [] {
    std::vector<ConfigKey> out;
    for (const KeyDef& d : key_table()) out.push_back(d.key);
    return out;
  }();
  return schema;
}

std::string schema_text() {
  std::ostringstream os;
  for (const ConfigKey& k : config_schema())
    os << k.name << " : " << k.type << " = " << (k.default_value.empty() ? "(unset)" : k.default_value) << "  # "
       << k.help << '\n';
  return os.str();
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  find_key(key).set(config, key, v);
  config.given[key] = v;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (out.count(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig config;
  for (const auto& [k, v] : parse_config_text(ss.str())) apply_setting(config, k, v);
  return config;
}

void apply_environment(RunConfig& config) {
  if (const char* seed = std::getenv("BINTEST_SEED"); seed != nullptr && *seed != '\0') {
    try {
      apply_setting(config, "seed", seed);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("BINTEST_SEED: ") + e.what());
    }
  }
}

TestConfig effective_test_config(const RunConfig& config, const TestConfig& base) {
  RunConfig copy;
  copy.test = base;
  for (const auto& [k, v] : config.given)
    if (!is_attack_key(k)) find_key(k).set(copy, k, v);
  return copy.test;
}

std::vector<AttackSpec> effective_attacks(const RunConfig& config, const AttackSpec& weak, const AttackSpec& strong) {
  std::vector<AttackSpec> out;
  for (const std::string& name : config.attacks) {
    AttackSpec spec;
    if (name == "weak") {
      spec = weak;
    } else if (name == "strong") {
      spec = strong;
    } else {
      spec.kind = attack_kind_from_string(name);
      spec.name = name;
      if (spec.kind == AttackKind::random) spec.n_inner = spec.n_corner = 200;
    }
    RunConfig copy;
    copy.attack_overrides = spec;
    for (const auto& [k, v] : config.given)
      if (is_attack_key(k)) find_key(k).set(copy, k, v);
    spec = copy.attack_overrides;
    out.push_back(spec);
  }
  return out;
}

void validate_run_config(const RunConfig& config) {
  if (config.output_dir.empty()) throw ConfigError("output-dir must not be empty");
  if (config.attacks.empty()) throw ConfigError("attack list is empty");
  for (double k : config.kappas)
    if (!(k > 0.0 && k < 1.0)) throw ConfigError("kappa values must lie in (0, 1)");
  for (double k : config.ladder_kappa)
    if (!(k > 0.0 && k < 1.0)) throw ConfigError("ladder-kappa values must lie in (0, 1)");
  if (!(config.detector_fpr >= 0.0 && config.detector_fpr <= 1.0)) throw ConfigError("detector-fpr must lie in [0, 1]");
  if (config.mode == RunMode::bintest || config.mode == RunMode::detector_test || config.mode == RunMode::tune) {
    if (config.attacks.size() != 1) throw ConfigError("mode " + to_string(config.mode) + " takes exactly one attack");
  }
  if (config.dataset_format == "idx" && !config.dataset.empty() && config.dataset_labels.empty())
    throw ConfigError("dataset-format idx needs dataset-labels");
  try {
    config.test.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace bintest
