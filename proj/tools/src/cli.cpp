#include "bintest_cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "bintest/dataset.hpp"
#include "bintest/model_io.hpp"
#include "bintest/report.hpp"
#include "bintest/run_config.hpp"
#include "bintest/zoo.hpp"

namespace bintest::cli {

namespace {

namespace fs = std::filesystem;

struct Prepared {
  ZooEntry entry;
  std::vector<Vector> samples;
  TestConfig test;
  std::vector<AttackSpec> attacks;
};

// Everything that can fail on bad input happens here, before any output exists.
Prepared prepare(const RunConfig& rc) {
  Prepared p;
  const auto cache = rc.cache_dir.empty() ? std::nullopt : std::optional<fs::path>(rc.cache_dir);
  p.entry = build_zoo_entry(rc.entry, rc.test.seed, cache);
  if (!rc.model_path.empty()) {
    p.entry.model = load_model(rc.model_path);
    if (p.entry.detector) p.entry.detector = build_norm_detector(p.entry.model, p.entry.calibration, rc.detector_fpr);
  }
  const bool wants_detector = rc.mode == RunMode::detector_test;
  if ((wants_detector && !p.entry.detector) || (p.entry.detector && rc.has("detector-fpr")))
    p.entry.detector = build_norm_detector(p.entry.model, p.entry.calibration, rc.detector_fpr);

  p.test = effective_test_config(rc, p.entry.config);
  if (rc.mode == RunMode::detector_test && !rc.has("n-reference") && p.test.sampling.n_reference == 0)
    p.test.sampling.n_reference = 1;
  p.test.validate();
  p.attacks = effective_attacks(rc, p.entry.weak_attack, p.entry.strong_attack);
  for (const AttackSpec& a : p.attacks) {
    a.validate();
    if (a.kind == AttackKind::feature_match && p.test.sampling.n_reference == 0)
      throw ConfigError("attack feature-match needs n-reference >= 1");
  }

  if (!rc.dataset.empty()) {
    DatasetOptions opts;
    opts.scale = value_scale_from_string(rc.dataset_scale);
    opts.labels_path = rc.dataset_labels;
    const LabeledData data = ingest_dataset(rc.dataset, dataset_format_from_string(rc.dataset_format), opts);
    if (data.dim() != p.entry.model.input_dim())
      throw ConfigError("dataset has " + std::to_string(data.dim()) + " features but the model expects " +
                        std::to_string(p.entry.model.input_dim()));
    p.samples.assign(data.inputs.begin(),
                     data.inputs.begin() + static_cast<std::ptrdiff_t>(std::min(data.size(), p.test.n_samples)));
  } else {
    p.samples = p.entry.samples(p.test.n_samples);
  }
  return p;
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  // Everything is written at the end, only into the output directory.
  void flush(std::ostream& out) const {
    fs::create_directories(dir_);
    for (const auto& [name, content] : files_) {
      const fs::path path = dir_ / name;
      std::ofstream f(path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
      f << content;
      if (!f) throw std::runtime_error("error writing '" + path.string() + "'");
      out << "wrote " << path.string() << '\n';
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

int verdict_code(Verdict v) { return v == Verdict::pass ? kExitPass : kExitFail; }

int run_bintest(const Prepared& p, Outputs& outputs, std::ostream& out) {
  const TestReport report = run_binarization_test(p.entry.model, p.attacks.front(), p.samples, p.test);
  out << summary_line(report) << '\n';
  outputs.add("report.json", serialize_report(report));
  outputs.add("samples.csv", samples_csv(report));
  return verdict_code(report.verdict);
}

int run_detector(const Prepared& p, Outputs& outputs, std::ostream& out) {
  const DetectorTestReport report =
      run_detector_test_pair(p.entry.model, p.entry.detector, p.attacks.front(), p.samples, p.test);
  out << summary_line(report.normal) << '\n' << summary_line(report.inverted) << '\n';
  out << "combined verdict: " << to_string(report.verdict) << '\n';
  outputs.add("report.json", serialize_report(report));
  outputs.add("normal-samples.csv", samples_csv(report.normal));
  outputs.add("inverted-samples.csv", samples_csv(report.inverted));
  return verdict_code(report.verdict);
}

int run_sweep(const RunConfig& rc, const Prepared& p, Outputs& outputs, std::ostream& out) {
  const std::vector<double> kappas = rc.has("kappa") ? rc.kappas : std::vector<double>{0.5, 0.9, 0.99, 0.999};
  const SweepTable table = hardness_sweep(p.entry.model, p.attacks, p.samples, p.test, kappas);
  out << sweep_csv(table);
  outputs.add("sweep.json", serialize_report(table));
  outputs.add("sweep.csv", sweep_csv(table));
  const bool all_pass = std::all_of(table.rows.begin(), table.rows.end(),
                                    [](const SweepRow& r) { return r.verdict == Verdict::pass; });
  return all_pass ? kExitPass : kExitFail;
}

int run_tune(const RunConfig& rc, const Prepared& p, Outputs& outputs, std::ostream& out) {
  std::vector<std::size_t> levels = rc.ladder_inner;
  if (levels.empty()) {
    levels.push_back(p.test.sampling.n_inner);
    if (p.test.sampling.n_inner >= 10) levels.push_back(p.test.sampling.n_inner / 10);
  }
  std::vector<HardnessRung> ladder;
  for (std::size_t n : levels)
    for (double k : rc.ladder_kappa) ladder.push_back({k, n});
  const TuneResult result = tune_hardness(p.entry.model, p.attacks.front(), p.samples, p.test, ladder);
  if (result.found)
    out << "passes at rung " << result.rung_index << ": kappa=" << result.rung.kappa
        << " n-inner=" << result.rung.n_inner << " (asr - rasr = " << result.asr_rasr_gap << ")\n";
  else
    out << "fails at every rung\n";
  outputs.add("tune.json", serialize_report(result));
  return result.found ? kExitPass : kExitFail;
}

int run_zoo_demo(const Prepared& p, Outputs& outputs, std::ostream& out) {
  bool expectations_hold = true;
  auto check = [&](const char* role, Verdict got, Verdict expected) {
    const bool ok = got == expected;
    expectations_hold = expectations_hold && ok;
    out << "  " << role << ": " << to_string(got) << " (expected " << to_string(expected) << ")"
        << (ok ? "" : "  <-- MISMATCH") << '\n';
  };
  out << "entry " << p.entry.name << '\n';
  double weak_score = 0.0, strong_score = 0.0;
  if (p.entry.detector) {
    const auto weak = run_detector_test_pair(p.entry.model, p.entry.detector, p.entry.weak_attack, p.samples, p.test);
    const auto strong =
        run_detector_test_pair(p.entry.model, p.entry.detector, p.entry.strong_attack, p.samples, p.test);
    for (const auto* r : {&weak.normal, &weak.inverted, &strong.normal, &strong.inverted})
      out << "  " << summary_line(*r) << '\n';
    check("weak", weak.verdict, p.entry.expected_weak);
    check("strong", strong.verdict, p.entry.expected_strong);
    weak_score = std::min(weak.normal.asr, weak.inverted.asr);
    strong_score = std::min(strong.normal.asr, strong.inverted.asr);
    outputs.add("weak.json", serialize_report(weak));
    outputs.add("strong.json", serialize_report(strong));
  } else {
    const auto weak = run_binarization_test(p.entry.model, p.entry.weak_attack, p.samples, p.test);
    const auto strong = run_binarization_test(p.entry.model, p.entry.strong_attack, p.samples, p.test);
    out << "  " << summary_line(weak) << '\n' << "  " << summary_line(strong) << '\n';
    check("weak", weak.verdict, p.entry.expected_weak);
    check("strong", strong.verdict, p.entry.expected_strong);
    weak_score = weak.asr;
    strong_score = strong.asr;
    outputs.add("weak.json", serialize_report(weak));
    outputs.add("strong.json", serialize_report(strong));
  }
  if (!(weak_score < strong_score)) {
    expectations_hold = false;
    out << "  weak score is not below the strong score\n";
  }
  out << (expectations_hold ? "expectations hold" : "expectations violated") << '\n';
  return expectations_hold ? kExitPass : kExitFail;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binarization test harness for adversarial attack evaluations", "bintest"};
  std::string config_path;
  bool print_schema = false;
  app.add_option("--config", config_path, "flat key = value configuration file");
  app.add_flag("--print-schema", print_schema, "print every configuration key and exit");
  std::map<std::string, std::string> flag_values;
  for (const ConfigKey& key : config_schema())
    app.add_option("--" + key.name, flag_values[key.name], key.help + " [" + key.type + "]");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitConfigError;
  }
  if (print_schema) {
    out << schema_text();
    return kExitPass;
  }

  RunConfig rc;
  Prepared prepared;
  try {
    if (!config_path.empty()) rc = load_run_config(config_path);
    apply_environment(rc);
    for (const ConfigKey& key : config_schema())
      if (app.count("--" + key.name) > 0) apply_setting(rc, key.name, flag_values[key.name]);
    validate_run_config(rc);
    prepared = prepare(rc);
  } catch (const CertificateFailure& e) {
    err << "certificate failure: " << e.what() << '\n';
    return kExitCertificateFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  Outputs outputs(rc.output_dir);
  int code = kExitFail;
  try {
    switch (rc.mode) {
      case RunMode::bintest: code = run_bintest(prepared, outputs, out); break;
      case RunMode::detector_test: code = run_detector(prepared, outputs, out); break;
      case RunMode::sweep: code = run_sweep(rc, prepared, outputs, out); break;
      case RunMode::tune: code = run_tune(rc, prepared, outputs, out); break;
      case RunMode::zoo_demo: code = run_zoo_demo(prepared, outputs, out); break;
    }
  } catch (const CertificateFailure& e) {
    err << "certificate failure: " << e.what() << '\n';
    return kExitCertificateFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    outputs.flush(out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  return code;
}

}  // namespace bintest::cli
