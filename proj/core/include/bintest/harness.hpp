#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bintest/attacks.hpp"
#include "bintest/detector.hpp"
#include "bintest/nn.hpp"
#include "bintest/readout.hpp"
#include "bintest/sampler.hpp"

namespace bintest {

enum class AttackKind { pgd, bpda_pgd, random, feature_match };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& s);

/// Attack under evaluation. Step sizes are fractions of epsilon.
struct AttackSpec {
  std::string name = "pgd";
  AttackKind kind = AttackKind::pgd;
  std::size_t steps = 75;
  double step_size = 0.25;
  bool random_init = true;
  std::size_t restarts = 1;
  std::size_t n_inner = 0;   // random attack only
  std::size_t n_corner = 0;  // random attack only
  double lambda = 0.0;       // feature matching weight
  DetectorGoal detector_goal = DetectorGoal::ignore;
  /// Run the attack against a copy whose normalization statistics keep
  /// updating (the flawed evaluation); success is still judged on the frozen model.
  bool unfrozen_statistics = false;

  std::size_t query_budget() const;
  void validate() const;
  bool operator==(const AttackSpec&) const = default;
};

enum class RasrMode { fixed, matched };

std::string to_string(RasrMode mode);
RasrMode rasr_mode_from_string(const std::string& s);

struct TestConfig {
  ThreatModel threat;
  SamplingParams sampling;
  double kappa = 0.999;
  /// Target for the largest absolute readout logit; unset means "match the
  /// original classifier's logit range on the inner set".
  std::optional<double> logit_range;
  double margin_floor = 1e-9;
  std::size_t n_samples = 512;
  std::size_t rasr_inner = 200;
  std::size_t rasr_corner = 200;
  RasrMode rasr_mode = RasrMode::fixed;
  double threshold = 0.95;
  /// An attack is flagged weak unless asr >= rasr + weak_margin.
  double weak_margin = 0.2;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

struct AttackSummary {
  bool success = false;           ///< judged on the frozen binarized model
  bool reported_success = false;  ///< what the attack itself claimed
  std::size_t queries = 0;
  double final_logit = 0.0;
  double distance = 0.0;  ///< l-inf distance of the returned point
  std::string cause;
};

struct CertificateSummary {
  double clean_logit = 0.0;
  double min_boundary_logit = 0.0;
  double min_reference_logit = 0.0;
  double max_boundary_distance = 0.0;
  double gap = 0.0;
  double boundary_distance = 0.0;
  double logit_scale = 0.0;
};

struct SampleRecord {
  std::size_t id = 0;
  bool skipped = false;
  std::string skip_reason;
  AttackSummary attack;
  AttackSummary random;
  CertificateSummary certificate;
};

enum class Verdict { pass, fail };
std::string to_string(Verdict v);

struct TestReport {
  TestConfig config;
  AttackSpec attack;
  std::string detector;  ///< empty when no detector participates
  bool inverted = false;
  std::vector<SampleRecord> samples;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  double asr = 0.0;
  double rasr = 0.0;
  double skip_fraction = 0.0;
  Verdict verdict = Verdict::fail;
  bool weak_attack = false;
};

/// Binarization test of one attack on `model` over `samples`.
/// Throws CertificateFailure if a construction does not certify.
TestReport run_binarization_test(const SplitModel& model, const AttackSpec& attack, const std::vector<Vector>& samples,
                                 const TestConfig& config);

struct DetectorTestReport {
  TestReport normal;
  TestReport inverted;
  Verdict verdict = Verdict::fail;  ///< pass iff both sub-tests pass
};

/// Normal test: planted and reference points are undetected and the attack
/// must produce an undetected adversarial example.
TestReport run_detector_test(const SplitModel& model, std::shared_ptr<const Detector> detector,
                             const AttackSpec& attack, const std::vector<Vector>& samples, const TestConfig& config);

/// Same pipeline with the detector decision negated everywhere.
TestReport run_inverted_detector_test(const SplitModel& model, std::shared_ptr<const Detector> detector,
                                      const AttackSpec& attack, const std::vector<Vector>& samples,
                                      const TestConfig& config);

DetectorTestReport run_detector_test_pair(const SplitModel& model, std::shared_ptr<const Detector> detector,
                                          const AttackSpec& attack, const std::vector<Vector>& samples,
                                          const TestConfig& config);

struct SweepRow {
  std::string attack;  ///< empty for the R-ASR-only row
  double kappa = 0.0;
  double asr = 0.0;
  double rasr = 0.0;
  double skip_fraction = 0.0;
  std::size_t evaluated = 0;
  Verdict verdict = Verdict::fail;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::vector<TestReport> reports;  ///< one per attack row, same order
};

/// Every attack at every kappa on shared constructions. With an empty attack
/// list only R-ASR rows are produced.
SweepTable hardness_sweep(const SplitModel& model, const std::vector<AttackSpec>& attacks,
                          const std::vector<Vector>& samples, const TestConfig& config,
                          const std::vector<double>& kappas);

struct HardnessRung {
  double kappa = 0.999;
  std::size_t n_inner = 999;
  bool operator==(const HardnessRung&) const = default;
};

/// Descending kappa within each inner-count level, levels in descending
/// order: hardest first.
std::vector<HardnessRung> default_hardness_ladder(const TestConfig& config);

struct TuneResult {
  bool found = false;        ///< false means the attack failed at every rung
  std::size_t rung_index = 0;  ///< ladder size when nothing qualified
  HardnessRung rung;
  TestConfig recommended;
  TestReport report;  ///< at the returned rung, or the easiest rung tried
  double asr_rasr_gap = 0.0;
};

TuneResult tune_hardness(const SplitModel& model, const AttackSpec& attack, const std::vector<Vector>& samples,
                         const TestConfig& config, const std::vector<HardnessRung>& ladder);

}  // namespace bintest
