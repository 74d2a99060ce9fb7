#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "bintest/detector.hpp"
#include "bintest/harness.hpp"
#include "bintest/zoo.hpp"
#include "support/fixtures.hpp"

using namespace bintest;

namespace {

std::vector<Vector> line_points(std::size_t n) {
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back({static_cast<double>(i) / static_cast<double>(n)});
  return xs;
}

const ThresholdDetector first_coordinate("first-coordinate", [](const Vector& x) { return x[0]; });

void check_same_records(const TestReport& a, const TestReport& b) {
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const SampleRecord& x = a.samples[i];
    const SampleRecord& y = b.samples[i];
    CHECK(x.skipped == y.skipped);
    CHECK(x.attack.success == y.attack.success);
    CHECK(x.attack.queries == y.attack.queries);
    CHECK(x.attack.final_logit == y.attack.final_logit);
    CHECK(x.attack.distance == y.attack.distance);
    CHECK(x.random.success == y.random.success);
    CHECK(x.certificate.clean_logit == y.certificate.clean_logit);
    CHECK(x.certificate.min_boundary_logit == y.certificate.min_boundary_logit);
  }
  CHECK(a.asr == b.asr);
  CHECK(a.rasr == b.rasr);
  CHECK(a.verdict == b.verdict);
}

}  // namespace

TEST_CASE("calibration: 0% target sets the maximal threshold") {
  const auto d = calibrate_detector_fpr(first_coordinate, line_points(100), 0.0);
  CHECK(d->threshold() == doctest::Approx(0.99));
  CHECK(false_positive_rate(*d, line_points(100)) == 0.0);
}

TEST_CASE("calibration: 100% target flags everything") {
  const auto d = calibrate_detector_fpr(first_coordinate, line_points(100), 1.0);
  CHECK(false_positive_rate(*d, line_points(100)) == 1.0);
  CHECK(d->detected(Vector{-1e9}));
}

TEST_CASE("calibration: 5% on 1000 distinct scores") {
  const auto d = calibrate_detector_fpr(first_coordinate, line_points(1000), 0.05);
  CHECK(false_positive_rate(*d, line_points(1000)) == doctest::Approx(0.05));
  CHECK(d->calibrated_fpr() == 0.05);
  CHECK(d->name() == "first-coordinate");
}

TEST_CASE("calibration: ties make the target unreachable") {
  const ThresholdDetector flat("flat", [](const Vector&) { return 1.0; });
  CHECK_THROWS_AS(calibrate_detector_fpr(flat, line_points(50), 0.5), CalibrationError);
  CHECK_THROWS_AS(calibrate_detector_fpr(first_coordinate, line_points(10), 1.5), std::invalid_argument);
}

TEST_CASE("negation and constants") {
  const auto base = calibrate_detector_fpr(first_coordinate, line_points(100), 0.1);
  const NegatedDetector neg(base);
  for (const Vector& x : line_points(100)) CHECK(neg.detected(x) == !base->detected(x));
  CHECK(neg.name() == "not(first-coordinate)");
  CHECK(neg.calibrated_fpr() == 0.1);
  CHECK(ConstantDetector(true).detected(Vector{0.3}));
  CHECK_FALSE(ConstantDetector(false).detected(Vector{0.3}));
}

TEST_CASE("detector test: always-clear detector reduces to the plain test") {
  const auto& model = fixture::small_mlp();
  const auto samples = fixture::small_samples(12);
  const TestConfig cfg = fixture::fast_config(3);
  const auto clear = std::make_shared<ConstantDetector>(false);
  const TestReport plain = run_binarization_test(model, fixture::pgd(20), samples, cfg);
  const TestReport normal = run_detector_test(model, clear, fixture::pgd(20), samples, cfg);
  check_same_records(plain, normal);
  CHECK(normal.detector == "always-clear");
  CHECK_FALSE(normal.inverted);
  CHECK(plain.evaluated > 0);
}

TEST_CASE("detector test: always-detect skips every sample") {
  const auto& model = fixture::small_mlp();
  const auto samples = fixture::small_samples(6);
  const TestReport r =
      run_detector_test(model, std::make_shared<ConstantDetector>(true), fixture::pgd(5), samples, fixture::fast_config());
  CHECK(r.evaluated == 0);
  CHECK(r.skip_fraction == 1.0);
  CHECK(r.verdict == Verdict::fail);
  for (const SampleRecord& s : r.samples) CHECK(s.skip_reason.rfind("detector-rejection", 0) == 0);
}

TEST_CASE("inverted test: always-detect reduces to the plain test, always-clear skips") {
  const auto& model = fixture::small_mlp();
  const auto samples = fixture::small_samples(12);
  const TestConfig cfg = fixture::fast_config(5);
  const TestReport plain = run_binarization_test(model, fixture::pgd(20), samples, cfg);
  const TestReport inv =
      run_inverted_detector_test(model, std::make_shared<ConstantDetector>(true), fixture::pgd(20), samples, cfg);
  check_same_records(plain, inv);
  CHECK(inv.inverted);

  const TestReport none =
      run_inverted_detector_test(model, std::make_shared<ConstantDetector>(false), fixture::pgd(5), samples, cfg);
  CHECK(none.evaluated == 0);
}

TEST_CASE("combined verdict needs both sub-tests") {
  const auto& model = fixture::small_mlp();
  const auto samples = fixture::small_samples(12);
  const DetectorTestReport r = run_detector_test_pair(model, std::make_shared<ConstantDetector>(false),
                                                      fixture::pgd(40), samples, fixture::fast_config(2));
  CHECK(r.normal.verdict == Verdict::pass);
  CHECK(r.inverted.verdict == Verdict::fail);
  CHECK(r.verdict == Verdict::fail);
}

TEST_CASE("detector test: planted points satisfy the detector, with reference points") {
  const auto& model = fixture::small_mlp();
  const auto& data = fixture::small_blobs();
  const auto det = build_norm_detector(model, data, 0.1);
  TestConfig cfg = fixture::fast_config(8);
  cfg.sampling.n_reference = 2;
  AttackSpec fm = fixture::pgd(30);
  fm.kind = AttackKind::feature_match;
  fm.lambda = 1.0;
  fm.detector_goal = DetectorGoal::undetected;
  const auto samples = fixture::small_samples(12);
  const TestReport normal = run_detector_test(model, det, fm, samples, cfg);
  CHECK(normal.evaluated > 0);
  for (const SampleRecord& s : normal.samples) {
    if (s.skipped) continue;
    CHECK(s.certificate.min_reference_logit > 0.0);
  }
  fm.detector_goal = DetectorGoal::detected;
  const TestReport inverted = run_inverted_detector_test(model, det, fm, samples, cfg);
  CHECK(inverted.inverted);
  CHECK(inverted.samples.size() == samples.size());
}

TEST_CASE("feature matching without reference points is a configuration error") {
  AttackSpec fm = fixture::pgd(5);
  fm.kind = AttackKind::feature_match;
  CHECK_THROWS_AS(run_detector_test(fixture::small_mlp(), std::make_shared<ConstantDetector>(false), fm,
                                    fixture::small_samples(2), fixture::fast_config()),
                  std::invalid_argument);
}
