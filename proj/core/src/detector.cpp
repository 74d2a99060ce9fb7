#include "bintest/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bintest {

double false_positive_rate(const Detector& detector, const std::vector<Vector>& clean) {
  if (clean.empty()) return 0.0;
  std::size_t flagged = 0;
  for (const Vector& x : clean)
    if (detector.detected(x)) ++flagged;
  return static_cast<double>(flagged) / static_cast<double>(clean.size());
}

std::shared_ptr<ThresholdDetector> calibrate_detector_fpr(const ThresholdDetector& family,
                                                          const std::vector<Vector>& clean, double target_fpr,
                                                          double tolerance) {
  if (!(target_fpr >= 0.0 && target_fpr <= 1.0)) throw std::invalid_argument("calibrate: target FPR must lie in [0, 1]");
  if (clean.empty()) throw std::invalid_argument("calibrate: no clean data");

  std::vector<double> scores;
  scores.reserve(clean.size());
  for (const Vector& x : clean) scores.push_back(family.score(x));
  std::sort(scores.begin(), scores.end());
  const std::size_t n = scores.size();

  // flag the `flagged` largest scores: threshold at the next score below them
  const auto flagged = static_cast<std::size_t>(std::llround(target_fpr * static_cast<double>(n)));
  double threshold;
  if (flagged == 0) {
    threshold = scores.back();
  } else if (flagged >= n) {
    threshold = -std::numeric_limits<double>::infinity();
  } else {
    threshold = scores[n - flagged - 1];
  }

  auto detector = std::make_shared<ThresholdDetector>(family);
  detector->set_threshold(threshold, target_fpr);
  const double achieved =
      static_cast<double>(std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; })) /
      static_cast<double>(n);
  if (std::abs(achieved - target_fpr) > tolerance)
    throw CalibrationError("calibrate: score ties allow only FPR " + std::to_string(achieved) + " for target " +
                           std::to_string(target_fpr));
  return detector;
}

}  // namespace bintest
