#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bintest/nn.hpp"

namespace bintest {

/// Adversarial-example detector: returns true for inputs it flags.
/// Implementations must be safe for concurrent read-only use.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual bool detected(const Vector& x) const = 0;
  virtual std::string name() const = 0;
  /// Target false-positive rate the detector was calibrated for, if any.
  virtual double calibrated_fpr() const { return 0.0; }
};

class ConstantDetector final : public Detector {
 public:
  explicit ConstantDetector(bool flag) : flag_(flag) {}
  bool detected(const Vector&) const override { return flag_; }
  std::string name() const override { return flag_ ? "always-detect" : "always-clear"; }

 private:
  bool flag_;
};

/// Logical negation of another detector; used by the inverted test.
class NegatedDetector final : public Detector {
 public:
  explicit NegatedDetector(std::shared_ptr<const Detector> inner) : inner_(std::move(inner)) {}
  bool detected(const Vector& x) const override { return !inner_->detected(x); }
  std::string name() const override { return "not(" + inner_->name() + ")"; }
  double calibrated_fpr() const override { return inner_->calibrated_fpr(); }

 private:
  std::shared_ptr<const Detector> inner_;
};

/// Detector family with a scalar score; flags inputs whose score exceeds
/// the threshold.
class ThresholdDetector : public Detector {
 public:
  using ScoreFn = std::function<double(const Vector&)>;

  ThresholdDetector(std::string name, ScoreFn score, double threshold = 0.0, double target_fpr = 0.0)
      : name_(std::move(name)), score_(std::move(score)), threshold_(threshold), target_fpr_(target_fpr) {}

  bool detected(const Vector& x) const override { return score_(x) > threshold_; }
  std::string name() const override { return name_; }
  double calibrated_fpr() const override { return target_fpr_; }

  double score(const Vector& x) const { return score_(x); }
  double threshold() const noexcept { return threshold_; }
  void set_threshold(double t, double target_fpr) {
    threshold_ = t;
    target_fpr_ = target_fpr;
  }

 private:
  std::string name_;
  ScoreFn score_;
  double threshold_;
  double target_fpr_;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fraction of `clean` inputs flagged by `detector`.
double false_positive_rate(const Detector& detector, const std::vector<Vector>& clean);

/// Sets the threshold to the empirical score quantile so that a fraction
/// `target_fpr` of `clean` is flagged. Throws CalibrationError when ties in
/// the score distribution keep the achieved rate more than `tolerance` away.
std::shared_ptr<ThresholdDetector> calibrate_detector_fpr(const ThresholdDetector& family,
                                                          const std::vector<Vector>& clean, double target_fpr,
                                                          double tolerance = 0.02);

}  // namespace bintest
