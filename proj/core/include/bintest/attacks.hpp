#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "bintest/detector.hpp"
#include "bintest/nn.hpp"
#include "bintest/readout.hpp"
#include "bintest/sampler.hpp"

namespace bintest {

/// Attack-facing view of a classifier: a feature extractor followed by a
/// linear head. Binarized models use a two-row head [0; w] so that the
/// margin reduces to the readout logit.
struct AttackTarget {
  std::shared_ptr<const Network> extractor;
  DenseLayer head;
  int clean_label = 0;

  static AttackTarget binarized(const BinarizedModel& model);
  static AttackTarget classifier(const SplitModel& model, int clean_label);

  /// Same target with a different extractor (e.g. an unfrozen copy).
  AttackTarget with_extractor(std::shared_ptr<const Network> net) const;

  Vector logits(std::span<const double> x) const;
  /// max over k != clean of logit_k minus logit_clean; positive iff the
  /// decision differs from the clean label.
  double margin(std::span<const double> x) const;
};

enum class DetectorGoal { ignore, undetected, detected };

std::string to_string(DetectorGoal goal);
DetectorGoal detector_goal_from_string(const std::string& s);

struct DetectorConstraint {
  const Detector* detector = nullptr;
  DetectorGoal goal = DetectorGoal::ignore;

  bool active() const noexcept { return detector != nullptr && goal != DetectorGoal::ignore; }
  bool satisfied(const Vector& x) const;
};

struct AttackBudget {
  std::size_t steps = 75;
  double step_size = 2.0 / 255.0;  ///< input units
  bool random_init = true;
  std::size_t restarts = 1;
  std::uint64_t seed = 0;
};

struct AttackOutcome {
  bool success = false;
  std::optional<Vector> x_adv;
  std::size_t queries_used = 0;
  double final_logit = 0.0;  ///< margin at the returned point
  std::string failure_cause;
};

/// True when `x` lies in the ball and domain, is classified differently from
/// the clean label and satisfies the detector constraint.
bool is_adversarial(const AttackTarget& target, const Vector& x, std::span<const double> clean, const ThreatModel& tm,
                    const DetectorConstraint& constraint = {});

/// l-inf PGD on the margin loss: x <- project(x + step * sign(grad)).
/// Every iterate, the starting point included, is checked with
/// is_adversarial; the successful iterate with the largest loss is returned.
/// A quantizer in the extractor blocks the gradient; the outcome then
/// records "zero-gradient" as failure cause.
AttackOutcome pgd_attack(const AttackTarget& target, std::span<const double> clean, const ThreatModel& tm,
                         const AttackBudget& budget, const DetectorConstraint& constraint = {});

/// pgd_attack with quantizer backward passes replaced by the identity.
AttackOutcome bpda_pgd_attack(const AttackTarget& target, std::span<const double> clean, const ThreatModel& tm,
                              const AttackBudget& budget, const DetectorConstraint& constraint = {});

/// Uniform ball samples first, then random corners; stops at the first hit.
AttackOutcome random_attack(const AttackTarget& target, std::span<const double> clean, const ThreatModel& tm,
                            std::size_t n_inner, std::size_t n_corner, const DetectorConstraint& constraint,
                            std::uint64_t seed);

/// PGD on margin - lambda * ||f(x) - f(reference)||^2. With lambda == 0 the
/// trajectory is identical to pgd_attack.
AttackOutcome feature_match_attack(const AttackTarget& target, std::span<const double> clean,
                                   std::span<const double> reference, const ThreatModel& tm,
                                   const AttackBudget& budget, double lambda,
                                   const DetectorConstraint& constraint = {},
                                   GradientMode mode = GradientMode::exact);

}  // namespace bintest
