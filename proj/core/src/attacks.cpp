#include "bintest/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bintest/rng.hpp"

namespace bintest {

AttackTarget AttackTarget::binarized(const BinarizedModel& model) {
  const std::size_t f = model.readout.weight.size();
  AttackTarget t;
  t.extractor = model.extractor;
  t.head.weight = Matrix(2, f, 0.0);
  std::copy(model.readout.weight.begin(), model.readout.weight.end(), t.head.weight.row(1).begin());
  t.head.bias = {0.0, model.readout.bias};
  t.clean_label = 0;
  return t;
}

AttackTarget AttackTarget::classifier(const SplitModel& model, int clean_label) {
  AttackTarget t;
  t.extractor = std::make_shared<const Network>(model.features);
  t.head = model.readout;
  t.clean_label = clean_label;
  return t;
}

AttackTarget AttackTarget::with_extractor(std::shared_ptr<const Network> net) const {
  AttackTarget t = *this;
  t.extractor = std::move(net);
  return t;
}

Vector AttackTarget::logits(std::span<const double> x) const { return apply_dense(head, extractor->forward(x)); }

namespace {

struct MarginPick {
  double value;
  std::size_t other;
};

MarginPick margin_of(const Vector& logits, int clean_label) {
  const auto y = static_cast<std::size_t>(clean_label);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t other = y == 0 ? 1 : 0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (k == y) continue;
    if (logits[k] > best) best = logits[k], other = k;
  }
  return {best - logits[y], other};
}

}  // namespace

double AttackTarget::margin(std::span<const double> x) const { return margin_of(logits(x), clean_label).value; }

std::string to_string(DetectorGoal goal) {
  switch (goal) {
    case DetectorGoal::ignore: return "ignore";
    case DetectorGoal::undetected: return "undetected";
    case DetectorGoal::detected: return "detected";
  }
  return "ignore";
}

DetectorGoal detector_goal_from_string(const std::string& s) {
  if (s == "ignore") return DetectorGoal::ignore;
  if (s == "undetected") return DetectorGoal::undetected;
  if (s == "detected") return DetectorGoal::detected;
  throw std::invalid_argument("unknown detector goal '" + s + "'");
}

bool DetectorConstraint::satisfied(const Vector& x) const {
  if (!active()) return true;
  const bool flagged = detector->detected(x);
  return goal == DetectorGoal::detected ? flagged : !flagged;
}

bool is_adversarial(const AttackTarget& target, const Vector& x, std::span<const double> clean, const ThreatModel& tm,
                    const DetectorConstraint& constraint) {
  if (!tm.in_ball(x, clean) || !tm.in_domain(x)) return false;
  if (!(target.margin(x) > 0.0)) return false;
  return constraint.satisfied(x);
}

namespace {

struct GradientLoss {
  const Vector* reference_features = nullptr;
  double lambda = 0.0;
};

struct Evaluation {
  double margin = 0.0;
  double objective = 0.0;
  GradientResult gradient;
};

// Value and gradient of margin(x) - lambda * ||f(x) - f_ref||^2.
Evaluation evaluate(const AttackTarget& target, std::span<const double> x, GradientMode mode, const GradientLoss& loss,
                    bool with_gradient) {
  Network::Trace trace;
  const Vector features = target.extractor->forward(x, trace);
  const Vector logits = apply_dense(target.head, features);
  const MarginPick pick = margin_of(logits, target.clean_label);
  const auto y = static_cast<std::size_t>(target.clean_label);
  const bool matching = loss.reference_features != nullptr && loss.lambda != 0.0;

  Evaluation e;
  e.margin = pick.value;
  e.objective = pick.value;
  if (matching) {
    double d = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j)
      d += (features[j] - (*loss.reference_features)[j]) * (features[j] - (*loss.reference_features)[j]);
    e.objective -= loss.lambda * d;
  }
  if (!with_gradient) return e;

  Vector d_features(features.size(), 0.0);
  const auto w_other = target.head.weight.row(pick.other);
  const auto w_clean = target.head.weight.row(y);
  for (std::size_t j = 0; j < d_features.size(); ++j) d_features[j] = w_other[j] - w_clean[j];
  if (matching) {
    const Vector& ref = *loss.reference_features;
    for (std::size_t j = 0; j < d_features.size(); ++j) d_features[j] -= 2.0 * loss.lambda * (features[j] - ref[j]);
  }
  e.gradient = target.extractor->backward(trace, d_features, mode);
  return e;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Runs the full budget and returns the successful iterate with the highest
// objective; success is therefore monotone in the number of steps.
AttackOutcome gradient_attack(const AttackTarget& target, std::span<const double> clean, const ThreatModel& tm,
                              const AttackBudget& budget, const DetectorConstraint& constraint, GradientMode mode,
                              const GradientLoss& loss) {
  if (clean.size() != target.extractor->input_dim())
    throw DimensionError("attack", target.extractor->input_dim(), clean.size());
  AttackOutcome out;
  const std::size_t restarts = std::max<std::size_t>(1, budget.restarts);
  double best = -std::numeric_limits<double>::infinity();
  std::optional<Vector> last;
  double last_margin = 0.0;
  bool blocked = false;

  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(budget.seed, {r}));
    Vector x(clean.begin(), clean.end());
    if (budget.random_init && tm.epsilon > 0.0) {
      for (double& v : x) v += uniform(rng, -tm.epsilon, tm.epsilon);
      x = tm.project(std::move(x), clean);
    }
    for (std::size_t s = 0;; ++s) {
      const bool step_left = s < budget.steps;
      Evaluation e = evaluate(target, x, mode, loss, step_left);
      if (e.objective > best && is_adversarial(target, x, clean, tm, constraint)) {
        best = e.objective;
        out.success = true;
        out.final_logit = e.margin;
        out.x_adv = x;
      }
      last_margin = e.margin;
      if (!step_left) break;
      ++out.queries_used;
      if (e.gradient.blocked) {
        blocked = true;
        break;
      }
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += budget.step_size * sign(e.gradient.values[j]);
      x = tm.project(std::move(x), clean);
    }
    last = std::move(x);
  }
  if (out.success) return out;
  out.failure_cause = blocked ? "zero-gradient" : "budget-exhausted";
  out.final_logit = last_margin;
  out.x_adv = std::move(last);
  return out;
}

}  // namespace

AttackOutcome pgd_attack(const AttackTarget& target, std::span<const double> clean, const ThreatModel& tm,
                         const AttackBudget& budget, const DetectorConstraint& constraint) {
  return gradient_attack(target, clean, tm, budget, constraint, GradientMode::exact, {});
}

AttackOutcome bpda_pgd_attack(const AttackTarget& target, std::span<const double> clean, const ThreatModel& tm,
                              const AttackBudget& budget, const DetectorConstraint& constraint) {
  return gradient_attack(target, clean, tm, budget, constraint, GradientMode::straight_through, {});
}

AttackOutcome random_attack(const AttackTarget& target, std::span<const double> clean, const ThreatModel& tm,
                            std::size_t n_inner, std::size_t n_corner, const DetectorConstraint& constraint,
                            std::uint64_t seed) {
  AttackOutcome out;
  Rng rng(seed);
  auto try_point = [&](Vector x) {
    ++out.queries_used;
    if (is_adversarial(target, x, clean, tm, constraint)) {
      out.success = true;
      out.final_logit = target.margin(x);
      out.x_adv = std::move(x);
      return true;
    }
    return false;
  };
  for (std::size_t i = 0; i < n_inner; ++i) {
    Vector x(clean.begin(), clean.end());
    for (double& v : x) v += uniform(rng, -tm.epsilon, tm.epsilon);
    if (try_point(tm.project(std::move(x), clean))) return out;
  }
  for (std::size_t i = 0; i < n_corner; ++i) {
    Vector x(clean.begin(), clean.end());
    for (double& v : x) v += coin(rng) ? tm.epsilon : -tm.epsilon;
    if (try_point(tm.project(std::move(x), clean))) return out;
  }
  out.failure_cause = "no-random-hit";
  return out;
}

AttackOutcome feature_match_attack(const AttackTarget& target, std::span<const double> clean,
                                   std::span<const double> reference, const ThreatModel& tm,
                                   const AttackBudget& budget, double lambda, const DetectorConstraint& constraint,
                                   GradientMode mode) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("feature_match_attack: lambda must be >= 0");
  if (reference.size() != clean.size()) throw DimensionError("feature_match_attack reference", clean.size(), reference.size());
  const Vector ref_features = target.extractor->forward(reference);
  return gradient_attack(target, clean, tm, budget, constraint, mode, GradientLoss{&ref_features, lambda});
}

}  // namespace bintest
