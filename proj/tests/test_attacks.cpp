#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "bintest/attacks.hpp"
#include "bintest/detector.hpp"
#include "support/oracles.hpp"

using namespace bintest;

namespace {

ThreatModel tm_with(double eps) {
  ThreatModel tm;
  tm.epsilon = eps;
  return tm;
}

AttackBudget budget(std::size_t steps, double step, bool random_init = true, std::uint64_t seed = 0) {
  AttackBudget b;
  b.steps = steps;
  b.step_size = step;
  b.random_init = random_init;
  b.seed = seed;
  return b;
}

void check_same(const AttackOutcome& a, const AttackOutcome& b) {
  CHECK(a.success == b.success);
  CHECK(a.x_adv == b.x_adv);
  CHECK(a.queries_used == b.queries_used);
  CHECK(a.final_logit == b.final_logit);
  CHECK(a.failure_cause == b.failure_cause);
}

AttackTarget mlp_target(std::uint64_t seed) {
  const SplitModel m = split_network(oracle::random_network(6, 12, 8, 3, seed));
  const Vector x(6, 0.5);
  return AttackTarget::classifier(m, m.predict(x));
}

void check_feasible(const AttackOutcome& o, const Vector& clean, const ThreatModel& tm) {
  if (!o.success) return;
  REQUIRE(o.x_adv);
  CHECK(tm.in_ball(*o.x_adv, clean));
  CHECK(tm.in_domain(*o.x_adv));
}

}  // namespace

TEST_CASE("pgd: epsilon 0 returns the clean point") {
  const AttackTarget t = AttackTarget::binarized(oracle::linear_binarized({1.0, -1.0}, -0.2));
  const Vector c{0.5, 0.5};
  ThreatModel tm;
  tm.epsilon = 0.0;
  for (auto attack : {pgd_attack, bpda_pgd_attack}) {
    const AttackOutcome o = attack(t, c, tm, budget(10, 0.1), {});
    CHECK_FALSE(o.success);
    REQUIRE(o.x_adv);
    CHECK(*o.x_adv == c);
  }
  const AttackOutcome fm = feature_match_attack(t, c, Vector{0.9, 0.1}, tm, budget(10, 0.1), 1.0);
  REQUIRE(fm.x_adv);
  CHECK(*fm.x_adv == c);
}

TEST_CASE("pgd: one large step on a linear model reaches the l-inf optimum") {
  std::mt19937_64 rng(12);
  const ThreatModel tm = tm_with(0.05);
  int successes = 0, failures = 0;
  for (int t = 0; t < 200; ++t) {
    Vector w = oracle::random_vector(4, rng, -1.0, 1.0);
    const Vector c = oracle::random_vector(4, rng, 0.2, 0.8);
    double l1 = 0.0;
    for (double v : w) l1 += std::abs(v);
    // clean logit lies in (-l1 * eps, 0): the optimum may or may not cross
    const double b = -dot(w, c) - std::uniform_real_distribution<double>(0.01, 2.0)(rng) * l1 * tm.epsilon;
    const AttackTarget target = AttackTarget::binarized(oracle::linear_binarized(w, b));
    const AttackOutcome o = pgd_attack(target, c, tm, budget(1, 0.2, false));
    Vector opt = c;
    for (std::size_t j = 0; j < c.size(); ++j) opt[j] += tm.epsilon * (w[j] > 0 ? 1.0 : -1.0);
    const bool closed_form = dot(w, opt) + b > 0.0;
    CHECK(o.success == closed_form);
    if (o.success) CHECK(linf_distance(*o.x_adv, opt) <= 1e-15);
    (closed_form ? successes : failures)++;
  }
  CHECK(successes > 20);
  CHECK(failures > 20);
}

TEST_CASE("pgd: constant-logit model exhausts its budget") {
  BinarizedModel m = oracle::linear_binarized({0.0, 0.0, 0.0}, -1.0);
  const AttackTarget t = AttackTarget::binarized(m);
  const Vector c{0.5, 0.5, 0.5};
  AttackBudget b = budget(25, 0.01);
  const AttackOutcome o = pgd_attack(t, c, tm_with(0.1), b);
  CHECK_FALSE(o.success);
  CHECK(o.queries_used == 25);
  CHECK(o.failure_cause == "budget-exhausted");
  b.restarts = 3;
  CHECK(pgd_attack(t, c, tm_with(0.1), b).queries_used == 75);
}

TEST_CASE("pgd: query accounting and feasibility on random networks") {
  const ThreatModel tm = tm_with(0.2);
  const Vector c(6, 0.5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AttackTarget t = mlp_target(seed);
    AttackBudget b = budget(15, 0.05, true, seed);
    b.restarts = 2;
    const AttackOutcome o = pgd_attack(t, c, tm, b);
    CHECK(o.queries_used <= 30);
    check_feasible(o, c, tm);
    if (o.success) CHECK(t.margin(*o.x_adv) > 0.0);
  }
}

TEST_CASE("pgd: same seed, same outcome") {
  const AttackTarget t = mlp_target(3);
  const Vector c(6, 0.5);
  check_same(pgd_attack(t, c, tm_with(0.1), budget(20, 0.02, true, 9)),
             pgd_attack(t, c, tm_with(0.1), budget(20, 0.02, true, 9)));
}

TEST_CASE("pgd: success is monotone in the step count") {
  const Vector c(6, 0.5);
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const AttackTarget t = mlp_target(seed);
    bool earlier = false;
    for (std::size_t steps : {0, 1, 2, 5, 10, 20, 40}) {
      const bool now = pgd_attack(t, c, tm_with(0.15), budget(steps, 0.03, true, seed)).success;
      CHECK((!earlier || now));
      earlier = now;
    }
  }
}

TEST_CASE("bpda: identical to pgd without a quantizer") {
  const Vector c(6, 0.5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AttackTarget t = mlp_target(seed);
    check_same(pgd_attack(t, c, tm_with(0.1), budget(30, 0.025, true, seed)),
               bpda_pgd_attack(t, c, tm_with(0.1), budget(30, 0.025, true, seed)));
  }
}

TEST_CASE("quantized model: the exact gradient is zero and bpda gets through") {
  Network q(2);
  q.add_quantizer(16);
  auto ext = std::make_shared<Network>(q);
  BinarizedModel m;
  m.extractor = ext;
  m.readout.weight = {1.0, 1.0};
  m.readout.bias = -1.15;
  const AttackTarget t = AttackTarget::binarized(m);
  const Vector c{0.5, 0.5};
  REQUIRE(t.margin(c) < 0.0);

  const GradientResult g = ext->vjp(c, Vector{1.0, 1.0});
  CHECK(g.blocked);
  CHECK(g.values == Vector{0.0, 0.0});

  const AttackOutcome vanilla = pgd_attack(t, c, tm_with(0.1), budget(20, 0.025, false));
  CHECK_FALSE(vanilla.success);
  CHECK(vanilla.failure_cause == "zero-gradient");
  const AttackOutcome bpda = bpda_pgd_attack(t, c, tm_with(0.1), budget(20, 0.025, false));
  CHECK(bpda.success);
}

TEST_CASE("random attack: zero queries fail") {
  const AttackTarget t = AttackTarget::binarized(oracle::linear_binarized({1.0}, -0.45));
  const AttackOutcome o = random_attack(t, Vector{0.4}, tm_with(0.1), 0, 0, {}, 1);
  CHECK_FALSE(o.success);
  CHECK(o.queries_used == 0);
}

TEST_CASE("random attack: half the corners adversarial") {
  // class 1 iff x0 > 0.55; corners of the 0.1-ball around 0.5 sit at 0.4 or 0.6
  const AttackTarget t = AttackTarget::binarized(oracle::linear_binarized({1.0, 0.0, 0.0}, -0.55));
  const Vector c{0.5, 0.5, 0.5};
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const AttackOutcome o = random_attack(t, c, tm_with(0.1), 0, 8, {}, seed);
    CHECK(o.queries_used <= 8);
    hits += o.success ? 1 : 0;
  }
  const double rate = hits / 2000.0;
  CHECK(std::abs(rate - (1.0 - std::pow(2.0, -8))) <= 0.03);
}

TEST_CASE("random attack: class-0 ball is never broken") {
  const AttackTarget t = AttackTarget::binarized(oracle::linear_binarized({1.0, 1.0}, -5.0));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const AttackOutcome o = random_attack(t, Vector{0.5, 0.5}, tm_with(0.1), 20, 20, {}, seed);
    CHECK_FALSE(o.success);
    CHECK(o.queries_used == 40);
  }
}

TEST_CASE("feature matching: lambda 0 follows the pgd trajectory") {
  const Vector c(6, 0.5);
  const Vector ref(6, 0.8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AttackTarget t = mlp_target(seed);
    check_same(pgd_attack(t, c, tm_with(0.1), budget(25, 0.025, true, seed)),
               feature_match_attack(t, c, ref, tm_with(0.1), budget(25, 0.025, true, seed), 0.0));
  }
}

TEST_CASE("feature matching: a dominant lambda pulls toward the projected reference") {
  // logit never crosses, so the returned point is the final iterate
  const AttackTarget t = AttackTarget::binarized(oracle::linear_binarized({1.0, 0.0, 0.0}, -10.0));
  const ThreatModel tm = tm_with(0.1);
  const Vector c{0.5, 0.5, 0.5};
  const Vector ref{0.7, 0.2, 0.55};
  const Vector projected = tm.project(ref, c);
  const double step = 0.01;
  const AttackOutcome o = feature_match_attack(t, c, ref, tm, budget(60, step, true, 3), 1e6);
  CHECK_FALSE(o.success);
  REQUIRE(o.x_adv);
  CHECK(linf_distance(*o.x_adv, projected) <= step);
}

TEST_CASE("detector constraint: success requires the requested detector decision") {
  const AttackTarget t = AttackTarget::binarized(oracle::linear_binarized({1.0, 1.0}, -1.1));
  const Vector c{0.5, 0.5};
  const ConstantDetector always(true), never(false);
  const AttackBudget b = budget(10, 0.05, false);
  CHECK(pgd_attack(t, c, tm_with(0.1), b).success);
  CHECK_FALSE(pgd_attack(t, c, tm_with(0.1), b, {&always, DetectorGoal::undetected}).success);
  CHECK(pgd_attack(t, c, tm_with(0.1), b, {&always, DetectorGoal::detected}).success);
  CHECK(pgd_attack(t, c, tm_with(0.1), b, {&never, DetectorGoal::undetected}).success);
  CHECK_FALSE(random_attack(t, c, tm_with(0.1), 50, 50, {&never, DetectorGoal::detected}, 4).success);
}

TEST_CASE("detector goal names round trip") {
  for (DetectorGoal g : {DetectorGoal::ignore, DetectorGoal::undetected, DetectorGoal::detected})
    CHECK(detector_goal_from_string(to_string(g)) == g);
  CHECK_THROWS_AS(detector_goal_from_string("sometimes"), std::invalid_argument);
}
