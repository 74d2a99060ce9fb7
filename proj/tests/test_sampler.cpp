#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bintest/rng.hpp"
#include "bintest/sampler.hpp"

using namespace bintest;

namespace {

ThreatModel tm_with(double eps) {
  ThreatModel tm;
  tm.epsilon = eps;
  return tm;
}

}  // namespace

TEST_CASE("sample_inner: n = 0 gives nothing") {
  CHECK(sample_inner(Vector{0.5, 0.5}, tm_with(0.1), 0.5, 0, 1).empty());
}

TEST_CASE("sample_inner: all points within xi * epsilon") {
  const Vector c{0.5, 0.5};
  const auto pts = sample_inner(c, tm_with(0.1), 0.5, 1000, 7);
  REQUIRE(pts.size() == 1000);
  for (const Vector& p : pts) CHECK(linf_distance(p, c) < 0.05);
}

TEST_CASE("sample_inner: clipped to the domain at a wall") {
  const Vector c{0.0, 0.0};
  for (const Vector& p : sample_inner(c, tm_with(0.1), 0.95, 500, 3)) {
    CHECK(p[0] >= 0.0);
    CHECK(p[1] >= 0.0);
  }
}

TEST_CASE("sample_inner: rejects xi outside (0, 1)") {
  CHECK_THROWS_AS(sample_inner(Vector{0.5}, tm_with(0.1), 1.0, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_inner(Vector{0.5}, tm_with(0.1), 0.0, 3, 1), std::invalid_argument);
}

TEST_CASE("sample_boundary_corner: every coordinate at a corner") {
  const Vector c{0.5, 0.5, 0.5};
  for (const Vector& p : sample_boundary_corner(c, tm_with(0.25), 1.0, 200, 11))
    for (double v : p) CHECK((v == 0.25 || v == 0.75));
  CHECK(sample_boundary_corner(c, tm_with(0.25), 1.0, 0, 11).empty());
}

TEST_CASE("sample_boundary_corner: clipping at the upper wall") {
  const Vector c{0.99, 0.5};
  const ThreatModel tm = tm_with(8.0 / 255.0);
  bool saw_clip = false;
  for (const Vector& p : sample_boundary_corner(c, tm, 1.0, 64, 5)) {
    if (p[0] > c[0]) {
      CHECK(p[0] == 1.0);
      saw_clip = true;
    }
    CHECK(linf_distance(p, c) <= tm.epsilon);
  }
  CHECK(saw_clip);
}

TEST_CASE("sample_boundary_corner: unclipped coordinates sit at exactly multiplier * epsilon") {
  const Vector c{0.4, 0.6, 0.5, 0.45};
  const ThreatModel tm = tm_with(0.1);
  for (const Vector& p : sample_boundary_corner(c, tm, 1.75, 50, 2))
    for (std::size_t j = 0; j < c.size(); ++j) CHECK(std::abs(p[j] - c[j]) == doctest::Approx(0.175).epsilon(1e-12));
}

TEST_CASE("sample_boundary_surface: on the box surface") {
  const Vector c{0.5, 0.5, 0.5};
  for (const Vector& p : sample_boundary_surface(c, tm_with(0.1), 1.0, 200, 4))
    CHECK(linf_distance(p, c) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("sample_boundary_rejection: always-true reproduces the corner sampler") {
  const Vector c{0.3, 0.6, 0.5};
  const ThreatModel tm = tm_with(0.05);
  const auto plain = sample_boundary_corner(c, tm, 1.0, 40, 99);
  const RejectionResult r = sample_boundary_rejection(c, tm, 1.0, 40, [](const Vector&) { return true; }, 5, 99);
  CHECK(r.points == plain);
  CHECK(r.attempts == 40);
}

TEST_CASE("sample_boundary_rejection: always-false exhausts after max_attempts draws") {
  const Vector c{0.5, 0.5};
  try {
    sample_boundary_rejection(c, tm_with(0.1), 1.0, 3, [](const Vector&) { return false; }, 10, 1);
    FAIL("expected AttemptsExhausted");
  } catch (const AttemptsExhausted& e) {
    CHECK(e.found() == 0);
    CHECK(e.requested() == 3);
    CHECK(e.attempts() == 10);
  }
}

TEST_CASE("sample_boundary_rejection: exhaustion carries the count found so far") {
  const Vector c{0.5, 0.5};
  int calls = 0;
  auto first_two = [&](const Vector&) { return ++calls <= 2; };
  try {
    sample_boundary_rejection(c, tm_with(0.1), 1.0, 5, first_two, 4, 1);
    FAIL("expected AttemptsExhausted");
  } catch (const AttemptsExhausted& e) {
    CHECK(e.found() == 2);
    CHECK(e.attempts() == 6);
  }
}

TEST_CASE("sample_boundary_rejection: half-accepting predicate needs two draws on average") {
  const Vector c{0.5, 0.5, 0.5};
  auto upper = [&](const Vector& p) { return p[0] > c[0]; };
  const RejectionResult r = sample_boundary_rejection(c, tm_with(0.1), 1.0, 1000, upper, 200, 2024);
  const double mean = static_cast<double>(r.attempts) / 1000.0;
  CHECK(mean >= 1.8);
  CHECK(mean <= 2.2);
  for (const Vector& p : r.points) CHECK(upper(p));
}

TEST_CASE("sample_boundary_rejection: max_attempts must be positive") {
  CHECK_THROWS_AS(sample_boundary_rejection(Vector{0.5}, tm_with(0.1), 1.0, 1, {}, 0, 1), std::invalid_argument);
}

TEST_CASE("build_bundle: structure and strict margin") {
  const Vector c{0.4, 0.5, 0.6, 0.55};
  const ThreatModel tm = tm_with(0.1);
  SamplingParams p;
  p.n_inner = 300;
  p.n_boundary = 3;
  p.n_reference = 2;
  const SampleBundle b = build_bundle(c, tm, p, 77);
  REQUIRE(b.inner.size() == 301);
  CHECK(b.inner.front() == c);
  CHECK(b.boundary.size() == 3);
  CHECK(b.reference.size() == 2);

  double max_inner = 0.0, min_boundary = 1e9;
  for (std::size_t i = 1; i < b.inner.size(); ++i) max_inner = std::max(max_inner, linf_distance(b.inner[i], c));
  for (const Vector& q : b.boundary) min_boundary = std::min(min_boundary, linf_distance(q, c));
  CHECK(max_inner < p.xi * tm.epsilon);
  CHECK(min_boundary - max_inner >= (1.0 - p.xi) * tm.epsilon - 1e-12);
  for (const Vector& q : b.reference) CHECK(linf_distance(q, c) == doctest::Approx(p.eta * tm.epsilon).epsilon(1e-12));
  for (const auto* set : {&b.inner, &b.boundary, &b.reference})
    for (const Vector& q : *set) CHECK(tm.in_domain(q));
}

TEST_CASE("build_bundle: identical seeds reproduce bitwise") {
  const Vector c{0.2, 0.7, 0.5};
  SamplingParams p;
  p.n_inner = 50;
  p.n_reference = 3;
  const SampleBundle a = build_bundle(c, tm_with(0.03), p, 5);
  const SampleBundle b = build_bundle(c, tm_with(0.03), p, 5);
  CHECK(a.inner == b.inner);
  CHECK(a.boundary == b.boundary);
  CHECK(a.reference == b.reference);
  const SampleBundle d = build_bundle(c, tm_with(0.03), p, 6);
  CHECK(d.inner != a.inner);
}

TEST_CASE("build_bundle: a boundary point clipped inside the inner radius invalidates the bundle") {
  const Vector c{0.0};
  SamplingParams p;
  p.n_inner = 5;
  int invalid = 0, valid = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    try {
      const SampleBundle b = build_bundle(c, tm_with(0.1), p, seed);
      CHECK(b.boundary.front()[0] == doctest::Approx(0.1));
      ++valid;
    } catch (const InvalidBundle&) {
      ++invalid;
    }
  }
  CHECK(invalid > 0);
  CHECK(valid > 0);
}

TEST_CASE("threat model and params validation") {
  CHECK_THROWS_AS(tm_with(0.0).validate(), std::invalid_argument);
  ThreatModel inverted;
  inverted.lo = 1.0;
  inverted.hi = 0.0;
  CHECK_THROWS_AS(inverted.validate(), std::invalid_argument);
  SamplingParams p;
  p.eta = 0.9;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = SamplingParams{};
  p.xi = 1.2;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_THROWS_AS(sample_inner(Vector{1.5}, tm_with(0.1), 0.5, 1, 1), std::invalid_argument);
}
