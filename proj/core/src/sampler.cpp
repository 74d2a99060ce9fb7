#include "bintest/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "bintest/rng.hpp"

namespace bintest {

void ThreatModel::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("threat model: epsilon must be > 0");
  if (!(lo < hi)) throw std::invalid_argument("threat model: domain requires lo < hi");
}

Vector ThreatModel::clip_domain(Vector x) const {
  for (double& v : x) v = std::clamp(v, lo, hi);
  return x;
}

Vector ThreatModel::project(Vector x, std::span<const double> centre) const {
  if (x.size() != centre.size()) throw DimensionError("project", centre.size(), x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    x[j] = std::clamp(std::clamp(x[j], centre[j] - epsilon, centre[j] + epsilon), lo, hi);
  return x;
}

bool ThreatModel::in_domain(std::span<const double> x) const {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v >= lo && v <= hi; });
}

bool ThreatModel::in_ball(std::span<const double> x, std::span<const double> centre, double slack) const {
  return linf_distance(x, centre) <= epsilon + slack;
}

void SamplingParams::validate() const {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("sampling: xi must lie in (0, 1)");
  if (!(eta > 1.0)) throw std::invalid_argument("sampling: eta must exceed 1");
  if (n_boundary == 0) throw std::invalid_argument("sampling: at least one boundary point is required");
  if (max_attempts == 0) throw std::invalid_argument("sampling: max_attempts must be >= 1");
}

AttemptsExhausted::AttemptsExhausted(std::size_t found, std::size_t requested, std::size_t attempts)
    : std::runtime_error("rejection sampling exhausted after " + std::to_string(attempts) + " draws (" +
                         std::to_string(found) + "/" + std::to_string(requested) + " accepted)"),
      found_(found),
      requested_(requested),
      attempts_(attempts) {}

namespace {

void check_clean(std::span<const double> clean, const ThreatModel& tm) {
  tm.validate();
  if (clean.empty()) throw std::invalid_argument("sampler: empty clean sample");
  if (!tm.in_domain(clean)) throw std::invalid_argument("sampler: clean sample outside the domain box");
}

Vector draw_corner(std::span<const double> clean, const ThreatModel& tm, double radius, Rng& rng) {
  Vector p(clean.begin(), clean.end());
  for (double& v : p) v += coin(rng) ? radius : -radius;
  return tm.clip_domain(std::move(p));
}

Vector draw_surface(std::span<const double> clean, const ThreatModel& tm, double radius, Rng& rng) {
  Vector p(clean.begin(), clean.end());
  for (double& v : p) v += uniform(rng, -radius, radius);
  const auto face = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
  p[face] = clean[face] + (coin(rng) ? radius : -radius);
  return tm.clip_domain(std::move(p));
}

Vector draw(std::span<const double> clean, const ThreatModel& tm, double radius, BoundaryMode mode, Rng& rng) {
  return mode == BoundaryMode::corner ? draw_corner(clean, tm, radius, rng) : draw_surface(clean, tm, radius, rng);
}

}  // namespace

std::vector<Vector> sample_inner(std::span<const double> clean, const ThreatModel& tm, double xi, std::size_t n,
                                 std::uint64_t seed) {
  check_clean(clean, tm);
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("sample_inner: xi must lie in (0, 1)");
  Rng rng(seed);
  const double r = xi * tm.epsilon;
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector p(clean.begin(), clean.end());
    for (double& v : p) v += uniform(rng, std::nextafter(-r, 0.0), r);
    out.push_back(tm.clip_domain(std::move(p)));
  }
  return out;
}

std::vector<Vector> sample_boundary_corner(std::span<const double> clean, const ThreatModel& tm,
                                           double radius_multiplier, std::size_t n, std::uint64_t seed) {
  check_clean(clean, tm);
  if (!(radius_multiplier > 0.0)) throw std::invalid_argument("sample_boundary_corner: multiplier must be > 0");
  Rng rng(seed);
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_corner(clean, tm, radius_multiplier * tm.epsilon, rng));
  return out;
}

std::vector<Vector> sample_boundary_surface(std::span<const double> clean, const ThreatModel& tm,
                                            double radius_multiplier, std::size_t n, std::uint64_t seed) {
  check_clean(clean, tm);
  if (!(radius_multiplier > 0.0)) throw std::invalid_argument("sample_boundary_surface: multiplier must be > 0");
  Rng rng(seed);
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_surface(clean, tm, radius_multiplier * tm.epsilon, rng));
  return out;
}

RejectionResult sample_boundary_rejection(std::span<const double> clean, const ThreatModel& tm,
                                          double radius_multiplier, std::size_t n, const PointPredicate& accept,
                                          std::size_t max_attempts, std::uint64_t seed, BoundaryMode mode) {
  check_clean(clean, tm);
  if (max_attempts == 0) throw std::invalid_argument("sample_boundary_rejection: max_attempts must be >= 1");
  if (!(radius_multiplier > 0.0)) throw std::invalid_argument("sample_boundary_rejection: multiplier must be > 0");
  Rng rng(seed);
  const double radius = radius_multiplier * tm.epsilon;
  RejectionResult result;
  for (std::size_t i = 0; i < n; ++i) {
    bool found = false;
    for (std::size_t a = 0; a < max_attempts && !found; ++a) {
      Vector p = draw(clean, tm, radius, mode, rng);
      ++result.attempts;
      if (!accept || accept(p)) {
        result.points.push_back(std::move(p));
        found = true;
      }
    }
    if (!found) throw AttemptsExhausted(result.points.size(), n, result.attempts);
  }
  return result;
}

SampleBundle build_bundle(std::span<const double> clean, const ThreatModel& tm, const SamplingParams& params,
                          std::uint64_t seed, const PointPredicate& accept) {
  params.validate();
  SampleBundle b;
  b.params = params;
  b.clean.assign(clean.begin(), clean.end());
  b.inner.reserve(params.n_inner + 1);
  b.inner.push_back(b.clean);
  for (Vector& p : sample_inner(clean, tm, params.xi, params.n_inner, derive_seed(seed, {1})))
    b.inner.push_back(std::move(p));

  b.boundary = sample_boundary_rejection(clean, tm, 1.0, params.n_boundary, accept, params.max_attempts,
                                         derive_seed(seed, {2}), params.boundary_mode)
                   .points;
  for (const Vector& p : b.boundary) {
    if (linf_distance(p, b.clean) < params.xi * tm.epsilon)
      throw InvalidBundle("domain clipping moved a boundary point inside the inner radius");
  }
  b.reference = sample_boundary_rejection(clean, tm, params.eta, params.n_reference, accept, params.max_attempts,
                                          derive_seed(seed, {3}), params.boundary_mode)
                    .points;
  return b;
}

}  // namespace bintest
