#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bintest/nn.hpp"

namespace bintest {

/// l-infinity ball of radius `epsilon` intersected with the box [lo, hi]^d.
struct ThreatModel {
  double epsilon = 8.0 / 255.0;
  double lo = 0.0;
  double hi = 1.0;

  /// Throws std::invalid_argument unless epsilon > 0 and lo < hi.
  void validate() const;

  Vector clip_domain(Vector x) const;
  /// Projection onto the ball around `centre` followed by the domain box.
  Vector project(Vector x, std::span<const double> centre) const;
  bool in_domain(std::span<const double> x) const;
  /// Membership with a small absolute slack for roundoff.
  bool in_ball(std::span<const double> x, std::span<const double> centre, double slack = 1e-12) const;
};

enum class BoundaryMode {
  corner,   ///< every coordinate at +-radius
  surface,  ///< uniform on the surface of the l-inf box
};

struct SamplingParams {
  double xi = 0.95;   ///< inner radius as a fraction of epsilon
  double eta = 1.75;  ///< reference radius as a multiple of epsilon
  std::size_t n_inner = 999;
  std::size_t n_boundary = 1;
  std::size_t n_reference = 0;
  BoundaryMode boundary_mode = BoundaryMode::corner;
  std::size_t max_attempts = 200;  ///< redraws per point under a predicate

  void validate() const;
};

/// Points around one clean sample. `inner` starts with `clean`.
struct SampleBundle {
  Vector clean;
  std::vector<Vector> inner;
  std::vector<Vector> boundary;
  std::vector<Vector> reference;
  SamplingParams params;
};

using PointPredicate = std::function<bool(const Vector&)>;

class AttemptsExhausted : public std::runtime_error {
 public:
  AttemptsExhausted(std::size_t found, std::size_t requested, std::size_t attempts);
  std::size_t found() const noexcept { return found_; }
  std::size_t requested() const noexcept { return requested_; }
  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t found_;
  std::size_t requested_;
  std::size_t attempts_;
};

/// Raised by build_bundle when clipping pulls a boundary point inside the
/// inner radius; the sample cannot be used.
class InvalidBundle : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<Vector> sample_inner(std::span<const double> clean, const ThreatModel& tm, double xi, std::size_t n,
                                 std::uint64_t seed);

std::vector<Vector> sample_boundary_corner(std::span<const double> clean, const ThreatModel& tm,
                                           double radius_multiplier, std::size_t n, std::uint64_t seed);

std::vector<Vector> sample_boundary_surface(std::span<const double> clean, const ThreatModel& tm,
                                            double radius_multiplier, std::size_t n, std::uint64_t seed);

struct RejectionResult {
  std::vector<Vector> points;
  std::size_t attempts = 0;  ///< total draws, accepted or not
};

/// Corner draws, each redrawn until `accept` holds, at most `max_attempts`
/// times per point. Throws AttemptsExhausted otherwise. An always-true
/// predicate reproduces sample_boundary_corner draw for draw.
RejectionResult sample_boundary_rejection(std::span<const double> clean, const ThreatModel& tm,
                                          double radius_multiplier, std::size_t n, const PointPredicate& accept,
                                          std::size_t max_attempts, std::uint64_t seed,
                                          BoundaryMode mode = BoundaryMode::corner);

/// Draws inner, boundary and reference sets for one clean sample. When
/// `accept` is set, boundary and reference points are drawn by rejection.
SampleBundle build_bundle(std::span<const double> clean, const ThreatModel& tm, const SamplingParams& params,
                          std::uint64_t seed, const PointPredicate& accept = {});

}  // namespace bintest
