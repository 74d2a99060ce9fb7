#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bintest/nn.hpp"
#include "bintest/sampler.hpp"

namespace bintest {

/// Result of the hard-margin fit: the direction is normalised to unit length
/// and `gap` is the width of the widest separating slab.
struct Separator {
  Vector direction;
  double gap = 0.0;
  std::size_t iterations = 0;
};

struct Skip {
  std::string reason;
};

/// Hard-margin separator between `negatives` (class 0) and `positives`
/// (class 1), found as the nearest pair of points of the two convex hulls.
/// Returns Skip when the hulls touch, i.e. the slab is thinner than
/// `margin_floor`.
std::variant<Separator, Skip> fit_max_margin(const std::vector<Vector>& negatives, const std::vector<Vector>& positives,
                                             double margin_floor = 1e-9);

struct ReadoutCalibration {
  double kappa = 0.999;
  /// Distance along the weight direction between the designated class-1
  /// feature and the closest inner feature.
  double gap = 0.0;
  /// Signed distance from the designated feature to the hyperplane, (1 - kappa) * gap.
  double boundary_distance = 0.0;
  std::size_t designated = 0;
  bool designated_is_reference = false;
};

/// Linear binary discriminator: class 1 iff weight . f + bias > 0.
struct BinaryReadout {
  Vector weight;
  double bias = 0.0;
  double logit_scale = 1.0;
  ReadoutCalibration calibration;

  double logit(std::span<const double> features) const;
};

struct Classification {
  int label = 0;
  double logit = 0.0;
};

Classification classify(const BinaryReadout& readout, std::span<const double> features);

struct ReadoutOptions {
  double kappa = 0.999;
  double logit_range_target = 1.0;
  double margin_floor = 1e-9;
};

/// Places the hyperplane of a fitted separator so that the designated
/// boundary feature (the boundary feature with the smallest projection) sits
/// at distance (1 - kappa) * gap from it, then rescales so the largest
/// absolute training logit equals `logit_range_target`.
std::variant<BinaryReadout, Skip> calibrate_readout(const Separator& separator, const std::vector<Vector>& inner,
                                                    const std::vector<Vector>& boundary,
                                                    const std::vector<Vector>& reference, const ReadoutOptions& options);

/// fit_max_margin followed by calibrate_readout.
std::variant<BinaryReadout, Skip> train_readout(const std::vector<Vector>& inner, const std::vector<Vector>& boundary,
                                                const std::vector<Vector>& reference, const ReadoutOptions& options);

/// Feature extractor of the original model with the binary readout on top.
struct BinarizedModel {
  std::shared_ptr<const Network> extractor;
  BinaryReadout readout;

  double logit(std::span<const double> x) const { return readout.logit(extractor->forward(x)); }
  int predict(std::span<const double> x) const { return logit(x) > 0.0 ? 1 : 0; }
};

class CertificateFailure : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ConstructionCertificate {
  double clean_logit = 0.0;
  double min_boundary_logit = 0.0;
  double min_reference_logit = 0.0;
  double max_boundary_distance = 0.0;
  std::size_t boundary_points = 0;
  std::size_t reference_points = 0;
};

/// Extra clause for detector constructions: every planted point must satisfy it.
using PlantedPointCheck = std::function<bool(const Vector&)>;

/// Re-evaluates the binarized model on the bundle and throws
/// CertificateFailure naming the first violated clause.
ConstructionCertificate verify_construction(const BinarizedModel& model, const SampleBundle& bundle,
                                            const ThreatModel& tm, const PlantedPointCheck& planted_check = {});

}  // namespace bintest
