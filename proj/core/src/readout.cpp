#include "bintest/readout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bintest {

namespace {

// Minimum-norm point of conv{p - n : p in positives, n in negatives} by
// Wolfe's nearest-point algorithm. The difference set is never materialised;
// the linear oracle splits into a min over positives and a max over negatives.
class NearestPointSolver {
 public:
  NearestPointSolver(const std::vector<Vector>& negatives, const std::vector<Vector>& positives)
      : neg_(negatives), pos_(positives), dim_(negatives.front().size()) {}

  Vector solve(std::size_t& iterations) {
    double scale = 0.0;
    for (const Vector& v : neg_) scale = std::max(scale, dot(v, v));
    for (const Vector& v : pos_) scale = std::max(scale, dot(v, v));
    scale = std::max(4.0 * scale, 1e-300);

    Vector x = difference(0, 0);
    corral_ = {Vertex{0, 0, x}};
    lambda_ = {1.0};

    for (iterations = 0; iterations < kMaxMajor; ++iterations) {
      const auto [p, n] = oracle(x);
      Vector c = difference(p, n);
      const double xx = dot(x, x);
      if (xx - dot(c, x) <= kOptimalityTol * scale) break;
      if (std::any_of(corral_.begin(), corral_.end(), [&](const Vertex& v) { return v.pos == p && v.neg == n; }))
        break;  // roundoff stall
      corral_.push_back(Vertex{p, n, std::move(c)});
      lambda_.push_back(0.0);
      if (!minor_cycles(x)) break;
      if (dot(x, x) <= kZeroTol * scale) break;
    }
    return x;
  }

 private:
  struct Vertex {
    std::size_t pos;
    std::size_t neg;
    Vector point;
  };

  static constexpr std::size_t kMaxMajor = 20000;
  static constexpr double kOptimalityTol = 1e-13;
  static constexpr double kZeroTol = 1e-28;
  static constexpr double kWeightTol = 1e-12;

  Vector difference(std::size_t p, std::size_t n) const {
    Vector c(dim_);
    for (std::size_t j = 0; j < dim_; ++j) c[j] = pos_[p][j] - neg_[n][j];
    return c;
  }

  std::pair<std::size_t, std::size_t> oracle(const Vector& x) const {
    std::size_t best_p = 0, best_n = 0;
    double min_p = std::numeric_limits<double>::infinity();
    double max_n = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pos_.size(); ++i) {
      const double v = dot(pos_[i], x);
      if (v < min_p) min_p = v, best_p = i;
    }
    for (std::size_t i = 0; i < neg_.size(); ++i) {
      const double v = dot(neg_[i], x);
      if (v > max_n) max_n = v, best_n = i;
    }
    return {best_p, best_n};
  }

  // Weights of the minimum-norm point of the affine hull of the corral:
  // solve (G + 1 1^T) v = 1, mu = v / sum(v).
  bool affine_minimizer(Vector& mu) const {
    const std::size_t k = corral_.size();
    std::vector<double> a(k * (k + 1));
    double max_diag = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k; ++c) a[r * (k + 1) + c] = dot(corral_[r].point, corral_[c].point) + 1.0;
      a[r * (k + 1) + k] = 1.0;
      max_diag = std::max(max_diag, a[r * (k + 1) + r]);
    }
    for (std::size_t col = 0; col < k; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < k; ++r)
        if (std::abs(a[r * (k + 1) + col]) > std::abs(a[piv * (k + 1) + col])) piv = r;
      if (std::abs(a[piv * (k + 1) + col]) < 1e-14 * max_diag) return false;
      if (piv != col)
        for (std::size_t c = 0; c <= k; ++c) std::swap(a[piv * (k + 1) + c], a[col * (k + 1) + c]);
      for (std::size_t r = col + 1; r < k; ++r) {
        const double f = a[r * (k + 1) + col] / a[col * (k + 1) + col];
        for (std::size_t c = col; c <= k; ++c) a[r * (k + 1) + c] -= f * a[col * (k + 1) + c];
      }
    }
    Vector v(k);
    for (std::size_t r = k; r-- > 0;) {
      double s = a[r * (k + 1) + k];
      for (std::size_t c = r + 1; c < k; ++c) s -= a[r * (k + 1) + c] * v[c];
      v[r] = s / a[r * (k + 1) + r];
    }
    double total = 0.0;
    for (double t : v) total += t;
    if (!(std::abs(total) > 0.0) || !std::isfinite(total)) return false;
    mu.resize(k);
    for (std::size_t i = 0; i < k; ++i) mu[i] = v[i] / total;
    return true;
  }

  Vector combine(const Vector& weights) const {
    Vector x(dim_, 0.0);
    for (std::size_t i = 0; i < corral_.size(); ++i)
      for (std::size_t j = 0; j < dim_; ++j) x[j] += weights[i] * corral_[i].point[j];
    return x;
  }

  // Returns false when the affine system degenerates; the last feasible x is kept.
  bool minor_cycles(Vector& x) {
    Vector mu;
    for (std::size_t guard = 0; guard < 4 * (dim_ + 2); ++guard) {
      if (!affine_minimizer(mu)) {
        corral_.pop_back();
        lambda_.pop_back();
        return false;
      }
      if (std::all_of(mu.begin(), mu.end(), [](double m) { return m > kWeightTol; })) {
        lambda_ = mu;
        x = combine(lambda_);
        return true;
      }
      double theta = 1.0;
      for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu[i] <= kWeightTol)
          theta = std::min(theta, lambda_[i] - mu[i] > 0.0 ? lambda_[i] / (lambda_[i] - mu[i]) : 0.0);
      for (std::size_t i = 0; i < mu.size(); ++i) lambda_[i] = theta * mu[i] + (1.0 - theta) * lambda_[i];

      std::size_t kept = 0;
      for (std::size_t i = 0; i < corral_.size(); ++i) {
        if (lambda_[i] > kWeightTol) {
          if (kept != i) corral_[kept] = std::move(corral_[i]);
          lambda_[kept] = lambda_[i];
          ++kept;
        }
      }
      if (kept == 0) {
        // cannot happen in exact arithmetic; keep the heaviest vertex
        const auto heaviest = static_cast<std::size_t>(std::max_element(lambda_.begin(), lambda_.end()) - lambda_.begin());
        if (heaviest != 0) corral_[0] = std::move(corral_[heaviest]);
        kept = 1;
        lambda_[0] = 1.0;
      }
      corral_.resize(kept);
      lambda_.resize(kept);
      double total = 0.0;
      for (double l : lambda_) total += l;
      for (double& l : lambda_) l /= total;
      x = combine(lambda_);
    }
    return false;
  }

  const std::vector<Vector>& neg_;
  const std::vector<Vector>& pos_;
  std::size_t dim_;
  std::vector<Vertex> corral_;
  Vector lambda_;
};

void check_features(const std::vector<Vector>& set, std::size_t dim, const char* what) {
  for (const Vector& v : set) {
    if (v.size() != dim) throw DimensionError(what, dim, v.size());
    if (!all_finite(v)) throw std::invalid_argument(std::string(what) + ": non-finite feature");
  }
}

double projection(const Vector& direction, const Vector& f) { return dot(direction, f); }

}  // namespace

std::variant<Separator, Skip> fit_max_margin(const std::vector<Vector>& negatives, const std::vector<Vector>& positives,
                                             double margin_floor) {
  if (negatives.empty() || positives.empty()) throw std::invalid_argument("fit_max_margin: both classes must be non-empty");
  const std::size_t dim = negatives.front().size();
  check_features(negatives, dim, "fit_max_margin negatives");
  check_features(positives, dim, "fit_max_margin positives");

  NearestPointSolver solver(negatives, positives);
  Separator sep;
  Vector z = solver.solve(sep.iterations);
  const double len = norm2(z);
  if (!(len > 0.0) || !std::isfinite(len)) return Skip{"feature sets are not linearly separable"};
  for (double& v : z) v /= len;

  double min_pos = std::numeric_limits<double>::infinity();
  double max_neg = -std::numeric_limits<double>::infinity();
  for (const Vector& p : positives) min_pos = std::min(min_pos, projection(z, p));
  for (const Vector& n : negatives) max_neg = std::max(max_neg, projection(z, n));
  sep.gap = min_pos - max_neg;
  if (!(sep.gap >= margin_floor))
    return Skip{"feature sets are not linearly separable with margin >= " + std::to_string(margin_floor)};
  sep.direction = std::move(z);
  return sep;
}

double BinaryReadout::logit(std::span<const double> features) const {
  if (features.size() != weight.size()) throw DimensionError("readout", weight.size(), features.size());
  // same accumulation order as apply_dense, so head-based evaluation agrees bitwise
  double s = bias;
  for (std::size_t j = 0; j < weight.size(); ++j) s += weight[j] * features[j];
  return s;
}

Classification classify(const BinaryReadout& readout, std::span<const double> features) {
  const double z = readout.logit(features);
  return {z > 0.0 ? 1 : 0, z};
}

std::variant<BinaryReadout, Skip> calibrate_readout(const Separator& separator, const std::vector<Vector>& inner,
                                                    const std::vector<Vector>& boundary,
                                                    const std::vector<Vector>& reference, const ReadoutOptions& options) {
  if (!(options.kappa > 0.0 && options.kappa < 1.0)) throw std::invalid_argument("readout: kappa must lie in (0, 1)");
  if (!(options.logit_range_target > 0.0)) throw std::invalid_argument("readout: logit range target must be > 0");
  const Vector& u = separator.direction;

  double max_inner = -std::numeric_limits<double>::infinity();
  for (const Vector& f : inner) max_inner = std::max(max_inner, projection(u, f));

  ReadoutCalibration cal;
  cal.kappa = options.kappa;
  double anchor = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    const double p = projection(u, boundary[i]);
    if (p < anchor) anchor = p, cal.designated = i;
  }
  double threshold = anchor - (1.0 - options.kappa) * (anchor - max_inner);

  // Reference features must stay class 1 as well; when one projects below the
  // threshold, the closest reference feature becomes the designated one.
  double min_reference = std::numeric_limits<double>::infinity();
  std::size_t closest_reference = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double p = projection(u, reference[i]);
    if (p < min_reference) min_reference = p, closest_reference = i;
  }
  if (min_reference <= threshold) {
    anchor = min_reference;
    cal.designated = closest_reference;
    cal.designated_is_reference = true;
    threshold = anchor - (1.0 - options.kappa) * (anchor - max_inner);
  }
  cal.gap = anchor - max_inner;
  cal.boundary_distance = anchor - threshold;
  if (!(cal.gap >= options.margin_floor)) return Skip{"margin below numerical floor"};

  double max_abs = 0.0;
  auto track = [&](const std::vector<Vector>& set) {
    for (const Vector& f : set) max_abs = std::max(max_abs, std::abs(projection(u, f) - threshold));
  };
  track(inner);
  track(boundary);
  track(reference);

  BinaryReadout r;
  r.logit_scale = options.logit_range_target / max_abs;
  r.weight.resize(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) r.weight[j] = r.logit_scale * u[j];
  r.bias = -r.logit_scale * threshold;
  r.calibration = cal;

  for (const Vector& f : inner)
    if (!(r.logit(f) < 0.0)) return Skip{"inner feature on the class-1 side after calibration (roundoff)"};
  for (const Vector& f : boundary)
    if (!(r.logit(f) > 0.0)) return Skip{"boundary feature on the class-0 side after calibration (roundoff)"};
  for (const Vector& f : reference)
    if (!(r.logit(f) > 0.0)) return Skip{"reference feature on the class-0 side after calibration (roundoff)"};
  return r;
}

std::variant<BinaryReadout, Skip> train_readout(const std::vector<Vector>& inner, const std::vector<Vector>& boundary,
                                                const std::vector<Vector>& reference, const ReadoutOptions& options) {
  if (inner.empty()) throw std::invalid_argument("train_readout: inner set is empty");
  if (boundary.empty()) throw std::invalid_argument("train_readout: boundary set is empty");
  std::vector<Vector> positives = boundary;
  positives.insert(positives.end(), reference.begin(), reference.end());
  auto fit = fit_max_margin(inner, positives, options.margin_floor);
  if (auto* skip = std::get_if<Skip>(&fit)) return *skip;
  return calibrate_readout(std::get<Separator>(fit), inner, boundary, reference, options);
}

ConstructionCertificate verify_construction(const BinarizedModel& model, const SampleBundle& bundle,
                                            const ThreatModel& tm, const PlantedPointCheck& planted_check) {
  ConstructionCertificate cert;
  cert.clean_logit = model.logit(bundle.clean);
  if (!(cert.clean_logit < 0.0)) throw CertificateFailure("clean sample is not classified as class 0");
  if (bundle.boundary.empty()) throw CertificateFailure("no planted boundary point");

  cert.min_boundary_logit = std::numeric_limits<double>::infinity();
  for (const Vector& p : bundle.boundary) {
    const double d = linf_distance(p, bundle.clean);
    cert.max_boundary_distance = std::max(cert.max_boundary_distance, d);
    if (!tm.in_ball(p, bundle.clean) || !tm.in_domain(p))
      throw CertificateFailure("boundary point violates the threat-model ball");
    const double z = model.logit(p);
    cert.min_boundary_logit = std::min(cert.min_boundary_logit, z);
    if (!(z > 0.0)) throw CertificateFailure("boundary point is not classified as class 1");
    if (planted_check && !planted_check(p)) throw CertificateFailure("boundary point fails the detector clause");
  }
  cert.boundary_points = bundle.boundary.size();

  cert.min_reference_logit = std::numeric_limits<double>::infinity();
  for (const Vector& p : bundle.reference) {
    const double z = model.logit(p);
    cert.min_reference_logit = std::min(cert.min_reference_logit, z);
    if (!(z > 0.0)) throw CertificateFailure("reference point is not classified as class 1");
    if (planted_check && !planted_check(p)) throw CertificateFailure("reference point fails the detector clause");
  }
  cert.reference_points = bundle.reference.size();
  if (bundle.reference.empty()) cert.min_reference_logit = 0.0;
  return cert;
}

}  // namespace bintest
