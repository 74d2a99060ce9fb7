#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace bintest {

using Vector = std::vector<double>;

class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& where, std::size_t expected, std::size_t actual);

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double linf_distance(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);

/// out = weight * in + bias
struct DenseLayer {
  Matrix weight;
  Vector bias;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
  bool operator==(const DenseLayer&) const = default;
};

Vector apply_dense(const DenseLayer& layer, std::span<const double> x);

struct ReluLayer {
  std::size_t width = 0;
  bool operator==(const ReluLayer&) const = default;
};

/// Rounds every coordinate of [lo, hi] to `levels` evenly spaced values.
/// Piecewise constant, so its exact derivative is zero almost everywhere.
struct QuantizeLayer {
  std::size_t width = 0;
  int levels = 256;
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const QuantizeLayer&) const = default;
};

/// Per-feature standardisation (x - mean) / sqrt(variance + epsilon).
///
/// While `frozen` is false every forward pass first folds the incoming
/// vector into the running statistics with the given momentum, mimicking a
/// batch-norm layer left in training mode. The statistics are `mutable` so
/// that this happens through the const forward path; an unfrozen network
/// must therefore not be shared between threads.
struct NormalizeLayer {
  mutable Vector mean;
  mutable Vector variance;
  double epsilon = 1e-5;
  double momentum = 0.1;
  bool frozen = true;

  std::size_t width() const noexcept { return mean.size(); }
  bool operator==(const NormalizeLayer&) const = default;
};

using Layer = std::variant<DenseLayer, ReluLayer, QuantizeLayer, NormalizeLayer>;

enum class GradientMode {
  exact,             ///< true derivative; quantizers contribute zero
  straight_through,  ///< quantizer backward replaced by identity (BPDA)
};

struct GradientResult {
  Vector values;
  /// Set when a quantizer was crossed in exact mode; `values` is then
  /// identically zero.
  bool blocked = false;
};

struct LossValue {
  double value = 0.0;
  Vector d_output;
};

/// Scalar loss of the network output, returning the value and dloss/doutput.
using ScalarLoss = std::function<LossValue(const Vector& output)>;

/// Gradient of each dense layer's parameters, indexed like the layer list
/// (entries for non-dense layers stay empty).
struct DenseGradient {
  Matrix weight;
  Vector bias;
};

class Network {
 public:
  /// Per-layer record of a forward pass, consumed by backward().
  struct Trace {
    std::vector<Vector> inputs;      // inputs[i] feeds layer i
    std::vector<Vector> norm_scale;  // 1/sqrt(var+eps) used by normalize layers
    Vector output;
  };

  explicit Network(std::size_t input_dim = 0) : input_dim_(input_dim) {}

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept;

  Network& add_dense(Matrix weight, Vector bias);
  Network& add_relu();
  Network& add_quantizer(int levels, double lo = 0.0, double hi = 1.0);
  Network& add_normalization(Vector mean, Vector variance, double momentum = 0.1,
                             double epsilon = 1e-5);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }

  Vector forward(std::span<const double> x) const;
  Vector forward(std::span<const double> x, Trace& trace) const;

  /// Back-propagates `d_output` through a recorded pass. Returns the input
  /// cotangent and, when `grads` is non-null, accumulates dense parameter
  /// gradients into it.
  GradientResult backward(const Trace& trace, std::span<const double> d_output, GradientMode mode,
                          std::vector<DenseGradient>* grads = nullptr) const;

  /// Vector-Jacobian product: d(cotangent . forward(x)) / dx.
  GradientResult vjp(std::span<const double> x, std::span<const double> cotangent,
                     GradientMode mode = GradientMode::exact) const;

  GradientResult input_gradient(std::span<const double> x, const ScalarLoss& loss,
                                GradientMode mode = GradientMode::exact) const;

  bool has_quantizer() const noexcept;
  bool has_normalization() const noexcept;
  /// True when no normalization layer updates its statistics.
  bool frozen() const noexcept;
  void set_frozen(bool frozen);

  bool operator==(const Network&) const = default;

 private:
  void check_input(std::span<const double> x, const char* where) const;

  std::size_t input_dim_ = 0;
  std::vector<Layer> layers_;
};

/// A classifier cut into a feature extractor and its final linear readout.
struct SplitModel {
  Network features;
  DenseLayer readout;
  double train_accuracy = 0.0;

  std::size_t input_dim() const noexcept { return features.input_dim(); }
  std::size_t num_classes() const noexcept { return readout.out_dim(); }

  Vector logits(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
  /// The same computation as a single network (features followed by readout).
  Network full_network() const;

  bool operator==(const SplitModel&) const = default;
};

/// Splits a network whose last layer is dense into extractor + readout.
SplitModel split_network(const Network& full, double train_accuracy = 0.0);

int argmax(std::span<const double> v);

}  // namespace bintest
