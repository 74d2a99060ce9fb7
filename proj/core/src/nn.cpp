#include "bintest/nn.hpp"

#include <algorithm>
#include <cmath>

namespace bintest {

DimensionError::DimensionError(const std::string& where, std::size_t expected, std::size_t actual)
    : std::invalid_argument(where + ": expected dimension " + std::to_string(expected) + ", got " +
                            std::to_string(actual)),
      expected_(expected),
      actual_(actual) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double linf_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("linf_distance", a.size(), b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

Vector apply_dense(const DenseLayer& layer, std::span<const double> x) {
  if (x.size() != layer.in_dim()) throw DimensionError("dense layer", layer.in_dim(), x.size());
  Vector out(layer.out_dim());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto w = layer.weight.row(r);
    double s = layer.bias[r];
    for (std::size_t c = 0; c < x.size(); ++c) s += w[c] * x[c];
    out[r] = s;
  }
  return out;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t layer_out_dim(const Layer& layer) {
  return std::visit(overloaded{
                        [](const DenseLayer& l) { return l.out_dim(); },
                        [](const ReluLayer& l) { return l.width; },
                        [](const QuantizeLayer& l) { return l.width; },
                        [](const NormalizeLayer& l) { return l.width(); },
                    },
                    layer);
}

double quantize(double v, const QuantizeLayer& q) {
  const double span = q.hi - q.lo;
  const double t = std::clamp((v - q.lo) / span, 0.0, 1.0);
  const double steps = static_cast<double>(q.levels - 1);
  return q.lo + std::round(t * steps) / steps * span;
}

}  // namespace

std::size_t Network::output_dim() const noexcept {
  return layers_.empty() ? input_dim_ : layer_out_dim(layers_.back());
}

Network& Network::add_dense(Matrix weight, Vector bias) {
  if (weight.cols() != output_dim()) throw DimensionError("add_dense", output_dim(), weight.cols());
  if (bias.size() != weight.rows()) throw DimensionError("add_dense bias", weight.rows(), bias.size());
  layers_.emplace_back(DenseLayer{std::move(weight), std::move(bias)});
  return *this;
}

Network& Network::add_relu() {
  layers_.emplace_back(ReluLayer{output_dim()});
  return *this;
}

Network& Network::add_quantizer(int levels, double lo, double hi) {
  if (levels < 2) throw std::invalid_argument("quantizer needs at least 2 levels");
  if (!(lo < hi)) throw std::invalid_argument("quantizer range must satisfy lo < hi");
  layers_.emplace_back(QuantizeLayer{output_dim(), levels, lo, hi});
  return *this;
}

Network& Network::add_normalization(Vector mean, Vector variance, double momentum, double epsilon) {
  if (mean.size() != output_dim()) throw DimensionError("add_normalization", output_dim(), mean.size());
  if (variance.size() != mean.size()) throw DimensionError("add_normalization variance", mean.size(), variance.size());
  NormalizeLayer n;
  n.mean = std::move(mean);
  n.variance = std::move(variance);
  n.momentum = momentum;
  n.epsilon = epsilon;
  layers_.emplace_back(std::move(n));
  return *this;
}

void Network::check_input(std::span<const double> x, const char* where) const {
  if (x.size() != input_dim_) throw DimensionError(where, input_dim_, x.size());
}

Vector Network::forward(std::span<const double> x) const {
  Trace unused;
  return forward(x, unused);
}

Vector Network::forward(std::span<const double> x, Trace& trace) const {
  check_input(x, "forward");
  trace.inputs.assign(layers_.size(), {});
  trace.norm_scale.assign(layers_.size(), {});
  Vector cur(x.begin(), x.end());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    trace.inputs[i] = cur;
    std::visit(overloaded{
                   [&](const DenseLayer& l) { cur = apply_dense(l, cur); },
                   [&](const ReluLayer&) {
                     for (double& v : cur) v = v > 0.0 ? v : 0.0;
                   },
                   [&](const QuantizeLayer& q) {
                     for (double& v : cur) v = quantize(v, q);
                   },
                   [&](const NormalizeLayer& n) {
                     if (!n.frozen) {
                       for (std::size_t j = 0; j < cur.size(); ++j) {
                         const double delta = cur[j] - n.mean[j];
                         n.mean[j] += n.momentum * delta;
                         n.variance[j] = (1.0 - n.momentum) * n.variance[j] + n.momentum * delta * delta;
                       }
                     }
                     Vector& scale = trace.norm_scale[i];
                     scale.resize(cur.size());
                     for (std::size_t j = 0; j < cur.size(); ++j) {
                       scale[j] = 1.0 / std::sqrt(n.variance[j] + n.epsilon);
                       cur[j] = (cur[j] - n.mean[j]) * scale[j];
                     }
                   },
               },
               layers_[i]);
  }
  trace.output = cur;
  return cur;
}

GradientResult Network::backward(const Trace& trace, std::span<const double> d_output, GradientMode mode,
                                 std::vector<DenseGradient>* grads) const {
  if (d_output.size() != output_dim()) throw DimensionError("backward", output_dim(), d_output.size());
  if (grads != nullptr && grads->size() != layers_.size()) grads->resize(layers_.size());

  GradientResult result;
  Vector g(d_output.begin(), d_output.end());
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Vector& in = trace.inputs[k];
    std::visit(overloaded{
                   [&](const DenseLayer& l) {
                     if (grads != nullptr) {
                       DenseGradient& dg = (*grads)[k];
                       if (dg.weight.rows() != l.out_dim()) {
                         dg.weight = Matrix(l.out_dim(), l.in_dim());
                         dg.bias.assign(l.out_dim(), 0.0);
                       }
                       for (std::size_t r = 0; r < l.out_dim(); ++r) {
                         auto wr = dg.weight.row(r);
                         for (std::size_t c = 0; c < l.in_dim(); ++c) wr[c] += g[r] * in[c];
                         dg.bias[r] += g[r];
                       }
                     }
                     Vector next(l.in_dim(), 0.0);
                     for (std::size_t r = 0; r < l.out_dim(); ++r) {
                       const auto w = l.weight.row(r);
                       const double gr = g[r];
                       for (std::size_t c = 0; c < next.size(); ++c) next[c] += w[c] * gr;
                     }
                     g = std::move(next);
                   },
                   [&](const ReluLayer&) {
                     // subgradient 0 at the kink
                     for (std::size_t j = 0; j < g.size(); ++j)
                       if (!(in[j] > 0.0)) g[j] = 0.0;
                   },
                   [&](const QuantizeLayer&) {
                     if (mode == GradientMode::exact) {
                       std::fill(g.begin(), g.end(), 0.0);
                       result.blocked = true;
                     }
                   },
                   [&](const NormalizeLayer&) {
                     const Vector& scale = trace.norm_scale[k];
                     for (std::size_t j = 0; j < g.size(); ++j) g[j] *= scale[j];
                   },
               },
               layers_[k]);
  }
  result.values = std::move(g);
  return result;
}

GradientResult Network::vjp(std::span<const double> x, std::span<const double> cotangent,
                            GradientMode mode) const {
  Trace trace;
  forward(x, trace);
  return backward(trace, cotangent, mode);
}

GradientResult Network::input_gradient(std::span<const double> x, const ScalarLoss& loss,
                                       GradientMode mode) const {
  Trace trace;
  const Vector out = forward(x, trace);
  const LossValue lv = loss(out);
  return backward(trace, lv.d_output, mode);
}

bool Network::has_quantizer() const noexcept {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return std::holds_alternative<QuantizeLayer>(l); });
}

bool Network::has_normalization() const noexcept {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return std::holds_alternative<NormalizeLayer>(l); });
}

bool Network::frozen() const noexcept {
  return std::none_of(layers_.begin(), layers_.end(), [](const Layer& l) {
    const auto* n = std::get_if<NormalizeLayer>(&l);
    return n != nullptr && !n->frozen;
  });
}

void Network::set_frozen(bool frozen) {
  for (Layer& l : layers_)
    if (auto* n = std::get_if<NormalizeLayer>(&l)) n->frozen = frozen;
}

Vector SplitModel::logits(std::span<const double> x) const { return apply_dense(readout, features.forward(x)); }

int SplitModel::predict(std::span<const double> x) const { return argmax(logits(x)); }

Network SplitModel::full_network() const {
  Network net = features;
  net.mutable_layers().emplace_back(readout);
  return net;
}

SplitModel split_network(const Network& full, double train_accuracy) {
  if (full.layers().empty() || !std::holds_alternative<DenseLayer>(full.layers().back()))
    throw std::invalid_argument("split_network: last layer must be dense");
  SplitModel m;
  m.features = Network(full.input_dim());
  auto& layers = m.features.mutable_layers();
  layers.assign(full.layers().begin(), full.layers().end() - 1);
  m.readout = std::get<DenseLayer>(full.layers().back());
  m.train_accuracy = train_accuracy;
  return m;
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

}  // namespace bintest
