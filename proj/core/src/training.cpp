#include "bintest/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bintest/rng.hpp"

namespace bintest {

TrainingDiverged::TrainingDiverged(int epoch)
    : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)), epoch_(epoch) {}

Network make_network(const Architecture& arch, std::size_t input_dim, int num_classes, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x1a17}));
  Network net(input_dim);
  if (arch.quantizer_levels > 0) net.add_quantizer(arch.quantizer_levels);
  if (arch.input_normalization)
    net.add_normalization(Vector(input_dim, 0.0), Vector(input_dim, 1.0), arch.normalization_momentum);

  auto dense = [&](std::size_t in, std::size_t out) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    Matrix w(out, in);
    for (double& v : w.data()) v = dist(rng);
    net.add_dense(std::move(w), Vector(out, 0.0));
  };
  std::size_t width = input_dim;
  for (std::size_t h : arch.hidden) {
    dense(width, h);
    net.add_relu();
    width = h;
  }
  dense(width, static_cast<std::size_t>(num_classes));
  return net;
}

namespace {

void validate(const LabeledData& data) {
  if (data.inputs.size() != data.labels.size())
    throw std::invalid_argument("train_classifier: inputs and labels differ in length");
  if (data.inputs.empty()) throw std::invalid_argument("train_classifier: empty dataset");
  std::set<int> classes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.inputs[i].size() != data.dim()) throw DimensionError("train_classifier", data.dim(), data.inputs[i].size());
    if (!all_finite(data.inputs[i])) throw std::invalid_argument("train_classifier: non-finite input");
    if (data.labels[i] < 0 || data.labels[i] >= data.num_classes)
      throw std::invalid_argument("train_classifier: label out of range");
    classes.insert(data.labels[i]);
  }
  if (classes.size() < 2) throw std::invalid_argument("train_classifier: at least two classes required");
}

void set_normalization_from_data(Network& net, const LabeledData& data) {
  for (Layer& layer : net.mutable_layers()) {
    auto* n = std::get_if<NormalizeLayer>(&layer);
    if (n == nullptr) continue;
    const std::size_t d = n->width();
    Vector mean(d, 0.0), var(d, 0.0);
    for (const Vector& x : data.inputs)
      for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
    for (double& m : mean) m /= static_cast<double>(data.size());
    for (const Vector& x : data.inputs)
      for (std::size_t j = 0; j < d; ++j) var[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
    for (double& v : var) v /= static_cast<double>(data.size());
    n->mean = std::move(mean);
    n->variance = std::move(var);
    n->frozen = true;
    // only input-level normalization is supported by make_network
    break;
  }
}

}  // namespace

SplitModel train_classifier(const LabeledData& data, const Architecture& arch, const TrainingOptions& options) {
  validate(data);
  Network net = make_network(arch, data.dim(), data.num_classes, options.seed);
  set_normalization_from_data(net, data);

  Rng rng(derive_seed(options.seed, {0x7a1e}));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

  Network::Trace trace;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<DenseGradient> grads;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const Vector logits = net.forward(data.inputs[i], trace);
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - mx);
        Vector d(logits.size());
        for (std::size_t c = 0; c < logits.size(); ++c) d[c] = std::exp(logits[c] - mx) / z;
        epoch_loss += -(logits[static_cast<std::size_t>(data.labels[i])] - mx - std::log(z));
        d[static_cast<std::size_t>(data.labels[i])] -= 1.0;
        net.backward(trace, d, GradientMode::straight_through, &grads);
      }
      const double step = options.learning_rate / static_cast<double>(end - start);
      auto& layers = net.mutable_layers();
      for (std::size_t k = 0; k < layers.size(); ++k) {
        auto* dense = std::get_if<DenseLayer>(&layers[k]);
        if (dense == nullptr || grads[k].weight.rows() == 0) continue;
        auto w = dense->weight.data();
        const auto gw = grads[k].weight.data();
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * gw[j];
        for (std::size_t j = 0; j < dense->bias.size(); ++j) dense->bias[j] -= step * grads[k].bias[j];
      }
    }
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch);
  }

  SplitModel model = split_network(net);
  model.train_accuracy = accuracy(model, data);
  return model;
}

double accuracy(const SplitModel& model, const LabeledData& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (model.predict(data.inputs[i]) == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

LabeledData make_blobs(std::size_t per_class, std::size_t dim, int num_classes, double spread, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0xb10b}));
  std::vector<Vector> centres(static_cast<std::size_t>(num_classes), Vector(dim));
  for (Vector& c : centres)
    for (double& v : c) v = uniform(rng, 0.2, 0.8);

  LabeledData data;
  data.num_classes = num_classes;
  std::normal_distribution<double> noise(0.0, spread);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < num_classes; ++c) {
      Vector x(dim);
      for (std::size_t j = 0; j < dim; ++j) x[j] = std::clamp(centres[static_cast<std::size_t>(c)][j] + noise(rng), 0.0, 1.0);
      data.inputs.push_back(std::move(x));
      data.labels.push_back(c);
    }
  }
  return data;
}

}  // namespace bintest
