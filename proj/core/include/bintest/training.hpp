#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bintest/nn.hpp"

namespace bintest {

struct LabeledData {
  std::vector<Vector> inputs;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return inputs.size(); }
  std::size_t dim() const noexcept { return inputs.empty() ? 0 : inputs.front().size(); }
};

struct Architecture {
  std::vector<std::size_t> hidden;  // ReLU hidden widths; empty = linear model
  int quantizer_levels = 0;         // 0 = no input quantizer
  bool input_normalization = false;
  double normalization_momentum = 0.1;
};

struct TrainingOptions {
  int epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(int epoch);
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// He-initialised network for the architecture, including the final
/// `num_classes`-wide dense layer.
Network make_network(const Architecture& arch, std::size_t input_dim, int num_classes, std::uint64_t seed);

/// Plain mini-batch gradient descent on softmax cross-entropy. Input
/// normalization statistics (if requested) are taken from the data once and
/// frozen.
SplitModel train_classifier(const LabeledData& data, const Architecture& arch, const TrainingOptions& options);

double accuracy(const SplitModel& model, const LabeledData& data);

/// Isotropic Gaussian clusters with centres drawn in [0.2, 0.8]^dim, clipped
/// to [0, 1].
LabeledData make_blobs(std::size_t per_class, std::size_t dim, int num_classes, double spread, std::uint64_t seed);

}  // namespace bintest
