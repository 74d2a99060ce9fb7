#pragma once

// Small trained models and fast configurations shared by the harness-level tests.

#include "bintest/harness.hpp"
#include "bintest/training.hpp"

namespace fixture {

inline const bintest::LabeledData& small_blobs() {
  static const bintest::LabeledData data = bintest::make_blobs(60, 8, 3, 0.05, 21);
  return data;
}

inline const bintest::SplitModel& small_mlp() {
  static const bintest::SplitModel model = [] {
    bintest::Architecture arch;
    arch.hidden = {16, 12};
    bintest::TrainingOptions opts;
    opts.epochs = 40;
    opts.seed = 4;
    return bintest::train_classifier(small_blobs(), arch, opts);
  }();
  return model;
}

inline std::vector<bintest::Vector> small_samples(std::size_t n) {
  const auto& in = small_blobs().inputs;
  std::vector<bintest::Vector> out;
  for (std::size_t i = 0; i < n && i < in.size(); ++i) out.push_back(in[i * 7 % in.size()]);
  return out;
}

inline bintest::TestConfig fast_config(std::uint64_t seed = 0) {
  bintest::TestConfig cfg;
  cfg.n_samples = 12;
  cfg.sampling.n_inner = 99;
  cfg.rasr_inner = 50;
  cfg.rasr_corner = 50;
  cfg.seed = seed;
  return cfg;
}

inline bintest::AttackSpec pgd(std::size_t steps, double step_size = 0.25) {
  bintest::AttackSpec a;
  a.name = "pgd-" + std::to_string(steps);
  a.steps = steps;
  a.step_size = step_size;
  return a;
}

}  // namespace fixture
