#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bintest/detector.hpp"
#include "bintest/harness.hpp"
#include "bintest/training.hpp"

namespace bintest {

/// Reference model with a known weak and a known strong attack.
struct ZooEntry {
  std::string name;
  SplitModel model;
  std::shared_ptr<const ThresholdDetector> detector;  ///< only for detector entries
  AttackSpec weak_attack;
  AttackSpec strong_attack;
  Verdict expected_weak = Verdict::fail;
  Verdict expected_strong = Verdict::pass;
  LabeledData train;
  LabeledData calibration;  ///< detector threshold data
  LabeledData held_out;     ///< clean samples the tests run on
  TestConfig config;        ///< desk profile for this entry

  std::vector<Vector> samples(std::size_t n) const;
};

/// Blob corpus shared by the zoo: 4 classes in 32 dimensions.
struct ZooData {
  LabeledData train;
  LabeledData calibration;
  LabeledData held_out;
};
ZooData zoo_blobs(std::uint64_t seed);

/// Desk-scale test profile: 64 samples, otherwise library defaults.
TestConfig desk_profile(std::uint64_t seed);

ZooEntry build_clean_mlp(std::uint64_t seed);
ZooEntry build_quantized_model(std::uint64_t seed, int levels = 256);
ZooEntry build_unfrozen_norm_model(std::uint64_t seed);

/// Scores the distance between a sample's feature vector and the clean
/// mean feature of its predicted class; flags the top `target_fpr` of `clean`.
std::shared_ptr<ThresholdDetector> build_norm_detector(const SplitModel& model, const LabeledData& clean,
                                                       double target_fpr);

/// Clean MLP guarded by the norm detector at 5% false positives.
ZooEntry build_detector_entry(std::uint64_t seed);

std::vector<std::string> zoo_names();

/// Entry by name. With a cache directory the trained weights are stored as
/// <name>-<seed>.btnn and reused on later calls.
ZooEntry build_zoo_entry(const std::string& name, std::uint64_t seed,
                         const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

}  // namespace bintest
