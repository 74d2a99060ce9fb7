#include "bintest/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bintest/model_io.hpp"
#include "bintest/rng.hpp"

namespace bintest {

namespace {

constexpr std::size_t kDim = 32;
constexpr int kClasses = 4;
constexpr double kSpread = 0.06;
constexpr std::size_t kPerClass = 500;

Architecture mlp_architecture() {
  Architecture arch;
  arch.hidden = {64, 32};
  return arch;
}

TrainingOptions zoo_training(std::uint64_t seed) {
  TrainingOptions opts;
  opts.epochs = 30;
  opts.batch_size = 32;
  opts.learning_rate = 0.05;
  opts.seed = derive_seed(seed, {0x700});
  return opts;
}

AttackSpec pgd(std::string name, std::size_t steps, double step_size) {
  AttackSpec a;
  a.name = std::move(name);
  a.kind = AttackKind::pgd;
  a.steps = steps;
  a.step_size = step_size;
  return a;
}

using Trainer = SplitModel (*)(const ZooData&, std::uint64_t, int);

SplitModel train_mlp(const ZooData& data, std::uint64_t seed, int) {
  return train_classifier(data.train, mlp_architecture(), zoo_training(seed));
}

SplitModel train_quantized(const ZooData& data, std::uint64_t seed, int levels) {
  Architecture arch = mlp_architecture();
  arch.quantizer_levels = levels;
  return train_classifier(data.train, arch, zoo_training(seed));
}

SplitModel train_normalized(const ZooData& data, std::uint64_t seed, int) {
  Architecture arch = mlp_architecture();
  arch.input_normalization = true;
  // strong enough drift that the unfrozen evaluation visibly misleads the attack
  arch.normalization_momentum = 0.3;
  return train_classifier(data.train, arch, zoo_training(seed));
}

ZooEntry clean_entry(ZooData data, SplitModel model, std::uint64_t seed) {
  ZooEntry e;
  e.name = "clean_mlp";
  e.model = std::move(model);
  e.weak_attack = pgd("pgd-1", 1, 0.01);
  e.strong_attack = pgd("pgd-75", 75, 0.25);
  e.train = std::move(data.train);
  e.calibration = std::move(data.calibration);
  e.held_out = std::move(data.held_out);
  e.config = desk_profile(seed);
  return e;
}

ZooEntry quantized_entry(ZooData data, SplitModel model, std::uint64_t seed) {
  ZooEntry e = clean_entry(std::move(data), std::move(model), seed);
  e.name = "quantized";
  e.weak_attack = pgd("pgd-75", 75, 0.25);
  e.strong_attack = e.weak_attack;
  e.strong_attack.name = "bpda-75";
  e.strong_attack.kind = AttackKind::bpda_pgd;
  return e;
}

ZooEntry unfrozen_entry(ZooData data, SplitModel model, std::uint64_t seed) {
  ZooEntry e = clean_entry(std::move(data), std::move(model), seed);
  e.name = "unfrozen_norm";
  e.weak_attack = pgd("pgd-20-unfrozen", 20, 0.25);
  e.weak_attack.unfrozen_statistics = true;
  e.strong_attack = pgd("pgd-75", 75, 0.25);
  return e;
}

ZooEntry detector_entry(ZooData data, SplitModel model, std::uint64_t seed) {
  ZooEntry e = clean_entry(std::move(data), std::move(model), seed);
  e.name = "norm_detector";
  e.detector = build_norm_detector(e.model, e.calibration, 0.05);
  e.weak_attack = pgd("pgd-75-oblivious", 75, 0.25);
  e.weak_attack.restarts = 3;
  e.strong_attack = pgd("feature-match-75", 75, 0.25);
  e.strong_attack.kind = AttackKind::feature_match;
  e.strong_attack.restarts = 3;
  e.strong_attack.lambda = 2.0;
  e.strong_attack.detector_goal = DetectorGoal::undetected;
  e.config.sampling.n_reference = 1;
  return e;
}

struct Recipe {
  const char* name;
  Trainer train;
  ZooEntry (*assemble)(ZooData, SplitModel, std::uint64_t);
};

constexpr Recipe kRecipes[] = {
    {"clean_mlp", train_mlp, clean_entry},
    {"quantized", train_quantized, quantized_entry},
    {"unfrozen_norm", train_normalized, unfrozen_entry},
    {"norm_detector", train_mlp, detector_entry},
};

const Recipe& recipe(const std::string& name) {
  for (const Recipe& r : kRecipes)
    if (name == r.name) return r;
  std::string known;
  for (const Recipe& r : kRecipes) known += std::string(known.empty() ? "" : ", ") + r.name;
  throw std::invalid_argument("unknown zoo entry '" + name + "' (known: " + known + ")");
}

ZooEntry build(const Recipe& r, std::uint64_t seed, int levels) {
  ZooData data = zoo_blobs(seed);
  SplitModel model = r.train(data, seed, levels);
  return r.assemble(std::move(data), std::move(model), seed);
}

}  // namespace

std::vector<Vector> ZooEntry::samples(std::size_t n) const {
  const std::size_t k = std::min(n, held_out.size());
  return {held_out.inputs.begin(), held_out.inputs.begin() + static_cast<std::ptrdiff_t>(k)};
}

ZooData zoo_blobs(std::uint64_t seed) {
  const LabeledData all = make_blobs(kPerClass, kDim, kClasses, kSpread, derive_seed(seed, {0xda7a}));
  ZooData d;
  d.train.num_classes = d.held_out.num_classes = kClasses;
  d.calibration.num_classes = kClasses;
  // rounds of one point per class are dealt out 2:1:1
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::size_t round = (i / kClasses) % 4;
    LabeledData& dst = round < 2 ? d.train : (round == 2 ? d.calibration : d.held_out);
    dst.inputs.push_back(all.inputs[i]);
    dst.labels.push_back(all.labels[i]);
  }
  return d;
}

TestConfig desk_profile(std::uint64_t seed) {
  TestConfig cfg;
  cfg.n_samples = 64;
  cfg.seed = seed;
  return cfg;
}

ZooEntry build_clean_mlp(std::uint64_t seed) { return build(recipe("clean_mlp"), seed, 0); }

ZooEntry build_quantized_model(std::uint64_t seed, int levels) {
  if (levels < 2) throw std::invalid_argument("build_quantized_model: levels must be >= 2");
  return build(recipe("quantized"), seed, levels);
}

ZooEntry build_unfrozen_norm_model(std::uint64_t seed) { return build(recipe("unfrozen_norm"), seed, 0); }

ZooEntry build_detector_entry(std::uint64_t seed) { return build(recipe("norm_detector"), seed, 0); }

std::shared_ptr<ThresholdDetector> build_norm_detector(const SplitModel& model, const LabeledData& clean,
                                                       double target_fpr) {
  if (clean.size() == 0) throw std::invalid_argument("build_norm_detector: no clean data");
  const std::size_t k = model.num_classes();
  auto extractor = std::make_shared<Network>(model.features);
  extractor->set_frozen(true);
  const std::size_t f = extractor->output_dim();
  std::vector<Vector> means(k, Vector(f, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (const Vector& x : clean.inputs) {
    const Vector feat = extractor->forward(x);
    const auto c = static_cast<std::size_t>(argmax(apply_dense(model.readout, feat)));
    for (std::size_t j = 0; j < f; ++j) means[c][j] += feat[j];
    ++counts[c];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0)
      for (double& v : means[c]) v /= static_cast<double>(counts[c]);

  auto score = [extractor, readout = model.readout, means](const Vector& x) {
    const Vector feat = extractor->forward(x);
    const auto c = static_cast<std::size_t>(argmax(apply_dense(readout, feat)));
    double s = 0.0;
    for (std::size_t j = 0; j < feat.size(); ++j) s += (feat[j] - means[c][j]) * (feat[j] - means[c][j]);
    return std::sqrt(s);
  };
  const ThresholdDetector family("feature-distance", score);
  return calibrate_detector_fpr(family, clean.inputs, target_fpr);
}

std::vector<std::string> zoo_names() {
  std::vector<std::string> names;
  for (const Recipe& r : kRecipes) names.emplace_back(r.name);
  return names;
}

ZooEntry build_zoo_entry(const std::string& name, std::uint64_t seed,
                         const std::optional<std::filesystem::path>& cache_dir) {
  const Recipe& r = recipe(name);
  const int levels = 256;
  if (!cache_dir) return build(r, seed, levels);

  const std::filesystem::path file = *cache_dir / (name + "-" + std::to_string(seed) + ".btnn");
  ZooData data = zoo_blobs(seed);
  SplitModel model;
  if (std::filesystem::exists(file)) {
    model = load_model(file);
  } else {
    model = r.train(data, seed, levels);
    std::filesystem::create_directories(*cache_dir);
    save_model(file, model);
  }
  return r.assemble(std::move(data), std::move(model), seed);
}

}  // namespace bintest
