#include "bintest/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "bintest/rng.hpp"

namespace bintest {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::pgd: return "pgd";
    case AttackKind::bpda_pgd: return "bpda";
    case AttackKind::random: return "random";
    case AttackKind::feature_match: return "feature-match";
  }
  return "pgd";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "pgd") return AttackKind::pgd;
  if (s == "bpda" || s == "bpda-pgd") return AttackKind::bpda_pgd;
  if (s == "random") return AttackKind::random;
  if (s == "feature-match") return AttackKind::feature_match;
  throw std::invalid_argument("unknown attack kind '" + s + "'");
}

std::string to_string(RasrMode mode) { return mode == RasrMode::fixed ? "fixed" : "matched"; }

RasrMode rasr_mode_from_string(const std::string& s) {
  if (s == "fixed") return RasrMode::fixed;
  if (s == "matched") return RasrMode::matched;
  throw std::invalid_argument("unknown rasr mode '" + s + "'");
}

std::string to_string(Verdict v) { return v == Verdict::pass ? "pass" : "fail"; }

std::size_t AttackSpec::query_budget() const {
  return kind == AttackKind::random ? n_inner + n_corner : steps * std::max<std::size_t>(1, restarts);
}

void AttackSpec::validate() const {
  if (kind != AttackKind::random && !(step_size >= 0.0)) throw std::invalid_argument("attack: step size must be >= 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("attack: lambda must be >= 0");
}

void TestConfig::validate() const {
  threat.validate();
  sampling.validate();
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("config: kappa must lie in (0, 1)");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("config: threshold must lie in (0, 1]");
  if (logit_range && !(*logit_range > 0.0)) throw std::invalid_argument("config: logit range must be > 0");
  if (!(margin_floor > 0.0)) throw std::invalid_argument("config: margin floor must be > 0");
}

namespace {

struct GridSpec {
  const SplitModel* model = nullptr;
  std::vector<AttackSpec> attacks;
  std::vector<double> kappas;
  std::shared_ptr<const Detector> effective;  // already negated for the inverted test
  std::string detector_name;
  bool inverted = false;
};

struct SampleWork {
  std::vector<std::vector<SampleRecord>> attack_records;  // [kappa][attack]
  std::vector<SampleRecord> baseline;                     // [kappa], fixed-budget R-ASR
};

AttackSummary summarize(const AttackOutcome& outcome, bool judged, std::span<const double> clean) {
  AttackSummary s;
  s.success = judged;
  s.reported_success = outcome.success;
  s.queries = outcome.queries_used;
  s.final_logit = outcome.final_logit;
  s.distance = outcome.x_adv ? linf_distance(*outcome.x_adv, clean) : 0.0;
  s.cause = judged ? "" : (outcome.failure_cause.empty() ? "rejected-by-judge" : outcome.failure_cause);
  return s;
}

class Pipeline {
 public:
  Pipeline(const GridSpec& spec, const std::vector<Vector>& samples, const TestConfig& cfg)
      : spec_(spec), samples_(samples), cfg_(cfg) {
    auto frozen = std::make_shared<Network>(spec.model->features);
    frozen->set_frozen(true);
    extractor_ = std::move(frozen);
    judge_constraint_ = {spec.effective.get(), spec.effective ? DetectorGoal::undetected : DetectorGoal::ignore};
  }

  SampleWork run(std::size_t id) const {
    const std::size_t nk = spec_.kappas.size();
    const std::size_t na = spec_.attacks.size();
    SampleWork work;
    work.attack_records.assign(nk, std::vector<SampleRecord>(na));
    work.baseline.assign(nk, SampleRecord{});
    auto skip_all = [&](const std::string& reason) {
      for (auto& row : work.attack_records)
        for (SampleRecord& r : row) r.skipped = true, r.skip_reason = reason;
      for (SampleRecord& r : work.baseline) r.skipped = true, r.skip_reason = reason;
    };
    for (auto& row : work.attack_records)
      for (SampleRecord& r : row) r.id = id;
    for (SampleRecord& r : work.baseline) r.id = id;

    const Vector& clean = samples_[id];
    const std::uint64_t sample_seed = derive_seed(cfg_.seed, {id});

    PointPredicate accept;
    if (spec_.effective) accept = [det = spec_.effective.get()](const Vector& x) { return !det->detected(x); };

    SampleBundle bundle;
    try {
      bundle = build_bundle(clean, cfg_.threat, cfg_.sampling, derive_seed(sample_seed, {1}), accept);
    } catch (const AttemptsExhausted& e) {
      skip_all(std::string("detector-rejection: ") + e.what());
      return work;
    } catch (const InvalidBundle& e) {
      skip_all(std::string("invalid-bundle: ") + e.what());
      return work;
    }

    auto features_of = [&](const std::vector<Vector>& xs) {
      std::vector<Vector> fs;
      fs.reserve(xs.size());
      for (const Vector& x : xs) fs.push_back(extractor_->forward(x));
      return fs;
    };
    const auto f_inner = features_of(bundle.inner);
    const auto f_boundary = features_of(bundle.boundary);
    const auto f_reference = features_of(bundle.reference);

    std::vector<Vector> positives = f_boundary;
    positives.insert(positives.end(), f_reference.begin(), f_reference.end());
    auto fit = fit_max_margin(f_inner, positives, cfg_.margin_floor);
    if (const auto* skip = std::get_if<Skip>(&fit)) {
      skip_all("inseparable: " + skip->reason);
      return work;
    }
    const Separator& separator = std::get<Separator>(fit);

    double logit_range = 0.0;
    if (cfg_.logit_range) {
      logit_range = *cfg_.logit_range;
    } else {
      for (const Vector& f : f_inner)
        for (double z : apply_dense(spec_.model->readout, f)) logit_range = std::max(logit_range, std::abs(z));
      if (!(logit_range > 0.0)) logit_range = 1.0;
    }

    PlantedPointCheck planted;
    if (spec_.effective) planted = [det = spec_.effective.get()](const Vector& x) { return !det->detected(x); };

    const std::uint64_t attack_seed = derive_seed(sample_seed, {4});
    const std::uint64_t random_seed = derive_seed(sample_seed, {5});

    for (std::size_t k = 0; k < nk; ++k) {
      ReadoutOptions opts{spec_.kappas[k], logit_range, cfg_.margin_floor};
      auto calibrated = calibrate_readout(separator, f_inner, f_boundary, f_reference, opts);
      if (const auto* skip = std::get_if<Skip>(&calibrated)) {
        for (SampleRecord& r : work.attack_records[k]) r.skipped = true, r.skip_reason = "calibration: " + skip->reason;
        work.baseline[k].skipped = true;
        work.baseline[k].skip_reason = "calibration: " + skip->reason;
        continue;
      }
      BinarizedModel binarized{extractor_, std::get<BinaryReadout>(std::move(calibrated))};
      const ConstructionCertificate cert = verify_construction(binarized, bundle, cfg_.threat, planted);
      CertificateSummary cs;
      cs.clean_logit = cert.clean_logit;
      cs.min_boundary_logit = cert.min_boundary_logit;
      cs.min_reference_logit = cert.min_reference_logit;
      cs.max_boundary_distance = cert.max_boundary_distance;
      cs.gap = binarized.readout.calibration.gap;
      cs.boundary_distance = binarized.readout.calibration.boundary_distance;
      cs.logit_scale = binarized.readout.logit_scale;

      const AttackTarget judge = AttackTarget::binarized(binarized);
      auto run_random = [&](std::size_t n_inner, std::size_t n_corner) {
        const AttackOutcome out =
            random_attack(judge, clean, cfg_.threat, n_inner, n_corner, judge_constraint_, random_seed);
        return summarize(out, out.success, clean);
      };

      SampleRecord& base = work.baseline[k];
      base.certificate = cs;
      base.random = run_random(cfg_.rasr_inner, cfg_.rasr_corner);

      for (std::size_t a = 0; a < na; ++a) {
        const AttackSpec& spec = spec_.attacks[a];
        SampleRecord& rec = work.attack_records[k][a];
        rec.certificate = cs;
        rec.random = cfg_.rasr_mode == RasrMode::fixed ? base.random : run_random(spec.query_budget(), 0);

        AttackTarget target = judge;
        if (spec.unfrozen_statistics) {
          auto live = std::make_shared<Network>(*extractor_);
          live->set_frozen(false);
          target = judge.with_extractor(std::move(live));
        }
        const DetectorConstraint constraint{spec_.effective.get(), spec.detector_goal};
        const AttackBudget budget{spec.steps, spec.step_size * cfg_.threat.epsilon, spec.random_init, spec.restarts,
                                  attack_seed};
        AttackOutcome outcome;
        switch (spec.kind) {
          case AttackKind::pgd:
            outcome = pgd_attack(target, clean, cfg_.threat, budget, constraint);
            break;
          case AttackKind::bpda_pgd:
            outcome = bpda_pgd_attack(target, clean, cfg_.threat, budget, constraint);
            break;
          case AttackKind::random:
            outcome = random_attack(target, clean, cfg_.threat, spec.n_inner, spec.n_corner, constraint, attack_seed);
            break;
          case AttackKind::feature_match:
            outcome = feature_match_attack(target, clean, bundle.reference.front(), cfg_.threat, budget, spec.lambda,
                                           constraint,
                                           target.extractor->has_quantizer() ? GradientMode::straight_through
                                                                             : GradientMode::exact);
            break;
        }
        const bool judged =
            outcome.x_adv.has_value() && is_adversarial(judge, *outcome.x_adv, clean, cfg_.threat, judge_constraint_);
        rec.attack = summarize(outcome, judged, clean);
      }
    }
    return work;
  }

 private:
  const GridSpec& spec_;
  const std::vector<Vector>& samples_;
  const TestConfig& cfg_;
  std::shared_ptr<const Network> extractor_;
  DetectorConstraint judge_constraint_;
};

void aggregate(TestReport& report) {
  report.evaluated = 0;
  report.skipped = 0;
  std::size_t hits = 0, random_hits = 0;
  for (const SampleRecord& r : report.samples) {
    if (r.skipped) {
      ++report.skipped;
      continue;
    }
    ++report.evaluated;
    hits += r.attack.success ? 1 : 0;
    random_hits += r.random.success ? 1 : 0;
  }
  const double n = static_cast<double>(report.evaluated);
  report.asr = report.evaluated > 0 ? static_cast<double>(hits) / n : 0.0;
  report.rasr = report.evaluated > 0 ? static_cast<double>(random_hits) / n : 0.0;
  report.skip_fraction =
      report.samples.empty() ? 0.0 : static_cast<double>(report.skipped) / static_cast<double>(report.samples.size());
  report.verdict = report.evaluated > 0 && report.asr >= report.config.threshold ? Verdict::pass : Verdict::fail;
  report.weak_attack = report.asr < report.rasr + report.config.weak_margin;
}

struct GridResult {
  std::vector<std::vector<TestReport>> reports;  // [kappa][attack]
  std::vector<TestReport> baseline;              // [kappa]
};

GridResult run_grid(const GridSpec& spec, const std::vector<Vector>& samples, const TestConfig& cfg) {
  cfg.validate();
  for (const AttackSpec& a : spec.attacks) {
    a.validate();
    if (a.kind == AttackKind::feature_match && cfg.sampling.n_reference == 0)
      throw std::invalid_argument("config: feature matching needs n-reference >= 1");
  }
  for (double k : spec.kappas)
    if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("config: kappa values must lie in (0, 1)");
  const std::size_t n = std::min(cfg.n_samples, samples.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (samples[i].size() != spec.model->input_dim()) throw DimensionError("sample", spec.model->input_dim(), samples[i].size());
    if (!cfg.threat.in_domain(samples[i])) throw std::invalid_argument("sample " + std::to_string(i) + " lies outside the domain box");
  }

  const Pipeline pipeline(spec, samples, cfg);
  std::vector<SampleWork> work(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        work[i] = pipeline.run(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(cfg.workers, 1, std::max<std::size_t>(1, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  GridResult result;
  result.reports.resize(spec.kappas.size());
  for (std::size_t k = 0; k < spec.kappas.size(); ++k) {
    auto make = [&](const AttackSpec& attack) {
      TestReport r;
      r.config = cfg;
      r.config.kappa = spec.kappas[k];
      r.attack = attack;
      r.detector = spec.detector_name;
      r.inverted = spec.inverted;
      return r;
    };
    for (std::size_t a = 0; a < spec.attacks.size(); ++a) {
      TestReport r = make(spec.attacks[a]);
      for (std::size_t i = 0; i < n; ++i) r.samples.push_back(work[i].attack_records[k][a]);
      aggregate(r);
      result.reports[k].push_back(std::move(r));
    }
    AttackSpec baseline_spec;
    baseline_spec.name = "random-baseline";
    baseline_spec.kind = AttackKind::random;
    baseline_spec.n_inner = cfg.rasr_inner;
    baseline_spec.n_corner = cfg.rasr_corner;
    TestReport b = make(baseline_spec);
    for (std::size_t i = 0; i < n; ++i) {
      SampleRecord rec = work[i].baseline[k];
      rec.attack = rec.random;
      b.samples.push_back(std::move(rec));
    }
    aggregate(b);
    result.baseline.push_back(std::move(b));
  }
  return result;
}

GridSpec plain_spec(const SplitModel& model, std::vector<AttackSpec> attacks, std::vector<double> kappas) {
  GridSpec spec;
  spec.model = &model;
  spec.attacks = std::move(attacks);
  spec.kappas = std::move(kappas);
  return spec;
}

}  // namespace

TestReport run_binarization_test(const SplitModel& model, const AttackSpec& attack, const std::vector<Vector>& samples,
                                 const TestConfig& config) {
  const GridSpec spec = plain_spec(model, {attack}, {config.kappa});
  return std::move(run_grid(spec, samples, config).reports[0][0]);
}

TestReport run_detector_test(const SplitModel& model, std::shared_ptr<const Detector> detector,
                             const AttackSpec& attack, const std::vector<Vector>& samples, const TestConfig& config) {
  if (!detector) throw std::invalid_argument("run_detector_test: detector required");
  GridSpec spec = plain_spec(model, {attack}, {config.kappa});
  spec.detector_name = detector->name();
  spec.effective = std::move(detector);
  return std::move(run_grid(spec, samples, config).reports[0][0]);
}

TestReport run_inverted_detector_test(const SplitModel& model, std::shared_ptr<const Detector> detector,
                                      const AttackSpec& attack, const std::vector<Vector>& samples,
                                      const TestConfig& config) {
  if (!detector) throw std::invalid_argument("run_inverted_detector_test: detector required");
  GridSpec spec = plain_spec(model, {attack}, {config.kappa});
  spec.detector_name = detector->name();
  spec.inverted = true;
  spec.effective = std::make_shared<NegatedDetector>(std::move(detector));
  return std::move(run_grid(spec, samples, config).reports[0][0]);
}

DetectorTestReport run_detector_test_pair(const SplitModel& model, std::shared_ptr<const Detector> detector,
                                          const AttackSpec& attack, const std::vector<Vector>& samples,
                                          const TestConfig& config) {
  DetectorTestReport r;
  r.normal = run_detector_test(model, detector, attack, samples, config);
  r.inverted = run_inverted_detector_test(model, detector, attack, samples, config);
  r.verdict = r.normal.verdict == Verdict::pass && r.inverted.verdict == Verdict::pass ? Verdict::pass : Verdict::fail;
  return r;
}

SweepTable hardness_sweep(const SplitModel& model, const std::vector<AttackSpec>& attacks,
                          const std::vector<Vector>& samples, const TestConfig& config,
                          const std::vector<double>& kappas) {
  if (kappas.empty()) throw std::invalid_argument("hardness_sweep: no kappa values");
  GridResult grid = run_grid(plain_spec(model, attacks, kappas), samples, config);
  SweepTable table;
  auto row_of = [](const TestReport& r, std::string name) {
    return SweepRow{std::move(name), r.config.kappa, r.asr, r.rasr, r.skip_fraction, r.evaluated, r.verdict};
  };
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    if (attacks.empty()) {
      SweepRow row = row_of(grid.baseline[k], "");
      row.asr = 0.0;
      row.verdict = Verdict::fail;
      table.rows.push_back(row);
      table.reports.push_back(std::move(grid.baseline[k]));
      continue;
    }
    for (std::size_t a = 0; a < attacks.size(); ++a) {
      table.rows.push_back(row_of(grid.reports[k][a], attacks[a].name));
      table.reports.push_back(std::move(grid.reports[k][a]));
    }
  }
  return table;
}

std::vector<HardnessRung> default_hardness_ladder(const TestConfig& config) {
  std::vector<std::size_t> levels{config.sampling.n_inner};
  if (config.sampling.n_inner >= 10) levels.push_back(config.sampling.n_inner / 10);
  std::vector<HardnessRung> ladder;
  for (std::size_t n : levels)
    for (double k : {0.999, 0.99, 0.9, 0.5}) ladder.push_back({k, n});
  return ladder;
}

TuneResult tune_hardness(const SplitModel& model, const AttackSpec& attack, const std::vector<Vector>& samples,
                         const TestConfig& config, const std::vector<HardnessRung>& ladder) {
  if (ladder.empty()) throw std::invalid_argument("tune_hardness: empty ladder");
  TuneResult result;
  result.rung_index = ladder.size();
  std::size_t i = 0;
  while (i < ladder.size()) {
    // rungs sharing an inner count reuse one set of constructions
    std::size_t j = i;
    std::vector<double> kappas;
    while (j < ladder.size() && ladder[j].n_inner == ladder[i].n_inner) kappas.push_back(ladder[j++].kappa);
    TestConfig cfg = config;
    cfg.sampling.n_inner = ladder[i].n_inner;
    GridResult grid = run_grid(plain_spec(model, {attack}, kappas), samples, cfg);
    for (std::size_t k = 0; k < kappas.size(); ++k) {
      TestReport& report = grid.reports[k][0];
      const bool passed = report.verdict == Verdict::pass;
      if (passed || (i + k + 1 == ladder.size())) {
        result.found = passed;
        result.rung_index = passed ? i + k : ladder.size();
        result.rung = ladder[i + k];
        result.recommended = cfg;
        result.recommended.kappa = ladder[i + k].kappa;
        result.asr_rasr_gap = report.asr - report.rasr;
        result.report = std::move(report);
        if (passed) return result;
      }
    }
    i = j;
  }
  return result;
}

}  // namespace bintest
