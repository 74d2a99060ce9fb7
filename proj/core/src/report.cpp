#include "bintest/report.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace bintest {

namespace {

using nlohmann::json;

// JSON has no infinities; they are spelled as strings.
json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double get_num(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ReportParseError("not a number: '" + s + "'");
  }
  return j.get<double>();
}

json encode(const TestConfig& c) {
  json j;
  j["epsilon"] = num(c.threat.epsilon);
  j["domain_lo"] = num(c.threat.lo);
  j["domain_hi"] = num(c.threat.hi);
  j["xi"] = num(c.sampling.xi);
  j["eta"] = num(c.sampling.eta);
  j["n_inner"] = c.sampling.n_inner;
  j["n_boundary"] = c.sampling.n_boundary;
  j["n_reference"] = c.sampling.n_reference;
  j["boundary_mode"] = c.sampling.boundary_mode == BoundaryMode::corner ? "corner" : "surface";
  j["max_attempts"] = c.sampling.max_attempts;
  j["kappa"] = num(c.kappa);
  j["logit_range"] = c.logit_range ? num(*c.logit_range) : json(nullptr);
  j["margin_floor"] = num(c.margin_floor);
  j["n_samples"] = c.n_samples;
  j["rasr_inner"] = c.rasr_inner;
  j["rasr_corner"] = c.rasr_corner;
  j["rasr_mode"] = to_string(c.rasr_mode);
  j["threshold"] = num(c.threshold);
  j["weak_margin"] = num(c.weak_margin);
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  return j;
}

TestConfig decode_config(const json& j) {
  TestConfig c;
  c.threat.epsilon = get_num(j.at("epsilon"));
  c.threat.lo = get_num(j.at("domain_lo"));
  c.threat.hi = get_num(j.at("domain_hi"));
  c.sampling.xi = get_num(j.at("xi"));
  c.sampling.eta = get_num(j.at("eta"));
  c.sampling.n_inner = j.at("n_inner").get<std::size_t>();
  c.sampling.n_boundary = j.at("n_boundary").get<std::size_t>();
  c.sampling.n_reference = j.at("n_reference").get<std::size_t>();
  c.sampling.boundary_mode = j.at("boundary_mode").get<std::string>() == "surface" ? BoundaryMode::surface
                                                                                  : BoundaryMode::corner;
  c.sampling.max_attempts = j.at("max_attempts").get<std::size_t>();
  c.kappa = get_num(j.at("kappa"));
  if (!j.at("logit_range").is_null()) c.logit_range = get_num(j.at("logit_range"));
  c.margin_floor = get_num(j.at("margin_floor"));
  c.n_samples = j.at("n_samples").get<std::size_t>();
  c.rasr_inner = j.at("rasr_inner").get<std::size_t>();
  c.rasr_corner = j.at("rasr_corner").get<std::size_t>();
  c.rasr_mode = rasr_mode_from_string(j.at("rasr_mode").get<std::string>());
  c.threshold = get_num(j.at("threshold"));
  c.weak_margin = get_num(j.at("weak_margin"));
  c.seed = j.at("seed").get<std::uint64_t>();
  c.workers = j.at("workers").get<std::size_t>();
  return c;
}

json encode(const AttackSpec& a) {
  return {{"name", a.name},
          {"kind", to_string(a.kind)},
          {"steps", a.steps},
          {"step_size", num(a.step_size)},
          {"random_init", a.random_init},
          {"restarts", a.restarts},
          {"n_inner", a.n_inner},
          {"n_corner", a.n_corner},
          {"lambda", num(a.lambda)},
          {"detector_goal", to_string(a.detector_goal)},
          {"unfrozen_statistics", a.unfrozen_statistics}};
}

AttackSpec decode_attack(const json& j) {
  AttackSpec a;
  a.name = j.at("name").get<std::string>();
  a.kind = attack_kind_from_string(j.at("kind").get<std::string>());
  a.steps = j.at("steps").get<std::size_t>();
  a.step_size = get_num(j.at("step_size"));
  a.random_init = j.at("random_init").get<bool>();
  a.restarts = j.at("restarts").get<std::size_t>();
  a.n_inner = j.at("n_inner").get<std::size_t>();
  a.n_corner = j.at("n_corner").get<std::size_t>();
  a.lambda = get_num(j.at("lambda"));
  a.detector_goal = detector_goal_from_string(j.at("detector_goal").get<std::string>());
  a.unfrozen_statistics = j.at("unfrozen_statistics").get<bool>();
  return a;
}

json encode(const AttackSummary& s) {
  return {{"success", s.success},       {"reported_success", s.reported_success},
          {"queries", s.queries},       {"final_logit", num(s.final_logit)},
          {"distance", num(s.distance)}, {"cause", s.cause}};
}

AttackSummary decode_summary(const json& j) {
  AttackSummary s;
  s.success = j.at("success").get<bool>();
  s.reported_success = j.at("reported_success").get<bool>();
  s.queries = j.at("queries").get<std::size_t>();
  s.final_logit = get_num(j.at("final_logit"));
  s.distance = get_num(j.at("distance"));
  s.cause = j.at("cause").get<std::string>();
  return s;
}

json encode(const CertificateSummary& c) {
  return {{"clean_logit", num(c.clean_logit)},
          {"min_boundary_logit", num(c.min_boundary_logit)},
          {"min_reference_logit", num(c.min_reference_logit)},
          {"max_boundary_distance", num(c.max_boundary_distance)},
          {"gap", num(c.gap)},
          {"boundary_distance", num(c.boundary_distance)},
          {"logit_scale", num(c.logit_scale)}};
}

CertificateSummary decode_certificate(const json& j) {
  CertificateSummary c;
  c.clean_logit = get_num(j.at("clean_logit"));
  c.min_boundary_logit = get_num(j.at("min_boundary_logit"));
  c.min_reference_logit = get_num(j.at("min_reference_logit"));
  c.max_boundary_distance = get_num(j.at("max_boundary_distance"));
  c.gap = get_num(j.at("gap"));
  c.boundary_distance = get_num(j.at("boundary_distance"));
  c.logit_scale = get_num(j.at("logit_scale"));
  return c;
}

json encode_body(const TestReport& r) {
  json samples = json::array();
  for (const SampleRecord& s : r.samples) {
    json js{{"id", s.id}, {"skipped", s.skipped}, {"skip_reason", s.skip_reason}};
    if (!s.skipped) {
      js["attack"] = encode(s.attack);
      js["random"] = encode(s.random);
      js["certificate"] = encode(s.certificate);
    }
    samples.push_back(std::move(js));
  }
  return {{"config", encode(r.config)},
          {"attack", encode(r.attack)},
          {"detector", r.detector},
          {"inverted", r.inverted},
          {"samples", std::move(samples)},
          {"evaluated", r.evaluated},
          {"skipped", r.skipped},
          {"asr", num(r.asr)},
          {"rasr", num(r.rasr)},
          {"skip_fraction", num(r.skip_fraction)},
          {"verdict", to_string(r.verdict)},
          {"weak_attack", r.weak_attack}};
}

Verdict decode_verdict(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "pass") return Verdict::pass;
  if (s == "fail") return Verdict::fail;
  throw ReportParseError("unknown verdict '" + s + "'");
}

TestReport decode_body(const json& j) {
  TestReport r;
  r.config = decode_config(j.at("config"));
  r.attack = decode_attack(j.at("attack"));
  r.detector = j.at("detector").get<std::string>();
  r.inverted = j.at("inverted").get<bool>();
  for (const json& js : j.at("samples")) {
    SampleRecord s;
    s.id = js.at("id").get<std::size_t>();
    s.skipped = js.at("skipped").get<bool>();
    s.skip_reason = js.at("skip_reason").get<std::string>();
    if (!s.skipped) {
      s.attack = decode_summary(js.at("attack"));
      s.random = decode_summary(js.at("random"));
      s.certificate = decode_certificate(js.at("certificate"));
    }
    r.samples.push_back(std::move(s));
  }
  r.evaluated = j.at("evaluated").get<std::size_t>();
  r.skipped = j.at("skipped").get<std::size_t>();
  r.asr = get_num(j.at("asr"));
  r.rasr = get_num(j.at("rasr"));
  r.skip_fraction = get_num(j.at("skip_fraction"));
  r.verdict = decode_verdict(j.at("verdict"));
  r.weak_attack = j.at("weak_attack").get<bool>();
  return r;
}

json envelope(const char* kind) { return {{"schema_version", kReportSchemaVersion}, {"kind", kind}}; }

json open_document(const std::string& text, const char* kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ReportParseError(std::string("malformed report: ") + e.what());
  }
  if (!j.is_object()) throw ReportParseError("report must be a JSON object");
  if (j.value("schema_version", -1) != kReportSchemaVersion)
    throw ReportParseError("unsupported schema_version (expected " + std::to_string(kReportSchemaVersion) + ")");
  if (j.value("kind", std::string()) != kind) throw ReportParseError(std::string("expected a '") + kind + "' report");
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ReportParseError(std::string("invalid report: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ReportParseError(std::string("invalid report: ") + e.what());
  }
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string serialize_report(const TestReport& report) {
  json j = envelope("binarization-test");
  j["report"] = encode_body(report);
  return dump(j);
}

TestReport parse_report(const std::string& text) {
  return guarded([&] { return decode_body(open_document(text, "binarization-test").at("report")); });
}

std::string serialize_report(const DetectorTestReport& report) {
  json j = envelope("detector-test");
  j["normal"] = encode_body(report.normal);
  j["inverted"] = encode_body(report.inverted);
  j["verdict"] = to_string(report.verdict);
  return dump(j);
}

DetectorTestReport parse_detector_report(const std::string& text) {
  return guarded([&] {
    const json j = open_document(text, "detector-test");
    DetectorTestReport r;
    r.normal = decode_body(j.at("normal"));
    r.inverted = decode_body(j.at("inverted"));
    r.verdict = decode_verdict(j.at("verdict"));
    return r;
  });
}

std::string serialize_report(const SweepTable& table) {
  json j = envelope("sweep");
  json rows = json::array();
  for (const SweepRow& r : table.rows)
    rows.push_back({{"attack", r.attack},
                    {"kappa", num(r.kappa)},
                    {"asr", num(r.asr)},
                    {"rasr", num(r.rasr)},
                    {"skip_fraction", num(r.skip_fraction)},
                    {"evaluated", r.evaluated},
                    {"verdict", to_string(r.verdict)}});
  json reports = json::array();
  for (const TestReport& r : table.reports) reports.push_back(encode_body(r));
  j["rows"] = std::move(rows);
  j["reports"] = std::move(reports);
  return dump(j);
}

std::string serialize_report(const TuneResult& result) {
  json j = envelope("tune");
  j["found"] = result.found;
  j["verdict"] = result.found ? "pass" : "fail-everywhere";
  j["rung_index"] = result.rung_index;
  j["rung"] = {{"kappa", num(result.rung.kappa)}, {"n_inner", result.rung.n_inner}};
  j["recommended"] = encode(result.recommended);
  j["asr_rasr_gap"] = num(result.asr_rasr_gap);
  j["report"] = encode_body(result.report);
  return dump(j);
}

std::string samples_csv(const TestReport& report) {
  std::ostringstream os;
  os << "id,skipped,skip_reason,attack_success,attack_reported,attack_queries,attack_logit,attack_distance,"
        "attack_cause,random_success,random_queries,clean_logit,min_boundary_logit,gap,boundary_distance\n";
  for (const SampleRecord& s : report.samples) {
    os << s.id << ',' << (s.skipped ? 1 : 0) << ',' << csv_field(s.skip_reason) << ',';
    if (s.skipped) {
      os << ",,,,,,,,,,,\n";
      continue;
    }
    os << (s.attack.success ? 1 : 0) << ',' << (s.attack.reported_success ? 1 : 0) << ',' << s.attack.queries << ','
       << fmt(s.attack.final_logit) << ',' << fmt(s.attack.distance) << ',' << csv_field(s.attack.cause) << ','
       << (s.random.success ? 1 : 0) << ',' << s.random.queries << ',' << fmt(s.certificate.clean_logit) << ','
       << fmt(s.certificate.min_boundary_logit) << ',' << fmt(s.certificate.gap) << ','
       << fmt(s.certificate.boundary_distance) << '\n';
  }
  return os.str();
}

std::string sweep_csv(const SweepTable& table) {
  std::ostringstream os;
  os << "attack,kappa,asr,rasr,skip_fraction,evaluated,verdict\n";
  for (const SweepRow& r : table.rows)
    os << csv_field(r.attack) << ',' << fmt(r.kappa) << ',' << fmt(r.asr) << ',' << fmt(r.rasr) << ','
       << fmt(r.skip_fraction) << ',' << r.evaluated << ',' << to_string(r.verdict) << '\n';
  return os.str();
}

std::string summary_line(const TestReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << report.attack.name << (report.detector.empty() ? "" : (report.inverted ? " [inverted " : " [") + report.detector + "]")
     << ": asr=" << report.asr << " rasr=" << report.rasr << " skipped=" << report.skipped << "/" << report.samples.size()
     << " verdict=" << to_string(report.verdict) << (report.weak_attack ? " WEAK-ATTACK" : "");
  return os.str();
}

}  // namespace bintest
