#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bintest/report.hpp"
#include "bintest_cli/cli.hpp"

using namespace bintest;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bintest-cli-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Keeps end-to-end runs short.
const std::vector<std::string> kSmall{"--n-samples", "12", "--n-inner", "99", "--rasr-inner", "50",
                                      "--rasr-corner", "50"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

}  // namespace

TEST_CASE("cli: missing config file is a config error and writes nothing") {
  const fs::path dir = fresh_dir("missing");
  const Run r = run({"--config", "/nonexistent/bintest.conf", "--output-dir", dir.string()});
  CHECK(r.code == cli::kExitConfigError);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("cli: unknown keys and bad values") {
  const fs::path dir = fresh_dir("badkey");
  fs::create_directories(dir);
  std::ofstream(dir / "c.conf") << "mode = bintest\ncolour = blue\n";
  const Run r = run({"--config", (dir / "c.conf").string(), "--output-dir", (dir / "out").string()});
  CHECK(r.code == cli::kExitConfigError);
  CHECK(r.err.find("colour") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out"));

  CHECK(run({"--kappa", "1.5", "--output-dir", (dir / "out").string()}).code == cli::kExitConfigError);
  CHECK(run({"--steps", "many"}).code == cli::kExitConfigError);
  CHECK(run({"--entry", "resnet"}).code == cli::kExitConfigError);
  CHECK(run({"--mode", "fly"}).code == cli::kExitConfigError);
  CHECK(run({"--no-such-flag"}).code == cli::kExitConfigError);
  CHECK_FALSE(fs::exists(dir / "out"));
  fs::remove_all(dir);
}

TEST_CASE("cli: print schema") {
  const Run r = run({"--print-schema"});
  CHECK(r.code == cli::kExitPass);
  for (const char* key : {"mode", "kappa", "n-inner", "seed", "output-dir", "detector-fpr"})
    CHECK(r.out.find(key) != std::string::npos);
}

TEST_CASE("cli: bintest mode writes a report and samples table") {
  const fs::path dir = fresh_dir("bintest");
  const Run r = run(with_small({"--output-dir", dir.string()}));
  CHECK(r.code == cli::kExitPass);
  CHECK(r.out.find("verdict=pass") != std::string::npos);
  const TestReport report = parse_report(slurp(dir / "report.json"));
  CHECK(report.config.n_samples == 12);
  CHECK(report.attack.steps == 75);
  CHECK(slurp(dir / "samples.csv").rfind("id,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("cli: zoo demo on the clean MLP") {
  const fs::path dir = fresh_dir("zoo");
  const Run r = run({"--mode", "zoo-demo", "--entry", "clean_mlp", "--output-dir", dir.string()});
  CHECK(r.code == cli::kExitPass);
  CHECK(r.out.find("expectations hold") != std::string::npos);
  CHECK(fs::exists(dir / "weak.json"));
  CHECK(fs::exists(dir / "strong.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli: sweep table") {
  const fs::path dir = fresh_dir("sweep");
  const Run r = run(with_small({"--mode", "sweep", "--kappa", "0.5,0.9,0.99,0.999", "--output-dir", dir.string()}));
  CHECK(r.code == cli::kExitPass);
  const std::string csv = slurp(dir / "sweep.csv");
  CHECK(csv.rfind("attack,kappa,asr,rasr,", 0) == 0);
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n' ? 1 : 0;
  CHECK(rows == 5);
  for (const char* k : {",0.5,", ",0.9,", ",0.99,", ",0.999,"}) CHECK(csv.find(k) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli: BINTEST_SEED overrides the config file seed, flags override both") {
  const fs::path dir = fresh_dir("seed");
  fs::create_directories(dir);
  std::ofstream(dir / "c.conf") << "seed = 3\nsteps = 5\n";
  auto seed_of = [&](const std::vector<std::string>& extra) {
    std::vector<std::string> args = with_small({"--config", (dir / "c.conf").string(), "--output-dir",
                                                (dir / "out").string()});
    args.insert(args.end(), extra.begin(), extra.end());
    run(args);
    return parse_report(slurp(dir / "out" / "report.json")).config.seed;
  };
  CHECK(seed_of({}) == 3);
  setenv("BINTEST_SEED", "11", 1);
  CHECK(seed_of({}) == 11);
  CHECK(seed_of({"--seed", "7"}) == 7);
  setenv("BINTEST_SEED", "eleven", 1);
  CHECK(run({"--config", (dir / "c.conf").string()}).code == cli::kExitConfigError);
  unsetenv("BINTEST_SEED");
  fs::remove_all(dir);
}

TEST_CASE("cli: a failing attack exits 1") {
  const fs::path dir = fresh_dir("fail");
  const Run r = run(with_small({"--attack", "pgd", "--steps", "1", "--step-size", "0.01", "--output-dir",
                                dir.string()}));
  CHECK(r.code == cli::kExitFail);
  CHECK(fs::exists(dir / "report.json"));
  fs::remove_all(dir);
}
