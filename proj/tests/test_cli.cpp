#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "charflow/cli.hpp"
#include "doctest.h"

using namespace charflow;
namespace fs = std::filesystem;

namespace {

ErrorCode parse_error(const std::vector<std::string>& args) {
  try {
    parse_command(args);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a configuration error");
  return ErrorCode::IoError;
}

int main_with(std::vector<std::string> args) {
  args.insert(args.begin(), "charflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("flag parsing") {
  const auto s = parse_config({"--scenario", "peakon", "--lambda", "0", "--N", "4096", "--T", "5"});
  CHECK(s.params.k == 2);
  CHECK(s.params.N == 4096);
  CHECK(s.run.T_end == 5.0);
  CHECK(std::holds_alternative<PeakonSum>(s.data));

  const auto a = parse_config({"--lambda", "1", "--scenario", "antipeakon_collision"});
  CHECK(a.params.lambda == 1);
  CHECK(a.params.k == 4);
  CHECK(std::get<PeakonSum>(a.data).terms.size() == 2);
}

TEST_CASE("configuration errors map to exit code 2") {
  CHECK(parse_error({"--scenario", "peakon", "--lambda", "-2"}) == ErrorCode::NegativeLambda);
  CHECK(parse_error({"--scenario", "peakon", "--lambda", "0.5"}) == ErrorCode::NonIntegerLambda);
  CHECK(parse_error({"--lambda", "1"}) == ErrorCode::MissingScenario);
  CHECK(parse_error({"--scenario", "peakon", "--bogus", "1"}) == ErrorCode::UnknownFlag);
  CHECK(parse_error({"--scenario", "peakon", "--N", "9000", "--oracle"}) == ErrorCode::GridTooLargeForOracle);
  CHECK(parse_error({"--scenario", "tabulated_file"}) == ErrorCode::ConflictingOptions);
  CHECK(parse_error({"--scenario", "peakon", "--input", "x.csv"}) == ErrorCode::ConflictingOptions);
  CHECK(parse_error({"--scenario", "peakon", "--dt", "0"}) == ErrorCode::ConflictingOptions);
  CHECK(parse_error({"--scenario", "nonsense"}) == ErrorCode::MissingScenario);
  CHECK(main_with({"--scenario", "peakon", "--lambda", "-2"}) == 2);
  CHECK(main_with({"--scenario", "peakon", "--unknown"}) == 2);
  CHECK(main_with({"--lambda", "0"}) == 2);
}

TEST_CASE("exit codes by error class") {
  CHECK(exit_code_for(ErrorCode::GridTooCoarse) == 2);
  CHECK(exit_code_for(ErrorCode::DiagnosticsFailure) == 3);
  CHECK(exit_code_for(ErrorCode::BoundViolated) == 3);
  CHECK(exit_code_for(ErrorCode::NonFiniteState) == 4);
  CHECK(exit_code_for(ErrorCode::XiNonPositive) == 4);
  CHECK(exit_code_for(ErrorCode::TimeStepTooLarge) == 4);
  CHECK(exit_code_for(ErrorCode::IoError) == 5);
}

TEST_CASE("config file round trip and flag precedence") {
  const auto dir = scratch_dir("charflow_cfg");
  fs::create_directories(dir);
  const auto s = parse_config({"--scenario", "gaussian_smooth", "--N", "512", "--T", "0.25", "--dt", "0.005",
                               "--energy-drift-limit", "1e-4", "--compensated-sum"});
  const auto file = dir / "config.json";
  std::ofstream(file) << config_to_json(s.config).dump(2);
  const auto back = parse_config({"--config", file.string()});
  CHECK(back.config == s.config);
  const auto over = parse_config({"--config", file.string(), "--N", "256"});
  CHECK(over.config.N == 256);
  CHECK(over.config.T == 0.25);

  std::ofstream(dir / "bad.json") << R"({"scenario": "zero", "not_a_flag": 1})";
  CHECK(parse_error({"--config", (dir / "bad.json").string()}) == ErrorCode::UnknownFlag);
  std::ofstream(dir / "broken.json") << "{";
  CHECK(parse_error({"--config", (dir / "broken.json").string()}) == ErrorCode::ConflictingOptions);
}

TEST_CASE("zero scenario writes zero energy and all outputs") {
  const auto dir = scratch_dir("charflow_zero");
  REQUIRE(main_with({"--scenario", "zero", "--N", "64", "--T", "0.1", "--dt", "0.01", "--snapshot-every", "5",
                     "--output-dir", dir.string()}) == 0);
  for (const char* f : {"config.json", "summary.json", "diagnostics.csv", "snap_0.csv", "physical_0.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  std::ifstream diag(dir / "diagnostics.csv");
  std::string line;
  std::getline(diag, line);
  CHECK(line.rfind("T,E,H", 0) == 0);
  int rows = 0;
  while (std::getline(diag, line)) {
    std::stringstream ss(line);
    std::string t, e;
    std::getline(ss, t, ',');
    std::getline(ss, e, ',');
    CHECK(std::stod(e) == 0.0);
    ++rows;
  }
  CHECK(rows >= 2);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["schema_version"] == kSchemaVersion);
  CHECK(summary["status"]["ok"] == true);
  CHECK(summary["E0"] == 0.0);
}

TEST_CASE("repeated runs produce identical files") {
  const auto a = scratch_dir("charflow_rep_a"), b = scratch_dir("charflow_rep_b");
  for (const auto& d : {a, b}) {
    REQUIRE(main_with({"--scenario", "gaussian_smooth", "--N", "256", "--T", "0.2", "--dt", "0.01",
                       "--snapshot-every", "10", "--output-dir", d.string()}) == 0);
  }
  int compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    if (name == "config.json") continue;  // holds the output directory
    CHECK(slurp(e.path()) == slurp(b / name));
    ++compared;
  }
  CHECK(compared >= 5);
}

TEST_CASE("convergence study of zero data reports zero differences") {
  const auto s = parse_config({"--scenario", "zero", "--N", "64", "--T", "0.05", "--dt", "0.01"});
  const auto study = convergence_study(s, 3, 2);
  REQUIRE(study.levels.size() == 3);
  CHECK(study.levels[0].N == 64);
  CHECK(study.levels[2].N == 256);
  CHECK(study.levels[0].diff_next == 0.0);
  CHECK(study.levels[1].diff_next == 0.0);
  for (const auto& l : study.levels) CHECK(l.failure.empty());
}
