#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "charflow/evolve.hpp"
#include "charflow/reconstruct.hpp"

namespace charflow {

enum class Scenario { GaussianSmooth, GaussianBreaking, Peakon, AntipeakonCollision, TwoPeakon, TabulatedFile, Zero };

std::string_view to_string(Scenario s) noexcept;
std::optional<Scenario> scenario_from_string(std::string_view name);
std::vector<std::string> scenario_names();

/// Default parameters and initial data of a scenario. Tabulated data are
/// left empty here and read from --input during resolution.
struct ScenarioPreset {
  Scenario name = Scenario::Zero;
  double lambda = 0.0;
  double L = 20.0;
  double N = 4096;
  double dt = 1e-3;
  double T = 5.0;
  InitialData data;
};

ScenarioPreset scenario_preset(Scenario s);

/// Effective configuration. Each field corresponds to the flag of the same
/// name, and config files use those names as keys.
struct Config {
  std::string scenario;
  double lambda = 0.0;
  double L = 20.0;
  double N = 4096;
  double dt = 1e-3;
  double T = 5.0;
  int snapshot_every = 100;
  int check_every = 10;
  double epsilon_sing = 1e-6;
  std::string output_dir = "charflow_out";
  bool oracle = false;
  bool compensated_sum = false;
  std::string input;
  double energy_drift_limit = 1e-5;

  bool operator==(const Config&) const = default;
};

nlohmann::json config_to_json(const Config& c);

/// Everything a run needs, derived from a validated Config.
struct RunSetup {
  Config config;
  ModelParams params;
  InitialData data;
  RunConfig run;
};

struct ParsedCommand {
  RunSetup setup;
  std::optional<int> study_levels;  // set for `charflow study --levels n`
};

/// Parses the arguments (program name excluded). Precedence: scenario
/// preset, then the --config file, then explicit flags.
ParsedCommand parse_command(const std::vector<std::string>& args);
RunSetup parse_config(const std::vector<std::string>& args);

/// Validates a Config and builds params, initial data and run settings.
RunSetup resolve(const Config& config);

/// 0 ok, 2 configuration, 3 diagnostics, 4 numerical, 5 I/O.
int exit_code_for(ErrorCode code) noexcept;

inline constexpr int kSchemaVersion = 1;
inline constexpr double kHolderWindow = 0.2;
inline constexpr int kHolderSamplesPerSide = 40;

/// Hölder fit at a breaking snapshot: cusp at argmin cos^2(v/2), log-spaced
/// samples out to kHolderWindow, innermost 2 dx_eff excluded.
struct CuspFit {
  CuspLocation cusp;
  HolderFit fit;
  double inner = 0.0;
  double window = 0.0;
};

CuspFit fit_cusp(const CharState& state, const ModelParams& params, double epsilon_sing);

/// Writes config.json, snap_<i>.csv, physical_<i>.csv, diagnostics.csv and
/// summary.json into the output directory. Throws IoError.
void emit_outputs(const RunResult& result, const RunSetup& setup);

nlohmann::json summary_json(const RunResult& result, const RunSetup& setup);

struct StudyLevel {
  int N = 0;
  double dt = 0.0;
  double energy_drift = 0.0;
  double residual_uY = 0.0;
  double residual_xY = 0.0;
  double diff_next = 0.0;  // sup |u_l - u_{l+1}| on the common grid, NaN on the last level
  double order = 0.0;      // log2(diff_l / diff_{l+1}), NaN where undefined
  std::string failure;     // empty when the run succeeded
  int exit_code = 0;
};

struct StudyResult {
  double T = 0.0;
  std::vector<StudyLevel> levels;
};

/// Runs the scenario at (N, dt), (2N, dt/2), ... and compares reconstructed
/// u at the final time on a common x grid. Levels run on up to `threads`
/// threads (CHARFLOW_THREADS caps the default).
StudyResult convergence_study(const RunSetup& base, int levels, int threads = 0);

void write_study(const StudyResult& study, const RunSetup& setup);

std::string help_text();

/// Entry point of the charflow executable.
int cli_main(int argc, const char* const* argv);

}  // namespace charflow
