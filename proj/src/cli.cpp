#include "charflow/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

namespace charflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::pair<Scenario, std::string_view> kScenarioNames[] = {
    {Scenario::GaussianSmooth, "gaussian_smooth"},
    {Scenario::GaussianBreaking, "gaussian_breaking"},
    {Scenario::Peakon, "peakon"},
    {Scenario::AntipeakonCollision, "antipeakon_collision"},
    {Scenario::TwoPeakon, "two_peakon"},
    {Scenario::TabulatedFile, "tabulated_file"},
    {Scenario::Zero, "zero"},
};

const char* const kFlagKeys[] = {"scenario", "lambda",   "L",           "N",      "dt",
                                 "T",        "snapshot-every", "check-every", "epsilon-sing",
                                 "output-dir", "oracle", "compensated-sum", "input", "energy-drift-limit"};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

[[noreturn]] void config_error(ErrorCode code, const std::string& what, const std::string& remedy) {
  throw Error(code, what + " (" + remedy + ")");
}

// Values given on the command line; unset options keep the lower layers.
struct FlagValues {
  std::string scenario, output_dir, input, config;
  double lambda = 0, L = 0, N = 0, dt = 0, T = 0, epsilon_sing = 0, drift_limit = 0;
  int snapshot_every = 0, check_every = 0, levels = 0;
  bool oracle = false, compensated_sum = false;
};

void apply_json(Config& c, const json& j) {
  if (!j.is_object()) config_error(ErrorCode::ConflictingOptions, "config file is not a JSON object", "use a flat object keyed by flag names");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kFlagKeys), std::end(kFlagKeys), key) == std::end(kFlagKeys)) {
      config_error(ErrorCode::UnknownFlag, "unknown config key '" + key + "'", "keys are the flag names without dashes");
    }
    try {
      if (key == "scenario") c.scenario = value.get<std::string>();
      else if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "L") c.L = value.get<double>();
      else if (key == "N") c.N = value.get<double>();
      else if (key == "dt") c.dt = value.get<double>();
      else if (key == "T") c.T = value.get<double>();
      else if (key == "snapshot-every") c.snapshot_every = value.get<int>();
      else if (key == "check-every") c.check_every = value.get<int>();
      else if (key == "epsilon-sing") c.epsilon_sing = value.get<double>();
      else if (key == "output-dir") c.output_dir = value.get<std::string>();
      else if (key == "oracle") c.oracle = value.get<bool>();
      else if (key == "compensated-sum") c.compensated_sum = value.get<bool>();
      else if (key == "input") c.input = value.get<std::string>();
      else if (key == "energy-drift-limit") c.energy_drift_limit = value.get<double>();
    } catch (const json::exception&) {
      config_error(ErrorCode::ConflictingOptions, "config key '" + key + "' has the wrong type",
                   "use numbers, strings and booleans as on the command line");
    }
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    config_error(ErrorCode::ConflictingOptions, "config file '" + path + "' is not valid JSON: " + e.what(),
                 "fix the file or pass the values as flags");
  }
}

void apply_preset(Config& c, const ScenarioPreset& p) {
  c.lambda = p.lambda;
  c.L = p.L;
  c.N = p.N;
  c.dt = p.dt;
  c.T = p.T;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "cannot create output directory '" + dir.string() + "'");
  }
}

std::string snapshot_csv(const Snapshot& s, const CharGrid& grid) {
  std::ostringstream out;
  out << "T,Y,x,u,v,xi,P,Px,Q,Qx\n";
  const auto& st = s.state;
  const auto& f = s.fields;
  auto row = [&](int i, double v, double xi) {
    out << num(st.T) << ',' << num(grid.nodes[i]) << ',' << num(st.x[i]) << ',' << num(st.u[i]) << ',' << num(v)
        << ',' << num(xi) << ',' << num(f.P[i]) << ',' << num(f.Px[i]) << ',' << num(f.Q[i]) << ',' << num(f.Qx[i])
        << '\n';
  };
  std::size_t next_split = 0;
  for (int i = 0; i < st.size(); ++i) {
    row(i, st.v[i], st.xi[i]);
    // A split node gets a second row with its right limits.
    while (next_split < st.splits.size() && st.splits[next_split].index == i) {
      row(i, st.splits[next_split].v, st.splits[next_split].xi);
      ++next_split;
    }
  }
  return out.str();
}

std::string physical_csv(const PhysicalSolution& p) {
  std::ostringstream out;
  out << "x,u,ux,singular\n";
  for (Eigen::Index j = 0; j < p.x.size(); ++j) {
    out << num(p.x[j]) << ',' << num(p.u[j]) << ',' << num(p.ux[j]) << ','
        << static_cast<int>(p.singular[static_cast<std::size_t>(j)]) << '\n';
  }
  return out.str();
}

std::string diagnostics_csv(const std::vector<DiagnosticsReport>& reports) {
  std::ostringstream out;
  out << "T,E,H,dH_dt,residual_uY,residual_xY,min_cos2,min_xi,sup_u,sup_P,sup_Px,margin_u,margin_P,margin_Px,"
         "margin_conv,x_max_decrease\n";
  for (const auto& r : reports) {
    const auto& b = r.bounds;
    out << num(r.T) << ',' << num(r.E_lower) << ',' << num(r.H_higher) << ',' << num(r.dH_dt_predicted) << ','
        << num(r.residual_uY) << ',' << num(r.residual_xY) << ',' << num(r.min_cos2_half_v) << ','
        << num(r.min_xi) << ',' << num(b.sup_u) << ',' << num(b.sup_P) << ',' << num(b.sup_Px) << ','
        << num(b.margin_u) << ',' << num(b.margin_P) << ',' << num(b.margin_Px) << ',' << num(b.margin_conv)
        << ',' << num(b.x_max_decrease) << '\n';
  }
  return out.str();
}

json report_json(const DiagnosticsReport& r) {
  const auto& b = r.bounds;
  json j;
  j["T"] = r.T;
  j["E"] = r.E_lower;
  j["H"] = r.H_higher;
  j["dH_dt"] = r.dH_dt_predicted;
  j["residual_uY"] = r.residual_uY;
  j["residual_xY"] = r.residual_xY;
  j["min_cos2"] = r.min_cos2_half_v;
  j["min_xi"] = r.min_xi;
  j["bounds"] = {{"sup_u", b.sup_u},           {"bound_u", b.bound_u},   {"sup_P", b.sup_P},
                 {"sup_Px", b.sup_Px},         {"bound_P", b.bound_P},   {"margin_u", b.margin_u},
                 {"margin_P", b.margin_P},     {"margin_Px", b.margin_Px}, {"margin_conv", b.margin_conv},
                 {"x_max_decrease", b.x_max_decrease}, {"x_monotone", b.x_monotone}, {"all_ok", b.all_ok()}};
  return j;
}

json atoms_json(const MeasureDecomposition& d) {
  json atoms = json::array();
  for (const auto& a : d.atoms) {
    atoms.push_back({{"x", a.x}, {"mass", a.mass}, {"u", a.u_mean}, {"u_spread", a.u_spread},
                     {"first_node", a.first}, {"last_node", a.last}});
  }
  return {{"H", d.total}, {"ac_mass", d.ac_mass}, {"atom_mass", d.atom_mass()}, {"atoms", atoms}};
}

int env_threads() {
  if (const char* s = std::getenv("CHARFLOW_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Scenario s) noexcept {
  for (const auto& [k, name] : kScenarioNames) {
    if (k == s) return name;
  }
  return "unknown";
}

std::optional<Scenario> scenario_from_string(std::string_view name) {
  for (const auto& [k, n] : kScenarioNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const auto& [k, n] : kScenarioNames) out.emplace_back(n);
  return out;
}

ScenarioPreset scenario_preset(Scenario s) {
  ScenarioPreset p;
  p.name = s;
  switch (s) {
    case Scenario::GaussianSmooth:
      p.lambda = 1;
      p.L = 24;
      p.data = GaussianBump{0.5, 2.0, 0.0};
      break;
    case Scenario::GaussianBreaking:
      p.lambda = 1;
      p.L = 20;
      p.N = 8192;
      p.data = GaussianBump{1.5, 0.5, 0.0};
      break;
    case Scenario::Peakon:
      p.lambda = 0;
      p.L = 32;
      p.T = 1;
      p.data = PeakonSum{{{1.0, 0.0}}};
      break;
    case Scenario::AntipeakonCollision:
      p.lambda = 0;
      p.L = 32;
      p.N = 8192;
      p.T = 4;
      p.data = PeakonSum{{{1.0, -2.0}, {-1.0, 2.0}}};
      break;
    case Scenario::TwoPeakon:
      p.lambda = 0;
      p.L = 32;
      p.N = 8192;
      p.T = 3;
      p.data = PeakonSum{{{1.0, -1.0}, {-0.5, 1.0}}};
      break;
    case Scenario::TabulatedFile:
      p.lambda = 0;
      p.L = 20;
      p.data = ZeroData{};
      break;
    case Scenario::Zero:
      p.lambda = 0;
      p.L = 20;
      p.T = 1;
      p.data = ZeroData{};
      break;
  }
  return p;
}

json config_to_json(const Config& c) {
  json j;
  j["scenario"] = c.scenario;
  j["lambda"] = c.lambda;
  j["L"] = c.L;
  j["N"] = c.N;
  j["dt"] = c.dt;
  j["T"] = c.T;
  j["snapshot-every"] = c.snapshot_every;
  j["check-every"] = c.check_every;
  j["epsilon-sing"] = c.epsilon_sing;
  j["output-dir"] = c.output_dir;
  j["oracle"] = c.oracle;
  j["compensated-sum"] = c.compensated_sum;
  j["input"] = c.input;
  j["energy-drift-limit"] = c.energy_drift_limit;
  return j;
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DiagnosticsFailure:
    case ErrorCode::BoundViolated:
      return 3;
    case ErrorCode::NonFiniteState:
    case ErrorCode::XiNonPositive:
    case ErrorCode::TimeStepTooLarge:
    case ErrorCode::NonFiniteDerivative:
    case ErrorCode::SampleOutsideDomain:
    case ErrorCode::InsufficientSamples:
    case ErrorCode::NoCuspDetected:
    case ErrorCode::SupportExceedsWindow:
      return 4;
    case ErrorCode::IoError:
      return 5;
    default:
      return 2;
  }
}

RunSetup resolve(const Config& c) {
  const auto scenario = scenario_from_string(c.scenario);
  if (!scenario) {
    std::string names;
    for (const auto& n : scenario_names()) names += (names.empty() ? "" : ", ") + n;
    config_error(ErrorCode::MissingScenario, "unknown scenario '" + c.scenario + "'", "choose one of " + names);
  }
  RunSetup s;
  s.config = c;
  s.params = validate_params({c.lambda, c.L, c.N});
  if (!(c.dt > 0.0) || !(c.T > 0.0)) {
    config_error(ErrorCode::ConflictingOptions, "dt and T must be positive", "pass --dt and --T greater than 0");
  }
  if (c.snapshot_every < 1 || c.check_every < 1) {
    config_error(ErrorCode::ConflictingOptions, "snapshot and check cadences must be at least 1",
                 "pass --snapshot-every and --check-every >= 1");
  }
  if (!(c.energy_drift_limit > 0.0)) {
    config_error(ErrorCode::ConflictingOptions, "energy-drift-limit must be positive", "the default is 1e-5");
  }
  if (!(c.epsilon_sing > 0.0 && c.epsilon_sing < 1.0)) {
    config_error(ErrorCode::ConflictingOptions, "epsilon-sing must lie in (0, 1)", "the default is 1e-6");
  }
  if (c.oracle && s.params.N > kNaiveMaxPoints) {
    throw Error(ErrorCode::GridTooLargeForOracle,
                "--oracle is limited to N <= " + std::to_string(kNaiveMaxPoints) + " (lower --N or drop --oracle)");
  }
  if (*scenario == Scenario::TabulatedFile) {
    if (c.input.empty()) {
      config_error(ErrorCode::ConflictingOptions, "scenario tabulated_file needs an input file",
                   "pass --input <csv with columns x,u>");
    }
    s.data = read_tabulated_csv(c.input);
  } else {
    if (!c.input.empty()) {
      config_error(ErrorCode::ConflictingOptions, "--input is only used by scenario tabulated_file",
                   "drop --input or use --scenario tabulated_file");
    }
    s.data = scenario_preset(*scenario).data;
  }
  s.run.dt = c.dt;
  s.run.T_end = c.T;
  s.run.snapshot_every = c.snapshot_every;
  s.run.check_every = c.check_every;
  s.run.epsilon_sing = c.epsilon_sing;
  s.run.energy_drift_limit = c.energy_drift_limit;
  s.run.eval.use_oracle = c.oracle;
  s.run.eval.compensated = c.compensated_sum;
  return s;
}

namespace {

struct CommandLine {
  CLI::App app{"Global conservative solutions of the lambda-family in characteristic coordinates", "charflow"};
  FlagValues f;
  CLI::Option *scenario, *lambda, *L, *N, *dt, *T, *snap, *check, *eps, *out, *oracle, *comp, *config, *input,
      *drift;
  CLI::App* study;

  CommandLine() {
    std::string names;
    for (const auto& n : scenario_names()) names += (names.empty() ? "" : ", ") + n;
    scenario = app.add_option("--scenario", f.scenario, "Scenario preset: " + names);
    lambda = app.add_option("--lambda", f.lambda, "Nonlinearity order lambda (k = 2(lambda+1))");
    L = app.add_option("--L", f.L, "Half width of the physical domain");
    N = app.add_option("--N", f.N, "Number of Y nodes");
    dt = app.add_option("--dt", f.dt, "Time step");
    T = app.add_option("--T", f.T, "Final time");
    snap = app.add_option("--snapshot-every", f.snapshot_every, "Steps between snapshots");
    check = app.add_option("--check-every", f.check_every, "Steps between diagnostic checks");
    eps = app.add_option("--epsilon-sing", f.epsilon_sing, "Singularity threshold on cos^2(v/2)");
    out = app.add_option("--output-dir", f.output_dir, "Output directory");
    oracle = app.add_flag("--oracle", f.oracle, "Use the O(N^2) nonlocal evaluation");
    comp = app.add_flag("--compensated-sum", f.compensated_sum, "Compensated summation in the sweeps");
    config = app.add_option("--config", f.config, "Flat JSON file keyed by flag names");
    input = app.add_option("--input", f.input, "CSV (x,u) for scenario tabulated_file");
    drift = app.add_option("--energy-drift-limit", f.drift_limit, "Hard limit on relative energy drift");
    study = app.add_subcommand("study", "Convergence study over refinement levels");
    study->fallthrough();
    study->add_option("--levels", f.levels, "Number of levels (>= 3)")->required();
  }
};

}  // namespace

std::string help_text() {
  CommandLine cl;
  return cl.app.help();
}

ParsedCommand parse_command(const std::vector<std::string>& args) {
  CommandLine cl;
  auto& app = cl.app;
  auto& f = cl.f;
  auto* o_scenario = cl.scenario;
  auto* o_lambda = cl.lambda;
  auto* o_L = cl.L;
  auto* o_N = cl.N;
  auto* o_dt = cl.dt;
  auto* o_T = cl.T;
  auto* o_snap = cl.snap;
  auto* o_check = cl.check;
  auto* o_eps = cl.eps;
  auto* o_out = cl.out;
  auto* o_oracle = cl.oracle;
  auto* o_comp = cl.comp;
  auto* o_config = cl.config;
  auto* o_input = cl.input;
  auto* study = cl.study;

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ExtrasError& e) {
    config_error(ErrorCode::UnknownFlag, e.what(), "run 'charflow --help' for the list of flags");
  } catch (const CLI::CallForHelp&) {
    throw;
  } catch (const CLI::RequiredError& e) {
    config_error(ErrorCode::ConflictingOptions, e.what(), "pass --levels n with n >= 3");
  } catch (const CLI::ParseError& e) {
    config_error(ErrorCode::ConflictingOptions, e.what(), "check the flag values against 'charflow --help'");
  }

  json file;
  if (o_config->count()) file = read_json_file(f.config);

  Config c;
  std::string scenario;
  if (file.is_object() && file.contains("scenario") && file["scenario"].is_string()) scenario = file["scenario"];
  if (o_scenario->count()) scenario = f.scenario;
  if (scenario.empty()) {
    config_error(ErrorCode::MissingScenario, "no scenario given", "pass --scenario <name> or set it in --config");
  }
  c.scenario = scenario;
  if (const auto sc = scenario_from_string(scenario)) apply_preset(c, scenario_preset(*sc));
  if (!file.is_null()) apply_json(c, file);
  c.scenario = scenario;
  if (o_lambda->count()) c.lambda = f.lambda;
  if (o_L->count()) c.L = f.L;
  if (o_N->count()) c.N = f.N;
  if (o_dt->count()) c.dt = f.dt;
  if (o_T->count()) c.T = f.T;
  if (o_snap->count()) c.snapshot_every = f.snapshot_every;
  if (o_check->count()) c.check_every = f.check_every;
  if (o_eps->count()) c.epsilon_sing = f.epsilon_sing;
  if (o_out->count()) c.output_dir = f.output_dir;
  if (o_oracle->count()) c.oracle = true;
  if (o_comp->count()) c.compensated_sum = true;
  if (o_input->count()) c.input = f.input;
  if (cl.drift->count()) c.energy_drift_limit = f.drift_limit;

  ParsedCommand cmd;
  cmd.setup = resolve(c);
  if (study->parsed()) {
    if (f.levels < 3) config_error(ErrorCode::ConflictingOptions, "study needs at least 3 levels", "pass --levels 3 or more");
    cmd.study_levels = f.levels;
  }
  return cmd;
}

RunSetup parse_config(const std::vector<std::string>& args) { return parse_command(args).setup; }

// ---------------------------------------------------------------------------

CuspFit fit_cusp(const CharState& state, const ModelParams& params, double epsilon_sing) {
  CuspFit out;
  out.cusp = find_cusp(state);
  const double dx_eff = (state.x.maxCoeff() - state.x[0]) / (state.size() - 1);
  out.inner = 2.0 * dx_eff;
  out.window = kHolderWindow;
  const ArrayXd xs = holder_samples(out.cusp.x, out.inner, out.window, kHolderSamplesPerSide);
  const auto phys = to_physical(state, params, xs, epsilon_sing);
  out.fit = holder_exponent_estimate(phys, out.cusp.x, out.window, out.inner);
  return out;
}

json summary_json(const RunResult& r, const RunSetup& setup) {
  const double dy = r.grid.dy;
  const double eps = setup.config.epsilon_sing;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = setup.config.scenario;
  j["lambda"] = r.params.lambda;
  j["k"] = r.params.k;
  j["N"] = r.params.N;
  j["L"] = r.params.L;
  j["dy"] = dy;
  j["dt"] = r.config.dt;
  j["steps"] = r.steps;
  j["E0"] = r.E0;
  j["status"] = r.ok() ? json{{"ok", true}, {"exit_code", 0}}
                       : json{{"ok", false},
                              {"exit_code", exit_code_for(r.failure->code())},
                              {"error", std::string(to_string(r.failure->code()))},
                              {"message", r.failure->what()}};
  j["final_diagnostics"] = r.reports.empty() ? json(nullptr) : report_json(r.reports.back());
  double drift = 0.0;
  for (const auto& rep : r.reports) {
    drift = std::max(drift, r.E0 > 0 ? std::abs(rep.E_lower - r.E0) / r.E0 : std::abs(rep.E_lower));
  }
  j["max_energy_drift"] = drift;
  j["breaking_times"] = r.breaking_times;
  j["first_breaking_time"] = r.breaking_times.empty() ? json(nullptr) : json(r.breaking_times.front());

  if (r.first_breaking) {
    const auto& s = r.first_breaking->state;
    try {
      const CuspFit cf = fit_cusp(s, r.params, eps);
      j["holder_fit"] = {{"exponent", cf.fit.exponent},
                         {"left_slope", num_or_null(cf.fit.left)},
                         {"right_slope", num_or_null(cf.fit.right)},
                         {"residual", cf.fit.residual},
                         {"reference", 1.0 - 1.0 / r.params.k},
                         {"T", s.T},
                         {"x_star", cf.cusp.x},
                         {"u_star", cf.cusp.u},
                         {"min_cos2", cf.cusp.min_cos2},
                         {"inner", cf.inner},
                         {"window", cf.window},
                         {"n_left", cf.fit.n_left},
                         {"n_right", cf.fit.n_right}};
    } catch (const Error& e) {
      j["holder_fit"] = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    }
    json fb = atoms_json(measure_decompose(s, r.params, dy, eps));
    fb["T"] = s.T;
    j["first_breaking_measure"] = fb;
  } else {
    j["holder_fit"] = nullptr;
    j["first_breaking_measure"] = nullptr;
  }

  json table = json::array();
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    const auto& s = r.snapshots[i].state;
    json row = atoms_json(measure_decompose(s, r.params, dy, eps));
    row["snapshot"] = i;
    row["T"] = s.T;
    table.push_back(row);
  }
  j["atoms"] = table;

  if (r.snapshots.size() >= 3) {
    std::vector<CharState> traj;
    for (const auto& s : r.snapshots) traj.push_back(s.state);
    try {
      const auto lip = lipschitz_in_Lk_check(traj, r.params, dy);
      j["lipschitz_Lk"] = {{"max_ratio", lip.max_ratio}, {"reference", lip.reference}, {"ok", lip.ok}};
    } catch (const Error& e) {
      j["lipschitz_Lk"] = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    }
  } else {
    j["lipschitz_Lk"] = nullptr;
  }
  return j;
}

void emit_outputs(const RunResult& r, const RunSetup& setup) {
  const fs::path dir = setup.config.output_dir;
  ensure_directory(dir);
  write_file(dir / "config.json", config_to_json(setup.config).dump(2) + "\n");
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    const auto& snap = r.snapshots[i];
    write_file(dir / ("snap_" + std::to_string(i) + ".csv"), snapshot_csv(snap, r.grid));
    const auto phys = to_physical(snap.state, r.params, physical_sample_grid(snap.state, r.params.N),
                                  setup.config.epsilon_sing);
    write_file(dir / ("physical_" + std::to_string(i) + ".csv"), physical_csv(phys));
  }
  write_file(dir / "diagnostics.csv", diagnostics_csv(r.reports));
  write_file(dir / "summary.json", summary_json(r, setup).dump(2) + "\n");
}

// ---------------------------------------------------------------------------

StudyResult convergence_study(const RunSetup& base, int levels, int threads) {
  if (levels < 3) throw Error(ErrorCode::ConflictingOptions, "convergence study needs at least 3 levels");
  if (threads <= 0) threads = env_threads();
  threads = std::clamp(threads, 1, levels);

  struct LevelRun {
    StudyLevel level;
    CharState final_state;
    ModelParams params;
    bool have_state = false;
  };
  std::vector<LevelRun> runs(static_cast<std::size_t>(levels));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int l = next++; l < levels; l = next++) {
      LevelRun& out = runs[static_cast<std::size_t>(l)];
      Config c = base.config;
      c.N = base.config.N * std::pow(2.0, l);
      c.dt = base.config.dt / std::pow(2.0, l);
      out.level.N = static_cast<int>(c.N);
      out.level.dt = c.dt;
      try {
        RunSetup s = resolve(c);
        s.data = base.data;
        s.run.snapshot_every = std::numeric_limits<int>::max() / 2;
        const RunResult r = run(s.data, s.params, s.run);
        out.params = s.params;
        for (const auto& rep : r.reports) {
          const double d = r.E0 > 0 ? std::abs(rep.E_lower - r.E0) / r.E0 : std::abs(rep.E_lower);
          out.level.energy_drift = std::max(out.level.energy_drift, d);
          out.level.residual_uY = std::max(out.level.residual_uY, rep.residual_uY);
          out.level.residual_xY = std::max(out.level.residual_xY, rep.residual_xY);
        }
        if (r.failure) {
          out.level.failure = r.failure->what();
          out.level.exit_code = exit_code_for(r.failure->code());
        }
        out.final_state = r.snapshots.back().state;
        out.have_state = r.ok();
      } catch (const Error& e) {
        out.level.failure = e.what();
        out.level.exit_code = exit_code_for(e.code());
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  StudyResult study;
  study.T = base.config.T;
  double lo = -base.params.L, hi = base.params.L;
  for (const auto& lr : runs) {
    if (!lr.have_state) continue;
    lo = std::max(lo, lr.final_state.x[0]);
    hi = std::min(hi, lr.final_state.x.maxCoeff());
  }
  const ArrayXd xs = ArrayXd::LinSpaced(2001, lo, hi);
  std::vector<ArrayXd> profiles;
  for (const auto& lr : runs) {
    profiles.push_back(lr.have_state ? to_physical(lr.final_state, lr.params, xs, base.config.epsilon_sing).u
                                     : ArrayXd());
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int l = 0; l < levels; ++l) {
    StudyLevel lev = runs[static_cast<std::size_t>(l)].level;
    lev.diff_next = nan;
    lev.order = nan;
    if (l + 1 < levels && profiles[l].size() && profiles[l + 1].size()) {
      lev.diff_next = (profiles[l] - profiles[l + 1]).abs().maxCoeff();
    }
    study.levels.push_back(lev);
  }
  for (int l = 0; l + 2 < levels; ++l) {
    const double a = study.levels[l].diff_next, b = study.levels[l + 1].diff_next;
    if (a > 0.0 && b > 0.0) study.levels[l].order = std::log2(a / b);
  }
  return study;
}

void write_study(const StudyResult& study, const RunSetup& setup) {
  const fs::path dir = setup.config.output_dir;
  ensure_directory(dir);
  write_file(dir / "config.json", config_to_json(setup.config).dump(2) + "\n");
  std::ostringstream out;
  out << "level,N,dt,T,energy_drift,residual_uY,residual_xY,diff_next,order,failure\n";
  for (std::size_t l = 0; l < study.levels.size(); ++l) {
    const auto& s = study.levels[l];
    out << l << ',' << s.N << ',' << num(s.dt) << ',' << num(study.T) << ',' << num(s.energy_drift) << ','
        << num(s.residual_uY) << ',' << num(s.residual_xY) << ',' << num(s.diff_next) << ',' << num(s.order) << ','
        << '"' << s.failure << '"' << '\n';
  }
  write_file(dir / "study.csv", out.str());
}

// ---------------------------------------------------------------------------

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  ParsedCommand cmd;
  try {
    cmd = parse_command(args);
  } catch (const CLI::CallForHelp&) {
    std::cout << help_text();
    return 0;
  } catch (const Error& e) {
    std::cerr << "charflow: " << e.what() << '\n';
    return exit_code_for(e.code());
  }

  try {
    if (cmd.study_levels) {
      const auto study = convergence_study(cmd.setup, *cmd.study_levels);
      write_study(study, cmd.setup);
      for (const auto& l : study.levels) {
        std::cout << "N=" << l.N << " dt=" << l.dt << " drift=" << l.energy_drift << " diff_next=" << l.diff_next
                  << " order=" << l.order << (l.failure.empty() ? "" : " failed: " + l.failure) << '\n';
      }
      for (const auto& l : study.levels) {
        if (l.exit_code != 0) return l.exit_code;
      }
      return 0;
    }
    const RunResult r = run(cmd.setup.data, cmd.setup.params, cmd.setup.run);
    emit_outputs(r, cmd.setup);
    std::cout << "scenario=" << cmd.setup.config.scenario << " lambda=" << r.params.lambda << " N=" << r.params.N
              << " steps=" << r.steps << " E0=" << num(r.E0);
    if (!r.breaking_times.empty()) std::cout << " first_breaking=" << r.breaking_times.front();
    std::cout << '\n';
    if (r.failure) {
      std::cerr << "charflow: " << r.failure->what() << '\n';
      return exit_code_for(r.failure->code());
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "charflow: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
}

}  // namespace charflow
