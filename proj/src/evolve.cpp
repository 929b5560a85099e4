#include "charflow/evolve.hpp"

#include <sstream>

namespace charflow {

namespace {

void check_report(const DiagnosticsReport& rep, double E0, const RunConfig& cfg) {
  const double drift = E0 > 0.0 ? std::abs(rep.E_lower - E0) / E0 : std::abs(rep.E_lower);
  if (!(drift <= cfg.energy_drift_limit)) {
    std::ostringstream msg;
    msg << "relative energy drift " << drift << " exceeds " << cfg.energy_drift_limit << " at T = " << rep.T;
    throw Error(ErrorCode::DiagnosticsFailure, msg.str());
  }
  const auto& b = rep.bounds;
  if (!b.all_ok()) {
    std::ostringstream msg;
    msg << "a-priori bound failed at T = " << rep.T << ":";
    if (!b.u_ok) msg << " sup|u| = " << b.sup_u << " > " << b.bound_u;
    if (!b.P_ok) msg << " sup|P| = " << b.sup_P << " > " << b.bound_P;
    if (!b.Px_ok) msg << " sup|Px| = " << b.sup_Px << " > " << b.bound_P;
    if (!b.conv_ok) msg << " convolution bound margin " << b.margin_conv;
    if (!b.xi_positive) msg << " xi not positive";
    throw Error(ErrorCode::BoundViolated, msg.str());
  }
}

void check_angle_guard(double dt, double rate, double safety) {
  const double limit = safety * std::numbers::pi / 4.0;
  if (dt * rate >= limit) {
    std::ostringstream msg;
    msg << "dt * max|v_T| = " << dt * rate << " >= " << limit << "; use dt <= " << limit / rate;
    throw Error(ErrorCode::TimeStepTooLarge, msg.str(), Error::kNoIndex, limit / rate);
  }
}

}  // namespace

RunResult run(const InitialData& u0, const ModelParams& params, const RunConfig& cfg,
              const StepObserver& observer) {
  return run_from(initialize_state(u0, params), params, cfg, observer);
}

RunResult run_from(const InitialState& init, const ModelParams& params, const RunConfig& cfg,
                   const StepObserver& observer) {
  if (!(cfg.dt > 0.0) || !(cfg.T_end > 0.0) || cfg.snapshot_every < 1 || cfg.check_every < 1 ||
      !(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0)) {
    throw Error(ErrorCode::ConflictingOptions, "run needs dt > 0, T > 0, cadences >= 1 and cfl_safety in (0, 1]");
  }
  RunResult r;
  r.params = params;
  r.config = cfg;
  r.grid = init.grid;
  const double dy = init.grid.dy;
  CharState state = init.state;
  const DiagnosticsOptions dopts{energy_lower(state, params, dy)};
  r.E0 = dopts.E0;

  const long nsteps = std::max(1L, static_cast<long>(std::ceil(cfg.T_end / cfg.dt - 1e-9)));
  bool in_breaking = false;
  try {
    RhsOutput k = rhs(state, params, dy, cfg.eval);
    check_angle_guard(cfg.dt, max_angle_rate(k), cfg.cfl_safety);
    r.snapshots.push_back({state, k.fields});
    if (observer) observer(state, k.fields);
    r.reports.push_back(compute_diagnostics(state, k.fields, params, dy, dopts));
    check_report(r.reports.back(), r.E0, cfg);
    for (long step = 1; step <= nsteps; ++step) {
      const double t_next = std::min(step * cfg.dt, cfg.T_end);
      state = step_rk4(state, params, dy, t_next - state.T, cfg.eval, &k);
      state.T = t_next;
      r.steps = static_cast<int>(step);
      k = rhs(state, params, dy, cfg.eval);
      check_angle_guard(cfg.dt, max_angle_rate(k), 1.0);
      if (observer) observer(state, k.fields);

      const double mc = min_cos2_half_v(state);
      if (mc < cfg.breaking_threshold && !in_breaking) {
        r.breaking_times.push_back(state.T);
        if (!r.first_breaking) r.first_breaking = Snapshot{state, k.fields};
      }
      in_breaking = mc < cfg.breaking_threshold;

      const bool last = step == nsteps;
      if (step % cfg.snapshot_every == 0 || last) r.snapshots.push_back({state, k.fields});
      if (step % cfg.check_every == 0 || last) {
        r.reports.push_back(compute_diagnostics(state, k.fields, params, dy, dopts));
        check_report(r.reports.back(), r.E0, cfg);
      }
    }
  } catch (const Error& e) {
    r.failure = e;
    if (r.snapshots.empty() || r.snapshots.back().state.T != state.T) {
      r.snapshots.push_back({state, eval_nonlocal(state, params, dy)});
    }
  }
  return r;
}

}  // namespace charflow
