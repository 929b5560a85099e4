#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "charflow/diagnostics.hpp"
#include "charflow/model.hpp"
#include "charflow/nonlocal.hpp"
#include "charflow/transform.hpp"

namespace charflow {

/// Time derivatives of (u, v, xi, x), plus those of the right-hand limits
/// at split nodes, and the nonlocal fields they were built from.
template <typename Scalar>
struct RhsOutputT {
  Array<Scalar> du, dv, dxi, dx;
  std::vector<SplitNode<Scalar>> dsplits;
  NonlocalFieldsT<Scalar> fields;
};

using RhsOutput = RhsOutputT<double>;

struct EvalOptions {
  bool use_oracle = false;
  bool compensated = false;
  bool corrected = true;
};

struct RunConfig {
  double dt = 1e-3;
  double T_end = 5.0;
  int snapshot_every = 100;
  int check_every = 10;
  double cfl_safety = 0.9;
  double energy_drift_limit = 1e-5;
  double epsilon_sing = 1e-6;
  double breaking_threshold = 1e-4;
  EvalOptions eval;
};

template <typename Scalar>
RhsOutputT<Scalar> rhs(const CharStateT<Scalar>& state, const ModelParams& params, Scalar dy,
                       const EvalOptions& opts = {}) {
  const int lambda = params.lambda;
  const int n = state.size();
  RhsOutputT<Scalar> out;
  out.fields = eval_nonlocal(state, params, dy, opts.use_oracle, NonlocalOptions{opts.compensated, opts.corrected});
  const auto& f = out.fields;
  out.du = -f.Px - f.Q;
  out.dv.resize(n);
  out.dxi.resize(n);
  out.dx.resize(n);
  const Scalar c1 = Scalar(lambda + 1);
  auto angle_rates = [&](int i, Scalar v, Scalar xi, Scalar& dv, Scalar& dxi) {
    const auto t = trig_powers(v, lambda);
    const Scalar u = state.u[i];
    const Scalar ul = ipow(u, lambda);
    const Scalar ul2 = ul * u * u;
    const Scalar s = f.P[i] + f.Qx[i];
    const Scalar sin_v = Scalar(2) * t.half_sin_v;
    const Scalar sin2 = t.sin_half * t.sin_half;
    dv = -ul * sin2 + Scalar(2) * ul2 * t.cos2 - Scalar(2) * t.cos2 * s;
    dxi = c1 * xi * sin_v * (ul / Scalar(2) + ul2 - s);
  };
  for (int i = 0; i < n; ++i) {
    angle_rates(i, state.v[i], state.xi[i], out.dv[i], out.dxi[i]);
    out.dx[i] = ipow(state.u[i], lambda + 1);
  }
  for (const auto& sp : state.splits) {
    SplitNode<Scalar> d{sp.index, Scalar(0), Scalar(0)};
    angle_rates(sp.index, sp.v, sp.xi, d.v, d.xi);
    out.dsplits.push_back(d);
  }
  for (int i = 0; i < n; ++i) {
    using std::isfinite;
    if (!isfinite(out.du[i]) || !isfinite(out.dv[i]) || !isfinite(out.dxi[i]) || !isfinite(out.dx[i])) {
      throw Error(ErrorCode::NonFiniteState, "right-hand side is not finite", i);
    }
  }
  return out;
}

/// state + h * d, including the split-node limits.
template <typename Scalar>
CharStateT<Scalar> advance(const CharStateT<Scalar>& s, const RhsOutputT<Scalar>& d, Scalar h) {
  CharStateT<Scalar> out;
  out.T = s.T + static_cast<double>(h);
  out.u = s.u + h * d.du;
  out.v = s.v + h * d.dv;
  out.xi = s.xi + h * d.dxi;
  out.x = s.x + h * d.dx;
  out.splits = s.splits;
  for (std::size_t j = 0; j < out.splits.size(); ++j) {
    out.splits[j].v += h * d.dsplits[j].v;
    out.splits[j].xi += h * d.dsplits[j].xi;
  }
  return out;
}

/// Largest |v_T| over nodes and split limits.
template <typename Scalar>
Scalar max_angle_rate(const RhsOutputT<Scalar>& d) {
  using std::abs;
  Scalar m = d.dv.abs().maxCoeff();
  for (const auto& s : d.dsplits) m = std::max(m, Scalar(abs(s.v)));
  return m;
}

/// Classical four-stage Runge-Kutta step. `k1` may carry a precomputed
/// first stage at `state`.
template <typename Scalar>
CharStateT<Scalar> step_rk4(const CharStateT<Scalar>& state, const ModelParams& params, Scalar dy, Scalar dt,
                            const EvalOptions& opts = {}, const RhsOutputT<Scalar>* k1_in = nullptr) {
  const RhsOutputT<Scalar> k1 = k1_in ? *k1_in : rhs(state, params, dy, opts);
  const Scalar half = dt / Scalar(2);
  const auto k2 = rhs(advance(state, k1, half), params, dy, opts);
  const auto k3 = rhs(advance(state, k2, half), params, dy, opts);
  const auto k4 = rhs(advance(state, k3, dt), params, dy, opts);
  const Scalar w = dt / Scalar(6);
  CharStateT<Scalar> out;
  out.T = state.T + static_cast<double>(dt);
  out.u = state.u + w * (k1.du + Scalar(2) * (k2.du + k3.du) + k4.du);
  out.v = state.v + w * (k1.dv + Scalar(2) * (k2.dv + k3.dv) + k4.dv);
  out.xi = state.xi + w * (k1.dxi + Scalar(2) * (k2.dxi + k3.dxi) + k4.dxi);
  out.x = state.x + w * (k1.dx + Scalar(2) * (k2.dx + k3.dx) + k4.dx);
  out.splits = state.splits;
  for (std::size_t j = 0; j < out.splits.size(); ++j) {
    out.splits[j].v += w * (k1.dsplits[j].v + Scalar(2) * (k2.dsplits[j].v + k3.dsplits[j].v) + k4.dsplits[j].v);
    out.splits[j].xi +=
        w * (k1.dsplits[j].xi + Scalar(2) * (k2.dsplits[j].xi + k3.dsplits[j].xi) + k4.dsplits[j].xi);
  }
  const int n = out.size();
  for (int i = 0; i < n; ++i) {
    using std::isfinite;
    if (!isfinite(out.u[i]) || !isfinite(out.v[i]) || !isfinite(out.xi[i]) || !isfinite(out.x[i])) {
      throw Error(ErrorCode::NonFiniteState, "state became non-finite", i);
    }
    if (!(out.xi[i] > Scalar(0))) {
      throw Error(ErrorCode::XiNonPositive, "xi <= 0 after step; reduce dt", i, static_cast<double>(dt) / 2.0);
    }
  }
  for (const auto& s : out.splits) {
    if (!(s.xi > Scalar(0))) {
      throw Error(ErrorCode::XiNonPositive, "xi <= 0 at split node; reduce dt", s.index, static_cast<double>(dt) / 2.0);
    }
  }
  return out;
}

struct Snapshot {
  CharState state;
  NonlocalFields fields;
};

/// Trajectory of a run. On failure the data gathered up to the failing step
/// are kept and `failure` holds the error.
struct RunResult {
  ModelParams params;
  RunConfig config;
  CharGrid grid;
  double E0 = 0.0;
  std::vector<Snapshot> snapshots;
  std::vector<DiagnosticsReport> reports;
  std::vector<double> breaking_times;
  std::optional<Snapshot> first_breaking;
  std::optional<Error> failure;
  int steps = 0;

  bool ok() const { return !failure.has_value(); }
};

/// Called with every accepted state (step 0 included) and its fields.
using StepObserver = std::function<void(const CharState&, const NonlocalFields&)>;

/// Integrates from the initial data to T_end. Snapshots at step 0, every
/// snapshot_every steps and the last step; diagnostics every check_every
/// steps and at the last step.
RunResult run(const InitialData& u0, const ModelParams& params, const RunConfig& cfg,
              const StepObserver& observer = {});

/// Same, from an already initialized state.
RunResult run_from(const InitialState& init, const ModelParams& params, const RunConfig& cfg,
                   const StepObserver& observer = {});

}  // namespace charflow
