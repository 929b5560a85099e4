#include "charflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace charflow {

namespace {

// Trapezoid over panels of the piecewise smooth integrand plus the
// Euler-Maclaurin term at each split node, where its derivative jumps.
double split_trapezoid(const CharState& state, const ArrayXd& left, const ArrayXd& right, double dy) {
  double sum = trapezoid(left, right, dy);
  if (state.splits.empty()) return sum;
  ArrayXd dL, dR;
  detail::limit_derivatives(left, right, detail::split_mask(state), dy, dL, dR);
  for (const auto& sp : state.splits) {
    if (sp.index > 0 && sp.index + 1 < state.size()) sum -= dy * dy / 12.0 * (dL[sp.index] - dR[sp.index]);
  }
  return sum;
}

}  // namespace

double energy_lower(const CharState& state, const ModelParams& params, double dy) {
  ArrayXd left, right;
  nodal_limits(
      state,
      [&](double u, double v, double xi) {
        const auto t = trig_powers(v, params.lambda);
        return (u * u * t.cos_k + t.sin2_cosk2) * xi;
      },
      left, right);
  return split_trapezoid(state, left, right, dy);
}

double energy_higher(const CharState& state, const ModelParams& params, double dy) {
  ArrayXd left, right;
  nodal_limits(
      state, [&](double, double v, double xi) { return trig_powers(v, params.lambda).sin_k * xi; }, left, right);
  return split_trapezoid(state, left, right, dy);
}

double energy_higher_rate(const CharState& state, const NonlocalFields& fields, const ModelParams& params,
                          double dy) {
  const int n = state.size();
  const int lambda = params.lambda;
  auto density = [&](int i, double v, double xi) {
    const double u = state.u[i];
    const double s = ipow(u, lambda + 2) - fields.P[i] - fields.Qx[i];
    return params.k * xi * s * trig_powers(v, lambda).sink1_cos;
  };
  ArrayXd left(n);
  for (int i = 0; i < n; ++i) left[i] = density(i, state.v[i], state.xi[i]);
  ArrayXd right = left;
  for (const auto& sp : state.splits) right[sp.index] = density(sp.index, sp.v, sp.xi);
  return split_trapezoid(state, left, right, dy);
}

namespace {

template <typename F>
double centered_residual(const CharState& state, const ArrayXd& f, double dy, F&& exact) {
  const int n = state.size();
  std::unordered_set<int> skip;
  for (const auto& sp : state.splits) skip.insert(sp.index);
  double r = 0.0;
  for (int i = 1; i + 1 < n; ++i) {
    if (skip.count(i)) continue;
    const double fd = (f[i + 1] - f[i - 1]) / (2.0 * dy);
    r = std::max(r, std::abs(fd - exact(i)));
  }
  return r;
}

}  // namespace

double residual_uY(const CharState& state, const ModelParams& params, double dy) {
  return centered_residual(state, state.u, dy, [&](int i) {
    const auto t = trig_powers(state.v[i], params.lambda);
    return t.half_sin_v * state.xi[i] * t.cos_2lambda;
  });
}

double residual_xY(const CharState& state, const ModelParams& params, double dy) {
  return centered_residual(state, state.x, dy, [&](int i) {
    return trig_powers(state.v[i], params.lambda).cos_k * state.xi[i];
  });
}

double min_cos2_half_v(const CharState& state) {
  double m = 1.0;
  for (Eigen::Index i = 0; i < state.v.size(); ++i) {
    const double c = std::cos(0.5 * state.v[i]);
    m = std::min(m, c * c);
  }
  for (const auto& sp : state.splits) {
    const double c = std::cos(0.5 * sp.v);
    m = std::min(m, c * c);
  }
  return m;
}

double min_xi(const CharState& state) {
  double m = state.xi.minCoeff();
  for (const auto& sp : state.splits) m = std::min(m, sp.xi);
  return m;
}

double bound_u(double E0) { return std::sqrt(E0); }

double bound_P(double E0, int lambda) {
  return (2.0 * lambda + 3.0) / 4.0 * std::pow(E0, (lambda + 2.0) / 2.0);
}

double bound_tolerance(double bound) { return 1e-8 * (1.0 + bound); }

DiagnosticsReport compute_diagnostics(const CharState& state, const NonlocalFields& fields, const ModelParams& params,
                                      double dy, const DiagnosticsOptions& opts) {
  DiagnosticsReport r;
  r.T = state.T;
  r.E_lower = energy_lower(state, params, dy);
  r.H_higher = energy_higher(state, params, dy);
  r.dH_dt_predicted = energy_higher_rate(state, fields, params, dy);
  r.residual_uY = residual_uY(state, params, dy);
  r.residual_xY = residual_xY(state, params, dy);
  r.min_cos2_half_v = min_cos2_half_v(state);
  r.min_xi = min_xi(state);

  BoundChecks& b = r.bounds;
  b.sup_u = state.u.abs().maxCoeff();
  b.sup_P = fields.P.abs().maxCoeff();
  b.sup_Px = fields.Px.abs().maxCoeff();
  b.sup_Q = fields.Q.abs().maxCoeff();
  b.sup_Qx = fields.Qx.abs().maxCoeff();
  b.bound_u = bound_u(opts.E0);
  b.bound_P = bound_P(opts.E0, params.lambda);
  b.margin_u = b.bound_u - b.sup_u;
  b.margin_P = b.bound_P - b.sup_P;
  b.margin_Px = b.bound_P - b.sup_Px;
  b.u_ok = b.margin_u + bound_tolerance(b.bound_u) >= 0.0;
  b.P_ok = b.margin_P + bound_tolerance(b.bound_P) >= 0.0;
  b.Px_ok = b.margin_Px + bound_tolerance(b.bound_P) >= 0.0;

  const auto conv = convolution_bound_check(fields, integrands(state, params), state, params, dy);
  b.margin_conv = conv.margin;
  b.conv_ok = conv.ok;
  b.xi_positive = r.min_xi > 0.0;
  b.x_monotone = true;
  for (int i = 0; i + 1 < state.size(); ++i) {
    const double drop = state.x[i] - state.x[i + 1];
    b.x_max_decrease = std::max(b.x_max_decrease, drop);
    if (drop > 1e-12 * (1.0 + std::abs(state.x[i]))) b.x_monotone = false;
  }
  return r;
}

}  // namespace charflow
