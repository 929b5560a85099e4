#pragma once

#include "charflow/model.hpp"
#include "charflow/nonlocal.hpp"

namespace charflow {

/// Lower-order energy int (u^2 cos^k(v/2) + sin^2(v/2) cos^(k-2)(v/2)) xi dY.
double energy_lower(const CharState& state, const ModelParams& params, double dy);

/// Higher-order functional int xi sin^k(v/2) dY, essentially int u_x^k dx.
double energy_higher(const CharState& state, const ModelParams& params, double dy);

/// Right-hand side of the higher-order balance law,
/// k int xi (u^(lambda+2) - P - Q_x) sin^(k-1)(v/2) cos(v/2) dY.
double energy_higher_rate(const CharState& state, const NonlocalFields& fields, const ModelParams& params, double dy);

/// Max-norm residuals of u_Y = xi sin v cos^(2 lambda)(v/2) / 2 and
/// x_Y = cos^k(v/2) xi with centered differences, skipping the two end
/// nodes and split nodes.
double residual_uY(const CharState& state, const ModelParams& params, double dy);
double residual_xY(const CharState& state, const ModelParams& params, double dy);

double min_cos2_half_v(const CharState& state);
double min_xi(const CharState& state);

/// sqrt(E0) and (2 lambda + 3)/4 E0^((lambda+2)/2).
double bound_u(double E0);
double bound_P(double E0, int lambda);
/// Slack allowed on top of a bound: 1e-8 (1 + bound).
double bound_tolerance(double bound);

struct DiagnosticsOptions {
  double E0 = 0.0;
};

DiagnosticsReport compute_diagnostics(const CharState& state, const NonlocalFields& fields, const ModelParams& params,
                                      double dy, const DiagnosticsOptions& opts);

}  // namespace charflow
