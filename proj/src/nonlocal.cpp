#include "charflow/nonlocal.hpp"

#include <numbers>
#include <sstream>

namespace charflow {

namespace {

// v folded into [-pi, pi]; the system only sees v through half-angle
// trigonometry, so the folded angle is the one the lemma constrains.
double wrap_angle(double v) {
  return std::remainder(v, 2.0 * std::numbers::pi);
}

double sup_abs(const ArrayXd& a, const ArrayXd& b) {
  return std::max(a.abs().maxCoeff(), b.abs().maxCoeff());
}

}  // namespace

ConvolutionBoundReport convolution_bound_check(const NonlocalFields& fields, const IntegrandPair& a,
                                               const CharState& state, const ModelParams& params, double dy,
                                               bool throw_on_violation) {
  ConvolutionBoundReport r;
  ArrayXd v2_left, v2_right;
  nodal_limits(
      state,
      [](double, double v, double) {
        const double w = wrap_angle(v);
        return w * w;
      },
      v2_left, v2_right);
  r.B = std::sqrt(trapezoid(v2_left, v2_right, dy));
  r.c_minus = state.xi.minCoeff();
  for (const auto& s : state.splits) r.c_minus = std::min(r.c_minus, s.xi);
  r.g_l1 = convolution_kernel_l1(r.B, r.c_minus, params.lambda);

  const double supP = sup_abs(a.aP, a.aP_right);
  const double supQ = sup_abs(a.aQ, a.aQ_right);
  struct Item {
    const char* name;
    double field;
    double source;
  };
  const Item items[] = {
      {"P", fields.P.abs().maxCoeff(), supP},
      {"Px", fields.Px.abs().maxCoeff(), supP},
      {"Q", fields.Q.abs().maxCoeff(), supQ},
      {"Qx", fields.Qx.abs().maxCoeff(), supQ},
  };
  r.margin = 1.0;
  for (const auto& it : items) {
    const double bound = r.g_l1 * it.source;
    const double smoothed = 2.0 * it.field;
    const double margin = bound > 0.0 ? (bound - smoothed) / bound : (smoothed == 0.0 ? 1.0 : -1.0);
    r.margin = std::min(r.margin, margin);
    if (margin <= 0.0) {
      r.ok = false;
      if (throw_on_violation) {
        std::ostringstream msg;
        msg << "convolution bound failed for " << it.name << ": 2 sup|F| = " << smoothed << " > " << bound;
        throw Error(ErrorCode::BoundViolated, msg.str());
      }
    }
  }
  return r;
}

}  // namespace charflow
