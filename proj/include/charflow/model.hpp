#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "charflow/error.hpp"

namespace charflow {

template <typename Scalar>
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using ArrayXd = Array<double>;

/// Exponent parameter of the family and the discretization size.
struct ModelParams {
  int lambda = 0;
  int k = 2;  // 2 * (lambda + 1)
  double L = 20.0;
  int N = 1024;
};

/// Unvalidated values as they arrive from a config file or the command line.
struct RawParams {
  double lambda = 0.0;
  double L = 20.0;
  double N = 1024;
};

ModelParams validate_params(const RawParams& raw);

/// Uniform characteristic-label grid.
struct CharGrid {
  double y_min = 0.0;
  double y_max = 0.0;
  double dy = 0.0;
  ArrayXd nodes;

  int size() const { return static_cast<int>(nodes.size()); }
};

CharGrid make_grid(double y_min, double y_max, int n);

/// Right-hand limits at a node where the initial slope jumps (peakon
/// crest). The node arrays of CharState carry the left-hand limits; u and x
/// are continuous there.
template <typename Scalar>
struct SplitNode {
  int index = 0;
  Scalar v{};
  Scalar xi{};
};

template <typename Scalar>
struct CharStateT {
  double T = 0.0;
  Array<Scalar> u;
  Array<Scalar> v;  // unwrapped angle 2*atan(u_x)
  Array<Scalar> xi;
  Array<Scalar> x;
  std::vector<SplitNode<Scalar>> splits;

  int size() const { return static_cast<int>(u.size()); }

  template <typename Other>
  CharStateT<Other> cast() const {
    CharStateT<Other> out;
    out.T = T;
    out.u = u.template cast<Other>();
    out.v = v.template cast<Other>();
    out.xi = xi.template cast<Other>();
    out.x = x.template cast<Other>();
    for (const auto& s : splits) out.splits.push_back({s.index, static_cast<Other>(s.v), static_cast<Other>(s.xi)});
    return out;
  }
};

using CharState = CharStateT<double>;

template <typename Scalar>
struct NonlocalFieldsT {
  Array<Scalar> P, Px, Q, Qx;
};

using NonlocalFields = NonlocalFieldsT<double>;

/// A-priori bound monitors. Margins are bound minus observed value, so a
/// negative margin is a violation. Monotonicity of the evolved x is reported
/// but not part of all_ok(): near a cusp x_Y vanishes and the independently
/// evolved positions can reverse by the size of the x_Y residual.
struct BoundChecks {
  double sup_u = 0.0;
  double bound_u = 0.0;
  double sup_P = 0.0;
  double sup_Px = 0.0;
  double sup_Q = 0.0;
  double sup_Qx = 0.0;
  double bound_P = 0.0;
  double margin_u = 0.0;
  double margin_P = 0.0;
  double margin_Px = 0.0;
  double margin_conv = 0.0;
  double x_max_decrease = 0.0;  // largest x[i] - x[i+1], zero when monotone
  bool u_ok = true;
  bool P_ok = true;
  bool Px_ok = true;
  bool conv_ok = true;
  bool xi_positive = true;
  bool x_monotone = true;

  bool all_ok() const { return u_ok && P_ok && Px_ok && conv_ok && xi_positive; }
};

struct DiagnosticsReport {
  double T = 0.0;
  double E_lower = 0.0;
  double H_higher = 0.0;
  double dH_dt_predicted = 0.0;
  double residual_uY = 0.0;
  double residual_xY = 0.0;
  double min_cos2_half_v = 1.0;
  double min_xi = 1.0;
  BoundChecks bounds;
};

/// Half-angle powers of v used throughout the system, with k = 2(lambda+1).
template <typename Scalar>
struct TrigPowers {
  Scalar sin_half{};
  Scalar cos_half{};
  Scalar cos2{};        // cos^2(v/2)
  Scalar cos_k{};       // cos^k(v/2)
  Scalar cos_2lambda{}; // cos^(k-2)(v/2)
  Scalar sin2_cosk2{};  // sin^2(v/2) cos^(k-2)(v/2)
  Scalar sin3_cosk3{};  // sin^3(v/2) cos^(k-3)(v/2); zero when lambda == 0
  Scalar sin_k{};       // sin^k(v/2)
  Scalar sink1_cos{};   // sin^(k-1)(v/2) cos(v/2)
  Scalar half_sin_v{};  // sin(v)/2
};

/// Integer power by repeated multiplication.
template <typename Scalar>
inline Scalar ipow(Scalar base, int n) {
  Scalar r{1};
  for (int i = 0; i < n; ++i) r *= base;
  return r;
}

template <typename Scalar>
inline TrigPowers<Scalar> trig_powers(Scalar v, int lambda) {
  using std::cos;
  using std::sin;
  TrigPowers<Scalar> t;
  const Scalar half = v / Scalar(2);
  t.sin_half = sin(half);
  t.cos_half = cos(half);
  const Scalar s2 = t.sin_half * t.sin_half;
  t.cos2 = t.cos_half * t.cos_half;
  t.cos_2lambda = ipow(t.cos2, lambda);
  t.cos_k = t.cos_2lambda * t.cos2;
  t.sin2_cosk2 = s2 * t.cos_2lambda;
  t.sin3_cosk3 = lambda == 0 ? Scalar(0) : s2 * t.sin_half * t.cos_half * ipow(t.cos2, lambda - 1);
  const Scalar s_k2 = ipow(s2, lambda);  // sin^(k-2)
  t.sin_k = s_k2 * s2;
  t.sink1_cos = s_k2 * t.sin_half * t.cos_half;
  t.half_sin_v = t.sin_half * t.cos_half;
  assert(t.cos_k >= Scalar(0) && t.sin_k >= Scalar(0));
  return t;
}

/// Evaluates a pointwise quantity f(u, v, xi) at every node. `left` holds
/// the left-hand limits (the node arrays), `right` the right-hand limits,
/// which differ only at split nodes. Panel i spans [right(i), left(i+1)].
template <typename Scalar, typename F>
void nodal_limits(const CharStateT<Scalar>& s, F&& f, Array<Scalar>& left, Array<Scalar>& right) {
  const int n = s.size();
  left.resize(n);
  for (int i = 0; i < n; ++i) left[i] = f(s.u[i], s.v[i], s.xi[i]);
  right = left;
  for (const auto& sp : s.splits) right[sp.index] = f(s.u[sp.index], sp.v, sp.xi);
}

/// Composite trapezoid over the grid honoring one-sided limits at splits.
template <typename Scalar>
Scalar trapezoid(const Array<Scalar>& left, const Array<Scalar>& right, Scalar dy) {
  Scalar sum{0};
  const auto n = left.size();
  for (Eigen::Index i = 0; i + 1 < n; ++i) sum += right[i] + left[i + 1];
  return sum * dy / Scalar(2);
}

}  // namespace charflow
