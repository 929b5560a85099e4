#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "charflow/model.hpp"

namespace charflow {

/// Cumulative metric X(Y) = int cos^k(v/2) xi dY from the left end, the
/// per-panel increments the sweeps use, and the nodal metric density
/// g = cos^k(v/2) xi as left/right limits.
template <typename Scalar>
struct MetricProfileT {
  Array<Scalar> X;   // size N, X[0] = 0
  Array<Scalar> dX;  // size N-1, dX[i] = X[i+1] - X[i] >= 0
  Array<Scalar> g, g_right;
};

using MetricProfile = MetricProfileT<double>;

/// Source densities of the two convolutions, as left/right nodal limits.
template <typename Scalar>
struct IntegrandPairT {
  Array<Scalar> aP, aP_right;
  Array<Scalar> aQ, aQ_right;  // all zero when lambda == 0
};

using IntegrandPair = IntegrandPairT<double>;

struct NonlocalOptions {
  bool compensated = false;
  /// Fourth-order Euler-Maclaurin terms for the metric panels and for the
  /// kernel's kink at Y' = Y. Off gives the plain second-order trapezoid.
  bool corrected = true;
};

namespace detail {

// One-sided derivatives of a piecewise smooth nodal function given as
// left/right limits; `split[j]` marks a jump in the derivative at node j.
// Interior nodes use centered differences, split nodes and ends second-order
// one-sided ones taken on the matching side.
template <typename Scalar>
void limit_derivatives(const Array<Scalar>& fL, const Array<Scalar>& fR, const std::vector<char>& split, Scalar h,
                       Array<Scalar>& dL, Array<Scalar>& dR) {
  const Eigen::Index n = fL.size();
  const Scalar two_h = Scalar(2) * h;
  dL.resize(n);
  dR.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool kink = split[j] != 0;
    if (j > 0 && j + 1 < n && !kink) {
      dL[j] = (fL[j + 1] - fR[j - 1]) / two_h;
      dR[j] = dL[j];
      continue;
    }
    dL[j] = j >= 2 ? (Scalar(3) * fL[j] - Scalar(4) * fR[j - 1] + fR[j - 2]) / two_h : Scalar(0);
    dR[j] = j + 2 < n ? (-Scalar(3) * fR[j] + Scalar(4) * fL[j + 1] - fL[j + 2]) / two_h : Scalar(0);
  }
}

template <typename Scalar>
std::vector<char> split_mask(const CharStateT<Scalar>& state) {
  std::vector<char> m(static_cast<std::size_t>(state.size()), 0);
  for (const auto& s : state.splits) m[static_cast<std::size_t>(s.index)] = 1;
  return m;
}

}  // namespace detail

template <typename Scalar>
MetricProfileT<Scalar> metric_profile(const CharStateT<Scalar>& state, const ModelParams& params, Scalar dy,
                                      bool corrected = true) {
  MetricProfileT<Scalar> m;
  nodal_limits(
      state, [&](Scalar, Scalar v, Scalar xi) { return trig_powers(v, params.lambda).cos_k * xi; }, m.g, m.g_right);
  const int n = state.size();
  m.X.resize(n);
  m.dX.resize(std::max(n - 1, 0));
  m.X[0] = Scalar(0);
  Array<Scalar> dgL, dgR;
  if (corrected) detail::limit_derivatives(m.g, m.g_right, detail::split_mask(state), dy, dgL, dgR);
  const Scalar em = dy * dy / Scalar(12);
  for (int i = 0; i + 1 < n; ++i) {
    Scalar d = dy * (m.g_right[i] + m.g[i + 1]) / Scalar(2);
    if (corrected) d = std::max(Scalar(0), d - em * (dgL[i + 1] - dgR[i]));
    m.dX[i] = d;
    m.X[i + 1] = m.X[i] + d;
  }
  return m;
}

template <typename Scalar>
IntegrandPairT<Scalar> integrands(const CharStateT<Scalar>& state, const ModelParams& params) {
  const int lambda = params.lambda;
  const Scalar cP = Scalar(2 * lambda + 1) / Scalar(2);
  const Scalar cQ = Scalar(lambda) / Scalar(2);
  IntegrandPairT<Scalar> a;
  nodal_limits(
      state,
      [&](Scalar u, Scalar v, Scalar xi) {
        const auto t = trig_powers(v, lambda);
        const Scalar ul = ipow(u, lambda);
        return (cP * ul * t.sin2_cosk2 + ul * u * u * t.cos_k) * xi;
      },
      a.aP, a.aP_right);
  if (lambda == 0) {
    a.aQ = Array<Scalar>::Zero(state.size());
    a.aQ_right = a.aQ;
  } else {
    nodal_limits(
        state,
        [&](Scalar u, Scalar v, Scalar xi) {
          return cQ * ipow(u, lambda - 1) * trig_powers(v, lambda).sin3_cosk3 * xi;
        },
        a.aQ, a.aQ_right);
  }
  return a;
}

namespace detail {

// s <- decay * s + add, with (s, c) holding an unevaluated sum when compensated.
template <typename Scalar>
inline void scaled_accumulate(Scalar& s, Scalar& c, Scalar decay, Scalar add, bool compensated) {
  if (!compensated) {
    s = decay * s + add;
    return;
  }
  const Scalar a = decay * s;
  const Scalar b = decay * c + add;
  const Scalar sum = a + b;
  const Scalar bb = sum - a;
  c = (a - (sum - bb)) + (b - bb);
  s = sum;
}

// Left sweep I-(Y_i) = int_{y_min}^{Y_i} exp(-(X_i - X(s))) a(s) ds and right
// sweep I+(Y_i) = int_{Y_i}^{y_max} exp(-(X(s) - X_i)) a(s) ds, trapezoid
// panels with the kernel evaluated at the panel nodes.
template <typename Scalar>
void exponential_sweeps(const Array<Scalar>& decay, const Array<Scalar>& aL, const Array<Scalar>& aR, Scalar dy,
                        bool compensated, Array<Scalar>& minus, Array<Scalar>& plus) {
  const Eigen::Index n = aL.size();
  const Scalar h = dy / Scalar(2);
  minus.resize(n);
  plus.resize(n);
  Scalar s{0}, c{0};
  minus[0] = Scalar(0);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Scalar e = decay[i];
    scaled_accumulate(s, c, e, h * (e * aR[i] + aL[i + 1]), compensated);
    minus[i + 1] = s + c;
  }
  s = Scalar(0);
  c = Scalar(0);
  plus[n - 1] = Scalar(0);
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    const Scalar e = decay[i];
    scaled_accumulate(s, c, e, h * (aR[i] + e * aL[i + 1]), compensated);
    plus[i] = s + c;
  }
}

// Euler-Maclaurin end terms of the two one-sided integrals at their common
// end Y_j, where the integrand exp(-|X_j - X(s)|) a(s) has a kink:
// I- -= h^2/12 (X' a + a')(Y_j-), I+ -= h^2/12 (X' a - a')(Y_j+).
// Split nodes strictly inside an integral add the jump of the integrand's
// derivative, -h^2/12 (F'(Y_s-) - F'(Y_s+)). There are at most a few, so the
// direct sum is O(N) and shared by both evaluation paths.
template <typename Scalar>
void kink_corrections(const MetricProfileT<Scalar>& metric, const Array<Scalar>& aL, const Array<Scalar>& aR,
                      const std::vector<char>& split, Scalar dy, Array<Scalar>& minus, Array<Scalar>& plus) {
  using std::exp;
  Array<Scalar> daL, daR;
  limit_derivatives(aL, aR, split, dy, daL, daR);
  const Scalar em = dy * dy / Scalar(12);
  const Eigen::Index n = aL.size();
  for (Eigen::Index j = 1; j < n; ++j) minus[j] -= em * (metric.g[j] * aL[j] + daL[j]);
  for (Eigen::Index j = 0; j + 1 < n; ++j) plus[j] -= em * (metric.g_right[j] * aR[j] - daR[j]);
  const Array<Scalar>& X = metric.X;
  for (Eigen::Index s = 1; s + 1 < n; ++s) {
    if (!split[static_cast<std::size_t>(s)]) continue;
    const Scalar jm = (metric.g[s] * aL[s] + daL[s]) - (metric.g_right[s] * aR[s] + daR[s]);
    const Scalar jp = (daL[s] - metric.g[s] * aL[s]) - (daR[s] - metric.g_right[s] * aR[s]);
    for (Eigen::Index i = s + 1; i < n; ++i) minus[i] -= em * exp(-(X[i] - X[s])) * jm;
    for (Eigen::Index i = 0; i < s; ++i) plus[i] -= em * exp(-(X[s] - X[i])) * jp;
  }
}

template <typename Scalar>
void combine(const Array<Scalar>& minus, const Array<Scalar>& plus, Array<Scalar>& even, Array<Scalar>& odd) {
  even = (minus + plus) / Scalar(2);
  odd = (plus - minus) / Scalar(2);
}

}  // namespace detail

/// O(N) evaluation of P, P_x, Q, Q_x by one left and one right exponential
/// sweep per source density.
template <typename Scalar>
NonlocalFieldsT<Scalar> eval_nonlocal_fast(const MetricProfileT<Scalar>& metric, const IntegrandPairT<Scalar>& a,
                                           const std::vector<char>& split, Scalar dy, int lambda,
                                           const NonlocalOptions& opts = {}) {
  const Array<Scalar> decay = (-metric.dX).exp();
  NonlocalFieldsT<Scalar> f;
  Array<Scalar> minus, plus;
  detail::exponential_sweeps(decay, a.aP, a.aP_right, dy, opts.compensated, minus, plus);
  if (opts.corrected) detail::kink_corrections(metric, a.aP, a.aP_right, split, dy, minus, plus);
  detail::combine(minus, plus, f.P, f.Px);
  if (lambda == 0) {
    f.Q = Array<Scalar>::Zero(a.aP.size());
    f.Qx = Array<Scalar>::Zero(a.aP.size());
  } else {
    detail::exponential_sweeps(decay, a.aQ, a.aQ_right, dy, opts.compensated, minus, plus);
    if (opts.corrected) detail::kink_corrections(metric, a.aQ, a.aQ_right, split, dy, minus, plus);
    detail::combine(minus, plus, f.Q, f.Qx);
  }
  return f;
}

inline constexpr int kNaiveMaxPoints = 8192;

/// O(N^2) reference: the same quadrature summed term by term with the
/// kernel exp(-|X_i - X_j|) evaluated directly, left to right.
template <typename Scalar>
NonlocalFieldsT<Scalar> eval_nonlocal_naive(const MetricProfileT<Scalar>& metric, const IntegrandPairT<Scalar>& a,
                                            const std::vector<char>& split, Scalar dy, int lambda,
                                            const NonlocalOptions& opts = {}) {
  using std::exp;
  const Eigen::Index n = metric.X.size();
  if (n > kNaiveMaxPoints) {
    throw Error(ErrorCode::GridTooLargeForOracle, "naive nonlocal evaluation is limited to N <= 8192", n);
  }
  const Scalar h = dy / Scalar(2);
  const Array<Scalar>& X = metric.X;
  auto sums = [&](const Array<Scalar>& aL, const Array<Scalar>& aR, Array<Scalar>& minus, Array<Scalar>& plus) {
    minus.resize(n);
    plus.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar m{0};
      for (Eigen::Index j = 0; j < i; ++j) {
        m += h * (exp(-(X[i] - X[j])) * aR[j] + exp(-(X[i] - X[j + 1])) * aL[j + 1]);
      }
      Scalar p{0};
      for (Eigen::Index j = i; j + 1 < n; ++j) {
        p += h * (exp(-(X[j] - X[i])) * aR[j] + exp(-(X[j + 1] - X[i])) * aL[j + 1]);
      }
      minus[i] = m;
      plus[i] = p;
    }
  };
  NonlocalFieldsT<Scalar> f;
  Array<Scalar> minus, plus;
  sums(a.aP, a.aP_right, minus, plus);
  if (opts.corrected) detail::kink_corrections(metric, a.aP, a.aP_right, split, dy, minus, plus);
  detail::combine(minus, plus, f.P, f.Px);
  if (lambda == 0) {
    f.Q = Array<Scalar>::Zero(n);
    f.Qx = Array<Scalar>::Zero(n);
  } else {
    sums(a.aQ, a.aQ_right, minus, plus);
    if (opts.corrected) detail::kink_corrections(metric, a.aQ, a.aQ_right, split, dy, minus, plus);
    detail::combine(minus, plus, f.Q, f.Qx);
  }
  return f;
}

/// Evaluates all four fields for a state, building the metric and sources.
template <typename Scalar>
NonlocalFieldsT<Scalar> eval_nonlocal(const CharStateT<Scalar>& state, const ModelParams& params, Scalar dy,
                                      bool use_oracle = false, const NonlocalOptions& opts = {}) {
  const auto metric = metric_profile(state, params, dy, opts.corrected);
  const auto a = integrands(state, params);
  const auto split = detail::split_mask(state);
  return use_oracle ? eval_nonlocal_naive(metric, a, split, dy, params.lambda, opts)
                    : eval_nonlocal_fast(metric, a, split, dy, params.lambda, opts);
}

/// L1 norm of the comparison kernel g of the exponential-kernel convolution
/// bound: 9 B^2 + 2^(lambda+2) / C-.
inline double convolution_kernel_l1(double B, double c_minus, int lambda) {
  return 9.0 * B * B + std::ldexp(1.0, lambda + 2) / c_minus;
}

struct ConvolutionBoundReport {
  double B = 0.0;        // discrete L2 norm of v
  double c_minus = 0.0;  // min xi
  double g_l1 = 0.0;
  double margin = 0.0;   // min over the four fields of (bound - |smoothed field|) / bound
  bool ok = true;
};

/// Checks sup|int K f| <= |g|_1 sup|f| for the four smoothed fields, where
/// the smoothed field is twice P, P_x, Q or Q_x. Throws BoundViolated when
/// `throw_on_violation` is set and the inequality fails.
ConvolutionBoundReport convolution_bound_check(const NonlocalFields& fields, const IntegrandPair& a,
                                               const CharState& state, const ModelParams& params, double dy,
                                               bool throw_on_violation = false);

}  // namespace charflow
