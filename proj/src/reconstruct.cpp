#include "charflow/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace charflow {

namespace {

ArrayXd monotone_envelope(const ArrayXd& x) {
  ArrayXd m = x;
  for (Eigen::Index i = 1; i < m.size(); ++i) m[i] = std::max(m[i], m[i - 1]);
  return m;
}

ArrayXd right_limits_v(const CharState& s) {
  ArrayXd v = s.v;
  for (const auto& sp : s.splits) v[sp.index] = sp.v;
  return v;
}

struct LineFit {
  double slope = 0.0;
  double rms = 0.0;
};

LineFit least_squares(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double saa = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  LineFit f;
  f.slope = sab / saa;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = b[i] - (mb + f.slope * (a[i] - ma));
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

double bump(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  return q * q * q;
}

double bump_slope(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  return -6.0 * s * q * q;
}

}  // namespace

// ---------------------------------------------------------------------------

PhysicalSolution to_physical(const CharState& state, const ModelParams& params, const ArrayXd& x_samples,
                             double epsilon_sing) {
  const int n = state.size();
  const ArrayXd xm = monotone_envelope(state.x);
  const ArrayXd vr = right_limits_v(state);
  PhysicalSolution out;
  out.T = state.T;
  out.x = x_samples;
  out.u.resize(x_samples.size());
  out.ux.resize(x_samples.size());
  out.singular.assign(static_cast<std::size_t>(x_samples.size()), 0);
  (void)params;
  for (Eigen::Index j = 0; j < x_samples.size(); ++j) {
    const double xs = x_samples[j];
    if (!(xs >= xm[0] && xs <= xm[n - 1])) {
      std::ostringstream msg;
      msg << "sample x = " << xs << " outside [" << xm[0] << ", " << xm[n - 1] << "]";
      throw Error(ErrorCode::SampleOutsideDomain, msg.str(), j);
    }
    const auto* it = std::upper_bound(xm.data(), xm.data() + n, xs);
    const int i = static_cast<int>(std::clamp<std::ptrdiff_t>(it - xm.data() - 1, 0, n - 2));
    const double width = xm[i + 1] - xm[i];
    const double theta = width > 0.0 ? std::clamp((xs - xm[i]) / width, 0.0, 1.0) : 0.0;
    out.u[j] = (1.0 - theta) * state.u[i] + theta * state.u[i + 1];
    const double v = (1.0 - theta) * vr[i] + theta * state.v[i + 1];
    const double c = std::cos(0.5 * v);
    if (c * c < epsilon_sing) {
      out.singular[static_cast<std::size_t>(j)] = 1;
      out.ux[j] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.ux[j] = std::tan(0.5 * v);
    }
  }
  return out;
}

ArrayXd physical_sample_grid(const CharState& state, int n) {
  const ArrayXd xm = monotone_envelope(state.x);
  return ArrayXd::LinSpaced(n, xm[0], xm[xm.size() - 1]);
}

// ---------------------------------------------------------------------------

double MeasureDecomposition::atom_mass() const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.mass;
  return m;
}

const Atom* MeasureDecomposition::largest() const {
  const Atom* best = nullptr;
  for (const auto& a : atoms) {
    if (!best || a.mass > best->mass) best = &a;
  }
  return best;
}

MeasureDecomposition measure_decompose(const CharState& state, const ModelParams& params, double dy,
                                       double epsilon_sing) {
  const int n = state.size();
  ArrayXd hL, hR;
  nodal_limits(
      state, [&](double, double v, double xi) { return trig_powers(v, params.lambda).sin_k * xi; }, hL, hR);
  // Node i owns half of each adjacent panel.
  ArrayXd mass = ArrayXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) mass[i] += 0.5 * dy * hL[i];
    if (i + 1 < n) mass[i] += 0.5 * dy * hR[i];
  }
  std::vector<char> degenerate(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const double c = std::cos(0.5 * state.v[i]);
    degenerate[i] = c * c < epsilon_sing;
  }
  for (const auto& sp : state.splits) {
    const double c = std::cos(0.5 * sp.v);
    if (c * c < epsilon_sing) degenerate[sp.index] = 1;
  }

  MeasureDecomposition d;
  d.total = mass.sum();
  for (int i = 0; i < n;) {
    if (!degenerate[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < n && degenerate[j + 1]) ++j;
    Atom a;
    a.first = i;
    a.last = j;
    a.mass = mass.segment(i, j - i + 1).sum();
    const auto us = state.u.segment(i, j - i + 1);
    a.u_mean = us.mean();
    a.u_spread = us.maxCoeff() - us.minCoeff();
    a.x = state.x.segment(i, j - i + 1).mean();
    d.atoms.push_back(a);
    i = j + 1;
  }
  d.ac_mass = d.total - d.atom_mass();
  return d;
}

ArrayXd ac_density(const PhysicalSolution& phys, const ModelParams& params) {
  ArrayXd d(phys.x.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    d[i] = phys.singular[static_cast<std::size_t>(i)] ? 0.0 : ipow(phys.ux[i], params.k);
  }
  return d;
}

CuspLocation find_cusp(const CharState& state, double threshold) {
  CuspLocation c;
  c.min_cos2 = 2.0;
  auto consider = [&](int i, double v) {
    const double cc = std::cos(0.5 * v);
    if (cc * cc < c.min_cos2) {
      c.min_cos2 = cc * cc;
      c.index = i;
    }
  };
  for (int i = 0; i < state.size(); ++i) consider(i, state.v[i]);
  for (const auto& sp : state.splits) consider(sp.index, sp.v);
  if (!(c.min_cos2 < threshold)) {
    std::ostringstream msg;
    msg << "min cos^2(v/2) = " << c.min_cos2 << " is not below " << threshold;
    throw Error(ErrorCode::NoCuspDetected, msg.str());
  }
  c.x = state.x[c.index];
  c.u = state.u[c.index];
  return c;
}

// ---------------------------------------------------------------------------

ArrayXd holder_samples(double x_star, double inner, double window, int per_side) {
  ArrayXd out(2 * per_side + 1);
  const double a = std::log(inner);
  const double b = std::log(window);
  out[per_side] = x_star;
  for (int i = 0; i < per_side; ++i) {
    const double r = std::exp(a + (b - a) * (i + 0.5) / per_side);
    out[per_side - 1 - i] = x_star - r;
    out[per_side + 1 + i] = x_star + r;
  }
  return out;
}

HolderFit holder_exponent_estimate(const PhysicalSolution& phys, double x_star, double window, double inner,
                                   int min_per_side) {
  if (!std::isfinite(x_star)) throw Error(ErrorCode::NoCuspDetected, "cusp location is not finite");
  const Eigen::Index n = phys.x.size();
  if (n < 2 || x_star < phys.x[0] || x_star > phys.x[n - 1]) {
    throw Error(ErrorCode::NoCuspDetected, "cusp location outside the sampled range");
  }
  const auto* it = std::upper_bound(phys.x.data(), phys.x.data() + n, x_star);
  const Eigen::Index i = std::clamp<Eigen::Index>(it - phys.x.data() - 1, 0, n - 2);
  const double w = phys.x[i + 1] - phys.x[i];
  const double th = w > 0.0 ? (x_star - phys.x[i]) / w : 0.0;
  const double u_star = (1.0 - th) * phys.u[i] + th * phys.u[i + 1];

  std::vector<double> la, lb, ra, rb;
  std::vector<std::pair<double, double>> modulus;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = phys.x[j] - x_star;
    const double r = std::abs(d);
    const double du = std::abs(phys.u[j] - u_star);
    if (r <= inner || r > window) continue;
    modulus.emplace_back(r, du);
    if (!(du > 0.0)) continue;
    (d < 0 ? la : ra).push_back(std::log(r));
    (d < 0 ? lb : rb).push_back(std::log(du));
  }
  HolderFit f;
  f.n_left = static_cast<int>(la.size());
  f.n_right = static_cast<int>(ra.size());
  if (f.n_left < min_per_side || f.n_right < min_per_side) {
    std::ostringstream msg;
    msg << "need " << min_per_side << " samples per side, have " << f.n_left << " left and " << f.n_right
        << " right";
    throw Error(ErrorCode::InsufficientSamples, msg.str());
  }
  f.left = least_squares(la, lb).slope;
  f.right = least_squares(ra, rb).slope;

  // Modulus of continuity omega(r) = max |u - u*| over |x - x*| <= r.
  std::sort(modulus.begin(), modulus.end());
  std::vector<double> lr, lw;
  double omega = 0.0;
  for (const auto& [r, du] : modulus) {
    omega = std::max(omega, du);
    if (omega > 0.0) {
      lr.push_back(std::log(r));
      lw.push_back(std::log(omega));
    }
  }
  const auto fm = least_squares(lr, lw);
  f.exponent = fm.slope;
  f.residual = fm.rms;
  return f;
}

// ---------------------------------------------------------------------------

double lk_distance(const CharState& a, const CharState& b, const ModelParams& params, double dy) {
  const PhysicalSolution pa = to_physical(a, params, b.x.cwiseMax(a.x.minCoeff()).cwiseMin(a.x.maxCoeff()));
  ArrayXd left, right;
  const int n = b.size();
  left.resize(n);
  for (int i = 0; i < n; ++i) {
    const double diff = std::abs(b.u[i] - pa.u[i]);
    left[i] = ipow(diff, params.k) * trig_powers(b.v[i], params.lambda).cos_k * b.xi[i];
  }
  right = left;
  for (const auto& sp : b.splits) {
    const double diff = std::abs(b.u[sp.index] - pa.u[sp.index]);
    right[sp.index] = ipow(diff, params.k) * trig_powers(sp.v, params.lambda).cos_k * sp.xi;
  }
  return std::pow(trapezoid(left, right, dy), 1.0 / params.k);
}

LipschitzReport lipschitz_in_Lk_check(const std::vector<CharState>& trajectory, const ModelParams& params,
                                      double dy) {
  LipschitzReport r;
  if (trajectory.size() < 3) {
    throw Error(ErrorCode::InsufficientSamples, "Lipschitz check needs at least three snapshots");
  }
  for (std::size_t j = 0; j + 1 < trajectory.size(); ++j) {
    const double h = trajectory[j + 1].T - trajectory[j].T;
    r.ratios.push_back(lk_distance(trajectory[j], trajectory[j + 1], params, dy) / h);
  }
  r.reference = r.ratios.front();
  r.max_ratio = *std::max_element(r.ratios.begin(), r.ratios.end());
  r.ok = r.max_ratio <= 10.0 * r.reference;
  return r;
}

// ---------------------------------------------------------------------------

double BumpTestFunction::value(double t, double x) const {
  return bump((t - t_center) / t_half_width) * bump((x - x_center) / x_half_width);
}

double BumpTestFunction::dt(double t, double x) const {
  return bump_slope((t - t_center) / t_half_width) / t_half_width * bump((x - x_center) / x_half_width);
}

double BumpTestFunction::dx(double t, double x) const {
  return bump((t - t_center) / t_half_width) * bump_slope((x - x_center) / x_half_width) / x_half_width;
}

WeakFormAccumulator::WeakFormAccumulator(const ModelParams& params, double dy, const BumpTestFunction& phi)
    : params_(params), dy_(dy), phi_(phi) {}

WeakFormAccumulator::Slice WeakFormAccumulator::integrate(const CharState& state) const {
  const int n = state.size();
  const int lambda = params_.lambda;
  const NonlocalFields f = eval_nonlocal(state, params_, dy_);
  const double t = state.T;
  // Integrands in label space for node i with limit (v, xi).
  auto densities = [&](int i, double v, double xi, double* out, double& bnv, double& ben) {
    const auto tp = trig_powers(v, lambda);
    const double u = state.u[i];
    const double x = state.x[i];
    const double ul = ipow(u, lambda);
    const double ul1 = ul * u;
    const double ux_dx = tp.half_sin_v * tp.cos_2lambda * xi;  // u_x dx / dY
    const double phi = phi_.value(t, x);
    const double phit = phi_.dt(t, x);
    const double phix = phi_.dx(t, x);
    const double src = ul1 * u - f.P[i] - f.Qx[i];
    out[0] = ux_dx * phit;
    out[1] = ul1 * ux_dx * phix;
    out[2] = ((2 * lambda + 1) / 2.0 * ul * tp.sin2_cosk2 * xi + src * tp.cos_k * xi) * phi;
    out[3] = (phit + ul1 * phix) * tp.sin_k * xi;
    out[4] = params_.k * src * tp.sink1_cos * xi * phi;
    bnv = ux_dx * phi;
    ben = tp.sin_k * xi * phi;
  };
  Slice s;
  s.t = t;
  std::vector<double> right_v(static_cast<std::size_t>(n)), right_xi(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    right_v[i] = state.v[i];
    right_xi[i] = state.xi[i];
  }
  for (const auto& sp : state.splits) {
    right_v[sp.index] = sp.v;
    right_xi[sp.index] = sp.xi;
  }
  const double h = 0.5 * dy_;
  for (int i = 0; i < n; ++i) {
    double dl[kTerms], dr[kTerms], bl = 0, br = 0, el = 0, er = 0;
    densities(i, state.v[i], state.xi[i], dl, bl, el);
    densities(i, right_v[i], right_xi[i], dr, br, er);
    const double wl = i > 0 ? h : 0.0;
    const double wr = i + 1 < n ? h : 0.0;
    for (int q = 0; q < kTerms; ++q) {
      s.term[q] += wl * dl[q] + wr * dr[q];
      s.abs_term[q] += wl * std::abs(dl[q]) + wr * std::abs(dr[q]);
    }
    s.boundary_nv += wl * bl + wr * br;
    s.boundary_en += wl * el + wr * er;
  }
  return s;
}

void WeakFormAccumulator::add(const CharState& state) {
  const Slice s = integrate(state);
  const double lo = state.x[0];
  const double hi = state.x.maxCoeff();
  if (!have_prev_) {
    first_ = s;
    t_first_ = s.t;
    x_lo_ = lo;
    x_hi_ = hi;
  } else {
    const double w = 0.5 * (s.t - prev_.t);
    for (int q = 0; q < kTerms; ++q) {
      sum_[q] += w * (prev_.term[q] + s.term[q]);
      sum_abs_[q] += w * (prev_.abs_term[q] + s.abs_term[q]);
    }
    x_lo_ = std::max(x_lo_, lo);
    x_hi_ = std::min(x_hi_, hi);
  }
  t_last_ = s.t;
  prev_ = s;
  have_prev_ = true;
}

WeakResidual WeakFormAccumulator::result() const {
  const auto& p = phi_;
  if (!have_prev_ || p.t_center - p.t_half_width < t_first_ || p.t_center + p.t_half_width > t_last_ ||
      p.x_center - p.x_half_width < x_lo_ || p.x_center + p.x_half_width > x_hi_) {
    std::ostringstream msg;
    msg << "test function support [" << p.t_center - p.t_half_width << ", " << p.t_center + p.t_half_width
        << "] x [" << p.x_center - p.x_half_width << ", " << p.x_center + p.x_half_width
        << "] is not inside the computed window [" << t_first_ << ", " << t_last_ << "] x [" << x_lo_ << ", "
        << x_hi_ << "]";
    throw Error(ErrorCode::SupportExceedsWindow, msg.str());
  }
  // Integration by parts in time leaves the data at the first time on the
  // boundary; it vanishes when the bump does.
  WeakResidual r;
  r.nv_raw = sum_[0] + sum_[1] + sum_[2] + first_.boundary_nv;
  r.en_raw = sum_[3] + sum_[4] + first_.boundary_en;
  r.nv_scale = sum_abs_[0] + sum_abs_[1] + sum_abs_[2] + std::abs(first_.boundary_nv);
  r.en_scale = sum_abs_[3] + sum_abs_[4] + std::abs(first_.boundary_en);
  r.nv = r.nv_scale > 0.0 ? std::abs(r.nv_raw) / r.nv_scale : 0.0;
  r.en = r.en_scale > 0.0 ? std::abs(r.en_raw) / r.en_scale : 0.0;
  return r;
}

WeakResidual weak_form_residual(const std::vector<CharState>& trajectory, const ModelParams& params, double dy,
                                const BumpTestFunction& phi) {
  WeakFormAccumulator acc(params, dy, phi);
  for (const auto& s : trajectory) acc.add(s);
  return acc.result();
}

}  // namespace charflow
