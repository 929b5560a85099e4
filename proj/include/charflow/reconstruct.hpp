#pragma once

#include <vector>

#include "charflow/evolve.hpp"
#include "charflow/model.hpp"

namespace charflow {

/// Physical profile at one time, sampled at requested abscissae. `ux` is NaN
/// where the sample is singular.
struct PhysicalSolution {
  double T = 0.0;
  ArrayXd x;
  ArrayXd u;
  ArrayXd ux;
  std::vector<char> singular;
};

/// Samples u(t, x) and u_x(t, x) by inverting x(Y). Positions are taken
/// through their running maximum, so slight reversals of the evolved x near
/// a cusp cannot produce a non-monotone search table.
PhysicalSolution to_physical(const CharState& state, const ModelParams& params, const ArrayXd& x_samples,
                             double epsilon_sing = 1e-6);

/// `n` equally spaced samples covering the state's physical extent.
ArrayXd physical_sample_grid(const CharState& state, int n);

struct Atom {
  double x = 0.0;
  double mass = 0.0;
  double u_mean = 0.0;
  double u_spread = 0.0;  // max - min of u over the collapsed labels
  int first = 0;          // node range [first, last]
  int last = 0;
};

/// Energy measure int xi sin^k(v/2) dY split into atoms (maximal runs of
/// nodes with cos^2(v/2) < epsilon) and the absolutely continuous rest.
/// Node masses partition the trapezoid sum, so total = ac_mass + sum of atoms.
struct MeasureDecomposition {
  std::vector<Atom> atoms;
  double ac_mass = 0.0;
  double total = 0.0;

  double atom_mass() const;
  const Atom* largest() const;
};

MeasureDecomposition measure_decompose(const CharState& state, const ModelParams& params, double dy,
                                       double epsilon_sing = 1e-6);

/// Density u_x^k of the absolutely continuous part on the samples of `phys`
/// (zero where singular).
ArrayXd ac_density(const PhysicalSolution& phys, const ModelParams& params);

struct CuspLocation {
  double x = 0.0;
  double u = 0.0;
  int index = 0;
  double min_cos2 = 1.0;
};

/// Node where cos^2(v/2) is smallest. Throws NoCuspDetected when it stays
/// above `threshold`.
CuspLocation find_cusp(const CharState& state, double threshold = 1e-4);

struct HolderFit {
  double exponent = 0.0;  // slope of the modulus of continuity
  double left = 0.0;      // one-sided slopes of log|u - u*|
  double right = 0.0;
  double residual = 0.0;  // rms of the modulus fit
  int n_left = 0;
  int n_right = 0;
};

/// Least-squares slope of log omega(r) against log r, where omega(r) is the
/// largest |u(x) - u(x*)| over samples with inner < |x - x*| <= r <= window.
/// Needs at least `min_per_side` samples per side; u(x*) is interpolated from
/// the samples, so they should include x* (see holder_samples).
HolderFit holder_exponent_estimate(const PhysicalSolution& phys, double x_star, double window, double inner,
                                   int min_per_side = 20);

/// x_star itself plus `per_side` log-spaced samples on each side between
/// inner and window.
ArrayXd holder_samples(double x_star, double inner, double window, int per_side);

struct LipschitzReport {
  std::vector<double> ratios;  // ||u(t_{j+1}) - u(t_j)||_{L^k} / (t_{j+1} - t_j)
  double max_ratio = 0.0;
  double reference = 0.0;  // first pair's ratio
  bool ok = true;          // max_ratio <= 10 * reference
};

/// L^k distance of two snapshots, int |u_b(x) - u_a(x)|^k dx evaluated on
/// b's labels with dx = cos^k(v_b/2) xi_b dY.
double lk_distance(const CharState& a, const CharState& b, const ModelParams& params, double dy);

LipschitzReport lipschitz_in_Lk_check(const std::vector<CharState>& trajectory, const ModelParams& params,
                                      double dy);

/// Tensor product bump phi(t, x) = b((t - t_c)/tau) b((x - x_c)/ell) with
/// b(s) = (1 - s^2)^3 on |s| < 1.
struct BumpTestFunction {
  double t_center = 0.0;
  double t_half_width = 1.0;
  double x_center = 0.0;
  double x_half_width = 1.0;

  double value(double t, double x) const;
  double dt(double t, double x) const;
  double dx(double t, double x) const;
};

struct WeakResidual {
  double nv = 0.0;       // normalized residual of the u_x weak form
  double en = 0.0;       // normalized residual of the measure balance law
  double nv_raw = 0.0;
  double en_raw = 0.0;
  double nv_scale = 0.0;  // sum of absolute term integrals
  double en_scale = 0.0;
};

/// Streaming space-time quadrature of both weak forms. Each snapshot's
/// spatial integral is taken in label space through dx = cos^k(v/2) xi dY
/// with P, Q_x recomputed from the snapshot; snapshots are combined with the
/// trapezoid rule in time.
class WeakFormAccumulator {
 public:
  WeakFormAccumulator(const ModelParams& params, double dy, const BumpTestFunction& phi);

  void add(const CharState& state);
  WeakResidual result() const;
  double first_time() const { return t_first_; }
  double last_time() const { return t_last_; }

 private:
  static constexpr int kTerms = 5;  // three u_x terms, two measure terms
  struct Slice {
    double t = 0.0;
    double term[kTerms] = {};
    double abs_term[kTerms] = {};
    double boundary_nv = 0.0;  // int u_x phi dx
    double boundary_en = 0.0;  // int phi dmu
  };
  Slice integrate(const CharState& state) const;

  ModelParams params_;
  double dy_;
  BumpTestFunction phi_;
  bool have_prev_ = false;
  Slice first_;
  Slice prev_;
  double sum_[kTerms] = {};
  double sum_abs_[kTerms] = {};
  double t_first_ = 0.0;
  double t_last_ = 0.0;
  double x_lo_ = 0.0;
  double x_hi_ = 0.0;
};

/// Weak-form residuals over a stored trajectory. Throws SupportExceedsWindow
/// when the bump's support leaves the covered times or positions.
WeakResidual weak_form_residual(const std::vector<CharState>& trajectory, const ModelParams& params, double dy,
                                const BumpTestFunction& phi);

}  // namespace charflow
