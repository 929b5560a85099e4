#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "charflow/model.hpp"

namespace charflow {

/// u0(x) = a exp(-((x - c) / w)^2)
struct GaussianBump {
  double amplitude = 1.0;
  double width = 1.0;
  double center = 0.0;
};

/// u0(x) = sum_i a_i exp(-|x - c_i|)
struct PeakonSum {
  struct Term {
    double amplitude = 1.0;
    double center = 0.0;
  };
  std::vector<Term> terms;
};

/// Samples of u0 on a strictly increasing abscissa, interpolated by a
/// natural cubic spline and zero outside the sampled range.
struct Tabulated {
  ArrayXd x;
  ArrayXd u;
};

struct ZeroData {};

using InitialData = std::variant<ZeroData, GaussianBump, PeakonSum, Tabulated>;

bool analytic_derivative_available(const InitialData& data);

/// Points where u0' jumps.
std::vector<double> corner_points(const InitialData& data);

/// Reads a two-column (x, u) CSV with an optional header line.
Tabulated read_tabulated_csv(const std::string& path);

/// Pointwise access to u0 and its one-sided slopes. Tabulated data are
/// splined once at construction; their slopes are the spline's.
class InitialProfile {
 public:
  explicit InitialProfile(InitialData data);

  double u0(double x) const;
  double slope_left(double x) const;
  double slope_right(double x) const;
  bool tabulated() const { return tabulated_; }
  const InitialData& data() const { return data_; }

 private:
  double slope_at(double x, bool right) const;

  InitialData data_;
  bool tabulated_ = false;
  ArrayXd m_;  // spline second derivatives
};

/// Dense monotone table of Y(x) = int_0^x (1 + u0'^2)^(k/2) dx on a fine,
/// piecewise uniform x grid whose breakpoints include every corner and 0.
/// Between table nodes Y is the cubic Hermite interpolant of the table.
class LabelMap {
 public:
  LabelMap(InitialProfile profile, const ModelParams& params, double x_lo, double x_hi, int min_points);

  double Y(double x) const;
  double x_of(double Y) const;

  /// One-sided slopes of u0. Analytic data are differentiated exactly;
  /// tabulated data use fourth-order centered differences with the local
  /// table spacing.
  double slope_left(double x) const;
  double slope_right(double x) const;
  double u0(double x) const { return profile_.u0(x); }

  const ArrayXd& x_table() const { return xs_; }
  const ArrayXd& y_table() const { return ys_; }
  const InitialProfile& profile() const { return profile_; }

 private:
  int cell_of(double x) const;
  double hermite(int i, double x) const;
  double hermite_slope(int i, double x) const;
  double density(double slope) const;

  InitialProfile profile_;
  int k_ = 2;
  ArrayXd xs_, ys_;
  ArrayXd dyl_, dyr_;  // dY/dx from the left and from the right at each node
  ArrayXd fd_slope_;   // tabulated data only
};

/// Y(x) as a standalone table, with x_quad_grid spanning [-L, L].
LabelMap cumulative_label(const InitialData& data, const ModelParams& params, int min_points = 0);

/// Result of mapping the initial data into characteristic coordinates.
struct InitialState {
  CharGrid grid;
  CharState state;
  double Y_minus_L = 0.0;  // Y(-L)
  double Y_plus_L = 0.0;   // Y(L)
};

/// Uniform Y grid with every corner of u0 inside [-L, L] placed on a node
/// when at most two corners are present. A node that lands on a corner
/// becomes a split node carrying both one-sided angles.
InitialState initialize_state(const InitialData& data, const ModelParams& params);

}  // namespace charflow
