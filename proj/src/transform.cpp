#include "charflow/transform.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace charflow {

namespace {

constexpr double kMaxSlope = 1e12;

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 4> kGaussNodes = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                               0.9602898564975363};
constexpr std::array<double, 4> kGaussWeights = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                                 0.1012285362903763};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double sign_of(double d, bool right) {
  if (d > 0.0) return 1.0;
  if (d < 0.0) return -1.0;
  return right ? 1.0 : -1.0;
}

void validate(const InitialData& data) {
  std::visit(overloaded{
                 [](const ZeroData&) {},
                 [](const GaussianBump& g) {
                   if (!std::isfinite(g.amplitude) || !std::isfinite(g.center) || !(g.width > 0.0)) {
                     throw Error(ErrorCode::InvalidInitialData, "gaussian needs finite amplitude and width > 0");
                   }
                 },
                 [](const PeakonSum& p) {
                   if (p.terms.empty()) throw Error(ErrorCode::InvalidInitialData, "peakon sum has no terms");
                   for (const auto& t : p.terms) {
                     if (t.amplitude == 0.0 || !std::isfinite(t.amplitude) || !std::isfinite(t.center)) {
                       throw Error(ErrorCode::InvalidInitialData, "peakon amplitudes must be finite and nonzero");
                     }
                   }
                 },
                 [](const Tabulated& t) {
                   if (t.x.size() != t.u.size() || t.x.size() < 4) {
                     throw Error(ErrorCode::InvalidInitialData, "tabulated data need >= 4 (x, u) pairs");
                   }
                   for (Eigen::Index i = 0; i < t.x.size(); ++i) {
                     if (!std::isfinite(t.x[i]) || !std::isfinite(t.u[i])) {
                       throw Error(ErrorCode::NonFiniteDerivative, "tabulated data contain NaN/Inf", i);
                     }
                     if (i > 0 && !(t.x[i] > t.x[i - 1])) {
                       throw Error(ErrorCode::InvalidInitialData, "tabulated x must be strictly increasing", i);
                     }
                   }
                 },
             },
             data);
}

// Natural cubic spline second derivatives (tridiagonal solve).
ArrayXd natural_spline(const ArrayXd& x, const ArrayXd& y) {
  const Eigen::Index n = x.size();
  ArrayXd m = ArrayXd::Zero(n);
  ArrayXd c(n), d(n);
  c[0] = 0.0;
  d[0] = 0.0;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    const double rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    const double diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
    c[i] = h1 / diag;
    d[i] = (rhs - h0 * d[i - 1]) / diag;
  }
  for (Eigen::Index i = n - 2; i >= 1; --i) m[i] = d[i] - c[i] * m[i + 1];
  return m;
}

// Fourth-order first derivative of uniformly spaced samples f[0..n).
void fd4(const double* f, int n, double h, double* out) {
  for (int i = 0; i < n; ++i) {
    if (i >= 2 && i + 2 < n) {
      out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    } else if (i == 0) {
      out[i] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    } else if (i == 1) {
      out[i] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    } else if (i == n - 2) {
      out[i] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * h);
    } else {
      out[i] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / (12.0 * h);
    }
  }
}

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

bool analytic_derivative_available(const InitialData& data) {
  return !std::holds_alternative<Tabulated>(data);
}

std::vector<double> corner_points(const InitialData& data) {
  std::vector<double> out;
  if (const auto* p = std::get_if<PeakonSum>(&data)) {
    for (const auto& t : p->terms) out.push_back(t.center);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

Tabulated read_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open initial-data file '" + path + "'");
  std::vector<double> xs, us;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    double x = 0.0, u = 0.0;
    const bool ok = comma != std::string::npos && parse_double(std::string_view(line).substr(0, comma), x) &&
                    parse_double(std::string_view(line).substr(comma + 1), u);
    if (!ok) {
      if (xs.empty() && line_no == 1) continue;  // header
      std::ostringstream msg;
      msg << path << ":" << line_no << ": expected two comma-separated numbers";
      throw Error(ErrorCode::InvalidInitialData, msg.str());
    }
    xs.push_back(x);
    us.push_back(u);
  }
  Tabulated t;
  t.x = Eigen::Map<const ArrayXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  t.u = Eigen::Map<const ArrayXd>(us.data(), static_cast<Eigen::Index>(us.size()));
  validate(t);
  return t;
}

// ---------------------------------------------------------------------------

InitialProfile::InitialProfile(InitialData data) : data_(std::move(data)) {
  validate(data_);
  if (const auto* t = std::get_if<Tabulated>(&data_)) {
    tabulated_ = true;
    m_ = natural_spline(t->x, t->u);
  }
}

double InitialProfile::u0(double x) const {
  return std::visit(overloaded{
                        [](const ZeroData&) { return 0.0; },
                        [&](const GaussianBump& g) {
                          const double s = (x - g.center) / g.width;
                          return g.amplitude * std::exp(-s * s);
                        },
                        [&](const PeakonSum& p) {
                          double u = 0.0;
                          for (const auto& t : p.terms) u += t.amplitude * std::exp(-std::abs(x - t.center));
                          return u;
                        },
                        [&](const Tabulated& t) {
                          const Eigen::Index n = t.x.size();
                          if (x < t.x[0] || x > t.x[n - 1]) return 0.0;
                          const auto* it = std::upper_bound(t.x.data(), t.x.data() + n, x);
                          const Eigen::Index i = std::clamp<Eigen::Index>(it - t.x.data() - 1, 0, n - 2);
                          const double h = t.x[i + 1] - t.x[i];
                          const double a = (t.x[i + 1] - x) / h;
                          const double b = (x - t.x[i]) / h;
                          return a * t.u[i] + b * t.u[i + 1] +
                                 ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
                        },
                    },
                    data_);
}

double InitialProfile::slope_at(double x, bool right) const {
  return std::visit(overloaded{
                        [](const ZeroData&) { return 0.0; },
                        [&](const GaussianBump& g) {
                          const double s = (x - g.center) / g.width;
                          return -2.0 * s / g.width * g.amplitude * std::exp(-s * s);
                        },
                        [&](const PeakonSum& p) {
                          double d = 0.0;
                          for (const auto& t : p.terms) {
                            d -= t.amplitude * sign_of(x - t.center, right) * std::exp(-std::abs(x - t.center));
                          }
                          return d;
                        },
                        [&](const Tabulated& t) {
                          const Eigen::Index n = t.x.size();
                          if (x < t.x[0] || x > t.x[n - 1]) return 0.0;
                          const auto* it = std::upper_bound(t.x.data(), t.x.data() + n, x);
                          const Eigen::Index i = std::clamp<Eigen::Index>(it - t.x.data() - 1, 0, n - 2);
                          const double h = t.x[i + 1] - t.x[i];
                          const double a = (t.x[i + 1] - x) / h;
                          const double b = (x - t.x[i]) / h;
                          return (t.u[i + 1] - t.u[i]) / h - (3.0 * a * a - 1.0) * h / 6.0 * m_[i] +
                                 (3.0 * b * b - 1.0) * h / 6.0 * m_[i + 1];
                        },
                    },
                    data_);
}

double InitialProfile::slope_left(double x) const { return slope_at(x, false); }
double InitialProfile::slope_right(double x) const { return slope_at(x, true); }

// ---------------------------------------------------------------------------

LabelMap::LabelMap(InitialProfile profile, const ModelParams& params, double x_lo, double x_hi, int min_points)
    : profile_(std::move(profile)), k_(params.k) {
  if (!(x_hi > x_lo)) throw Error(ErrorCode::DomainTooSmall, "label table needs x_hi > x_lo");
  const double tol = 1e-12 * std::max(1.0, x_hi - x_lo);
  std::vector<double> breaks = {x_lo, x_hi};
  for (double b : {-params.L, 0.0, params.L}) breaks.push_back(b);
  for (double c : corner_points(profile_.data())) breaks.push_back(c);
  std::erase_if(breaks, [&](double b) { return b < x_lo || b > x_hi; });
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(), [&](double a, double b) { return b - a <= tol; }),
               breaks.end());

  const int target = std::max(min_points, 64);
  const double span = x_hi - x_lo;
  std::vector<int> cells(breaks.size() - 1);
  int total = 1;
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
    cells[j] = std::max(8, static_cast<int>(std::ceil(target * (breaks[j + 1] - breaks[j]) / span)));
    total += cells[j];
  }

  xs_.resize(total);
  dyl_.resize(total);
  dyr_.resize(total);
  ys_.resize(total);
  ArrayXd slopel(total), sloper(total);
  std::vector<int> panel_start;
  int pos = 0;
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
    panel_start.push_back(pos);
    const double h = (breaks[j + 1] - breaks[j]) / cells[j];
    for (int c = 0; c < cells[j]; ++c) xs_[pos++] = breaks[j] + c * h;
  }
  panel_start.push_back(pos);
  xs_[pos] = breaks.back();

  if (profile_.tabulated()) {
    ArrayXd us(total);
    for (int i = 0; i < total; ++i) us[i] = profile_.u0(xs_[i]);
    fd_slope_.resize(total);
    for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
      const int a = panel_start[j];
      const int n = panel_start[j + 1] - a + 1;
      const double h = (xs_[a + n - 1] - xs_[a]) / (n - 1);
      ArrayXd d(n);
      fd4(us.data() + a, n, h, d.data());
      // Both panels produce a slope at a shared breakpoint; they agree to
      // the scheme's order, so the right panel's value is kept.
      for (int i = 0; i < n; ++i) fd_slope_[a + i] = d[i];
    }
    slopel = fd_slope_;
    sloper = fd_slope_;
  } else {
    for (int i = 0; i < total; ++i) {
      slopel[i] = profile_.slope_left(xs_[i]);
      sloper[i] = profile_.slope_right(xs_[i]);
    }
  }
  for (int i = 0; i < total; ++i) {
    if (!std::isfinite(slopel[i]) || !std::isfinite(sloper[i])) {
      throw Error(ErrorCode::NonFiniteDerivative, "initial slope is not finite", i);
    }
    if (std::max(std::abs(slopel[i]), std::abs(sloper[i])) > kMaxSlope) {
      throw Error(ErrorCode::UnboundedInitialSlope, "initial slope exceeds 1e12", i);
    }
    dyl_[i] = density(slopel[i]);
    dyr_[i] = density(sloper[i]);
  }

  ys_[0] = 0.0;
  for (int i = 0; i + 1 < total; ++i) {
    const double a = xs_[i];
    const double b = xs_[i + 1];
    double inc = 0.0;
    if (profile_.tabulated()) {
      inc = 0.5 * (b - a) * (dyr_[i] + dyl_[i + 1]);
    } else {
      const double mid = 0.5 * (a + b);
      const double half = 0.5 * (b - a);
      for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
        const double off = half * kGaussNodes[q];
        inc += kGaussWeights[q] * (density(profile_.slope_left(mid - off)) + density(profile_.slope_left(mid + off)));
      }
      inc *= half;
    }
    ys_[i + 1] = ys_[i] + inc;
  }
  if (x_lo <= 0.0 && x_hi >= 0.0) {
    const auto* it = std::lower_bound(xs_.data(), xs_.data() + total, -tol);
    ys_ -= ys_[it - xs_.data()];
  } else {
    throw Error(ErrorCode::DomainTooSmall, "label table must contain x = 0");
  }
}

double LabelMap::density(double slope) const { return ipow(1.0 + slope * slope, k_ / 2); }

int LabelMap::cell_of(double x) const {
  const Eigen::Index n = xs_.size();
  if (x < xs_[0] || x > xs_[n - 1]) {
    std::ostringstream msg;
    msg << "x = " << x << " outside label table [" << xs_[0] << ", " << xs_[n - 1] << "]";
    throw Error(ErrorCode::SampleOutsideDomain, msg.str());
  }
  const auto* it = std::upper_bound(xs_.data(), xs_.data() + n, x);
  return static_cast<int>(std::clamp<Eigen::Index>(it - xs_.data() - 1, 0, n - 2));
}

double LabelMap::hermite(int i, double x) const {
  const double h = xs_[i + 1] - xs_[i];
  const double t = (x - xs_[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * ys_[i] + (t3 - 2 * t2 + t) * h * dyr_[i] + (-2 * t3 + 3 * t2) * ys_[i + 1] +
         (t3 - t2) * h * dyl_[i + 1];
}

double LabelMap::hermite_slope(int i, double x) const {
  const double h = xs_[i + 1] - xs_[i];
  const double t = (x - xs_[i]) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * ys_[i] + (-6 * t2 + 6 * t) * ys_[i + 1]) / h + (3 * t2 - 4 * t + 1) * dyr_[i] +
         (3 * t2 - 2 * t) * dyl_[i + 1];
}

double LabelMap::Y(double x) const {
  const int i = cell_of(x);
  return hermite(i, x);
}

double LabelMap::x_of(double y) const {
  const Eigen::Index n = ys_.size();
  if (y < ys_[0] || y > ys_[n - 1]) {
    std::ostringstream msg;
    msg << "Y = " << y << " outside label table [" << ys_[0] << ", " << ys_[n - 1] << "]";
    throw Error(ErrorCode::SampleOutsideDomain, msg.str());
  }
  const auto* it = std::upper_bound(ys_.data(), ys_.data() + n, y);
  const int i = static_cast<int>(std::clamp<Eigen::Index>(it - ys_.data() - 1, 0, n - 2));
  if (y == ys_[i]) return xs_[i];
  double lo = xs_[i], hi = xs_[i + 1];
  double x = lo + (hi - lo) * (y - ys_[i]) / (ys_[i + 1] - ys_[i]);
  for (int iter = 0; iter < 60; ++iter) {
    const double f = hermite(i, x) - y;
    if (f > 0.0) hi = x; else lo = x;
    const double d = hermite_slope(i, x);
    double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4e-16 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

double LabelMap::slope_left(double x) const {
  if (!profile_.tabulated()) return profile_.slope_left(x);
  // The table's centered stencil, evaluated at x itself on the spline.
  const int i = cell_of(x);
  const double h = xs_[i + 1] - xs_[i];
  const auto& u = profile_;
  return (u.u0(x - 2 * h) - 8.0 * u.u0(x - h) + 8.0 * u.u0(x + h) - u.u0(x + 2 * h)) / (12.0 * h);
}

double LabelMap::slope_right(double x) const {
  if (!profile_.tabulated()) return profile_.slope_right(x);
  return slope_left(x);
}

// ---------------------------------------------------------------------------

LabelMap cumulative_label(const InitialData& data, const ModelParams& params, int min_points) {
  return LabelMap(InitialProfile(data), params, -params.L, params.L, std::max(min_points, 8 * params.N));
}

InitialState initialize_state(const InitialData& data, const ModelParams& params) {
  const int n = params.N;
  InitialProfile profile(data);
  if (const auto* t = std::get_if<Tabulated>(&data)) {
    if (t->x[0] > -params.L || t->x[t->x.size() - 1] < params.L) {
      throw Error(ErrorCode::InvalidInitialData, "tabulated data must cover [-L, L]");
    }
    const double edge = std::max(std::abs(profile.u0(-params.L)), std::abs(profile.u0(params.L)));
    if (edge > 1e-12) {
      std::ostringstream msg;
      msg << "tabulated u0 must decay below 1e-12 at x = +-L (found " << edge << "); increase L";
      throw Error(ErrorCode::InvalidInitialData, msg.str());
    }
  }
  std::vector<double> corners;
  for (double c : corner_points(data)) {
    if (c > -params.L && c < params.L) corners.push_back(c);
  }

  InitialState out;
  double y0 = 0.0, dy = 0.0;
  std::vector<int> corner_nodes;
  auto build = [&](double ext) { return LabelMap(profile, params, -params.L - ext, params.L + ext, 8 * n); };
  LabelMap map = build(0.0);
  out.Y_minus_L = map.Y(-params.L);
  out.Y_plus_L = map.Y(params.L);
  const double range = out.Y_plus_L - out.Y_minus_L;

  if (corners.empty()) {
    y0 = out.Y_minus_L;
    dy = range / (n - 1);
  } else {
    // Align the grid on the corners. The label density is at least 1, so an
    // extension of the x table by the Y overhang covers the outer nodes.
    const double h0 = range / (n - 3);
    auto align = [&](const LabelMap& m_map) {
      const double yc1 = m_map.Y(corners.front());
      dy = range / (n - 2);
      if (corners.size() >= 2) {
        const double yc2 = m_map.Y(corners[1]);
        const int m = static_cast<int>(std::floor((yc2 - yc1) / h0));
        if (m >= 1) dy = (yc2 - yc1) / m;
      }
      const double cells_left = std::ceil((yc1 - out.Y_minus_L) / dy - 1e-9);
      y0 = yc1 - cells_left * dy;
    };
    align(map);
    const double overhang = std::max(out.Y_minus_L - y0, y0 + (n - 1) * dy - out.Y_plus_L);
    map = build(overhang + 2.0 * dy);
    align(map);
  }

  out.grid.y_min = y0;
  out.grid.dy = dy;
  out.grid.nodes.resize(n);
  for (int i = 0; i < n; ++i) out.grid.nodes[i] = y0 + i * dy;
  out.grid.y_max = out.grid.nodes[n - 1];

  CharState& s = out.state;
  s.T = 0.0;
  s.u.resize(n);
  s.v.resize(n);
  s.xi = ArrayXd::Ones(n);
  s.x.resize(n);
  const double corner_tol = 1e-9 * dy;
  for (int i = 0; i < n; ++i) {
    double x = map.x_of(out.grid.nodes[i]);
    const auto hit = std::find_if(corners.begin(), corners.end(), [&](double c) {
      return std::abs(map.Y(c) - out.grid.nodes[i]) <= corner_tol;
    });
    const bool on_corner = hit != corners.end();
    if (on_corner) x = *hit;
    s.x[i] = x;
    s.u[i] = profile.u0(x);
    s.v[i] = 2.0 * std::atan(map.slope_left(x));
    if (on_corner) s.splits.push_back({i, 2.0 * std::atan(map.slope_right(x)), 1.0});
  }
  return out;
}

}  // namespace charflow
