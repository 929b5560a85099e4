#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "charflow/reconstruct.hpp"
#include "charflow/transform.hpp"
#include "doctest.h"

using namespace charflow;

namespace {

CharState zero_state(int n, double lo, double hi, double T = 0.0) {
  CharState s;
  s.T = T;
  s.u = ArrayXd::Zero(n);
  s.v = ArrayXd::Zero(n);
  s.xi = ArrayXd::Ones(n);
  s.x = ArrayXd::LinSpaced(n, lo, hi);
  return s;
}

}  // namespace

TEST_CASE("Holder estimator recovers known exponents") {
  for (double beta : {0.5, 0.75, 5.0 / 6.0}) {
    const double inner = 1e-4, window = 0.2;
    PhysicalSolution phys;
    phys.x = holder_samples(0.3, inner, window, 40);
    phys.u.resize(phys.x.size());
    for (Eigen::Index i = 0; i < phys.x.size(); ++i) {
      const double d = phys.x[i] - 0.3;
      phys.u[i] = 0.4 + (d < 0 ? -0.6 : 1.1) * std::pow(std::abs(d), beta);
    }
    const auto f = holder_exponent_estimate(phys, 0.3, window, inner / 2);
    CHECK(std::abs(f.exponent - beta) <= 0.01);
    CHECK(f.n_left == 40);
    CHECK(f.n_right == 40);
  }
}

TEST_CASE("Holder estimator needs samples on both sides") {
  PhysicalSolution phys;
  phys.x = ArrayXd::LinSpaced(50, 0.0, 0.2);
  phys.u = phys.x.sqrt();
  try {
    holder_exponent_estimate(phys, 0.0, 0.2, 1e-3);
    FAIL("expected InsufficientSamples");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientSamples);
  }
}

TEST_CASE("physical reconstruction at T = 0 reproduces the data") {
  const auto p = validate_params({1, 10, 2048});
  const GaussianBump g{0.8, 1.5, 0.5};
  const auto init = initialize_state(g, p);
  const ArrayXd xs = ArrayXd::LinSpaced(501, -9.0, 9.0);
  const auto phys = to_physical(init.state, p, xs);
  double eu = 0.0, eux = 0.0;
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const double z = (xs[i] - 0.5) / 1.5;
    const double u = 0.8 * std::exp(-z * z);
    eu = std::max(eu, std::abs(phys.u[i] - u));
    eux = std::max(eux, std::abs(phys.ux[i] - (-2.0 * z / 1.5 * u)));
    CHECK_FALSE(phys.singular[i]);
  }
  CHECK(eu < 1e-4);
  CHECK(eux < 1e-3);
  CHECK_THROWS_AS(to_physical(init.state, p, ArrayXd::Constant(1, 100.0)), Error);
}

TEST_CASE("flat panels return the left node and singular angles give NaN") {
  const ModelParams p{0, 2, 1.0, 4};
  CharState s = zero_state(4, 0.0, 3.0);
  s.x << 0.0, 1.0, 1.0, 2.0;
  s.u << 0.0, 1.0, 2.0, 3.0;
  s.v << 0.0, 0.0, std::numbers::pi, 0.0;
  ArrayXd xs(3);
  xs << 0.5, 1.0, 1.5;
  const auto phys = to_physical(s, p, xs);
  CHECK(phys.u[0] == doctest::Approx(0.5));
  CHECK(phys.u[1] == doctest::Approx(2.0));  // upper_bound lands past the collapsed panel
  CHECK(phys.u[2] == doctest::Approx(2.5));
  CHECK(std::isfinite(phys.ux[0]));
}

TEST_CASE("measure decomposition of a synthetic concentration") {
  const int n = 21;
  const double dy = 0.1;
  const ModelParams p{0, 2, 1.0, n};
  CharState s = zero_state(n, 0.0, 2.0);
  s.u.setConstant(0.25);
  // Nodes 8..12 collapse to one point with v = pi.
  for (int i = 8; i <= 12; ++i) {
    s.v[i] = std::numbers::pi;
    s.x[i] = 0.8;
  }
  s.v[7] = std::numbers::pi / 2;
  const auto d = measure_decompose(s, p, dy);
  REQUIRE(d.atoms.size() == 1);
  const auto& a = d.atoms[0];
  CHECK(a.first == 8);
  CHECK(a.last == 12);
  CHECK(a.x == doctest::Approx(0.8));
  CHECK(a.u_spread == 0.0);
  CHECK(a.mass == doctest::Approx(5 * dy).epsilon(1e-12));
  CHECK(d.ac_mass == doctest::Approx(dy * 0.5).epsilon(1e-12));
  CHECK(d.total == doctest::Approx(d.ac_mass + d.atom_mass()));
  CHECK(d.largest() == &d.atoms[0]);
}

TEST_CASE("absolutely continuous part matches u_x^k dx at T = 0") {
  const auto p = validate_params({0, 10, 4096});
  const GaussianBump g{1.0, 1.0, 0.0};
  const auto init = initialize_state(g, p);
  const auto d = measure_decompose(init.state, p, init.grid.dy);
  CHECK(d.atoms.empty());
  const ArrayXd xs = ArrayXd::LinSpaced(20001, -9.99, 9.99);
  const auto phys = to_physical(init.state, p, xs);
  const ArrayXd dens = ac_density(phys, p);
  const double h = xs[1] - xs[0];
  const double quad = h * (dens.sum() - 0.5 * (dens[0] + dens[dens.size() - 1]));
  const double oracle = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double x) { return 4.0 * x * x * std::exp(-2.0 * x * x); }, -10.0, 10.0, 15, 1e-14);
  CHECK(std::abs(d.total - oracle) < 1e-8);
  CHECK(std::abs(quad - oracle) < 1e-4);
}

TEST_CASE("cusp detection") {
  CharState s = zero_state(10, 0.0, 1.0);
  CHECK_THROWS_AS(find_cusp(s), Error);
  s.v[6] = std::numbers::pi - 1e-3;
  const auto c = find_cusp(s);
  CHECK(c.index == 6);
  CHECK(c.min_cos2 < 1e-6);
}

TEST_CASE("weak residual of the zero solution vanishes") {
  const ModelParams p{1, 4, 5.0, 101};
  std::vector<CharState> traj;
  for (int j = 0; j <= 10; ++j) traj.push_back(zero_state(101, -5.0, 5.0, 0.1 * j));
  const BumpTestFunction phi{0.5, 0.3, 0.0, 1.0};
  const auto r = weak_form_residual(traj, p, 0.1, phi);
  CHECK(r.nv == 0.0);
  CHECK(r.en == 0.0);
  CHECK(r.nv_raw == 0.0);
}

TEST_CASE("weak residual refuses a support outside the window") {
  const ModelParams p{0, 2, 5.0, 101};
  std::vector<CharState> traj;
  for (int j = 0; j <= 10; ++j) traj.push_back(zero_state(101, -5.0, 5.0, 0.1 * j));
  try {
    weak_form_residual(traj, p, 0.1, BumpTestFunction{0.9, 0.3, 0.0, 1.0});
    FAIL("expected SupportExceedsWindow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SupportExceedsWindow);
  }
  CHECK_THROWS_AS(weak_form_residual(traj, p, 0.1, BumpTestFunction{0.5, 0.3, 4.5, 1.0}), Error);
}

TEST_CASE("bump test function derivatives") {
  const BumpTestFunction phi{1.0, 0.5, 2.0, 0.7};
  const double t = 1.1, x = 2.3, h = 1e-6;
  CHECK(phi.dt(t, x) == doctest::Approx((phi.value(t + h, x) - phi.value(t - h, x)) / (2 * h)).epsilon(1e-7));
  CHECK(phi.dx(t, x) == doctest::Approx((phi.value(t, x + h) - phi.value(t, x - h)) / (2 * h)).epsilon(1e-7));
  CHECK(phi.value(1.6, 2.0) == 0.0);
}

TEST_CASE("Lipschitz check on a stationary trajectory") {
  const ModelParams p{0, 2, 5.0, 51};
  std::vector<CharState> traj;
  for (int j = 0; j < 4; ++j) traj.push_back(zero_state(51, -5.0, 5.0, 0.5 * j));
  const auto r = lipschitz_in_Lk_check(traj, p, 0.2);
  CHECK(r.max_ratio == 0.0);
  CHECK(r.ok);
  traj.resize(2);
  CHECK_THROWS_AS(lipschitz_in_Lk_check(traj, p, 0.2), Error);
}
