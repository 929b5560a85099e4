#include <cmath>
#include <random>

#include "charflow/nonlocal.hpp"
#include "charflow/transform.hpp"
#include "doctest.h"

using namespace charflow;

namespace {

CharState random_state(int n, int lambda, std::mt19937_64& rng, bool with_splits) {
  std::uniform_real_distribution<double> U(-1.0, 1.0), V(-3.0, 3.0), Xi(0.2, 2.0);
  CharState s;
  s.u.resize(n);
  s.v.resize(n);
  s.xi.resize(n);
  s.x = ArrayXd::LinSpaced(n, -5.0, 5.0);
  for (int i = 0; i < n; ++i) {
    s.u[i] = U(rng);
    s.v[i] = V(rng);
    s.xi[i] = Xi(rng);
  }
  if (with_splits) {
    s.splits.push_back({n / 3, V(rng), Xi(rng)});
    s.splits.push_back({2 * n / 3, V(rng), Xi(rng)});
  }
  (void)lambda;
  return s;
}

double rel_diff(const ArrayXd& a, const ArrayXd& b) {
  const double scale = std::max(1.0, b.abs().maxCoeff());
  return (a - b).abs().maxCoeff() / scale;
}

CharState constant_state(int n, double c) {
  CharState s;
  s.u = ArrayXd::Constant(n, c);
  s.v = ArrayXd::Zero(n);
  s.xi = ArrayXd::Ones(n);
  s.x = ArrayXd::LinSpaced(n, -30.0, 30.0);
  return s;
}

}  // namespace

TEST_CASE("fast sweeps agree with the direct double sum") {
  std::mt19937_64 rng(11);
  for (int lambda : {0, 1, 2}) {
    const ModelParams p{lambda, 2 * (lambda + 1), 5.0, 257};
    for (bool splits : {false, true}) {
      for (int trial = 0; trial < 5; ++trial) {
        const auto s = random_state(257, lambda, rng, splits);
        const auto fast = eval_nonlocal(s, p, 0.04, false);
        const auto naive = eval_nonlocal(s, p, 0.04, true);
        CHECK(rel_diff(fast.P, naive.P) < 1e-12);
        CHECK(rel_diff(fast.Px, naive.Px) < 1e-12);
        CHECK(rel_diff(fast.Q, naive.Q) < 1e-12);
        CHECK(rel_diff(fast.Qx, naive.Qx) < 1e-12);
        const auto comp = eval_nonlocal(s, p, 0.04, false, NonlocalOptions{true, true});
        CHECK(rel_diff(comp.P, naive.P) < 1e-12);
      }
    }
  }
}

TEST_CASE("lambda = 0 gives Q = Qx = 0 exactly") {
  std::mt19937_64 rng(3);
  const ModelParams p{0, 2, 5.0, 128};
  const auto s = random_state(128, 0, rng, true);
  const auto f = eval_nonlocal(s, p, 0.05);
  CHECK(f.Q.abs().maxCoeff() == 0.0);
  CHECK(f.Qx.abs().maxCoeff() == 0.0);
}

TEST_CASE("zero sources give zero fields") {
  for (int lambda : {0, 1, 3}) {
    const ModelParams p{lambda, 2 * (lambda + 1), 10.0, 200};
    const auto init = initialize_state(ZeroData{}, p);
    const auto f = eval_nonlocal(init.state, p, init.grid.dy);
    CHECK(f.P.abs().maxCoeff() == 0.0);
    CHECK(f.Px.abs().maxCoeff() == 0.0);
    CHECK(f.Q.abs().maxCoeff() == 0.0);
    CHECK(f.Qx.abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("flat angle gives X = Y - y_min exactly") {
  const ModelParams p{1, 4, 10.0, 333};
  const auto s = constant_state(333, 0.3);
  const double dy = 20.0 / 332;
  const auto m = metric_profile(s, p, dy);
  for (int i = 0; i < 333; ++i) CHECK(m.X[i] == doctest::Approx(i * dy).epsilon(1e-14));
}

TEST_CASE("constant profile against the closed form") {
  // The scheme omits end-point corrections (sources decay at +-L in real
  // runs), so compare away from the ends.
  for (int lambda : {0, 1, 2}) {
    const ModelParams p{lambda, 2 * (lambda + 1), 30.0, 4097};
    const double c = 0.7;
    const auto s = constant_state(4097, c);
    const double dy = 60.0 / 4096;
    const auto f = eval_nonlocal(s, p, dy);
    const double amp = std::pow(c, lambda + 2) / 2.0;
    double err = 0.0, err_x = 0.0;
    for (int i = 0; i < 4097; ++i) {
      const double x = -30.0 + i * dy;
      if (std::abs(x) > 10.0) continue;
      const double l = std::exp(-(x + 30.0)), r = std::exp(-(30.0 - x));
      err = std::max(err, std::abs(f.P[i] - amp * (2.0 - l - r)));
      err_x = std::max(err_x, std::abs(f.Px[i] - amp * (l - r)));
    }
    CHECK(err < 1e-9);
    CHECK(err_x < 1e-9);
    CHECK(f.Q.abs().maxCoeff() == 0.0);  // v = 0 makes the Q source vanish
  }
}

TEST_CASE("single source node reproduces the kernel shape") {
  const int n = 401;
  const double dy = 0.05;
  const ModelParams p{0, 2, 10.0, n};
  CharState s;
  s.u = ArrayXd::Zero(n);
  s.v = ArrayXd::Zero(n);
  s.xi = ArrayXd::Ones(n);
  s.x = ArrayXd::LinSpaced(n, -10.0, 10.0);
  const auto m = metric_profile(s, p, dy, false);
  IntegrandPair a;
  a.aP = ArrayXd::Zero(n);
  a.aP[200] = 1.0;
  a.aP_right = a.aP;
  a.aQ = ArrayXd::Zero(n);
  a.aQ_right = a.aQ;
  const std::vector<char> split(n, 0);
  const auto f = eval_nonlocal_fast(m, a, split, dy, 0, NonlocalOptions{false, false});
  // The node carries mass dy/2 in each adjacent panel; P = (1/2) int e^-|x-y| a.
  for (int i : {0, 50, 199, 201, 300, 400}) {
    const double d = std::abs(i - 200) * dy;
    CHECK(f.P[i] == doctest::Approx(dy / 2.0 * std::exp(-d)).epsilon(1e-13));
    CHECK(f.Px[i] == doctest::Approx((i < 200 ? 1 : -1) * dy / 2.0 * std::exp(-d)).epsilon(1e-13));
  }
  CHECK(f.P[200] == doctest::Approx(dy / 2.0).epsilon(1e-15));
  CHECK(std::abs(f.Px[200]) < 1e-16);
}

TEST_CASE("convolution kernel L1 norm") {
  CHECK(convolution_kernel_l1(1.0, 1.0, 1) == 17.0);
  CHECK(convolution_kernel_l1(0.0, 0.5, 0) == 8.0);
}

TEST_CASE("long double instantiation agrees with double") {
  std::mt19937_64 rng(5);
  const ModelParams p{1, 4, 5.0, 300};
  const auto s = random_state(300, 1, rng, true);
  const auto fd = eval_nonlocal(s, p, 0.03);
  const auto fl = eval_nonlocal(s.cast<long double>(), p, 0.03L);
  CHECK(rel_diff(fl.P.cast<double>(), fd.P) < 1e-13);
  CHECK(rel_diff(fl.Qx.cast<double>(), fd.Qx) < 1e-13);
}

TEST_CASE("oracle refuses large grids") {
  const ModelParams p{0, 2, 10.0, 9000};
  const auto s = constant_state(9000, 0.1);
  try {
    eval_nonlocal(s, p, 0.01, true);
    FAIL("expected GridTooLargeForOracle");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridTooLargeForOracle);
  }
}
