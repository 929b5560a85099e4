#include <cmath>

#include "charflow/evolve.hpp"
#include "charflow/reconstruct.hpp"
#include "doctest.h"

using namespace charflow;

TEST_CASE("zero data is a fixed point") {
  const auto p = validate_params({1, 10, 128});
  RunConfig cfg;
  cfg.dt = 1e-2;
  cfg.T_end = 0.5;
  const auto r = run(ZeroData{}, p, cfg);
  REQUIRE(r.ok());
  const auto& s = r.snapshots.back().state;
  CHECK(s.T == doctest::Approx(0.5));
  CHECK(s.u.abs().maxCoeff() == 0.0);
  CHECK(s.v.abs().maxCoeff() == 0.0);
  CHECK((s.xi == 1.0).all());
  CHECK((s.x - r.snapshots.front().state.x).abs().maxCoeff() == 0.0);
  for (const auto& rep : r.reports) CHECK(rep.E_lower == 0.0);
}

TEST_CASE("oversized time step is rejected with a suggested dt") {
  const auto p = validate_params({0, 10, 256});
  RunConfig cfg;
  cfg.dt = 5.0;
  cfg.T_end = 10.0;
  const auto r = run(GaussianBump{1.0, 1.0, 0.0}, p, cfg);
  REQUIRE_FALSE(r.ok());
  CHECK(r.failure->code() == ErrorCode::TimeStepTooLarge);
  CHECK(r.failure->hint() > 0.0);
  CHECK(r.failure->hint() < 5.0);
}

TEST_CASE("invalid run settings") {
  const auto p = validate_params({0, 10, 64});
  RunConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(run(ZeroData{}, p, cfg), Error);
}

TEST_CASE("Camassa-Holm peakon travels at its amplitude") {
  const auto p = validate_params({0, 32, 4096});
  RunConfig cfg;
  cfg.dt = 1e-3;
  cfg.T_end = 1.0;
  cfg.snapshot_every = 1000;
  cfg.check_every = 100;
  const auto r = run(PeakonSum{{{1.0, 0.0}}}, p, cfg);
  REQUIRE(r.ok());
  const auto& s = r.snapshots.back().state;
  REQUIRE(s.splits.size() == 1);
  const int c = s.splits[0].index;
  const double dx_eff = 64.0 / 4096;
  CHECK(std::abs(s.x[c] - 1.0) <= 2.0 * dx_eff);
  CHECK(std::abs(s.u[c] - 1.0) <= 1e-6);
  double err = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    if (std::abs(s.x[i]) > 30.0) continue;
    err = std::max(err, std::abs(s.u[i] - std::exp(-std::abs(s.x[i] - 1.0))));
  }
  CHECK(err <= 1e-3);
  CHECK(std::abs(r.reports.back().E_lower - r.E0) <= 1e-6 * r.E0);
}

TEST_CASE("RK4 is fourth order in time") {
  const auto p = validate_params({1, 10, 256});
  const auto init = initialize_state(GaussianBump{0.5, 2.0, 0.0}, p);
  const double dy = init.grid.dy;
  auto integrate = [&](double dt) {
    CharState s = init.state;
    const int n = static_cast<int>(std::lround(0.8 / dt));
    for (int i = 0; i < n; ++i) s = step_rk4(s, p, dy, dt);
    return s;
  };
  const auto a = integrate(0.04), b = integrate(0.02), c = integrate(0.01);
  const double e1 = (a.u - b.u).abs().maxCoeff() + (a.v - b.v).abs().maxCoeff();
  const double e2 = (b.u - c.u).abs().maxCoeff() + (b.v - c.v).abs().maxCoeff();
  const double order = std::log2(e1 / e2);
  CHECK(order > 3.7);
  CHECK(order < 4.3);
}

TEST_CASE("observer sees every accepted state") {
  const auto p = validate_params({0, 10, 128});
  RunConfig cfg;
  cfg.dt = 0.01;
  cfg.T_end = 0.1;
  int calls = 0;
  double last_T = -1.0;
  run(GaussianBump{0.3, 1.0, 0.0}, p, cfg, [&](const CharState& s, const NonlocalFields& f) {
    ++calls;
    CHECK(s.T > last_T);
    CHECK(f.P.size() == s.size());
    last_T = s.T;
  });
  CHECK(calls == 11);
  CHECK(last_T == doctest::Approx(0.1));
}
