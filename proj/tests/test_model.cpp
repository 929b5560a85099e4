#include <cmath>
#include <numbers>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "charflow/model.hpp"
#include "doctest.h"

using namespace charflow;
using Big = boost::multiprecision::cpp_bin_float_50;

TEST_CASE("k = 2(lambda + 1)") {
  CHECK(validate_params({0, 20, 64}).k == 2);
  CHECK(validate_params({1, 20, 64}).k == 4);
  CHECK(validate_params({3, 20, 64}).k == 8);
}

TEST_CASE("parameter validation errors") {
  auto code_of = [](RawParams r) {
    try {
      validate_params(r);
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("no error");
    return ErrorCode::IoError;
  };
  CHECK(code_of({-1, 20, 64}) == ErrorCode::NegativeLambda);
  CHECK(code_of({0.5, 20, 64}) == ErrorCode::NonIntegerLambda);
  CHECK(code_of({0, 0, 64}) == ErrorCode::DomainTooSmall);
  CHECK(code_of({0, -3, 64}) == ErrorCode::DomainTooSmall);
  CHECK(code_of({0, 20, 8}) == ErrorCode::GridTooCoarse);
  CHECK(code_of({0, 20, 100.5}) == ErrorCode::GridTooCoarse);
}

TEST_CASE("trig_powers special angles") {
  const auto z = trig_powers(0.0, 1);
  CHECK(z.cos_half == 1.0);
  CHECK(z.sin_half == 0.0);
  CHECK(z.cos_k == 1.0);
  CHECK(z.sin_k == 0.0);

  for (int lambda = 0; lambda <= 4; ++lambda) {
    const auto c = trig_powers(std::numbers::pi, lambda);
    CHECK(std::abs(c.cos_half) < 1e-16);
    CHECK(c.cos_k < 1e-30);
    CHECK(c.sin_half == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("trig_powers against 50-digit evaluation") {
  const Big pi = boost::math::constants::pi<Big>();
  for (int lambda = 0; lambda <= 3; ++lambda) {
    for (double frac : {0.5, 0.25, 0.9, -0.7, 1.3}) {
      const double v = frac * std::numbers::pi;
      const Big h = Big(frac) * pi / 2;
      const Big s = sin(h), c = cos(h);
      const int k = 2 * (lambda + 1);
      const auto t = trig_powers(v, lambda);
      auto near = [](double got, const Big& want) {
        const double w = static_cast<double>(want);
        CHECK(std::abs(got - w) <= 4e-16 * std::max(1.0, std::abs(w)));
      };
      near(t.cos_k, pow(c, k));
      near(t.sin_k, pow(s, k));
      near(t.sin2_cosk2, s * s * pow(c, k - 2));
      near(t.sin3_cosk3, lambda == 0 ? Big(0) : Big(pow(s, 3) * pow(c, k - 3)));
      near(t.sink1_cos, pow(s, k - 1) * c);
      near(t.half_sin_v, s * c);
    }
  }
}

TEST_CASE("trig_powers identities over random angles") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(-40.0, 40.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = angle(rng);
    const int lambda = i % 9;
    const auto t = trig_powers(v, lambda);
    CHECK(std::abs(t.sin_half * t.sin_half + t.cos2 - 1.0) <= 1e-15);
    const double expect = std::pow(t.cos2, lambda + 1);
    CHECK(std::abs(t.cos_k - expect) <= 1e-14 * std::max(expect, 1e-300));
    CHECK(t.cos_k >= 0.0);
    CHECK(t.sin_k >= 0.0);
  }
}

TEST_CASE("make_grid") {
  const auto g = make_grid(-1.0, 1.0, 5);
  CHECK(g.dy == 0.5);
  CHECK(g.nodes[2] == 0.0);
  CHECK(g.y_max == 1.0);
  CHECK_THROWS_AS(make_grid(1.0, 1.0, 5), Error);
}
