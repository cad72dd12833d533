#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "diffrnn/activations.hpp"
#include "diffrnn/errors.hpp"
#include "diffrnn/rng.hpp"

using diffrnn::ActKind;
using diffrnn::DiffusedActivation;

namespace {

// Frozen 30-digit references for the erf primitive and the closed forms.
struct Reference {
  double x;
  double value;
};

constexpr double kErfReferences[][2] = {
    {0.25, 0.276326390168236932985068267765},
    {0.5, 0.520499877813046537682746653892},
    {1.0, 0.842700792949714869341220635083},
    {-1.25, -0.922900128256458230136523481197},
    {2.0, 0.995322265018952734162069256367},
    {3.5, 0.999999256901627658587254476316},
    {4.5, 0.999999999803383955845711252372},
    {0.0009765625, 0.00110193243007181470417125349612},
};

std::vector<DiffusedActivation> all_kinds() {
  return {DiffusedActivation::sign(), DiffusedActivation::erf(1.0), DiffusedActivation::tanh(),
          DiffusedActivation::relu()};
}

}  // namespace

TEST_SUITE_BEGIN("activations");

TEST_CASE("erf primitive is accurate to 1e-12") {
  for (const auto& ref : kErfReferences) {
    CHECK(std::abs(std::erf(ref[0]) - ref[1]) <= 1e-12);
    CHECK(std::abs(std::erf(-ref[0]) + ref[1]) <= 1e-12);
  }
}

TEST_CASE("smoothed values match frozen closed-form references") {
  const auto erf1 = DiffusedActivation::erf(1.0);
  CHECK(erf1.diffused(0.0, 1.0) == 0.0);
  CHECK(erf1.diffused(1.0, 1.0) == doctest::Approx(0.585783821757474883).epsilon(1e-12));

  const auto relu = DiffusedActivation::relu();
  CHECK(relu.diffused(0.0, 1.0) ==
        doctest::Approx(0.398942280401432678).epsilon(1e-12));  // 1/sqrt(2 pi)
  CHECK(relu.diffused(1.0, 0.5) == doctest::Approx(1.00424535130841482).epsilon(1e-12));

  const auto sign = DiffusedActivation::sign();
  CHECK(sign.diffused(0.7, 0.6) == doctest::Approx(0.756654990851237486).epsilon(1e-12));

  const auto tanh = DiffusedActivation::tanh();
  CHECK(tanh.diffused(0.8, 1.0) == doctest::Approx(0.461290194917761704).epsilon(1e-12));
}

TEST_CASE("smoothed square matches frozen references") {
  const auto erf1 = DiffusedActivation::erf(1.0);
  CHECK(erf1.diffused_sq(0.0, 0.0) == 0.0);
  CHECK(erf1.diffused_sq(0.0, 1.0) ==
        doctest::Approx(0.468991713696042040).epsilon(1e-12));  // 1 - sqrt(pi/(pi+8))
  CHECK(erf1.diffused_sq(1.5, 0.5) == doctest::Approx(0.864223738448820838).epsilon(1e-12));
}

TEST_CASE("sigma = 0 reduces to the original function on a grid") {
  for (const auto& act : all_kinds()) {
    for (double x = -4.0; x <= 4.0; x += 1.0 / 16.0) {
      double original = 0.0;
      switch (act.kind()) {
        case ActKind::kSign: original = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); break;
        case ActKind::kErf: original = std::erf(x); break;
        case ActKind::kTanh: original = std::tanh(x); break;
        case ActKind::kRelu: original = x > 0 ? x : 0.0; break;
      }
      CHECK(std::abs(act.diffused(x, 0.0) - original) <= 1e-12);
    }
  }
}

TEST_CASE("domain errors on bad inputs") {
  const auto erf1 = DiffusedActivation::erf(1.0);
  CHECK_THROWS_AS(erf1.diffused(std::nan(""), 1.0), std::domain_error);
  CHECK_THROWS_AS(erf1.diffused(0.0, -1.0), std::domain_error);
  CHECK_THROWS_AS(erf1.diffused(0.0, std::nan("")), std::domain_error);
  CHECK_THROWS_AS(DiffusedActivation::erf(0.0), std::domain_error);
  CHECK_THROWS_AS(DiffusedActivation::sign().diffused_deriv(0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(DiffusedActivation::tanh().diffused_sq(0.3, 0.5),
                  diffrnn::UnsupportedOperationError);
  CHECK_THROWS_AS(DiffusedActivation::relu().diffused_sq_deriv(0.3, 0.5),
                  diffrnn::UnsupportedOperationError);
}

TEST_CASE("derivatives match frozen values and saturate at infinity") {
  const auto erf1 = DiffusedActivation::erf(1.0);
  CHECK(erf1.diffused_deriv(0.0, 0.0) ==
        doctest::Approx(1.12837916709551257).epsilon(1e-12));  // 2/sqrt(pi)
  CHECK(erf1.diffused_deriv(0.0, 1.0) ==
        doctest::Approx(0.651470015870559895).epsilon(1e-12));  // 2/(sqrt(3 pi))
  for (const auto& act : all_kinds()) {
    if (act.kind() == ActKind::kRelu) continue;
    CHECK(act.diffused_deriv(50.0, 0.5) == doctest::Approx(0.0).epsilon(1e-30));
  }
  // h2~ is even in x, so its slope at the origin vanishes.
  for (double sigma : {0.0, 0.3, 1.0, 2.5}) CHECK(erf1.diffused_sq_deriv(0.0, sigma) == 0.0);
}

TEST_CASE("derivatives agree with central finite differences") {
  diffrnn::Rng rng(2024);
  const double step = 1e-6;
  for (const auto& act : all_kinds()) {
    for (int trial = 0; trial < 60; ++trial) {
      const double x = rng.uniform(-2.5, 2.5);
      const double sigma = rng.uniform(0.05, 2.0);
      {
        const double fd = (act.diffused(x + step, sigma) - act.diffused(x - step, sigma)) /
                          (2.0 * step);
        const double an = act.diffused_deriv(x, sigma);
        CHECK(std::abs(an - fd) <= 1e-6 * std::max({1.0, std::abs(an), std::abs(fd)}));
      }
      if (act.has_sq_form()) {
        const double fd =
            (act.diffused_sq(x + step, sigma) - act.diffused_sq(x - step, sigma)) / (2.0 * step);
        const double an = act.diffused_sq_deriv(x, sigma);
        CHECK(std::abs(an - fd) <= 1e-6 * std::max({1.0, std::abs(an), std::abs(fd)}));
      }
    }
  }
}

TEST_CASE("odd symmetry, bounds, and monotonicity") {
  diffrnn::Rng rng(7);
  for (const auto& act : all_kinds()) {
    for (int trial = 0; trial < 200; ++trial) {
      const double x = rng.uniform(-4.0, 4.0);
      const double lo = rng.uniform(-4.0, 4.0);
      const double hi = lo + rng.uniform(0.0, 2.0);
      const double sigma = rng.uniform(0.0, 2.0);
      if (act.kind() != ActKind::kRelu) {
        CHECK(std::abs(act.diffused(x, sigma)) <= 1.0);
        CHECK(act.diffused(-x, sigma) == doctest::Approx(-act.diffused(x, sigma)).epsilon(1e-12));
      }
      CHECK(act.diffused(hi, sigma) >= act.diffused(lo, sigma) - 1e-12);
      if (act.has_sq_form()) {
        const double sq = act.diffused_sq(x, sigma);
        CHECK(sq >= -1e-12);
        CHECK(sq <= 1.0 + 1e-12);
        // variance nonnegativity up to the approximation slack
        CHECK(sq - std::pow(act.diffused(x, sigma), 2) >= -1e-3);
      }
    }
  }
}

TEST_CASE("origin slope strictly decreases with sigma") {
  const auto erf2 = DiffusedActivation::erf(2.0);
  double prev = erf2.diffused_deriv(0.0, 0.0);
  for (double sigma : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double slope = erf2.diffused_deriv(0.0, sigma);
    CHECK(slope < prev);
    prev = slope;
  }
}

TEST_CASE("tanh closed form stays within 0.02 of the true smoothing") {
  // the quadrature gives the true convolution to high accuracy
  for (double sigma : {0.25, 0.5, 1.0, 2.0}) {
    for (double x = -2.0; x <= 2.0; x += 0.125) {
      const double truth =
          diffrnn::quadrature_convolution(DiffusedActivation::tanh(), 1, x, sigma, 120);
      const double closed = DiffusedActivation::tanh().diffused(x, sigma);
      CHECK(std::abs(truth - closed) <= 0.02);
    }
  }
}

TEST_CASE("erf^2 surrogate stays within 0.012 on [-3, 3]") {
  double worst = 0.0;
  for (double x = -3.0; x <= 3.0; x += 1e-3) {
    const double exact = std::pow(std::erf(x), 2);
    const double approx = 1.0 - std::exp(-4.0 / std::numbers::pi * x * x);
    worst = std::max(worst, std::abs(exact - approx));
  }
  CHECK(worst <= 0.012);
}

TEST_CASE("monte-carlo oracle: determinism, symmetry, agreement") {
  const auto sign = DiffusedActivation::sign();
  const auto first = diffrnn::mc_convolution_oracle(sign, 1, 0.0, 1.0, 50000, 99);
  const auto second = diffrnn::mc_convolution_oracle(sign, 1, 0.0, 1.0, 50000, 99);
  CHECK(first.mean == second.mean);
  CHECK(first.std_err == second.std_err);
  CHECK(std::abs(first.mean) <= 3.0 * first.std_err);  // odd function at the origin

  CHECK_THROWS_AS(diffrnn::mc_convolution_oracle(sign, 1, 0.0, 0.0, 5000, 1), std::domain_error);
  CHECK_THROWS_AS(diffrnn::mc_convolution_oracle(sign, 1, 0.0, 1.0, 10, 1), std::domain_error);
  CHECK_THROWS_AS(diffrnn::mc_convolution_oracle(sign, 3, 0.0, 1.0, 5000, 1), std::domain_error);

  // spot agreement with the closed forms; the full grid runs in acceptance
  const long n = 200000;
  const double floor = 10.0 / static_cast<double>(n);  // zero-variance saturation allowance
  int cell = 0;
  for (const auto& act : all_kinds()) {
    if (act.kind() == ActKind::kTanh) continue;
    for (double sigma : {0.5, 1.0}) {
      for (double x : {-1.5, 0.25, 1.0}) {
        const auto est = diffrnn::mc_convolution_oracle(act, 1, x, sigma, n,
                                                        diffrnn::derive_seed(31337, cell++));
        CHECK(std::abs(est.mean - act.diffused(x, sigma)) <= 3.0 * est.std_err + floor);
      }
    }
  }
  // the tanh row is approximate: absolute tolerance instead
  const auto tanh_est = diffrnn::mc_convolution_oracle(DiffusedActivation::tanh(), 1, 0.8, 1.0,
                                                       1000000, 5);
  CHECK(std::abs(tanh_est.mean - DiffusedActivation::tanh().diffused(0.8, 1.0)) <= 0.02);
}

TEST_CASE("quadrature oracle agrees with exact closed forms") {
  const auto erf1 = DiffusedActivation::erf(1.0);
  for (double sigma : {0.3, 1.0}) {
    for (double x : {-1.0, 0.4, 2.0}) {
      CHECK(diffrnn::quadrature_convolution(erf1, 1, x, sigma) ==
            doctest::Approx(erf1.diffused(x, sigma)).epsilon(1e-10));
    }
  }
}

TEST_SUITE_END();
