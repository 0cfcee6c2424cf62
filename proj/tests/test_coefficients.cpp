#include <doctest.h>

#include <cmath>
#include <vector>

#include "coefficients.hpp"
#include "rng.hpp"

using namespace slowfast;

TEST_CASE("mixing margin is enforced at construction") {
  CHECK_NOTHROW(LinearFamily(9.0, 1.0, 0.0, 1.0));
  CHECK_THROWS_AS(LinearFamily(10.0, 1.0, 0.0, 1.0), std::invalid_argument);
  CHECK_NOTHROW(BoundedFamily(9.0, 1.0, 1.0, 5.0, 0.0));
  CHECK_THROWS_AS(BoundedFamily(10.0, 1.0, 1.0, 5.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(BoundedFamily(-1.0, 1.0, 1.0, 5.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(BoundedFamily(1.0, 1.0, 1.0, 0.0, 0.0),
                  std::invalid_argument);
  const LinearFamily lin(1.0, 1.0, 0.0, 1.0);
  CHECK(lin.mixing_margin() == doctest::Approx(kLambda1 - 1.0));
}

TEST_CASE("linear family evaluates f and g pointwise") {
  const LinearFamily fam(1.0, 2.0, 3.0, 4.0);
  const double u[2] = {0.5, -1.0};
  const double y[2] = {2.0, 0.25};
  double out[2];
  fam.f(u, y, out, 2);
  CHECK(out[0] == doctest::Approx(3.0 * 0.5 + 4.0 * 2.0));
  CHECK(out[1] == doctest::Approx(-3.0 + 1.0));
  fam.g(u, y, out, 2);
  CHECK(out[0] == doctest::Approx(-2.0 + 2.0 * 0.5));
  CHECK(out[1] == doctest::Approx(-0.25 - 2.0));
}

TEST_CASE("linear closed forms hit the published anchors") {
  const LinearFamily fam(1.0, 1.0, 0.0, 1.0);
  const double l1 = kLambda1;
  CHECK(fam.fbar_coeff(l1) == doctest::Approx(1.0 / (1.0 + l1)).epsilon(1e-15));
  CHECK(fam.fbar_coeff(l1) == doctest::Approx(0.0919997).epsilon(1e-5));
  CHECK(fam.sigma_sq_coeff(l1, 1.0) ==
        doctest::Approx(1.0 / ((1.0 + l1) * (1.0 + l1))).epsilon(1e-15));
  CHECK(fam.sigma_sq_coeff(l1, 1.0) == doctest::Approx(0.008464).epsilon(1e-3));
  CHECK(fam.stationary_var(l1, 1.0) ==
        doctest::Approx(0.5 / (1.0 + l1)).epsilon(1e-15));
  CHECK(fam.psi_coeff(l1) == doctest::Approx(1.0 / (1.0 + l1)).epsilon(1e-15));
}

TEST_CASE("bounded family clamps, saturates and switches its name") {
  const BoundedFamily fam(1.5, 2.0, 0.7, 2.0, 0.0);
  CHECK(fam.name() == "bounded");
  const BoundedFamily holder(1.5, 2.0, 0.7, 2.0, 0.5);
  CHECK(holder.name() == "bounded-holder");
  const double u[1] = {0.3};
  const double y_big[1] = {10.0};
  double out[1];
  fam.g(u, y_big, out, 1);
  // Clamp at +clip: g = tanh(b u) - a clip.
  CHECK(out[0] == doctest::Approx(std::tanh(0.6) - 1.5 * 2.0).epsilon(1e-12));
  fam.f(u, y_big, out, 1);
  CHECK(out[0] ==
        doctest::Approx(std::sin(0.3) + 0.7 * std::tanh(10.0)).epsilon(1e-12));
  // f stays bounded by 1 + |d|.
  for (double uu : {-50.0, 0.0, 50.0}) {
    for (double yy : {-50.0, 0.0, 50.0}) {
      fam.f(&uu, &yy, out, 1);
      CHECK(std::abs(out[0]) <= 1.0 + 0.7 + 1e-12);
    }
  }
  // Hoelder variant adds kappa sqrt(min(|y|, 1)).
  const double y_small[1] = {0.25};
  double base[1];
  fam.g(u, y_small, base, 1);
  holder.g(u, y_small, out, 1);
  CHECK(out[0] == doctest::Approx(base[0] + 0.5 * 0.5).epsilon(1e-12));
}

TEST_CASE("nemytskii image of a linear map is the exact linear combination") {
  const BasisPtr b = make_basis(10);
  const LinearFamily fam(1.0, 1.0, 0.5, 2.0);
  Rng rng(31);
  std::vector<double> uc(10), yc(10);
  for (int k = 0; k < 10; ++k) {
    uc[k] = rng.normal();
    yc[k] = rng.normal();
  }
  const SpectralField u(b, uc);
  const SpectralField y(b, yc);
  const SpectralField img = apply_F(fam, u, y);
  for (int k = 0; k < 10; ++k)
    CHECK(img.c[k] ==
          doctest::Approx(0.5 * uc[k] + 2.0 * yc[k]).epsilon(1e-11));
}

TEST_CASE("field overloads reject mismatched bases") {
  const BasisPtr b1 = make_basis(4);
  const BasisPtr b2 = make_basis(5);
  const LinearFamily fam(1.0, 1.0, 0.0, 1.0);
  const SpectralField u(b1);
  const SpectralField y(b2);
  CHECK_THROWS_AS(apply_F(fam, u, y), std::invalid_argument);
}
