#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "weylma/densities.hpp"
#include "weylma/util.hpp"

using weylma::DensityFn;
using weylma::DensitySpec;
using weylma::InvariantExpr;
using weylma::RootSystem;
using weylma::Rng;
using weylma::Vec;

namespace {

Vec v1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

DensitySpec a1_spec(double eps = 0.0) {
  return DensitySpec(RootSystem::catalog("A1"), InvariantExpr::zero(), eps);
}

}  // namespace

TEST_CASE("u expression grammar") {
  const InvariantExpr zero = InvariantExpr::parse("zero");
  CHECK(zero.is_zero());
  const InvariantExpr e = InvariantExpr::parse("0.5*r2 + 2*p2^2 - 1");
  CHECK(e.eval(2.0, 3.0) == doctest::Approx(0.5 * 2 + 2 * 9 - 1));
  const InvariantExpr nested = InvariantExpr::parse("(1 + r2)^3");
  CHECK(nested.eval(1.0, 0.0) == doctest::Approx(8.0));
  CHECK(InvariantExpr::parse("-r2").eval(2.0, 0.0) == doctest::Approx(-2.0));
  CHECK_THROWS_AS((void)InvariantExpr::parse("r2 +"), std::invalid_argument);
  CHECK_THROWS_AS((void)InvariantExpr::parse("q3"), std::invalid_argument);
  CHECK_THROWS_AS((void)InvariantExpr::parse("r2^x"), std::invalid_argument);
}

TEST_CASE("rank-1 source density values") {
  const DensitySpec spec = a1_spec();
  CHECK(spec.source_density(v1(1.0)) ==
        doctest::Approx(std::sinh(1.0) * std::sinh(1.0)).epsilon(1e-12));
  CHECK(spec.source_density(v1(1.0)) == doctest::Approx(1.3810978).epsilon(1e-6));
  CHECK(spec.source_density(v1(0.0)) == 0.0);
  CHECK(spec.target_density(v1(2.0)) == doctest::Approx(4.0));
  CHECK(spec.target_density(v1(0.0)) == 0.0);
  const DensitySpec reg = a1_spec(1e-3);
  CHECK(reg.source_density(v1(0.0)) == doctest::Approx(1e-3));
  CHECK(reg.target_density(v1(0.0)) == doctest::Approx(1e-3));
}

TEST_CASE("overflow guard") {
  const DensitySpec spec = a1_spec();
  CHECK_THROWS_AS((void)spec.source_density(v1(351.0)), std::domain_error);
  CHECK_NOTHROW((void)spec.source_density(v1(349.0)));
}

TEST_CASE("densities are Weyl invariant") {
  Rng rng(3);
  for (const char* name : {"A1", "A2", "B2", "G2", "A3"}) {
    DensitySpec spec(RootSystem::catalog(name),
                     InvariantExpr::parse("0.1*r2 + 0.01*p2"), 1e-4);
    const auto& rs = spec.roots();
    for (int trial = 0; trial < 60; ++trial) {
      Vec x(rs.rank());
      for (int d = 0; d < rs.rank(); ++d) x[d] = rng.uniform(-1.5, 1.5);
      const double sx = spec.source_density(x);
      const double tx = spec.target_density(x);
      const double ux = spec.u_value(x);
      for (const Vec& s : rs.generators()) {
        const Vec wx = weylma::reflect(s, x);
        CHECK(spec.source_density(wx) ==
              doctest::Approx(sx).epsilon(1e-12));
        CHECK(spec.target_density(wx) ==
              doctest::Approx(tx).epsilon(1e-12));
        CHECK(spec.u_value(wx) == doctest::Approx(ux).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("densities vanish to second order across walls when eps = 0") {
  DensitySpec spec(RootSystem::catalog("A2"), InvariantExpr::zero(), 0.0);
  // Wall of the first simple root; move across it.
  const Vec s = spec.roots().generators()[0];
  Vec tangent(2);
  tangent << -s[1], s[0];
  const Vec base = 0.7 * tangent / tangent.norm();
  const Vec normal = s / s.norm();
  const double f0 = spec.source_density(base);
  CHECK(f0 == doctest::Approx(0.0).epsilon(1e-18));
  const double step = 1e-4;
  const double fp = spec.source_density(base + step * normal);
  const double fm = spec.source_density(base - step * normal);
  // Even in the wall coordinate and quadratic to leading order.
  CHECK(fp == doctest::Approx(fm).epsilon(1e-6));
  const double f2 = spec.source_density(base + 2 * step * normal);
  CHECK(f2 / fp == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("ball mass against closed forms (rank 1)") {
  const DensitySpec spec = a1_spec();
  const DensityFn source = [&spec](const Vec& x) {
    return spec.source_density(x);
  };
  const DensityFn target = [&spec](const Vec& y) {
    return spec.target_density(y);
  };
  const auto report = weylma::ball_mass(source, 1, 1.0, 4096);
  const double exact = std::sinh(2.0) / 2.0 - 1.0;  // integral of sinh^2
  CHECK(report.mass == doctest::Approx(exact).epsilon(1e-7));
  CHECK(report.mass == doctest::Approx(0.8134302).epsilon(1e-6));
  CHECK(std::abs(report.mass - exact) <= 20 * report.estimated_error + 1e-12);

  for (double R : {0.5, 1.0, 1.7}) {
    const auto t = weylma::ball_mass(target, 1, R, 4096);
    CHECK(t.mass == doctest::Approx(2 * R * R * R / 3).epsilon(1e-7));
  }
  CHECK_THROWS_AS((void)weylma::ball_mass(source, 1, 1.0, 8),
                  std::invalid_argument);
}

TEST_CASE("ball mass is reflection invariant and monotone in radius") {
  DensitySpec spec(RootSystem::catalog("A2"), InvariantExpr::zero(), 1e-3);
  const auto& rs = spec.roots();
  const Vec s = rs.generators()[1];
  const DensityFn plain = [&spec](const Vec& x) {
    return spec.source_density(x);
  };
  const DensityFn reflected = [&spec, &s](const Vec& x) {
    return spec.source_density(weylma::reflect(s, x));
  };
  const double m1 = weylma::ball_mass_plain(plain, 2, 1.3, 256);
  const double m2 = weylma::ball_mass_plain(reflected, 2, 1.3, 256);
  CHECK(m1 == doctest::Approx(m2).epsilon(1e-12));

  double prev = 0.0;
  for (double R : {0.4, 0.8, 1.2, 1.6}) {
    const double m = weylma::ball_mass_plain(plain, 2, R, 256);
    CHECK(m > prev);
    prev = m;
  }
}

TEST_CASE("balance radius reproduces the rank-1 closed form") {
  const DensitySpec spec = a1_spec();
  // 2R^3/3 = sinh(2)/2 - 1  =>  R = (3 mass / 2)^{1/3} = K'(1).
  const double R = weylma::balance_radius(spec, 1.0, 8192);
  const double exact =
      std::cbrt(0.75 * (std::sinh(2.0) - 2.0));
  CHECK(R == doctest::Approx(exact).epsilon(2e-6));
  CHECK(R == doctest::Approx(1.06857).epsilon(1e-4));

  // k -> 0: the radius collapses.
  CHECK(weylma::balance_radius(spec, 1e-3, 1024) < 2e-3);
}

TEST_CASE("balance radius matches masses and grows with k") {
  DensitySpec spec(RootSystem::catalog("A2"), InvariantExpr::zero(), 1e-3);
  const DensityFn source = [&spec](const Vec& x) {
    return spec.source_density(x);
  };
  const DensityFn target = [&spec](const Vec& y) {
    return spec.target_density(y);
  };
  const int res = 512;
  const double R = weylma::balance_radius(spec, 2.0, res);
  const double ms = weylma::ball_mass_plain(source, 2, 2.0, res);
  const double mt = weylma::ball_mass_plain(target, 2, R, res);
  CHECK(std::abs(mt - ms) / ms <= 1e-8);

  const double R1 = weylma::balance_radius(spec, 1.0, res);
  const double R3 = weylma::balance_radius(spec, 2.5, res);
  CHECK(R1 < R);
  CHECK(R < R3);
}
