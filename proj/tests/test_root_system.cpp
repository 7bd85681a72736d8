#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "weylma/root_system.hpp"
#include "weylma/util.hpp"

using weylma::Mat;
using weylma::RootSystem;
using weylma::Rng;
using weylma::Vec;

namespace {

Vec v1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

Vec random_point(Rng& rng, int dim, double radius) {
  Vec x(dim);
  for (int d = 0; d < dim; ++d) x[d] = rng.uniform(-radius, radius);
  return x;
}

bool orbit_contains(const std::vector<Vec>& orbit, const Vec& p, double tol) {
  for (const Vec& q : orbit)
    if ((p - q).norm() <= tol) return true;
  return false;
}

}  // namespace

TEST_CASE("catalog group orders") {
  CHECK(RootSystem::catalog("A1").group_order() == 2);
  CHECK(RootSystem::catalog("A2").group_order() == 6);
  CHECK(RootSystem::catalog("B2").group_order() == 8);
  CHECK(RootSystem::catalog("G2").group_order() == 12);
  CHECK(RootSystem::catalog("A3").group_order() == 24);
  CHECK_THROWS_AS((void)RootSystem::catalog("E8"), std::invalid_argument);
}

TEST_CASE("A1 is normalized to alpha(x) = x") {
  const RootSystem rs = RootSystem::catalog("A1");
  REQUIRE(rs.rank() == 1);
  REQUIRE(rs.positive_roots().size() == 1);
  CHECK(rs.positive_roots()[0][0] == doctest::Approx(1.0));
}

TEST_CASE("A2 positive roots sit at 60/120 degree angles") {
  const RootSystem rs = RootSystem::catalog("A2");
  REQUIRE(rs.positive_roots().size() == 3);
  std::multiset<int> angles;
  const auto& roots = rs.positive_roots();
  for (std::size_t i = 0; i < roots.size(); ++i)
    for (std::size_t j = i + 1; j < roots.size(); ++j) {
      const double c =
          roots[i].dot(roots[j]) / (roots[i].norm() * roots[j].norm());
      angles.insert(static_cast<int>(std::lround(std::acos(c) * 180.0 / M_PI)));
    }
  CHECK(angles == std::multiset<int>({60, 60, 120}));
}

TEST_CASE("reflect basics") {
  CHECK(weylma::reflect(v1(1.0), v1(2.0))[0] == doctest::Approx(-2.0));
  const Vec r = weylma::reflect(v2(1.0, 0.0), v2(3.0, 4.0));
  CHECK(r[0] == doctest::Approx(-3.0));
  CHECK(r[1] == doctest::Approx(4.0));
  CHECK_THROWS_AS((void)weylma::reflect(v2(0.0, 0.0), v2(1.0, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("reflect is an involution and an isometry") {
  Rng rng(7);
  for (const char* name : {"A1", "A2", "B2", "G2", "A3"}) {
    const RootSystem rs = RootSystem::catalog(name);
    for (int trial = 0; trial < 50; ++trial) {
      const Vec x = random_point(rng, rs.rank(), 3.0);
      for (const Vec& a : rs.positive_roots()) {
        const Vec once = weylma::reflect(a, x);
        CHECK((weylma::reflect(a, once) - x).norm() <= 1e-12 * (1 + x.norm()));
        CHECK(std::abs(once.norm() - x.norm()) <= 1e-12 * (1 + x.norm()));
      }
    }
  }
}

TEST_CASE("orbit sizes: generic points get full orbits") {
  Rng rng(11);
  const RootSystem a2 = RootSystem::catalog("A2");
  CHECK(a2.weyl_orbit(v2(0.37, 1.21)).size() == 6);
  const RootSystem a1 = RootSystem::catalog("A1");
  CHECK(a1.weyl_orbit(v1(0.0)).size() == 1);

  for (const char* name : {"A1", "A2", "B2", "G2", "A3"}) {
    const RootSystem rs = RootSystem::catalog(name);
    for (int trial = 0; trial < 40; ++trial) {
      const Vec x = random_point(rng, rs.rank(), 2.0);
      const std::size_t size = rs.weyl_orbit(x).size();
      CHECK(rs.group_order() % size == 0);
    }
  }
}

TEST_CASE("B2 orbit matches hand-enumerated signed permutations") {
  // W(B2) acts by coordinate swaps and sign flips: 8 matrices.
  std::vector<Mat> group;
  for (int swap = 0; swap < 2; ++swap)
    for (double s0 : {1.0, -1.0})
      for (double s1 : {1.0, -1.0}) {
        Mat g = Mat::Zero(2, 2);
        if (swap) {
          g(0, 1) = s0;
          g(1, 0) = s1;
        } else {
          g(0, 0) = s0;
          g(1, 1) = s1;
        }
        group.push_back(g);
      }
  REQUIRE(group.size() == 8);

  const RootSystem rs = RootSystem::catalog("B2");
  const Vec x = v2(0.93, 0.41);
  const auto orbit = rs.weyl_orbit(x);
  CHECK(orbit.size() == 8);
  for (const Mat& g : group) CHECK(orbit_contains(orbit, g * x, 1e-10));
}

TEST_CASE("orbit of a wall point is smaller and still divides the order") {
  const RootSystem rs = RootSystem::catalog("A2");
  // Point on the wall of the first simple root.
  const Vec s = rs.generators()[0];
  Vec wall(2);
  wall << -s[1], s[0];
  const auto orbit = rs.weyl_orbit(wall);
  CHECK(orbit.size() == 3);
  CHECK(rs.group_order() % orbit.size() == 0);
}

TEST_CASE("project_to_chamber") {
  const RootSystem a1 = RootSystem::catalog("A1");
  CHECK(a1.project_to_chamber(v1(-3.0))[0] == doctest::Approx(3.0));
  CHECK(a1.project_to_chamber(v1(3.0))[0] == doctest::Approx(3.0));

  Rng rng(23);
  for (const char* name : {"A2", "B2", "G2", "A3"}) {
    const RootSystem rs = RootSystem::catalog(name);
    for (int trial = 0; trial < 60; ++trial) {
      const Vec x = random_point(rng, rs.rank(), 2.5);
      const Vec rep = rs.project_to_chamber(x);
      CHECK(rs.in_closed_chamber(rep, 1e-9 * (1 + x.norm())));
      // Idempotent and inside the orbit.
      CHECK((rs.project_to_chamber(rep) - rep).norm() <= 1e-12 * (1 + x.norm()));
      CHECK(orbit_contains(rs.weyl_orbit(x), rep, 1e-8 * (1 + x.norm())));
    }
  }
}

TEST_CASE("chamber representative is the unique orbit element in the chamber") {
  const RootSystem rs = RootSystem::catalog("A2");
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const Vec x = random_point(rng, 2, 2.0);
    if (rs.wall_distance(x) < 1e-3) continue;
    const Vec rep = rs.project_to_chamber(x);
    int inside = 0;
    for (const Vec& p : rs.weyl_orbit(x))
      if (rs.in_closed_chamber(p, 0.0)) ++inside;
    CHECK(inside == 1);
    CHECK(rs.in_closed_chamber(rep, 1e-12));
  }
}

TEST_CASE("custom root systems are validated") {
  // Not reflection-closed: s_{(1,0)} maps (1,1) to (-1,1), outside +-roots.
  CHECK_THROWS_AS(
      (void)RootSystem::custom({v2(1, 0), v2(0, 1), v2(1, 1)}),
      std::invalid_argument);
  // B2 as a custom list validates and reproduces the catalog order.
  const RootSystem custom =
      RootSystem::custom({v2(1, 0), v2(0, 1), v2(1, 1), v2(1, -1)});
  CHECK(custom.group_order() == 8);
  CHECK(custom.generators().size() == 2);
  // Non-reduced list is rejected.
  CHECK_THROWS_AS((void)RootSystem::custom({v1(1), v1(2)}),
                  std::invalid_argument);
}

TEST_CASE("root scale carries through") {
  const RootSystem rs = RootSystem::catalog("A2", 2.0);
  CHECK(rs.positive_roots()[0].norm() == doctest::Approx(2.0));
  CHECK(rs.group_order() == 6);
}
