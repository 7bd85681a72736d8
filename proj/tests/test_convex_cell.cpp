#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "weylma/convex_cell.hpp"
#include "weylma/util.hpp"

using weylma::ConvexCell;
using weylma::Rng;
using weylma::Vec;

namespace {

Vec vecn(std::initializer_list<double> c) {
  Vec v(static_cast<Eigen::Index>(c.size()));
  Eigen::Index i = 0;
  for (double x : c) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("interval clipping") {
  ConvexCell cell = ConvexCell::box(vecn({0.0}), vecn({2.0}));
  CHECK(cell.volume() == doctest::Approx(2.0));
  cell.clip(vecn({1.0}), 1.5, 7);  // x <= 1.5
  CHECK(cell.volume() == doctest::Approx(1.5));
  CHECK(cell.facet_measure(7) == doctest::Approx(1.0));
  const auto m = cell.moments();
  CHECK(m.first[0] == doctest::Approx(1.5 * 1.5 / 2));
  CHECK(m.second == doctest::Approx(std::pow(1.5, 3) / 3));
  cell.clip(vecn({-1.0}), -2.0, 8);  // x >= 2: empty
  CHECK(cell.empty());
}

TEST_CASE("square clipped by a diagonal") {
  ConvexCell cell = ConvexCell::box(vecn({0.0, 0.0}), vecn({1.0, 1.0}));
  CHECK(cell.volume() == doctest::Approx(1.0));
  // x + y <= 1 keeps the lower triangle.
  cell.clip(vecn({1.0, 1.0}), 1.0, 3);
  CHECK(cell.volume() == doctest::Approx(0.5));
  CHECK(cell.facet_measure(3) == doctest::Approx(std::sqrt(2.0)));
  const auto m = cell.moments();
  CHECK(m.first[0] == doctest::Approx(1.0 / 6));
  CHECK(m.first[1] == doctest::Approx(1.0 / 6));
  // integral of x^2 + y^2 over the triangle = 2 * (1/12) = 1/6.
  CHECK(m.second == doctest::Approx(1.0 / 6));
}

TEST_CASE("cube clipped by a plane") {
  ConvexCell cell = ConvexCell::box(vecn({0, 0, 0}), vecn({1, 1, 1}));
  CHECK(cell.volume() == doctest::Approx(1.0));
  const auto m0 = cell.moments();
  CHECK(m0.first[0] == doctest::Approx(0.5));
  CHECK(m0.second == doctest::Approx(1.0));  // 3 * integral x^2 = 3/3

  // x <= 0.25 keeps a slab.
  ConvexCell slab = cell;
  slab.clip(vecn({1.0, 0.0, 0.0}), 0.25, 5);
  CHECK(slab.volume() == doctest::Approx(0.25));
  CHECK(slab.facet_measure(5) == doctest::Approx(1.0));

  // Corner cut: x + y + z <= 0.5 keeps a tetrahedron of volume 1/48... no:
  // volume = s^3/6 with s = 0.5.
  ConvexCell corner = cell;
  corner.clip(vecn({1.0, 1.0, 1.0}), 0.5, 9);
  CHECK(corner.volume() == doctest::Approx(0.5 * 0.5 * 0.5 / 6.0));
  // Cap is an equilateral triangle with side s*sqrt(2).
  const double side = 0.5 * std::sqrt(2.0);
  CHECK(corner.facet_measure(9) ==
        doctest::Approx(std::sqrt(3.0) / 4.0 * side * side));
}

TEST_CASE("tetrahedron moments from a clipped cube match closed forms") {
  // Simplex x, y, z >= 0, x + y + z <= 1.
  ConvexCell cell = ConvexCell::box(vecn({0, 0, 0}), vecn({1, 1, 1}));
  cell.clip(vecn({1.0, 1.0, 1.0}), 1.0, 1);
  CHECK(cell.volume() == doctest::Approx(1.0 / 6));
  const auto m = cell.moments();
  // integral x over the simplex = 1/24 per coordinate.
  CHECK(m.first[0] == doctest::Approx(1.0 / 24));
  CHECK(m.first[1] == doctest::Approx(1.0 / 24));
  CHECK(m.first[2] == doctest::Approx(1.0 / 24));
  // integral |x|^2 = 3 * integral x^2 = 3/60.
  CHECK(m.second == doctest::Approx(3.0 / 60));
}

TEST_CASE("random plane sequences preserve volume additivity") {
  Rng rng(99);
  for (int dim = 1; dim <= 3; ++dim) {
    for (int trial = 0; trial < 40; ++trial) {
      Vec lo(dim), hi(dim);
      for (int d = 0; d < dim; ++d) {
        lo[d] = rng.uniform(-1.0, 0.0);
        hi[d] = lo[d] + rng.uniform(0.2, 1.0);
      }
      ConvexCell keep = ConvexCell::box(lo, hi);
      ConvexCell drop = ConvexCell::box(lo, hi);
      Vec n(dim);
      for (int d = 0; d < dim; ++d) n[d] = rng.uniform(-1.0, 1.0);
      if (n.norm() < 1e-3) continue;
      const Vec mid = 0.5 * (lo + hi);
      const double c = n.dot(mid) + rng.uniform(-0.2, 0.2);
      keep.clip(n, c, 1);
      drop.clip(-n, -c, 1);
      const double total = ConvexCell::box(lo, hi).volume();
      CHECK(keep.volume() + drop.volume() == doctest::Approx(total));
      // Shared interface: equal facet measures from both sides.
      CHECK(keep.facet_measure(1) == doctest::Approx(drop.facet_measure(1)));
    }
  }
}

TEST_CASE("facet measure is the derivative of volume in the offset") {
  Rng rng(5);
  for (int dim = 1; dim <= 3; ++dim) {
    for (int trial = 0; trial < 20; ++trial) {
      Vec lo = Vec::Constant(dim, -1.0), hi = Vec::Constant(dim, 1.0);
      Vec n(dim);
      for (int d = 0; d < dim; ++d) n[d] = rng.uniform(-1.0, 1.0);
      if (n.norm() < 1e-3) continue;
      n /= n.norm();  // unit normal: dV/dc equals the facet measure
      const double c = rng.uniform(-0.5, 0.5);
      const double dc = 1e-6;
      auto vol_at = [&](double offset) {
        ConvexCell cell = ConvexCell::box(lo, hi);
        cell.clip(n, offset, 2);
        return cell.volume();
      };
      ConvexCell cell = ConvexCell::box(lo, hi);
      cell.clip(n, c, 2);
      const double fd = (vol_at(c + dc) - vol_at(c - dc)) / (2 * dc);
      CHECK(cell.facet_measure(2) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}
