#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "weylma/densities.hpp"
#include "weylma/transport.hpp"
#include "weylma/util.hpp"

using namespace weylma;

namespace {

Vec v1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

DensitySpec a1_spec(double eps = 0.0) {
  return DensitySpec(RootSystem::catalog("A1"), InvariantExpr::zero(), eps);
}

TargetCloud manual_cloud(std::vector<Vec> points, std::vector<double> masses,
                         std::vector<int> orbit_of, double radius) {
  TargetCloud cloud;
  cloud.points = std::move(points);
  cloud.masses = std::move(masses);
  cloud.orbit_of = std::move(orbit_of);
  int orbits = 0;
  for (int o : cloud.orbit_of) orbits = std::max(orbits, o + 1);
  cloud.orbits.assign(static_cast<std::size_t>(orbits), {});
  for (std::size_t j = 0; j < cloud.orbit_of.size(); ++j)
    cloud.orbits[static_cast<std::size_t>(cloud.orbit_of[j])].push_back(
        static_cast<int>(j));
  cloud.total_mass = 0.0;
  for (double m : cloud.masses) cloud.total_mass += m;
  cloud.radius = radius;
  return cloud;
}

}  // namespace

TEST_CASE("sample_target_cloud: rank-1 pair with equal masses") {
  const DensitySpec spec = a1_spec(0.5);
  const TargetCloud cloud = sample_target_cloud(spec, 1.0, 2, 3.0, 42, 512);
  REQUIRE(cloud.size() == 2);
  CHECK(cloud.points[0][0] == doctest::Approx(-cloud.points[1][0]));
  CHECK(cloud.masses[0] == doctest::Approx(cloud.masses[1]));
  CHECK(cloud.masses[0] + cloud.masses[1] == doctest::Approx(3.0));
  CHECK_THROWS_AS(
      (void)sample_target_cloud(spec, 1.0, 1, 3.0, 42, 512),
      std::invalid_argument);
}

TEST_CASE("sample_target_cloud: A2 cloud is orbit-complete with tied masses") {
  DensitySpec spec(RootSystem::catalog("A2"), InvariantExpr::zero(), 1e-3);
  const TargetCloud cloud = sample_target_cloud(spec, 1.5, 600, 10.0, 7, 512);
  CHECK(cloud.size() == 600);
  CHECK(cloud.orbit_count() == 100);
  const double total = pairwise_sum(cloud.masses);
  CHECK(std::abs(total - 10.0) / 10.0 <= 1e-8);
  const auto& rs = spec.roots();
  for (const auto& orbit : cloud.orbits) {
    REQUIRE(orbit.size() == 6);
    // Each member's full Weyl orbit is present in the set, with equal mass.
    const Vec& rep = cloud.points[static_cast<std::size_t>(orbit[0])];
    const double mass = cloud.masses[static_cast<std::size_t>(orbit[0])];
    for (const Vec& image : rs.weyl_orbit(rep)) {
      bool found = false;
      for (int j : orbit) {
        if ((cloud.points[static_cast<std::size_t>(j)] - image).norm() <=
            1e-9 * (1.0 + image.norm())) {
          found = true;
          CHECK(cloud.masses[static_cast<std::size_t>(j)] ==
                doctest::Approx(mass));
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("assign_cells: single point receives the whole source") {
  const DensitySpec spec = a1_spec(0.1);
  const SourceGrid grid = SourceGrid::build(spec, 1.0, 64);
  const TargetCloud cloud = manual_cloud({v1(0.3)}, {grid.total_mass}, {0}, 1.0);
  const AssignResult res = assign_cells(cloud, {0.0}, grid, false);
  CHECK(res.masses[0] == doctest::Approx(grid.total_mass));
  CHECK(res.empty_points == 0);
}

TEST_CASE("assign_cells: symmetric pair splits a symmetric source in half") {
  const DensitySpec spec = a1_spec(0.25);
  const SourceGrid grid = SourceGrid::build(spec, 1.0, 128);
  const TargetCloud cloud = manual_cloud(
      {v1(1.0), v1(-1.0)}, {0.5 * grid.total_mass, 0.5 * grid.total_mass},
      {0, 0}, 1.0);
  const AssignResult res = assign_cells(cloud, {0.0, 0.0}, grid, true);
  CHECK(res.masses[0] == doctest::Approx(res.masses[1]).epsilon(1e-12));
  CHECK(res.masses[0] + res.masses[1] == doctest::Approx(grid.total_mass));
}

TEST_CASE("assign_cells: raising a weight grows that cell") {
  const DensitySpec spec = a1_spec(0.2);
  const SourceGrid grid = SourceGrid::build(spec, 1.0, 256);
  const TargetCloud cloud =
      manual_cloud({v1(0.8), v1(-0.8), v1(0.2), v1(-0.2)},
                   {0.25, 0.25, 0.25, 0.25}, {0, 0, 1, 1}, 1.0);
  std::vector<double> w = {0.0, 0.0, 0.0, 0.0};
  const AssignResult base = assign_cells(cloud, w, grid, false);
  w[2] += 0.05;
  const AssignResult bumped = assign_cells(cloud, w, grid, false);
  CHECK(bumped.masses[2] > base.masses[2]);
  for (std::size_t j = 0; j < 4; ++j)
    if (j != 2) CHECK(bumped.masses[j] <= base.masses[j] + 1e-15);
  // Total is conserved.
  CHECK(pairwise_sum(bumped.masses) == doctest::Approx(grid.total_mass));
}

TEST_CASE("assign_cells: masses are continuous in the weights") {
  // Exact boundary-box splitting: a tiny weight change moves masses by a
  // proportionally tiny amount (no cell-size jumps).
  const DensitySpec spec = a1_spec(0.2);
  const SourceGrid grid = SourceGrid::build(spec, 1.0, 64);
  const TargetCloud cloud = manual_cloud(
      {v1(0.7), v1(-0.7), v1(0.1), v1(-0.1)},
      {0.25, 0.25, 0.25, 0.25}, {0, 0, 1, 1}, 1.0);
  std::vector<double> w = {0.0, 0.0, 0.013, 0.013};
  const AssignResult base = assign_cells(cloud, w, grid, false);
  const double delta = 1e-7;
  w[0] += delta;
  w[1] += delta;
  const AssignResult bumped = assign_cells(cloud, w, grid, false);
  // d(mass)/d(weight) is O(g * interface / |y_i - y_l|): order-1 here.
  CHECK(std::abs(bumped.masses[0] - base.masses[0]) < 50 * delta);
  CHECK(std::abs(bumped.masses[0] - base.masses[0]) > 0.0);
}

TEST_CASE("solve_weights: symmetric two-point cloud balances at equal weights") {
  const DensitySpec spec = a1_spec(0.25);
  const SourceGrid grid = SourceGrid::build(spec, 1.0, 512);
  const TargetCloud cloud = manual_cloud(
      {v1(0.9), v1(-0.9)}, {0.5 * grid.total_mass, 0.5 * grid.total_mass},
      {0, 0}, 1.0);
  const auto [w, diag] = solve_weights(cloud, grid, 1e-8);
  CHECK(diag.converged);
  CHECK(w[0] == doctest::Approx(w[1]));  // tied orbit: exact
  CHECK(diag.max_rel_cell_residual <= 1e-8);
  CHECK(diag.empty_cells == 0);
}

TEST_CASE("solve_weights: rank-1 transport reproduces the closed form") {
  const DensitySpec spec = a1_spec(0.0);
  const double k = 1.0;
  const double R = balance_radius(spec, k, 8192);
  const SourceGrid grid = SourceGrid::build(spec, k, 4096);
  const TargetCloud cloud =
      sample_target_cloud(spec, R, 200, grid.total_mass, 1, 4096);
  const auto [w, diag] = solve_weights(cloud, grid, 1e-6);
  REQUIRE(diag.converged);
  CHECK(diag.max_rel_cell_residual <= 1e-6);
  CHECK(diag.empty_cells == 0);

  // Dual objective is nondecreasing along accepted steps.
  for (std::size_t i = 1; i < diag.objective_trace.size(); ++i)
    CHECK(diag.objective_trace[i] >=
          diag.objective_trace[i - 1] -
              1e-9 * std::abs(diag.objective_trace[i]));

  const ConvexPotential phi = build_potential(cloud, w);
  // Envelope gradient tracks K' within 2% on [0.5, 0.9].
  double worst = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double x = 0.5 + 0.4 * i / 40.0;
    const double kp = rank1_closed_form(spec, x);
    const double got = phi.gradient(v1(x))[0];
    worst = std::max(worst, std::abs(got - kp) / kp);
  }
  CHECK(worst <= 0.02);

  // Gradient range: subgradients live in the closed target ball.
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const Vec x = v1(rng.uniform(-k, k));
    CHECK(phi.gradient(x).norm() <= R + 1e-12);
  }

  // Monge-Ampere measure checks on the assignment grid.
  CHECK(ma_measure_check(phi, cloud, grid, Region::full_ball()) <= 1e-6);
  CHECK(ma_measure_check(phi, cloud, grid, Region::box(v1(0.0), v1(k))) <=
        2e-6);
  // One Laguerre cell: box between consecutive envelope breakpoints.
  {
    const auto& pts = cloud.points;
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j = 0; j < pts.size(); ++j)
      order.emplace_back(pts[j][0], j);
    std::sort(order.begin(), order.end());
    const std::size_t mid = order.size() / 2 + 3;
    const auto& wts = phi.weights();
    const std::size_t ja = order[mid].second;
    const std::size_t jb = order[mid + 1].second;
    const std::size_t jc = order[mid - 1].second;
    // Envelope breakpoints around the cell of order[mid].
    const double left = (wts[ja] - wts[jc]) / (pts[ja][0] - pts[jc][0]);
    const double right = (wts[jb] - wts[ja]) / (pts[jb][0] - pts[ja][0]);
    REQUIRE(left < right);
    CHECK(ma_measure_check(phi, cloud, grid,
                           Region::box(v1(left), v1(right))) <= 5e-6);
  }
}

TEST_CASE("solve_weights: A2 run converges with exact invariance") {
  DensitySpec spec(RootSystem::catalog("A2"), InvariantExpr::zero(), 1e-2);
  const double k = 1.0;
  const double R = balance_radius(spec, k, 256);
  const SourceGrid grid = SourceGrid::build(spec, k, 96);
  const TargetCloud cloud =
      sample_target_cloud(spec, R, 60, grid.total_mass, 5, 96);
  const auto [w, diag] = solve_weights(cloud, grid, 1e-5, 200);
  REQUIRE(diag.converged);
  CHECK(diag.max_rel_cell_residual <= 1e-5);
  for (std::size_t i = 1; i < diag.objective_trace.size(); ++i)
    CHECK(diag.objective_trace[i] >=
          diag.objective_trace[i - 1] -
              1e-9 * std::abs(diag.objective_trace[i]));

  const ConvexPotential phi = build_potential(cloud, w);
  Rng rng(17);
  const auto& rs = spec.roots();
  for (int i = 0; i < 200; ++i) {
    Vec x(2);
    x << rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9);
    const double base = phi.value(x);
    for (const Vec& s : rs.generators())
      CHECK(std::abs(phi.value(weylma::reflect(s, x)) - base) <=
            1e-9 * (1.0 + std::abs(base)));
  }
  CHECK(ma_measure_check(phi, cloud, grid, Region::full_ball()) <= 1e-5);
}

TEST_CASE("convex potential: envelope structure") {
  const TargetCloud single = manual_cloud({v1(0.37)}, {1.0}, {0}, 1.0);
  const ConvexPotential phi = build_potential(single, {0.5 * 0.37 * 0.37});
  CHECK(phi.value(v1(0.0)) == doctest::Approx(0.0));
  CHECK(phi.value(v1(2.0)) == doctest::Approx(2.0 * 0.37));
  CHECK(phi.gradient(v1(-1.0))[0] == doctest::Approx(0.37));

  // Convexity and the supporting-plane inequality on a real envelope.
  const DensitySpec spec = a1_spec(0.3);
  const SourceGrid grid = SourceGrid::build(spec, 1.0, 256);
  const TargetCloud cloud =
      sample_target_cloud(spec, 1.2, 16, grid.total_mass, 3, 512);
  const auto [w, diag] = solve_weights(cloud, grid, 1e-7);
  REQUIRE(diag.converged);
  const ConvexPotential psi = build_potential(cloud, w);
  CHECK(psi.value(v1(0.0)) == doctest::Approx(0.0));
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    const double x1 = rng.uniform(-1.0, 1.0);
    const double x2 = rng.uniform(-1.0, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    const double lhs = psi.value(v1(lambda * x1 + (1 - lambda) * x2));
    const double rhs =
        lambda * psi.value(v1(x1)) + (1 - lambda) * psi.value(v1(x2));
    CHECK(lhs <= rhs + 1e-12 * (1.0 + std::abs(rhs)));
  }
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const Vec x = v1(rng.uniform(-1.0, 1.0));
    CHECK(psi.value(x) + psi.gauge() >=
          cloud.points[j].dot(x) - psi.weights()[j] - 1e-12);
  }
  const auto active = psi.active_set(v1(0.0), 1e-9);
  CHECK(active.size() >= 1);
}

TEST_CASE("rank1_closed_form") {
  const DensitySpec spec = a1_spec();
  const double expected = std::cbrt(0.75 * (std::sinh(2.0) - 2.0));
  CHECK(rank1_closed_form(spec, 1.0) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(rank1_closed_form(spec, 1.0) == doctest::Approx(1.06857).epsilon(1e-4));
  CHECK(rank1_closed_form(spec, -1.0) ==
        doctest::Approx(-expected).epsilon(1e-12));
  // Series region: K'(x)/x -> 1.
  for (double x : {1e-6, 1e-4, 1e-2})
    CHECK(rank1_closed_form(spec, x) / x == doctest::Approx(1.0).epsilon(1e-3));
  // Smooth junction between series and closed form.
  const double below = rank1_closed_form(spec, 0.2499);
  const double above = rank1_closed_form(spec, 0.2501);
  CHECK(below < above);
  CHECK(above - below < 1e-3);
  // Nonzero Ricci datum: quadrature path against a midpoint-rule reference.
  DensitySpec with_u(RootSystem::catalog("A1"), InvariantExpr::parse("r2"),
                     0.0);
  double acc = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double s = (i + 0.5) / n;
    acc += std::exp(s * s) * std::sinh(s) * std::sinh(s) / n;
  }
  CHECK(rank1_closed_form(with_u, 1.0) ==
        doctest::Approx(std::cbrt(3.0 * acc)).epsilon(1e-6));
  DensitySpec a2(RootSystem::catalog("A2"), InvariantExpr::zero(), 0.0);
  CHECK_THROWS_AS((void)rank1_closed_form(a2, 1.0), std::invalid_argument);
}

TEST_CASE("solve_sequence: appendix scheme trends") {
  const DensitySpec spec = a1_spec();
  SequenceOptions options;
  options.grid_resolution = 4096;
  options.tol = 1e-6;
  options.seed = 11;
  options.one_over_k = true;
  const auto stages =
      solve_sequence(spec, {1.0, 2.0, 3.0}, {600, 800, 1000}, options);
  REQUIRE(stages.size() == 3);
  CHECK(stages[0].eps == doctest::Approx(1.0));
  CHECK(stages[1].eps == doctest::Approx(0.5));
  CHECK(stages[2].eps == doctest::Approx(1.0 / 3.0));
  // Balance radii increase along the list.
  CHECK(stages[0].R < stages[1].R);
  CHECK(stages[1].R < stages[2].R);
  // Compact-convergence monitor decreases.
  CHECK(stages[1].sup_diff_prev > 0.0);
  CHECK(stages[2].sup_diff_prev < stages[1].sup_diff_prev);
  // Slope bound on B_{k/2} never exceeds R_k.
  for (const auto& stage : stages)
    CHECK(stage.lipschitz_bound <= stage.R + 1e-12);
  CHECK_THROWS_AS((void)solve_sequence(spec, {2.0, 1.0}, {64, 64}, options),
                  std::invalid_argument);
}
