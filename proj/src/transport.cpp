#include "weylma/transport.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "weylma/convex_cell.hpp"
#include "weylma/util.hpp"

namespace weylma {

// --- source grid -------------------------------------------------------------

SourceGrid SourceGrid::build(const DensitySpec& spec, double k,
                             int resolution) {
  if (!(k > 0.0)) throw std::invalid_argument("SourceGrid: radius <= 0");
  if (resolution < 2) throw std::invalid_argument("SourceGrid: resolution < 2");
  SourceGrid grid;
  grid.dim = spec.roots().rank();
  grid.resolution = resolution;
  grid.radius = k;
  grid.h = 2.0 * k / resolution;
  grid.cell_volume = std::pow(grid.h, grid.dim);

  const double r2 = k * k;
  Vec x(grid.dim);
  std::vector<int> idx(static_cast<std::size_t>(grid.dim), 0);
  while (true) {
    double n2 = 0.0;
    for (int d = 0; d < grid.dim; ++d) {
      x[d] = -k + (idx[static_cast<std::size_t>(d)] + 0.5) * grid.h;
      n2 += x[d] * x[d];
    }
    if (n2 <= r2) {
      for (int d = 0; d < grid.dim; ++d) grid.centers.push_back(x[d]);
      grid.density.push_back(spec.source_density(x));
    }
    int d = grid.dim - 1;
    while (d >= 0) {
      if (++idx[static_cast<std::size_t>(d)] < resolution) break;
      idx[static_cast<std::size_t>(d)] = 0;
      --d;
    }
    if (d < 0) break;
  }
  std::vector<double> cell_masses(grid.density.size());
  for (std::size_t i = 0; i < grid.density.size(); ++i)
    cell_masses[i] = grid.density[i] * grid.cell_volume;
  grid.total_mass = pairwise_sum(cell_masses);
  return grid;
}

// --- cell assignment ---------------------------------------------------------

namespace {

// Flat copies of the cloud for the hot assignment loop. Points with the
// smallest reduced cost q_j(x) = 0.5|y_j|^2 - <x, y_j> - w_j own x.
struct FlatCloud {
  int dim;
  std::size_t count;
  std::vector<double> pts;      // count * dim
  std::vector<double> half_y2;  // 0.5 |y_j|^2

  explicit FlatCloud(const TargetCloud& cloud)
      : dim(cloud.points.empty() ? 0 : static_cast<int>(cloud.points[0].size())),
        count(cloud.size()) {
    pts.resize(count * static_cast<std::size_t>(dim));
    half_y2.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
      for (int d = 0; d < dim; ++d)
        pts[j * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)] =
            cloud.points[j][d];
      half_y2[j] = 0.5 * cloud.points[j].squaredNorm();
    }
  }

  inline double cost(std::size_t j, const double* x, double w) const {
    const double* y = pts.data() + j * static_cast<std::size_t>(dim);
    double dot = 0.0;
    for (int d = 0; d < dim; ++d) dot += x[d] * y[d];
    return half_y2[j] - dot - w;
  }
};

inline double reduced_cost(const Vec& y, double w, const double* x, int dim) {
  double dot = 0.0;
  for (int d = 0; d < dim; ++d) dot += x[d] * y[d];
  return 0.5 * y.squaredNorm() - dot - w;
}

}  // namespace

AssignResult assign_cells(const TargetCloud& cloud,
                          const std::vector<double>& weights,
                          const SourceGrid& grid, bool with_jacobian) {
  const std::size_t P = cloud.size();
  if (weights.size() != P)
    throw std::invalid_argument("assign_cells: weight count mismatch");
  for (double w : weights)
    if (!std::isfinite(w))
      throw std::invalid_argument("assign_cells: non-finite weight");
  const int dim = grid.dim;
  const std::size_t O = cloud.orbit_count();
  const FlatCloud flat(cloud);

  AssignResult out;
  out.masses.assign(P, 0.0);
  out.orbit_mass.assign(O, 0.0);
  if (with_jacobian) out.orbit_jacobian = Mat::Zero(O, O);

  // Reusable scratch.
  std::vector<double> cost(P);
  std::vector<int> contenders;
  const double half_h = 0.5 * grid.h;

  // Dual objective: F(w) = sum_j nu_j w_j + integral min_j q_j dmu, where the
  // common 0.5|x|^2 is restored through the piece moments.
  double objective_cells = 0.0;

  const Vec lo_off = Vec::Constant(dim, -half_h);
  const Vec hi_off = Vec::Constant(dim, half_h);

  for (std::size_t c = 0; c < grid.count(); ++c) {
    const double* xc = grid.centers.data() + c * dim;
    const double gc = grid.density[c];

    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < P; ++j) {
      const double q = flat.cost(j, xc, weights[j]);
      cost[j] = q;
      if (q < best_cost) {
        best_cost = q;
        best = j;
      }
    }

    contenders.clear();
    const double* yb = flat.pts.data() + best * static_cast<std::size_t>(dim);
    for (std::size_t j = 0; j < P; ++j) {
      if (j == best) continue;
      const double* yj = flat.pts.data() + j * static_cast<std::size_t>(dim);
      double slack = 0.0;
      for (int d = 0; d < dim; ++d) slack += std::abs(yj[d] - yb[d]);
      if (cost[j] - best_cost <= half_h * slack)
        contenders.push_back(static_cast<int>(j));
    }

    if (contenders.empty()) {
      const double mass = gc * grid.cell_volume;
      out.masses[best] += mass;
      // Box moments: integral x = center * vol, integral |x|^2 in closed form.
      double c2 = 0.0;
      for (int d = 0; d < dim; ++d) c2 += xc[d] * xc[d];
      const double i2 =
          grid.cell_volume * (c2 + dim * grid.h * grid.h / 12.0);
      const Vec& y = cloud.points[best];
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += xc[d] * y[d];
      objective_cells +=
          gc * (0.5 * i2 +
                grid.cell_volume *
                    (0.5 * y.squaredNorm() - dot - weights[best]));
      continue;
    }

    contenders.push_back(static_cast<int>(best));
    Vec center(dim);
    for (int d = 0; d < dim; ++d) center[d] = xc[d];

    double volume_check = 0.0;
    for (std::size_t a = 0; a < contenders.size(); ++a) {
      const int i = contenders[a];
      ConvexCell cell = ConvexCell::box(center + lo_off, center + hi_off);
      for (std::size_t b = 0; b < contenders.size(); ++b) {
        if (a == b) continue;
        const int l = contenders[b];
        // q_i <= q_l  <=>  <x, y_l - y_i> <= 0.5(|y_l|^2-|y_i|^2) - w_l + w_i
        Vec n = cloud.points[l] - cloud.points[i];
        const double off = 0.5 * (cloud.points[l].squaredNorm() -
                                  cloud.points[i].squaredNorm()) -
                           weights[l] + weights[i];
        cell.clip(n, off, static_cast<int>(b));
        if (cell.empty()) break;
      }
      if (cell.empty()) continue;
      const CellMoments mom = cell.moments();
      if (mom.volume <= 0.0) continue;
      volume_check += mom.volume;
      out.masses[i] += gc * mom.volume;
      const Vec& y = cloud.points[i];
      objective_cells +=
          gc * (0.5 * mom.second - mom.first.dot(y) +
                mom.volume * (0.5 * y.squaredNorm() - weights[i]));

      if (with_jacobian) {
        for (std::size_t b = 0; b < contenders.size(); ++b) {
          if (a == b) continue;
          const int l = contenders[b];
          if (l <= i) continue;  // count each unordered pair once
          const double fm = cell.facet_measure(static_cast<int>(b));
          if (fm <= 0.0) continue;
          const double dist = (cloud.points[l] - cloud.points[i]).norm();
          const double beta = gc * fm / dist;
          const std::size_t A = cloud.orbit_of[static_cast<std::size_t>(i)];
          const std::size_t B = cloud.orbit_of[static_cast<std::size_t>(l)];
          if (A == B) continue;  // internal interfaces cancel under tying
          out.orbit_jacobian(A, B) -= beta;
          out.orbit_jacobian(B, A) -= beta;
          out.orbit_jacobian(A, A) += beta;
          out.orbit_jacobian(B, B) += beta;
        }
      }
    }
    if (std::abs(volume_check - grid.cell_volume) >
        1e-6 * grid.cell_volume)
      throw std::logic_error("assign_cells: box split volumes do not add up");
  }

  for (std::size_t j = 0; j < P; ++j) {
    out.orbit_mass[cloud.orbit_of[j]] += out.masses[j];
    if (out.masses[j] <= 0.0) ++out.empty_points;
  }
  double nu_dot_w = 0.0;
  for (std::size_t j = 0; j < P; ++j) nu_dot_w += cloud.masses[j] * weights[j];
  out.dual_objective = nu_dot_w + objective_cells;
  return out;
}

// --- target sampling ---------------------------------------------------------

int default_lump_resolution(int dim) {
  switch (dim) {
    case 1: return 4096;
    case 2: return 512;
    default: return 128;
  }
}

TargetCloud sample_target_cloud(const DensitySpec& spec, double R, int m,
                                double total_mass, std::uint64_t seed,
                                int lump_resolution) {
  const RootSystem& rs = spec.roots();
  const int dim = rs.rank();
  const std::size_t W = rs.group_order();
  if (m < static_cast<int>(W))
    throw std::invalid_argument(
        "sample_target_cloud: m too small to cover orbit structure");
  if (!(R > 0.0)) throw std::invalid_argument("sample_target_cloud: R <= 0");

  const int orbit_count = m / static_cast<int>(W);
  Rng rng(seed);
  TargetCloud cloud;
  cloud.radius = R;

  for (int s = 0; s < orbit_count; ++s) {
    Vec rep;
    std::vector<Vec> orbit;
    bool placed = false;
    for (int attempt = 0; attempt < 4096 && !placed; ++attempt) {
      // Stratified radius, uniform chamber direction.
      const double r =
          R * (s + rng.uniform()) / static_cast<double>(orbit_count);
      Vec dir(dim);
      double n2 = 0.0;
      do {
        n2 = 0.0;
        for (int d = 0; d < dim; ++d) {
          dir[d] = rng.uniform(-1.0, 1.0);
          n2 += dir[d] * dir[d];
        }
      } while (n2 > 1.0 || n2 < 1e-6);
      dir /= std::sqrt(n2);
      Vec y = rs.project_to_chamber(r * dir);
      const double clearance = 1e-4 * std::max(r, 1e-3 * R);
      if (rs.wall_distance(y) < clearance) continue;
      orbit = rs.weyl_orbit(y);
      if (orbit.size() != W) continue;
      rep = y;
      placed = true;
    }
    if (!placed)
      throw std::runtime_error("sample_target_cloud: sampling stalled");
    const int orbit_index = static_cast<int>(cloud.orbits.size());
    std::vector<int> members;
    for (const Vec& p : orbit) {
      members.push_back(static_cast<int>(cloud.points.size()));
      cloud.points.push_back(p);
      cloud.orbit_of.push_back(orbit_index);
    }
    cloud.orbits.push_back(std::move(members));
  }

  // Voronoi mass lumping of f on a fine ball grid.
  const std::size_t P = cloud.points.size();
  cloud.masses.assign(P, 0.0);
  const int res = std::max(lump_resolution, 32);
  const double h = 2.0 * R / res;
  const double vol = std::pow(h, dim);
  const double r2 = R * R;
  Vec x(dim);
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  while (true) {
    double n2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      x[d] = -R + (idx[static_cast<std::size_t>(d)] + 0.5) * h;
      n2 += x[d] * x[d];
    }
    if (n2 <= r2) {
      std::size_t nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < P; ++j) {
        const double d2 = (cloud.points[j] - x).squaredNorm();
        if (d2 < best) {
          best = d2;
          nearest = j;
        }
      }
      cloud.masses[nearest] += spec.target_density(x) * vol;
    }
    int d = dim - 1;
    while (d >= 0) {
      if (++idx[static_cast<std::size_t>(d)] < res) break;
      idx[static_cast<std::size_t>(d)] = 0;
      --d;
    }
    if (d < 0) break;
  }

  // Tie orbit masses exactly, then rescale to the requested total.
  for (const std::vector<int>& orbit : cloud.orbits) {
    double sum = 0.0;
    for (int j : orbit) sum += cloud.masses[static_cast<std::size_t>(j)];
    const double mean = sum / static_cast<double>(orbit.size());
    if (mean <= 0.0)
      throw std::invalid_argument(
          "sample_target_cloud: empty lumping cell; lump grid too coarse "
          "for this m");
    for (int j : orbit) cloud.masses[static_cast<std::size_t>(j)] = mean;
  }
  double sum = pairwise_sum(cloud.masses);
  const double factor = total_mass / sum;
  for (double& nu : cloud.masses) nu *= factor;
  cloud.total_mass = total_mass;
  return cloud;
}

// --- dual ascent -------------------------------------------------------------

namespace {

std::vector<double> expand_orbit_weights(const TargetCloud& cloud,
                                         const std::vector<double>& orbit_w) {
  std::vector<double> w(cloud.size());
  for (std::size_t j = 0; j < cloud.size(); ++j)
    w[j] = orbit_w[cloud.orbit_of[j]];
  return w;
}

}  // namespace

std::pair<std::vector<double>, TransportDiagnostics> solve_weights(
    const TargetCloud& cloud, const SourceGrid& grid, double tol,
    int max_iter) {
  if (!(tol > 1e-12 && tol < 1e-2))
    throw std::invalid_argument("solve_weights: tol out of (1e-12, 1e-2)");
  const std::size_t O = cloud.orbit_count();
  TransportDiagnostics diag;

  std::vector<double> nu_orbit(O, 0.0);
  for (std::size_t j = 0; j < cloud.size(); ++j)
    nu_orbit[cloud.orbit_of[j]] += cloud.masses[j];

  // Quadratic warm start: the Brenier map of a radial stretch k -> R has
  // power weights w_j = (1 - k/R) |y_j|^2 / 2 in the power-cost convention;
  // equivalently cells center near (k/R) y_j.
  const double R = cloud.radius;
  std::vector<double> orbit_w(O, 0.0);
  for (std::size_t A = 0; A < O; ++A) {
    const Vec& y = cloud.points[static_cast<std::size_t>(cloud.orbits[A][0])];
    orbit_w[A] = 0.5 * (1.0 - grid.radius / R) * y.squaredNorm();
  }

  AssignResult res =
      assign_cells(cloud, expand_orbit_weights(cloud, orbit_w), grid, true);

  // Repair empty orbits before Newton: raise their tied weight to the
  // activation gap plus a margin.
  for (int round = 0; round < 64; ++round) {
    std::vector<std::size_t> empty;
    for (std::size_t A = 0; A < O; ++A)
      if (res.orbit_mass[A] <= 0.0) empty.push_back(A);
    if (empty.empty()) break;
    std::vector<double> w = expand_orbit_weights(cloud, orbit_w);
    for (std::size_t A : empty) {
      double gap = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < grid.count(); ++c) {
        const double* xc = grid.centers.data() + c * grid.dim;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cloud.size(); ++j)
          best = std::min(best, reduced_cost(cloud.points[j], w[j], xc,
                                             grid.dim));
        for (int j : cloud.orbits[A]) {
          const double own = reduced_cost(
              cloud.points[static_cast<std::size_t>(j)],
              w[static_cast<std::size_t>(j)], xc, grid.dim);
          gap = std::min(gap, own - best);
        }
      }
      orbit_w[A] += gap + 0.5 * grid.h * (1.0 + R);
    }
    res = assign_cells(cloud, expand_orbit_weights(cloud, orbit_w), grid, true);
  }

  double floor_mass = std::numeric_limits<double>::infinity();
  for (std::size_t A = 0; A < O; ++A)
    floor_mass = std::min({floor_mass, res.orbit_mass[A], nu_orbit[A]});
  const double eps0 = 0.5 * std::max(floor_mass, 0.0);

  auto residual = [&](const AssignResult& r, double* linf_rel) {
    Eigen::VectorXd v(O);
    double worst = 0.0;
    for (std::size_t A = 0; A < O; ++A) {
      v[static_cast<Eigen::Index>(A)] = nu_orbit[A] - r.orbit_mass[A];
      worst = std::max(worst, std::abs(v[static_cast<Eigen::Index>(A)]) /
                                  nu_orbit[A]);
    }
    if (linf_rel) *linf_rel = worst;
    return v;
  };

  double rel = 0.0;
  Eigen::VectorXd r = residual(res, &rel);
  diag.objective_trace.push_back(res.dual_objective);

  int iter = 0;
  for (; iter < max_iter && rel > tol; ++iter) {
    // Tied Newton step with one pinned orbit (the constant-shift gauge).
    const std::size_t pin = static_cast<std::size_t>(
        std::max_element(nu_orbit.begin(), nu_orbit.end()) -
        nu_orbit.begin());
    const Eigen::Index n = static_cast<Eigen::Index>(O) - 1;
    Mat H(n, n);
    Eigen::VectorXd rhs(n);
    {
      Eigen::Index ui = 0;
      for (std::size_t A = 0; A < O; ++A) {
        if (A == pin) continue;
        Eigen::Index uj = 0;
        for (std::size_t B = 0; B < O; ++B) {
          if (B == pin) continue;
          H(ui, uj) = res.orbit_jacobian(static_cast<Eigen::Index>(A),
                                         static_cast<Eigen::Index>(B));
          ++uj;
        }
        rhs(ui) = r(static_cast<Eigen::Index>(A));
        ++ui;
      }
    }
    H.diagonal().array() += 1e-14 * (1.0 + H.trace());
    Eigen::VectorXd delta_red = H.ldlt().solve(rhs);
    std::vector<double> delta(O, 0.0);
    {
      Eigen::Index ui = 0;
      for (std::size_t A = 0; A < O; ++A) {
        if (A == pin) continue;
        delta[A] = delta_red(ui++);
      }
    }

    const double norm0 = r.norm();
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-12) {
      std::vector<double> trial(O);
      for (std::size_t A = 0; A < O; ++A) trial[A] = orbit_w[A] + t * delta[A];
      AssignResult trial_res =
          assign_cells(cloud, expand_orbit_weights(cloud, trial), grid, true);
      double trial_rel = 0.0;
      Eigen::VectorXd trial_r = residual(trial_res, &trial_rel);
      double trial_floor = std::numeric_limits<double>::infinity();
      for (double mass : trial_res.orbit_mass)
        trial_floor = std::min(trial_floor, mass);
      if (trial_floor >= eps0 && trial_r.norm() <= (1.0 - 0.5 * t) * norm0) {
        orbit_w = std::move(trial);
        res = std::move(trial_res);
        r = std::move(trial_r);
        rel = trial_rel;
        diag.objective_trace.push_back(res.dual_objective);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      diag.message = "solve_weights: step stalled (empty-cell deadlock?)";
      break;
    }
  }

  diag.iterations = iter;
  diag.max_rel_cell_residual = rel;
  diag.converged = rel <= tol;
  if (!diag.converged && diag.message.empty())
    diag.message = "solve_weights: max_iter exceeded";

  diag.empty_cells = res.empty_points;
  double per_point = 0.0, spread = 0.0;
  for (std::size_t A = 0; A < O; ++A) {
    const auto& orbit = cloud.orbits[A];
    const double mean = res.orbit_mass[A] / static_cast<double>(orbit.size());
    for (int j : orbit) {
      const double mj = res.masses[static_cast<std::size_t>(j)];
      const double nuj = cloud.masses[static_cast<std::size_t>(j)];
      per_point = std::max(per_point, std::abs(mj - nuj) / nuj);
      if (mean > 0.0)
        spread = std::max(spread, std::abs(mj - mean) / mean);
    }
  }
  diag.per_point_max_residual = per_point;
  diag.orbit_mass_spread = spread;

  double l1 = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) l1 += std::abs(r(i));
  const auto [wmin, wmax] = std::minmax_element(orbit_w.begin(), orbit_w.end());
  diag.duality_gap_estimate = 0.5 * l1 * (*wmax - *wmin);

  return {expand_orbit_weights(cloud, orbit_w), diag};
}

// --- convex potential --------------------------------------------------------

ConvexPotential::ConvexPotential(std::vector<Vec> points,
                                 std::vector<double> envelope_weights,
                                 std::vector<double> masses)
    : points_(std::move(points)),
      weights_(std::move(envelope_weights)),
      masses_(std::move(masses)) {
  if (points_.empty() || points_.size() != weights_.size() ||
      points_.size() != masses_.size())
    throw std::invalid_argument("ConvexPotential: inconsistent inputs");
  // Mass-weighted mean-zero gauge on the weights, then phi(0) = 0.
  double mass = 0.0, moment = 0.0;
  for (std::size_t j = 0; j < points_.size(); ++j) {
    mass += masses_[j];
    moment += masses_[j] * weights_[j];
  }
  const double shift = moment / mass;
  for (double& w : weights_) w -= shift;
  double raw0 = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < points_.size(); ++j)
    raw0 = std::max(raw0, -weights_[j]);
  gauge_ = raw0;
}

double ConvexPotential::value(const Vec& x) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < points_.size(); ++j)
    best = std::max(best, points_[j].dot(x) - weights_[j]);
  return best - gauge_;
}

Vec ConvexPotential::gradient(const Vec& x) const {
  std::size_t arg = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < points_.size(); ++j) {
    const double v = points_[j].dot(x) - weights_[j];
    if (v > best) {
      best = v;
      arg = j;
    }
  }
  return points_[arg];
}

std::vector<int> ConvexPotential::active_set(const Vec& x, double tol) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < points_.size(); ++j)
    best = std::max(best, points_[j].dot(x) - weights_[j]);
  const double scale = 1.0 + std::abs(best);
  std::vector<int> active;
  for (std::size_t j = 0; j < points_.size(); ++j)
    if (points_[j].dot(x) - weights_[j] >= best - tol * scale)
      active.push_back(static_cast<int>(j));
  return active;
}

std::vector<double> ConvexPotential::power_weights() const {
  std::vector<double> w(points_.size());
  for (std::size_t j = 0; j < points_.size(); ++j)
    w[j] = 0.5 * points_[j].squaredNorm() - weights_[j];
  return w;
}

ConvexPotential build_potential(const TargetCloud& cloud,
                                const std::vector<double>& power_weights) {
  std::vector<double> envelope(cloud.size());
  for (std::size_t j = 0; j < cloud.size(); ++j)
    envelope[j] = 0.5 * cloud.points[j].squaredNorm() - power_weights[j];
  return ConvexPotential(cloud.points, std::move(envelope), cloud.masses);
}

// --- Monge-Ampere measure check ----------------------------------------------

double ma_measure_check(const ConvexPotential& phi, const TargetCloud& cloud,
                        const SourceGrid& grid, const Region& region) {
  const std::vector<double> w = phi.power_weights();
  AssignResult full = assign_cells(cloud, w, grid, false);

  if (region.kind == Region::kFullBall) {
    const double integral = grid.total_mass;
    double matched = 0.0;
    for (std::size_t j = 0; j < cloud.size(); ++j)
      matched += cloud.masses[j];  // fraction is 1 on the full ball
    return std::abs(integral - matched) / integral;
  }

  // Box region: clip every grid box against the region, then split the
  // kept part among the owning cells exactly as in assign_cells.
  const int dim = grid.dim;
  std::vector<double> region_mass(cloud.size(), 0.0);
  double region_integral = 0.0;
  std::vector<double> cost(cloud.size());
  const double half_h = 0.5 * grid.h;
  const Vec lo_off = Vec::Constant(dim, -half_h);
  const Vec hi_off = Vec::Constant(dim, half_h);

  for (std::size_t c = 0; c < grid.count(); ++c) {
    const double* xc = grid.centers.data() + c * dim;
    // Quick reject/accept against the region box.
    bool outside = false, inside = true;
    for (int d = 0; d < dim; ++d) {
      if (xc[d] - half_h >= region.hi[d] || xc[d] + half_h <= region.lo[d])
        outside = true;
      if (xc[d] - half_h < region.lo[d] || xc[d] + half_h > region.hi[d])
        inside = false;
    }
    if (outside) continue;
    const double gc = grid.density[c];

    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      const double q = reduced_cost(cloud.points[j], w[j], xc, dim);
      cost[j] = q;
      if (q < best_cost) {
        best_cost = q;
        best = j;
      }
    }
    std::vector<int> contenders;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      if (j == best) continue;
      double slack = 0.0;
      for (int d = 0; d < dim; ++d)
        slack += std::abs(cloud.points[j][d] - cloud.points[best][d]);
      if (cost[j] - best_cost <= half_h * slack)
        contenders.push_back(static_cast<int>(j));
    }
    contenders.push_back(static_cast<int>(best));

    Vec center(dim);
    for (int d = 0; d < dim; ++d) center[d] = xc[d];
    for (int i : contenders) {
      ConvexCell cell = ConvexCell::box(center + lo_off, center + hi_off);
      if (!inside) {
        for (int d = 0; d < dim; ++d) {
          Vec n = Vec::Zero(dim);
          n[d] = 1.0;
          cell.clip(n, region.hi[d], -100 - d);
          n[d] = -1.0;
          cell.clip(n, -region.lo[d], -200 - d);
          if (cell.empty()) break;
        }
      }
      if (cell.empty()) continue;
      for (int l : contenders) {
        if (l == i) continue;
        Vec n = cloud.points[static_cast<std::size_t>(l)] -
                cloud.points[static_cast<std::size_t>(i)];
        const double off =
            0.5 * (cloud.points[static_cast<std::size_t>(l)].squaredNorm() -
                   cloud.points[static_cast<std::size_t>(i)].squaredNorm()) -
            w[static_cast<std::size_t>(l)] + w[static_cast<std::size_t>(i)];
        cell.clip(n, off, 0);
        if (cell.empty()) break;
      }
      if (cell.empty()) continue;
      const double vol = cell.volume();
      if (vol <= 0.0) continue;
      region_mass[static_cast<std::size_t>(i)] += gc * vol;
      region_integral += gc * vol;
    }
  }

  if (!(region_integral > 0.0))
    throw std::domain_error("ma_measure_check: region has no source mass");
  double matched = 0.0;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    if (region_mass[j] <= 0.0) continue;
    if (full.masses[j] <= 0.0)
      throw std::domain_error("ma_measure_check: empty full cell");
    matched += cloud.masses[j] * region_mass[j] / full.masses[j];
  }
  return std::abs(region_integral - matched) / region_integral;
}

// --- rank-1 closed form -------------------------------------------------------

namespace {

double simpson(const std::function<double(double)>& f, double a, double b,
               double fa, double fm, double fb, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double split = left + right;
  if (depth <= 0 || std::abs(split - whole) <= 15.0 * tol)
    return split + (split - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, tol, 48);
}

}  // namespace

double rank1_closed_form(const DensitySpec& spec, double x) {
  if (spec.roots().rank() != 1)
    throw std::invalid_argument("rank1_closed_form: rank must be 1");
  const double ax = std::abs(x) * spec.roots().positive_roots()[0][0];
  if (ax > spec.overflow_radius())
    throw std::domain_error("rank1_closed_form: beyond overflow radius");
  const double t = std::abs(x);
  if (t == 0.0) return 0.0;
  double cube;  // K'(t)^3
  if (spec.u().is_zero()) {
    if (2.0 * t <= 0.5) {
      // sinh(2t) - 2t = sum_{m>=1} (2t)^(2m+1)/(2m+1)!, summed directly to
      // avoid the cancellation in the subtraction.
      const double t2 = t * t;
      double term = 8.0 * t2 * t / 6.0;  // (2t)^3/3!
      double sum = 0.0;
      int fact_index = 3;
      while (std::abs(term) > 1e-20 * (1.0 + sum)) {
        sum += term;
        term *= 4.0 * t2 / ((fact_index + 1.0) * (fact_index + 2.0));
        fact_index += 2;
      }
      cube = 0.75 * sum;
    } else {
      cube = 0.75 * (std::sinh(2.0 * t) - 2.0 * t);
    }
  } else {
    const auto integrand = [&spec](double s) {
      Vec p(1);
      p[0] = s;
      const double sh = std::sinh(s);
      return std::exp(spec.u_value(p)) * sh * sh;
    };
    cube = 3.0 * adaptive_simpson(integrand, 0.0, t, 1e-14 * (1.0 + t));
  }
  const double kp = std::cbrt(cube);
  return x >= 0.0 ? kp : -kp;
}

// --- constructive sequence -----------------------------------------------------

std::vector<SequenceStage> solve_sequence(const DensitySpec& spec,
                                          const std::vector<double>& k_list,
                                          const std::vector<int>& m_schedule,
                                          const SequenceOptions& options) {
  if (k_list.empty())
    throw std::invalid_argument("solve_sequence: empty k list");
  if (m_schedule.size() != k_list.size())
    throw std::invalid_argument("solve_sequence: schedule length mismatch");
  for (std::size_t i = 1; i < k_list.size(); ++i)
    if (!(k_list[i] > k_list[i - 1]))
      throw std::invalid_argument("solve_sequence: k list must increase");

  const int dim = spec.roots().rank();
  const int balance_res = options.balance_resolution > 0
                              ? options.balance_resolution
                              : default_balance_resolution(dim);

  // Fixed evaluation sets for the compact-convergence and Lipschitz monitors.
  const double monitor_radius = 0.5 * k_list.front();
  std::vector<Vec> monitor_points;
  if (dim == 1) {
    for (int i = 0; i <= 100; ++i) {
      Vec p(1);
      p[0] = -monitor_radius + 2.0 * monitor_radius * i / 100.0;
      monitor_points.push_back(p);
    }
  } else {
    Rng rng(0x5eedCafeULL);
    while (monitor_points.size() < 256) {
      Vec p(dim);
      double n2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        p[d] = rng.uniform(-1.0, 1.0);
        n2 += p[d] * p[d];
      }
      if (n2 > 1.0) continue;
      monitor_points.push_back(monitor_radius * p);
    }
  }

  std::vector<SequenceStage> stages;
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    SequenceStage stage;
    stage.k = k_list[i];
    stage.eps = options.one_over_k ? 1.0 / stage.k : options.fixed_eps;
    const DensitySpec stage_spec = spec.with_regularization(stage.eps);
    stage.R = balance_radius(stage_spec, stage.k, balance_res);

    SourceGrid grid =
        SourceGrid::build(stage_spec, stage.k, options.grid_resolution);
    const int lump =
        options.lump_resolution > 0
            ? options.lump_resolution
            : std::max(options.grid_resolution, default_lump_resolution(dim));
    TargetCloud cloud = sample_target_cloud(
        stage_spec, stage.R, m_schedule[i], grid.total_mass,
        options.seed + 1000 * i, lump);
    auto [weights, diag] =
        solve_weights(cloud, grid, options.tol, options.max_iter);
    if (!diag.converged)
      throw std::runtime_error("solve_sequence: stage k=" +
                               std::to_string(stage.k) +
                               " failed: " + diag.message);
    stage.power_weights = weights;
    stage.potential = build_potential(cloud, weights);
    stage.diagnostics = diag;
    stage.cloud = std::move(cloud);

    if (!stages.empty()) {
      double sup = 0.0;
      for (const Vec& p : monitor_points)
        sup = std::max(sup, std::abs(stage.potential.value(p) -
                                     stages.back().potential.value(p)));
      stage.sup_diff_prev = sup;
    }
    // Slope bound on B_{k/2}: subgradients are target points, so this stays
    // below R_k automatically; report the attained maximum.
    double lip = 0.0;
    Rng rng(0xb0b0 + i);
    for (int s = 0; s < 200; ++s) {
      Vec p(dim);
      double n2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        p[d] = rng.uniform(-1.0, 1.0);
        n2 += p[d] * p[d];
      }
      if (n2 > 1.0) {
        --s;
        continue;
      }
      p *= 0.5 * stage.k;
      lip = std::max(lip, stage.potential.gradient(p).norm());
    }
    stage.lipschitz_bound = lip;
    stages.push_back(std::move(stage));
  }
  return stages;
}

}  // namespace weylma
