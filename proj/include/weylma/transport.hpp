#ifndef WEYLMA_TRANSPORT_HPP
#define WEYLMA_TRANSPORT_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "weylma/densities.hpp"
#include "weylma/root_system.hpp"

namespace weylma {

/// Discretization of the target measure f(y) dy on the ball B_R: points come
/// in full Weyl orbits and orbit members carry equal masses.
struct TargetCloud {
  std::vector<Vec> points;
  std::vector<double> masses;
  std::vector<int> orbit_of;               // point index -> orbit index
  std::vector<std::vector<int>> orbits;    // orbit index -> point indices
  double total_mass = 0.0;
  double radius = 0.0;

  std::size_t size() const { return points.size(); }
  std::size_t orbit_count() const { return orbits.size(); }
};

/// Midpoint-box discretization of the source measure g(x) dx on B_k:
/// uniform boxes on [-k, k]^n whose centers lie inside the ball, each
/// carrying the density value at its center.
struct SourceGrid {
  int dim = 0;
  int resolution = 0;
  double radius = 0.0;
  double h = 0.0;
  std::vector<double> centers;  // flat, dim-strided
  std::vector<double> density;  // g at each center
  double cell_volume = 0.0;
  double total_mass = 0.0;

  std::size_t count() const { return density.size(); }
  Vec center(std::size_t i) const {
    return Eigen::Map<const Vec>(centers.data() + i * dim, dim);
  }

  static SourceGrid build(const DensitySpec& spec, double k, int resolution);
};

struct TransportDiagnostics {
  double max_rel_cell_residual = 0.0;  // per tied orbit of Laguerre cells
  int iterations = 0;
  int empty_cells = 0;
  double duality_gap_estimate = 0.0;
  // Per-point residual including the intra-orbit spread induced by the
  // (non-Weyl-symmetric) source grid; the tied solver cannot reduce this
  // below the grid's own symmetry error.
  double per_point_max_residual = 0.0;
  double orbit_mass_spread = 0.0;
  std::vector<double> objective_trace;  // concave dual value, accepted steps
  bool converged = false;
  std::string message;
};

/// Per-point Laguerre cell masses for power weights w (cost 0.5|x-y|^2 - w).
/// Interior boxes are assigned whole to the minimizing point; boxes crossed
/// by cell boundaries are split exactly along the bisector planes, so masses
/// are continuous in w. Whole-box ties go to the lowest point index
/// (measure zero). Also returns the tied Jacobian d(orbit mass)/d(orbit
/// weight) and the dual objective.
struct AssignResult {
  std::vector<double> masses;       // per point
  std::vector<double> orbit_mass;  // per orbit
  Mat orbit_jacobian;               // filled when requested
  double dual_objective = 0.0;
  int empty_points = 0;
};

AssignResult assign_cells(const TargetCloud& cloud,
                          const std::vector<double>& weights,
                          const SourceGrid& grid, bool with_jacobian);

/// Chamber-stratified target sample replicated across Weyl orbits, with
/// masses from Voronoi lumping of f on a fine ball grid, orbit-averaged and
/// rescaled to `total_mass`. `m` is the requested total point count; the
/// realized count is the largest multiple of the orbit size not exceeding m.
TargetCloud sample_target_cloud(const DensitySpec& spec, double R, int m,
                                double total_mass, std::uint64_t seed,
                                int lump_resolution);

/// Lumping-grid resolution fine enough for dense clouds at this rank.
int default_lump_resolution(int dim);

/// Damped Newton ascent on the concave Kantorovich dual with one unknown per
/// Weyl orbit (weights of orbit members are tied, making the potential
/// exactly invariant). Steps are halved whenever a cell would empty or the
/// residual norm fails to contract.
std::pair<std::vector<double>, TransportDiagnostics> solve_weights(
    const TargetCloud& cloud, const SourceGrid& grid, double tol,
    int max_iter = 100);

/// Convex potential phi(x) = max_j (<x, y_j> - psi_j) - gauge, the upper
/// envelope of the supporting hyperplanes with slopes y_j. Weights are
/// stored in the mass-weighted mean-zero gauge and phi(0) = 0.
class ConvexPotential {
 public:
  ConvexPotential() = default;
  ConvexPotential(std::vector<Vec> points, std::vector<double> envelope_weights,
                  std::vector<double> masses);

  double value(const Vec& x) const;
  /// Slope of the active piece (lowest index wins exact ties).
  Vec gradient(const Vec& x) const;
  /// All indices whose pieces are active at x within `tol` of the max.
  std::vector<int> active_set(const Vec& x, double tol = 1e-12) const;

  const std::vector<Vec>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& masses() const { return masses_; }
  double gauge() const { return gauge_; }
  /// Power-diagram weights equivalent to this envelope.
  std::vector<double> power_weights() const;

  bool valid() const { return !points_.empty(); }

 private:
  std::vector<Vec> points_;
  std::vector<double> weights_;
  std::vector<double> masses_;
  double gauge_ = 0.0;
};

ConvexPotential build_potential(const TargetCloud& cloud,
                                const std::vector<double>& power_weights);

/// Region for Monge-Ampere measure checks: the full solved ball or an
/// axis-aligned box (clipped exactly against the cells).
struct Region {
  enum Kind { kFullBall, kBox } kind = kFullBall;
  Vec lo, hi;

  static Region full_ball() { return Region{}; }
  static Region box(const Vec& lo, const Vec& hi) {
    Region r;
    r.kind = kBox;
    r.lo = lo;
    r.hi = hi;
    return r;
  }
};

/// | integral_B g - sum_j nu_j * (mass fraction of cell j inside B) |
/// relative to integral_B g, evaluated on the assignment grid.
double ma_measure_check(const ConvexPotential& phi, const TargetCloud& cloud,
                        const SourceGrid& grid, const Region& region);

/// Closed-form gradient of the rank-1 potential:
/// K'(x)^3 = 3 integral_0^x e^{u(s)} sinh^2(s) ds, an odd function; for
/// u == 0 this is ((3/4)(sinh 2x - 2x))^{1/3} with a series near zero.
/// Ignores the regularization (it solves the eps = 0 problem).
double rank1_closed_form(const DensitySpec& spec, double x);

/// One stage of the constructive existence scheme run at finite k.
struct SequenceStage {
  double k = 0.0;
  double eps = 0.0;
  double R = 0.0;
  TargetCloud cloud;
  std::vector<double> power_weights;
  ConvexPotential potential;
  TransportDiagnostics diagnostics;
  double sup_diff_prev = 0.0;   // sup |phi_k - phi_prev| on the monitor ball
  double lipschitz_bound = 0.0; // max |grad phi| sampled on B_{k/2}
};

struct SequenceOptions {
  int grid_resolution = 2048;
  int lump_resolution = 0;  // 0: use grid_resolution
  double tol = 1e-6;
  int max_iter = 100;
  std::uint64_t seed = 1;
  // Regularization per stage: eps = 1/k when one_over_k, else fixed value.
  bool one_over_k = true;
  double fixed_eps = 0.0;
  int balance_resolution = 0;  // 0: rank default
};

std::vector<SequenceStage> solve_sequence(const DensitySpec& spec,
                                          const std::vector<double>& k_list,
                                          const std::vector<int>& m_schedule,
                                          const SequenceOptions& options);

}  // namespace weylma

#endif
