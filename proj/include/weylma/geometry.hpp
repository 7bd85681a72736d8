#ifndef WEYLMA_GEOMETRY_HPP
#define WEYLMA_GEOMETRY_HPP

#include <functional>
#include <string>
#include <vector>

#include "weylma/root_system.hpp"
#include "weylma/transport.hpp"

namespace weylma {

/// Per-root eigen-data of the operators entering the invariant metric.
/// With a = a(x) and mu = grad:
///   l   = sinh(a)/a            (root-space eigenvalue of L)
///   d   = (a(mu)/a) cosh(a)    (root-space eigenvalue of D mu)
///   phi = l/d                  (root-space eigenvalue of Phi)
///   amu = a(mu)                (root-space parameter of ad mu)
/// The identity phi * amu = tanh(a) holds by construction.
struct RootSpectralData {
  double root_value = 0.0;  // a(x)
  double l = 0.0;
  double d = 0.0;
  double phi = 0.0;
  double amu = 0.0;
};

struct SpectralMetric {
  Vec x;
  Vec grad;
  Mat hess;  // symmetrized Cartan block of D mu
  std::vector<RootSpectralData> roots;
};

/// Assemble the spectral data at x from the gradient and Hessian of the
/// invariant potential. Near a wall (|a(x)| < 1e-4) the ratio a(mu)/a(x) is
/// replaced by the directional second derivative a^T H a / |a|^2.
SpectralMetric spectral_data(const RootSystem& rs, const Vec& x,
                             const Vec& grad, const Mat& hess,
                             double overflow_radius = 350.0);

/// e^{-u} det(hess) prod_{a>0} (a(mu)/sinh a(x))^2. Constant (and 1 after
/// homothety normalization) exactly when the potential solves the invariant
/// Monge-Ampere equation with Ricci datum u. Throws std::domain_error when
/// det(hess) <= 0 (non-convex input).
double ricci_defect(const SpectralMetric& sm, double u_value);

struct PositivityVerdict {
  bool cartan_pd = false;          // hess positive-definite
  bool dmu_positive = false;       // all d > 0
  bool submersion_positive = false;  // phi (1 - amu^2 phi^2) > 0
  std::string failed;              // first failed condition, empty when ok
  bool ok() const { return cartan_pd && dmu_positive && submersion_positive; }
};

/// Positivity of Phi and of Phi + Phi (ad mu Phi)^2 in spectral form.
PositivityVerdict positivity_check(const SpectralMetric& sm);

struct MetricReport {
  std::vector<double> horizontal;   // phi d^2 (1 - amu^2 phi^2) per root
  std::vector<double> horizontal_simplified;  // amu tanh(a)/a^2
  std::vector<double> vertical;     // 1/phi per root
  Mat cartan_block;                 // horizontal and vertical Cartan block
  double assembly_mismatch = 0.0;   // max rel gap between the two routes
  double defect = 0.0;              // ricci_defect with u = 0
  bool positive = false;
};

/// Eigenvalues of the metric in the submersion frame. Throws
/// std::domain_error when the positivity check fails.
MetricReport metric_eigenvalues(const SpectralMetric& sm);

struct GrowthReport {
  std::vector<double> horizon;  // geometrically spaced T
  std::vector<double> length;   // L(T) = integral_0^T sqrt(stiffness)
  double growth_rate = 0.0;     // fitted exponential rate of the stiffness
  bool diverging = false;
};

/// Radial-length trend along a chamber ray: `radial_stiffness(t)` is the
/// smallest Hessian eigenvalue of the potential at parameter t. Divergence
/// of L(T) without slowdown is evidence (not proof) of completeness.
GrowthReport completeness_trend(
    const std::function<double(double)>& radial_stiffness, double t_max,
    int levels = 8);

/// Max over a regular grid of |d mu_i/dx_j - d mu_j/dx_i| by central
/// differences; zero for gradient maps. Throws std::invalid_argument when
/// the grid spacing exceeds `spacing_cap`.
double closedness_check(const std::function<Vec(const Vec&)>& mu,
                        const Vec& lo, const Vec& hi, int points_per_axis,
                        double spacing_cap = 0.5);

struct PropernessReport {
  double min_terminal_increment = 0.0;
  bool proper = false;
};

/// Walk each ray to `radius` and require the potential to keep rising with
/// non-shrinking increments.
PropernessReport properness_check(const ConvexPotential& phi,
                                  const std::vector<Vec>& rays, double radius,
                                  int samples = 16);

struct QuadraticFit {
  Vec grad;
  Mat hess;
  double fit_residual = 0.0;
  // Active envelope slope at the center and the spread of slopes across the
  // stencil, for agreement checks against the fitted gradient.
  Vec envelope_slope;
  double slope_spread = 0.0;
  bool degenerate = false;  // single affine piece: no curvature information
};

/// Moving least-squares quadratic fit of f on a symmetric stencil inside the
/// ball of `stencil_radius` around x. Exact for polynomials of degree <= 2.
QuadraticFit fit_local_quadratic(const std::function<double(const Vec&)>& f,
                                 const Vec& x, double stencil_radius);

/// Same fit on a convex potential, also reporting envelope slope data.
QuadraticFit fit_local_quadratic(const ConvexPotential& phi, const Vec& x,
                                 double stencil_radius);

}  // namespace weylma

#endif
