#ifndef WEYLMA_DENSITIES_HPP
#define WEYLMA_DENSITIES_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "weylma/root_system.hpp"

namespace weylma {

/// Expression over the two basic Weyl-invariant generators
///   r2 = |x|^2          (squared radius)
///   p2 = prod_{a>0} a(x)^2   (squared positive-root product)
/// with constants, +, -, *, and integer powers. Functions built this way are
/// invariant by construction, which is how the Ricci datum u is ingested.
class InvariantExpr {
 public:
  static InvariantExpr zero();
  /// Parse e.g. "0.1*r2 + 0.02*r2^2 - 3*p2". Throws std::invalid_argument
  /// on syntax errors.
  static InvariantExpr parse(const std::string& text);

  double eval(double r2, double p2) const;
  bool is_zero() const { return nodes_.empty(); }
  const std::string& text() const { return text_; }

 private:
  struct Node {
    enum Kind { kConst, kR2, kP2, kAdd, kSub, kMul, kNeg, kPow } kind;
    double value = 0.0;
    int a = -1, b = -1;
    int exponent = 1;
  };
  double eval_node(int idx, double r2, double p2) const;

  std::vector<Node> nodes_;  // empty means identically zero
  int root_ = -1;
  std::string text_ = "zero";
};

/// Quadrature result for a ball integral.
struct MassReport {
  double radius = 0.0;
  double mass = 0.0;
  long quadrature_cells = 0;
  double estimated_error = 0.0;
};

/// The data of the invariant Monge-Ampere problem: source density
/// g(x) = e^{u(x)} prod_{a>0} sinh^2 a(x) + eps on the Cartan side and target
/// density f(y) = prod_{a>0} a(y)^2 + eps on the gradient side. Pairs
/// {a, -a} contribute matching factors, so the product over all roots is the
/// square of the product over positive roots.
class DensitySpec {
 public:
  DensitySpec(RootSystem rs, InvariantExpr u = InvariantExpr::zero(),
              double regularization = 0.0, double overflow_radius = 350.0);

  const RootSystem& roots() const { return rs_; }
  const InvariantExpr& u() const { return u_; }
  double regularization() const { return eps_; }
  double overflow_radius() const { return overflow_radius_; }

  DensitySpec with_regularization(double eps) const;

  double u_value(const Vec& x) const;

  /// e^{u(x)} * prod sinh^2 a(x) + eps. Throws std::domain_error when any
  /// |a(x)| exceeds the overflow radius (sinh^2 leaves double range near 710).
  double source_density(const Vec& x) const;

  /// prod a(y)^2 + eps.
  double target_density(const Vec& y) const;

 private:
  RootSystem rs_;
  InvariantExpr u_;
  double eps_;
  double overflow_radius_;
};

using DensityFn = std::function<double(const Vec&)>;

/// Midpoint-rule quadrature over the ball of given radius: uniform tensor
/// grid of `resolution` cells per dimension on the bounding box, keeping
/// cells whose center lies inside the ball. The center pattern scales with
/// the radius, so the result is smooth and monotone in the radius.
/// `estimated_error` is a one-step Richardson difference against half the
/// resolution. Requires resolution >= 16; cell count is capped.
MassReport ball_mass(const DensityFn& density, int dim, double radius,
                     int resolution);

/// Same quadrature without the error estimate (for inner loops).
double ball_mass_plain(const DensityFn& density, int dim, double radius,
                       int resolution);

/// Solves  integral_{B_R} (target + eps) = integral_{B_k} (source + eps)
/// for R by bracketing and bisection on the monotone target mass. The
/// returned radius matches the masses to 1e-8 relative or better.
double balance_radius(const DensitySpec& spec, double k, int resolution);

/// Default quadrature resolution for mass balancing at a given rank.
int default_balance_resolution(int dim);

}  // namespace weylma

#endif
