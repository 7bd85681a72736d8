#ifndef WEYLMA_ROOT_SYSTEM_HPP
#define WEYLMA_ROOT_SYSTEM_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace weylma {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Reflection of x in the hyperplane orthogonal to root:
/// s_a(x) = x - 2 <a,x>/<a,a> a.
Vec reflect(const Vec& root, const Vec& x);

/// A reduced finite root system on a rank-n Euclidean space, identified with
/// a Cartan subalgebra. Roots are covectors evaluated as a(x) = <a,x>; the
/// stored normalization makes a(x) the spectral parameter of ad(x) on the
/// root space (for A1 this pins a(x) = x).
///
/// Built-ins: A1, A2, B2, G2, A3. Custom positive-root lists are accepted and
/// validated (reduced, reflection-closed, consistent positivity, finite
/// generated group).
class RootSystem {
 public:
  /// Load a catalog system by name. `scale` multiplies every root, exposing
  /// the choice of invariant inner product as configuration.
  static RootSystem catalog(const std::string& name, double scale = 1.0);

  /// Build from an explicit list of positive roots. Throws
  /// std::invalid_argument when validation fails.
  static RootSystem custom(const std::vector<Vec>& positive_roots,
                           double scale = 1.0,
                           const std::string& name = "custom");

  const std::string& name() const { return name_; }
  int rank() const { return rank_; }
  double scale() const { return scale_; }
  const std::vector<Vec>& positive_roots() const { return positive_; }
  /// Simple roots; their reflections generate the Weyl group.
  const std::vector<Vec>& generators() const { return simple_; }
  /// Order of the generated reflection group.
  std::size_t group_order() const { return elements_.size(); }
  /// All group elements as orthogonal matrices (identity first).
  const std::vector<Mat>& group_elements() const { return elements_; }

  /// Orbit of x under the generated reflection group. Size divides the group
  /// order; chamber-interior points have full orbits.
  std::vector<Vec> weyl_orbit(const Vec& x) const;

  /// Unique orbit representative with a(x) >= 0 for every simple root,
  /// reached by iterated reflections. Idempotent. Throws std::runtime_error
  /// if the iteration cap (|W| * rank) is exceeded, which signals invalid
  /// root data.
  Vec project_to_chamber(const Vec& x) const;

  /// True when a(x) >= -slack for every simple root.
  bool in_closed_chamber(const Vec& x, double slack = 0.0) const;

  /// min over positive roots of |a(x)| / |a|: Euclidean distance to the
  /// nearest reflection hyperplane.
  double wall_distance(const Vec& x) const;

 private:
  RootSystem(std::string name, int rank, std::vector<Vec> positive,
             double scale);

  void validate_and_finish(std::size_t expected_order);

  std::string name_;
  int rank_ = 0;
  double scale_ = 1.0;
  std::vector<Vec> positive_;
  std::vector<Vec> simple_;
  std::vector<Mat> elements_;
};

}  // namespace weylma

#endif
