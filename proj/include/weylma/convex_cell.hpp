#ifndef WEYLMA_CONVEX_CELL_HPP
#define WEYLMA_CONVEX_CELL_HPP

#include <Eigen/Dense>
#include <vector>

#include "weylma/root_system.hpp"

namespace weylma {

/// Moments of a convex region: volume, integral of x, integral of |x|^2.
struct CellMoments {
  double volume = 0.0;
  Vec first;
  double second = 0.0;
};

/// Convex polytope in dimension 1, 2 or 3, built from an axis-aligned box
/// and cut down by half-spaces {x : <n,x> <= c}. Tracks which clip plane
/// produced each boundary facet so that interface measures (the Jacobian of
/// power-cell masses with respect to weights) can be read off after clipping.
class ConvexCell {
 public:
  static ConvexCell box(const Vec& lo, const Vec& hi);

  int dim() const { return dim_; }
  bool empty() const;

  /// Cut by {x : <n,x> <= c}. The normal need not be unit length.
  void clip(const Vec& n, double c, int plane_id);

  double volume() const;
  CellMoments moments() const;

  /// (d-1)-dimensional measure of the boundary facet created by clip plane
  /// `plane_id` (0 when the plane does not bound this cell). In dimension 1
  /// the measure of a point is 1.
  double facet_measure(int plane_id) const;

 private:
  int dim_ = 0;
  double scale_ = 1.0;  // geometric tolerance reference

  // dim 1: interval [a, b] with the plane id that produced each endpoint.
  double a_ = 0.0, b_ = 0.0;
  int id_a_ = -1, id_b_ = -1;
  bool empty1_ = false;

  // dim 2: counter-clockwise polygon; edge j runs v2_[j] -> v2_[j+1 mod m]
  // and carries eid_[j].
  std::vector<Eigen::Vector2d> v2_;
  std::vector<int> eid_;

  // dim 3: faces as coordinate loops with outward orientation.
  struct Face {
    std::vector<Eigen::Vector3d> loop;
    int id = -1;
  };
  std::vector<Face> faces_;

  void clip1(double n, double c, int plane_id);
  void clip2(const Eigen::Vector2d& n, double c, int plane_id);
  void clip3(const Eigen::Vector3d& n, double c, int plane_id);
};

}  // namespace weylma

#endif
