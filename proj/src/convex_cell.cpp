#include "weylma/convex_cell.hpp"

#include <cmath>
#include <stdexcept>

namespace weylma {

namespace {
constexpr double kRelTol = 1e-12;
}

ConvexCell ConvexCell::box(const Vec& lo, const Vec& hi) {
  ConvexCell cell;
  cell.dim_ = static_cast<int>(lo.size());
  cell.scale_ = (hi - lo).norm() + hi.norm() + lo.norm();
  switch (cell.dim_) {
    case 1:
      cell.a_ = lo[0];
      cell.b_ = hi[0];
      break;
    case 2: {
      cell.v2_ = {{lo[0], lo[1]}, {hi[0], lo[1]}, {hi[0], hi[1]}, {lo[0], hi[1]}};
      cell.eid_ = {-1, -2, -3, -4};
      break;
    }
    case 3: {
      const double x0 = lo[0], y0 = lo[1], z0 = lo[2];
      const double x1 = hi[0], y1 = hi[1], z1 = hi[2];
      using V3 = Eigen::Vector3d;
      const V3 v000(x0, y0, z0), v100(x1, y0, z0), v010(x0, y1, z0),
          v110(x1, y1, z0), v001(x0, y0, z1), v101(x1, y0, z1),
          v011(x0, y1, z1), v111(x1, y1, z1);
      // Outward-oriented faces of the box.
      cell.faces_ = {
          {{v000, v010, v110, v100}, -1},  // z = z0, normal -z
          {{v001, v101, v111, v011}, -2},  // z = z1, normal +z
          {{v000, v100, v101, v001}, -3},  // y = y0, normal -y
          {{v010, v011, v111, v110}, -4},  // y = y1, normal +y
          {{v000, v001, v011, v010}, -5},  // x = x0, normal -x
          {{v100, v110, v111, v101}, -6},  // x = x1, normal +x
      };
      break;
    }
    default:
      throw std::invalid_argument("ConvexCell: dimension must be 1, 2 or 3");
  }
  return cell;
}

bool ConvexCell::empty() const {
  switch (dim_) {
    case 1: return empty1_ || !(b_ > a_);
    case 2: return v2_.size() < 3;
    default: return faces_.size() < 3;
  }
}

void ConvexCell::clip(const Vec& n, double c, int plane_id) {
  if (empty()) return;
  switch (dim_) {
    case 1: clip1(n[0], c, plane_id); break;
    case 2: clip2(Eigen::Vector2d(n[0], n[1]), c, plane_id); break;
    default: clip3(Eigen::Vector3d(n[0], n[1], n[2]), c, plane_id); break;
  }
}

void ConvexCell::clip1(double n, double c, int plane_id) {
  if (n == 0.0) {
    if (c < 0.0) empty1_ = true;
    return;
  }
  const double cut = c / n;
  if (n > 0.0) {
    if (cut < b_) {
      b_ = cut;
      id_b_ = plane_id;
    }
  } else {
    if (cut > a_) {
      a_ = cut;
      id_a_ = plane_id;
    }
  }
  if (!(b_ > a_)) empty1_ = true;
}

void ConvexCell::clip2(const Eigen::Vector2d& n, double c, int plane_id) {
  const double eps = kRelTol * scale_ * (n.norm() + std::abs(c) / scale_);
  std::vector<Eigen::Vector2d> nv;
  std::vector<int> nid;
  const std::size_t m = v2_.size();
  nv.reserve(m + 2);
  nid.reserve(m + 2);
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::Vector2d& p = v2_[j];
    const Eigen::Vector2d& q = v2_[(j + 1) % m];
    const double sp = n.dot(p) - c;
    const double sq = n.dot(q) - c;
    const bool pin = sp <= eps;
    const bool qin = sq <= eps;
    if (pin) {
      nv.push_back(p);
      nid.push_back(eid_[j]);
      if (!qin) {
        const double t = sp / (sp - sq);
        nv.push_back(p + t * (q - p));
        nid.push_back(plane_id);
      }
    } else if (qin) {
      const double t = sp / (sp - sq);
      nv.push_back(p + t * (q - p));
      nid.push_back(eid_[j]);
    }
  }
  v2_ = std::move(nv);
  eid_ = std::move(nid);
}

void ConvexCell::clip3(const Eigen::Vector3d& n, double c, int plane_id) {
  const double eps = kRelTol * scale_ * (n.norm() + std::abs(c) / scale_);
  std::vector<Face> kept;
  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> segments;
  const double seg_tol = 1e-9 * scale_;

  for (const Face& face : faces_) {
    const std::size_t m = face.loop.size();
    std::vector<Eigen::Vector3d> nl;
    nl.reserve(m + 2);
    std::vector<Eigen::Vector3d> crossings;
    for (std::size_t j = 0; j < m; ++j) {
      const Eigen::Vector3d& p = face.loop[j];
      const Eigen::Vector3d& q = face.loop[(j + 1) % m];
      const double sp = n.dot(p) - c;
      const double sq = n.dot(q) - c;
      const bool pin = sp <= eps;
      const bool qin = sq <= eps;
      if (pin) {
        nl.push_back(p);
        if (!qin) {
          const double t = sp / (sp - sq);
          Eigen::Vector3d ip = p + t * (q - p);
          nl.push_back(ip);
          crossings.push_back(ip);
        }
      } else if (qin) {
        const double t = sp / (sp - sq);
        Eigen::Vector3d ip = p + t * (q - p);
        nl.push_back(ip);
        crossings.push_back(ip);
      }
    }
    if (nl.size() >= 3) kept.push_back(Face{std::move(nl), face.id});
    if (crossings.size() >= 2 &&
        (crossings[0] - crossings[1]).norm() > seg_tol)
      segments.emplace_back(crossings[0], crossings[1]);
  }

  // Chain the crossing segments into the cap face.
  if (segments.size() >= 3) {
    std::vector<Eigen::Vector3d> loop;
    std::vector<bool> used(segments.size(), false);
    loop.push_back(segments[0].first);
    loop.push_back(segments[0].second);
    used[0] = true;
    bool progress = true;
    while (progress) {
      progress = false;
      for (std::size_t s = 0; s < segments.size(); ++s) {
        if (used[s]) continue;
        const Eigen::Vector3d& tail = loop.back();
        if ((segments[s].first - tail).norm() <= seg_tol) {
          loop.push_back(segments[s].second);
          used[s] = true;
          progress = true;
        } else if ((segments[s].second - tail).norm() <= seg_tol) {
          loop.push_back(segments[s].first);
          used[s] = true;
          progress = true;
        }
      }
    }
    if ((loop.front() - loop.back()).norm() <= seg_tol) loop.pop_back();
    if (loop.size() >= 3) {
      // Orient the cap outward: its normal must align with n.
      Eigen::Vector3d newell = Eigen::Vector3d::Zero();
      for (std::size_t j = 0; j < loop.size(); ++j)
        newell += loop[j].cross(loop[(j + 1) % loop.size()]);
      if (newell.dot(n) < 0.0) std::reverse(loop.begin(), loop.end());
      kept.push_back(Face{std::move(loop), plane_id});
    }
  }
  faces_ = std::move(kept);
}

double ConvexCell::volume() const { return moments().volume; }

CellMoments ConvexCell::moments() const {
  CellMoments m;
  m.first = Vec::Zero(dim_);
  if (empty()) return m;
  switch (dim_) {
    case 1: {
      m.volume = b_ - a_;
      m.first[0] = 0.5 * (b_ * b_ - a_ * a_);
      m.second = (b_ * b_ * b_ - a_ * a_ * a_) / 3.0;
      return m;
    }
    case 2: {
      double area = 0.0, cx = 0.0, cy = 0.0, i2 = 0.0;
      const std::size_t mm = v2_.size();
      for (std::size_t j = 0; j < mm; ++j) {
        const Eigen::Vector2d& p = v2_[j];
        const Eigen::Vector2d& q = v2_[(j + 1) % mm];
        const double cr = p.x() * q.y() - q.x() * p.y();
        area += cr;
        cx += (p.x() + q.x()) * cr;
        cy += (p.y() + q.y()) * cr;
        i2 += (p.x() * p.x() + p.x() * q.x() + q.x() * q.x() +
               p.y() * p.y() + p.y() * q.y() + q.y() * q.y()) *
              cr;
      }
      m.volume = 0.5 * area;
      m.first[0] = cx / 6.0;
      m.first[1] = cy / 6.0;
      m.second = i2 / 12.0;
      return m;
    }
    default: {
      double vol = 0.0, i2 = 0.0;
      Eigen::Vector3d first = Eigen::Vector3d::Zero();
      for (const Face& face : faces_) {
        for (std::size_t j = 1; j + 1 < face.loop.size(); ++j) {
          const Eigen::Vector3d& A = face.loop[0];
          const Eigen::Vector3d& B = face.loop[j];
          const Eigen::Vector3d& C = face.loop[j + 1];
          const double six_v = A.dot(B.cross(C));
          const double vt = six_v / 6.0;
          vol += vt;
          first += vt * (A + B + C) / 4.0;
          const Eigen::Vector3d s = A + B + C;
          i2 += vt / 20.0 *
                (A.squaredNorm() + B.squaredNorm() + C.squaredNorm() +
                 s.squaredNorm());
        }
      }
      m.volume = vol;
      m.first = first;
      m.second = i2;
      return m;
    }
  }
}

double ConvexCell::facet_measure(int plane_id) const {
  if (empty()) return 0.0;
  switch (dim_) {
    case 1: {
      double measure = 0.0;
      if (id_a_ == plane_id) measure += 1.0;
      if (id_b_ == plane_id) measure += 1.0;
      return measure;
    }
    case 2: {
      double len = 0.0;
      const std::size_t m = v2_.size();
      for (std::size_t j = 0; j < m; ++j)
        if (eid_[j] == plane_id) len += (v2_[(j + 1) % m] - v2_[j]).norm();
      return len;
    }
    default: {
      double area = 0.0;
      for (const Face& face : faces_) {
        if (face.id != plane_id) continue;
        Eigen::Vector3d newell = Eigen::Vector3d::Zero();
        for (std::size_t j = 0; j < face.loop.size(); ++j)
          newell +=
              face.loop[j].cross(face.loop[(j + 1) % face.loop.size()]);
        area += 0.5 * newell.norm();
      }
      return area;
    }
  }
}

}  // namespace weylma
