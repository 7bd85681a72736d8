#include "weylma/root_system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace weylma {

namespace {

constexpr double kGeomTol = 1e-9;

Mat reflection_matrix(const Vec& root) {
  const double n2 = root.squaredNorm();
  return Mat::Identity(root.size(), root.size()) -
         (2.0 / n2) * (root * root.transpose());
}

bool is_plus_minus_member(const std::vector<Vec>& roots, const Vec& v,
                          double tol) {
  for (const Vec& r : roots)
    if ((v - r).norm() <= tol || (v + r).norm() <= tol) return true;
  return false;
}

}  // namespace

Vec reflect(const Vec& root, const Vec& x) {
  const double n2 = root.squaredNorm();
  if (!(n2 > 0.0)) throw std::invalid_argument("reflect: zero root");
  return x - (2.0 * root.dot(x) / n2) * root;
}

RootSystem::RootSystem(std::string name, int rank, std::vector<Vec> positive,
                       double scale)
    : name_(std::move(name)),
      rank_(rank),
      scale_(scale),
      positive_(std::move(positive)) {}

RootSystem RootSystem::catalog(const std::string& name, double scale) {
  const double s3 = std::sqrt(3.0);
  std::vector<Vec> roots;
  std::size_t order = 0;
  int rank = 0;
  auto v = [](std::initializer_list<double> c) {
    Vec out(static_cast<int>(c.size()));
    int i = 0;
    for (double x : c) out[i++] = x;
    return out;
  };
  if (name == "A1") {
    rank = 1;
    roots = {v({1.0})};
    order = 2;
  } else if (name == "A2") {
    rank = 2;
    roots = {v({1.0, 0.0}), v({-0.5, s3 / 2}), v({0.5, s3 / 2})};
    order = 6;
  } else if (name == "B2") {
    rank = 2;
    roots = {v({1.0, 0.0}), v({0.0, 1.0}), v({1.0, 1.0}), v({1.0, -1.0})};
    order = 8;
  } else if (name == "G2") {
    rank = 2;
    roots = {v({1.0, 0.0}),      v({-1.5, s3 / 2}), v({-0.5, s3 / 2}),
             v({0.5, s3 / 2}),   v({1.5, s3 / 2}),  v({0.0, s3})};
    order = 12;
  } else if (name == "A3") {
    // D3 realization of A3: roots e_i +- e_j.
    rank = 3;
    roots = {v({1.0, 1.0, 0.0}),  v({1.0, -1.0, 0.0}), v({1.0, 0.0, 1.0}),
             v({1.0, 0.0, -1.0}), v({0.0, 1.0, 1.0}),  v({0.0, 1.0, -1.0})};
    order = 24;
  } else {
    throw std::invalid_argument("unknown root system: " + name);
  }
  if (scale != 1.0)
    for (Vec& r : roots) r *= scale;
  RootSystem rs(name, rank, std::move(roots), scale);
  rs.validate_and_finish(order);
  return rs;
}

RootSystem RootSystem::custom(const std::vector<Vec>& positive_roots,
                              double scale, const std::string& name) {
  if (positive_roots.empty())
    throw std::invalid_argument("custom root system: empty root list");
  const int rank = static_cast<int>(positive_roots.front().size());
  std::vector<Vec> roots;
  for (const Vec& r : positive_roots) {
    if (r.size() != rank)
      throw std::invalid_argument("custom root system: mixed dimensions");
    Vec scaled = scale * r;
    roots.push_back(scaled);
  }
  RootSystem rs(name, rank, std::move(roots), scale);
  rs.validate_and_finish(0);
  return rs;
}

void RootSystem::validate_and_finish(std::size_t expected_order) {
  double max_norm = 0.0;
  for (const Vec& r : positive_) {
    if (!r.allFinite() || r.norm() <= 0.0)
      throw std::invalid_argument(name_ + ": roots must be finite and nonzero");
    max_norm = std::max(max_norm, r.norm());
  }
  const double tol = kGeomTol * max_norm;

  // Reduced: no positive root can be a positive multiple of another.
  for (std::size_t i = 0; i < positive_.size(); ++i)
    for (std::size_t j = 0; j < positive_.size(); ++j) {
      if (i == j) continue;
      const Vec& a = positive_[i];
      const Vec& b = positive_[j];
      const double t = a.dot(b) / b.squaredNorm();
      if (t > 0.0 && (a - t * b).norm() <= tol)
        throw std::invalid_argument(name_ + ": not reduced, " +
                                    "root is a positive multiple of another");
    }

  // Consistent positivity: some vector must see every root positively.
  Vec witness = Vec::Zero(rank_);
  for (const Vec& r : positive_) witness += r / r.norm();
  for (const Vec& r : positive_)
    if (r.dot(witness) <= tol)
      throw std::invalid_argument(
          name_ + ": roots do not form a consistent positive system");

  // Reflection closure: {+-a} must be stable under every reflection.
  for (const Vec& a : positive_)
    for (const Vec& b : positive_)
      if (!is_plus_minus_member(positive_, reflect(a, b), tol))
        throw std::invalid_argument(name_ +
                                    ": positive roots are not reflection-closed");

  // Simple roots: positive roots that are not a sum of two positive roots.
  simple_.clear();
  for (const Vec& a : positive_) {
    bool decomposable = false;
    for (const Vec& b : positive_)
      for (const Vec& c : positive_)
        if ((a - b - c).norm() <= tol) decomposable = true;
    if (!decomposable) simple_.push_back(a);
  }
  if (simple_.empty())
    throw std::invalid_argument(name_ + ": no simple roots found");

  // Enumerate the generated group; it must be finite.
  constexpr std::size_t kOrderCap = 1024;
  std::vector<Mat> gens;
  for (const Vec& s : simple_) gens.push_back(reflection_matrix(s));
  elements_.clear();
  elements_.push_back(Mat::Identity(rank_, rank_));
  auto known = [&](const Mat& m) {
    for (const Mat& e : elements_)
      if ((e - m).cwiseAbs().maxCoeff() <= 1e-7) return true;
    return false;
  };
  for (std::size_t head = 0; head < elements_.size(); ++head) {
    const Mat current = elements_[head];
    for (const Mat& g : gens) {
      Mat next = g * current;
      if (!known(next)) {
        elements_.push_back(std::move(next));
        if (elements_.size() > kOrderCap)
          throw std::invalid_argument(
              name_ + ": generated reflection group exceeds cap; not finite?");
      }
    }
  }
  if (expected_order != 0 && elements_.size() != expected_order)
    throw std::logic_error(name_ + ": catalog group order mismatch");
}

std::vector<Vec> RootSystem::weyl_orbit(const Vec& x) const {
  const double tol = kGeomTol * (1.0 + x.norm());
  std::vector<Vec> orbit;
  orbit.push_back(x);
  auto known = [&](const Vec& p) {
    for (const Vec& q : orbit)
      if ((p - q).norm() <= tol) return true;
    return false;
  };
  for (std::size_t head = 0; head < orbit.size(); ++head) {
    const Vec current = orbit[head];
    for (const Vec& s : simple_) {
      Vec next = reflect(s, current);
      if (!known(next)) {
        orbit.push_back(std::move(next));
        if (orbit.size() > group_order())
          throw std::runtime_error(name_ + ": orbit exceeds group order");
      }
    }
  }
  return orbit;
}

Vec RootSystem::project_to_chamber(const Vec& x) const {
  const double tol = kGeomTol * (1.0 + x.norm());
  Vec y = x;
  const std::size_t cap = group_order() * static_cast<std::size_t>(rank_);
  for (std::size_t iter = 0; iter <= cap; ++iter) {
    bool moved = false;
    for (const Vec& s : simple_) {
      if (s.dot(y) < -tol) {
        y = reflect(s, y);
        moved = true;
        break;
      }
    }
    if (!moved) return y;
  }
  throw std::runtime_error(name_ +
                           ": chamber projection did not terminate; "
                           "invalid root data");
}

bool RootSystem::in_closed_chamber(const Vec& x, double slack) const {
  for (const Vec& s : simple_)
    if (s.dot(x) < -slack) return false;
  return true;
}

double RootSystem::wall_distance(const Vec& x) const {
  double dist = std::numeric_limits<double>::infinity();
  for (const Vec& a : positive_)
    dist = std::min(dist, std::abs(a.dot(x)) / a.norm());
  return dist;
}

}  // namespace weylma
