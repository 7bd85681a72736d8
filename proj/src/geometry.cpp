#include "weylma/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace weylma {

namespace {

double sinh_over_x(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sinh(x) / x;
}

double tanh_over_x(double x) {
  if (std::abs(x) < 1e-5) return 1.0 - x * x / 3.0;
  return std::tanh(x) / x;
}

}  // namespace

SpectralMetric spectral_data(const RootSystem& rs, const Vec& x,
                             const Vec& grad, const Mat& hess,
                             double overflow_radius) {
  SpectralMetric sm;
  sm.x = x;
  sm.grad = grad;
  sm.hess = 0.5 * (hess + hess.transpose());
  for (const Vec& alpha : rs.positive_roots()) {
    RootSpectralData rd;
    rd.root_value = alpha.dot(x);
    if (std::abs(rd.root_value) > overflow_radius)
      throw std::domain_error("spectral_data: beyond overflow radius");
    rd.amu = alpha.dot(grad);
    rd.l = sinh_over_x(rd.root_value);
    double ratio;  // a(mu)/a(x), continued across the wall
    if (std::abs(rd.root_value) < 1e-4)
      ratio = alpha.dot(sm.hess * alpha) / alpha.squaredNorm();
    else
      ratio = rd.amu / rd.root_value;
    rd.d = ratio * std::cosh(rd.root_value);
    rd.phi = rd.l / rd.d;
    sm.roots.push_back(rd);
  }
  return sm;
}

double ricci_defect(const SpectralMetric& sm, double u_value) {
  const double det = sm.hess.determinant();
  if (!(det > 0.0))
    throw std::domain_error(
        "ricci_defect: det(hess) <= 0 signals a non-convex fit");
  double defect = std::exp(-u_value) * det;
  for (const RootSpectralData& rd : sm.roots) {
    // a(mu)/sinh a(x) = d / (l cosh a(x)), stable across walls.
    const double factor = rd.d / (rd.l * std::cosh(rd.root_value));
    defect *= factor * factor;
  }
  return defect;
}

PositivityVerdict positivity_check(const SpectralMetric& sm) {
  PositivityVerdict verdict;
  Eigen::SelfAdjointEigenSolver<Mat> eig(sm.hess);
  verdict.cartan_pd = eig.eigenvalues().minCoeff() > 0.0;
  verdict.dmu_positive = true;
  verdict.submersion_positive = true;
  for (const RootSpectralData& rd : sm.roots) {
    if (!(rd.d > 0.0)) verdict.dmu_positive = false;
    const double t = rd.amu * rd.phi;  // equals tanh a(x) for exact data
    if (!(rd.phi * (1.0 - t * t) > 0.0)) verdict.submersion_positive = false;
  }
  if (!verdict.cartan_pd)
    verdict.failed = "Phi not positive: Cartan Hessian block";
  else if (!verdict.dmu_positive)
    verdict.failed = "Phi not positive: D mu root eigenvalue";
  else if (!verdict.submersion_positive)
    verdict.failed = "Phi + Phi(ad mu Phi)^2 not positive";
  return verdict;
}

MetricReport metric_eigenvalues(const SpectralMetric& sm) {
  const PositivityVerdict verdict = positivity_check(sm);
  if (!verdict.ok())
    throw std::domain_error("metric_eigenvalues: " + verdict.failed);
  MetricReport report;
  report.positive = true;
  report.cartan_block = sm.hess;
  for (const RootSpectralData& rd : sm.roots) {
    const double three_term = rd.phi * rd.d * rd.d -
                              rd.phi * (rd.amu * rd.phi * rd.d) *
                                  (rd.amu * rd.phi * rd.d);
    const double simplified =
        rd.amu * tanh_over_x(rd.root_value) / rd.root_value;
    report.horizontal.push_back(three_term);
    report.horizontal_simplified.push_back(simplified);
    report.vertical.push_back(1.0 / rd.phi);
    report.assembly_mismatch =
        std::max(report.assembly_mismatch,
                 std::abs(three_term - simplified) /
                     std::max(1.0, std::abs(simplified)));
  }
  report.defect = ricci_defect(sm, 0.0);
  return report;
}

GrowthReport completeness_trend(
    const std::function<double(double)>& radial_stiffness, double t_max,
    int levels) {
  if (!(t_max > 0.0) || levels < 3)
    throw std::invalid_argument("completeness_trend: bad arguments");
  GrowthReport report;

  const auto speed = [&radial_stiffness](double t) {
    const double lambda = radial_stiffness(t);
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw std::domain_error("completeness_trend: profile evaluation failed");
    return std::sqrt(lambda);
  };

  // Cumulative trapezoid on a fine grid, read off at geometric horizons.
  const int fine = 1 << 12;
  std::vector<double> cumulative(fine + 1, 0.0);
  const double dt = t_max / fine;
  double prev = speed(0.0);
  for (int i = 1; i <= fine; ++i) {
    const double curr = speed(i * dt);
    cumulative[i] = cumulative[i - 1] + 0.5 * dt * (prev + curr);
    prev = curr;
  }
  for (int j = levels - 1; j >= 0; --j) {
    const double T = t_max / std::pow(2.0, j);
    report.horizon.push_back(T);
    const double pos = T / dt;
    const int i = std::min(fine - 1, static_cast<int>(pos));
    const double frac = pos - i;
    report.length.push_back(cumulative[i] +
                            frac * (cumulative[i + 1] - cumulative[i]));
  }

  // Exponential rate of the stiffness itself, least squares on log lambda
  // over the outer half of the ray.
  {
    const int samples = 33;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (int i = 0; i < samples; ++i) {
      const double t = 0.5 * t_max + 0.5 * t_max * i / (samples - 1.0);
      const double lambda = radial_stiffness(t);
      if (!(lambda > 0.0)) continue;
      const double y = std::log(lambda);
      sx += t;
      sy += y;
      sxx += t * t;
      sxy += t * y;
      ++used;
    }
    if (used >= 2) {
      const double denom = used * sxx - sx * sx;
      report.growth_rate = denom != 0.0 ? (used * sxy - sx * sy) / denom : 0.0;
    }
  }

  // Diverging when the length keeps growing without slowdown: the increment
  // over the last geometric window is positive and no smaller than half the
  // previous one (per unit parameter).
  const std::size_t n = report.length.size();
  const double s_last =
      (report.length[n - 1] - report.length[n - 2]) /
      (report.horizon[n - 1] - report.horizon[n - 2]);
  const double s_prev =
      (report.length[n - 2] - report.length[n - 3]) /
      (report.horizon[n - 2] - report.horizon[n - 3]);
  report.diverging = s_last > 0.0 && s_last >= 0.5 * s_prev;
  return report;
}

double closedness_check(const std::function<Vec(const Vec&)>& mu,
                        const Vec& lo, const Vec& hi, int points_per_axis,
                        double spacing_cap) {
  const int dim = static_cast<int>(lo.size());
  if (points_per_axis < 3)
    throw std::invalid_argument("closedness_check: need >= 3 points per axis");
  Vec h(dim);
  for (int d = 0; d < dim; ++d) {
    h[d] = (hi[d] - lo[d]) / (points_per_axis - 1);
    if (h[d] > spacing_cap)
      throw std::invalid_argument("closedness_check: grid too coarse");
  }
  if (dim == 1) return 0.0;

  double residual = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(dim), 1);
  // Interior nodes only, so central differences stay inside the box.
  while (true) {
    Vec x(dim);
    for (int d = 0; d < dim; ++d)
      x[d] = lo[d] + idx[static_cast<std::size_t>(d)] * h[d];
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) {
        Vec xp = x, xm = x;
        xp[i] += h[i];
        xm[i] -= h[i];
        const double dmu_j_di = (mu(xp)[j] - mu(xm)[j]) / (2.0 * h[i]);
        xp = x;
        xm = x;
        xp[j] += h[j];
        xm[j] -= h[j];
        const double dmu_i_dj = (mu(xp)[i] - mu(xm)[i]) / (2.0 * h[j]);
        residual = std::max(residual, std::abs(dmu_j_di - dmu_i_dj));
      }
    int d = dim - 1;
    while (d >= 0) {
      if (++idx[static_cast<std::size_t>(d)] < points_per_axis - 1) break;
      idx[static_cast<std::size_t>(d)] = 1;
      --d;
    }
    if (d < 0) break;
  }
  return residual;
}

PropernessReport properness_check(const ConvexPotential& phi,
                                  const std::vector<Vec>& rays, double radius,
                                  int samples) {
  if (rays.empty() || samples < 3)
    throw std::invalid_argument("properness_check: bad arguments");
  PropernessReport report;
  report.proper = true;
  report.min_terminal_increment = std::numeric_limits<double>::infinity();
  for (const Vec& ray : rays) {
    const Vec dir = ray / ray.norm();
    std::vector<double> values;
    for (int i = 0; i <= samples; ++i)
      values.push_back(phi.value((radius * i / samples) * dir));
    const double first_inc = values[1] - values[0];
    const double last_inc = values[static_cast<std::size_t>(samples)] -
                            values[static_cast<std::size_t>(samples) - 1];
    report.min_terminal_increment =
        std::min(report.min_terminal_increment, last_inc);
    if (!(last_inc > 0.0) || last_inc < first_inc - 1e-12)
      report.proper = false;
  }
  return report;
}

namespace {

std::vector<Vec> stencil_offsets(int dim) {
  std::vector<Vec> offsets;
  if (dim == 1) {
    for (double t : {-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0}) {
      Vec v(1);
      v[0] = t;
      offsets.push_back(v);
    }
  } else if (dim == 2) {
    offsets.push_back(Vec::Zero(2));
    for (int ring = 1; ring <= 2; ++ring)
      for (int s = 0; s < 8; ++s) {
        const double angle = 2.0 * M_PI * s / 8.0 + (ring == 2 ? M_PI / 8 : 0);
        Vec v(2);
        v[0] = 0.5 * ring * std::cos(angle);
        v[1] = 0.5 * ring * std::sin(angle);
        offsets.push_back(v);
      }
  } else {
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c) {
          Vec v(3);
          v << 0.5 * a, 0.5 * b, 0.5 * c;
          offsets.push_back(v);
        }
    for (int d = 0; d < 3; ++d)
      for (double s : {-1.0, 1.0}) {
        Vec v = Vec::Zero(3);
        v[d] = s;
        offsets.push_back(v);
      }
  }
  return offsets;
}

QuadraticFit fit_impl(const std::function<double(const Vec&)>& f, const Vec& x,
                      double stencil_radius) {
  const int dim = static_cast<int>(x.size());
  if (!(stencil_radius > 0.0))
    throw std::invalid_argument("fit_local_quadratic: radius <= 0");
  const std::vector<Vec> offsets = stencil_offsets(dim);
  const int unknowns = 1 + dim + dim * (dim + 1) / 2;
  if (static_cast<int>(offsets.size()) < unknowns)
    throw std::logic_error("fit_local_quadratic: stencil too small");

  Mat A(static_cast<Eigen::Index>(offsets.size()), unknowns);
  Eigen::VectorXd b(static_cast<Eigen::Index>(offsets.size()));
  for (std::size_t s = 0; s < offsets.size(); ++s) {
    const Vec xi = stencil_radius * offsets[s];
    b(static_cast<Eigen::Index>(s)) = f(x + xi);
    Eigen::Index col = 0;
    A(static_cast<Eigen::Index>(s), col++) = 1.0;
    for (int d = 0; d < dim; ++d) A(static_cast<Eigen::Index>(s), col++) = xi[d];
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j)
        A(static_cast<Eigen::Index>(s), col++) =
            (i == j ? 0.5 : 1.0) * xi[i] * xi[j];
  }
  Eigen::ColPivHouseholderQR<Mat> qr(A);
  if (qr.rank() < unknowns)
    throw std::invalid_argument("fit_local_quadratic: rank-deficient stencil");
  const Eigen::VectorXd coef = qr.solve(b);

  QuadraticFit fit;
  fit.grad = coef.segment(1, dim);
  fit.hess = Mat::Zero(dim, dim);
  Eigen::Index col = 1 + dim;
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      fit.hess(i, j) = coef(col);
      fit.hess(j, i) = coef(col);
      ++col;
    }
  fit.fit_residual = (A * coef - b).norm() /
                     std::sqrt(static_cast<double>(offsets.size()));
  return fit;
}

}  // namespace

QuadraticFit fit_local_quadratic(const std::function<double(const Vec&)>& f,
                                 const Vec& x, double stencil_radius) {
  return fit_impl(f, x, stencil_radius);
}

QuadraticFit fit_local_quadratic(const ConvexPotential& phi, const Vec& x,
                                 double stencil_radius) {
  QuadraticFit fit = fit_impl([&phi](const Vec& p) { return phi.value(p); }, x,
                              stencil_radius);
  fit.envelope_slope = phi.gradient(x);
  // Spread of active slopes across the stencil: how multi-valued the
  // envelope gradient is at this scale.
  double spread = 0.0;
  for (const Vec& off : stencil_offsets(static_cast<int>(x.size()))) {
    const Vec slope = phi.gradient(x + stencil_radius * off);
    spread = std::max(spread, (slope - fit.envelope_slope).norm());
  }
  fit.slope_spread = spread;
  const double hess_scale = fit.hess.cwiseAbs().maxCoeff();
  fit.degenerate = spread == 0.0 && hess_scale < 1e-10;
  return fit;
}

}  // namespace weylma
