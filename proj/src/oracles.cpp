#include "weylma/oracles.hpp"

#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

namespace weylma {

namespace {

constexpr double kOverflowT = 350.0;

// sinh(2t) - 2t, summed as a series for small t to avoid cancellation.
double sinh2t_minus_2t(double t) {
  const double x = 2.0 * t;
  if (std::abs(x) > 0.5) return std::sinh(x) - x;
  double term = x * x * x / 6.0;
  double sum = 0.0;
  int k = 3;
  while (std::abs(term) > 1e-22 * (1.0 + std::abs(sum))) {
    sum += term;
    term *= x * x / ((k + 1.0) * (k + 2.0));
    k += 2;
  }
  return sum;
}

// (2 cosh(2t) - 2) t - 3 (sinh(2t) - 2t): numerator of u'(t) * 4 t^4.
double u_prime_numerator(double t) {
  const double x = 2.0 * t;
  if (std::abs(x) > 0.5)
    return (2.0 * std::cosh(x) - 2.0) * t - 3.0 * sinh2t_minus_2t(t);
  // sum_{m>=2} (2t)^{2m+1} (2m - 2) / (2m + 1)!
  double term = x * x * x * x * x * 2.0 / 120.0;  // m = 2
  double sum = 0.0;
  int m = 2;
  while (std::abs(term) > 1e-22 * (1.0 + std::abs(sum))) {
    sum += term;
    term *= x * x * (2.0 * m) /
            ((2.0 * m - 2.0) * (2.0 * m + 2.0) * (2.0 * m + 3.0));
    m += 1;
  }
  return sum;
}

}  // namespace

Su2Profile su2_profile(double t) {
  if (t < 0.0 || t > kOverflowT)
    throw std::domain_error("su2_profile: t outside [0, 350]");
  Su2Profile p;
  p.t = t;
  if (t == 0.0) {
    p.u = 1.0 / 3.0;
    p.f = 1.0;
    p.kp = 0.0;
    p.kpp = 1.0;
    return p;
  }
  const double numerator = sinh2t_minus_2t(t);
  p.u = numerator / (4.0 * t * t * t);
  const double uprime = u_prime_numerator(t) / (4.0 * t * t * t * t);
  p.f = std::cbrt(3.0 * p.u);
  const double fdot = uprime / (p.f * p.f);
  p.kp = t * p.f;
  p.kpp = p.f + t * fdot;
  return p;
}

double su2_potential(double R) {
  if (R < 0.0 || R > kOverflowT)
    throw std::domain_error("su2_potential: R outside [0, 350]");
  if (R == 0.0) return 0.0;
  // Adaptive Simpson on the smooth integrand (sinh 2t - 2t)^{1/3}.
  struct Quad {
    static double integrand(double t) { return std::cbrt(sinh2t_minus_2t(t)); }
    static double recurse(double a, double b, double fa, double fm, double fb,
                          double tol, int depth) {
      const double m = 0.5 * (a + b);
      const double flm = integrand(0.5 * (a + m));
      const double frm = integrand(0.5 * (m + b));
      const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double split = left + right;
      if (depth <= 0 || std::abs(split - whole) <= 15.0 * tol)
        return split + (split - whole) / 15.0;
      return recurse(a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
             recurse(m, b, fm, frm, fb, 0.5 * tol, depth - 1);
    }
  };
  const double fa = Quad::integrand(0.0);
  const double fb = Quad::integrand(R);
  const double fm = Quad::integrand(0.5 * R);
  return Quad::recurse(0.0, R, fa, fm, fb, 1e-13 * (1.0 + R), 48);
}

Su2Eigenvalues su2_eigenvalues(double t) {
  if (!(t > 0.0) || t > kOverflowT)
    throw std::domain_error("su2_eigenvalues: t outside (0, 350]");
  const Su2Profile p = su2_profile(t);
  Su2Eigenvalues eig;
  eig.lambda0 = p.kpp;
  eig.lambda_plus = p.f * std::exp(t);
  eig.lambda_minus = p.f * std::exp(-t);
  return eig;
}

HeisenbergResult heisenberg_det(int n, const std::function<double(double)>& f,
                                double t) {
  if (n < 1) throw std::invalid_argument("heisenberg_det: n must be >= 1");
  if (!(std::abs(t) < 1.0))
    throw std::domain_error(
        "heisenberg_det: |t| >= 1 is outside the model's domain");
  const double ft = f(t);
  if (!(ft > 0.0))
    throw std::domain_error("heisenberg_det: profile must be positive");

  const int dim = 2 * n + 1;
  Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < dim - 1; ++i) op(i, i) = 1.0;
  op(dim - 1, dim - 1) = 1.0 / ft;
  // ad mu in the symplectic basis: <mu, [p_i, q_i]> = <mu, z> = t.
  const std::complex<double> it(0.0, t);
  for (int i = 0; i < n; ++i) {
    op(2 * i, 2 * i + 1) += it;
    op(2 * i + 1, 2 * i) -= it;
  }

  HeisenbergResult result;
  result.numeric = op.determinant();
  result.formula = std::pow(1.0 - t * t, n) / ft;
  result.difference = std::abs(result.numeric -
                               std::complex<double>(result.formula, 0.0));
  return result;
}

std::function<double(double)> heisenberg_ricci_flat_profile(int n, double c) {
  return [n, c](double t) { return c * std::pow(1.0 - t * t, n); };
}

SpectralMetric canonical_example(const RootSystem& rs, const Vec& x) {
  return spectral_data(rs, x, x, Mat::Identity(rs.rank(), rs.rank()));
}

}  // namespace weylma
