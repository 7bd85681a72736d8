#ifndef WEYLMA_ORACLES_HPP
#define WEYLMA_ORACLES_HPP

#include <complex>
#include <functional>

#include "weylma/geometry.hpp"
#include "weylma/root_system.hpp"

namespace weylma {

/// Closed-form radial data of the Ricci-flat invariant metric on the
/// rank-1 group: u = (sinh 2t - 2t)/(4 t^3), f = (3u)^{1/3}, K' = t f,
/// and the analytic K''. Near t = 0 everything is continued by series
/// (u -> 1/3, f -> 1).
struct Su2Profile {
  double t = 0.0;
  double u = 0.0;
  double f = 0.0;
  double kp = 0.0;   // K'(t) = t f(t); satisfies kp^3 = (3/4)(sinh 2t - 2t)
  double kpp = 0.0;  // K''(t) = f + t f'
};

Su2Profile su2_profile(double t);

/// Potential K(R) = integral_0^R (sinh 2t - 2t)^{1/3} dt by adaptive
/// quadrature. Its integrand differs from kp by the homothety factor
/// (3/4)^{1/3}.
double su2_potential(double R);

struct Su2Eigenvalues {
  double lambda0 = 0.0;      // f + f' t (radial)
  double lambda_plus = 0.0;  // f e^{+t}
  double lambda_minus = 0.0; // f e^{-t}
};

/// Root-space and radial eigenvalues of D mu for the rank-1 profile. Their
/// product equals (sinh t / t)^2, the determinant of L, when Ricci-flat.
Su2Eigenvalues su2_eigenvalues(double t);

/// Complex determinant comparison for the Heisenberg family: builds
/// Phi^{-1} + i ad mu on the (2n+1)-dimensional Heisenberg algebra in a
/// symplectic basis p_1, q_1, ..., p_n, q_n, z with mu the dual-basis
/// identification and Phi = diag(1, ..., 1, f(t)), and compares the numeric
/// determinant with (1 - t^2)^n / f(t). Requires |t| < 1.
struct HeisenbergResult {
  std::complex<double> numeric;
  double formula = 0.0;
  double difference = 0.0;  // |numeric - formula|
};

HeisenbergResult heisenberg_det(int n, const std::function<double(double)>& f,
                                double t);

/// The Ricci-flat profile f(t) = c (1 - t^2)^n.
std::function<double(double)> heisenberg_ricci_flat_profile(int n,
                                                            double c = 1.0);

/// Spectral data of the canonical potential K = |x|^2 / 2 (grad = x,
/// hess = identity); its Cartan metric block is the Euclidean identity.
SpectralMetric canonical_example(const RootSystem& rs, const Vec& x);

}  // namespace weylma

#endif
