#pragma once

// Independent reference computations for the tests. None of these call into the library's numerics.

#include <array>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;

// roots of mu^3 + rho mu - M rho: real root by bisection in 50-digit arithmetic, the pair by deflation
std::array<cplx, 3> cubic_roots(double rho, double M);

// composite Gauss-Legendre rule with `per_panel` nodes, nodes and weights in double
struct Rule {
    std::vector<double> x, w;
};
Rule gauss_rule(double a, double b, int panels, int per_panel = 20);

cplx integrate(const std::function<cplx(double)>& f, double a, double b, int panels);

// per-mode plane-wave ODE integrated with GSL rk8pd from the PDE coefficients:
//   xi'' = (c^2 kappa^2 - rho) xi - 2 i c kappa xi' + M zeta + f(t),  zeta' = -i c kappa zeta + rho xi
struct ModeProblem {
    double rho = 1.0, kappa = 1.0, c = 0.0, M = 0.0;
    std::function<cplx(double)> forcing;  // may be empty
};
std::array<cplx, 3> integrate_mode(const ModeProblem& p, std::array<cplx, 3> x0, double t0, double t1,
                                   double rel_tol = 1e-13);

// Minimum of ||u||^2 over u in span(basis) subject to int int u E_q = b_q for every q, with all inner
// products by high-order quadrature and the KKT system solved in 50-digit arithmetic. Basis functions and
// constraint kernels are separable exponentials e^{i k x} e^{-z t}.
struct Exponential {
    double k;  // spatial frequency
    cplx z;    // temporal exponent
};
struct KktSolution {
    std::vector<cplx> coef;   // coefficients on the basis
    double constraint_residual = 0.0;
};
KktSolution min_norm_control(const std::vector<Exponential>& basis, const std::vector<Exponential>& constraints,
                             const std::vector<cplx>& rhs, double xa, double xb, double T);

// M(m, n) = int_a^b theta_m(t) e^{-test_n t} dt for the exponential sums
//   theta_m(t) = sum_x coef(m, x) e^{i freq_x t} + sum_k corr(m, k) e^{-decay_k t},
// by composite Gauss-Legendre quadrature, one panel of samples at a time
Eigen::MatrixXcd exponential_sum_moments(const Eigen::MatrixXcd& coef, const std::vector<double>& freq,
                                         const Eigen::MatrixXcd& corr, const std::vector<cplx>& decay,
                                         const std::vector<cplx>& test, double a, double b);

}  // namespace oracle
