#pragma once

#include <string>
#include <vector>

#include "movctl/spectrum.hpp"

namespace movctl {

struct MemoryCoefficient {
    double M;
    explicit MemoryCoefficient(double value);
};

// K(mu) = mu^3 + rho mu - M rho
cplx cubic_value(cplx mu, double rho, double M);
double cubic_residual_scale(double rho, double M);  // |M| rho + |M|^3

struct SpectralTriple {
    int n = 0;
    double rho = 0.0;
    double mu1 = 0.0;
    cplx mu2;  // Im > 0
    cplx mu3;  // conj(mu2)

    cplx mu(int j) const;
    double residual(int j, double M) const { return std::abs(cubic_value(mu(j), rho, M)); }
};

SpectralTriple solve_cubic(double rho, MemoryCoefficient M, int n = 0);
std::vector<SpectralTriple> solve_table(const EigenvalueTable& t, MemoryCoefficient M);

// d mu / d rho along a root branch (implicit function theorem)
cplx root_sensitivity(cplx mu, double rho, double M);

struct Mu1Asymptotics {
    std::vector<double> remainder;      // mu1 - M + M^3 / rho
    std::vector<double> scaled_n4;      // |remainder| n^4
    std::vector<double> scaled_rho2;    // |remainder| rho^2 / (3 |M|^5)
    double slope = 0.0;                 // log-log slope of |remainder| against n over the top half
    double fitted_C_n4 = 0.0;           // median of scaled_n4 over the top half
    double spread_n4 = 0.0;             // max/min of scaled_n4 over the top half
    double fitted_C_rho2 = 0.0;
    double spread_rho2 = 0.0;
    bool distance_decreasing = false;   // |mu1 - M| strictly decreasing
    bool pass_n4 = false;               // |remainder| <= C / n^4 with C stable (slope within 0.25 of -4)
    bool pass_rho2 = false;             // |remainder| ~ 3 |M|^5 / rho^2 (spread <= 2)
    bool pass = false;                  // pass_n4 && distance_decreasing
};

Mu1Asymptotics verify_mu1_asymptotics(const EigenvalueTable& t, MemoryCoefficient M);

struct Mu1Monotone {
    bool increasing = true;
    int first_violation = 0;      // n with |mu1_{n+1}| <= |mu1_n|, 0 if none
    double lower_bound = 0.0;     // |M| / (M^2 / rho_1 + 1)
    bool lower_ok = true;
    bool upper_ok = true;
    int bound_violation = 0;
    bool pass = false;
};

Mu1Monotone verify_mu1_monotone(const EigenvalueTable& t, MemoryCoefficient M);

void write_triples_csv(const std::string& path, const std::vector<SpectralTriple>& triples, double M);

}  // namespace movctl
