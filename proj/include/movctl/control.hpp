#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "movctl/moving_spectrum.hpp"

namespace movctl {

using cplxl = std::complex<long double>;
using MatrixXcl = Eigen::Matrix<cplxl, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXcl = Eigen::Matrix<cplxl, Eigen::Dynamic, 1>;

struct Interval {
    double a = -0.3, b = 0.3;
    double length() const { return b - a; }
    bool contains(double x) const { return x >= a && x <= b; }
};

void check_interval(const Interval& w);

// integral of e^{i d x} over the interval
cplxl interval_phase_integral(long double d, const Interval& w);
// integral of e^{-z t} over (0, T)
cplxl decay_integral(cplxl z, long double T);

// plane-wave coefficients over n = -N..-1, 1..N (same order as the spectrum positions)
struct InitialData {
    int N = 0;
    std::vector<cplx> y0, y1;
    double sigma0 = 3.0, sigma1 = 2.0;

    static std::size_t pos(int N, int n) { return static_cast<std::size_t>(n < 0 ? n + N : n + N - 1); }
    std::size_t pos(int n) const { return pos(N, n); }
    int mode_number(std::size_t p) const { return static_cast<int>(p) < N ? static_cast<int>(p) - N : static_cast<int>(p) - N + 1; }

    static InitialData zero(int N);
    static InitialData single_mode(int N, int n, cplx y0v, cplx y1v);
    // y0_n = rho^{-sigma0} g, y1_n = rho^{-sigma1} g' with complex Gaussian g, g'
    static InitialData random(const MovingSpectrum& ms, std::uint64_t seed, double sigma0 = 3.0, double sigma1 = 2.0);
    InitialData scaled(double factor) const;
    // sqrt(sum rho^{2 sigma0}|y0|^2 + rho^{2 sigma1}|y1|^2)
    double weighted_norm(const MovingSpectrum& ms) const;
};

struct MomentSystem {
    std::vector<ModeIndex> modes;
    std::vector<cplxl> rhs;  // -2 (conj(mu) y0 + y1)
};

MomentSystem assemble_moments(const InitialData& data, const MovingSpectrum& ms);

// G_qr = int_0^T int_omega0 E_q conj(E_r), E_q = e^{-i kappa_q x} e^{-conj(lambda_q) t}, physical lambda
struct GramReport {
    MatrixXcl G;
    double hermitian_error = 0.0;  // max |G - G^*| / max |G|
    double min_eig_rel = 0.0;      // min eigenvalue / max eigenvalue
};

GramReport assemble_gram(const MovingSpectrum& ms, const Interval& omega0, double T);

enum class SolveMethod { direct, regularized };
std::string to_string(SolveMethod m);

struct SynthesisOptions {
    SolveMethod method = SolveMethod::direct;
    double condition_budget = 1e15;  // equilibrated condition number allowed for the direct solve
    double residual_target = 1e-8;   // regularized: max |G a - b| <= target * max |b|
    int refinement_steps = 4;
};

struct ControlField {
    std::vector<ModeIndex> modes;
    std::vector<double> kappa;
    std::vector<cplx> lambda;
    VectorXcl a;  // u = sum a_q e^{i kappa_q x} e^{-lambda_q t} on (0,T) x omega0
    Interval omega0;
    double T = 0.0;
    double cond_raw = 0.0, cond_rho = 0.0, cond_jacobi = 0.0;
    double residual = 0.0;           // max |G a - b|
    double relative_residual = 0.0;  // residual / max |b|
    SolveMethod method = SolveMethod::direct;
    bool fallback = false;
    double tikhonov = 0.0;
    double norm = 0.0;               // sqrt(a^* G a)
    std::string warning;

    cplx evaluate(double t, double x) const;  // zero outside [0,T] x omega0
    json to_json() const;
};

ControlField synthesize_control(const MomentSystem& msys, const MovingSpectrum& ms, const GramReport& gram,
                                const Interval& omega0, double T, const SynthesisOptions& opt = {});

// every moment recomputed by Gauss-Legendre quadrature of u E_q over (0,T) x omega0;
// returns max |m_q - b_q| / max |b|
double moment_residual_quadrature(const ControlField& u, const MomentSystem& msys);

struct ObservabilityReport {
    double C_exact = 0.0;        // min of a^* G a / sum |a|^2/rho^2 (smallest eigenvalue of D G D, D = diag rho)
    double C_trials = 0.0;       // smallest ratio seen over the random trials
    int trials = 0;
    double single_mode_min = 0.0;
    double adversarial_ratio = 0.0;  // minimum over vectors supported on the nearest pair
    std::pair<ModeIndex, ModeIndex> adversarial_pair;
    double adversarial_distance = 0.0;
    bool adversarial_is_min = false;  // below every random trial
    bool consistent = false;          // every ratio >= C_exact
    bool pass = false;

    json to_json() const;
};

ObservabilityReport certify_observability(const MovingSpectrum& ms, const GramReport& gram, int trials,
                                          std::uint64_t seed = 11);

void write_control_json(const std::string& path, const ControlField& u);
void write_control_grid_csv(const std::string& path, const ControlField& u, int nt, int nx);

}  // namespace movctl
