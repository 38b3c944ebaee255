#pragma once

#include <array>
#include <string>
#include <vector>

#include "movctl/control.hpp"

namespace movctl {

enum class Frame { moving, fixed };
// orthogonal: f_n = (1/2) int_omega0 u e^{-i kappa_n x}; gram: least-squares projection with the plane-wave Gram on I
enum class Projection { orthogonal, gram };
std::string to_string(Frame f);
std::string to_string(Projection p);

struct GalerkinState {
    double t = 0.0;
    Frame frame = Frame::moving;
    int N = 0;
    std::vector<cplx> xi, xi_dot, zeta;  // positions n = -N..-1, 1..N
};

// per-mode system X' = A X + e_2 f for X = (xi, xi', zeta) with transport speed c
struct ModePropagator {
    int n = 0;
    double rho = 0.0, kappa = 0.0, c = 0.0, M = 0.0;
    std::array<cplxl, 3> mu{}, nu{};                   // nu = mu - i c kappa
    std::array<std::array<cplxl, 3>, 3> right{}, left{};  // r = (1, nu, rho/mu), l = (nu + 2 i c kappa, 1, M/mu)
    std::array<cplxl, 3> pairing{};                    // l_j . r_j
    double characteristic_residual = 0.0;              // max |(nu + i c kappa)^3 + rho (nu + i c kappa) - M rho|, scaled

    static ModePropagator make(int n, double rho, double kappa, double c, double M);
    std::array<std::array<cplxl, 3>, 3> matrix() const;  // companion matrix A
};

struct PlaneWaveGram {
    Eigen::MatrixXcd G;           // int_{-1}^{1} e^{i (kappa_m - kappa_n) x} dx, rows n, columns m
    double deviation = 0.0;       // max |G - 2 I|
    double first_offdiag = 0.0;   // max |G_{n,n+1}|
    double hermitian_error = 0.0;
    double condition = 0.0;
};

PlaneWaveGram plane_wave_gram(const MovingSpectrum& ms);

struct TerminalReport {
    double xi_norm = 0.0, xi_dot_norm = 0.0, zeta_norm = 0.0;  // weights rho^{2 sigma}, sigma = 3, 2, 1
    double data_norm = 0.0;
    double rel_xi = 0.0, rel_xi_dot = 0.0, rel_zeta = 0.0;
    double tol = 1e-6;
    bool pass = false;
    GalerkinState state;

    json to_json() const;
};

class GalerkinModel {
public:
    GalerkinModel(const MovingSpectrum& ms, const Interval& omega0, Projection proj = Projection::orthogonal);

    const MovingSpectrum& spectrum() const { return *ms_; }
    const ModePropagator& propagator(std::size_t pos, Frame f) const {
        return f == Frame::moving ? moving_.at(pos) : fixed_.at(pos);
    }
    Projection projection() const { return proj_; }
    double gram_condition() const { return gram_condition_; }
    const std::string& warning() const { return warning_; }

    GalerkinState initial_state(const InitialData& data, Frame f = Frame::moving) const;
    // exact modal exponentials plus closed-form Duhamel integrals of the control forcing; dt may be negative
    GalerkinState step_exact(const GalerkinState& state, const ControlField* control, double dt) const;
    TerminalReport run_to_T(const InitialData& data, const ControlField* control, double T, int steps = 1,
                            Frame f = Frame::moving, double tol = 1e-6) const;

    TerminalReport measure(const GalerkinState& st, const InitialData& data, double tol) const;

private:
    const MovingSpectrum* ms_;
    Interval omega0_;
    Projection proj_;
    std::vector<ModePropagator> moving_, fixed_;
    Eigen::Matrix<cplxl, Eigen::Dynamic, Eigen::Dynamic> P_;  // forcing projection: identity/2 or inverse Gram
    double gram_condition_ = 0.0;
    std::string warning_;
};

// y(t, x) = xi(t, x + c t): coefficients pick up e^{i kappa c t}, velocity adds the transport term
GalerkinState map_frames(const GalerkinState& st, const MovingSpectrum& ms, Frame target);

struct DualityResult {
    cplx lhs, rhs;
    double relative = 0.0;
};

// both sides of the control identity for adjoint data sum b_q Psi_q (physical lambda): the left by
// Gauss-Legendre quadrature of u conj(phi) over (0,T) x omega0, the right from the coefficient pairings
DualityResult verify_duality(const InitialData& data, const ControlField& u, const MovingSpectrum& ms,
                             const std::vector<cplx>& adjoint, double T);
std::vector<DualityResult> verify_duality(const InitialData& data, const ControlField& u, const MovingSpectrum& ms,
                                          const std::vector<std::vector<cplx>>& adjoints, double T);

struct TrajectoryPoint {
    double t;
    double energy;  // sqrt(sum rho^2 |xi|^2 + |xi_t|^2)
    double xi_norm, xi_dot_norm, zeta_norm;
};

std::vector<TrajectoryPoint> trajectory(const GalerkinModel& model, const InitialData& data,
                                        const ControlField* control, double T, int samples);

// least-squares slope of log(running max energy) against t
double energy_growth_rate(const std::vector<TrajectoryPoint>& traj);

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryPoint>& traj);

struct FixedSupportPoint {
    int N = 0;
    double control_norm = 0.0;
    double cond_jacobi = 0.0;
    bool fallback = false;
    double moment_residual = 0.0;
    double rel_xi = 0.0, rel_xi_dot = 0.0, rel_zeta = 0.0;
};

// control held on the static omega0 in the original frame (c = 0 spectrum)
FixedSupportPoint fixed_support_diagnostic(const EigenvalueTable& table, MemoryCoefficient M, double T,
                                           const Interval& omega0, int N, std::uint64_t seed);

}  // namespace movctl
