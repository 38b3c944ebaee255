#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "movctl/io.hpp"
#include "movctl/memory_spectrum.hpp"

namespace movctl {

struct ModeIndex {
    int n = 1;  // nonzero
    int j = 1;  // branch 1..3
    bool operator==(const ModeIndex&) const = default;
};

std::string to_string(const ModeIndex& m);

struct CriticalRecord {
    int n_c = 0;                // positive mode number
    double velocity = 0.0;      // v_{n_c}
    ModeIndex doubled;          // redefined mode (the branch-2 member of the collision)
    ModeIndex partner;          // branch-3 member
    cplx physical;              // value before the convention
    cplx convention;            // value after the redefinition
    double collision_distance;  // |lambda(doubled) - lambda(partner)| before the convention
};

struct MovingSpectrum {
    double s = 0.0, M = 0.0, c = 0.0, gamma = 0.0;
    int N = 0;
    EigenvalueTable table;
    std::vector<SpectralTriple> triples;  // every table entry
    std::vector<ModeIndex> modes;         // n = -N..-1, 1..N, j = 1..3
    std::vector<cplx> lambda;             // physical eigenvalues, same order as modes
    std::vector<cplx> lambda_conv;        // with the double-eigenvalue convention applied
    std::optional<CriticalRecord> critical;

    std::size_t size() const { return modes.size(); }
    std::size_t index(const ModeIndex& m) const;
    double rho(int n) const { return table.rho_at(std::abs(n)); }
    double kappa(int n) const;  // sgn(n) rho_|n|^{1/(2s)}
    cplx mu(int n, int j) const { return triples.at(std::abs(n) - 1).mu(j); }
    // physical lambda for any |n| <= table.n_max
    cplx lam(int n, int j) const;
    cplx lam(const ModeIndex& m) const { return lam(m.n, m.j); }
    // eigenvector (1, -lambda, 1/(lambda - i sgn(n) c kappa))
    std::array<cplx, 3> psi(const ModeIndex& m) const;
};

// c = 0: the spectrum seen by a control frozen in the original frame (fixed-support diagnostic)
MovingSpectrum build_static_spectrum(const EigenvalueTable& table, MemoryCoefficient M, int N);

void check_velocity(double c, double gamma, double tol = 1e-9);

MovingSpectrum build_moving_spectrum(const EigenvalueTable& table, MemoryCoefficient M, double c, int N,
                                     double critical_tol = 1e-9);

struct CriticalVelocity {
    int n;
    double v;
};

std::vector<CriticalVelocity> critical_velocities(const EigenvalueTable& table, MemoryCoefficient M,
                                                  int n_range);

struct ClauseResult {
    std::string id;
    std::string statement;
    double value = 0.0;   // measured extreme
    double bound = 0.0;   // required bound
    double margin = 0.0;  // signed, >= 0 passes
    bool pass = false;
    std::string witness;
};

struct GapReport {
    double epsilon = 0.0;
    int N_eps1 = 0, N_eps2 = 0, N_eps = 0;
    std::string velocity_case;  // "c<gamma" or "c>gamma"
    double delta = 0.0, delta_prime = 0.0;          // fitted from the literal pairing
    double delta_resc = 0.0, delta_prime_resc = 0.0;  // fitted from direct nearest partners
    std::vector<ClauseResult> literal;
    std::vector<ClauseResult> rescaled;
    std::int64_t pairs_total = 0;
    std::int64_t pairs_branch1 = 0, pairs_branch23 = 0, pairs_near = 0, pairs_critical = 0;
    bool coverage_pass = false;
    bool literal_pass = false;
    bool rescaled_pass = false;
    bool pass = false;  // literal_pass && coverage_pass

    json to_json() const;
};

// epsilon <= 0 selects min(c gamma, |1 - c/gamma| gamma) / 10
GapReport gap_diagnostics(const MovingSpectrum& ms, double epsilon = 0.0);

struct FrameBounds {
    double a1_hat = 0.0, a2_hat = 0.0;  // extreme eigenvalues of B_n^* B_n over |n| <= N
    int a1_mode = 0, a2_mode = 0;
    double a1_decay_slope = 0.0;         // log-log slope of min eig(B_n^* B_n) against n, top half of n > 0
    double min_abs_det = 0.0;
    double max_det_mismatch = 0.0;       // |det B_n - closed form| / |closed form|
    double max_psi_identity_error = 0.0; // third eigenvector entry against 1/mu
    double limit_distance = 0.0;         // ||B_N^* B_N - B~||_F with the stated limit matrix
    double limit_det = 0.0;              // det B~ (stated value 6/M^2)
    double tail_limit_distance = 0.0;    // ||B_N^* B_N - B_{N-1}^* B_{N-1}||_F
    int trials = 0;
    int trials_passed = 0;
    double worst_lower_ratio = 0.0;      // min over trials of ||.||^2 / (2 a1 sum|a|^2)
    double worst_upper_ratio = 0.0;      // max over trials of ||.||^2 / (2 a2 sum|a|^2)
    bool degenerate = false;
    bool pass = false;
};

FrameBounds frame_bounds(const MovingSpectrum& ms, double sigma, int trials, std::uint64_t seed = 1);

void write_lambda_csv(const std::string& path, const MovingSpectrum& ms);

}  // namespace movctl
