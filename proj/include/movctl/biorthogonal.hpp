#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "movctl/moving_spectrum.hpp"

namespace movctl {

// P(z) = z^3 prod (1 - z / z_q), z_q = -i conj(lambda_q), over |n| <= R_modes, times the
// exponential of the power-sum expansion of the factors with R_modes < |n| <= tail_limit.
class ProductFunction {
public:
    ProductFunction(const MovingSpectrum& ms, int R_modes, int tail_terms = 6, int tail_limit = 200000);

    cplx log_value(cplx z) const;  // any branch of log P(z); -inf real part at a zero
    cplx value(cplx z) const;
    cplx derivative(cplx z) const;
    cplx log_derivative_at_zero(std::size_t q) const;  // log P'(z_q), vanishing factor removed
    cplx derivative_at_zero(std::size_t q) const { return std::exp(log_derivative_at_zero(q)); }

    const std::vector<cplx>& zeros() const { return zeros_; }
    const std::vector<ModeIndex>& zero_modes() const { return modes_; }
    std::optional<std::size_t> zero_index(const ModeIndex& m) const;
    int R_modes() const { return R_; }
    double excluded_radius() const { return excluded_radius_; }  // min |z| over modes left to the tail
    double theoretical_type() const { return type_bound_; }
    const MovingSpectrum& spectrum() const { return *ms_; }

private:
    cplx tail(cplx z) const;
    cplx tail_derivative(cplx z) const;

    const MovingSpectrum* ms_;
    int R_;
    std::vector<cplx> zeros_;
    std::vector<ModeIndex> modes_;
    std::vector<cplx> power_sums_;  // S_p = sum z_q^{-p} over the tail, p = 1..tail_terms
    double excluded_radius_ = 0.0;
    double type_bound_ = 0.0;
};

// Smallest R >= 4N such that every zero with |n| > R has modulus >= reach.
int product_radius_for(const MovingSpectrum& ms, double reach, int tail_limit = 200000);

ProductFunction build_product(const MovingSpectrum& ms, int R_modes = 0);

struct ProductReport {
    double theoretical_type = 0.0;
    double type_up = 0.0, type_down = 0.0;  // difference-quotient slopes of log|P(+-iy)| at the largest y
    double empirical_type = 0.0;
    double counting_type = 0.0;             // pi/2 * d(#zeros within r)/dr
    bool type_pass = false;                 // empirical <= 1.1 * theoretical
    double strip_sup = 0.0, strip_sup_doubled = 0.0;  // sup |P| on |Im z| <= delta over [-X, X] and [-2X, 2X]
    bool strip_pass = false;                // doubling the scan changes the sup by at most 50%
    double envelope_C1_inner = 0.0, envelope_C1_outer = 0.0;
    bool envelope_pass = false;             // outer sup <= 2 inner sup
    double C2_hat = 0.0;                    // min rho_m |P'(z_m)| over |n| <= N
    ModeIndex C2_mode;
    bool C2_pass = false;                   // positive and stable between halves of the family
    double scan_X = 0.0;
    double growth_exponent = 0.0;           // log log|P(x)| against log x, positive x
    bool pass = false;

    json to_json() const;
};

ProductReport verify_product_properties(const ProductFunction& pf, double strip_delta = 0.5,
                                        double scan_X = 200.0);

// Even entire function prod sinc(a_k z) of exponential type sum a_k.
struct Multiplier {
    std::vector<double> a;
    double type() const;
    cplx log_value(cplx z) const;
    static Multiplier with_type(double type, int factors = 60, double decay = 1.3);
};

struct BiorthogonalOptions {
    double epsilon = 0.0;          // multiplier type; <= 0 picks it from the horizon slack
    double type_margin = 0.4;
    double envelope_tol = 1e-6;
    double panel_width = 0.5;
    int samples_per_period = 32;
    double min_type_probe = 320.0;  // |y| used for the empirical type of P
    bool allow_short_horizon = false;  // skip the threshold check; the multiplier slack is still required
};

struct BiorthogonalFamily {
    double T = 0.0;
    std::vector<ModeIndex> modes;  // |n| <= N of the spectrum
    std::vector<cplx> lambda;      // convention values
    std::vector<double> rho;
    std::vector<double> t;         // uniform samples on [-T/2, T/2], odd count
    Eigen::MatrixXcd theta;        // modes x samples

    // theta_m(t) = sum_x coef(m, x) e^{i x t} + sum_k correction(m, k) e^{-lambda_k t}
    std::vector<double> nodes;
    Eigen::MatrixXcd coef;
    Eigen::MatrixXcd correction;

    double window_X = 0.0;
    double epsilon = 0.0;
    double empirical_type = 0.0;
    double tail_estimate = 0.0;    // relative envelope at the window edge
    double raw_residual = 0.0;     // max |B - I| before the Gram correction (closed-form moments)
    double closed_residual = 0.0;  // after the correction, closed-form moments
    double quad_residual = 0.0;    // after the correction, Simpson quadrature on the samples
    double quad_diag_residual = 0.0;
    double gamma_condition = 0.0;  // condition number of the exponential Gram on [-T/2, T/2]
    std::vector<double> norms;
    double C_hat = 0.0;            // max ||theta_m|| / rho_m
    double norm_growth = 0.0;      // max over top half of |m| of ||theta||/rho divided by the bottom-half max
    double summation_constant = 0.0;  // lambda_max of the Gram of theta_m / rho_m
    double conjugation_error = -1.0;  // |theta_{(-n,3)} - conj theta_{(n,2)}| relative, -1 when not applicable

    cplx eval(std::size_t m, double time) const;
    json manifest() const;
};

double horizon_threshold(double c, double gamma);  // 2 pi (1/|c| + 1/|c+gamma| + 1/|c-gamma|)

BiorthogonalFamily build_biorthogonal(const ProductFunction& pf, double T, const BiorthogonalOptions& opt = {});

// simpson weights for an odd number of uniform samples
std::vector<double> simpson_weights(std::size_t count, double dt);

struct LowerSummation {
    double C_hat = 0.0;
    int trials = 0;
    int passed = 0;
    double min_margin = 0.0;        // min of C ||f||^2 / sum |a|^2/rho^2 over random trials
    double single_mode_margin = 0.0;
    double adversarial_margin = 0.0;
    std::pair<ModeIndex, ModeIndex> adversarial_pair;
    bool adversarial_smallest = false;
    bool pass = false;
};

LowerSummation verify_lower_summation(const BiorthogonalFamily& bf, int trials, int modes_per_trial = 50,
                                      std::uint64_t seed = 7);

// closed-form exponential Gram on [-T/2, T/2]: G_kn = int e^{-lambda_k t} e^{-conj(lambda_n) t} dt
Eigen::MatrixXcd exponential_gram(const std::vector<cplx>& lambda, double T);

void write_theta_csv(const std::string& dir, const BiorthogonalFamily& bf);

}  // namespace movctl
