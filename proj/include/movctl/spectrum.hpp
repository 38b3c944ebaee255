#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace movctl {

using cplx = std::complex<double>;

struct FractionalOrder {
    double s;
    explicit FractionalOrder(double value);
    // spectral and control modules need simple eigenvalues, i.e. s > 1/2
    bool supports_control() const { return s > 0.5; }
};

// C_s = s 2^{2s} Gamma((1+2s)/2) / (sqrt(pi) Gamma(1-s))
double normalization_constant(double s);

enum class EigenBackend { asymptotic, discretized };
std::string to_string(EigenBackend b);
EigenBackend parse_backend(std::string_view name);

double asymptotic_eigenvalue(double s, int n);

struct EigenvalueTable {
    double s = 0.0;
    int n_max = 0;
    EigenBackend backend = EigenBackend::asymptotic;
    std::vector<double> rho;  // rho[n-1]
    double gap_gamma = 0.0;
    int gap_threshold = 1;  // gaps with threshold <= n < resolved_n satisfy the gap bound
    bool gap_certified = false;
    double gap_tol = 1e-3;
    int grid_intervals = 0;  // discretized backend only
    int resolved_n = 0;      // modes trusted by the backend (discretized: n h <= 1/20, i.e. 80 nodes per wavelength)
    double max_residual = 0.0;

    double rho_at(int n) const { return rho.at(static_cast<std::size_t>(n - 1)); }
    double root(int n) const;  // rho_n^{1/(2s)}
    double gap(int n) const;   // root(n+1) - root(n)
};

struct TableOptions {
    int grid_intervals = 0;  // 0: max(400, 10 n_max)
    double gap_tol = 1e-3;
};

EigenvalueTable build_eigenvalue_table(FractionalOrder s, int n_max, EigenBackend backend,
                                       const TableOptions& opt = {});

struct BackendAgreement {
    std::vector<double> rel_diff;  // |rho_a - rho_d| / rho_a
    double fitted_C = 0.0;         // rel_diff ~ C / n over the upper half of the compared range
    std::vector<int> flagged;      // resolved n with rel_diff > 5 C / n
    double max_rel_low = 0.0;      // max rel_diff for n <= n_low
    bool within_tol = false;
};

BackendAgreement compare_backends(const EigenvalueTable& asym, const EigenvalueTable& disc,
                                  int n_low = 32, double tol = 1e-2);

// Dense collocation matrix of the fractional Laplacian on (-1,1) with zero exterior values,
// interior nodes x_i = -1 + i h, i = 1..K-1, h = 2/K. Row-major (K-1)x(K-1).
std::vector<double> dirichlet_matrix(double s, int K);

struct OperatorSample {
    double x0 = 0.0;
    double h = 0.0;
    std::vector<cplx> values;
    double epsilon = 0.0;  // radius of the local principal-value correction
    FractionalOrder s{0.5};
    double c_s = 0.0;

    double x(std::size_t i) const { return x0 + h * static_cast<double>(i); }

    static OperatorSample from_function(FractionalOrder s, double a, double b, std::size_t points,
                                        const std::function<cplx(double)>& f,
                                        double epsilon = 0.0);
};

struct OperatorResult {
    std::size_t first = 0;  // grid index of values[0]
    std::vector<cplx> values;
};

// Principal-value integral at every grid point whose window [x-R, x+R] lies inside the grid.
// Far-field values are blended with a cos^2 taper on [R/2, R] into the local window means, and the
// remaining tail is added analytically.
OperatorResult apply_fractional_laplacian(const OperatorSample& f, double window_radius);

struct SymbolCheck {
    double kappa = 0.0;
    double s = 0.0;
    double h = 0.0;
    double max_rel_error = 0.0;
    bool pass = false;
};

struct SymbolOptions {
    double h = 0.02;
    double window_radius = 120.0;
    double eval_half_width = 1.0;
};

SymbolCheck verify_symbol_identity(double kappa, FractionalOrder s, double tol,
                                   const SymbolOptions& opt = {});

struct SymbolConvergence {
    std::vector<SymbolCheck> levels;
    std::vector<double> observed_order;  // log2(e_k / e_{k+1})
    bool first_order = false;            // every observed order >= 0.9
};

// Each level halves h and doubles the window radius, so the far-field truncation keeps shrinking
// along with the local quadrature error.
SymbolConvergence symbol_convergence(double kappa, FractionalOrder s, double tol, int levels = 3,
                                     const SymbolOptions& opt = {});

void write_table_csv(const std::string& path, const EigenvalueTable& t);

}  // namespace movctl
