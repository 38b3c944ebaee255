#include "movctl/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>
#include <lapacke.h>

#include "movctl/io.hpp"

namespace movctl {

namespace {

constexpr double kPi = std::numbers::pi;

// Integral of (k+1-t) t^{1-2s} and (t-k) t^{1-2s} over [k, k+1].
std::pair<double, double> panel_moments(double s, int k) {
    using Q = boost::math::quadrature::gauss<double, 10>;
    double a = 0.0, b = 0.0;
    const double e = 1.0 - 2.0 * s;
    auto add = [&](double u, double w) {  // u in [-1,1]
        const double t = k + 0.5 + 0.5 * u;
        const double p = std::pow(t, e) * 0.5 * w;
        a += (k + 1 - t) * p;
        b += (t - k) * p;
    };
    const auto& xs = Q::abscissa();
    const auto& ws = Q::weights();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        add(xs[i], ws[i]);
        if (xs[i] != 0.0) add(-xs[i], ws[i]);
    }
    return {a, b};
}

// Weights W_k (k = m..K) such that the principal value over [m h, K h] equals
// h^{-2s} sum_k W_k D_k with D_k = 2 f(x) - f(x + kh) - f(x - kh).
std::vector<double> pv_weights(double s, int m, int K) {
    std::vector<double> W(static_cast<std::size_t>(K + 1), 0.0);
    W[m] = std::pow(static_cast<double>(m), -2.0 * s) / (2.0 - 2.0 * s);
    for (int k = m; k < K; ++k) {
        auto [A, B] = panel_moments(s, k);
        W[k] += A / (static_cast<double>(k) * k);
        W[k + 1] += B / (static_cast<double>(k + 1) * (k + 1));
    }
    return W;
}

double bump_edge(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

// C-infinity step from 1 at z <= R/2 to 0 at z >= R
double taper(double z, double R) {
    const double u = (z - 0.5 * R) / (0.5 * R);
    if (u <= 0.0) return 1.0;
    if (u >= 1.0) return 0.0;
    const double a = bump_edge(1.0 - u), b = bump_edge(u);
    return a / (a + b);
}

}  // namespace

FractionalOrder::FractionalOrder(double value) : s(value) {
    if (!(value > 0.0 && value < 1.0))
        throw std::invalid_argument(fmt::format("fractional order must lie in (0,1), got {}", value));
}

double normalization_constant(double s) {
    return s * std::pow(2.0, 2.0 * s) * std::tgamma(0.5 + s) / (std::sqrt(kPi) * std::tgamma(1.0 - s));
}

std::string to_string(EigenBackend b) {
    return b == EigenBackend::asymptotic ? "asymptotic" : "discretized";
}

EigenBackend parse_backend(std::string_view name) {
    if (name == "asymptotic") return EigenBackend::asymptotic;
    if (name == "discretized") return EigenBackend::discretized;
    throw std::invalid_argument(fmt::format("unknown eigenvalue backend '{}'", name));
}

double asymptotic_eigenvalue(double s, int n) {
    return std::pow(n * kPi / 2.0 - (1.0 - s) * kPi / 4.0, 2.0 * s);
}

double EigenvalueTable::root(int n) const { return std::pow(rho_at(n), 1.0 / (2.0 * s)); }

double EigenvalueTable::gap(int n) const { return root(n + 1) - root(n); }

std::vector<double> dirichlet_matrix(double s, int K) {
    if (K < 3) throw std::invalid_argument("dirichlet_matrix needs at least 3 intervals");
    const int n = K - 1;
    const double h = 2.0 / K;
    const double scale = normalization_constant(s) * std::pow(h, -2.0 * s);
    // the diagonal sees every offset out to infinity; sum far beyond the domain, then the exact tail
    const int kfar = std::max(8 * K, 4096);
    auto W = pv_weights(s, 1, kfar);
    double wsum = 0.0;
    for (int k = kfar; k >= 1; --k) wsum += W[k];
    wsum += std::pow(static_cast<double>(kfar), -2.0 * s) / (2.0 * s);
    std::vector<double> A(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        A[static_cast<std::size_t>(i) * n + i] = 2.0 * wsum * scale;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            A[static_cast<std::size_t>(i) * n + j] = -W[std::abs(i - j)] * scale;
        }
    }
    return A;
}

namespace {

void certify_gaps(EigenvalueTable& t) {
    const double floor = kPi / 2.0 - t.gap_tol;
    const int top = std::min(t.n_max, t.resolved_n);
    int thr = top;
    for (int n = top - 1; n >= 1; --n) {
        if (t.gap(n) >= floor)
            thr = n;
        else
            break;
    }
    t.gap_threshold = thr;
    t.gap_certified = thr < top;
    if (t.gap_certified) {
        double g = t.gap(thr);
        for (int n = thr; n < top; ++n) g = std::min(g, t.gap(n));
        t.gap_gamma = g;
    } else {
        t.gap_gamma = top > 1 ? t.gap(top - 1) : kPi / 2.0;
    }
}

}  // namespace

EigenvalueTable build_eigenvalue_table(FractionalOrder s, int n_max, EigenBackend backend,
                                       const TableOptions& opt) {
    if (n_max < 1) throw std::invalid_argument("n_max must be positive");
    EigenvalueTable t;
    t.s = s.s;
    t.n_max = n_max;
    t.backend = backend;
    t.gap_tol = opt.gap_tol;
    t.rho.resize(static_cast<std::size_t>(n_max));
    if (backend == EigenBackend::asymptotic) {
        for (int n = 1; n <= n_max; ++n) t.rho[n - 1] = asymptotic_eigenvalue(s.s, n);
        t.resolved_n = n_max;
    } else {
        const int K = opt.grid_intervals > 0 ? opt.grid_intervals : std::max(400, 10 * n_max);
        if (n_max > K - 1)
            throw std::invalid_argument(fmt::format("n_max={} exceeds the {} grid unknowns", n_max, K - 1));
        t.grid_intervals = K;
        t.resolved_n = std::max(1, K / 40);
        auto A = dirichlet_matrix(s.s, K);
        const auto A0 = A;
        const lapack_int n = K - 1;
        std::vector<double> w(static_cast<std::size_t>(n));
        std::vector<double> Z(static_cast<std::size_t>(n) * n_max);
        std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n_max));
        lapack_int found = 0;
        const lapack_int info = LAPACKE_dsyevr(LAPACK_ROW_MAJOR, 'V', 'I', 'U', n, A.data(), n, 0.0, 0.0, 1,
                                               n_max, 0.0, &found, w.data(), Z.data(), n_max, isuppz.data());
        if (info != 0 || found != n_max)
            throw std::runtime_error(
                fmt::format("discretized eigen-solve failed (info={}, found {} of {})", info, found, n_max));
        double anorm = 0.0;
        for (double v : A0) anorm = std::max(anorm, std::abs(v));
        double worst = 0.0;
        for (int k = 0; k < n_max; ++k) {
            double r2 = 0.0;
            for (int i = 0; i < n; ++i) {
                double acc = -w[k] * Z[static_cast<std::size_t>(i) * n_max + k];
                for (int j = 0; j < n; ++j)
                    acc += A0[static_cast<std::size_t>(i) * n + j] * Z[static_cast<std::size_t>(j) * n_max + k];
                r2 += acc * acc;
            }
            worst = std::max(worst, std::sqrt(r2) / (anorm * n));
        }
        t.max_residual = worst;
        for (int k = 0; k < n_max; ++k) t.rho[k] = w[k];
    }
    for (int n = 1; n < n_max; ++n)
        if (!(t.rho[n] > t.rho[n - 1]))
            throw std::runtime_error(fmt::format("eigenvalue table not strictly increasing at n={}", n));
    certify_gaps(t);
    return t;
}

BackendAgreement compare_backends(const EigenvalueTable& asym, const EigenvalueTable& disc, int n_low,
                                  double tol) {
    BackendAgreement out;
    const int n = std::min({asym.n_max, disc.n_max});
    const int nres = std::min({n, asym.resolved_n, disc.resolved_n});
    out.rel_diff.resize(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k)
        out.rel_diff[k - 1] = std::abs(asym.rho_at(k) - disc.rho_at(k)) / asym.rho_at(k);
    // least-squares fit of rel_diff ~ C/n on the upper half of the low range
    const int lo = std::max(1, std::min(n_low, n) / 2), hi = std::min(n_low, n);
    double num = 0.0, den = 0.0;
    for (int k = lo; k <= hi; ++k) {
        num += out.rel_diff[k - 1] / k;
        den += 1.0 / (static_cast<double>(k) * k);
    }
    out.fitted_C = den > 0 ? num / den : 0.0;
    for (int k = 1; k <= nres; ++k)
        if (out.rel_diff[k - 1] > 5.0 * out.fitted_C / k) out.flagged.push_back(k);
    for (int k = 1; k <= std::min(n_low, n); ++k) out.max_rel_low = std::max(out.max_rel_low, out.rel_diff[k - 1]);
    out.within_tol = out.max_rel_low <= tol;
    return out;
}

OperatorSample OperatorSample::from_function(FractionalOrder s, double a, double b, std::size_t points,
                                             const std::function<cplx(double)>& f, double epsilon) {
    if (points < 3 || !(b > a)) throw std::invalid_argument("operator grid needs b > a and at least 3 points");
    OperatorSample o;
    o.x0 = a;
    o.h = (b - a) / static_cast<double>(points - 1);
    o.s = s;
    o.c_s = normalization_constant(s.s);
    o.epsilon = epsilon > 0 ? epsilon : o.h;
    o.values.resize(points);
    for (std::size_t i = 0; i < points; ++i) o.values[i] = f(o.x(i));
    return o;
}

OperatorResult apply_fractional_laplacian(const OperatorSample& f, double window_radius) {
    if (!(f.h > 0)) throw std::invalid_argument("grid spacing must be positive");
    if (!(f.epsilon > 0) || f.epsilon < f.h * (1.0 - 1e-12))
        throw std::invalid_argument(fmt::format("epsilon={} is below the grid resolution h={}", f.epsilon, f.h));
    const int m = static_cast<int>(std::lround(f.epsilon / f.h));
    const int K = static_cast<int>(std::floor(window_radius / f.h + 1e-9));
    if (K < 2 * m + 2) throw std::invalid_argument("window radius too small for the local correction");
    const std::size_t npts = f.values.size();
    if (npts < static_cast<std::size_t>(2 * K + 1))
        throw std::invalid_argument("grid shorter than the evaluation window");
    const double s = f.s.s;
    const double R = K * f.h;
    const auto W = pv_weights(s, m, K);
    std::vector<double> chi(static_cast<std::size_t>(K + 1));
    for (int k = 0; k <= K; ++k) chi[k] = taper(k * f.h, R);
    const int khalf = K / 2;
    // smooth bump weights over the taper zone, so a plane wave has a negligible far-field mean
    std::vector<double> wmean(static_cast<std::size_t>(K - khalf + 1));
    double wtot = 0.0;
    for (int k = khalf; k <= K; ++k) {
        const double u = (k - khalf) / static_cast<double>(K - khalf);
        wmean[k - khalf] = (u > 0.0 && u < 1.0) ? std::exp(-1.0 / (u * (1.0 - u))) : 0.0;
        wtot += wmean[k - khalf];
    }
    for (double& w : wmean) w /= wtot;
    const double scale = f.c_s * std::pow(f.h, -2.0 * s);
    const double tail = std::pow(R, -2.0 * s) / (2.0 * s);
    OperatorResult out;
    out.first = static_cast<std::size_t>(K);
    out.values.resize(npts - 2 * static_cast<std::size_t>(K));
    for (std::size_t i = K; i + K < npts; ++i) {
        const cplx fi = f.values[i];
        cplx mp = 0.0, mm = 0.0;
        for (int k = khalf; k <= K; ++k) {
            mp += wmean[k - khalf] * f.values[i + k];
            mm += wmean[k - khalf] * f.values[i - k];
        }
        cplx acc = 0.0;
        for (int k = m; k <= K; ++k) {
            const double c = chi[k];
            const cplx fp = c * f.values[i + k] + (1.0 - c) * mp;
            const cplx fm = c * f.values[i - k] + (1.0 - c) * mm;
            acc += W[k] * (2.0 * fi - fp - fm);
        }
        out.values[i - K] = scale * acc + f.c_s * (2.0 * fi - mp - mm) * tail;
    }
    return out;
}

SymbolCheck verify_symbol_identity(double kappa, FractionalOrder s, double tol, const SymbolOptions& opt) {
    if (kappa == 0.0) throw std::invalid_argument("symbol identity needs a nonzero frequency");
    const double half = opt.window_radius + opt.eval_half_width + opt.h;
    const auto points = static_cast<std::size_t>(std::llround(2.0 * half / opt.h)) + 1;
    auto f = OperatorSample::from_function(
        s, -half, -half + opt.h * static_cast<double>(points - 1), points,
        [kappa](double x) { return std::exp(cplx(0.0, kappa * x)); });
    const auto r = apply_fractional_laplacian(f, opt.window_radius);
    const double sym = std::pow(std::abs(kappa), 2.0 * s.s);
    SymbolCheck c{kappa, s.s, opt.h, 0.0, false};
    for (std::size_t k = 0; k < r.values.size(); ++k) {
        const double x = f.x(r.first + k);
        if (std::abs(x) > opt.eval_half_width + 1e-12) continue;
        const cplx expect = sym * f.values[r.first + k];
        c.max_rel_error = std::max(c.max_rel_error, std::abs(r.values[k] - expect) / std::abs(expect));
    }
    c.pass = c.max_rel_error <= tol;
    return c;
}

SymbolConvergence symbol_convergence(double kappa, FractionalOrder s, double tol, int levels,
                                     const SymbolOptions& opt) {
    SymbolConvergence out;
    SymbolOptions o = opt;
    for (int l = 0; l < levels; ++l) {
        out.levels.push_back(verify_symbol_identity(kappa, s, tol, o));
        o.h *= 0.5;
        o.window_radius *= 2.0;
    }
    out.first_order = true;
    for (int l = 0; l + 1 < levels; ++l) {
        const double p = std::log2(out.levels[l].max_rel_error / out.levels[l + 1].max_rel_error);
        out.observed_order.push_back(p);
        if (!(p >= 0.9)) out.first_order = false;
    }
    return out;
}

void write_table_csv(const std::string& path, const EigenvalueTable& t) {
    CsvWriter w(path, {"n", "rho", "rho_root", "gap", "backend"});
    for (int n = 1; n <= t.n_max; ++n) {
        w.row({fmt::format("{}", n), fmt::format("{:.17g}", t.rho_at(n)), fmt::format("{:.17g}", t.root(n)),
               n < t.n_max ? fmt::format("{:.17g}", t.gap(n)) : std::string(), to_string(t.backend)});
    }
}

}  // namespace movctl
