#include "movctl/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

namespace movctl {

namespace {

const cplxl IL(0.0L, 1.0L);
constexpr cplx I{0.0, 1.0};

cplxl to_l(cplx z) { return {static_cast<long double>(z.real()), static_cast<long double>(z.imag())}; }
cplx to_d(cplxl z) { return {static_cast<double>(z.real()), static_cast<double>(z.imag())}; }

double hermitian_condition(const Eigen::MatrixXcd& H) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(H, Eigen::EigenvaluesOnly).eigenvalues();
    if (ev(0) <= 0.0) return std::numeric_limits<double>::infinity();
    return ev(ev.size() - 1) / ev(0);
}

Eigen::MatrixXcd to_double(const MatrixXcl& G) {
    Eigen::MatrixXcd D(G.rows(), G.cols());
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.cols(); ++j) D(i, j) = to_d(G(i, j));
    return D;
}

long double max_abs(const VectorXcl& v) {
    long double m = 0.0L;
    for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v(i)));
    return m;
}

// Gauss-Legendre nodes and weights on [a, b] split into panels of width <= h
void gauss_panels(double a, double b, double h, std::vector<double>& x, std::vector<double>& w) {
    using Q = boost::math::quadrature::gauss<double, 16>;
    const auto& ab = Q::abscissa();
    const auto& wt = Q::weights();
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / h)));
    const double len = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * len, half = 0.5 * len;
        for (std::size_t k = 0; k < ab.size(); ++k) {
            x.push_back(mid + half * ab[k]);
            w.push_back(half * wt[k]);
            if (ab[k] != 0.0) {
                x.push_back(mid - half * ab[k]);
                w.push_back(half * wt[k]);
            }
        }
    }
}

}  // namespace

void check_interval(const Interval& w) {
    if (!(std::isfinite(w.a) && std::isfinite(w.b) && w.a < w.b))
        throw std::invalid_argument(fmt::format("control interval ({}, {}) is empty", w.a, w.b));
}

cplxl interval_phase_integral(long double d, const Interval& w) {
    const long double a = w.a, b = w.b;
    if (std::abs(d) * (b - a) < 1e-6L) {
        const cplxl m = IL * d * (0.5L * (a + b));
        return (b - a) * std::exp(m) * (1.0L - d * d * (b - a) * (b - a) / 24.0L);
    }
    return (std::exp(IL * (d * b)) - std::exp(IL * (d * a))) / (IL * d);
}

cplxl decay_integral(cplxl z, long double T) {
    const cplxl u = z * T;
    if (std::abs(u) < 1e-3L) {
        // T (1 - u/2 + u^2/6 - u^3/24 + u^4/120)
        return T * (1.0L - u / 2.0L + u * u / 6.0L - u * u * u / 24.0L + u * u * u * u / 120.0L);
    }
    return (1.0L - std::exp(-u)) / z;
}

// ---------------------------------------------------------------- data

InitialData InitialData::zero(int N) {
    InitialData d;
    d.N = N;
    d.y0.assign(static_cast<std::size_t>(2 * N), 0.0);
    d.y1.assign(static_cast<std::size_t>(2 * N), 0.0);
    return d;
}

InitialData InitialData::single_mode(int N, int n, cplx y0v, cplx y1v) {
    if (n == 0 || std::abs(n) > N) throw std::invalid_argument("mode outside the truncation");
    InitialData d = zero(N);
    d.y0[d.pos(n)] = y0v;
    d.y1[d.pos(n)] = y1v;
    return d;
}

InitialData InitialData::random(const MovingSpectrum& ms, std::uint64_t seed, double sigma0, double sigma1) {
    InitialData d = zero(ms.N);
    d.sigma0 = sigma0;
    d.sigma1 = sigma1;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (int n = -ms.N; n <= ms.N; ++n) {
        if (n == 0) continue;
        const double r = ms.rho(n);
        d.y0[d.pos(n)] = std::pow(r, -sigma0) * cplx(g(rng), g(rng));
        d.y1[d.pos(n)] = std::pow(r, -sigma1) * cplx(g(rng), g(rng));
    }
    return d;
}

InitialData InitialData::scaled(double factor) const {
    InitialData d = *this;
    for (auto& v : d.y0) v *= factor;
    for (auto& v : d.y1) v *= factor;
    return d;
}

double InitialData::weighted_norm(const MovingSpectrum& ms) const {
    double acc = 0.0;
    for (std::size_t p = 0; p < y0.size(); ++p) {
        const double r = ms.rho(mode_number(p));
        acc += std::pow(r, 2 * sigma0) * std::norm(y0[p]) + std::pow(r, 2 * sigma1) * std::norm(y1[p]);
    }
    return std::sqrt(acc);
}

MomentSystem assemble_moments(const InitialData& data, const MovingSpectrum& ms) {
    if (data.N != ms.N) throw std::invalid_argument("initial data and spectrum truncations differ");
    MomentSystem m;
    m.modes = ms.modes;
    for (const auto& mode : ms.modes) {
        const cplxl mu = to_l(ms.mu(mode.n, mode.j));
        const std::size_t p = data.pos(mode.n);
        m.rhs.push_back(-2.0L * (std::conj(mu) * to_l(data.y0[p]) + to_l(data.y1[p])));
    }
    return m;
}

// ---------------------------------------------------------------- gram

GramReport assemble_gram(const MovingSpectrum& ms, const Interval& omega0, double T) {
    check_interval(omega0);
    if (!(T > 0.0)) throw std::invalid_argument("horizon must be positive");
    const auto n = static_cast<Eigen::Index>(ms.size());
    std::vector<long double> kappa;
    std::vector<cplxl> lambda;
    for (std::size_t q = 0; q < ms.size(); ++q) {
        kappa.push_back(ms.kappa(ms.modes[q].n));
        lambda.push_back(to_l(ms.lambda[q]));
    }
    GramReport r;
    r.G.resize(n, n);
    for (Eigen::Index q = 0; q < n; ++q)
        for (Eigen::Index p = 0; p < n; ++p)
            r.G(q, p) = interval_phase_integral(kappa[p] - kappa[q], omega0) *
                        decay_integral(std::conj(lambda[q]) + lambda[p], T);
    long double scale = 0.0L, asym = 0.0L;
    for (Eigen::Index q = 0; q < n; ++q)
        for (Eigen::Index p = 0; p < n; ++p) {
            scale = std::max(scale, std::abs(r.G(q, p)));
            asym = std::max(asym, std::abs(r.G(q, p) - std::conj(r.G(p, q))));
        }
    r.hermitian_error = static_cast<double>(asym / scale);
    if (r.hermitian_error > 1e-12)
        throw std::logic_error(fmt::format("Gram matrix lost Hermitian symmetry ({:.3g})", r.hermitian_error));
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(to_double(r.G), Eigen::EigenvaluesOnly).eigenvalues();
    r.min_eig_rel = ev(0) / ev(ev.size() - 1);
    return r;
}

// ---------------------------------------------------------------- synthesis

std::string to_string(SolveMethod m) { return m == SolveMethod::direct ? "direct" : "regularized"; }

cplx ControlField::evaluate(double t, double x) const {
    if (t < 0.0 || t > T || !omega0.contains(x)) return 0.0;
    cplx acc = 0.0;
    for (std::size_t q = 0; q < modes.size(); ++q)
        acc += to_d(a(static_cast<Eigen::Index>(q))) * std::exp(I * (kappa[q] * x) - lambda[q] * t);
    return acc;
}

json ControlField::to_json() const {
    json j;
    j["T"] = T;
    j["omega0"] = {omega0.a, omega0.b};
    j["method"] = to_string(method);
    j["fallback"] = fallback;
    j["tikhonov"] = tikhonov;
    j["cond_raw"] = cond_raw;
    j["cond_rho"] = cond_rho;
    j["cond_jacobi"] = cond_jacobi;
    j["residual"] = residual;
    j["relative_residual"] = relative_residual;
    j["norm"] = norm;
    if (!warning.empty()) j["warning"] = warning;
    json coeffs = json::array();
    for (std::size_t q = 0; q < modes.size(); ++q) {
        const cplx v = to_d(a(static_cast<Eigen::Index>(q)));
        coeffs.push_back({{"n", modes[q].n}, {"j", modes[q].j}, {"re", v.real()}, {"im", v.imag()}});
    }
    j["coefficients"] = coeffs;
    return j;
}

ControlField synthesize_control(const MomentSystem& msys, const MovingSpectrum& ms, const GramReport& gram,
                                const Interval& omega0, double T, const SynthesisOptions& opt) {
    const auto n = static_cast<Eigen::Index>(ms.size());
    if (msys.modes != ms.modes || gram.G.rows() != n) throw std::invalid_argument("index sets are not aligned");
    ControlField u;
    u.modes = ms.modes;
    for (std::size_t q = 0; q < ms.size(); ++q) {
        u.kappa.push_back(ms.kappa(ms.modes[q].n));
        u.lambda.push_back(ms.lambda[q]);
    }
    u.omega0 = omega0;
    u.T = T;

    const MatrixXcl& G = gram.G;
    VectorXcl b(n);
    for (Eigen::Index q = 0; q < n; ++q) b(q) = msys.rhs[static_cast<std::size_t>(q)];
    const long double bmax = max_abs(b);

    // Jacobi equilibration
    VectorXcl S(n);
    for (Eigen::Index q = 0; q < n; ++q) S(q) = 1.0L / std::sqrt(G(q, q).real());
    const MatrixXcl Gs = S.asDiagonal() * G * S.asDiagonal();
    const VectorXcl bs = S.asDiagonal() * b;

    const Eigen::MatrixXcd Gd = to_double(G);
    u.cond_raw = hermitian_condition(Gd);
    {
        Eigen::VectorXd rho(n);
        for (Eigen::Index q = 0; q < n; ++q) rho(q) = ms.rho(ms.modes[static_cast<std::size_t>(q)].n);
        u.cond_rho = hermitian_condition(rho.asDiagonal() * Gd * rho.asDiagonal());
    }
    u.cond_jacobi = hermitian_condition(to_double(Gs));

    auto finish = [&](const VectorXcl& y) {
        u.a = S.asDiagonal() * y;
        const VectorXcl r = G * u.a - b;
        u.residual = static_cast<double>(max_abs(r));
        u.relative_residual = bmax > 0.0L ? static_cast<double>(max_abs(r) / bmax) : u.residual;
        const cplxl q = (u.a.adjoint() * G * u.a)(0, 0);
        u.norm = std::sqrt(std::abs(static_cast<double>(q.real())));
    };

    if (bmax == 0.0L) {
        u.method = opt.method;
        finish(VectorXcl::Zero(n));
        return u;
    }

    u.method = opt.method;
    if (opt.method == SolveMethod::direct && !(u.cond_jacobi <= opt.condition_budget)) {
        u.method = SolveMethod::regularized;
        u.fallback = true;
        u.warning = fmt::format("equilibrated condition number {:.3g} exceeds the budget {:.3g}; using Tikhonov",
                                u.cond_jacobi, opt.condition_budget);
    }

    if (u.method == SolveMethod::direct) {
        const Eigen::PartialPivLU<MatrixXcl> lu(Gs);
        VectorXcl y = lu.solve(bs);
        for (int it = 0; it < opt.refinement_steps; ++it) y += lu.solve(bs - Gs * y);
        finish(y);
        return u;
    }

    // largest Tikhonov parameter meeting the residual target; the smallest residual seen otherwise
    const long double top = static_cast<long double>(Gs.diagonal().real().maxCoeff());
    long double best_alpha = 0.0L;
    double best_res = std::numeric_limits<double>::infinity();
    bool met = false;
    for (long double alpha = 1e-2L * top; alpha >= 1e-30L * top; alpha /= std::sqrt(10.0L)) {
        const Eigen::PartialPivLU<MatrixXcl> lu(Gs + alpha * MatrixXcl::Identity(n, n));
        VectorXcl y = lu.solve(bs);
        for (int it = 0; it < opt.refinement_steps; ++it) y += lu.solve(bs - (Gs * y + alpha * y));
        finish(y);
        if (u.relative_residual < best_res) best_res = u.relative_residual, best_alpha = alpha;
        if (u.relative_residual <= opt.residual_target) {
            met = true;
            best_alpha = alpha;
            break;
        }
    }
    if (!met) {
        const Eigen::PartialPivLU<MatrixXcl> lu(Gs + best_alpha * MatrixXcl::Identity(n, n));
        VectorXcl y = lu.solve(bs);
        for (int it = 0; it < opt.refinement_steps; ++it) y += lu.solve(bs - (Gs * y + best_alpha * y));
        finish(y);
        u.warning += fmt::format("{}Tikhonov residual {:.3g} above the target {:.3g}", u.warning.empty() ? "" : "; ",
                                 u.relative_residual, opt.residual_target);
    }
    u.tikhonov = static_cast<double>(best_alpha);
    return u;
}

double moment_residual_quadrature(const ControlField& u, const MomentSystem& msys) {
    const auto n = static_cast<Eigen::Index>(u.modes.size());
    double omega = 1.0, kmax = 1.0;
    for (std::size_t q = 0; q < u.modes.size(); ++q) {
        omega = std::max(omega, std::abs(u.lambda[q].imag()));
        kmax = std::max(kmax, std::abs(u.kappa[q]));
    }
    // about two radians of the fastest product phase per panel
    std::vector<double> tx, tw, xx, xw;
    gauss_panels(0.0, u.T, 1.0 / omega, tx, tw);
    gauss_panels(u.omega0.a, u.omega0.b, 1.0 / kmax, xx, xw);
    const auto nt = static_cast<Eigen::Index>(tx.size()), nx = static_cast<Eigen::Index>(xx.size());

    Eigen::MatrixXcd Tm(nt, n), Xm(nx, n);
    for (Eigen::Index k = 0; k < nt; ++k)
        for (Eigen::Index q = 0; q < n; ++q) Tm(k, q) = std::exp(-u.lambda[static_cast<std::size_t>(q)] * tx[static_cast<std::size_t>(k)]);
    for (Eigen::Index k = 0; k < nx; ++k)
        for (Eigen::Index q = 0; q < n; ++q) Xm(k, q) = std::exp(I * (u.kappa[static_cast<std::size_t>(q)] * xx[static_cast<std::size_t>(k)]));
    Eigen::VectorXcd a(n);
    for (Eigen::Index q = 0; q < n; ++q) a(q) = to_d(u.a(q));
    const Eigen::MatrixXcd U = Tm * a.asDiagonal() * Xm.transpose();  // u at (t_k, x_l)
    const Eigen::VectorXd wx = Eigen::Map<const Eigen::VectorXd>(xw.data(), nx);
    const Eigen::MatrixXcd V = U * wx.asDiagonal() * Xm.conjugate();   // sum_x w u e^{-i kappa_r x}
    double err = 0.0, bmax = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        cplx m = 0.0;
        for (Eigen::Index k = 0; k < nt; ++k) m += tw[static_cast<std::size_t>(k)] * std::conj(Tm(k, r)) * V(k, r);
        const cplx b = to_d(msys.rhs[static_cast<std::size_t>(r)]);
        err = std::max(err, std::abs(m - b));
        bmax = std::max(bmax, std::abs(b));
    }
    return bmax > 0.0 ? err / bmax : err;
}

// ---------------------------------------------------------------- observability

json ObservabilityReport::to_json() const {
    json j;
    j["C_exact"] = C_exact;
    j["C_trials"] = C_trials;
    j["trials"] = trials;
    j["single_mode_min"] = single_mode_min;
    j["adversarial_ratio"] = adversarial_ratio;
    j["adversarial_pair"] = {to_string(adversarial_pair.first), to_string(adversarial_pair.second)};
    j["adversarial_distance"] = adversarial_distance;
    j["adversarial_is_min"] = adversarial_is_min;
    j["consistent"] = consistent;
    j["pass"] = pass;
    return j;
}

ObservabilityReport certify_observability(const MovingSpectrum& ms, const GramReport& gram, int trials,
                                          std::uint64_t seed) {
    ObservabilityReport r;
    const auto n = static_cast<Eigen::Index>(ms.size());
    Eigen::VectorXd rho(n);
    for (Eigen::Index q = 0; q < n; ++q) rho(q) = ms.rho(ms.modes[static_cast<std::size_t>(q)].n);
    const Eigen::MatrixXcd G = to_double(gram.G);
    const Eigen::MatrixXcd H = rho.asDiagonal() * G * rho.asDiagonal();
    r.C_exact = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(H, Eigen::EigenvaluesOnly).eigenvalues()(0);

    // with a = D v the ratio is the Rayleigh quotient of H at v
    auto ratio = [&](const Eigen::VectorXcd& v) { return (v.adjoint() * H * v)(0, 0).real() / v.squaredNorm(); };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    r.C_trials = std::numeric_limits<double>::infinity();
    bool ok = true;
    const double slack = 1e-9 * H.diagonal().real().maxCoeff();
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXcd v(n);
        for (Eigen::Index q = 0; q < n; ++q) v(q) = {g(rng), g(rng)};
        const double rt = ratio(v);
        r.C_trials = std::min(r.C_trials, rt);
        ok = ok && rt >= r.C_exact - slack;
        ++r.trials;
    }
    r.single_mode_min = H.diagonal().real().minCoeff();

    Eigen::Index pa = 0, pb = 1;
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = std::abs(ms.lambda[static_cast<std::size_t>(i)] - ms.lambda[static_cast<std::size_t>(j)]);
            if (d < dmin) dmin = d, pa = i, pb = j;
        }
    Eigen::Matrix2cd H2;
    H2 << H(pa, pa), H(pa, pb), H(pb, pa), H(pb, pb);
    r.adversarial_ratio = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd>(H2, Eigen::EigenvaluesOnly).eigenvalues()(0);
    r.adversarial_pair = {ms.modes[static_cast<std::size_t>(pa)], ms.modes[static_cast<std::size_t>(pb)]};
    r.adversarial_distance = dmin;
    r.adversarial_is_min = r.adversarial_ratio <= r.C_trials && r.adversarial_ratio <= r.single_mode_min;
    ok = ok && r.adversarial_ratio >= r.C_exact - slack && r.single_mode_min >= r.C_exact - slack;
    r.consistent = ok;
    r.pass = r.C_exact > 0.0 && ok;
    return r;
}

void write_control_json(const std::string& path, const ControlField& u) { write_json(path, u.to_json()); }

void write_control_grid_csv(const std::string& path, const ControlField& u, int nt, int nx) {
    CsvWriter w(path, {"t", "x", "re", "im"});
    for (int i = 0; i < nt; ++i) {
        const double t = u.T * i / std::max(1, nt - 1);
        for (int k = 0; k < nx; ++k) {
            const double x = u.omega0.a + u.omega0.length() * k / std::max(1, nx - 1);
            const cplx v = u.evaluate(t, x);
            w.row({num(t), num(x), num(v.real()), num(v.imag())});
        }
    }
}

}  // namespace movctl
