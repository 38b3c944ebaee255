#include "movctl/biorthogonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

namespace movctl {

namespace {

constexpr cplx I{0.0, 1.0};
constexpr double pi = std::numbers::pi;

int sgn(int n) { return n < 0 ? -1 : 1; }

// physical lambda for any n, past the table with the asymptotic eigenvalue
cplx extended_lambda(const MovingSpectrum& ms, int n, int j) {
    const int a = std::abs(n);
    if (a <= ms.table.n_max) return ms.lam(n, j);
    const double rho = asymptotic_eigenvalue(ms.s, a);
    const SpectralTriple tr = solve_cubic(rho, MemoryCoefficient(ms.M), a);
    const double kappa = sgn(n) * std::pow(rho, 0.5 / ms.s);
    return tr.mu(j) + I * (ms.c * kappa);
}

cplx zero_of(const MovingSpectrum& ms, int n, int j) {
    const cplx l = std::abs(n) <= ms.N ? ms.lambda_conv[ms.index({n, j})] : extended_lambda(ms, n, j);
    return -I * std::conj(l);
}

// smallest |z| over the six zeros with |n| = a
double min_zero_modulus(const MovingSpectrum& ms, int a) {
    double m = std::numeric_limits<double>::infinity();
    for (int n : {-a, a})
        for (int j = 1; j <= 3; ++j) m = std::min(m, std::abs(zero_of(ms, n, j)));
    return m;
}

// integral of e^{zeta t} over [-T/2, T/2]
cplx interval_moment(cplx zeta, double T) {
    const cplx h = 0.5 * T * zeta;
    if (std::abs(h) < 1e-6) return T * (1.0 + h * h / 6.0);
    return (std::exp(h) - std::exp(-h)) / zeta;
}

cplx log_sinc(cplx u) {
    if (std::abs(u) < 1e-4) return -u * u / 6.0;
    return std::log(std::sin(u) / u);
}

}  // namespace

// ---------------------------------------------------------------- product

ProductFunction::ProductFunction(const MovingSpectrum& ms, int R_modes, int tail_terms, int tail_limit)
    : ms_(&ms), R_(R_modes) {
    if (R_modes < ms.N) throw std::invalid_argument("product radius must cover the family");
    if (tail_limit <= R_modes) throw std::invalid_argument("tail limit must exceed the product radius");
    for (int n = -R_modes; n <= R_modes; ++n) {
        if (n == 0) continue;
        for (int j = 1; j <= 3; ++j) {
            zeros_.push_back(zero_of(ms, n, j));
            modes_.push_back({n, j});
        }
    }
    power_sums_.assign(static_cast<std::size_t>(tail_terms), 0.0);
    excluded_radius_ = std::numeric_limits<double>::infinity();
    // summed from the far end so the small terms accumulate first
    for (int a = tail_limit; a > R_modes; --a) {
        for (int n : {-a, a})
            for (int j = 1; j <= 3; ++j) {
                const cplx z = zero_of(ms, n, j);
                excluded_radius_ = std::min(excluded_radius_, std::abs(z));
                const cplx w = 1.0 / z;
                cplx p = w;
                for (auto& S : power_sums_) {
                    S += p;
                    p *= w;
                }
            }
    }
    const double c = std::abs(ms.c), g = ms.gamma;
    type_bound_ = pi * (1.0 / c + 1.0 / std::abs(ms.c + g) + 1.0 / std::abs(ms.c - g));
}

cplx ProductFunction::tail(cplx z) const {
    cplx acc = 0.0, zp = z;
    for (std::size_t p = 0; p < power_sums_.size(); ++p) {
        acc -= power_sums_[p] * zp / static_cast<double>(p + 1);
        zp *= z;
    }
    return acc;
}

cplx ProductFunction::tail_derivative(cplx z) const {
    cplx acc = 0.0, zp = 1.0;
    for (const auto& S : power_sums_) {
        acc -= S * zp;
        zp *= z;
    }
    return acc;
}

cplx ProductFunction::log_value(cplx z) const {
    if (z == 0.0) return {-std::numeric_limits<double>::infinity(), 0.0};
    cplx acc = 3.0 * std::log(z) + tail(z);
    for (const auto& q : zeros_) acc += std::log(1.0 - z / q);
    return acc;
}

cplx ProductFunction::value(cplx z) const { return std::exp(log_value(z)); }

cplx ProductFunction::derivative(cplx z) const {
    if (z == 0.0) return 0.0;
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < zeros_.size(); ++q) {
        const double d = std::abs(z - zeros_[q]) / std::abs(zeros_[q]);
        if (d < best) best = d, nearest = q;
    }
    if (best < 1e-10) return derivative_at_zero(nearest);
    cplx logd = 3.0 / z + tail_derivative(z);
    for (const auto& q : zeros_) logd += 1.0 / (z - q);
    return value(z) * logd;
}

cplx ProductFunction::log_derivative_at_zero(std::size_t q) const {
    const cplx zq = zeros_.at(q);
    cplx acc = 3.0 * std::log(zq) + std::log(-1.0 / zq) + tail(zq);
    for (std::size_t p = 0; p < zeros_.size(); ++p)
        if (p != q) acc += std::log(1.0 - zq / zeros_[p]);
    return acc;
}

std::optional<std::size_t> ProductFunction::zero_index(const ModeIndex& m) const {
    if (m.n == 0 || std::abs(m.n) > R_ || m.j < 1 || m.j > 3) return std::nullopt;
    const int pos = m.n < 0 ? m.n + R_ : m.n + R_ - 1;
    return static_cast<std::size_t>(3 * pos + (m.j - 1));
}

int product_radius_for(const MovingSpectrum& ms, double reach, int tail_limit) {
    // the slow sequences are eventually increasing, so scan down from the tail limit
    int R = 4 * ms.N;
    for (int a = tail_limit; a > 4 * ms.N; --a)
        if (min_zero_modulus(ms, a) < reach) {
            R = a;
            break;
        }
    if (R >= tail_limit - 1) throw std::runtime_error("product radius does not fit below the tail limit");
    return R;
}

ProductFunction build_product(const MovingSpectrum& ms, int R_modes) {
    if (R_modes <= 0) R_modes = product_radius_for(ms, 1000.0);
    return ProductFunction(ms, R_modes);
}

// ---------------------------------------------------------------- product checks

json ProductReport::to_json() const {
    json j;
    j["theoretical_type"] = theoretical_type;
    j["type_up"] = type_up;
    j["type_down"] = type_down;
    j["empirical_type"] = empirical_type;
    j["counting_type"] = counting_type;
    j["type_pass"] = type_pass;
    j["strip_sup"] = strip_sup;
    j["strip_sup_doubled"] = strip_sup_doubled;
    j["strip_pass"] = strip_pass;
    j["envelope_C1_inner"] = envelope_C1_inner;
    j["envelope_C1_outer"] = envelope_C1_outer;
    j["envelope_pass"] = envelope_pass;
    j["C2_hat"] = C2_hat;
    j["C2_mode"] = to_string(C2_mode);
    j["C2_pass"] = C2_pass;
    j["scan_X"] = scan_X;
    j["growth_exponent"] = growth_exponent;
    j["pass"] = pass;
    return j;
}

namespace {

double imaginary_axis_slope(const ProductFunction& pf, double y) {
    const double a = pf.log_value(I * (0.5 * y)).real();
    const double b = pf.log_value(I * y).real();
    return (b - a) / (0.5 * std::abs(y));
}

}  // namespace

ProductReport verify_product_properties(const ProductFunction& pf, double strip_delta, double scan_X) {
    const MovingSpectrum& ms = pf.spectrum();
    ProductReport r;
    r.theoretical_type = pf.theoretical_type();
    r.scan_X = scan_X;
    if (2.0 * scan_X > 0.8 * pf.excluded_radius())
        throw std::invalid_argument(fmt::format("scan window {} too wide for product radius {}", scan_X,
                                                pf.excluded_radius()));

    const double probe = std::min(320.0, 0.4 * pf.excluded_radius());
    r.type_up = imaginary_axis_slope(pf, probe);
    r.type_down = imaginary_axis_slope(pf, -probe);
    r.empirical_type = std::max(r.type_up, r.type_down);
    r.type_pass = r.empirical_type <= 1.1 * r.theoretical_type;

    {
        const double r2 = 0.5 * pf.excluded_radius(), r1 = 0.25 * pf.excluded_radius();
        std::size_t n1 = 0, n2 = 0;
        for (const auto& z : pf.zeros()) {
            n1 += std::abs(z) <= r1;
            n2 += std::abs(z) <= r2;
        }
        r.counting_type = 0.5 * pi * static_cast<double>(n2 - n1) / (r2 - r1);
    }

    const double dx = 0.25;
    auto strip_sup = [&](double X) {
        double best = 0.0;
        for (double x = -X; x <= X; x += dx)
            for (double y : {-strip_delta, 0.0, strip_delta})
                best = std::max(best, pf.log_value({x, y}).real());
        return best;
    };
    const double log_sup = strip_sup(scan_X), log_sup2 = strip_sup(2.0 * scan_X);
    r.strip_sup = std::exp(log_sup);
    r.strip_sup_doubled = std::exp(log_sup2);
    r.strip_pass = log_sup2 - log_sup <= std::log(1.5);

    // |P(x) / (x - z_m)| (1 + |x - Re z_m|) over the inner and outer halves of the scan window
    std::vector<double> xs, logP;
    for (double x = -scan_X; x <= scan_X; x += dx) {
        xs.push_back(x);
        logP.push_back(pf.log_value(x).real());
    }
    double inner = -std::numeric_limits<double>::infinity(), outer = inner;
    for (const auto& m : ms.modes) {
        const cplx zm = pf.zeros()[*pf.zero_index(m)];
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double v =
                logP[i] - std::log(std::abs(xs[i] - zm)) + std::log1p(std::abs(xs[i] - zm.real()));
            (std::abs(xs[i]) <= 0.5 * scan_X ? inner : outer) = std::max(
                std::abs(xs[i]) <= 0.5 * scan_X ? inner : outer, v);
        }
    }
    r.envelope_C1_inner = std::exp(inner);
    r.envelope_C1_outer = std::exp(outer);
    r.envelope_pass = outer - inner <= std::log(2.0);

    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (xs[i] >= 0.25 * scan_X && logP[i] > 1.0) {
                const double u = std::log(xs[i]), v = std::log(logP[i]);
                sx += u, sy += v, sxx += u * u, sxy += u * v, ++cnt;
            }
        if (cnt > 2) r.growth_exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    }

    double low_bottom = std::numeric_limits<double>::infinity(), low_top = low_bottom;
    r.C2_hat = low_bottom;
    for (const auto& m : ms.modes) {
        const double v = ms.rho(m.n) * std::exp(pf.log_derivative_at_zero(*pf.zero_index(m)).real());
        if (v < r.C2_hat) r.C2_hat = v, r.C2_mode = m;
        (2 * std::abs(m.n) > ms.N ? low_top : low_bottom) =
            std::min(2 * std::abs(m.n) > ms.N ? low_top : low_bottom, v);
    }
    r.C2_pass = r.C2_hat > 0.0 && std::isfinite(r.C2_hat) && low_top >= 0.1 * low_bottom;
    r.pass = r.type_pass && r.strip_pass && r.envelope_pass && r.C2_pass;
    return r;
}

// ---------------------------------------------------------------- multiplier

double Multiplier::type() const {
    double t = 0.0;
    for (double v : a) t += v;
    return t;
}

cplx Multiplier::log_value(cplx z) const {
    cplx acc = 0.0;
    for (double v : a) acc += log_sinc(v * z);
    return acc;
}

Multiplier Multiplier::with_type(double type, int factors, double decay) {
    if (!(type > 0.0) || factors < 1) throw std::invalid_argument("multiplier needs a positive type");
    Multiplier m;
    double total = 0.0;
    for (int k = 1; k <= factors; ++k) total += std::pow(k, -decay);
    for (int k = 1; k <= factors; ++k) m.a.push_back(type * std::pow(k, -decay) / total);
    return m;
}

// ---------------------------------------------------------------- family

double horizon_threshold(double c, double gamma) {
    return 2.0 * pi * (1.0 / std::abs(c) + 1.0 / std::abs(c + gamma) + 1.0 / std::abs(c - gamma));
}

std::vector<double> simpson_weights(std::size_t count, double dt) {
    if (count < 3 || count % 2 == 0) throw std::invalid_argument("simpson needs an odd sample count >= 3");
    std::vector<double> w(count);
    for (std::size_t i = 0; i < count; ++i) w[i] = (i == 0 || i + 1 == count) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    for (auto& v : w) v *= dt / 3.0;
    return w;
}

Eigen::MatrixXcd exponential_gram(const std::vector<cplx>& lambda, double T) {
    const auto n = static_cast<Eigen::Index>(lambda.size());
    Eigen::MatrixXcd G(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index m = 0; m < n; ++m)
            G(k, m) = interval_moment(-lambda[k] - std::conj(lambda[m]), T);
    return G;
}

cplx BiorthogonalFamily::eval(std::size_t m, double time) const {
    const auto row = static_cast<Eigen::Index>(m);
    cplx acc = 0.0;
    for (std::size_t x = 0; x < nodes.size(); ++x)
        acc += coef(row, static_cast<Eigen::Index>(x)) * std::exp(I * (nodes[x] * time));
    for (std::size_t k = 0; k < lambda.size(); ++k)
        acc += correction(row, static_cast<Eigen::Index>(k)) * std::exp(-lambda[k] * time);
    return acc;
}

json BiorthogonalFamily::manifest() const {
    json j;
    j["T"] = T;
    j["modes"] = modes.size();
    j["samples"] = t.size();
    j["quadrature_nodes"] = nodes.size();
    j["window_X"] = window_X;
    j["multiplier_type"] = epsilon;
    j["empirical_type"] = empirical_type;
    j["tail_estimate"] = tail_estimate;
    j["raw_residual"] = raw_residual;
    j["closed_residual"] = closed_residual;
    j["quad_residual"] = quad_residual;
    j["quad_diag_residual"] = quad_diag_residual;
    j["gamma_condition"] = gamma_condition;
    j["C_hat"] = C_hat;
    j["norm_growth"] = norm_growth;
    j["summation_constant"] = summation_constant;
    j["conjugation_error"] = conjugation_error;
    return j;
}

BiorthogonalFamily build_biorthogonal(const ProductFunction& pf, double T, const BiorthogonalOptions& opt) {
    const MovingSpectrum& ms = pf.spectrum();
    const double threshold = horizon_threshold(ms.c, ms.gamma);
    if (!(T > threshold) && !opt.allow_short_horizon)
        throw std::invalid_argument(fmt::format("T = {} is not above the horizon threshold {}", T, threshold));

    BiorthogonalFamily bf;
    bf.T = T;
    bf.modes = ms.modes;
    bf.lambda = ms.lambda_conv;
    for (const auto& m : ms.modes) bf.rho.push_back(ms.rho(m.n));

    const double probe = std::min(opt.min_type_probe, 0.4 * pf.excluded_radius());
    bf.empirical_type = std::max(imaginary_axis_slope(pf, probe), imaginary_axis_slope(pf, -probe));
    bf.epsilon = opt.epsilon > 0.0 ? opt.epsilon
                                   : std::min(4.0, 0.5 * T - bf.empirical_type - opt.type_margin);
    if (bf.epsilon < 0.5)
        throw std::invalid_argument(fmt::format(
            "T/2 = {} leaves no room for the multiplier above the measured type {}", 0.5 * T, bf.empirical_type));
    const Multiplier W = Multiplier::with_type(bf.epsilon);

    // log |P W| / (1 + |x|) on a coarse grid, doubling the window until the edge is negligible
    auto log_env = [&](double x) { return (pf.log_value(x) + W.log_value(x)).real() - std::log1p(std::abs(x)); };
    const double x_cap = pf.excluded_radius() / 2.5;
    double X = 16.0, peak = -std::numeric_limits<double>::infinity(), edge = peak;
    for (double x = 0.125; x <= X; x += 0.25) peak = std::max({peak, log_env(x), log_env(-x)});
    for (;;) {
        edge = -std::numeric_limits<double>::infinity();
        for (double x = 0.5 * X; x <= X; x += 0.25) edge = std::max({edge, log_env(x), log_env(-x)});
        peak = std::max(peak, edge);
        if (edge - peak <= std::log(opt.envelope_tol)) break;
        if (2.0 * X > x_cap)
            throw std::runtime_error(fmt::format("Fourier window {} would exceed the product radius", 2.0 * X));
        X *= 2.0;
    }
    bf.window_X = X;
    bf.tail_estimate = std::exp(edge - peak);

    // panels between consecutive zero abscissae, split to the maximal width
    std::vector<double> edges{-X, X};
    for (const auto& z : pf.zeros())
        if (std::abs(z.real()) < X) edges.push_back(z.real());
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end(), [](double a, double b) { return b - a < 1e-9; }),
                edges.end());
    using Q = boost::math::quadrature::gauss<double, 16>;
    const auto& ab = Q::abscissa();
    const auto& wt = Q::weights();
    std::vector<double> weights;
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
        const double a = edges[e], b = edges[e + 1];
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / opt.panel_width)));
        const double h = (b - a) / pieces;
        for (int p = 0; p < pieces; ++p) {
            const double mid = a + (p + 0.5) * h, half = 0.5 * h;
            for (std::size_t k = 0; k < ab.size(); ++k) {
                bf.nodes.push_back(mid + half * ab[k]);
                weights.push_back(half * wt[k]);
                if (ab[k] != 0.0) {
                    bf.nodes.push_back(mid - half * ab[k]);
                    weights.push_back(half * wt[k]);
                }
            }
        }
    }

    const auto nm = static_cast<Eigen::Index>(bf.modes.size());
    const auto nx = static_cast<Eigen::Index>(bf.nodes.size());
    std::vector<cplx> logPW(bf.nodes.size());
    for (std::size_t x = 0; x < bf.nodes.size(); ++x)
        logPW[x] = pf.log_value(bf.nodes[x]) + W.log_value(bf.nodes[x]);

    bf.coef.resize(nm, nx);
    for (Eigen::Index m = 0; m < nm; ++m) {
        const std::size_t q = *pf.zero_index(bf.modes[static_cast<std::size_t>(m)]);
        const cplx zm = pf.zeros()[q];
        const cplx norm = pf.log_derivative_at_zero(q) + W.log_value(zm);
        for (Eigen::Index x = 0; x < nx; ++x) {
            const double xv = bf.nodes[static_cast<std::size_t>(x)];
            bf.coef(m, x) = weights[static_cast<std::size_t>(x)] / (2.0 * pi) *
                            std::exp(logPW[static_cast<std::size_t>(x)] - norm) / (xv - zm);
        }
    }

    // moments against e^{-conj(lambda_n) t} in closed form
    Eigen::MatrixXcd moments(nx, nm);
    for (Eigen::Index x = 0; x < nx; ++x)
        for (Eigen::Index n = 0; n < nm; ++n)
            moments(x, n) = interval_moment(I * bf.nodes[static_cast<std::size_t>(x)] -
                                                std::conj(bf.lambda[static_cast<std::size_t>(n)]),
                                            T);
    const Eigen::MatrixXcd B0 = bf.coef * moments;
    const Eigen::MatrixXcd Id = Eigen::MatrixXcd::Identity(nm, nm);
    bf.raw_residual = (B0 - Id).cwiseAbs().maxCoeff();

    const Eigen::MatrixXcd G = exponential_gram(bf.lambda, T);
    {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(G);
        const auto& sv = svd.singularValues();
        bf.gamma_condition = sv(0) / sv(sv.size() - 1);
    }
    // D G = I - B0
    const Eigen::FullPivLU<Eigen::MatrixXcd> lu(G.transpose());
    bf.correction = lu.solve((Id - B0).transpose()).transpose();
    bf.closed_residual = (B0 + bf.correction * G - Id).cwiseAbs().maxCoeff();

    // samples resolving the fastest exponential of the family
    double omega = 1.0;
    for (const auto& l : bf.lambda) omega = std::max(omega, std::abs(l.imag()));
    const double dt_target = 2.0 * pi / (omega * opt.samples_per_period);
    std::size_t count = static_cast<std::size_t>(std::ceil(T / dt_target)) + 1;
    if (count % 2 == 0) ++count;
    const double dt = T / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) bf.t.push_back(-0.5 * T + dt * static_cast<double>(i));
    const std::vector<double> sw = simpson_weights(count, dt);

    const auto ns = static_cast<Eigen::Index>(count);
    bf.theta.resize(nm, ns);
    const Eigen::Index chunk = 128;
    for (Eigen::Index s0 = 0; s0 < ns; s0 += chunk) {
        const Eigen::Index len = std::min(chunk, ns - s0);
        Eigen::MatrixXcd E(nx, len);
        for (Eigen::Index x = 0; x < nx; ++x)
            for (Eigen::Index k = 0; k < len; ++k)
                E(x, k) = std::exp(I * (bf.nodes[static_cast<std::size_t>(x)] * bf.t[static_cast<std::size_t>(s0 + k)]));
        Eigen::MatrixXcd Ex(nm, len);
        for (Eigen::Index n = 0; n < nm; ++n)
            for (Eigen::Index k = 0; k < len; ++k)
                Ex(n, k) = std::exp(-bf.lambda[static_cast<std::size_t>(n)] * bf.t[static_cast<std::size_t>(s0 + k)]);
        bf.theta.middleCols(s0, len) = bf.coef * E + bf.correction * Ex;
    }

    // biorthogonality by Simpson quadrature on the samples
    Eigen::MatrixXcd test(ns, nm);
    for (Eigen::Index k = 0; k < ns; ++k)
        for (Eigen::Index n = 0; n < nm; ++n)
            test(k, n) = sw[static_cast<std::size_t>(k)] *
                         std::exp(-std::conj(bf.lambda[static_cast<std::size_t>(n)]) * bf.t[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXcd B = bf.theta * test;
    bf.quad_residual = (B - Id).cwiseAbs().maxCoeff();
    bf.quad_diag_residual = (B.diagonal().array() - 1.0).abs().maxCoeff();

    // norms and the Gram of theta_m / rho_m
    Eigen::MatrixXcd scaled = bf.theta;
    for (Eigen::Index m = 0; m < nm; ++m) scaled.row(m) /= bf.rho[static_cast<std::size_t>(m)];
    const Eigen::VectorXd swv = Eigen::Map<const Eigen::VectorXd>(sw.data(), ns);
    const Eigen::MatrixXcd gram = scaled * swv.asDiagonal() * scaled.adjoint();
    bf.summation_constant = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(gram).eigenvalues().maxCoeff();
    double top = 0.0, bottom = 0.0;
    for (Eigen::Index m = 0; m < nm; ++m) {
        const double nrm = std::sqrt(std::abs(gram(m, m))) * bf.rho[static_cast<std::size_t>(m)];
        bf.norms.push_back(nrm);
        const double ratio = nrm / bf.rho[static_cast<std::size_t>(m)];
        bf.C_hat = std::max(bf.C_hat, ratio);
        const bool upper = 2 * std::abs(bf.modes[static_cast<std::size_t>(m)].n) > ms.N;
        (upper ? top : bottom) = std::max(upper ? top : bottom, ratio);
    }
    bf.norm_growth = bottom > 0.0 ? top / bottom : 0.0;

    if (!ms.critical) {
        double err = 0.0;
        for (Eigen::Index m = 0; m < nm; ++m) {
            const ModeIndex mi = bf.modes[static_cast<std::size_t>(m)];
            if (mi.j == 3) continue;
            const ModeIndex partner{-mi.n, mi.j == 2 ? 3 : 1};
            const auto p = static_cast<Eigen::Index>(ms.index(partner));
            const double scale = bf.theta.row(m).cwiseAbs().maxCoeff();
            err = std::max(err, (bf.theta.row(p) - bf.theta.row(m).conjugate()).cwiseAbs().maxCoeff() / scale);
        }
        bf.conjugation_error = err;
    }
    return bf;
}

// ---------------------------------------------------------------- lower summation

LowerSummation verify_lower_summation(const BiorthogonalFamily& bf, int trials, int modes_per_trial,
                                      std::uint64_t seed) {
    LowerSummation r;
    r.C_hat = bf.summation_constant;
    const std::size_t n = bf.modes.size();
    const Eigen::MatrixXcd G = exponential_gram(bf.lambda, bf.T);
    const double slack = 1e-6;

    auto margin = [&](const std::vector<std::size_t>& idx, const std::vector<cplx>& a) {
        double lhs = 0.0;
        cplx f2 = 0.0;
        for (std::size_t p = 0; p < idx.size(); ++p) {
            lhs += std::norm(a[p]) / (bf.rho[idx[p]] * bf.rho[idx[p]]);
            for (std::size_t q = 0; q < idx.size(); ++q)
                f2 += a[p] * std::conj(a[q]) * G(static_cast<Eigen::Index>(idx[p]), static_cast<Eigen::Index>(idx[q]));
        }
        return r.C_hat * f2.real() / lhs;
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, modes_per_trial)));
    r.min_margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<std::size_t> idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
        std::vector<cplx> a(k);
        for (auto& v : a) v = {gauss(rng), gauss(rng)};
        const double m = margin(idx, a);
        r.min_margin = std::min(r.min_margin, m);
        ++r.trials;
        r.passed += m >= 1.0 - slack;
    }

    r.single_mode_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) r.single_mode_margin = std::min(r.single_mode_margin, margin({i}, {1.0}));

    std::size_t pa = 0, pb = 1;
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(bf.lambda[i] - bf.lambda[j]) < dmin) dmin = std::abs(bf.lambda[i] - bf.lambda[j]), pa = i, pb = j;
    const auto ia = static_cast<Eigen::Index>(pa), ib = static_cast<Eigen::Index>(pb);
    const cplx alpha = G(ia, ib) / G(ib, ib).real();
    r.adversarial_margin = margin({pa, pb}, {1.0, -alpha});
    r.adversarial_pair = {bf.modes[pa], bf.modes[pb]};
    r.adversarial_smallest = r.adversarial_margin <= r.min_margin;
    r.pass = r.passed == r.trials && r.single_mode_margin >= 1.0 - slack && r.adversarial_margin >= 1.0 - slack;
    return r;
}

void write_theta_csv(const std::string& dir, const BiorthogonalFamily& bf) {
    ensure_directory(dir);
    {
        std::vector<std::string> header{"t"};
        for (const auto& m : bf.modes) {
            header.push_back("re_" + to_string(m));
            header.push_back("im_" + to_string(m));
        }
        CsvWriter w(join_path(dir, "theta.csv"), header);
        for (std::size_t k = 0; k < bf.t.size(); ++k) {
            std::vector<std::string> row{num(bf.t[k])};
            for (std::size_t m = 0; m < bf.modes.size(); ++m) {
                const cplx v = bf.theta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
                row.push_back(num(v.real()));
                row.push_back(num(v.imag()));
            }
            w.row(row);
        }
    }
    CsvWriter w(join_path(dir, "theta_norms.csv"), {"n", "j", "rho", "norm", "norm_over_rho"});
    for (std::size_t m = 0; m < bf.modes.size(); ++m)
        w.row({std::to_string(bf.modes[m].n), std::to_string(bf.modes[m].j), num(bf.rho[m]), num(bf.norms[m]),
               num(bf.norms[m] / bf.rho[m])});
    write_json(join_path(dir, "biorthogonal.json"), bf.manifest());
}

}  // namespace movctl
