#include "movctl/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

namespace movctl {

namespace {

const cplxl IL(0.0L, 1.0L);
constexpr cplx I{0.0, 1.0};

cplxl to_l(cplx z) { return {static_cast<long double>(z.real()), static_cast<long double>(z.imag())}; }
cplx to_d(cplxl z) { return {static_cast<double>(z.real()), static_cast<double>(z.imag())}; }

// (1 - e^{-z h}) / z, h may be negative
cplxl decay_step(cplxl z, long double h) {
    const cplxl u = z * h;
    if (std::abs(u) < 0.1L) {
        cplxl term = h, acc = 0.0L;
        for (int k = 1; k <= 12; ++k) {
            acc += term;
            term *= -u / static_cast<long double>(k + 1);
        }
        return acc;
    }
    return (1.0L - std::exp(-u)) / z;
}

// int_{t0}^{t0+h} e^{nu (t0 + h - tau)} e^{-Lam tau} dtau with the forcing switched off outside [0, T]
cplxl forcing_weight(cplxl nu, cplxl Lam, long double t0, long double h, long double T) {
    const long double t1 = t0 + h;
    const long double lo = std::max(std::min(t0, t1), 0.0L), hi = std::min(std::max(t0, t1), T);
    if (!(hi > lo)) return 0.0L;
    const cplxl w = std::exp(nu * (t1 - lo) - Lam * lo) * decay_step(nu + Lam, hi - lo);
    return h > 0.0L ? w : -w;
}

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

std::string to_string(Frame f) { return f == Frame::moving ? "moving" : "fixed"; }
std::string to_string(Projection p) { return p == Projection::orthogonal ? "orthogonal" : "gram"; }

// ---------------------------------------------------------------- propagator

ModePropagator ModePropagator::make(int n, double rho, double kappa, double c, double M) {
    ModePropagator p;
    p.n = n;
    p.rho = rho;
    p.kappa = kappa;
    p.c = c;
    p.M = M;
    const SpectralTriple tr = solve_cubic(rho, MemoryCoefficient(M), std::abs(n));
    const cplxl ick = IL * static_cast<long double>(c * kappa);
    const long double r = rho;
    double worst = 0.0;
    for (int j = 0; j < 3; ++j) {
        cplxl mu = to_l(tr.mu(j + 1));
        // polish the root in extended precision
        for (int it = 0; it < 3; ++it) mu -= (mu * mu * mu + r * mu - M * r) / (3.0L * mu * mu + r);
        p.mu[j] = mu;
        p.nu[j] = mu - ick;
        p.right[j] = {1.0L, p.nu[j], r / mu};
        p.left[j] = {p.nu[j] + 2.0L * ick, 1.0L, static_cast<long double>(M) / mu};
        p.pairing[j] = p.left[j][0] * p.right[j][0] + p.left[j][1] * p.right[j][1] + p.left[j][2] * p.right[j][2];
        const cplxl m = p.nu[j] + ick;
        worst = std::max(worst, static_cast<double>(std::abs(m * m * m + r * m - M * r)) /
                                    cubic_residual_scale(rho, M));
    }
    p.characteristic_residual = worst;
    return p;
}

std::array<std::array<cplxl, 3>, 3> ModePropagator::matrix() const {
    const long double ck = c * kappa;
    return {{{0.0L, 1.0L, 0.0L},
             {ck * ck - static_cast<long double>(rho), -2.0L * IL * ck, static_cast<long double>(M)},
             {static_cast<long double>(rho), 0.0L, -IL * ck}}};
}

// ---------------------------------------------------------------- plane-wave Gram

PlaneWaveGram plane_wave_gram(const MovingSpectrum& ms) {
    const Interval full{-1.0, 1.0};
    const auto m = static_cast<Eigen::Index>(2 * ms.N);
    PlaneWaveGram g;
    g.G.resize(m, m);
    std::vector<double> kappa;
    for (Eigen::Index p = 0; p < m; ++p) {
        const int n = static_cast<int>(p) < ms.N ? static_cast<int>(p) - ms.N : static_cast<int>(p) - ms.N + 1;
        kappa.push_back(ms.kappa(n));
    }
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c)
            g.G(r, c) = to_d(interval_phase_integral(kappa[c] - kappa[r], full));
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) {
            g.deviation = std::max(g.deviation, std::abs(g.G(r, c) - (r == c ? 2.0 : 0.0)));
            g.hermitian_error = std::max(g.hermitian_error, std::abs(g.G(r, c) - std::conj(g.G(c, r))));
            if (c == r + 1 && kappa[r] * kappa[c] > 0.0) g.first_offdiag = std::max(g.first_offdiag, std::abs(g.G(r, c)));
        }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(g.G, Eigen::EigenvaluesOnly).eigenvalues();
    g.condition = ev(0) > 0.0 ? ev(m - 1) / ev(0) : std::numeric_limits<double>::infinity();
    return g;
}

// ---------------------------------------------------------------- model

json TerminalReport::to_json() const {
    json j;
    j["xi_norm"] = xi_norm;
    j["xi_dot_norm"] = xi_dot_norm;
    j["zeta_norm"] = zeta_norm;
    j["data_norm"] = data_norm;
    j["rel_xi"] = rel_xi;
    j["rel_xi_dot"] = rel_xi_dot;
    j["rel_zeta"] = rel_zeta;
    j["tol"] = tol;
    j["pass"] = pass;
    return j;
}

GalerkinModel::GalerkinModel(const MovingSpectrum& ms, const Interval& omega0, Projection proj)
    : ms_(&ms), omega0_(omega0), proj_(proj) {
    check_interval(omega0);
    const int N = ms.N;
    for (int p = 0; p < 2 * N; ++p) {
        const int n = p < N ? p - N : p - N + 1;
        moving_.push_back(ModePropagator::make(n, ms.rho(n), ms.kappa(n), ms.c, ms.M));
        fixed_.push_back(ModePropagator::make(n, ms.rho(n), ms.kappa(n), 0.0, ms.M));
    }
    const auto m = static_cast<Eigen::Index>(2 * N);
    if (proj == Projection::orthogonal) {
        P_ = 0.5L * Eigen::Matrix<cplxl, Eigen::Dynamic, Eigen::Dynamic>::Identity(m, m);
        gram_condition_ = 1.0;
        return;
    }
    const PlaneWaveGram g = plane_wave_gram(ms);
    gram_condition_ = g.condition;
    using MX = Eigen::Matrix<cplxl, Eigen::Dynamic, Eigen::Dynamic>;
    MX G(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) G(r, c) = to_l(g.G(r, c));
    if (g.condition <= 1e12) {
        const Eigen::PartialPivLU<MX> lu(G);
        const MX Id = MX::Identity(m, m);
        P_ = lu.solve(Id);
        for (int it = 0; it < 3; ++it) P_ += lu.solve(Id - G * P_);
        return;
    }
    // numerically singular: minimum-norm least-squares projection with a relative cutoff
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g.G);
    const double cut = 1e-12 * es.eigenvalues()(m - 1);
    P_ = MX::Zero(m, m);
    int rank = 0;
    for (Eigen::Index k = 0; k < m; ++k) {
        if (es.eigenvalues()(k) <= cut) continue;
        ++rank;
        const long double inv = 1.0L / es.eigenvalues()(k);
        for (Eigen::Index r = 0; r < m; ++r)
            for (Eigen::Index c = 0; c < m; ++c)
                P_(r, c) += inv * to_l(es.eigenvectors()(r, k)) * std::conj(to_l(es.eigenvectors()(c, k)));
    }
    warning_ = fmt::format("plane-wave Gram condition {:.3g}; projecting with a rank-{} pseudo-inverse", g.condition, rank);
}

GalerkinState GalerkinModel::initial_state(const InitialData& data, Frame f) const {
    if (data.N != ms_->N) throw std::invalid_argument("initial data and model truncations differ");
    GalerkinState st;
    st.frame = f;
    st.N = data.N;
    st.xi = data.y0;
    st.xi_dot = data.y1;
    st.zeta.assign(data.y0.size(), 0.0);
    if (f == Frame::moving)
        for (std::size_t p = 0; p < st.xi.size(); ++p)
            st.xi_dot[p] -= I * (ms_->c * moving_[p].kappa) * data.y0[p];
    return st;
}

GalerkinState GalerkinModel::step_exact(const GalerkinState& state, const ControlField* control, double dt) const {
    if (state.N != ms_->N) throw std::invalid_argument("state and model truncations differ");
    const int N = ms_->N;
    const auto np = static_cast<std::size_t>(2 * N);
    const long double t0 = state.t, h = dt;
    GalerkinState out = state;
    out.t = state.t + dt;

    // forcing on mode n: sum over (m, q) of P_nm a_q S(kappa_q - kappa_m) e^{-Lambda t},
    // Lambda = lambda_q - i c (kappa_m - kappa_n) in the moving frame, minus i c kappa_n in the fixed frame
    std::vector<cplxl> smq;  // a_q S(kappa_q - kappa_m), row-major (m, q)
    std::size_t nq = 0;
    if (control) {
        if (control->modes.size() != ms_->size()) throw std::invalid_argument("control and model differ");
        nq = control->modes.size();
        smq.resize(np * nq);
        for (std::size_t m = 0; m < np; ++m)
            for (std::size_t q = 0; q < nq; ++q)
                smq[m * nq + q] = control->a(static_cast<Eigen::Index>(q)) *
                                  interval_phase_integral(static_cast<long double>(control->kappa[q]) - moving_[m].kappa, omega0_);
    }
    const long double c = ms_->c;

    for (std::size_t p = 0; p < np; ++p) {
        const ModePropagator& prop = state.frame == Frame::moving ? moving_[p] : fixed_[p];
        const std::array<cplxl, 3> X{to_l(state.xi[p]), to_l(state.xi_dot[p]), to_l(state.zeta[p])};
        std::array<cplxl, 3> Y{0.0L, 0.0L, 0.0L};
        for (int j = 0; j < 3; ++j) {
            const cplxl e = std::exp(prop.nu[j] * h);
            cplxl amp = e * (prop.left[j][0] * X[0] + prop.left[j][1] * X[1] + prop.left[j][2] * X[2]);
            if (control) {
                for (std::size_t m = 0; m < np; ++m) {
                    const cplxl P = P_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));
                    if (P == 0.0L) continue;
                    cplxl shift = -IL * c * static_cast<long double>(moving_[m].kappa - moving_[p].kappa);
                    if (state.frame == Frame::fixed) shift -= IL * c * static_cast<long double>(moving_[p].kappa);
                    for (std::size_t q = 0; q < nq; ++q) {
                        const cplxl Lam = to_l(control->lambda[q]) + shift;
                        amp += P * smq[m * nq + q] * forcing_weight(prop.nu[j], Lam, t0, h, control->T);
                    }
                }
            }
            amp /= prop.pairing[j];
            for (int k = 0; k < 3; ++k) Y[k] += amp * prop.right[j][k];
        }
        out.xi[p] = to_d(Y[0]);
        out.xi_dot[p] = to_d(Y[1]);
        out.zeta[p] = to_d(Y[2]);
    }
    return out;
}

TerminalReport GalerkinModel::measure(const GalerkinState& st, const InitialData& data, double tol) const {
    TerminalReport r;
    r.tol = tol;
    r.state = st;
    double a = 0.0, b = 0.0, z = 0.0;
    for (std::size_t p = 0; p < st.xi.size(); ++p) {
        const double rho = moving_[p].rho;
        a += std::pow(rho, 6) * std::norm(st.xi[p]);
        b += std::pow(rho, 4) * std::norm(st.xi_dot[p]);
        z += std::pow(rho, 2) * std::norm(st.zeta[p]);
    }
    r.xi_norm = std::sqrt(a);
    r.xi_dot_norm = std::sqrt(b);
    r.zeta_norm = std::sqrt(z);
    r.data_norm = data.weighted_norm(*ms_);
    const double d = r.data_norm > 0.0 ? r.data_norm : 1.0;
    r.rel_xi = r.xi_norm / d;
    r.rel_xi_dot = r.xi_dot_norm / d;
    r.rel_zeta = r.zeta_norm / d;
    r.pass = r.rel_xi <= tol && r.rel_xi_dot <= tol && r.rel_zeta <= tol;
    return r;
}

TerminalReport GalerkinModel::run_to_T(const InitialData& data, const ControlField* control, double T, int steps,
                                       Frame f, double tol) const {
    if (steps < 1) throw std::invalid_argument("steps must be positive");
    GalerkinState st = initial_state(data, f);
    if (f == Frame::fixed) st = map_frames(initial_state(data, Frame::moving), *ms_, Frame::fixed);
    for (int k = 0; k < steps; ++k) st = step_exact(st, control, T / steps);
    st.t = T;
    if (f == Frame::fixed) st = map_frames(st, *ms_, Frame::moving);
    return measure(st, data, tol);
}

GalerkinState map_frames(const GalerkinState& st, const MovingSpectrum& ms, Frame target) {
    if (st.frame == target) return st;
    GalerkinState out = st;
    out.frame = target;
    for (std::size_t p = 0; p < st.xi.size(); ++p) {
        const int n = static_cast<int>(p) < st.N ? static_cast<int>(p) - st.N : static_cast<int>(p) - st.N + 1;
        const double ck = ms.c * ms.kappa(n);
        if (target == Frame::fixed) {
            const cplx ph = std::exp(I * (ck * st.t));
            out.xi[p] = st.xi[p] * ph;
            out.xi_dot[p] = (st.xi_dot[p] + I * ck * st.xi[p]) * ph;
            out.zeta[p] = st.zeta[p] * ph;
        } else {
            const cplx ph = std::exp(-I * (ck * st.t));
            out.xi[p] = st.xi[p] * ph;
            out.xi_dot[p] = st.xi_dot[p] * ph - I * ck * out.xi[p];
            out.zeta[p] = st.zeta[p] * ph;
        }
    }
    return out;
}

// ---------------------------------------------------------------- duality

std::vector<DualityResult> verify_duality(const InitialData& data, const ControlField& u, const MovingSpectrum& ms,
                                          const std::vector<std::vector<cplx>>& adjoints, double T) {
    const auto nm = static_cast<Eigen::Index>(ms.size());

    // the quadrature of u conj(phi) factors into time and space sums over products of exponentials:
    // lhs = sum_{q,r} a_q conj(b_r) At(q,r) Ax(q,r)
    double omega = 1.0, kmax = 1.0;
    for (std::size_t q = 0; q < ms.size(); ++q) {
        omega = std::max(omega, std::abs(ms.lambda[q].imag()));
        kmax = std::max(kmax, std::abs(ms.kappa(ms.modes[q].n)));
    }
    std::vector<double> tx, tw, xx, xw;
    gauss_panels(0.0, u.T, 1.0 / omega, tx, tw);
    gauss_panels(u.omega0.a, u.omega0.b, 1.0 / kmax, xx, xw);
    const auto nt = static_cast<Eigen::Index>(tx.size()), nx = static_cast<Eigen::Index>(xx.size());
    Eigen::MatrixXcd Eu(nt, nm), Ep(nt, nm), X(nx, nm);
    for (Eigen::Index k = 0; k < nt; ++k)
        for (Eigen::Index q = 0; q < nm; ++q) {
            const double t = tx[static_cast<std::size_t>(k)];
            Eu(k, q) = std::exp(-u.lambda[static_cast<std::size_t>(q)] * t);
            Ep(k, q) = std::exp(ms.lambda[static_cast<std::size_t>(q)] * (T - t));
        }
    for (Eigen::Index k = 0; k < nx; ++k)
        for (Eigen::Index q = 0; q < nm; ++q)
            X(k, q) = std::exp(I * (ms.kappa(ms.modes[static_cast<std::size_t>(q)].n) * xx[static_cast<std::size_t>(k)]));
    const Eigen::VectorXd wt = Eigen::Map<const Eigen::VectorXd>(tw.data(), nt);
    const Eigen::VectorXd wx = Eigen::Map<const Eigen::VectorXd>(xw.data(), nx);
    const Eigen::MatrixXcd At = Eu.transpose() * wt.asDiagonal() * Ep.conjugate();
    const Eigen::MatrixXcd Ax = X.transpose() * wx.asDiagonal() * X.conjugate();
    Eigen::VectorXcd a(nm);
    for (Eigen::Index q = 0; q < nm; ++q) a(q) = to_d(u.a(q));
    const Eigen::RowVectorXcd kernel = a.transpose() * At.cwiseProduct(Ax);

    std::vector<DualityResult> out;
    for (const auto& adjoint : adjoints) {
        if (adjoint.size() != ms.size()) throw std::invalid_argument("adjoint data must cover every mode");
        DualityResult res;
        // right side: 2 sum_n [y0_n conj(phi_t(0)_n) - (y1_n + i c kappa_n y0_n) conj(phi(0)_n)]
        std::vector<cplx> phi0(data.y0.size(), 0.0), phit0(data.y0.size(), 0.0);
        for (std::size_t q = 0; q < ms.size(); ++q) {
            const std::size_t p = data.pos(ms.modes[q].n);
            const cplx e = adjoint[q] * std::exp(ms.lambda[q] * T);
            phi0[p] += e;
            phit0[p] -= ms.lambda[q] * e;
        }
        for (std::size_t p = 0; p < phi0.size(); ++p) {
            const int n = data.mode_number(p);
            res.rhs += 2.0 * (data.y0[p] * std::conj(phit0[p]) -
                              (data.y1[p] + I * (ms.c * ms.kappa(n)) * data.y0[p]) * std::conj(phi0[p]));
        }
        for (Eigen::Index r = 0; r < nm; ++r) res.lhs += kernel(r) * std::conj(adjoint[static_cast<std::size_t>(r)]);
        const double scale = std::max({std::abs(res.lhs), std::abs(res.rhs), 1e-300});
        res.relative = std::abs(res.lhs - res.rhs) / scale;
        out.push_back(res);
    }
    return out;
}

DualityResult verify_duality(const InitialData& data, const ControlField& u, const MovingSpectrum& ms,
                             const std::vector<cplx>& adjoint, double T) {
    return verify_duality(data, u, ms, std::vector<std::vector<cplx>>{adjoint}, T).front();
}

// ---------------------------------------------------------------- trajectory

std::vector<TrajectoryPoint> trajectory(const GalerkinModel& model, const InitialData& data,
                                        const ControlField* control, double T, int samples) {
    if (samples < 2) throw std::invalid_argument("need at least two samples");
    std::vector<TrajectoryPoint> out;
    GalerkinState st = model.initial_state(data);
    const double dt = T / (samples - 1);
    for (int k = 0; k < samples; ++k) {
        if (k > 0) st = model.step_exact(st, control, dt);
        const TerminalReport r = model.measure(st, data, 0.0);
        double e = 0.0;
        for (std::size_t p = 0; p < st.xi.size(); ++p) {
            const double rho = model.propagator(p, Frame::moving).rho;
            e += rho * rho * std::norm(st.xi[p]) + std::norm(st.xi_dot[p]);
        }
        out.push_back({st.t, std::sqrt(e), r.xi_norm, r.xi_dot_norm, r.zeta_norm});
    }
    return out;
}

double energy_growth_rate(const std::vector<TrajectoryPoint>& traj) {
    double run = 0.0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& p : traj) {
        run = std::max(run, p.energy);
        if (!(run > 0.0)) continue;
        const double y = std::log(run);
        sx += p.t, sy += y, sxx += p.t * p.t, sxy += p.t * y, ++n;
    }
    if (n < 2) return 0.0;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryPoint>& traj) {
    CsvWriter w(path, {"t", "energy", "xi_norm", "xi_dot_norm", "zeta_norm"});
    for (const auto& p : traj)
        w.row({num(p.t), num(p.energy), num(p.xi_norm), num(p.xi_dot_norm), num(p.zeta_norm)});
}

// ---------------------------------------------------------------- fixed support

FixedSupportPoint fixed_support_diagnostic(const EigenvalueTable& table, MemoryCoefficient M, double T,
                                           const Interval& omega0, int N, std::uint64_t seed) {
    const MovingSpectrum ms = build_static_spectrum(table, M, N);
    const InitialData data = InitialData::random(ms, seed);
    const MomentSystem msys = assemble_moments(data, ms);
    const GramReport gram = assemble_gram(ms, omega0, T);
    const ControlField u = synthesize_control(msys, ms, gram, omega0, T);
    const GalerkinModel model(ms, omega0);
    const TerminalReport r = model.run_to_T(data, &u, T);
    FixedSupportPoint pt;
    pt.N = N;
    pt.control_norm = u.norm;
    pt.cond_jacobi = u.cond_jacobi;
    pt.fallback = u.fallback;
    pt.moment_residual = u.relative_residual;
    pt.rel_xi = r.rel_xi;
    pt.rel_xi_dot = r.rel_xi_dot;
    pt.rel_zeta = r.rel_zeta;
    return pt;
}

}  // namespace movctl
