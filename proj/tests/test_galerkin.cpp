#include <cmath>
#include <random>

#include <doctest.h>

#include "movctl/biorthogonal.hpp"
#include "movctl/galerkin.hpp"
#include "oracles.hpp"

using namespace movctl;

namespace {

const EigenvalueTable& table075() {
    static const EigenvalueTable t = build_eigenvalue_table(FractionalOrder(0.75), 400, EigenBackend::asymptotic);
    return t;
}

struct Controlled {
    MovingSpectrum ms;
    Interval w{-0.3, 0.3};
    double T;
    InitialData data;
    MomentSystem msys;
    ControlField u;

    Controlled(int N, double M)
        : ms(build_moving_spectrum(table075(), MemoryCoefficient(M), 1.0, N)),
          T(1.05 * horizon_threshold(1.0, ms.gamma)),
          data(InitialData::random(ms, 42)),
          msys(assemble_moments(data, ms)),
          u(synthesize_control(msys, ms, assemble_gram(ms, w, T), w, T)) {}
};

const Controlled& two() {
    static const Controlled c(2, 0.5);
    return c;
}

double state_distance(const GalerkinState& a, const GalerkinState& b) {
    double d = 0.0, s = 0.0;
    for (std::size_t p = 0; p < a.xi.size(); ++p) {
        d = std::max({d, std::abs(a.xi[p] - b.xi[p]), std::abs(a.xi_dot[p] - b.xi_dot[p]), std::abs(a.zeta[p] - b.zeta[p])});
        s = std::max({s, std::abs(b.xi[p]), std::abs(b.xi_dot[p]), std::abs(b.zeta[p])});
    }
    return d / s;
}

// (1/2) int_omega0 u(t, x) e^{-i kappa x} dx by quadrature of the evaluated control
cplx projected_forcing(const ControlField& u, double kappa, double t) {
    return 0.5 * oracle::integrate([&](double x) { return u.evaluate(t, x) * std::exp(cplx(0, -kappa * x)); },
                                   u.omega0.a, u.omega0.b, 2);
}

}  // namespace

TEST_SUITE("galerkin") {
    TEST_CASE("mode propagator: characteristic roots are the matrix eigenvalues") {
        for (double c : {1.0, -2.5, 0.0}) {
            const auto p = ModePropagator::make(-3, 4.2, -2.1, c, 0.5);
            CHECK(p.characteristic_residual <= 1e-10);
            const auto A = p.matrix();
            for (int j = 0; j < 3; ++j) {
                double res = 0.0, lres = 0.0;
                for (int r = 0; r < 3; ++r) {
                    cplxl acc = -p.nu[j] * p.right[j][r], lacc = -p.nu[j] * p.left[j][r];
                    for (int k = 0; k < 3; ++k) {
                        acc += A[r][k] * p.right[j][k];
                        lacc += p.left[j][k] * A[k][r];
                    }
                    res = std::max(res, static_cast<double>(std::abs(acc)));
                    lres = std::max(lres, static_cast<double>(std::abs(lacc)));
                }
                CHECK(res <= 1e-9 * static_cast<double>(std::abs(p.nu[j]) + 1));
                CHECK(lres <= 1e-9 * static_cast<double>(std::abs(p.nu[j]) + 1));
                CHECK(std::abs(p.pairing[j]) > 0.0L);
            }
        }
    }

    TEST_CASE("zero state stays zero") {
        const auto& s = two();
        GalerkinModel model(s.ms, s.w);
        const auto r = model.run_to_T(InitialData::zero(2), nullptr, s.T);
        for (std::size_t p = 0; p < r.state.xi.size(); ++p) {
            CHECK(r.state.xi[p] == cplx(0.0));
            CHECK(r.state.zeta[p] == cplx(0.0));
        }
    }

    TEST_CASE("free evolution matches the ODE oracle in both frames") {
        const auto& s = two();
        GalerkinModel model(s.ms, s.w);
        for (Frame f : {Frame::moving, Frame::fixed}) {
            const auto st0 = model.initial_state(s.data, f);
            const auto st1 = model.step_exact(st0, nullptr, 4.0);
            for (std::size_t p = 0; p < st0.xi.size(); ++p) {
                const int n = s.data.mode_number(p);
                oracle::ModeProblem prob{s.ms.rho(n), s.ms.kappa(n), f == Frame::moving ? s.ms.c : 0.0, s.ms.M, {}};
                const auto ref = oracle::integrate_mode(prob, {st0.xi[p], st0.xi_dot[p], st0.zeta[p]}, 0.0, 4.0);
                const double scale = std::abs(ref[0]) + std::abs(ref[1]) + std::abs(ref[2]);
                CAPTURE(n);
                CHECK(std::abs(st1.xi[p] - ref[0]) <= 1e-8 * scale);
                CHECK(std::abs(st1.xi_dot[p] - ref[1]) <= 1e-8 * scale);
                CHECK(std::abs(st1.zeta[p] - ref[2]) <= 1e-8 * scale);
            }
        }
    }

    TEST_CASE("forced evolution matches the ODE oracle") {
        const auto& s = two();
        GalerkinModel model(s.ms, s.w);
        const double t1 = 2.5;
        const auto st0 = model.initial_state(s.data);
        const auto st1 = model.step_exact(st0, &s.u, t1);
        for (std::size_t p = 0; p < st0.xi.size(); ++p) {
            const int n = s.data.mode_number(p);
            const double k = s.ms.kappa(n);
            oracle::ModeProblem prob{s.ms.rho(n), k, s.ms.c, s.ms.M, [&](double t) { return projected_forcing(s.u, k, t); }};
            const auto ref = oracle::integrate_mode(prob, {st0.xi[p], st0.xi_dot[p], st0.zeta[p]}, 0.0, t1);
            const double scale = std::abs(ref[0]) + std::abs(ref[1]) + std::abs(ref[2]);
            CAPTURE(n);
            CHECK(std::abs(st1.xi[p] - ref[0]) <= 1e-8 * scale);
            CHECK(std::abs(st1.xi_dot[p] - ref[1]) <= 1e-8 * scale);
            CHECK(std::abs(st1.zeta[p] - ref[2]) <= 1e-8 * scale);
        }
    }

    TEST_CASE("weak memory decouples into a transported wave") {
        const auto ms = build_moving_spectrum(table075(), MemoryCoefficient(1e-9), 1.0, 2);
        GalerkinModel model(ms, {-0.3, 0.3});
        const auto data = InitialData::random(ms, 3);
        const double t = 3.0;
        const auto st = model.step_exact(model.initial_state(data), nullptr, t);
        for (std::size_t p = 0; p < st.xi.size(); ++p) {
            const int n = data.mode_number(p);
            const double w = std::sqrt(ms.rho(n)), ck = ms.c * ms.kappa(n);
            // y'' + rho y = 0 in the fixed frame, shifted by the transport phase
            const cplx y = data.y0[p] * std::cos(w * t) + data.y1[p] * std::sin(w * t) / w;
            const cplx expected = y * std::exp(cplx(0, -ck * t));
            CHECK(std::abs(st.xi[p] - expected) <= 1e-6 * (std::abs(data.y0[p]) + std::abs(data.y1[p]) / w));
        }
    }

    TEST_CASE("memory variable is the transported integral of rho xi") {
        const auto& s = two();
        GalerkinModel model(s.ms, s.w);
        const auto st0 = model.initial_state(s.data);
        const double t1 = 3.0;
        const auto st1 = model.step_exact(st0, &s.u, t1);
        std::vector<std::vector<cplx>> xi_at;
        const auto rule = oracle::gauss_rule(0.0, t1, 6);
        for (double t : rule.x) xi_at.push_back(model.step_exact(st0, &s.u, t).xi);
        for (std::size_t p = 0; p < st0.xi.size(); ++p) {
            const int n = s.data.mode_number(p);
            const double ck = s.ms.c * s.ms.kappa(n);
            cplx acc = 0.0;
            for (std::size_t k = 0; k < rule.x.size(); ++k)
                acc += rule.w[k] * std::exp(cplx(0, -ck * (t1 - rule.x[k]))) * s.ms.rho(n) * xi_at[k][p];
            CHECK(std::abs(st1.zeta[p] - acc) <= 1e-8 * std::max(1.0, std::abs(acc)));
        }
    }

    TEST_CASE("exact steps are reversible and compose") {
        const auto& s = two();
        GalerkinModel model(s.ms, s.w);
        const auto st0 = model.initial_state(s.data);
        const auto fwd = model.step_exact(st0, &s.u, 7.0);
        const auto back = model.step_exact(fwd, &s.u, -7.0);
        CHECK(state_distance(back, st0) <= 1e-9);
        const auto two_steps = model.step_exact(model.step_exact(st0, &s.u, 3.0), &s.u, 4.0);
        CHECK(state_distance(two_steps, fwd) <= 1e-9);
    }

    TEST_CASE("frame mapping: identity at t = 0, round trip, covariance") {
        const auto& s = two();
        GalerkinModel model(s.ms, s.w);
        const auto mv = model.initial_state(s.data, Frame::moving);
        const auto fx = model.initial_state(s.data, Frame::fixed);
        CHECK(state_distance(map_frames(mv, s.ms, Frame::fixed), fx) <= 1e-15);
        const auto later = model.step_exact(mv, &s.u, 5.0);
        CHECK(state_distance(map_frames(map_frames(later, s.ms, Frame::fixed), s.ms, Frame::moving), later) <= 1e-14);
        const auto via_fixed = model.step_exact(fx, &s.u, 5.0);
        CHECK(state_distance(map_frames(later, s.ms, Frame::fixed), via_fixed) <= 1e-7);
        CHECK(to_string(Frame::fixed) == "fixed");
    }

    TEST_CASE("plane-wave gram on the reference interval") {
        const auto& s = two();
        const auto pw = plane_wave_gram(s.ms);
        CHECK(pw.hermitian_error <= 1e-15);
        for (Eigen::Index i = 0; i < pw.G.rows(); ++i) CHECK(pw.G(i, i).real() == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(pw.deviation > 0.0);
        CHECK(pw.condition >= 1.0);
    }

    TEST_CASE("controlled run reaches rest at the horizon") {
        const Controlled c(8, 0.5);
        GalerkinModel model(c.ms, c.w);
        const auto r = model.run_to_T(c.data, &c.u, c.T, 3);
        CHECK(r.rel_xi <= 1e-6);
        CHECK(r.rel_xi_dot <= 1e-6);
        CHECK(r.rel_zeta <= 1e-6);
        CHECK(r.pass);
        const auto free = model.run_to_T(c.data, nullptr, c.T);
        CHECK_FALSE(free.pass);
    }

    TEST_CASE("duality: single adjoint mode reduces to the moment") {
        const auto& s = two();
        for (std::size_t q : {std::size_t{0}, std::size_t{4}, std::size_t{9}}) {
            std::vector<cplx> b(s.ms.size(), 0.0);
            b[q] = 1.0;
            const auto d = verify_duality(s.data, s.u, s.ms, b, s.T);
            const cplx m{static_cast<double>(s.msys.rhs[q].real()), static_cast<double>(s.msys.rhs[q].imag())};
            const cplx expected = std::conj(std::exp(s.ms.lambda[q] * s.T)) * m;
            CHECK(std::abs(d.rhs - expected) <= 1e-10 * std::abs(expected));
            CHECK(d.relative <= 1e-5);
        }
    }

    TEST_CASE("duality: random adjoints and the zero case") {
        const auto& s = two();
        std::mt19937_64 rng(1);
        std::normal_distribution<double> g;
        std::vector<std::vector<cplx>> bs(10, std::vector<cplx>(s.ms.size()));
        for (auto& b : bs)
            for (auto& v : b) v = {g(rng), g(rng)};
        for (const auto& d : verify_duality(s.data, s.u, s.ms, bs, s.T)) CHECK(d.relative <= 1e-5);
        const auto zero = InitialData::zero(2);
        const auto u0 = synthesize_control(assemble_moments(zero, s.ms), s.ms, assemble_gram(s.ms, s.w, s.T), s.w, s.T);
        const auto d0 = verify_duality(zero, u0, s.ms, bs[0], s.T);
        CHECK(std::abs(d0.lhs) == 0.0);
        CHECK(std::abs(d0.rhs) == 0.0);
    }

    TEST_CASE("control frozen in the original frame loses null control as N grows") {
        const double T = 1.05 * horizon_threshold(1.0, table075().gap_gamma);
        const auto small = fixed_support_diagnostic(table075(), MemoryCoefficient(0.5), T, {-0.3, 0.3}, 4, 42);
        CHECK(small.rel_xi <= 1e-6);
        const auto large = fixed_support_diagnostic(table075(), MemoryCoefficient(0.5), T, {-0.3, 0.3}, 16, 42);
        CHECK(large.rel_xi > 1e-6);
    }
}
