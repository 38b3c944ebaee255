#include <cmath>
#include <limits>

#include <doctest.h>

#include "movctl/biorthogonal.hpp"
#include "movctl/control.hpp"
#include "oracles.hpp"

using namespace movctl;

namespace {

struct Setup {
    EigenvalueTable table = build_eigenvalue_table(FractionalOrder(0.75), 400, EigenBackend::asymptotic);
    MovingSpectrum ms;
    Interval w{-0.3, 0.3};
    double T = 0.0;
    GramReport gram;

    explicit Setup(int N) : ms(build_moving_spectrum(table, MemoryCoefficient(0.5), 1.0, N)) {
        T = 1.05 * horizon_threshold(1.0, ms.gamma);
        gram = assemble_gram(ms, w, T);
    }
};

const Setup& small() {
    static const Setup s(2);
    return s;
}

const Setup& medium() {
    static const Setup s(4);
    return s;
}

cplx to_d(cplxl z) { return {static_cast<double>(z.real()), static_cast<double>(z.imag())}; }
cplxl to_l(cplx z) { return {z.real(), z.imag()}; }

}  // namespace

TEST_SUITE("control") {
    TEST_CASE("phase and decay integrals against quadrature") {
        const Interval w{-0.3, 0.5};
        for (double d : {0.0, 1e-9, 0.7, -12.0}) {
            const cplx q = oracle::integrate([&](double x) { return std::exp(cplx(0, d * x)); }, w.a, w.b, 4);
            CHECK(std::abs(to_d(interval_phase_integral(d, w)) - q) <= 1e-13);
        }
        for (cplx z : {cplx(0, 0), cplx(1e-10, 0), cplx(0.4, -3.0), cplx(-0.25, 7.0)}) {
            const double T = 9.0;
            const cplx q = oracle::integrate([&](double t) { return std::exp(-z * t); }, 0.0, T, 16);
            CHECK(std::abs(to_d(decay_integral(cplxl(z.real(), z.imag()), T)) - q) <= 1e-12 * std::max(1.0, std::abs(q)));
        }
    }

    TEST_CASE("interval validation") {
        CHECK_THROWS(check_interval({0.3, -0.3}));
        CHECK_THROWS(check_interval({-0.3, std::numeric_limits<double>::infinity()}));
        CHECK_NOTHROW(check_interval({-0.3, 0.3}));
    }

    TEST_CASE("moment right-hand side for single-mode data") {
        const auto& s = small();
        const auto data = InitialData::single_mode(s.ms.N, -1, 1.0, 0.0);
        const auto m = assemble_moments(data, s.ms);
        for (std::size_t q = 0; q < s.ms.size(); ++q) {
            const auto mode = s.ms.modes[q];
            const cplx expected = mode.n == -1 ? -2.0 * std::conj(s.ms.mu(mode.n, mode.j)) : cplx(0.0);
            CHECK(std::abs(to_d(m.rhs[q]) - expected) <= 1e-15);
        }
        const auto d2 = InitialData::single_mode(s.ms.N, 2, 0.0, cplx(0, 3));
        const auto m2 = assemble_moments(d2, s.ms);
        CHECK(std::abs(to_d(m2.rhs[s.ms.index({2, 3})]) - cplx(0, -6)) <= 1e-15);
    }

    TEST_CASE("gram entries: closed-form diagonal, quadrature, hermitian") {
        const auto& s = medium();
        const auto& G = s.gram.G;
        CHECK(s.gram.hermitian_error <= 1e-15);
        for (std::size_t q = 0; q < s.ms.size(); ++q) {
            const double re = s.ms.lambda[q].real();
            const double diag = s.w.length() * (-std::expm1(-2 * re * s.T)) / (2 * re);
            CHECK(static_cast<double>(G(q, q).real()) == doctest::Approx(diag).epsilon(1e-13));
        }
        for (auto [q, r] : {std::pair<std::size_t, std::size_t>{0, 5}, {3, 17}, {11, 12}}) {
            const double dk = s.ms.kappa(s.ms.modes[r].n) - s.ms.kappa(s.ms.modes[q].n);
            const cplx z = std::conj(s.ms.lambda[q]) + s.ms.lambda[r];
            const cplx sx = oracle::integrate([&](double x) { return std::exp(cplx(0, dk * x)); }, s.w.a, s.w.b, 8);
            const cplx st = oracle::integrate([&](double t) { return std::exp(-z * t); }, 0.0, s.T, 400);
            CHECK(std::abs(to_d(G(q, r)) - sx * st) <= 1e-12 * std::abs(sx * st) + 1e-15);
        }
        CHECK(s.gram.min_eig_rel > 0.0);
    }

    TEST_CASE("full spatial domain: space factor 2 sin(d)/d") {
        const auto& s = small();
        const Interval full{-1.0, 1.0};
        const auto g = assemble_gram(s.ms, full, s.T);
        for (std::size_t q = 0; q < s.ms.size(); ++q)
            for (std::size_t r = 0; r < s.ms.size(); ++r) {
                const double d = s.ms.kappa(s.ms.modes[r].n) - s.ms.kappa(s.ms.modes[q].n);
                const double space = d == 0.0 ? 2.0 : 2.0 * std::sin(d) / d;
                const cplx time = to_d(decay_integral(to_l(std::conj(s.ms.lambda[q]) + s.ms.lambda[r]), s.T));
                CHECK(std::abs(to_d(g.G(q, r)) - space * time) <= 1e-12 * std::abs(time));
            }
    }

    TEST_CASE("zero data gives the zero control") {
        const auto& s = small();
        const auto data = InitialData::zero(s.ms.N);
        const auto u = synthesize_control(assemble_moments(data, s.ms), s.ms, s.gram, s.w, s.T);
        CHECK(u.norm == 0.0);
        CHECK(u.residual == 0.0);
        CHECK(std::abs(u.evaluate(0.3 * s.T, 0.1)) == 0.0);
    }

    TEST_CASE("control is linear in the data and supported on the window") {
        const auto& s = medium();
        const auto data = InitialData::random(s.ms, 5);
        const auto u1 = synthesize_control(assemble_moments(data, s.ms), s.ms, s.gram, s.w, s.T);
        const auto u2 = synthesize_control(assemble_moments(data.scaled(-3.5), s.ms), s.ms, s.gram, s.w, s.T);
        CHECK(u2.norm == doctest::Approx(3.5 * u1.norm).epsilon(1e-10));
        for (double t : {0.1, 0.5 * s.T, s.T - 0.1})
            CHECK(std::abs(u2.evaluate(t, 0.2) + 3.5 * u1.evaluate(t, 0.2)) <= 1e-9 * std::abs(u2.evaluate(t, 0.2)) + 1e-300);
        CHECK(u1.evaluate(0.5 * s.T, 0.31) == cplx(0.0));
        CHECK(u1.evaluate(-0.01, 0.0) == cplx(0.0));
        CHECK(u1.evaluate(s.T + 0.01, 0.0) == cplx(0.0));
        CHECK(u1.relative_residual <= 1e-8);
        CHECK(moment_residual_quadrature(u1, assemble_moments(data, s.ms)) <= 1e-6);
    }

    TEST_CASE("minimum-norm solution matches the extended-precision KKT oracle") {
        const auto& s = small();
        const auto data = InitialData::random(s.ms, 9);
        const auto msys = assemble_moments(data, s.ms);
        const auto u = synthesize_control(msys, s.ms, s.gram, s.w, s.T);

        std::vector<oracle::Exponential> basis, constraints;
        std::vector<cplx> rhs;
        for (std::size_t q = 0; q < s.ms.size(); ++q) {
            const double k = s.ms.kappa(s.ms.modes[q].n);
            basis.push_back({k, s.ms.lambda[q]});
            constraints.push_back({-k, std::conj(s.ms.lambda[q])});
            rhs.push_back(to_d(msys.rhs[q]));
        }
        // directions outside the span must not lower the norm
        basis.push_back({0.7, {0.4, 1.0}});
        basis.push_back({-2.2, {0.1, -0.5}});
        const auto kkt = oracle::min_norm_control(basis, constraints, rhs, s.w.a, s.w.b, s.T);
        CHECK(kkt.constraint_residual <= 1e-12);
        double amax = 0.0;
        for (Eigen::Index q = 0; q < u.a.size(); ++q) amax = std::max(amax, std::abs(to_d(u.a(q))));
        double worst = 0.0;
        for (std::size_t q = 0; q < s.ms.size(); ++q)
            worst = std::max(worst, std::abs(kkt.coef[q] - to_d(u.a(static_cast<Eigen::Index>(q)))));
        CHECK(worst / amax <= 1e-8);
        CHECK(std::abs(kkt.coef[s.ms.size()]) / amax <= 1e-8);
        CHECK(std::abs(kkt.coef[s.ms.size() + 1]) / amax <= 1e-8);
    }

    TEST_CASE("regularized method and forced fallback") {
        const auto& s = medium();
        const auto msys = assemble_moments(InitialData::random(s.ms, 2), s.ms);
        SynthesisOptions reg;
        reg.method = SolveMethod::regularized;
        const auto ur = synthesize_control(msys, s.ms, s.gram, s.w, s.T, reg);
        CHECK(ur.method == SolveMethod::regularized);
        CHECK(ur.tikhonov > 0.0);
        CHECK(ur.relative_residual <= reg.residual_target);

        SynthesisOptions tight;
        tight.condition_budget = 1.0;
        const auto uf = synthesize_control(msys, s.ms, s.gram, s.w, s.T, tight);
        CHECK(uf.fallback);
        CHECK_FALSE(uf.warning.empty());
        CHECK(to_string(uf.method) == "regularized");
    }

    TEST_CASE("observability constant bounds every ratio") {
        const auto& s = medium();
        const auto ob = certify_observability(s.ms, s.gram, 100);
        CHECK(ob.C_exact > 0.0);
        CHECK(ob.C_trials >= ob.C_exact * (1 - 1e-12));
        CHECK(ob.adversarial_ratio >= ob.C_exact * (1 - 1e-12));
        double single = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < s.ms.size(); ++q) {
            const double rho = s.ms.rho(s.ms.modes[q].n);
            single = std::min(single, rho * rho * static_cast<double>(s.gram.G(q, q).real()));
        }
        CHECK(ob.single_mode_min == doctest::Approx(single).epsilon(1e-12));
        CHECK(ob.consistent);
        CHECK(ob.pass);
    }

    TEST_CASE("mismatched truncations are rejected") {
        const auto& s = small();
        CHECK_THROWS_AS(assemble_moments(InitialData::zero(3), s.ms), std::invalid_argument);
    }
}
