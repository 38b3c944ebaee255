#include <cmath>
#include <set>

#include <doctest.h>

#include "movctl/moving_spectrum.hpp"

using namespace movctl;

namespace {

const EigenvalueTable& table075() {
    static const EigenvalueTable t = build_eigenvalue_table(FractionalOrder(0.75), 400, EigenBackend::asymptotic);
    return t;
}

}  // namespace

TEST_SUITE("moving_spectrum") {
    TEST_CASE("excluded velocities are rejected") {
        const auto& t = table075();
        CHECK_THROWS_AS(build_moving_spectrum(t, MemoryCoefficient(1.0), 0.0, 8), std::invalid_argument);
        CHECK_THROWS_AS(build_moving_spectrum(t, MemoryCoefficient(1.0), t.gap_gamma, 8), std::invalid_argument);
        CHECK_THROWS_AS(build_moving_spectrum(t, MemoryCoefficient(1.0), -t.gap_gamma, 8), std::invalid_argument);
        CHECK_THROWS_AS(build_moving_spectrum(t, MemoryCoefficient(1.0), 1.0, 0), std::invalid_argument);
        const auto low = build_eigenvalue_table(FractionalOrder(0.45), 16, EigenBackend::asymptotic);
        CHECK_THROWS_AS(build_moving_spectrum(low, MemoryCoefficient(1.0), 1.0, 8), std::invalid_argument);
    }

    TEST_CASE("branch real parts and transport imaginary shift") {
        const auto ms = build_moving_spectrum(table075(), MemoryCoefficient(1.0), 1.0, 32);
        REQUIRE(ms.size() == 6 * 32);
        for (std::size_t p = 0; p < ms.size(); ++p) {
            const auto& m = ms.modes[p];
            const auto tr = solve_cubic(ms.rho(m.n), MemoryCoefficient(1.0));
            const cplx l = ms.lambda[p];
            CAPTURE(to_string(m));
            if (m.j == 1) {
                CHECK(l.real() == doctest::Approx(tr.mu1).epsilon(1e-14));
                CHECK(l.imag() == doctest::Approx(ms.kappa(m.n)).epsilon(1e-13));
            } else {
                CHECK(l.real() == doctest::Approx(-tr.mu1 / 2).epsilon(1e-13));
            }
            CHECK(std::abs(l.real()) < 1.0);
        }
    }

    TEST_CASE("conjugate symmetry across the sign of n") {
        const auto ms = build_moving_spectrum(table075(), MemoryCoefficient(-0.8), 2.5, 24);
        for (int n = 1; n <= 24; ++n) {
            CHECK(std::abs(std::conj(ms.lam(n, 2)) - ms.lam(-n, 3)) < 1e-12 * std::abs(ms.lam(n, 2)));
            CHECK(std::abs(std::conj(ms.lam(n, 1)) - ms.lam(-n, 1)) < 1e-12 * std::abs(ms.lam(n, 1)));
        }
    }

    TEST_CASE("eigenvector third entry is the reciprocal memory root") {
        const auto ms = build_moving_spectrum(table075(), MemoryCoefficient(0.5), 1.0, 16);
        for (const auto& m : ms.modes) {
            const auto v = ms.psi(m);
            CHECK(v[0] == cplx(1.0, 0.0));
            CHECK(std::abs(v[1] + ms.lam(m)) == 0.0);
            CHECK(std::abs(v[2] - 1.0 / ms.mu(m.n, m.j)) <= 1e-12 * std::abs(v[2]));
        }
    }

    TEST_CASE("critical velocity produces one double eigenvalue") {
        const auto& t = table075();
        const auto cv = critical_velocities(t, MemoryCoefficient(0.5), 3);
        REQUIRE(cv.size() == 3);
        const auto ms = build_moving_spectrum(t, MemoryCoefficient(0.5), cv[1].v, 32);
        REQUIRE(ms.critical.has_value());
        CHECK(ms.critical->n_c == cv[1].n);
        CHECK(ms.critical->collision_distance <= 1e-9);
        const auto idx = ms.index(ms.critical->doubled);
        CHECK(ms.lambda_conv[idx] != ms.lambda[idx]);
        int changed = 0;
        for (std::size_t p = 0; p < ms.size(); ++p) changed += ms.lambda_conv[p] != ms.lambda[p];
        CHECK(changed == 1);
        int hits = 0;
        for (const auto& v : critical_velocities(t, MemoryCoefficient(0.5), t.n_max))
            hits += std::abs(v.v - cv[1].v) <= 1e-9;
        CHECK(hits == 1);

        const auto generic = build_moving_spectrum(t, MemoryCoefficient(0.5), 1.0, 32);
        CHECK_FALSE(generic.critical.has_value());
    }

    TEST_CASE("gap report covers every pair once and uses role ids") {
        const auto ms = build_moving_spectrum(table075(), MemoryCoefficient(0.5), 1.0, 16);
        const auto r = gap_diagnostics(ms);
        const std::int64_t K = static_cast<std::int64_t>(ms.size());
        CHECK(r.pairs_total == K * (K - 1) / 2);
        CHECK(r.coverage_pass);
        CHECK(r.velocity_case == "c<gamma");
        CHECK(r.epsilon > 0.0);
        std::set<std::string> ids;
        for (const auto& cl : r.literal) {
            CHECK(ids.insert(cl.id).second);
            CHECK(cl.pass == (cl.margin >= 0.0));
        }
        CHECK(ids.count("symmetry:conjugation") == 1);
        CHECK(ids.count("branch-separation:branch1-vs-23") == 1);
        for (const auto& cl : r.rescaled) CHECK(cl.id.rfind("restated:", 0) == 0);
        CHECK(r.rescaled_pass);
        const auto js = r.to_json();
        CHECK(js.contains("literal"));
    }

    TEST_CASE("fast transport switches the ordering case") {
        const auto ms = build_moving_spectrum(table075(), MemoryCoefficient(0.5), 2.5, 16);
        const auto r = gap_diagnostics(ms);
        CHECK(r.velocity_case == "c>gamma");
        bool fast = false;
        for (const auto& cl : r.literal) fast = fast || cl.id.rfind("ordering-fast:", 0) == 0;
        CHECK(fast);
    }

    TEST_CASE("frame bounds hold for random coefficients") {
        const auto ms = build_moving_spectrum(table075(), MemoryCoefficient(0.5), 1.0, 8);
        const auto fb = frame_bounds(ms, 0.0, 100);
        CHECK(fb.a1_hat > 0.0);
        CHECK(fb.a2_hat >= fb.a1_hat);
        CHECK(fb.trials == 100);
        CHECK(fb.trials_passed == 100);
        CHECK(fb.worst_lower_ratio >= 1.0 - 1e-12);
        CHECK(fb.worst_upper_ratio <= 1.0 + 1e-12);
        CHECK(fb.max_det_mismatch < 1e-10);
        CHECK(fb.max_psi_identity_error < 1e-12);
        CHECK(fb.pass);
    }

    TEST_CASE("static spectrum has no transport term") {
        const auto ms = build_static_spectrum(table075(), MemoryCoefficient(0.5), 6);
        for (std::size_t p = 0; p < ms.size(); ++p)
            CHECK(ms.lambda[p] == ms.mu(ms.modes[p].n, ms.modes[p].j));
    }
}
