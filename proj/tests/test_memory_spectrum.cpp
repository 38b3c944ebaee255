#include <cmath>
#include <random>

#include <doctest.h>

#include "movctl/memory_spectrum.hpp"
#include "oracles.hpp"

using namespace movctl;

TEST_SUITE("memory_spectrum") {
    TEST_CASE("unit cubic matches the bisection oracle") {
        const auto tr = solve_cubic(1.0, MemoryCoefficient(1.0));
        const auto ref = oracle::cubic_roots(1.0, 1.0);
        CHECK(tr.mu1 == doctest::Approx(0.6823278038).epsilon(1e-9));
        CHECK(std::abs(tr.mu1 - ref[0].real()) < 1e-12);
        CHECK(std::abs(tr.mu2 - ref[1]) < 1e-12);
        CHECK(std::abs(tr.mu3 - ref[2]) < 1e-12);
    }

    TEST_CASE("vanishing memory recovers the undamped branches") {
        const double rho = 3.7;
        const auto tr = solve_cubic(rho, MemoryCoefficient(1e-12));
        CHECK(std::abs(tr.mu2 - cplx(0.0, std::sqrt(rho))) < 1e-9);
        CHECK(std::abs(tr.mu3 - cplx(0.0, -std::sqrt(rho))) < 1e-9);
        CHECK_THROWS_AS(MemoryCoefficient(0.0), std::invalid_argument);
    }

    TEST_CASE("negative memory brackets the real root in (M, 0)") {
        const auto tr = solve_cubic(4.0, MemoryCoefficient(-2.0));
        CHECK(tr.mu1 < 0.0);
        CHECK(tr.mu1 > -2.0);
    }

    TEST_CASE("random cubics: residual, conjugacy, Vieta, bracketing") {
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> lr(-3.0, 5.0), lm(-2.0, 1.0);
        std::bernoulli_distribution sign;
        for (int k = 0; k < 500; ++k) {
            const double rho = std::pow(10.0, lr(rng));
            const double M = (sign(rng) ? 1.0 : -1.0) * std::pow(10.0, lm(rng));
            CAPTURE(rho);
            CAPTURE(M);
            const auto tr = solve_cubic(rho, MemoryCoefficient(M));
            const double scale = cubic_residual_scale(rho, M);
            for (int j = 1; j <= 3; ++j) CHECK(tr.residual(j, M) <= 1e-10 * scale);
            CHECK(tr.mu3 == std::conj(tr.mu2));
            CHECK(tr.mu2.imag() > 0.0);
            CHECK(tr.mu2.real() == doctest::Approx(-tr.mu1 / 2).epsilon(1e-14));
            const cplx sum = tr.mu1 + tr.mu2 + tr.mu3;
            const cplx prod = tr.mu1 * tr.mu2 * tr.mu3;
            CHECK(std::abs(sum) <= 1e-9 * (std::abs(tr.mu1) + 2 * std::abs(tr.mu2)));
            CHECK(std::abs(prod - M * rho) <= 1e-9 * std::abs(M * rho));
            CHECK((cubic_value(0.0, rho, M).real() > 0) == (M < 0));
            CHECK((cubic_value(M, rho, M).real() > 0) == (M > 0));
            const auto ref = oracle::cubic_roots(rho, M);
            CHECK(std::abs(tr.mu1 - ref[0].real()) <= 1e-12 * std::max(1.0, std::abs(M)));
        }
    }

    TEST_CASE("branch sensitivity matches finite differences") {
        const double rho = 2.3, M = 0.8, h = 1e-6;
        const auto a = solve_cubic(rho - h, MemoryCoefficient(M));
        const auto b = solve_cubic(rho + h, MemoryCoefficient(M));
        const auto mid = solve_cubic(rho, MemoryCoefficient(M));
        for (int j = 1; j <= 3; ++j) {
            const cplx fd = (b.mu(j) - a.mu(j)) / (2 * h);
            CHECK(std::abs(fd - root_sensitivity(mid.mu(j), rho, M)) < 1e-6);
        }
    }

    TEST_CASE("real root approaches M with decreasing distance") {
        const auto t = build_eigenvalue_table(FractionalOrder(0.75), 64, EigenBackend::asymptotic);
        const auto r = verify_mu1_asymptotics(t, MemoryCoefficient(1.0));
        CHECK(r.distance_decreasing);
        // the next term of the expansion is 3 M^5 / rho^2
        CHECK(r.pass_rho2);
        CHECK(r.fitted_C_rho2 == doctest::Approx(1.0).epsilon(0.1));
    }

    TEST_CASE("monotone real root and its two-sided bound") {
        const auto t = build_eigenvalue_table(FractionalOrder(0.6), 128, EigenBackend::asymptotic);
        for (double M : {1.0, -0.7}) {
            const auto r = verify_mu1_monotone(t, MemoryCoefficient(M));
            CHECK(r.pass);
            CHECK(r.lower_bound == doctest::Approx(std::abs(M) / (M * M / t.rho_at(1) + 1)));
            const auto triples = solve_table(t, MemoryCoefficient(M));
            for (const auto& tr : triples) {
                CHECK(std::abs(tr.mu1) >= r.lower_bound);
                CHECK(std::abs(tr.mu1) < std::abs(M));
            }
        }
    }
}
