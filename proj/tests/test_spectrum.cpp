#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <doctest.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "movctl/spectrum.hpp"

using namespace movctl;

namespace {

constexpr double kPi = std::numbers::pi;

// C_s * 2 * int_0^inf (1 - cos(k y)) / y^{1+2s} dy, which should equal |k|^{2s}
double plane_wave_symbol_by_quadrature(double k, double s) {
    struct P {
        double k, s;
    } p{k, s};
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(2000);
    gsl_integration_workspace* cyc = gsl_integration_workspace_alloc(2000);
    gsl_integration_qawo_table* tab = gsl_integration_qawo_table_alloc(k, 1.0, GSL_INTEG_COSINE, 50);
    gsl_function near{[](double y, void* v) {
                          const auto* q = static_cast<P*>(v);
                          const double h = std::sin(0.5 * q->k * y);
                          return 2.0 * h * h / std::pow(y, 1.0 + 2.0 * q->s);
                      },
                      &p};
    gsl_function far{[](double y, void* v) { return std::pow(y, -1.0 - 2.0 * static_cast<P*>(v)->s); }, &p};
    double a = 0, b = 0, err = 0;
    gsl_set_error_handler_off();
    const int s1 = gsl_integration_qags(&near, 0.0, 1.0, 1e-13, 1e-11, 2000, ws, &a, &err);
    const int s2 = gsl_integration_qawf(&far, 1.0, 1e-11, 2000, ws, cyc, tab, &b, &err);
    // roundoff warnings at this tolerance still leave the estimate usable
    REQUIRE((s1 == GSL_SUCCESS || s1 == GSL_EROUND));
    REQUIRE((s2 == GSL_SUCCESS || s2 == GSL_EROUND));
    gsl_integration_qawo_table_free(tab);
    gsl_integration_workspace_free(cyc);
    gsl_integration_workspace_free(ws);
    const double tail = 1.0 / (2.0 * s);  // int_1^inf y^{-1-2s}
    return normalization_constant(s) * 2.0 * (a + tail - b);
}

}  // namespace

TEST_SUITE("spectrum") {
    TEST_CASE("normalization constant matches closed values") {
        CHECK(normalization_constant(0.5) == doctest::Approx(1.0 / kPi).epsilon(1e-14));
        // s = 1/4: the Gamma factors cancel, leaving sqrt(2) / (4 sqrt(pi))
        CHECK(normalization_constant(0.25) == doctest::Approx(std::sqrt(2.0) / (4.0 * std::sqrt(kPi))).epsilon(1e-14));
    }

    TEST_CASE("fractional order outside (0,1) is rejected") {
        CHECK_THROWS_AS(FractionalOrder(0.0), std::invalid_argument);
        CHECK_THROWS_AS(FractionalOrder(1.0), std::invalid_argument);
        CHECK_FALSE(FractionalOrder(0.4).supports_control());
        CHECK(FractionalOrder(0.6).supports_control());
    }

    TEST_CASE("asymptotic first eigenvalue at s = 0.75") {
        const auto t = build_eigenvalue_table(FractionalOrder(0.75), 1, EigenBackend::asymptotic);
        CHECK(t.rho_at(1) == doctest::Approx(std::pow(kPi / 2 - kPi / 16, 1.5)).epsilon(1e-14));
        const auto d = build_eigenvalue_table(FractionalOrder(0.75), 1, EigenBackend::discretized);
        CHECK(std::abs(d.rho_at(1) - t.rho_at(1)) / t.rho_at(1) < 0.05);
    }

    TEST_CASE("root spacing tends to pi/2 as s approaches 1") {
        const auto t = build_eigenvalue_table(FractionalOrder(0.999), 4, EigenBackend::asymptotic);
        for (int n = 1; n < 4; ++n) CHECK(t.gap(n) == doctest::Approx(kPi / 2).epsilon(1e-12));
    }

    TEST_CASE("gap bound above the threshold on both backends at s = 0.6") {
        for (auto backend : {EigenBackend::asymptotic, EigenBackend::discretized}) {
            const auto t = build_eigenvalue_table(FractionalOrder(0.6), 200, backend);
            CAPTURE(to_string(backend));
            REQUIRE(t.gap_certified);
            const int top = backend == EigenBackend::discretized ? t.resolved_n : t.n_max;
            for (int n = t.gap_threshold; n < top; ++n) CHECK(t.gap(n) >= kPi / 2 - 1e-3);
            for (int n = 1; n < t.n_max; ++n) CHECK(t.rho_at(n) < t.rho_at(n + 1));
        }
    }

    TEST_CASE("backend agreement at s = 0.75") {
        const auto a = build_eigenvalue_table(FractionalOrder(0.75), 64, EigenBackend::asymptotic);
        const auto d = build_eigenvalue_table(FractionalOrder(0.75), 64, EigenBackend::discretized);
        const auto ag = compare_backends(a, d);
        CHECK(ag.within_tol);
        CHECK(ag.flagged.empty());
    }

    TEST_CASE("constant function is annihilated") {
        auto f = OperatorSample::from_function(FractionalOrder(0.4), -30.0, 30.0, 3001, [](double) { return cplx(2.5, 0); });
        const auto r = apply_fractional_laplacian(f, 25.0);
        REQUIRE_FALSE(r.values.empty());
        for (const auto& v : r.values) CHECK(std::abs(v) < 1e-10);
    }

    TEST_CASE("plane-wave symbol: quadrature oracle and operator agree") {
        CHECK(plane_wave_symbol_by_quadrature(2.0, 0.5) == doctest::Approx(2.0).epsilon(1e-8));
        CHECK(plane_wave_symbol_by_quadrature(3.0, 0.75) == doctest::Approx(std::pow(3.0, 1.5)).epsilon(1e-8));
        const auto c = verify_symbol_identity(2.0, FractionalOrder(0.5), 1e-4, {0.01, 240.0, 1.0});
        CHECK(c.max_rel_error <= 1e-4);
    }

    TEST_CASE("symbol identity preconditions and symmetry") {
        CHECK_THROWS_AS(verify_symbol_identity(0.0, FractionalOrder(0.75), 1e-3), std::invalid_argument);
        const auto plus = verify_symbol_identity(3.0, FractionalOrder(0.55), 1e-3);
        const auto minus = verify_symbol_identity(-3.0, FractionalOrder(0.55), 1e-3);
        CHECK(plus.max_rel_error == doctest::Approx(minus.max_rel_error).epsilon(1e-6));
        CHECK(verify_symbol_identity(kPi / 2, FractionalOrder(0.75), 1e-3).pass);
    }

    TEST_CASE("epsilon below the grid resolution is rejected") {
        auto f = OperatorSample::from_function(FractionalOrder(0.5), -10.0, 10.0, 2001, [](double) { return cplx(1, 0); },
                                               1e-5);
        CHECK_THROWS_AS(apply_fractional_laplacian(f, 5.0), std::invalid_argument);
    }

    TEST_CASE("symbol error decreases under refinement") {
        const auto conv = symbol_convergence(1.0, FractionalOrder(0.75), 1e-3, 3);
        REQUIRE(conv.levels.size() == 3);
        CHECK(conv.levels[1].max_rel_error < conv.levels[0].max_rel_error);
        CHECK(conv.levels[2].max_rel_error < conv.levels[1].max_rel_error);
        CHECK(conv.first_order);
    }

    TEST_CASE("eigenvalue csv has the documented columns") {
        const auto t = build_eigenvalue_table(FractionalOrder(0.75), 10, EigenBackend::asymptotic);
        const auto path = (std::filesystem::temp_directory_path() / "movctl_table.csv").string();
        write_table_csv(path, t);
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "n,rho,rho_root,gap,backend");
        int rows = 0;
        for (std::string line; std::getline(in, line);) ++rows;
        CHECK(rows == 10);
    }
}
