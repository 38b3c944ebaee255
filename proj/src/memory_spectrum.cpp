#include "movctl/memory_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "movctl/io.hpp"

namespace movctl {

MemoryCoefficient::MemoryCoefficient(double value) : M(value) {
    if (value == 0.0 || !std::isfinite(value))
        throw std::invalid_argument("memory coefficient must be finite and nonzero");
}

cplx cubic_value(cplx mu, double rho, double M) { return mu * mu * mu + rho * (mu - M); }

double cubic_residual_scale(double rho, double M) { return std::abs(M) * rho + std::pow(std::abs(M), 3); }

cplx SpectralTriple::mu(int j) const {
    switch (j) {
        case 1: return {mu1, 0.0};
        case 2: return mu2;
        case 3: return mu3;
    }
    throw std::out_of_range("branch index must be 1, 2 or 3");
}

SpectralTriple solve_cubic(double rho, MemoryCoefficient mc, int n) {
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    const double M = mc.M;
    // grouped so that K(M) = M^3 keeps its sign for tiny |M|
    auto K = [&](double m) { return m * m * m + rho * (m - M); };
    double lo = std::min(0.0, M), hi = std::max(0.0, M);
    // K is increasing, K(min) < 0 < K(max)
    if (!(K(lo) < 0.0 && K(hi) > 0.0))
        throw std::logic_error(fmt::format("cubic root not bracketed for rho={}, M={}", rho, M));
    while (hi - lo > 1e-8 * std::abs(M)) {
        const double mid = 0.5 * (lo + hi);
        (K(mid) < 0.0 ? lo : hi) = mid;
    }
    double mu = 0.5 * (lo + hi);
    const double target = 1e-14 * cubic_residual_scale(rho, M);
    for (int it = 0; it < 50 && std::abs(K(mu)) > target; ++it) {
        const double next = mu - K(mu) / (3.0 * mu * mu + rho);
        if (next == mu) break;
        mu = next;
    }
    SpectralTriple t;
    t.n = n;
    t.rho = rho;
    t.mu1 = mu;
    t.mu2 = {-0.5 * mu, std::sqrt(0.75 * mu * mu + rho)};
    t.mu3 = std::conj(t.mu2);
    return t;
}

std::vector<SpectralTriple> solve_table(const EigenvalueTable& t, MemoryCoefficient M) {
    std::vector<SpectralTriple> out;
    out.reserve(static_cast<std::size_t>(t.n_max));
    for (int n = 1; n <= t.n_max; ++n) out.push_back(solve_cubic(t.rho_at(n), M, n));
    return out;
}

cplx root_sensitivity(cplx mu, double rho, double M) { return -(mu - M) / (3.0 * mu * mu + rho); }

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace

Mu1Asymptotics verify_mu1_asymptotics(const EigenvalueTable& t, MemoryCoefficient mc) {
    if (t.n_max < 16) throw std::invalid_argument("asymptotic check needs at least 16 table entries");
    const double M = mc.M;
    const auto tr = solve_table(t, mc);
    Mu1Asymptotics r;
    const int n_max = t.n_max;
    for (int n = 1; n <= n_max; ++n) {
        const double rho = tr[n - 1].rho;
        const double rem = tr[n - 1].mu1 - M + M * M * M / rho;
        r.remainder.push_back(rem);
        r.scaled_n4.push_back(std::abs(rem) * std::pow(n, 4.0));
        r.scaled_rho2.push_back(std::abs(rem) * rho * rho / (3.0 * std::pow(std::abs(M), 5)));
    }
    const int lo = n_max / 2 + 1;
    std::vector<double> top4(r.scaled_n4.begin() + (lo - 1), r.scaled_n4.end());
    std::vector<double> top2(r.scaled_rho2.begin() + (lo - 1), r.scaled_rho2.end());
    auto spread = [](const std::vector<double>& v) {
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        return *mn > 0 ? *mx / *mn : INFINITY;
    };
    r.fitted_C_n4 = median(top4);
    r.spread_n4 = spread(top4);
    r.fitted_C_rho2 = median(top2);
    r.spread_rho2 = spread(top2);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int n = lo; n <= n_max; ++n) {
        const double a = std::abs(r.remainder[n - 1]);
        if (a <= 0) continue;
        const double x = std::log(n), y = std::log(a);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++cnt;
    }
    r.slope = cnt > 1 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : 0.0;
    r.distance_decreasing = true;
    for (int n = 1; n < n_max; ++n)
        if (!(std::abs(tr[n].mu1 - M) < std::abs(tr[n - 1].mu1 - M))) r.distance_decreasing = false;
    r.pass_n4 = std::abs(r.slope + 4.0) <= 0.25 && r.spread_n4 <= 2.0;
    r.pass_rho2 = r.spread_rho2 <= 2.0;
    r.pass = r.pass_n4 && r.distance_decreasing;
    return r;
}

Mu1Monotone verify_mu1_monotone(const EigenvalueTable& t, MemoryCoefficient mc) {
    if (!(t.s > 0.5)) throw std::invalid_argument("monotonicity check requires s > 1/2");
    const double M = mc.M;
    const auto tr = solve_table(t, mc);
    Mu1Monotone r;
    r.lower_bound = std::abs(M) / (M * M / t.rho_at(1) + 1.0);
    for (int n = 1; n <= t.n_max; ++n) {
        const double a = std::abs(tr[n - 1].mu1);
        if (!(a >= r.lower_bound)) r.lower_ok = false;
        if (!(a < std::abs(M))) r.upper_ok = false;
        if ((!r.lower_ok || !r.upper_ok) && r.bound_violation == 0) r.bound_violation = n;
        if (n < t.n_max && !(std::abs(tr[n].mu1) > a) && r.increasing) {
            r.increasing = false;
            r.first_violation = n;
        }
    }
    r.pass = r.increasing && r.lower_ok && r.upper_ok;
    return r;
}

void write_triples_csv(const std::string& path, const std::vector<SpectralTriple>& triples, double M) {
    CsvWriter w(path, {"n", "rho", "mu1", "re_mu2", "im_mu2", "res_mu1", "res_mu2", "res_mu3"});
    for (const auto& t : triples)
        w.row({fmt::format("{}", t.n), num(t.rho), num(t.mu1), num(t.mu2.real()), num(t.mu2.imag()),
               num(t.residual(1, M)), num(t.residual(2, M)), num(t.residual(3, M))});
}

}  // namespace movctl
