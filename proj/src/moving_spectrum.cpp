#include "movctl/moving_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace movctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const cplx I(0.0, 1.0);

int sgn(int n) { return n > 0 ? 1 : -1; }

}  // namespace

std::string to_string(const ModeIndex& m) { return fmt::format("({},{})", m.n, m.j); }

std::size_t MovingSpectrum::index(const ModeIndex& m) const {
    if (m.n == 0 || std::abs(m.n) > N || m.j < 1 || m.j > 3)
        throw std::out_of_range("mode " + to_string(m) + " outside the truncation");
    const int pos = m.n < 0 ? m.n + N : m.n + N - 1;
    return static_cast<std::size_t>(3 * pos + (m.j - 1));
}

double MovingSpectrum::kappa(int n) const { return sgn(n) * table.root(std::abs(n)); }

cplx MovingSpectrum::lam(int n, int j) const { return mu(n, j) + I * (c * kappa(n)); }

std::array<cplx, 3> MovingSpectrum::psi(const ModeIndex& m) const {
    const cplx l = lam(m);
    return {1.0, -l, 1.0 / (l - I * (c * kappa(m.n)))};
}

void check_velocity(double c, double gamma, double tol) {
    if (!std::isfinite(c)) throw std::invalid_argument("velocity must be finite");
    if (std::abs(c) < tol) throw std::invalid_argument(fmt::format("velocity c={} is excluded (c = 0)", c));
    if (std::abs(c - gamma) < tol || std::abs(c + gamma) < tol)
        throw std::invalid_argument(fmt::format("velocity c={} is excluded (|c| = gamma = {})", c, gamma));
}

std::vector<CriticalVelocity> critical_velocities(const EigenvalueTable& table, MemoryCoefficient M, int n_range) {
    std::vector<CriticalVelocity> out;
    const int top = std::min(n_range, table.n_max);
    for (int n = 1; n <= top; ++n) {
        const auto tr = solve_cubic(table.rho_at(n), M, n);
        const double k = table.root(n);
        const double a = tr.mu1 / (2.0 * k);
        out.push_back({n, std::sqrt(3.0 * a * a + std::pow(table.rho_at(n), 1.0 - 1.0 / table.s))});
    }
    return out;
}

namespace {

MovingSpectrum unchecked_spectrum(const EigenvalueTable& table, MemoryCoefficient M, double c, int N) {
    if (!(table.s > 0.5)) throw std::invalid_argument("moving spectrum requires s > 1/2");
    if (N < 1 || N > table.n_max)
        throw std::invalid_argument(fmt::format("truncation N={} outside the table range 1..{}", N, table.n_max));
    MovingSpectrum ms;
    ms.s = table.s;
    ms.M = M.M;
    ms.c = c;
    ms.gamma = table.gap_gamma;
    ms.N = N;
    ms.table = table;
    ms.triples = solve_table(table, M);
    for (int n = -N; n <= N; ++n) {
        if (n == 0) continue;
        for (int j = 1; j <= 3; ++j) {
            ms.modes.push_back({n, j});
            ms.lambda.push_back(ms.lam(n, j));
        }
    }
    ms.lambda_conv = ms.lambda;
    return ms;
}

}  // namespace

MovingSpectrum build_static_spectrum(const EigenvalueTable& table, MemoryCoefficient M, int N) {
    return unchecked_spectrum(table, M, 0.0, N);
}

MovingSpectrum build_moving_spectrum(const EigenvalueTable& table, MemoryCoefficient M, double c, int N,
                                     double critical_tol) {
    check_velocity(c, table.gap_gamma);
    MovingSpectrum ms = unchecked_spectrum(table, M, c, N);
    const double speed = std::abs(c);
    for (const auto& cv : critical_velocities(table, M, N)) {
        if (std::abs(speed - cv.v) > critical_tol * std::max(1.0, cv.v)) continue;
        // with c > 0 the collision is lambda_{-n}^2 = lambda_n^3, mirrored for c < 0
        const int side = c > 0 ? 1 : -1;
        CriticalRecord r;
        r.n_c = cv.n;
        r.velocity = cv.v;
        r.doubled = {-side * cv.n, 2};
        r.partner = {side * cv.n, 3};
        r.physical = ms.lam(r.doubled);
        r.collision_distance = std::abs(r.physical - ms.lam(r.partner));
        r.convention = r.physical + ms.triples[cv.n - 1].mu1 - 0.5 * I;
        ms.lambda_conv[ms.index(r.doubled)] = r.convention;
        ms.critical = r;
        break;
    }
    return ms;
}

// ---------------------------------------------------------------------------------------------
// gap diagnostics

namespace {

struct GapContext {
    const MovingSpectrum& ms;
    int side;      // sgn(c); clauses are written for c > 0 and mirrored through n -> side*n
    double c;      // |c|
    double gamma;
    double eps;
    int N;
    int n_max;

    cplx L(int n, int j) const { return ms.lam(side * n, j); }
    double im(int n, int j) const { return L(n, j).imag(); }
    double rho(int n) const { return ms.table.rho_at(std::abs(n)); }
    double sr(int n) const { return std::sqrt(rho(n)); }
};

enum class Sense { at_least, at_most };

ClauseResult range_clause(std::string id, std::string statement, int lo, int hi,
                          const std::function<double(int)>& value, const std::function<double(int)>& bound,
                          Sense sense, bool strict = false) {
    ClauseResult r;
    r.id = std::move(id);
    r.statement = std::move(statement);
    if (lo > hi) {
        r.pass = false;
        r.margin = -kInf;
        r.witness = fmt::format("empty index range [{}, {}]", lo, hi);
        return r;
    }
    r.margin = kInf;
    for (int n = lo; n <= hi; ++n) {
        const double v = value(n), b = bound(n);
        const double m = sense == Sense::at_least ? v - b : b - v;
        if (m < r.margin) {
            r.margin = m;
            r.value = v;
            r.bound = b;
            r.witness = fmt::format("n={}", n);
        }
    }
    r.pass = strict ? r.margin > 0.0 : r.margin >= -1e-9;
    return r;
}

ClauseResult monotone_clause(std::string id, std::string statement, int lo, int hi,
                             const std::function<double(int)>& f, bool increasing) {
    return range_clause(
        std::move(id), std::move(statement), lo, hi - 1,
        [&](int n) { return increasing ? f(n + 1) - f(n) : f(n) - f(n + 1); }, [](int) { return 0.0; },
        Sense::at_least, true);
}

ClauseResult scalar_clause(std::string id, std::string statement, double value, double bound, Sense sense,
                           std::string witness, bool strict = false) {
    ClauseResult r;
    r.id = std::move(id);
    r.statement = std::move(statement);
    r.value = value;
    r.bound = bound;
    r.margin = sense == Sense::at_least ? value - bound : bound - value;
    r.pass = strict ? r.margin > 0.0 : r.margin >= -1e-9;
    r.witness = std::move(witness);
    return r;
}

// min over the top half of m against the bottom half; a sequence decaying to zero fails
ClauseResult stable_lower_clause(std::string id, std::string statement, const std::vector<int>& ms_idx,
                                 const std::vector<double>& vals) {
    ClauseResult r;
    r.id = std::move(id);
    r.statement = std::move(statement);
    if (vals.size() < 2) {
        r.pass = false;
        r.margin = -kInf;
        r.witness = "fewer than two indices in range";
        return r;
    }
    const std::size_t half = vals.size() / 2;
    double lo_min = kInf, hi_min = kInf;
    int hi_arg = 0;
    for (std::size_t k = 0; k < vals.size(); ++k) {
        if (k < half)
            lo_min = std::min(lo_min, vals[k]);
        else if (vals[k] < hi_min) {
            hi_min = vals[k];
            hi_arg = ms_idx[k];
        }
    }
    r.value = hi_min;
    r.bound = 0.1 * lo_min;
    r.margin = r.value - r.bound;
    r.pass = hi_min > 0.0 && r.margin >= 0.0;
    r.witness = fmt::format("top-half min at m={}, bottom-half min {:.6g}", hi_arg, lo_min);
    return r;
}

}  // namespace

json GapReport::to_json() const {
    auto clauses = [](const std::vector<ClauseResult>& v) {
        json a = json::array();
        for (const auto& c : v)
            a.push_back({{"id", c.id},
                         {"statement", c.statement},
                         {"value", c.value},
                         {"bound", c.bound},
                         {"margin", c.margin},
                         {"pass", c.pass},
                         {"witness", c.witness}});
        return a;
    };
    return {{"epsilon", epsilon},
            {"N_eps1", N_eps1},
            {"N_eps2", N_eps2},
            {"N_eps", N_eps},
            {"velocity_case", velocity_case},
            {"delta", delta},
            {"delta_prime", delta_prime},
            {"delta_rescaled", delta_resc},
            {"delta_prime_rescaled", delta_prime_resc},
            {"literal", clauses(literal)},
            {"rescaled", clauses(rescaled)},
            {"pairs",
             {{"total", pairs_total},
              {"branch1", pairs_branch1},
              {"branch23", pairs_branch23},
              {"near_resonant", pairs_near},
              {"critical", pairs_critical},
              {"pass", coverage_pass}}},
            {"literal_pass", literal_pass},
            {"rescaled_pass", rescaled_pass},
            {"pass", pass}};
}

GapReport gap_diagnostics(const MovingSpectrum& ms, double epsilon) {
    const double c = std::abs(ms.c), gamma = ms.gamma;
    if (!(epsilon > 0.0)) epsilon = std::min(c * gamma, std::abs(1.0 - c / gamma) * gamma) / 10.0;
    GapContext g{ms, ms.c > 0 ? 1 : -1, c, gamma, epsilon, ms.N, ms.table.n_max};
    GapReport rep;
    rep.epsilon = epsilon;
    const double M = ms.M;
    const bool slow_case = c < gamma;
    rep.velocity_case = slow_case ? "c<gamma" : "c>gamma";

    // thresholds
    auto q = [&](int n) {
        const double m1 = ms.triples[n - 1].mu1;
        const double a = 0.75 * m1 * m1;
        return a / (std::sqrt(a + g.rho(n)) + g.sr(n));
    };
    {
        int n1 = g.n_max + 1, n2 = g.n_max + 1;
        for (int n = g.n_max; n >= 1 && q(n) <= epsilon; --n) n1 = n;
        for (int n = g.n_max; n >= 1 && std::abs(ms.triples[n - 1].mu1 - M) / 2.0 <= epsilon / 2.0; --n) n2 = n;
        rep.N_eps1 = n1;
        rep.N_eps2 = n2;
        rep.N_eps = std::max(n1, n2);
    }
    if (rep.N_eps > g.n_max)
        throw std::invalid_argument(
            fmt::format("epsilon={} threshold lies beyond the table (n_max={})", epsilon, g.n_max));
    const int N = g.N, Ne = rep.N_eps;
    const double r1 = g.sr(1);
    auto& L = rep.literal;

    // branch 1 against branches 2 and 3
    {
        const double mu_lit = ms.triples[0].mu1;
        const double b = 3.0 * std::abs(M) / (2.0 * M * M / ms.table.rho_at(1) + 2.0);
        const double b_lit = 3.0 * std::abs(M) / (2.0 * M * M / mu_lit + 2.0);
        double dmin = kInf;
        std::string w;
        for (int n = -N; n <= N; ++n) {
            if (!n) continue;
            for (int m = -N; m <= N; ++m) {
                if (!m) continue;
                for (int k = 2; k <= 3; ++k) {
                    const double d = std::abs(ms.lam(n, 1) - ms.lam(m, k));
                    if (d < dmin) {
                        dmin = d;
                        w = fmt::format("({},1)-({},{}); stated form with mu_1 gives {:.6g}", n, m, k, b_lit);
                    }
                }
            }
        }
        L.push_back(scalar_clause("branch-separation:branch1-vs-23", "|lambda_n^1 - lambda_m^k| >= 3|M|/(2M^2/rho_1+2), k=2,3",
                                  dmin, b, Sense::at_least, w));
        double worst = kInf, dm = kInf;
        std::string w2;
        for (int n = -N; n <= N; ++n) {
            for (int m = n + 1; m <= N; ++m) {
                if (!n || !m) continue;
                const double d = std::abs(ms.lam(n, 1) - ms.lam(m, 1));
                const double m2 = d - c * std::abs(ms.kappa(n) - ms.kappa(m));
                dm = std::min(dm, d);
                if (m2 < worst) {
                    worst = m2;
                    w2 = fmt::format("({},1)-({},1)", n, m);
                }
            }
        }
        auto cl = scalar_clause("branch-separation:branch1-internal", "|lambda_n^1 - lambda_m^1| >= c|kappa_n - kappa_m| > 0",
                                worst, 0.0, Sense::at_least, w2);
        cl.pass = cl.pass && dm > 0.0;
        L.push_back(cl);
    }

    // branches 2 and 3 among themselves, collisions
    {
        double ups = kInf;
        std::string w;
        for (std::size_t a = 0; a < ms.size(); ++a) {
            if (ms.modes[a].j == 1) continue;
            for (std::size_t b = a + 1; b < ms.size(); ++b) {
                if (ms.modes[b].j == 1) continue;
                if (ms.critical) {
                    const auto& cr = *ms.critical;
                    if ((ms.modes[a] == cr.doubled && ms.modes[b] == cr.partner) ||
                        (ms.modes[b] == cr.doubled && ms.modes[a] == cr.partner))
                        continue;
                }
                const double d = std::abs(ms.lambda[a] - ms.lambda[b]);
                if (d < ups) {
                    ups = d;
                    w = to_string(ms.modes[a]) + "-" + to_string(ms.modes[b]);
                }
            }
        }
        L.push_back(scalar_clause("collision:upsilon", "min |lambda_n^j - lambda_m^k| over branches 2,3 (critical pair excepted) > 0",
                                  ups, 0.0, Sense::at_least, w, true));
        const auto cvs = critical_velocities(ms.table, MemoryCoefficient(M), ms.table.n_max);
        int hits = 0;
        for (const auto& cv : cvs)
            if (std::abs(c - cv.v) <= 1e-9 * std::max(1.0, cv.v)) ++hits;
        if (ms.critical) {
            L.push_back(scalar_clause("collision:double-eigenvalue", "|lambda_{-n_c}^2 - lambda_{n_c}^3| <= 1e-9 before the convention",
                                      ms.critical->collision_distance, 1e-9, Sense::at_most,
                                      fmt::format("n_c={}", ms.critical->n_c)));
            L.push_back(scalar_clause("collision:unique-n_c", "exactly one n with v_n = |c| in the table", hits, 1.0,
                                      Sense::at_most, fmt::format("{} matches", hits)));
        }
    }

    // conjugate symmetry of the oscillating branches
    {
        double worst = 0.0;
        for (int n = 1; n <= N; ++n)
            worst = std::max(worst, std::abs(std::conj(ms.lam(n, 2)) - ms.lam(-n, 3)));
        L.push_back(scalar_clause("symmetry:conjugation", "conj(lambda_n^2) = lambda_{-n}^3", worst, 1e-12, Sense::at_most, ""));
    }

    // ordering of the imaginary parts
    {
        auto im2 = [&](int n) { return g.im(n, 2); };
        auto im3 = [&](int n) { return g.im(n, 3); };
        auto sqrtgap = [&](int n) { return g.sr(n + 1) - g.sr(n); };
        if (slow_case) {
            L.push_back(monotone_clause("ordering-slow:Im2(n)-increasing", "Im lambda_n^2 increasing, n >= 1", 1, N, im2, true));
            L.push_back(range_clause("ordering-slow:Im2(n)-interval", "Im lambda_n^2 >= (1+c) rho_1^{1/2}", 1, N, im2,
                                     [&](int) { return (1 + c) * r1; }, Sense::at_least));
            L.push_back(monotone_clause("ordering-slow:Im2(-n)-increasing", "Im lambda_{-n}^2 increasing, n >= N_eps", Ne, N,
                                        [&](int n) { return im2(-n); }, true));
            L.push_back(range_clause("ordering-slow:Im2(-n)-interval", "Im lambda_{-n}^2 >= (1-c/gamma) rho_1^{1/2}", Ne, N,
                                     [&](int n) { return im2(-n); }, [&](int) { return (1 - c / gamma) * r1; },
                                     Sense::at_least));
            L.push_back(monotone_clause("ordering-slow:Im3(n)-decreasing", "Im lambda_n^3 decreasing, n >= N_eps", Ne, N, im3, false));
            L.push_back(range_clause("ordering-slow:Im3(n)-interval", "Im lambda_n^3 <= (-1+c/gamma) rho_1^{1/2} gamma", Ne, N, im3,
                                     [&](int) { return (-1 + c / gamma) * r1 * gamma; }, Sense::at_most));
            L.push_back(monotone_clause("ordering-slow:Im3(-n)-decreasing", "Im lambda_{-n}^3 decreasing, n >= 1", 1, N,
                                        [&](int n) { return im3(-n); }, false));
            L.push_back(range_clause("ordering-slow:Im3(-n)-interval", "Im lambda_{-n}^3 <= -(1+c) rho_1^{1/2}", 1, N,
                                     [&](int n) { return im3(-n); }, [&](int) { return -(1 + c) * r1; }, Sense::at_most));
            L.push_back(range_clause("ordering-slow:fast-gap", "Im lambda_{n+1}^2 - Im lambda_n^2 >= c gamma - eps, n >= N_eps", Ne,
                                     N - 1, [&](int n) { return im2(n + 1) - im2(n); },
                                     [&](int) { return c * gamma - epsilon; }, Sense::at_least));
            L.push_back(range_clause("ordering-slow:slow-gap",
                                     "Im lambda_{-n-1}^2 - Im lambda_{-n}^2 >= (1-c/gamma)(rho_{n+1}^{1/2}-rho_n^{1/2}) - eps > 0",
                                     Ne, N - 1, [&](int n) { return im2(-n - 1) - im2(-n); },
                                     [&](int n) { return std::max((1 - c / gamma) * sqrtgap(n) - epsilon, 0.0); },
                                     Sense::at_least, true));
            L.push_back(range_clause("ordering-slow:head-bound-2", "Im lambda_{-n}^2 <= Im lambda_{-N_eps}^2, n <= N_eps", 1,
                                     std::min(Ne, N), [&](int n) { return im2(-n); },
                                     [&](int) { return im2(-Ne); }, Sense::at_most));
            L.push_back(range_clause("ordering-slow:head-bound-3", "Im lambda_n^3 >= Im lambda_{N_eps}^3, n <= N_eps", 1,
                                     std::min(Ne, N), im3, [&](int) { return im3(Ne); }, Sense::at_least));
        } else {
            L.push_back(monotone_clause("ordering-fast:Im2(n)-increasing", "Im lambda_n^2 increasing, n >= 1", 1, N, im2, true));
            L.push_back(range_clause("ordering-fast:Im2(n)-interval", "Im lambda_n^2 >= (c+1) rho_1^{1/2}", 1, N, im2,
                                     [&](int) { return (c + 1) * r1; }, Sense::at_least));
            L.push_back(monotone_clause("ordering-fast:Im3(n)-increasing", "Im lambda_n^3 increasing, n >= N_eps", Ne, N, im3, true));
            L.push_back(range_clause("ordering-fast:Im3(n)-interval", "Im lambda_n^3 >= (c/gamma-1) rho_1^{1/2}", Ne, N, im3,
                                     [&](int) { return (c / gamma - 1) * r1; }, Sense::at_least));
            L.push_back(monotone_clause("ordering-fast:Im2(-n)-decreasing", "Im lambda_{-n}^2 decreasing, n >= N_eps", Ne, N,
                                        [&](int n) { return im2(-n); }, false));
            L.push_back(range_clause("ordering-fast:Im2(-n)-interval", "Im lambda_{-n}^2 <= (1-c/gamma) rho_1^{1/2}", Ne, N,
                                     [&](int n) { return im2(-n); }, [&](int) { return (1 - c / gamma) * r1; },
                                     Sense::at_most));
            L.push_back(monotone_clause("ordering-fast:Im3(-n)-decreasing", "Im lambda_{-n}^3 decreasing, n >= 1", 1, N,
                                        [&](int n) { return im3(-n); }, false));
            L.push_back(range_clause("ordering-fast:Im3(-n)-interval", "Im lambda_{-n}^3 <= -(c+1) rho_1^{1/2}", 1, N,
                                     [&](int n) { return im3(-n); }, [&](int) { return -(c + 1) * r1; }, Sense::at_most));
            L.push_back(range_clause("ordering-fast:fast-gap", "Im lambda_{n+1}^2 - Im lambda_n^2 >= c gamma - eps, n >= N_eps", Ne,
                                     N - 1, [&](int n) { return im2(n + 1) - im2(n); },
                                     [&](int) { return c * gamma - epsilon; }, Sense::at_least));
            L.push_back(range_clause("ordering-fast:slow-gap",
                                     "Im lambda_{-n}^2 - Im lambda_{-n-1}^2 >= (c/gamma-1)(rho_{n+1}^{1/2}-rho_n^{1/2}) - eps > 0",
                                     Ne, N - 1, [&](int n) { return im2(-n) - im2(-n - 1); },
                                     [&](int n) { return std::max((c / gamma - 1) * sqrtgap(n) - epsilon, 0.0); },
                                     Sense::at_least, true));
            L.push_back(range_clause("ordering-fast:head-bound-3", "Im lambda_n^3 <= Im lambda_{N_eps}^3, n <= N_eps", 1,
                                     std::min(Ne, N), im3, [&](int) { return im3(Ne); }, Sense::at_most));
            L.push_back(range_clause("ordering-fast:head-bound-2", "Im lambda_{-n}^2 >= Im lambda_{-N_eps}^2, n <= N_eps", 1,
                                     std::min(Ne, N), [&](int n) { return im2(-n); },
                                     [&](int) { return im2(-Ne); }, Sense::at_least));
        }
    }

    // near-resonant pairs, n_m from direct minimization of the pairing objective
    std::vector<std::pair<ModeIndex, ModeIndex>> near_pairs;  // oriented for c > 0
    {
        const double ratio = std::abs(1.0 - c / gamma);
        std::vector<int> mlist, nm;
        std::vector<double> dist, scaled, sep;
        int unresolved = 0;
        double worst_interval = kInf, worst_mirror = 0.0;
        int wi_m = 0;
        for (int m = Ne; m <= N; ++m) {
            int best = 1;
            double bv = kInf;
            for (int n = 1; n <= g.n_max; ++n) {
                const double v = std::abs(ratio * g.sr(n) - (1 + c) * g.sr(m));
                if (v < bv) {
                    bv = v;
                    best = n;
                }
            }
            if (best == g.n_max) {
                ++unresolved;
                continue;
            }
            const double center = gamma * (1 + c) / std::abs(gamma - c) * g.sr(m);
            const double im_margin = 0.5 - std::abs(g.sr(best) - center);
            if (im_margin < worst_interval) {
                worst_interval = im_margin;
                wi_m = m;
            }
            const ModeIndex a{m, 2};
            const ModeIndex b = slow_case ? ModeIndex{-best, 2} : ModeIndex{best, 3};
            const ModeIndex am{-m, 3};
            const ModeIndex bm = slow_case ? ModeIndex{best, 3} : ModeIndex{-best, 2};
            const double d = std::abs(g.L(a.n, a.j) - g.L(b.n, b.j));
            worst_mirror = std::max(worst_mirror, std::abs(d - std::abs(g.L(am.n, am.j) - g.L(bm.n, bm.j))));
            double s_min = kInf;
            const int other_branch = slow_case ? 2 : 3;
            for (int n = -g.n_max; n <= g.n_max; ++n) {
                if (std::abs(n) < Ne) continue;
                if (n == b.n) continue;
                if (other_branch == 2 && n == m) continue;
                s_min = std::min(s_min, std::abs(g.L(m, 2) - g.L(n, other_branch)));
            }
            mlist.push_back(m);
            nm.push_back(best);
            dist.push_back(d);
            scaled.push_back(g.rho(m) * d);
            sep.push_back(s_min);
            near_pairs.push_back({a, b});
            near_pairs.push_back({am, bm});
        }
        const std::string tag = slow_case ? "near-pair-slow" : "near-pair-fast";
        L.push_back(scalar_clause(tag + ":pairing-resolved", "n_m found strictly inside the table for every m >= N_eps",
                                  unresolved, 0.0, Sense::at_most, fmt::format("{} unresolved", unresolved)));
        int nm_min = mlist.empty() ? 0 : *std::min_element(nm.begin(), nm.end());
        L.push_back(scalar_clause(tag + ":n_m>=N_eps", "n_m >= N_eps", nm_min, Ne, Sense::at_least, ""));
        L.push_back(scalar_clause(tag + ":n_m-interval", "|rho_{n_m}^{1/2} - gamma(1+c)/|gamma-c| rho_m^{1/2}| <= 1/2",
                                  mlist.empty() ? -kInf : worst_interval, 0.0, Sense::at_least, fmt::format("m={}", wi_m)));
        L.push_back(scalar_clause(tag + ":mirror", "pair distance equals its conjugate-mirror distance", worst_mirror,
                                  1e-12, Sense::at_most, ""));
        const double upper = slow_case ? (1 - c) / 2 + 3 * epsilon : (c - 1) / 2 + 3 * epsilon;
        {
            double dmax = -kInf;
            int am = 0;
            for (std::size_t k = 0; k < dist.size(); ++k)
                if (dist[k] > dmax) {
                    dmax = dist[k];
                    am = mlist[k];
                }
            L.push_back(scalar_clause(tag + ":upper", slow_case ? "near-pair distance <= (1-c)/2 + 3 eps"
                                                                : "near-pair distance <= (c-1)/2 + 3 eps",
                                      dist.empty() ? kInf : dmax, upper, Sense::at_most,
                                      fmt::format("m={}, n_m={}", am,
                                                  dist.empty() ? 0 : nm[std::max_element(dist.begin(), dist.end()) - dist.begin()])));
        }
        L.push_back(stable_lower_clause(tag + ":lower", "rho_m * near-pair distance >= delta' > 0, stable in m", mlist, scaled));
        L.push_back(stable_lower_clause(tag + ":separation", "distance to every other same-type partner >= delta > 0", mlist, sep));
        rep.delta_prime = scaled.empty() ? 0.0 : *std::min_element(scaled.begin(), scaled.end());
        rep.delta = sep.empty() ? 0.0 : *std::min_element(sep.begin(), sep.end());
        L.back().witness += fmt::format("; proof value min(2-eps, |gamma-c|/2-2eps) = {:.6g}",
                                        std::min(2 - epsilon, std::abs(gamma - c) / 2 - 2 * epsilon));
    }

    // restatements for 1/2 < s < 1: partners found by direct distance minimization
    {
        auto& R = rep.rescaled;
        R.push_back(range_clause("restated:fast-gap", "Im lambda_{n+1}^2 - Im lambda_n^2 >= c gamma - eps, n >= N_eps", Ne, N - 1,
                                 [&](int n) { return g.im(n + 1, 2) - g.im(n, 2); },
                                 [&](int) { return c * gamma - epsilon; }, Sense::at_least));
        int start = N;
        const bool down = g.im(-N, 2) < g.im(-(N - 1), 2);
        for (int n = N - 1; n >= 1; --n) {
            const bool step_down = g.im(-(n + 1), 2) < g.im(-n, 2);
            if (step_down != down) break;
            start = n;
        }
        R.push_back(scalar_clause("restated:slow-eventually-monotone",
                                  fmt::format("Im lambda_{{-n}}^2 strictly {} from some n_0 <= N/2",
                                              down ? "decreasing" : "increasing"),
                                  start, N / 2.0, Sense::at_most, fmt::format("n_0={}", start)));
        std::vector<int> mlist;
        std::vector<double> scaled, second;
        std::string partners;
        for (int m = Ne; m <= N; ++m) {
            const cplx z = g.L(m, 2);
            double d1 = kInf, d2 = kInf;
            ModeIndex p1{};
            for (int n = -g.n_max; n <= g.n_max; ++n) {
                if (!n) continue;
                for (int j = 2; j <= 3; ++j) {
                    if (n == m && j == 2) continue;
                    const double d = std::abs(z - g.L(n, j));
                    if (d < d1) {
                        d2 = d1;
                        d1 = d;
                        p1 = {n, j};
                    } else if (d < d2) {
                        d2 = d;
                    }
                }
            }
            mlist.push_back(m);
            scaled.push_back(g.rho(m) * d1);
            second.push_back(d2);
            if (m == N) partners = fmt::format("nearest partner of ({},2) is {}", m, to_string(p1));
        }
        R.push_back(stable_lower_clause("restated:nearest-lower", "rho_m * nearest distance >= delta' > 0, stable in m", mlist, scaled));
        R.back().witness += "; " + partners;
        R.push_back(stable_lower_clause("restated:second-nearest", "second-nearest distance >= delta > 0, stable in m", mlist, second));
        rep.delta_prime_resc = scaled.empty() ? 0.0 : *std::min_element(scaled.begin(), scaled.end());
        rep.delta_resc = second.empty() ? 0.0 : *std::min_element(second.begin(), second.end());
    }

    // pair coverage over the stored modes
    {
        auto oriented = [&](const ModeIndex& m) { return ModeIndex{g.side * m.n, m.j}; };
        auto is_near = [&](const ModeIndex& a, const ModeIndex& b) {
            for (const auto& [p, q2] : near_pairs) {
                const auto pa = oriented(p), pb = oriented(q2);
                if ((a == pa && b == pb) || (a == pb && b == pa)) return true;
            }
            return false;
        };
        bool ok = true;
        for (std::size_t a = 0; a < ms.size(); ++a) {
            for (std::size_t b = a + 1; b < ms.size(); ++b) {
                ++rep.pairs_total;
                const auto& A = ms.modes[a];
                const auto& B = ms.modes[b];
                const double d = std::abs(ms.lambda[a] - ms.lambda[b]);
                if (A.j == 1 || B.j == 1) {
                    ++rep.pairs_branch1;
                    if (!(d > 0)) ok = false;
                } else if (ms.critical && ((A == ms.critical->doubled && B == ms.critical->partner) ||
                                           (B == ms.critical->doubled && A == ms.critical->partner))) {
                    ++rep.pairs_critical;
                } else if (is_near(A, B)) {
                    ++rep.pairs_near;
                    if (!(d > 0)) ok = false;
                } else {
                    ++rep.pairs_branch23;
                    if (!(d > 0)) ok = false;
                }
            }
        }
        const std::int64_t K = static_cast<std::int64_t>(ms.size());
        rep.coverage_pass = ok && rep.pairs_total == K * (K - 1) / 2 &&
                            rep.pairs_branch1 + rep.pairs_branch23 + rep.pairs_near + rep.pairs_critical == rep.pairs_total;
    }

    rep.literal_pass = std::all_of(L.begin(), L.end(), [](const ClauseResult& r) { return r.pass; });
    rep.rescaled_pass =
        std::all_of(rep.rescaled.begin(), rep.rescaled.end(), [](const ClauseResult& r) { return r.pass; });
    rep.pass = rep.literal_pass && rep.coverage_pass;
    return rep;
}

// ---------------------------------------------------------------------------------------------
// frame bounds

namespace {

Eigen::Matrix3cd b_matrix(const MovingSpectrum& ms, int n) {
    Eigen::Matrix3cd B;
    const double r = ms.rho(n);
    for (int j = 1; j <= 3; ++j) {
        const cplx l = ms.lam(n, j);
        B(0, j - 1) = 1.0;
        B(1, j - 1) = l / r;
        B(2, j - 1) = 1.0 / (l - I * (ms.c * ms.kappa(n)));
    }
    return B;
}

}  // namespace

FrameBounds frame_bounds(const MovingSpectrum& ms, double sigma, int trials, std::uint64_t seed) {
    if (trials < 100) throw std::invalid_argument("frame bounds need at least 100 trials");
    FrameBounds fb;
    fb.a1_hat = kInf;
    fb.a2_hat = 0.0;
    fb.min_abs_det = kInf;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int n = -ms.N; n <= ms.N; ++n) {
        if (!n) continue;
        const auto B = b_matrix(ms, n);
        const Eigen::Matrix3cd H = B.adjoint() * B;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(H, Eigen::EigenvaluesOnly);
        const auto ev = es.eigenvalues();
        if (n > ms.N / 2 && ev(0) > 0) {
            const double x = std::log(n), y = std::log(ev(0));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++cnt;
        }
        if (ev(0) < fb.a1_hat) {
            fb.a1_hat = ev(0);
            fb.a1_mode = n;
        }
        if (ev(2) > fb.a2_hat) {
            fb.a2_hat = ev(2);
            fb.a2_mode = n;
        }
        const cplx det = B.determinant();
        const cplx m1 = ms.mu(n, 1), m2 = ms.mu(n, 2), m3 = ms.mu(n, 3);
        const cplx closed = (m2 - m1) * (m3 - m1) * (m3 - m2) / (ms.rho(n) * m1 * m2 * m3);
        fb.min_abs_det = std::min(fb.min_abs_det, std::abs(det));
        fb.max_det_mismatch = std::max(fb.max_det_mismatch, std::abs(det - closed) / std::abs(closed));
        for (int j = 1; j <= 3; ++j)
            fb.max_psi_identity_error = std::max(
                fb.max_psi_identity_error, std::abs(B(2, j - 1) - 1.0 / ms.mu(n, j)) * std::abs(ms.mu(n, j)));
    }
    if (cnt > 1) fb.a1_decay_slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    {
        const double c = ms.c, M = ms.M;
        Eigen::Matrix3d Bt;
        Bt << 1 + c * c + 1 / (M * M), 1 + c * (c + 1), 1 + c * (c - 1), 1 + c * (c + 1), 1 + (c + 1) * (c + 1),
            1 + (c + 1) * (c - 1), 1 + c * (c - 1), 1 + (c + 1) * (c - 1), 1 + (c - 1) * (c - 1);
        const auto BN = b_matrix(ms, ms.N);
        const Eigen::Matrix3cd HN = BN.adjoint() * BN;
        fb.limit_distance = (HN - Bt.cast<cplx>()).norm();
        fb.limit_det = Bt.determinant();
        if (ms.N > 1) {
            const auto BP = b_matrix(ms, ms.N - 1);
            fb.tail_limit_distance = (HN - BP.adjoint() * BP).norm();
        }
    }
    fb.degenerate = fb.a1_hat < 1e-8;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    fb.trials = trials;
    fb.worst_lower_ratio = kInf;
    fb.worst_upper_ratio = 0.0;
    for (int t = 0; t < trials; ++t) {
        std::vector<cplx> a(ms.size());
        double asum = 0.0;
        for (auto& v : a) {
            v = {nd(rng), nd(rng)};
            asum += std::norm(v);
        }
        // X_{-sigma} norm of sum a rho^sigma Psi with plane waves of norm^2 2 on the interval
        double norm2 = 0.0;
        for (int n = -ms.N; n <= ms.N; ++n) {
            if (!n) continue;
            const double r = ms.rho(n), w = std::pow(r, sigma);
            std::array<cplx, 3> comp{};
            for (int j = 1; j <= 3; ++j) {
                const auto p = ms.psi({n, j});
                const cplx coef = a[ms.index({n, j})] * w;
                for (int k = 0; k < 3; ++k) comp[k] += coef * p[k];
            }
            norm2 += 2.0 * (std::pow(r, -2 * sigma) * std::norm(comp[0]) + std::pow(r, -2 * sigma - 2) * std::norm(comp[1]) +
                            std::pow(r, -2 * sigma) * std::norm(comp[2]));
        }
        const double lo = norm2 / (2 * fb.a1_hat * asum), hi = norm2 / (2 * fb.a2_hat * asum);
        fb.worst_lower_ratio = std::min(fb.worst_lower_ratio, lo);
        fb.worst_upper_ratio = std::max(fb.worst_upper_ratio, hi);
        if (lo >= 1.0 - 1e-12 && hi <= 1.0 + 1e-12) ++fb.trials_passed;
    }
    fb.pass = !fb.degenerate && fb.trials_passed == fb.trials && fb.min_abs_det > 0.0;
    return fb;
}

void write_lambda_csv(const std::string& path, const MovingSpectrum& ms) {
    CsvWriter w(path, {"n", "j", "re", "im", "dist_branch1", "dist_branch2", "dist_branch3"});
    for (std::size_t a = 0; a < ms.size(); ++a) {
        std::array<double, 3> d{kInf, kInf, kInf};
        for (std::size_t b = 0; b < ms.size(); ++b) {
            if (a == b) continue;
            auto& slot = d[ms.modes[b].j - 1];
            slot = std::min(slot, std::abs(ms.lambda_conv[a] - ms.lambda_conv[b]));
        }
        w.row({fmt::format("{}", ms.modes[a].n), fmt::format("{}", ms.modes[a].j), num(ms.lambda_conv[a].real()),
               num(ms.lambda_conv[a].imag()), num(d[0]), num(d[1]), num(d[2])});
    }
}

}  // namespace movctl
