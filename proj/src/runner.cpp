#include "movctl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "movctl/biorthogonal.hpp"
#include "movctl/galerkin.hpp"

namespace movctl {

namespace {

Check at_most(std::string name, double value, double bound, bool gating = true) {
    return {std::move(name), value, bound, "at_most", value <= bound, gating};
}

Check flag(std::string name, bool ok, bool gating = true) {
    return {std::move(name), ok ? 1.0 : 0.0, 1.0, "flag", ok, gating};
}

// state shared along one stage chain
struct Context {
    explicit Context(const RunConfig& c) : cfg(c), out(c.out) {}

    const RunConfig& cfg;
    std::string out;
    std::optional<EigenvalueTable> table;
    double T = 0.0;
    std::optional<MovingSpectrum> ms;
    std::optional<InitialData> data;
    std::optional<MomentSystem> msys;
    std::optional<GramReport> gram;
    std::optional<ControlField> control;
    json summary = json::object();

    std::string dir(const std::string& name) const {
        const std::string d = join_path(out, name);
        ensure_directory(d);
        return d;
    }

    const MovingSpectrum& spectrum() {
        if (!ms) ms = build_moving_spectrum(*table, MemoryCoefficient(cfg.M), cfg.c, cfg.N);
        return *ms;
    }
};

void stage_spectrum(Context& ctx, StageResult& st) {
    const RunConfig& cfg = ctx.cfg;
    ctx.table = build_eigenvalue_table(FractionalOrder(cfg.s), cfg.table_size, cfg.backend);
    const EigenvalueTable& t = *ctx.table;
    const MemoryCoefficient M(cfg.M);
    const auto triples = solve_table(t, M);
    double worst = 0.0;
    for (const auto& tr : triples)
        for (int j = 1; j <= 3; ++j)
            worst = std::max(worst, tr.residual(j, cfg.M) / cubic_residual_scale(tr.rho, cfg.M));
    const Mu1Monotone mono = verify_mu1_monotone(t, M);
    const Mu1Asymptotics asym = verify_mu1_asymptotics(t, M);

    st.checks.push_back(flag("gap_certified", t.gap_certified));
    st.checks.push_back(at_most("cubic_residual", worst, 1e-10));
    st.checks.push_back(flag("mu1_monotone", mono.increasing));
    st.checks.push_back(flag("mu1_bounds", mono.lower_ok && mono.upper_ok));
    st.checks.push_back(flag("mu1_remainder_rho2", asym.pass_rho2, false));
    st.checks.push_back(flag("mu1_remainder_n4", asym.pass_n4, false));
    st.report = {{"s", t.s},
                 {"backend", to_string(t.backend)},
                 {"n_max", t.n_max},
                 {"gap_gamma", t.gap_gamma},
                 {"gap_threshold", t.gap_threshold},
                 {"resolved_n", t.resolved_n},
                 {"max_residual", t.max_residual},
                 {"cubic_residual", worst},
                 {"mu1_first_violation", mono.first_violation},
                 {"mu1_lower_bound", mono.lower_bound},
                 {"mu1_slope", asym.slope},
                 {"mu1_fitted_C_n4", asym.fitted_C_n4},
                 {"mu1_spread_n4", asym.spread_n4},
                 {"mu1_fitted_C_rho2", asym.fitted_C_rho2},
                 {"mu1_spread_rho2", asym.spread_rho2}};
    if (t.backend == EigenBackend::discretized) {
        const auto ref = build_eigenvalue_table(FractionalOrder(cfg.s), cfg.table_size, EigenBackend::asymptotic);
        const BackendAgreement ag = compare_backends(ref, t);
        st.checks.push_back(flag("backend_agreement", ag.within_tol, false));
        st.report["backend_fitted_C"] = ag.fitted_C;
        st.report["backend_max_rel_low"] = ag.max_rel_low;
        st.report["backend_flagged"] = ag.flagged.size();
    }
    const std::string d = ctx.dir("spectrum");
    write_table_csv(join_path(d, "eigenvalues.csv"), t);
    write_triples_csv(join_path(d, "triples.csv"), triples, cfg.M);

    ctx.T = cfg.horizon(t.gap_gamma);
    if (!(ctx.T > cfg.threshold(t.gap_gamma)) && !cfg.allow_short_horizon && ctx.cfg.s > 0.5)
        throw ConfigError(fmt::format("T = {} is not above the threshold {} for the table gap {}", ctx.T,
                                      cfg.threshold(t.gap_gamma), t.gap_gamma));
    ctx.summary["gamma"] = t.gap_gamma;
    ctx.summary["T"] = ctx.T;
}

void stage_gaps(Context& ctx, StageResult& st) {
    const MovingSpectrum& ms = ctx.spectrum();
    const GapReport rep = gap_diagnostics(ms);
    const FrameBounds fb = frame_bounds(ms, 0.0, 200, ctx.cfg.seed);
    int literal_failed = 0, rescaled_failed = 0;
    for (const auto& c : rep.literal) literal_failed += !c.pass;
    for (const auto& c : rep.rescaled) rescaled_failed += !c.pass;
    st.checks.push_back(flag("pair_coverage", rep.coverage_pass));
    st.checks.push_back(at_most("restated_clauses_failed", rescaled_failed, 0));
    st.checks.push_back(at_most("literal_clauses_failed", literal_failed, 0, false));
    st.checks.push_back(flag("frame_sandwich", fb.pass));
    if (ms.critical)
        st.checks.push_back(at_most("double_eigenvalue", ms.critical->collision_distance, 1e-9));
    st.report = rep.to_json();
    st.report["frame"] = {{"a1_hat", fb.a1_hat},
                          {"a2_hat", fb.a2_hat},
                          {"a1_mode", fb.a1_mode},
                          {"a2_mode", fb.a2_mode},
                          {"a1_decay_slope", fb.a1_decay_slope},
                          {"min_abs_det", fb.min_abs_det},
                          {"max_det_mismatch", fb.max_det_mismatch},
                          {"max_psi_identity_error", fb.max_psi_identity_error},
                          {"limit_distance", fb.limit_distance},
                          {"limit_det", fb.limit_det},
                          {"tail_limit_distance", fb.tail_limit_distance},
                          {"trials", fb.trials},
                          {"trials_passed", fb.trials_passed},
                          {"worst_lower_ratio", fb.worst_lower_ratio},
                          {"worst_upper_ratio", fb.worst_upper_ratio}};
    if (ms.critical)
        st.report["critical"] = {{"n_c", ms.critical->n_c},
                                 {"velocity", ms.critical->velocity},
                                 {"doubled", to_string(ms.critical->doubled)},
                                 {"partner", to_string(ms.critical->partner)},
                                 {"collision_distance", ms.critical->collision_distance}};
    const std::string d = ctx.dir("gaps");
    write_lambda_csv(join_path(d, "lambda.csv"), ms);
    write_json(join_path(d, "gaps.json"), st.report);
}

void stage_biorthogonal(Context& ctx, StageResult& st) {
    const RunConfig& cfg = ctx.cfg;
    const MovingSpectrum ms = build_moving_spectrum(*ctx.table, MemoryCoefficient(cfg.M), cfg.c, cfg.N_biorthogonal);
    const ProductFunction pf = build_product(ms);
    const ProductReport pr = verify_product_properties(pf);
    BiorthogonalOptions opt;
    opt.allow_short_horizon = cfg.allow_short_horizon;
    const BiorthogonalFamily bf = build_biorthogonal(pf, ctx.T, opt);
    const LowerSummation ls = verify_lower_summation(bf, 200, 50, cfg.seed);

    st.checks.push_back(flag("product_type", pr.type_pass));
    st.checks.push_back(flag("derivative_envelope", pr.C2_pass));
    st.checks.push_back(at_most("biorthogonality_closed", bf.closed_residual, cfg.tol_biorthogonal));
    st.checks.push_back(at_most("biorthogonality_quadrature", bf.quad_residual, cfg.tol_biorthogonal));
    st.checks.push_back(flag("norm_constant_finite", std::isfinite(bf.C_hat) && bf.C_hat > 0.0));
    st.checks.push_back(flag("lower_summation", ls.pass));
    if (bf.conjugation_error >= 0.0) st.checks.push_back(at_most("conjugation", bf.conjugation_error, 1e-8));
    st.checks.push_back(flag("product_strip_bound", pr.strip_pass, false));
    st.checks.push_back(flag("product_envelope", pr.envelope_pass, false));
    st.report = {{"product", pr.to_json()},
                 {"R_modes", pf.R_modes()},
                 {"excluded_radius", pf.excluded_radius()},
                 {"family", bf.manifest()},
                 {"lower_summation",
                  {{"C_hat", ls.C_hat},
                   {"trials", ls.trials},
                   {"passed", ls.passed},
                   {"min_margin", ls.min_margin},
                   {"single_mode_margin", ls.single_mode_margin},
                   {"adversarial_margin", ls.adversarial_margin},
                   {"adversarial_pair", {to_string(ls.adversarial_pair.first), to_string(ls.adversarial_pair.second)}},
                   {"adversarial_smallest", ls.adversarial_smallest}}}};
    write_theta_csv(ctx.dir("biorthogonal"), bf);
    ctx.summary["biorthogonal_residual"] = bf.quad_residual;
    ctx.summary["theta_C_hat"] = bf.C_hat;
}

void stage_control(Context& ctx, StageResult& st) {
    const RunConfig& cfg = ctx.cfg;
    const MovingSpectrum& ms = ctx.spectrum();
    ctx.data = InitialData::random(ms, cfg.seed, cfg.sigma0, cfg.sigma1);
    ctx.msys = assemble_moments(*ctx.data, ms);
    ctx.gram = assemble_gram(ms, cfg.omega0, ctx.T);
    ctx.control = synthesize_control(*ctx.msys, ms, *ctx.gram, cfg.omega0, ctx.T);
    const ControlField& u = *ctx.control;
    const double quad = moment_residual_quadrature(u, *ctx.msys);
    const ObservabilityReport ob = certify_observability(ms, *ctx.gram, cfg.observability_trials, cfg.seed + 1);

    st.checks.push_back(at_most("moment_residual", u.relative_residual, cfg.tol_moments));
    st.checks.push_back(at_most("moment_residual_quadrature", quad, 100 * cfg.tol_moments));
    st.checks.push_back(flag("observability", ob.pass));
    st.checks.push_back(flag("direct_solve", !u.fallback, false));
    st.checks.push_back(flag("adversarial_is_min", ob.adversarial_is_min, false));
    st.report = {{"gram_hermitian_error", ctx.gram->hermitian_error},
                 {"gram_min_eig_rel", ctx.gram->min_eig_rel},
                 {"moment_residual_quadrature", quad},
                 {"data_norm", ctx.data->weighted_norm(ms)},
                 {"control", u.to_json()},
                 {"observability", ob.to_json()}};
    st.report["control"].erase("coefficients");
    const std::string d = ctx.dir("control");
    write_control_json(join_path(d, "control.json"), u);
    write_control_grid_csv(join_path(d, "control_grid.csv"), u, 101, 61);
    write_json(join_path(d, "observability.json"), ob.to_json());

    ctx.summary["observability_C"] = ob.C_exact;
    ctx.summary["control_norm"] = u.norm;
    ctx.summary["cond_raw"] = u.cond_raw;
    ctx.summary["cond_rho"] = u.cond_rho;
    ctx.summary["cond_jacobi"] = u.cond_jacobi;
    ctx.summary["moment_residual"] = u.relative_residual;
}

void stage_simulate(Context& ctx, StageResult& st) {
    const RunConfig& cfg = ctx.cfg;
    const MovingSpectrum& ms = ctx.spectrum();
    const InitialData& data = *ctx.data;
    const ControlField& u = *ctx.control;
    const GalerkinModel model(ms, cfg.omega0);
    const TerminalReport moving = model.run_to_T(data, &u, ctx.T, 1, Frame::moving, cfg.tol_terminal);
    const TerminalReport fixed = model.run_to_T(data, &u, ctx.T, 1, Frame::fixed, cfg.tol_terminal);
    const TerminalReport free_run = model.run_to_T(data, nullptr, ctx.T, 1, Frame::moving, cfg.tol_terminal);

    std::mt19937_64 rng(cfg.seed + 2);
    std::normal_distribution<double> g;
    std::vector<std::vector<cplx>> adjoints(static_cast<std::size_t>(cfg.duality_trials), std::vector<cplx>(ms.size()));
    for (auto& b : adjoints)
        for (auto& v : b) v = {g(rng), g(rng)};
    double duality = 0.0;
    for (const auto& r : verify_duality(data, u, ms, adjoints, ctx.T)) duality = std::max(duality, r.relative);

    const PlaneWaveGram pw = plane_wave_gram(ms);
    json fixed_support = json::array();
    for (int n : {std::max(1, cfg.N / 4), std::max(1, cfg.N / 2), cfg.N}) {
        const FixedSupportPoint p = fixed_support_diagnostic(*ctx.table, MemoryCoefficient(cfg.M), ctx.T, cfg.omega0, n,
                                                             cfg.seed);
        fixed_support.push_back({{"N", p.N},
                                 {"control_norm", p.control_norm},
                                 {"cond_jacobi", p.cond_jacobi},
                                 {"fallback", p.fallback},
                                 {"moment_residual", p.moment_residual},
                                 {"rel_xi", p.rel_xi},
                                 {"rel_xi_dot", p.rel_xi_dot},
                                 {"rel_zeta", p.rel_zeta}});
    }
    const auto traj = trajectory(model, data, &u, ctx.T, cfg.trajectory_samples);
    const auto free_traj = trajectory(model, data, nullptr, ctx.T, cfg.trajectory_samples);

    st.checks.push_back(at_most("terminal_xi", moving.rel_xi, cfg.tol_terminal));
    st.checks.push_back(at_most("terminal_xi_dot", moving.rel_xi_dot, cfg.tol_terminal));
    st.checks.push_back(at_most("terminal_zeta", moving.rel_zeta, cfg.tol_terminal));
    st.checks.push_back(flag("terminal_fixed_frame", fixed.pass));
    st.checks.push_back(at_most("duality", duality, cfg.tol_duality));
    st.report = {{"terminal", moving.to_json()},
                 {"terminal_fixed_frame", fixed.to_json()},
                 {"uncontrolled", free_run.to_json()},
                 {"duality_worst", duality},
                 {"duality_trials", cfg.duality_trials},
                 {"plane_wave_gram",
                  {{"deviation", pw.deviation},
                   {"first_offdiag", pw.first_offdiag},
                   {"hermitian_error", pw.hermitian_error},
                   {"condition", pw.condition}}},
                 {"fixed_support", fixed_support},
                 {"energy_growth_controlled", energy_growth_rate(traj)},
                 {"energy_growth_uncontrolled", energy_growth_rate(free_traj)}};
    const std::string d = ctx.dir("simulate");
    write_json(join_path(d, "terminal.json"), moving.to_json());
    write_trajectory_csv(join_path(d, "trajectory.csv"), traj);
    write_trajectory_csv(join_path(d, "trajectory_uncontrolled.csv"), free_traj);

    ctx.summary["rel_xi"] = moving.rel_xi;
    ctx.summary["rel_xi_dot"] = moving.rel_xi_dot;
    ctx.summary["rel_zeta"] = moving.rel_zeta;
    ctx.summary["duality"] = duality;
}

using Stage = std::pair<const char*, std::function<void(Context&, StageResult&)>>;

std::vector<Stage> chain(Pipeline p) {
    const Stage spectrum{"spectrum", stage_spectrum}, gaps{"gaps", stage_gaps},
        bio{"biorthogonal", stage_biorthogonal}, control{"control", stage_control},
        simulate{"simulate", stage_simulate};
    switch (p) {
        case Pipeline::spectrum: return {spectrum};
        case Pipeline::gaps: return {spectrum, gaps};
        case Pipeline::biorthogonal: return {spectrum, bio};
        case Pipeline::control: return {spectrum, control};
        case Pipeline::simulate: return {spectrum, control, simulate};
        case Pipeline::full: return {spectrum, bio, control, simulate};
        case Pipeline::verify_all: return {spectrum, gaps, bio, control, simulate};
    }
    return {};
}

json check_json(const Check& c) {
    return {{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"sense", c.sense}, {"pass", c.pass},
            {"gating", c.gating}};
}

}  // namespace

std::string to_string(Pipeline p) {
    switch (p) {
        case Pipeline::spectrum: return "spectrum";
        case Pipeline::gaps: return "gaps";
        case Pipeline::biorthogonal: return "biorthogonal";
        case Pipeline::control: return "control";
        case Pipeline::simulate: return "simulate";
        case Pipeline::full: return "full";
        case Pipeline::verify_all: return "verify-all";
    }
    return "?";
}

Pipeline parse_pipeline(std::string_view name) {
    for (Pipeline p : {Pipeline::spectrum, Pipeline::gaps, Pipeline::biorthogonal, Pipeline::control,
                       Pipeline::simulate, Pipeline::full, Pipeline::verify_all})
        if (name == to_string(p)) return p;
    throw ConfigError(fmt::format("unknown pipeline '{}'", name));
}

bool StageResult::pass() const {
    if (!error.empty()) return false;
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass || !c.gating; });
}

json StageResult::to_json() const {
    json j;
    j["name"] = name;
    j["pass"] = pass();
    if (!error.empty()) j["error"] = error;
    json cs = json::array();
    for (const auto& c : checks) cs.push_back(check_json(c));
    j["checks"] = cs;
    j["report"] = report;
    return j;
}

RunResult run_pipeline(const RunConfig& cfg, Pipeline p) {
    validate(cfg, p == Pipeline::spectrum ? ConfigScope::spectrum : ConfigScope::control);
    ensure_directory(cfg.out);
    Context ctx(cfg);
    RunResult res;
    res.pipeline = p;
    res.out_dir = cfg.out;
    bool aborted = false;
    for (const auto& [name, fn] : chain(p)) {
        StageResult st;
        st.name = name;
        if (aborted) {
            st.error = "skipped after an upstream error";
        } else {
            try {
                fn(ctx, st);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                st.error = e.what();
                aborted = true;
            }
        }
        res.stages.push_back(std::move(st));
    }

    for (const auto& st : res.stages) {
        if (!st.error.empty()) res.failing.push_back(fmt::format("{}/error: {}", st.name, st.error));
        for (const auto& c : st.checks)
            if (c.gating && !c.pass) res.failing.push_back(fmt::format("{}/{}", st.name, c.name));
    }
    res.pass = res.failing.empty();
    const double gamma = ctx.table ? ctx.table->gap_gamma : kHalfPi;
    res.short_horizon = p != Pipeline::spectrum && cfg.short_horizon(gamma);
    res.summary = ctx.summary;

    json& m = res.manifest;
    m["tool"] = "movctl";
    m["version"] = MOVCTL_VERSION;
    m["pipeline"] = to_string(p);
    m["config_hash"] = fmt::format("{:016x}", cfg.hash());
    m["config"] = cfg.to_json();
    m["T"] = cfg.horizon(gamma);
    m["threshold"] = cfg.threshold(gamma);
    if (res.short_horizon)
        m["watermark"] = fmt::format("short horizon: T = {} is not above the threshold {}", cfg.horizon(gamma),
                                     cfg.threshold(gamma));
    json stages = json::array();
    for (const auto& st : res.stages) stages.push_back(st.to_json());
    m["stages"] = stages;
    m["failing"] = res.failing;
    m["pass"] = res.pass;
    write_json(join_path(cfg.out, "manifest.json"), m);
    if (res.short_horizon) {
        std::ofstream w(join_path(cfg.out, "WATERMARK.txt"));
        w << m["watermark"].get<std::string>() << '\n';
    }
    return res;
}

SweepResult sweep(const RunConfig& cfg, std::string_view parameter, const std::vector<double>& values, Pipeline p,
                  int threads) {
    static const std::vector<std::string> allowed = {"c", "T", "N", "M", "s"};
    if (std::find(allowed.begin(), allowed.end(), parameter) == allowed.end())
        throw ConfigError(fmt::format("cannot sweep '{}'; choose one of c, T, N, M, s", parameter));
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    SweepResult out;
    out.parameter = std::string(parameter);
    out.rows.resize(values.size());
    const std::string base = join_path(cfg.out, fmt::format("sweep_{}", parameter));
    ensure_directory(base);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < values.size(); k = next++) {
            SweepRow& row = out.rows[k];
            row.value = values[k];
            try {
                RunConfig run = cfg;
                if (parameter == "N" && values[k] != std::round(values[k]))
                    throw ConfigError(fmt::format("N = {} is not an integer", values[k]));
                set_config_value(run, parameter,
                                 parameter == "N" ? std::to_string(static_cast<int>(values[k])) : num(values[k]));
                run.out = join_path(base, std::to_string(k));
                const RunResult r = run_pipeline(run, p);
                row.status = r.pass ? "pass" : "fail";
                row.summary = r.summary;
                row.summary["short_horizon"] = r.short_horizon;
                for (const auto& f : r.failing) row.detail += (row.detail.empty() ? "" : "; ") + f;
            } catch (const std::exception& e) {
                row.status = "error";
                row.detail = e.what();
            }
        }
    };
    const int n = std::max(1, std::min<int>(threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency()),
                                            static_cast<int>(values.size())));
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    static const std::vector<std::string> cols = {"gamma",       "T",          "observability_C", "control_norm",
                                                  "cond_raw",    "cond_rho",   "cond_jacobi",     "moment_residual",
                                                  "rel_xi",      "rel_xi_dot", "rel_zeta",        "duality"};
    std::vector<std::string> header = {"parameter", "value", "status", "short_horizon"};
    header.insert(header.end(), cols.begin(), cols.end());
    header.push_back("detail");
    out.csv_path = join_path(cfg.out, fmt::format("sweep_{}.csv", parameter));
    CsvWriter csv(out.csv_path, header);
    for (const auto& row : out.rows) {
        std::vector<std::string> f = {out.parameter, num(row.value), row.status,
                                      row.summary.is_object() && row.summary.value("short_horizon", false) ? "true" : "false"};
        for (const auto& c : cols)
            f.push_back(row.summary.contains(c) && row.summary[c].is_number() ? num(row.summary[c].get<double>()) : "");
        std::string detail = row.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        std::replace(detail.begin(), detail.end(), '\n', ' ');
        f.push_back(detail);
        csv.row(f);
    }
    return out;
}

}  // namespace movctl
