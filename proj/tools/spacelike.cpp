// Command-line front end: scenario config -> domain -> solve -> reconstruct -> verify.

#include "spacelike/reconstruct.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace spacelike;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

enum Exit { ok = 0, check_failure = 1, config_failure = 2, internal_failure = 3 };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string config, out = "runs", report, kind;
    std::optional<std::uint64_t> seed;
    std::optional<double> spacing;
    std::optional<int> max_iter;
    bool strict = false, allow_large = false;
};

/// Verification sample sizes and tolerances; every field has a default.
struct VerifyParams {
    std::size_t curvature_points = 50;
    double curvature_radius = 5, min_depth = 0.2, curvature_tol = 1e-2;
    std::vector<double> gap_radii{10, 30, 100, 300, 1000};
    double gap_tol = 1e-2;
    std::size_t gauss_samples = 1000;
    double gauss_radius = 50, gauss_tol = 1e-3;
    std::optional<double> coverage_bound;
    std::size_t sandwich_points = 200;
    double sandwich_radius = 15;
    std::vector<double> pogorelov_levels{5, 10, 20};
    std::size_t pogorelov_points = 400;
    double pogorelov_radius = 25;
    std::optional<double> pogorelov_bound;
    double hyperboloid_tol = 1e-6;
    double ode_tol = 1e-8, entry_tol = 1e-3, trough_curvature_tol = 1e-4;
    std::size_t barrier_points = 40;
    double barrier_radius = 20;
    double cutoff_lambda = 0.5, cutoff_r0 = 25, cutoff_r1 = 1100, cutoff_spacing = 0;
};

struct Scenario {
    std::string name = "scenario";
    std::optional<barrier::CapDomain> domain;
    int n = 3, k = 2;
    std::vector<int> J{4, 8, 16};
    double spacing = 0.02, tol = 1e-8;
    int max_iter = 30;
    std::string boundary = "barrier";  // or "hyperboloid" (ball of the full-sphere radius)
    std::uint64_t seed = 7;
    VerifyParams verify;
    json source;
};

template <class T>
void read(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& dst) {
    if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

Scenario parse_scenario(const json& j, const Flags& flags) {
    Scenario s;
    s.source = j;
    try {
        read(j, "name", s.name);
        read(j, "n", s.n);
        read(j, "k", s.k);
        read(j, "seed", s.seed);
        if (j.contains("domain")) s.domain = barrier::CapDomain::from_json(j.at("domain"));
        if (j.contains("solver")) {
            const auto& q = j.at("solver");
            read(q, "J", s.J);
            read(q, "grid_spacing", s.spacing);
            read(q, "tol", s.tol);
            read(q, "max_iter", s.max_iter);
            read(q, "boundary", s.boundary);
        }
        if (j.contains("verify")) {
            const auto& v = j.at("verify");
            auto& p = s.verify;
            read(v, "curvature_points", p.curvature_points);
            read(v, "curvature_radius", p.curvature_radius);
            read(v, "min_depth", p.min_depth);
            read(v, "curvature_tol", p.curvature_tol);
            read(v, "gap_radii", p.gap_radii);
            read(v, "gap_tol", p.gap_tol);
            read(v, "gauss_samples", p.gauss_samples);
            read(v, "gauss_radius", p.gauss_radius);
            read(v, "gauss_tol", p.gauss_tol);
            read(v, "coverage_bound", p.coverage_bound);
            read(v, "sandwich_points", p.sandwich_points);
            read(v, "sandwich_radius", p.sandwich_radius);
            read(v, "pogorelov_levels", p.pogorelov_levels);
            read(v, "pogorelov_points", p.pogorelov_points);
            read(v, "pogorelov_radius", p.pogorelov_radius);
            read(v, "pogorelov_bound", p.pogorelov_bound);
            read(v, "hyperboloid_tol", p.hyperboloid_tol);
            read(v, "ode_tol", p.ode_tol);
            read(v, "entry_tol", p.entry_tol);
            read(v, "trough_curvature_tol", p.trough_curvature_tol);
            read(v, "barrier_points", p.barrier_points);
            read(v, "barrier_radius", p.barrier_radius);
            read(v, "cutoff_lambda", p.cutoff_lambda);
            read(v, "cutoff_r0", p.cutoff_r0);
            read(v, "cutoff_r1", p.cutoff_r1);
            read(v, "cutoff_spacing", p.cutoff_spacing);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const barrier::ParameterError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (flags.seed) s.seed = *flags.seed;
    if (flags.spacing) s.spacing = *flags.spacing;
    if (flags.max_iter) s.max_iter = *flags.max_iter;
    if (s.domain && s.domain->n != s.n) throw ConfigError("config: domain dimension differs from n");
    if (!(1 <= s.k && s.k <= s.n)) throw ConfigError("config: need 1 <= k <= n");
    if (s.n < 2) throw ConfigError("config: need n >= 2");
    if (s.n > 4 && !flags.allow_large) throw ConfigError("config: n > 4 needs --allow-large");
    if (!(s.spacing > 0)) throw ConfigError("config: grid_spacing must be positive");
    if (!(s.tol > 0)) throw ConfigError("config: tol must be positive");
    if (s.max_iter < 0) throw ConfigError("config: max_iter must be nonnegative");
    if (s.J.empty()) throw ConfigError("config: empty J list");
    for (std::size_t i = 0; i < s.J.size(); ++i)
        if (s.J[i] < 1 || (i > 0 && s.J[i] <= s.J[i - 1])) throw ConfigError("config: J must be positive and increasing");
    if (s.boundary != "barrier" && s.boundary != "hyperboloid") throw ConfigError("config: boundary must be barrier or hyperboloid");
    if (s.verify.gap_radii.size() < 3) throw ConfigError("config: gap_radii needs at least three radii");
    if (s.verify.gauss_samples < 1000) throw ConfigError("config: gauss_samples must be >= 1000");
    return s;
}

Scenario load_scenario(const Flags& flags, bool needs_domain) {
    json j = json::object();
    if (!flags.config.empty()) {
        std::ifstream in(flags.config);
        if (!in) throw ConfigError("config: cannot open " + flags.config);
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    } else if (needs_domain) {
        throw ConfigError("config: --config is required for this subcommand");
    }
    auto s = parse_scenario(j, flags);
    if (needs_domain && !s.domain) throw ConfigError("config: missing domain");
    return s;
}

/// Check registry: asserted checks decide the exit code, report-only checks are recorded.
class Checks {
public:
    explicit Checks(bool strict) : strict_(strict) {}

    void assert_le(const std::string& name, double value, double bound, json extra = json::object()) {
        add(name, value, bound, value <= bound, "asserted", std::move(extra));
    }
    void assert_lt(const std::string& name, double value, double bound, json extra = json::object()) {
        add(name, value, bound, value < bound, "asserted", std::move(extra));
    }
    void assert_gt(const std::string& name, double value, double bound, json extra = json::object()) {
        add(name, value, bound, value > bound, "asserted", std::move(extra));
    }
    void assert_true(const std::string& name, bool holds, json extra = json::object()) {
        extra["holds"] = holds;
        push(name, holds ? "pass" : "fail", std::move(extra));
        if (!holds) failed_.push_back(name);
    }
    /// Report-only diagnostic; with --strict and a bound it becomes an assertion.
    void report(const std::string& name, double value, std::optional<double> bound, json extra = json::object()) {
        if (strict_ && bound) {
            add(name, value, *bound, value <= *bound, "asserted (strict)", std::move(extra));
            return;
        }
        extra["value"] = value;
        if (bound) extra["bound"] = *bound;
        push(name, "report-only", std::move(extra));
    }
    void skipped(const std::string& name, const std::string& reason) { push(name, "skipped", {{"reason", reason}}); }

    [[nodiscard]] const json& list() const { return list_; }
    [[nodiscard]] const std::vector<std::string>& failed() const { return failed_; }

private:
    void add(const std::string& name, double value, double bound, bool pass, const char* mode, json extra) {
        extra["value"] = value;
        extra["bound"] = bound;
        extra["mode"] = mode;
        push(name, pass ? "pass" : "fail", std::move(extra));
        if (!pass) failed_.push_back(name);
    }
    void push(const std::string& name, const char* status, json extra) {
        extra["name"] = name;
        extra["status"] = status;
        list_.push_back(std::move(extra));
    }

    bool strict_;
    json list_ = json::array();
    std::vector<std::string> failed_;
};

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// Plot table stored in the report so `plotdata` can re-emit it.
json table(std::vector<std::string> columns) { return {{"columns", std::move(columns)}, {"rows", json::array()}}; }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

void write_table_csv(const json& t, const fs::path& path) {
    std::ofstream os(path);
    os.precision(17);
    const auto& cols = t.at("columns");
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c].get<std::string>();
    os << "\n";
    for (const auto& row : t.at("rows")) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            os << (c ? "," : "");
            if (row[c].is_string())
                os << row[c].get<std::string>();
            else
                os << row[c].get<double>();
        }
        os << "\n";
    }
}

/// Run directory named by command, scenario and a hash of the effective inputs.
class RunDir {
public:
    RunDir(const std::string& out, const std::string& command, const Scenario& s) {
        json key{{"command", command}, {"config", s.source}, {"seed", s.seed}, {"spacing", s.spacing}, {"max_iter", s.max_iter}};
        dir_ = fs::path(out) / (command + "-" + s.name + "-" + hex(fnv1a(key.dump())).substr(0, 12));
        fs::create_directories(dir_);
    }

    [[nodiscard]] const fs::path& path() const { return dir_; }

    void add(const std::string& file) { files_.push_back(file); }

    void write_json(const std::string& file, const json& j) {
        std::ofstream(dir_ / file) << j.dump(2) << "\n";
        add(file);
    }

    void finish(const std::string& command) {
        json m{{"command", command}, {"files", json::array()}};
        for (const auto& f : files_) {
            std::ifstream in(dir_ / f, std::ios::binary);
            const std::string body((std::istreambuf_iterator<char>(in)), {});
            m["files"].push_back({{"name", f}, {"bytes", body.size()}, {"fnv1a", hex(fnv1a(body))}});
        }
        std::ofstream(dir_ / "manifest.json") << m.dump(2) << "\n";
    }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

std::vector<Vec> box_points(int n, double radius, std::size_t count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-radius, radius);
    std::vector<Vec> out;
    for (std::size_t s = 0; s < count; ++s) {
        Vec x(n);
        for (int a = 0; a < n; ++a) x(a) = U(rng);
        out.push_back(x);
    }
    return out;
}

// ---------------------------------------------------------------- semitrough

void cmd_semitrough(const Scenario& s, Checks& checks, json& report, RunDir& run) {
    const int n = s.n;
    const auto P = barrier::make_profiles(n);
    json profiles = json::array();
    json curves = table({"type", "t", "f", "fprime"});
    json gaps = table({"type", "direction", "r", "gap"});
    for (const auto& [c, prof] : {std::pair{trough::Curvature::mean, P.mean}, std::pair{trough::Curvature::gauss, P.gauss}}) {
        const std::string tag = trough::to_string(c);
        json md = prof->metadata();
        md["ode_residual"] = prof->ode_residual;
        md["entry_gap"] = prof->entry_gap;
        profiles.push_back(md);
        checks.assert_lt(tag + ".ode_residual", prof->ode_residual, s.verify.ode_tol);
        checks.assert_lt(tag + ".entry_gap", prof->entry_gap, s.verify.entry_tol, {{"t_min", prof->t_min}});

        const trough::Trough z(prof, {Vec::Unit(n, 0), std::numbers::pi / 2});
        std::mt19937_64 rng(s.seed);
        double worst = 0;
        Vec witness = Vec::Zero(n);
        for (const auto& y : box_points(n, 6, 100, rng)) {
            Vec grad;
            (void)z.standard(y, &grad);
            const auto gq = geom::graph_quantities(grad, z.standard_hessian(y));
            const double r = std::abs(symk::sigma(gq.kappa, trough::curvature_order(c, n)) - trough::curvature_value(c, n));
            if (r > worst) {
                worst = r;
                witness = y;
            }
        }
        checks.assert_lt(tag + ".curvature_residual", worst, s.verify.trough_curvature_tol, {{"witness", to_json(witness)}});

        const auto fwd = trough::asymptotic_gap(z, Vec::Unit(n, 0), s.verify.gap_radii);
        const auto back = trough::asymptotic_gap(z, -Vec::Unit(n, 0), s.verify.gap_radii);
        for (std::size_t i = 0; i < fwd.size(); ++i) {
            gaps["rows"].push_back({tag, "exit", s.verify.gap_radii[i], fwd[i]});
            gaps["rows"].push_back({tag, "entry", s.verify.gap_radii[i], back[i]});
        }
        checks.assert_lt(tag + ".exit_gap", fwd.back(), s.verify.gap_tol);
        checks.assert_lt(tag + ".entry_asymptote", std::abs(back.back() - prof->level()), s.verify.gap_tol + prof->entry_gap);

        const std::string file = "profile_" + tag + ".csv";
        std::ofstream os(run.path() / file);
        prof->write_csv(os);
        run.add(file);
        for (std::size_t i = 0; i < prof->t.size(); i += 100) curves["rows"].push_back({tag, prof->t[i], prof->f[i], prof->fp[i]});
    }
    bool ordered = true;
    for (double t : P.mean->t) ordered = ordered && P.mean->value(t) > P.gauss->value(t);
    checks.assert_true("profile_ordering", ordered);
    report["profiles"] = profiles;
    report["plotdata"] = {{"profiles", curves}, {"asymptotics", gaps}};
}

// ---------------------------------------------------------------- barriers

bool covers_sphere(const barrier::CapDomain& F) {
    for (const auto& th : barrier::sphere_mesh(F.n, 2000))
        if (!F.contains(th)) return false;
    return true;
}

void cmd_barriers(const Scenario& s, Checks& checks, json& report) {
    const auto& F = *s.domain;
    const int n = s.n;
    const auto P = barrier::make_profiles(n);
    const auto lo = barrier::lower_barrier(F, P.gauss, barrier::default_cap_samples(n));
    std::optional<barrier::BarrierFunction> up;
    if (!covers_sphere(F)) up = barrier::upper_barrier(F, P.mean, barrier::default_cap_samples(n));

    std::mt19937_64 rng(s.seed);
    const auto pts = box_points(n, s.verify.barrier_radius, s.verify.barrier_points, rng);
    double above_support = std::numeric_limits<double>::infinity(), gap = std::numeric_limits<double>::infinity();
    double grad = 0, below_hyp = std::numeric_limits<double>::infinity();
    for (const auto& x : pts) {
        const double l = lo.value(x);
        above_support = std::min(above_support, l - F.support(x));
        const auto j = geom::fd_jet([&](const Vec& y) { return lo.value(y); }, x, 1e-4);
        grad = std::max(grad, j.grad.norm());
        if (up) {
            const double u = up->value(x);
            gap = std::min(gap, u - l);
            below_hyp = std::min(below_hyp, std::sqrt(1 + x.squaredNorm()) - u);
        }
    }
    checks.assert_gt("lower.above_support", above_support, 0.0);
    checks.assert_lt("lower.spacelike", grad, 1.0);
    if (up) {
        checks.assert_gt("upper_minus_lower", gap, 0.0);
        checks.assert_gt("hyperboloid_minus_upper", below_hyp, -1e-12);
    } else {
        checks.skipped("upper_minus_lower", "F covers the sphere: no circumscribed cap of radius <= pi - delta0");
        checks.skipped("hyperboloid_minus_upper", "F covers the sphere");
    }
    json blow = table({"direction", "limit", "support", "monotone"});
    for (std::size_t c = 0; c < F.caps.size(); ++c) {
        const Vec th = F.caps[c].center;
        const auto b = barrier::blowdown([&](const Vec& x) { return lo.value(x); }, th, {100, 300, 1000, 3000});
        blow["rows"].push_back({static_cast<double>(c), b.limit, F.support(th), b.monotone ? 1.0 : 0.0});
        checks.assert_lt("lower.blowdown_cap" + std::to_string(c), std::abs(b.limit - F.support(th)), 1e-2);
    }
    const barrier::Cutoff psi(s.verify.cutoff_lambda, s.verify.cutoff_r0, s.verify.cutoff_r1, n);
    const double R = 2 * s.verify.cutoff_r1 > 2000 ? 2 * s.verify.cutoff_r1 : 2000;
    const double h = s.verify.cutoff_spacing > 0 ? s.verify.cutoff_spacing : (n == 2 ? 10.0 : 100.0);
    const auto sc = barrier::spacelike_check(psi, Vec::Constant(n, -R), Vec::Constant(n, R), h);
    checks.assert_lt("cutoff.spacelike", sc.max_gradient, 1.0, {{"samples", sc.samples}, {"witness", to_json(sc.witness)}});
    report["barriers"] = {{"lower_generators", lo.generators().size()},
                          {"upper_generators", up ? json(up->generators().size()) : json(nullptr)}};
    report["plotdata"] = {{"blowdown", blow}};
}

// ---------------------------------------------------------------- solve

struct Solved {
    std::vector<solver::ContinuationStep> steps;
};

Solved run_solver(const Scenario& s) {
    const auto& F = *s.domain;
    const auto P = barrier::make_profiles(s.n);
    solver::ContinuationOptions opt;
    opt.spacing = s.spacing;
    opt.newton.tol = s.tol;
    opt.newton.max_iter = s.max_iter;
    Solved out;
    if (s.boundary == "barrier") {
        out.steps = solver::continuation_run(F, s.J, s.n, s.k, P, opt);
        return out;
    }
    // closed-form data on the ball of the assembled radius
    for (int J : s.J) {
        const auto assembled = solver::assemble_problem(F, J, s.n, s.k, P);
        if (!assembled.domain.normals.empty()) throw ConfigError("config: hyperboloid boundary needs a domain covering the sphere");
        solver::ContinuationStep step;
        step.J = J;
        step.problem = solver::ball_problem(assembled.domain.radius, s.n, s.k, [](const Vec& xi) { return -geom::what(xi); });
        step.problem.J = J;
        step.disc = solver::discretize(step.problem, s.spacing);
        step.state = solver::newton_solve(step.problem, step.disc, solver::scaled_hyperboloid(step.disc, opt.init_scale), opt.newton);
        out.steps.push_back(std::move(step));
    }
    return out;
}

void solve_checks(const Scenario& s, const Solved& sol, Checks& checks, json& report, RunDir& run) {
    json states = json::array();
    json residuals = table({"J", "iteration", "residual"});
    for (const auto& st : sol.steps) {
        const std::string tag = "J" + std::to_string(st.J);
        json r = solver::state_report(st.state);
        r["J"] = st.J;
        r["nodes"] = st.disc.interior();
        r["boundary_points"] = st.disc.bpoints.size();
        r["radius"] = st.problem.domain.radius;
        r["warm_start"] = st.warm;
        states.push_back(r);
        for (std::size_t i = 0; i < st.state.history.size(); ++i)
            residuals["rows"].push_back({static_cast<double>(st.J), static_cast<double>(i), st.state.history[i]});
        checks.assert_lt(tag + ".residual", st.state.history.back(), s.tol);
        const double margin = st.state.margins.empty() ? st.state.margin
                                                       : *std::min_element(st.state.margins.begin(), st.state.margins.end());
        checks.assert_gt(tag + ".admissible_iterates", margin, 0.0);
        if (s.boundary == "hyperboloid") {
            double err = 0;
            for (std::size_t i = 0; i < st.disc.interior(); ++i)
                err = std::max(err, std::abs(st.state.v(static_cast<Eigen::Index>(i)) + 1.0) * geom::what(st.disc.nodes[i]));
            checks.assert_lt(tag + ".hyperboloid_error", err, s.verify.hyperboloid_tol);
            checks.skipped(tag + ".c0", "closed-form boundary data: no barrier bounds");
            checks.skipped(tag + ".c1", "closed-form boundary data: no barrier bounds");
        } else {
            const auto c0 = solver::c0_check(st.problem, st.disc, st.state);
            checks.assert_true(tag + ".c0", c0.holds(),
                               {{"max_interior", c0.max_interior}, {"max_boundary", c0.max_boundary},
                                {"margin_above_upper_dual", c0.upper_available ? json(c0.min_margin_above_upper_dual) : json(nullptr)}});
            const auto c1 = solver::c1_check(st.problem, st.disc, st.state);
            checks.assert_true(tag + ".c1", c1.holds(),
                               {{"max_interior", c1.max_interior}, {"max_boundary_sub", c1.max_boundary_sub}});
        }
    }
    const auto& last = sol.steps.back();
    {
        const std::string file = "dual_solution.csv";
        std::ofstream os(run.path() / file);
        os.precision(17);
        for (int a = 0; a < s.n; ++a) os << "xi" << a << ",";
        os << "ustar,kind\n";
        for (std::size_t i = 0; i < last.disc.interior(); ++i) {
            for (int a = 0; a < s.n; ++a) os << last.disc.nodes[i](a) << ",";
            os << last.state.v(static_cast<Eigen::Index>(i)) * geom::what(last.disc.nodes[i]) << ",interior\n";
        }
        for (std::size_t b = 0; b < last.disc.bpoints.size(); ++b) {
            for (int a = 0; a < s.n; ++a) os << last.disc.bpoints[b](a) << ",";
            os << last.state.v(static_cast<Eigen::Index>(last.disc.interior() + b)) * geom::what(last.disc.bpoints[b]) << ",boundary\n";
        }
        run.add(file);
    }
    report["states"] = states;
    report["plotdata"]["residual"] = residuals;
}

// ---------------------------------------------------------------- reconstruct

void reconstruct_checks(const Scenario& s, const Solved& sol, Checks& checks, json& report) {
    const auto& F = *s.domain;
    const auto& last = sol.steps.back();
    const reconstruct::EntireGraphSample e(solver::to_dual(last.disc, last.problem.domain, last.state), last.problem.boundary);
    const auto& v = s.verify;

    const auto pts = reconstruct::gradient_image_points(e, v.curvature_radius, v.curvature_points, s.seed, v.min_depth);
    if (pts.empty()) {
        checks.skipped("curvature_residual", "no interior node deeper than min_depth");
    } else {
        const auto cr = reconstruct::curvature_residual(e, s.k, pts);
        checks.assert_lt("curvature_residual", cr.value, v.curvature_tol, {{"points", pts.size()}, {"witness", to_json(cr.witness)}});
    }

    json gaps = table({"direction", "r", "gap"});
    const double rho = last.problem.domain.radius;
    for (std::size_t c = 0; c < F.caps.size(); ++c) {
        const Vec th = F.caps[c].center;
        const double phi = last.problem.boundary(Vec(rho * th));
        const auto g = reconstruct::asymptotics_check(e, F, th, phi, v.gap_radii, rho);
        for (std::size_t i = 0; i < g.gaps.size(); ++i) gaps["rows"].push_back({static_cast<double>(c), g.radii[i], g.gaps[i]});
        const std::string tag = "asymptotics.cap" + std::to_string(c);
        checks.assert_true(tag + ".decreasing", g.decreasing);
        checks.assert_lt(tag + ".limit", std::abs(g.limit), v.gap_tol, {{"error_estimate", g.error}, {"direction", to_json(th)}});
    }

    const auto gi = reconstruct::gauss_image(e, F, v.gauss_radius, v.gauss_samples, s.seed, v.gauss_tol);
    checks.assert_le("gauss_image.violations", static_cast<double>(gi.violations), 0.0, {{"tolerance", v.gauss_tol}});
    checks.report("gauss_image.coverage_gap", gi.coverage_gap, v.coverage_bound);
    json cloud = table({"xi0", "xi1", "xi2", "margin"});
    if (s.n != 3) cloud = table({"xi0", "xi1", "margin"});
    for (std::size_t i = 0; i < gi.cloud.size(); ++i) {
        json row = json::array();
        for (int a = 0; a < std::min(s.n, 3); ++a) row.push_back(gi.cloud[i](a));
        row.push_back(gi.margins[i]);
        cloud["rows"].push_back(row);
    }

    if (last.problem.lower) {
        const auto sp = reconstruct::gradient_image_points(e, v.sandwich_radius, v.sandwich_points, s.seed + 1);
        auto lower = [&](const Vec& x) { return last.problem.lower->value(x); };
        auto upper = [&](const Vec& x) {
            return last.problem.upper ? last.problem.upper->value(x) : std::numeric_limits<double>::infinity();
        };
        const auto sw = reconstruct::sandwich_check(e, lower, upper, sp);
        checks.assert_gt("sandwich.above_lower", sw.above_lower, 0.0, {{"witness", to_json(sw.witness_lower)}});
        if (last.problem.upper)
            checks.assert_gt("sandwich.below_upper", sw.below_upper, 0.0, {{"witness", to_json(sw.witness_upper)}});
        else
            checks.skipped("sandwich.below_upper", "no upper barrier for this domain");
    } else {
        checks.skipped("sandwich", "closed-form boundary data: no barriers");
    }

    json pog = json::array();
    const auto cloud_pts = reconstruct::gradient_image_points(e, v.pogorelov_radius, v.pogorelov_points, s.seed + 2);
    for (double level : v.pogorelov_levels) {
        std::vector<Vec> q;
        for (const auto& x : cloud_pts)
            if (e.value(x) < level) q.push_back(x);
        if (q.empty()) {
            checks.skipped("pogorelov.s" + std::to_string(static_cast<int>(level)), "no sample inside {u < s}");
            continue;
        }
        const auto w = reconstruct::pogorelov_diagnostic(e, level, q);
        pog.push_back({{"s", level}, {"max_product", w.value}, {"points", q.size()}, {"witness", to_json(w.witness)}});
        checks.report("pogorelov.s" + std::to_string(static_cast<int>(level)), w.value, v.pogorelov_bound);
    }
    report["pogorelov"] = pog;
    report["plotdata"]["asymptotics"] = gaps;
    report["plotdata"]["gauss"] = cloud;
}

// ---------------------------------------------------------------- verify

void cmd_verify(const Scenario& s, Checks& checks) {
    std::mt19937_64 rng(s.seed);
    {
        std::uniform_real_distribution<double> U(-3, 3);
        double worst = 0;
        for (int trial = 0; trial < 64; ++trial) {
            const int n = 1 + trial % 8;
            Vec l(n);
            for (int i = 0; i < n; ++i) l(i) = U(rng);
            for (int k = 0; k <= n; ++k) {
                double ref = 0;
                for (unsigned m = 0; m < (1u << n); ++m) {
                    if (std::popcount(m) != k) continue;
                    double p = 1;
                    for (int i = 0; i < n; ++i)
                        if (m & (1u << i)) p *= l(i);
                    ref += p;
                }
                worst = std::max(worst, std::abs(symk::sigma(l, k) - ref) / std::max(1.0, std::abs(ref)));
            }
        }
        checks.assert_lt("symk.enumeration", worst, 1e-12);
    }
    {
        std::uniform_real_distribution<double> U(0.1, 10);
        double worst = 0;
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 3 + trial % 2, k = 1 + trial % n;
            Vec l(n);
            for (int i = 0; i < n; ++i) l(i) = U(rng);
            const Vec g = symk::quotient_F_gradient(l, k);
            for (int i = 0; i < n; ++i) {
                Vec a = l, b = l;
                const double t = 1e-5 * l(i);
                a(i) += t;
                b(i) -= t;
                worst = std::max(worst, std::abs((symk::quotient_F(a, k) - symk::quotient_F(b, k)) / (2 * t) - g(i)) / std::abs(g(i)));
            }
        }
        checks.assert_lt("symk.gradient", worst, 1e-6);
    }
    {
        auto f = [](const Vec& x) { return std::exp(x(0) - 0.5 * x(1)) + x(2) * x(2) * x(0); };
        auto H = [](const Vec& x) {
            const double e = std::exp(x(0) - 0.5 * x(1));
            Mat m(3, 3);
            m << e, -0.5 * e, 2 * x(2), -0.5 * e, 0.25 * e, 0, 2 * x(2), 0, 2 * x(0);
            return m;
        };
        const Vec xi = (Vec(3) << 0.3, -0.2, 0.4).finished();
        auto err = [&](double h) { return (geom::klein_hessian_lhs(f, xi, h) - geom::klein_hessian_rhs(xi, H(xi))).cwiseAbs().maxCoeff(); };
        checks.assert_gt("klein.error_ratio", err(0.02) / err(0.01), 3.5);
    }
    {
        const double h = 0.02;
        auto hyp = [](const Vec& x) { return std::sqrt(1.0 + x.squaredNorm()); };
        auto g = geom::GridFunction::box(Vec::Constant(2, -1.5), Vec::Constant(2, 1.5), h);
        g.fill(hyp);
        const auto d = geom::legendre(g, h);
        const auto back = geom::legendre(d, geom::GridFunction::box(Vec::Constant(2, -0.5), Vec::Constant(2, 0.5), h));
        double err = 0;
        for (std::size_t f = 0; f < back.size(); ++f)
            if (back.active(f)) err = std::max(err, std::abs(back[f] - hyp(back.point(f))));
        checks.assert_lt("legendre.involution", err, 5 * h * h);
    }
    {
        const Vec axis = Vec::Unit(3, 0);
        const Vec p = (Vec(4) << 0.3, -1.0, 2.0, 4.0).finished();
        double worst = 0;
        for (double a1 : {0.3, -0.6})
            for (double a2 : {0.5, 0.1}) {
                const Vec two = geom::lorentz_boost(geom::lorentz_boost(p, a2, axis), a1, axis);
                worst = std::max(worst, (two - geom::lorentz_boost(p, (a1 + a2) / (1 + a1 * a2), axis)).norm());
            }
        checks.assert_lt("boost.composition", worst, 1e-10);
    }
}

// ---------------------------------------------------------------- plotdata

int emit_plotdata(const Flags& flags) {
    const fs::path dir = flags.report;
    std::ifstream in(dir / "report.json");
    if (!in) throw ConfigError("plotdata: no report.json in " + dir.string());
    json report;
    in >> report;
    if (!report.contains("plotdata") || !report["plotdata"].contains(flags.kind))
        throw ConfigError("plotdata: report has no data of kind " + flags.kind);
    const fs::path file = dir / ("plot_" + flags.kind + ".csv");
    write_table_csv(report["plotdata"][flags.kind], file);
    std::cout << file.string() << "\n";
    return ok;
}

int execute(const std::string& command, const Flags& flags) {
    const bool needs_domain = command == "barriers" || command == "solve" || command == "reconstruct";
    const auto s = load_scenario(flags, needs_domain);
    RunDir run(flags.out, command, s);
    Checks checks(flags.strict);
    json report{{"command", command}, {"scenario", s.name}, {"seed", s.seed}, {"n", s.n}, {"k", s.k}};
    if (s.domain) report["domain"] = s.domain->to_json();

    if (command == "semitrough") {
        cmd_semitrough(s, checks, report, run);
    } else if (command == "barriers") {
        cmd_barriers(s, checks, report);
    } else if (command == "solve" || command == "reconstruct") {
        report["solver"] = {{"J", s.J}, {"grid_spacing", s.spacing}, {"tol", s.tol}, {"max_iter", s.max_iter}, {"boundary", s.boundary}};
        const auto sol = run_solver(s);
        solve_checks(s, sol, checks, report, run);
        if (command == "reconstruct") reconstruct_checks(s, sol, checks, report);
    } else {
        cmd_verify(s, checks);
    }
    report["checks"] = checks.list();
    report["failed"] = checks.failed();
    report["passed"] = checks.failed().empty();
    run.write_json("report.json", report);
    if (report.contains("plotdata"))
        for (const auto& [kind, t] : report["plotdata"].items()) {
            const std::string file = "plot_" + kind + ".csv";
            write_table_csv(t, run.path() / file);
            run.add(file);
        }
    run.finish(command);

    std::cout << run.path().string() << "\n";
    for (const auto& c : checks.list())
        std::cout << std::left << std::setw(13) << c["status"].get<std::string>() << c["name"].get<std::string>() << "\n";
    if (!checks.failed().empty()) {
        std::cerr << "failing checks:";
        for (const auto& f : checks.failed()) std::cerr << " " << f;
        std::cerr << "\n";
        return check_failure;
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entire spacelike constant sigma_k curvature hypersurfaces: solve, reconstruct, verify"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<const char*, const char*>> commands{
        {"semitrough", "profile ODEs and trough asymptotics"},
        {"barriers", "barrier construction, spacelike and ordering checks"},
        {"solve", "continuation run of the dual Dirichlet problems"},
        {"reconstruct", "solve, reconstruct the entire graph and verify it"},
        {"verify", "identity suites"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "scenario JSON");
        sub->add_option("--out", flags.out, "output root directory");
        sub->add_option("--seed", flags.seed, "seed for sample points");
        sub->add_flag("--strict", flags.strict, "assert report-only diagnostics that have a bound");
        sub->add_option("--grid-spacing", flags.spacing, "lattice spacing override");
        sub->add_option("--max-iter", flags.max_iter, "Newton iteration cap override");
        sub->add_flag("--allow-large", flags.allow_large, "lift the n <= 4 guard");
    }
    auto* plot = app.add_subcommand("plotdata", "re-emit plot CSVs from a run directory");
    plot->add_option("--report", flags.report, "run directory holding report.json")->required();
    plot->add_option("--kind", flags.kind, "profiles, asymptotics, gauss, residual or blowdown")
        ->required()
        ->check(CLI::IsMember({"profiles", "asymptotics", "gauss", "residual", "blowdown"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_failure;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "plotdata") return emit_plotdata(flags);
        return execute(command, flags);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return config_failure;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return internal_failure;
    }
}
