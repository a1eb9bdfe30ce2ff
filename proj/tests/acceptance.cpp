// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "spacelike/reconstruct.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>

using namespace spacelike;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void run(int id, const char* title, double budget_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    o.detail.precision(10);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0) o.require(secs < budget_s, "runtime budget");
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s):%s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.str().c_str(), secs);
    std::fflush(stdout);
}

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

// subset enumeration by bitmask
double sigma_enum(const Vec& l, int k) {
    const int n = static_cast<int>(l.size());
    double s = 0;
    for (unsigned m = 0; m < (1u << n); ++m) {
        if (std::popcount(m) != k) continue;
        double p = 1;
        for (int i = 0; i < n; ++i)
            if (m & (1u << i)) p *= l(i);
        s += p;
    }
    return s;
}

void symmetric_kernel(Outcome& o) {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> U(-3, 3);
    double worst = 0, worst_exp = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 8;
        Vec l(n);
        for (int i = 0; i < n; ++i) l(i) = U(rng);
        for (int k = 0; k <= n; ++k) {
            const double ref = sigma_enum(l, k), scale = std::max(1.0, std::abs(ref));
            worst = std::max(worst, std::abs(symk::sigma(l, k) - ref) / scale);
            if (k == 0) continue;
            for (int i = 0; i < n; ++i) {
                const double e = symk::sigma_minus(l, k, {i}) + l(i) * symk::sigma_minus(l, k - 1, {i});
                worst_exp = std::max(worst_exp, std::abs(e - ref) / scale);
            }
        }
    }
    o.detail << " max rel err " << worst << ", expansion " << worst_exp;
    o.require(worst < 1e-12, "enumeration agreement");
    o.require(worst_exp < 1e-12, "expansion identity");
}

void derivative_formula(Outcome& o) {
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> U(0.1, 10);
    double worst = 0;
    for (auto [n, k] : std::vector<std::pair<int, int>>{{3, 1}, {3, 2}, {3, 3}, {4, 2}, {4, 3}})
        for (int trial = 0; trial < 100; ++trial) {
            Vec l(n);
            for (int i = 0; i < n; ++i) l(i) = U(rng);
            const Vec g = symk::quotient_F_gradient(l, k);
            for (int i = 0; i < n; ++i) {
                const double t = 1e-5 * l(i);
                Vec a = l, b = l;
                a(i) += t;
                b(i) -= t;
                const double fd = (symk::quotient_F(a, k) - symk::quotient_F(b, k)) / (2 * t);
                worst = std::max(worst, std::abs(g(i) - fd) / std::abs(g(i)));
            }
        }
    o.detail << " max rel err " << worst;
    o.require(worst < 1e-6, "closed form vs differences");
}

struct TestFunction {
    const char* name;
    std::function<double(const Vec&)> value;
    std::function<Mat(const Vec&)> hess;
};

void klein_identity(Outcome& o) {
    const Vec a = v3(1, 0.5, -0.3), b = v3(0.7, -0.4, 0.5);
    const std::vector<TestFunction> fns{
        {"cubic-cosh",
         [](const Vec& x) { return x(0) * x(0) * x(1) + std::cosh(x(2)); },
         [](const Vec& x) {
             Mat H = Mat::Zero(3, 3);
             H(0, 0) = 2 * x(1);
             H(0, 1) = H(1, 0) = 2 * x(0);
             H(2, 2) = std::cosh(x(2));
             return H;
         }},
        {"exponential", [a](const Vec& x) { return std::exp(a.dot(x)); },
         [a](const Vec& x) { return Mat(std::exp(a.dot(x)) * a * a.transpose()); }},
        {"quartic",
         [](const Vec& x) { return 0.25 * x.squaredNorm() * x.squaredNorm() + x(0) * x(1); },
         [](const Vec& x) {
             Mat H = x.squaredNorm() * Mat::Identity(3, 3) + 2 * x * x.transpose();
             H(0, 1) += 1;
             H(1, 0) += 1;
             return H;
         }},
        {"trigonometric", [](const Vec& x) { return std::sin(x(0)) * std::cos(x(1)) + x(2) * x(2); },
         [](const Vec& x) {
             Mat H = Mat::Zero(3, 3);
             H(0, 0) = H(1, 1) = -std::sin(x(0)) * std::cos(x(1));
             H(0, 1) = H(1, 0) = -std::cos(x(0)) * std::sin(x(1));
             H(2, 2) = 2;
             return H;
         }},
        {"logarithm", [b](const Vec& x) { return std::log(2 + b.dot(x)); },
         [b](const Vec& x) { return Mat(-b * b.transpose() / std::pow(2 + b.dot(x), 2)); }},
    };
    std::mt19937_64 rng(103);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(0, 1);
    std::vector<Vec> pts;
    for (int s = 0; s < 20; ++s) {
        const Vec d = v3(N(rng), N(rng), N(rng));
        pts.push_back(0.7 * std::cbrt(U(rng)) * d.normalized());
    }
    double min_ratio = std::numeric_limits<double>::infinity();
    for (const auto& fn : fns) {
        auto err = [&](double h) {
            double e = 0;
            for (const auto& xi : pts)
                e = std::max(e, (geom::klein_hessian_lhs(fn.value, xi, h) - geom::klein_hessian_rhs(xi, fn.hess(xi)))
                                    .cwiseAbs()
                                    .maxCoeff());
            return e;
        };
        const double r = err(0.02) / err(0.01);
        o.detail << " " << fn.name << " " << r;
        min_ratio = std::min(min_ratio, r);
    }
    o.require(min_ratio >= 3.5, "second-order error ratio");
}

void semitrough_odes(Outcome& o) {
    for (int n : {2, 3}) {
        const auto P = barrier::make_profiles(n);
        for (const auto* p : {P.mean.get(), P.gauss.get()}) {
            const auto c = p == P.mean.get() ? trough::Curvature::mean : trough::Curvature::gauss;
            const std::string tag = std::string(c == trough::Curvature::mean ? "sigma_1" : "sigma_n") + " n=" + std::to_string(n);
            o.detail << " " << tag << ": ode " << p->ode_residual << " entry " << p->entry_gap;
            o.require(p->ode_residual < 1e-8, tag + " ODE residual");
            o.require(p->entry_gap < 1e-3, tag + " entry gap at t=-20");
            const trough::Trough z(c == trough::Curvature::mean ? P.mean : P.gauss, {Vec::Unit(n, 0), M_PI / 2});
            const int order = trough::curvature_order(c, n);
            const double target = trough::curvature_value(c, n);
            std::mt19937_64 rng(104 + n);
            std::uniform_real_distribution<double> U(-6, 6);
            double worst = 0;
            for (int s = 0; s < 100; ++s) {
                Vec y(n);
                for (int a = 0; a < n; ++a) y(a) = U(rng);
                Vec grad;
                (void)z.standard(y, &grad);
                const auto gq = geom::graph_quantities(grad, z.standard_hessian(y));
                worst = std::max(worst, std::abs(symk::sigma(gq.kappa, order) - target));
            }
            o.detail << " curvature " << worst;
            o.require(worst < 1e-4, tag + " curvature residual");
        }
        bool ordered = true;
        for (double t : P.mean->t) ordered = ordered && P.mean->value(t) > P.gauss->value(t);
        o.require(ordered, "f_1 > f_n for n=" + std::to_string(n));
    }
}

void cutoff_spacelike(Outcome& o) {
    const barrier::Cutoff psi2(0.5, 25, 1100, 2);
    const auto r2 = barrier::spacelike_check(psi2, Vec::Constant(2, -2000), Vec::Constant(2, 2000), 1.0);
    const barrier::Cutoff psi3(0.5, 25, 1100, 3);
    const auto r3 = barrier::spacelike_check(psi3, Vec::Constant(3, -2000), Vec::Constant(3, 2000), 20.0);
    o.detail << " n=2 max|D psi| " << r2.max_gradient << " over " << r2.samples << ", n=3 " << r3.max_gradient << " over "
             << r3.samples;
    o.require(r2.samples == 4001u * 4001u && r3.samples == 201u * 201u * 201u, "grid sizes");
    o.require(r2.max_gradient < 1.0 && r3.max_gradient < 1.0, "spacelike");
    double jump = 0;
    for (int n : {2, 3}) {
        const barrier::Cutoff psi(0.5, 25, 1100, n);
        for (const auto& dir : barrier::sphere_mesh(n, 60))
            for (double R : {25.0, 1100.0})
                jump = std::max(jump, std::abs(psi(Vec(std::nextafter(R, 0.0) * dir)) - psi(Vec(std::nextafter(R, 3e3) * dir))));
    }
    o.detail << ", max jump across the spheres " << jump;
    o.require(jump < 1e-9, "continuity");
}

void solver_regression(Outcome& o) {
    const double rho = 1 - 1.0 / 8;
    const auto p = solver::ball_problem(rho, 3, 2, [](const Vec& xi) { return -geom::what(xi); });
    const auto D = solver::discretize(p, 0.02);
    const auto st = solver::newton_solve(p, D, solver::scaled_hyperboloid(D, 0.9));
    double err = 0;
    for (std::size_t i = 0; i < D.interior(); ++i) {
        const double ustar = st.v(static_cast<Eigen::Index>(i)) * geom::what(D.nodes[i]);
        err = std::max(err, std::abs(ustar + geom::what(D.nodes[i])));
    }
    const double min_margin = st.margins.empty() ? st.margin : *std::min_element(st.margins.begin(), st.margins.end());
    o.detail << " radius " << rho << ", " << D.interior() << " nodes, iterations " << st.iterations << ", max error " << err
             << ", min admissibility margin " << min_margin;
    o.require(st.converged, "converged");
    o.require(err < 1e-6, "max error vs closed form");
    o.require(st.iterations <= 12, "iteration count");
    o.require(min_margin > 0, "admissible iterates");
}

struct HemisphereRun {
    barrier::CapDomain F{3, {{v3(1, 0, 0), M_PI / 2}}, 0.1};
    std::vector<solver::ContinuationStep> steps;
};

HemisphereRun& hemisphere() {
    static HemisphereRun h = [] {
        HemisphereRun r;
        const auto P = barrier::make_profiles(3);
        solver::ContinuationOptions opt;
        opt.spacing = 0.02;
        r.steps = solver::continuation_run(r.F, {4, 8, 16}, 3, 2, P, opt);
        return r;
    }();
    return h;
}

void hemisphere_pipeline(Outcome& o) {
    auto& h = hemisphere();
    const double tol = solver::NewtonOptions{}.tol;
    for (const auto& s : h.steps) {
        const auto c0 = solver::c0_check(s.problem, s.disc, s.state);
        const auto c1 = solver::c1_check(s.problem, s.disc, s.state);
        o.detail << " J=" << s.J << ": residual " << s.state.history.back() << ", C0 " << c0.max_interior << "<="
                 << c0.max_boundary << ", C1 " << c1.max_interior << "<=" << c1.max_boundary_sub << ";";
        o.require(s.state.history.back() < tol, "residual J=" + std::to_string(s.J));
        o.require(c0.holds(), "C0 J=" + std::to_string(s.J));
        o.require(c1.holds(), "C1 J=" + std::to_string(s.J));
    }
    const auto& last = h.steps.back();
    const auto dual = solver::to_dual(last.disc, last.problem.domain, last.state);
    const std::vector<Vec> samples{v3(0.3, 0, 0), v3(0.5, 0.2, -0.1), v3(0.4, -0.3, 0.2), v3(0.6, 0.1, 0.3)};
    const double coarse = solver::hyperbolic_crosscheck(dual, samples, 2), fine = solver::hyperbolic_crosscheck(dual, samples, 1);
    o.detail << " cross-check " << coarse << " -> " << fine << " (ratio " << coarse / fine << ");";
    o.require(coarse / fine >= 3.5, "cross-check second order");
    for (std::size_t i = 1; i < h.steps.size(); ++i) {
        const auto &a = h.steps[i - 1], &b = h.steps[i];
        std::unordered_map<long, std::size_t> idx;
        for (std::size_t j = 0; j < b.disc.interior(); ++j) idx.emplace(b.disc.lattice_key(b.disc.lattice[j]), j);
        double diff = 0;
        for (std::size_t j = 0; j < a.disc.interior(); ++j) {
            const auto it = idx.find(b.disc.lattice_key(a.disc.lattice[j]));
            if (it == idx.end()) continue;
            const double w = geom::what(a.disc.nodes[j]);
            diff = std::max(diff, std::abs(a.state.v(static_cast<Eigen::Index>(j)) - b.state.v(static_cast<Eigen::Index>(it->second))) * w);
        }
        o.detail << " agreement J=" << a.J << "/" << b.J << " " << diff;
        o.require(diff <= 3 * tol, "successive-J agreement J=" + std::to_string(a.J) + "/" + std::to_string(b.J));
    }
}

std::unique_ptr<reconstruct::EntireGraphSample> entire_sample() {
    const auto& s = hemisphere().steps.back();
    return std::make_unique<reconstruct::EntireGraphSample>(solver::to_dual(s.disc, s.problem.domain, s.state),
                                                            s.problem.boundary);
}

void reconstruction(Outcome& o) {
    const auto& h = hemisphere();
    const auto& s = h.steps.back();
    const auto e = entire_sample();
    // nodes within 0.2 of the solved boundary sit in the first-order cut-cell layer
    const auto pts = reconstruct::gradient_image_points(*e, 5.0, 50, 105, 0.2);
    const auto cr = reconstruct::curvature_residual(*e, 2, pts);
    o.detail << " curvature residual " << cr.value << " at " << pts.size() << " points;";
    o.require(pts.size() == 50, "50 sample points");
    o.require(cr.value < 1e-2, "curvature residual");

    const double rho = s.problem.domain.radius;
    for (const Vec& th : {v3(1, 0, 0), Vec(v3(0.8, 0.6, 0)), Vec(v3(0.6, -0.3, 0.5).normalized())}) {
        const double phi = s.problem.boundary(Vec(rho * th));
        const auto g = reconstruct::asymptotics_check(*e, h.F, th, phi, {10, 30, 100, 300, 1000}, rho);
        o.detail << " gap limit " << g.limit << (g.decreasing ? " decreasing;" : " not decreasing;");
        o.require(g.decreasing, "gap monotone");
        o.require(std::abs(g.limit) < 1e-2, "gap limit");
    }
    const auto gi = reconstruct::gauss_image(*e, h.F, 50, 1000, 106);
    o.detail << " Gauss violations " << gi.violations << ", coverage gap " << gi.coverage_gap << ";";
    o.require(gi.violations == 0, "Gauss image membership");
    const auto sp = reconstruct::gradient_image_points(*e, 15, 200, 107);
    const auto sw = reconstruct::sandwich_check(*e, *s.problem.lower, *s.problem.upper, sp);
    o.detail << " sandwich margins " << sw.below_upper << ", " << sw.above_lower;
    o.require(sw.below_upper > 0 && sw.above_lower > 0, "sandwich");
}

void pogorelov(Outcome& o) {
    const auto e = entire_sample();
    const reconstruct::EntireGraphSample hyp(reconstruct::hyperboloid_dual(3));
    const auto cloud = reconstruct::gradient_image_points(*e, 25, 400, 108);
    std::mt19937_64 rng(109);
    std::uniform_real_distribution<double> U(-19, 19);
    std::vector<Vec> box;
    for (int i = 0; i < 400; ++i) box.push_back(v3(U(rng), U(rng), U(rng)));
    for (double s : {5.0, 10.0, 20.0}) {
        std::vector<Vec> q, qh;
        for (const auto& x : cloud)
            if (e->value(x) < s) q.push_back(x);
        for (const auto& x : box)
            if (hyp.value(x) < s) qh.push_back(x);
        qh.push_back(Vec::Zero(3));
        const auto w = reconstruct::pogorelov_diagnostic(*e, s, q);
        const auto wh = reconstruct::pogorelov_diagnostic(hyp, s, qh);
        o.detail << " s=" << s << ": " << w.value << " (" << q.size() << " pts), hyperboloid " << wh.value << ";";
        o.require(std::isfinite(w.value) && !q.empty(), "finite sweep");
        o.require(wh.value <= (s - 1) * (1 + 1e-6), "hyperboloid bound s-1");
    }
}

}  // namespace

int main() {
    run(1, "symmetric-function kernel", 5, symmetric_kernel);
    run(2, "derivative formula", 10, derivative_formula);
    run(3, "Klein Hessian identity", 30, klein_identity);
    run(4, "semitrough ODEs", 60, semitrough_odes);
    run(5, "cutoff spacelike", 120, cutoff_spacelike);
    run(6, "solver regression, full sphere", 600, solver_regression);
    run(7, "hemisphere pipeline", 1800, hemisphere_pipeline);
    run(8, "reconstruction", 900, reconstruction);
    run(9, "Pogorelov diagnostic", 0, pogorelov);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
