#include "spacelike/solver.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace spacelike;
using solver::Vec;

namespace {

double hyperboloid_dual(const Vec& xi) { return -geom::what(xi); }

const barrier::TroughProfiles& profiles(int n) {
    static const auto p2 = barrier::make_profiles(2);
    static const auto p3 = barrier::make_profiles(3);
    return n == 2 ? p2 : p3;
}

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

TEST(Domain, DepthExitAndSupport) {
    const barrier::CapDomain hemi{2, {{v2(1, 0), M_PI / 2}}, 0.1};
    const auto d = solver::shrunk_hull(hemi, 0.1, 0.9);
    EXPECT_NEAR(d.depth(v2(0.5, 0)), 0.4, 1e-14);
    EXPECT_NEAR(d.depth(v2(0.2, 0.5)), 0.1, 1e-14);
    EXPECT_FALSE(d.contains(v2(0.05, 0)));
    EXPECT_NEAR(d.exit(v2(0.5, 0), v2(-1, 0)), 0.4, 1e-14);
    EXPECT_NEAR(d.exit(v2(0.5, 0), v2(1, 0)), 0.4, 1e-14);
    EXPECT_TRUE(d.spherical_support(v2(1, 0)).has_value());
    EXPECT_FALSE(d.spherical_support(v2(-1, 0)).has_value());
}

TEST(Domain, ShrunkDomainsAreNested) {
    const barrier::CapDomain F{2, {{v2(1, 0), 1.2}, {v2(0, 1), 0.8}}, 0.1};
    const auto a = solver::shrunk_hull(F, 1.0 / 8, 1 - 1.0 / 8), b = solver::shrunk_hull(F, 1.0 / 9, 1 - 1.0 / 9);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int s = 0; s < 2000; ++s) {
        const Vec xi = v2(U(rng), U(rng));
        if (a.contains(xi)) {
            EXPECT_TRUE(b.contains(xi));
        }
    }
}

TEST(Stencil, Directions) {
    EXPECT_EQ(solver::stencil_directions(2).size(), 4u);
    EXPECT_EQ(solver::stencil_directions(3).size(), 9u);
    for (const auto& d : solver::stencil_directions(3)) EXPECT_NEAR(d.norm(), 1.0, 1e-15);
}

TEST(Residual, HyperboloidFamily) {
    for (int k : {1, 2}) {
        const auto p = solver::ball_problem(0.8, 2, k, hyperboloid_dual);
        const auto D = solver::discretize(p, 0.05);
        const Vec R = solver::residual_vector(p, D, solver::scaled_hyperboloid(D, 1.0));
        EXPECT_LT(solver::sup_norm(R), 1e-12);
        const double a = 1.7;
        const Vec Ra = solver::residual_vector(p, D, solver::scaled_hyperboloid(D, a));
        for (std::size_t i = 0; i < D.interior(); ++i) EXPECT_NEAR(Ra(i), a * p.c - p.c, 1e-10);
    }
}

TEST(Residual, QuadraticPotential) {
    const auto p = solver::ball_problem(0.6, 2, 2, [](const Vec& xi) { return xi.squaredNorm(); });
    const auto D = solver::discretize(p, 0.05);
    Vec v(D.unknowns());
    for (std::size_t i = 0; i < D.interior(); ++i) v(i) = D.nodes[i].squaredNorm() / geom::what(D.nodes[i]);
    for (std::size_t b = 0; b < D.bpoints.size(); ++b)
        v(D.interior() + b) = D.bpoints[b].squaredNorm() / geom::what(D.bpoints[b]);
    solver::AdmissibilityReport rep;
    const Vec R = solver::residual_vector(p, D, v, &rep);
    EXPECT_TRUE(rep.admissible);
    for (std::size_t i = 0; i < D.interior(); ++i) EXPECT_GT(R(i), 0.0);
    for (std::size_t b = 0; b < D.bpoints.size(); ++b) EXPECT_NEAR(R(D.interior() + b), 0.0, 1e-14);
}

TEST(Jacobian, MatchesDifferences) {
    const auto p = solver::ball_problem(0.7, 2, 1, [](const Vec& xi) { return -geom::what(xi) + 0.1 * xi(0); });
    const auto D = solver::discretize(p, 0.1);
    Vec v = solver::scaled_hyperboloid(D, 0.9);
    for (std::size_t i = 0; i < D.interior(); ++i) v(i) += 0.1 * D.nodes[i](0) * D.nodes[i](1);
    for (std::size_t b = 0; b < D.bpoints.size(); ++b) v(D.interior() + b) += 0.1 * D.bpoints[b](0) * D.bpoints[b](1);
    const auto A = solver::jacobian(p, D, v);
    const Vec dir = Vec::NullaryExpr(v.size(), [](Eigen::Index i) { return std::cos(1.3 * i); });
    // the residual has large third derivatives near the cut cells, so extrapolate the central difference
    auto central = [&](double t) {
        return Vec((solver::residual_vector(p, D, v + t * dir) - solver::residual_vector(p, D, v - t * dir)) / (2 * t));
    };
    const Vec fd = (4 * central(1e-5) - central(2e-5)) / 3;
    EXPECT_LT((A * dir - fd).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Newton, HyperboloidConvergesAndFixedPoint) {
    const auto p = solver::ball_problem(0.9, 2, 2, hyperboloid_dual);
    const auto D = solver::discretize(p, 0.05);
    const auto st = solver::newton_solve(p, D, solver::scaled_hyperboloid(D, 0.9));
    EXPECT_TRUE(st.converged);
    EXPECT_LE(st.iterations, 12);
    EXPECT_LT((st.v + Vec::Ones(st.v.size())).cwiseAbs().maxCoeff(), 1e-6);
    for (double m : st.margins) EXPECT_GT(m, 0.0);
    for (std::size_t i = 1; i < st.history.size(); ++i) EXPECT_LT(st.history[i], st.history[i - 1]);

    const auto fixed = solver::newton_solve(p, D, solver::scaled_hyperboloid(D, 1.0));
    EXPECT_EQ(fixed.iterations, 0);
    EXPECT_LT(fixed.history.front(), 1e-8);
}

TEST(Newton, Errors) {
    const auto p = solver::ball_problem(0.9, 2, 2, [](const Vec& xi) { return -geom::what(xi) + 0.2 * xi(0) * xi(1); });
    const auto D = solver::discretize(p, 0.1);
    solver::NewtonOptions opt;
    opt.max_iter = 1;
    EXPECT_THROW((void)solver::newton_solve(p, D, solver::scaled_hyperboloid(D, 0.5), opt), solver::NonConvergence);
    EXPECT_THROW((void)solver::newton_solve(p, D, solver::scaled_hyperboloid(D, -1.0)), geom::AdmissibilityError);
    EXPECT_THROW((void)solver::newton_solve(p, D, Vec::Zero(3)), std::invalid_argument);
}

TEST(Assemble, FullSphereBallAndData) {
    const barrier::CapDomain full{2, {{v2(1, 0), M_PI / 2}, {v2(-1, 0), M_PI / 2}}, 0.1};
    const auto p = solver::assemble_problem(full, 4, 2, 2, profiles(2));
    EXPECT_NEAR(p.domain.radius, 1 - 1.0 / 8, 1e-15);
    EXPECT_TRUE(p.domain.normals.empty());
    EXPECT_FALSE(p.upper);
    for (double ang : {0.0, 1.0, 2.5}) {
        const Vec xi = p.domain.radius * v2(std::cos(ang), std::sin(ang));
        EXPECT_GE(p.boundary(xi), hyperboloid_dual(xi) - 1e-9);
        EXPECT_LT(p.boundary(xi) - hyperboloid_dual(xi), 0.05);
    }
    EXPECT_THROW((void)solver::assemble_problem(full, 0, 2, 2, profiles(2)), std::domain_error);
}

TEST(Continuation, HemisphereCoarse) {
    const barrier::CapDomain hemi{2, {{v2(1, 0), M_PI / 2}}, 0.1};
    solver::ContinuationOptions opt;
    opt.spacing = 0.04;
    const auto steps = solver::continuation_run(hemi, {4, 8}, 2, 1, profiles(2), opt);
    ASSERT_EQ(steps.size(), 2u);
    for (const auto& s : steps) {
        EXPECT_TRUE(s.state.converged);
        EXPECT_LT(s.state.history.back(), 1e-8);
        const auto c0 = solver::c0_check(s.problem, s.disc, s.state);
        EXPECT_TRUE(c0.upper_available);
        EXPECT_TRUE(c0.holds()) << c0.max_interior << " " << c0.max_boundary << " " << c0.min_margin_above_upper_dual;
        const auto c1 = solver::c1_check(s.problem, s.disc, s.state);
        EXPECT_TRUE(c1.holds()) << c1.max_interior << " " << c1.max_boundary_sub;
    }
    EXPECT_TRUE(steps[0].problem.domain.contains(v2(0.5, 0.2)));
    EXPECT_THROW((void)solver::continuation_run(hemi, {8, 4}, 2, 1, profiles(2), opt), std::invalid_argument);
}

TEST(Crosscheck, HyperboloidAndRefinement) {
    const auto p = solver::ball_problem(0.9, 2, 2, hyperboloid_dual);
    const auto D = solver::discretize(p, 0.025);
    const auto st = solver::newton_solve(p, D, solver::scaled_hyperboloid(D, 1.0));
    const auto dual = solver::to_dual(D, p.domain, st);
    const std::vector<Vec> samples{v2(0, 0), v2(0.3, -0.2), v2(-0.5, 0.25)};
    EXPECT_LT(solver::hyperbolic_crosscheck(dual, samples, 1), 1e-3);
    EXPECT_THROW((void)solver::hyperbolic_crosscheck(dual, {v2(0.97, 0)}), geom::MarginError);

    // perturbed data: the mismatch of the discrete solution falls like h^2 under stride halving
    const auto q = solver::ball_problem(0.9, 2, 2, [](const Vec& xi) { return -geom::what(xi) + 0.2 * xi(0) * xi(1); });
    const auto Dq = solver::discretize(q, 0.025);
    const auto sq = solver::newton_solve(q, Dq, solver::scaled_hyperboloid(Dq, 0.9));
    const auto dq = solver::to_dual(Dq, q.domain, sq);
    const double coarse = solver::hyperbolic_crosscheck(dq, samples, 2), fine = solver::hyperbolic_crosscheck(dq, samples, 1);
    EXPECT_GE(coarse / fine, 3.5);
}

TEST(Report, StateJson) {
    const auto p = solver::ball_problem(0.8, 2, 1, hyperboloid_dual);
    const auto D = solver::discretize(p, 0.1);
    const auto st = solver::newton_solve(p, D, solver::scaled_hyperboloid(D, 0.9));
    const auto j = solver::state_report(st);
    EXPECT_EQ(j["iterations"], st.iterations);
    EXPECT_EQ(j["residual_history"].size(), st.history.size());
    EXPECT_TRUE(j["converged"].get<bool>());
}
