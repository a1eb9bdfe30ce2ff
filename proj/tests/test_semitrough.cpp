#include "spacelike/semitrough.hpp"

#include "spacelike/geomkit.hpp"
#include "spacelike/symk.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

using namespace spacelike;
using trough::Curvature;
using trough::Vec;

namespace {

std::shared_ptr<const trough::Profile> profile(Curvature c, int n) {
    static std::map<std::pair<int, int>, std::shared_ptr<const trough::Profile>> cache;
    auto& p = cache[{static_cast<int>(c), n}];
    if (!p) p = std::make_shared<const trough::Profile>(trough::solve_profile(c, n));
    return p;
}

Vec e1(int n) { return Vec::Unit(n, 0); }

}  // namespace

class ProfileSuite : public ::testing::TestWithParam<std::tuple<Curvature, int>> {};

TEST_P(ProfileSuite, Invariants) {
    const auto [c, n] = GetParam();
    const auto& p = *profile(c, n);
    EXPECT_LT(p.ode_residual, 1e-8);
    EXPECT_GT(p.entry_gap, 0.0);
    for (std::size_t i = 0; i < p.t.size(); ++i) {
        ASSERT_GT(p.f[i], 0.0);
        ASSERT_GT(p.fp[i], 0.0);
        ASSERT_LT(p.fp[i], 1.0);
        if (i > 0) {
            ASSERT_GT(p.excess[i], p.excess[i - 1]);
        }
    }
    // exit asymptote f(t) - t -> 0
    EXPECT_LT(std::abs(p.value(200.0) - 200.0), 1e-2);
    EXPECT_LT(std::abs(p.value(2000.0) - 2000.0), std::abs(p.value(200.0) - 200.0));
    // slope inverse and conjugate
    for (double q : {0.05, 0.3, 0.7, 0.99}) EXPECT_NEAR(p.slope(p.inverse_slope(q)), q, 1e-9);
    EXPECT_DOUBLE_EQ(p.conjugate(0.0), -p.level());
    EXPECT_EQ(p.conjugate(1.5), std::numeric_limits<double>::infinity());
}

TEST_P(ProfileSuite, GraphHasConstantCurvature) {
    const auto [c, n] = GetParam();
    const trough::Trough z(profile(c, n), {e1(n), M_PI / 2});
    const int order = trough::curvature_order(c, n);
    const double target = trough::curvature_value(c, n);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-6, 6);
    for (int s = 0; s < 100; ++s) {
        Vec y(n);
        for (int a = 0; a < n; ++a) y(a) = U(rng);
        Vec grad;
        (void)z.standard(y, &grad);
        const auto gq = geom::graph_quantities(grad, z.standard_hessian(y));
        EXPECT_NEAR(symk::sigma(gq.kappa, order), target, 1e-4) << y.transpose();
        EXPECT_GE(gq.kappa.minCoeff(), -1e-12);
    }
}

TEST_P(ProfileSuite, BoostedTroughIsSpacelikeWithCapImage) {
    const auto [c, n] = GetParam();
    const double delta = M_PI / 3;
    const trough::Trough z(profile(c, n), {e1(n), delta});
    EXPECT_NEAR(z.alpha(), -0.5, 1e-14);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> N;
    double inf_xi1 = 1;
    for (int s = 0; s < 2000; ++s) {
        Vec x(n);
        for (int a = 0; a < n; ++a) x(a) = N(rng);
        x *= std::exp(3 * std::uniform_real_distribution<double>(-1, 1)(rng)) / x.norm();
        Vec g;
        (void)z.value(x, &g);
        // the sigma_n trough for n = 2 approaches the light cone exponentially fast,
        // so |Dz| may round to 1 in double precision
        ASSERT_LE(g.norm(), 1.0);
        ASSERT_GE(g(0), std::cos(delta) - 1e-12);
        inf_xi1 = std::min(inf_xi1, g(0));
    }
    EXPECT_LT(inf_xi1, std::cos(delta) + 0.05);
}

TEST_P(ProfileSuite, BoostedCurvatureMatchesDifferences) {
    const auto [c, n] = GetParam();
    Vec center = Vec::Ones(n).normalized();
    const trough::Trough z(profile(c, n), {center, 1.1});
    const int order = trough::curvature_order(c, n);
    for (double r : {0.5, 1.5}) {
        Vec x = Vec::Zero(n);
        x(n - 1) = r;
        x(0) = -0.3 * r;
        const auto j = geom::fd_jet([&](const Vec& y) { return z.value(y); }, x, 1e-3);
        const auto gq = geom::graph_quantities(j.grad, j.hess);
        EXPECT_NEAR(symk::sigma(gq.kappa, order), trough::curvature_value(c, n), 1e-3);
    }
}

TEST_P(ProfileSuite, DualIsConjugate) {
    const auto [c, n] = GetParam();
    const trough::Trough z(profile(c, n), {e1(n), 2.0});
    Vec xi = Vec::Zero(n);
    xi(0) = 0.2;
    if (n > 1) xi(1) = 0.3;
    Vec arg;
    const double d = z.dual(xi, &arg);
    Vec g;
    const double v = z.value(arg, &g);
    EXPECT_NEAR((g - xi).norm(), 0.0, 1e-8);
    EXPECT_NEAR(d, arg.dot(xi) - v, 1e-8);
    // Fenchel inequality at other points
    for (double t : {-3.0, 0.0, 2.0}) {
        Vec x = Vec::Constant(n, t);
        EXPECT_GE(d, x.dot(xi) - z.value(x) - 1e-10);
    }
    Vec outside = Vec::Zero(n);
    outside(0) = -0.9;
    EXPECT_EQ(z.dual(outside), std::numeric_limits<double>::infinity());
}

TEST_P(ProfileSuite, AsymptoticGaps) {
    const auto [c, n] = GetParam();
    const trough::Trough z(profile(c, n), {e1(n), M_PI / 2});
    const auto back = trough::asymptotic_gap(z, -e1(n), {10, 15, 20});
    for (std::size_t i = 1; i < back.size(); ++i) EXPECT_LE(back[i], back[i - 1]);
    EXPECT_NEAR(back.back(), profile(c, n)->level(), 1e-3 + profile(c, n)->entry_gap);
    const auto fwd = trough::asymptotic_gap(z, e1(n), {10, 100, 1000});
    EXPECT_LT(fwd.back(), 1e-3);
    for (double gap : fwd) EXPECT_GT(gap, 0.0);
}

INSTANTIATE_TEST_SUITE_P(Troughs, ProfileSuite,
                         ::testing::Combine(::testing::Values(Curvature::mean, Curvature::gauss), ::testing::Values(2, 3)));

TEST(Profile, EntryLevelsAndOrdering) {
    for (int n : {2, 3}) {
        const auto& m = *profile(Curvature::mean, n);
        const auto& g = *profile(Curvature::gauss, n);
        EXPECT_DOUBLE_EQ(m.level(), (n - 1.0) / n);
        EXPECT_DOUBLE_EQ(g.level(), 0.0);
        for (double t = m.t_min; t <= m.t_max; t += 0.01) ASSERT_GT(m.value(t), g.value(t)) << t;
    }
}

TEST(Profile, TailsAreContinuous) {
    const auto& p = *profile(Curvature::mean, 3);
    EXPECT_NEAR(p.value(p.t_min - 1e-9), p.value(p.t_min), 1e-9);
    EXPECT_NEAR(p.value(p.t_max + 1e-9), p.value(p.t_max), 1e-8);
    EXPECT_NEAR(p.slope(p.t_max + 1e-9), p.slope(p.t_max), 1e-8);
}

TEST(Profile, CsvAndMetadata) {
    const auto& p = *profile(Curvature::gauss, 2);
    std::ostringstream os;
    p.write_csv(os);
    EXPECT_EQ(os.str().substr(0, 12), "t,f,fprime\n-");
    const auto md = p.metadata();
    EXPECT_EQ(md["type"], "sigma_n");
    EXPECT_EQ(md["n"], 2);
}

TEST(Cap, BoostParameters) {
    const auto hemi = trough::cap_to_boost({e1(3), M_PI / 2});
    EXPECT_NEAR(hemi.alpha, 0.0, 1e-15);
    const auto third = trough::cap_to_boost({e1(3), M_PI / 3});
    EXPECT_NEAR(third.alpha, -0.5, 1e-14);
    EXPECT_NEAR((third.rotation - trough::Mat::Identity(3, 3)).norm(), 0.0, 1e-14);
    const auto flip = trough::cap_to_boost({-e1(3), M_PI / 2});
    EXPECT_NEAR(flip.alpha, 0.0, 1e-15);
    EXPECT_NEAR((flip.rotation * e1(3) + e1(3)).norm(), 0.0, 1e-14);
    EXPECT_NEAR(flip.rotation.determinant(), 1.0, 1e-14);
    EXPECT_THROW((void)trough::cap_to_boost({e1(3), 0.0}), std::domain_error);
    EXPECT_THROW((void)trough::cap_to_boost({e1(3), M_PI}), std::domain_error);
}

TEST(Cap, SupportFunction) {
    const trough::Cap hemi{e1(3), M_PI / 2};
    EXPECT_NEAR(trough::cap_support(hemi, (Vec(3) << -1, 1, 0).finished()), 1.0, 1e-14);
    EXPECT_NEAR(trough::cap_support(hemi, (Vec(3) << 2, 0, 0).finished()), 2.0, 1e-14);
    EXPECT_NEAR(trough::cap_support(hemi, (Vec(3) << -2, 0, 0).finished()), 0.0, 1e-14);
}

TEST(Trough, StandardEvaluation) {
    const trough::Trough z(profile(Curvature::mean, 3), {e1(3), M_PI / 2});
    EXPECT_NEAR(z.value((Vec(3) << 1.5, 0, 0).finished()), z.profile().value(1.5), 1e-14);
    const double f0 = z.profile().value(0.0);
    EXPECT_NEAR(z.value((Vec(3) << 0, 3, 4).finished()), std::sqrt(f0 * f0 + 25), 1e-14);
}
