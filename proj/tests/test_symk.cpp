#include "spacelike/symk.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <random>

using namespace spacelike;
using symk::Vec;

namespace {

// Independent oracle: sum over all k-subsets by bitmask enumeration.
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

Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out(i++) = x;
    return out;
}

}  // namespace

TEST(Sigma, Examples) {
    EXPECT_DOUBLE_EQ(symk::sigma(v({1, 1, 1, 1}), 2), 6.0);
    EXPECT_DOUBLE_EQ(symk::sigma(v({1, 2, 3}), 2), 11.0);
    EXPECT_DOUBLE_EQ(symk::sigma(v({5, -5, 3}), 1), 3.0);
    EXPECT_DOUBLE_EQ(symk::sigma(v({5, -5, 3}), 3), -75.0);
    EXPECT_DOUBLE_EQ(symk::sigma(v({2, 3}), 0), 1.0);
}

TEST(Sigma, OutOfRangeOrder) {
    EXPECT_THROW((void)symk::sigma(v({1, 2}), 3), std::domain_error);
    EXPECT_THROW((void)symk::sigma(v({1, 2}), -1), std::domain_error);
}

TEST(Sigma, MatchesEnumerationAndExpansion) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-3, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 8;
        Vec l(n);
        for (int i = 0; i < n; ++i) l(i) = U(rng);
        for (int k = 0; k <= n; ++k) {
            const double ref = sigma_enum(l, k);
            EXPECT_NEAR(symk::sigma(l, k), ref, 1e-12 * std::max(1.0, std::abs(ref)));
            if (k >= 1)
                for (int i = 0; i < n; ++i) {
                    const double e = symk::sigma_minus(l, k, {i}) + l(i) * symk::sigma_minus(l, k - 1, {i});
                    EXPECT_NEAR(e, ref, 1e-12 * std::max(1.0, std::abs(ref)));
                }
        }
    }
}

TEST(SigmaMinus, Examples) {
    EXPECT_DOUBLE_EQ(symk::sigma_minus(v({1, 2, 3}), 2, {0}), 6.0);
    EXPECT_DOUBLE_EQ(symk::sigma_minus(v({1, 1, 1}), 1, {1, 2}), 1.0);
    EXPECT_DOUBLE_EQ(symk::sigma_minus(v({2, 3, 4}), 0, {0}), 1.0);
    EXPECT_THROW((void)symk::sigma_minus(v({1, 2, 3}), 1, {1, 1}), std::domain_error);
    EXPECT_THROW((void)symk::sigma_minus(v({1, 2, 3}), 1, {5}), std::domain_error);
}

TEST(GardingCone, Examples) {
    EXPECT_TRUE(symk::in_garding_cone(v({1, 1, 1}), 3));
    EXPECT_FALSE(symk::in_garding_cone(v({-1, -1, -1}), 1));
    EXPECT_TRUE(symk::in_garding_cone(v({3, 3, -1}), 2));
    EXPECT_FALSE(symk::in_garding_cone(v({3, 3, -1}), 3));
}

TEST(QuotientF, Examples) {
    for (int n = 2; n <= 5; ++n)
        for (int k = 1; k <= n; ++k)
            EXPECT_NEAR(symk::quotient_F(Vec::Ones(n), k), std::pow(symk::binomial(n, k), -1.0 / k), 1e-14);
    EXPECT_NEAR(symk::quotient_F(v({2, 2, 2}), 2), 2.0 / std::sqrt(3.0), 1e-14);
    EXPECT_NEAR(symk::quotient_F(v({1, 2, 4}), 2), std::sqrt(8.0 / 7.0), 1e-14);
    EXPECT_THROW((void)symk::quotient_F(v({1, -2, 4}), 2), symk::ConeViolation);
}

TEST(QuotientF, GradientClosedForm) {
    const Vec g = symk::quotient_F_gradient(Vec::Ones(3), 2);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(g(i), std::sqrt(3.0) / 9.0, 1e-14);
    const Vec l = v({1, 2, 4});
    const Vec gl = symk::quotient_F_gradient(l, 2);
    EXPECT_NEAR(l.dot(gl), symk::quotient_F(l, 2), 1e-13);
    for (int i = 0; i < 3; ++i) {
        Vec a = l, b = l;
        a(i) += 1e-6;
        b(i) -= 1e-6;
        const double fd = (symk::quotient_F(a, 2) - symk::quotient_F(b, 2)) / 2e-6;
        EXPECT_NEAR(gl(i), fd, 1e-6 * std::abs(gl(i)));
    }
}

TEST(QuotientF, ConcaveAndTraceBound) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.1, 10);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 4;
        const int k = 1 + trial % n;
        Vec a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a(i) = U(rng);
            b(i) = U(rng);
        }
        for (double t : {0.25, 0.5, 0.75})
            EXPECT_GE(symk::quotient_F(t * a + (1 - t) * b, k),
                      t * symk::quotient_F(a, k) + (1 - t) * symk::quotient_F(b, k) - 1e-12);
        EXPECT_GE(symk::quotient_F_gradient(a, k).sum(), symk::rhs_constant(n, k) - 1e-12);
    }
}

TEST(MatrixF, IdentityAndRotationInvariance) {
    const auto mf = symk::matrix_F(symk::SymMatrix(symk::Mat::Identity(3, 3)), 2);
    EXPECT_NEAR(mf.value, 1.0 / std::sqrt(3.0), 1e-14);
    EXPECT_NEAR((mf.gradient - std::sqrt(3.0) / 9.0 * symk::Mat::Identity(3, 3)).norm(), 0.0, 1e-13);

    const symk::Mat A = v({1, 2, 4}).asDiagonal();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    symk::Mat R(3, 3);
    for (int i = 0; i < 9; ++i) R(i) = N(rng);
    const symk::Mat Q = Eigen::HouseholderQR<symk::Mat>(R).householderQ();
    EXPECT_NEAR(symk::matrix_F(symk::SymMatrix(Q.transpose() * A * Q), 2).value,
                symk::matrix_F(symk::SymMatrix(A), 2).value, 1e-13);
}

TEST(MatrixF, GradientMatchesDifferences) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N;
    for (int trial = 0; trial < 20; ++trial) {
        symk::Mat B(3, 3);
        for (int i = 0; i < 9; ++i) B(i) = N(rng);
        const symk::Mat A = B * B.transpose() + 0.5 * symk::Mat::Identity(3, 3);
        const auto mf = symk::matrix_F(symk::SymMatrix(A), 2);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                symk::Mat E = symk::Mat::Zero(3, 3);
                E(i, j) = 1e-6;
                // symmetric perturbation splits the derivative over (i,j) and (j,i)
                const double fp = symk::matrix_F(symk::SymMatrix(A + E), 2).value;
                const double fm = symk::matrix_F(symk::SymMatrix(A - E), 2).value;
                const double fd = (fp - fm) / 2e-6;
                const double ref = i == j ? mf.gradient(i, j) : 0.5 * (mf.gradient(i, j) + mf.gradient(j, i));
                EXPECT_NEAR(fd, ref, 1e-6 * std::max(1.0, std::abs(ref)));
            }
    }
}

TEST(MatrixF, SecondDerivativeMatchesDifferences) {
    const symk::Mat A = v({1, 2, 4}).asDiagonal();
    symk::Mat H(3, 3);
    H << 0.3, 0.1, -0.2, 0.1, -0.4, 0.5, -0.2, 0.5, 0.2;
    const double d2 = symk::matrix_F_second(symk::SymMatrix(A), symk::SymMatrix(H), 2);
    const double t = 1e-4;
    auto F = [&](double s) { return symk::matrix_F(symk::SymMatrix(A + s * H), 2).value; };
    EXPECT_NEAR(d2, (F(t) - 2 * F(0) + F(-t)) / (t * t), 1e-5);
    EXPECT_LT(d2, 0.0);
}

TEST(Maclaurin, Examples) {
    const auto ones = symk::maclaurin_chain(Vec::Ones(3));
    for (double m : ones) EXPECT_NEAR(m, 1.0, 1e-14);
    const auto two = symk::maclaurin_chain(v({1, 4}));
    EXPECT_NEAR(two[0], 2.5, 1e-14);
    EXPECT_NEAR(two[1], 2.0, 1e-14);
    const auto three = symk::maclaurin_chain(v({1, 2, 4}));
    EXPECT_GT(three[0], three[1]);
    EXPECT_GT(three[1], three[2]);
}
