#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spacelike::symk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Principal curvatures or curvature radii; cone queries depend only on the values.
using CurvatureVector = Eigen::VectorXd;

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ConeViolation : std::domain_error {
    using std::domain_error::domain_error;
};

/// All elementary symmetric functions e_0..e_n of z, by the product recurrence.
[[nodiscard]] inline Vec esf_all(const Vec& z) {
    const auto n = z.size();
    Vec e = Vec::Zero(n + 1);
    e(0) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j >= 1; --j)
            e(j) += z(i) * e(j - 1);
    return e;
}

namespace detail {

// sigma with the convention sigma_k = 0 outside [0, n]
inline double esf_or_zero(const Vec& e, int k) {
    if (k < 0 || k >= e.size()) return 0.0;
    return e(k);
}

inline Vec zeroed(const Vec& lambda, std::span<const int> drop) {
    Vec z = lambda;
    for (std::size_t a = 0; a < drop.size(); ++a) {
        const int i = drop[a];
        if (i < 0 || i >= lambda.size())
            throw DomainError("sigma_minus: index " + std::to_string(i) + " out of range");
        for (std::size_t b = 0; b < a; ++b)
            if (drop[b] == i) throw DomainError("sigma_minus: duplicate index " + std::to_string(i));
        z(i) = 0.0;
    }
    return z;
}

inline void require_positive(const Vec& lambda, const char* where) {
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        if (!(lambda(i) > 0.0))
            throw ConeViolation(std::string(where) + ": argument outside the positive cone");
}

inline void require_order(Eigen::Index n, int k, const char* where) {
    if (k < 1 || k > n)
        throw DomainError(std::string(where) + ": need 1 <= k <= n");
}

}  // namespace detail

/// k-th elementary symmetric polynomial, sigma_0 = 1.
[[nodiscard]] inline double sigma(const Vec& lambda, int k) {
    if (k < 0 || k > lambda.size()) throw DomainError("sigma: k out of range");
    return esf_all(lambda)(k);
}

/// sigma_k with the entries listed in `drop` set to zero (0-based indices).
[[nodiscard]] inline double sigma_minus(const Vec& lambda, int k, std::span<const int> drop) {
    if (drop.size() > 2) throw DomainError("sigma_minus: at most two dropped indices");
    if (k < 0 || k > lambda.size()) throw DomainError("sigma_minus: k out of range");
    return esf_all(detail::zeroed(lambda, drop))(k);
}

[[nodiscard]] inline double sigma_minus(const Vec& lambda, int k, std::initializer_list<int> drop) {
    return sigma_minus(lambda, k, std::span<const int>(drop.begin(), drop.size()));
}

/// Strict membership in the Garding cone: sigma_1..sigma_k all > 0.
[[nodiscard]] inline bool in_garding_cone(const Vec& lambda, int k) {
    detail::require_order(lambda.size(), k, "in_garding_cone");
    const Vec e = esf_all(lambda);
    for (int j = 1; j <= k; ++j)
        if (!(e(j) > 0.0)) return false;
    return true;
}

/// (sigma_n / sigma_{n-k})^{1/k} on the positive cone.
[[nodiscard]] inline double quotient_F(const Vec& lambda, int k) {
    const auto n = static_cast<int>(lambda.size());
    detail::require_order(n, k, "quotient_F");
    detail::require_positive(lambda, "quotient_F");
    const Vec e = esf_all(lambda);
    return std::pow(e(n) / e(n - k), 1.0 / k);
}

/// Diagonal derivatives dF/dlambda_i from the closed form
/// k F^{k-1} F^{ii} = sigma_{n-1}(lambda|i) sigma_{n-k}(lambda|i) / sigma_{n-k}^2.
[[nodiscard]] inline CurvatureVector quotient_F_gradient(const Vec& lambda, int k) {
    const auto n = static_cast<int>(lambda.size());
    detail::require_order(n, k, "quotient_F_gradient");
    detail::require_positive(lambda, "quotient_F_gradient");
    const Vec e = esf_all(lambda);
    const double F = std::pow(e(n) / e(n - k), 1.0 / k);
    const double scale = 1.0 / (k * std::pow(F, k - 1) * e(n - k) * e(n - k));
    CurvatureVector g(n);
    for (int i = 0; i < n; ++i) {
        Vec z = lambda;
        z(i) = 0.0;
        const Vec ei = esf_all(z);
        g(i) = ei(n - 1) * ei(n - k) * scale;
    }
    return g;
}

/// Hessian d^2F/dlambda_i dlambda_j, from the logarithmic form of F.
[[nodiscard]] inline Mat quotient_F_hessian(const Vec& lambda, int k) {
    const auto n = static_cast<int>(lambda.size());
    detail::require_order(n, k, "quotient_F_hessian");
    detail::require_positive(lambda, "quotient_F_hessian");
    using detail::esf_or_zero;
    const Vec e = esf_all(lambda);
    const double sn = e(n), snk = e(n - k);
    const double F = std::pow(sn / snk, 1.0 / k);

    Vec g(n);
    std::vector<Vec> single(n);
    for (int i = 0; i < n; ++i) {
        Vec z = lambda;
        z(i) = 0.0;
        single[i] = esf_all(z);
        g(i) = (esf_or_zero(single[i], n - 1) / sn - esf_or_zero(single[i], n - k - 1) / snk) / k;
    }
    Mat H(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double gij = -esf_or_zero(single[i], n - 1) * esf_or_zero(single[j], n - 1) / (sn * sn) +
                         esf_or_zero(single[i], n - k - 1) * esf_or_zero(single[j], n - k - 1) / (snk * snk);
            if (i != j) {
                Vec z = lambda;
                z(i) = 0.0;
                z(j) = 0.0;
                const Vec eij = esf_all(z);
                gij += esf_or_zero(eij, n - 2) / sn - esf_or_zero(eij, n - k - 2) / snk;
            }
            H(i, j) = F * (gij / k + g(i) * g(j));
        }
    }
    return H;
}

/// Symmetric matrix, symmetrized on construction.
class SymMatrix {
public:
    struct Eigen_ {
        Vec values;   // descending
        Mat vectors;  // columns, largest-magnitude component made positive
    };

    SymMatrix() = default;
    explicit SymMatrix(const Mat& a) : a_(0.5 * (a + a.transpose())) {
        if (a.rows() != a.cols()) throw DomainError("SymMatrix: not square");
    }

    [[nodiscard]] const Mat& matrix() const noexcept { return a_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return a_.rows(); }

    [[nodiscard]] Eigen_ eigen() const {
        Eigen::SelfAdjointEigenSolver<Mat> es(a_);
        const auto n = a_.rows();
        Eigen_ out{Vec(n), Mat(n, n)};
        for (Eigen::Index i = 0; i < n; ++i) {
            out.values(i) = es.eigenvalues()(n - 1 - i);
            Vec v = es.eigenvectors().col(n - 1 - i);
            Eigen::Index imax = 0;
            v.cwiseAbs().maxCoeff(&imax);
            if (v(imax) < 0) v = -v;
            out.vectors.col(i) = v;
        }
        return out;
    }

private:
    Mat a_;
};

struct MatrixF {
    double value;
    Mat gradient;  // dF/dA_ij
};

/// F of the eigenvalues of A together with the matrix gradient Q diag(F^ii) Q^T.
[[nodiscard]] inline MatrixF matrix_F(const SymMatrix& A, int k) {
    const auto es = A.eigen();
    const double value = quotient_F(es.values, k);
    const Vec g = quotient_F_gradient(es.values, k);
    return {value, es.vectors * g.asDiagonal() * es.vectors.transpose()};
}

/// Second directional derivative d^2/dt^2 F(A + tH) at t = 0.
/// Off-diagonal eigenpairs use divided differences of F^ii; gaps below
/// `gap` fall back to the symmetric-function limit.
[[nodiscard]] inline double matrix_F_second(const SymMatrix& A, const SymMatrix& H, int k,
                                            double gap = 1e-10) {
    const auto es = A.eigen();
    const auto n = es.values.size();
    const Vec g = quotient_F_gradient(es.values, k);
    const Mat hess = quotient_F_hessian(es.values, k);
    const Mat Ht = es.vectors.transpose() * H.matrix() * es.vectors;
    double out = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q) {
            if (p == q) continue;
            const double dl = es.values(p) - es.values(q);
            const double dd = std::abs(dl) > gap ? (g(p) - g(q)) / dl : hess(p, p) - hess(p, q);
            out += dd * Ht(p, q) * Ht(p, q);
        }
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q) out += hess(p, q) * Ht(p, p) * Ht(q, q);
    return out;
}

/// Normalized means m_j = (sigma_j / binom(n,j))^{1/j}; non-increasing on the positive cone.
[[nodiscard]] inline std::vector<double> maclaurin_chain(const Vec& lambda) {
    detail::require_positive(lambda, "maclaurin_chain");
    const auto n = static_cast<int>(lambda.size());
    const Vec e = esf_all(lambda);
    std::vector<double> m(n);
    double binom = 1.0;
    for (int j = 1; j <= n; ++j) {
        binom = binom * (n - j + 1) / j;
        m[j - 1] = std::pow(e(j) / binom, 1.0 / j);
    }
    return m;
}

[[nodiscard]] inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double b = 1.0;
    for (int j = 1; j <= k; ++j) b = b * (n - k + j) / j;
    return b;
}

/// Right-hand side binom(n,k)^{-1/k} of the dual equation.
[[nodiscard]] inline double rhs_constant(int n, int k) { return std::pow(binomial(n, k), -1.0 / k); }

}  // namespace spacelike::symk
