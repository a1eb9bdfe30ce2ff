#pragma once

#include "spacelike/symk.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spacelike::geom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct SpacelikeViolation : std::domain_error {
    using std::domain_error::domain_error;
};
struct AdmissibilityError : std::domain_error {
    using std::domain_error::domain_error;
};
struct MarginError : std::domain_error {
    using std::domain_error::domain_error;
};

using ScalarField = std::function<double(const Vec&)>;

/// Ascending eigenvalues with eigenvector signs fixed (largest-magnitude component positive).
struct SortedEigen {
    Vec values;
    Mat vectors;
};

[[nodiscard]] inline SortedEigen eigen_ascending(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
    SortedEigen out{es.eigenvalues(), es.eigenvectors()};
    for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
        Eigen::Index imax = 0;
        out.vectors.col(j).cwiseAbs().maxCoeff(&imax);
        if (out.vectors(imax, j) < 0) out.vectors.col(j) *= -1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Primal graph quantities

struct GraphQuantities {
    Mat metric;            // g_ij = delta_ij - u_i u_j
    double w = 1.0;        // sqrt(1 - |Du|^2)
    Vec normal;            // (Du, 1) / w
    Mat second_ff;         // u_ij / w
    Mat curvature_matrix;  // (1/w) gamma u gamma
    Vec kappa;             // ascending
};

/// gamma^{ik} = delta_ik + u_i u_k / (w (1 + w)), the square root of g^{-1}.
[[nodiscard]] inline Mat gamma_primal(const Vec& du) {
    const double w = std::sqrt(1.0 - du.squaredNorm());
    return Mat::Identity(du.size(), du.size()) + du * du.transpose() / (w * (1.0 + w));
}

[[nodiscard]] inline GraphQuantities graph_quantities(const Vec& du, const Mat& d2u) {
    const double q = du.squaredNorm();
    if (!(q < 1.0)) throw SpacelikeViolation("graph_quantities: |Du| >= 1");
    const auto n = du.size();
    GraphQuantities g;
    g.w = std::sqrt(1.0 - q);
    g.metric = Mat::Identity(n, n) - du * du.transpose();
    g.normal = Vec(n + 1);
    g.normal.head(n) = du / g.w;
    g.normal(n) = 1.0 / g.w;
    const Mat sym = 0.5 * (d2u + d2u.transpose());
    g.second_ff = sym / g.w;
    const Mat gam = gamma_primal(du);
    g.curvature_matrix = gam * sym * gam / g.w;
    g.kappa = eigen_ascending(g.curvature_matrix).values;
    return g;
}

/// v = <X, nu> = (x.Du - u) / w.
[[nodiscard]] inline double support_function(const Vec& x, double u, const Vec& du) {
    const double q = du.squaredNorm();
    if (!(q < 1.0)) throw SpacelikeViolation("support_function: |Du| >= 1");
    return (x.dot(du) - u) / std::sqrt(1.0 - q);
}

struct Jet {
    double value = 0.0;
    Vec grad;
    Mat hess;
};

/// Second-order central differences of a callable at x with step h.
template <class Fn>
[[nodiscard]] Jet fd_jet(Fn&& f, const Vec& x, double h) {
    const auto n = x.size();
    Jet j{f(x), Vec(n), Mat(n, n)};
    Vec y = x;
    for (Eigen::Index a = 0; a < n; ++a) {
        y(a) = x(a) + h;
        const double fp = f(y);
        y(a) = x(a) - h;
        const double fm = f(y);
        y(a) = x(a);
        j.grad(a) = (fp - fm) / (2 * h);
        j.hess(a, a) = (fp - 2 * j.value + fm) / (h * h);
    }
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a + 1; b < n; ++b) {
            double acc = 0.0;
            for (int sa : {1, -1})
                for (int sb : {1, -1}) {
                    y(a) = x(a) + sa * h;
                    y(b) = x(b) + sb * h;
                    acc += sa * sb * f(y);
                }
            y(a) = x(a);
            y(b) = x(b);
            j.hess(a, b) = j.hess(b, a) = acc / (4 * h * h);
        }
    return j;
}

// ---------------------------------------------------------------------------
// Structured grids

/// Samples on an axis-aligned lattice, with a mask selecting the active nodes.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(Vec origin, Vec spacing, std::vector<int> dims)
        : origin_(std::move(origin)), spacing_(std::move(spacing)), dims_(std::move(dims)) {
        if (origin_.size() != spacing_.size() || spacing_.size() != static_cast<Eigen::Index>(dims_.size()))
            throw std::invalid_argument("GridFunction: inconsistent dimensions");
        std::size_t total = 1;
        for (std::size_t a = 0; a < dims_.size(); ++a) {
            if (!(spacing_(a) > 0)) throw std::invalid_argument("GridFunction: spacing must be positive");
            if (dims_[a] < 1) throw std::invalid_argument("GridFunction: empty axis");
            total *= dims_[a];
        }
        values_.assign(total, 0.0);
        mask_.assign(total, 1);
    }

    /// Box [lo, hi] with (approximately) the given spacing on every axis.
    static GridFunction box(const Vec& lo, const Vec& hi, double h) {
        std::vector<int> dims(lo.size());
        Vec sp(lo.size());
        for (Eigen::Index a = 0; a < lo.size(); ++a) {
            dims[a] = static_cast<int>(std::lround((hi(a) - lo(a)) / h)) + 1;
            sp(a) = dims[a] > 1 ? (hi(a) - lo(a)) / (dims[a] - 1) : h;
        }
        return GridFunction(lo, sp, dims);
    }

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(dims_.size()); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] const std::vector<int>& dims() const noexcept { return dims_; }
    [[nodiscard]] const Vec& origin() const noexcept { return origin_; }
    [[nodiscard]] const Vec& spacing() const noexcept { return spacing_; }

    [[nodiscard]] std::size_t flat(const std::vector<int>& idx) const {
        std::size_t f = 0;
        for (int a = dim() - 1; a >= 0; --a) f = f * dims_[a] + idx[a];
        return f;
    }
    [[nodiscard]] std::vector<int> multi(std::size_t f) const {
        std::vector<int> idx(dims_.size());
        for (std::size_t a = 0; a < dims_.size(); ++a) {
            idx[a] = static_cast<int>(f % dims_[a]);
            f /= dims_[a];
        }
        return idx;
    }
    [[nodiscard]] Vec point(std::size_t f) const {
        const auto idx = multi(f);
        Vec p(dim());
        for (int a = 0; a < dim(); ++a) p(a) = origin_(a) + idx[a] * spacing_(a);
        return p;
    }

    [[nodiscard]] double& operator[](std::size_t f) { return values_[f]; }
    [[nodiscard]] double operator[](std::size_t f) const { return values_[f]; }
    [[nodiscard]] bool active(std::size_t f) const { return mask_[f] != 0; }
    void set_active(std::size_t f, bool on) { mask_[f] = on ? 1 : 0; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    /// Neighbor along axis a at offset s, if active.
    [[nodiscard]] bool neighbor(std::size_t f, int a, int s, std::size_t& out) const {
        const auto idx = multi(f);
        const int j = idx[a] + s;
        if (j < 0 || j >= dims_[a]) return false;
        std::size_t stride = 1;
        for (int b = 0; b < a; ++b) stride *= dims_[b];
        out = s >= 0 ? f + stride * s : f - stride * static_cast<std::size_t>(-s);
        return active(out);
    }

    template <class Fn>
    void fill(Fn&& fn) {
        for (std::size_t f = 0; f < size(); ++f) values_[f] = fn(point(f));
    }

    /// Gradient: central in the interior, one-sided second order at the mask boundary.
    [[nodiscard]] Vec gradient(std::size_t f) const {
        Vec g(dim());
        for (int a = 0; a < dim(); ++a) g(a) = axis_derivative(f, a);
        return g;
    }

    /// Hessian with the same stencil policy; mixed terms differentiate the axis derivative.
    [[nodiscard]] Mat hessian(std::size_t f) const {
        const int d = dim();
        Mat H(d, d);
        for (int a = 0; a < d; ++a) H(a, a) = axis_second(f, a);
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) {
                H(a, b) = H(b, a) = mixed(f, a, b);
            }
        return H;
    }

    [[nodiscard]] nlohmann::json descriptor() const {
        nlohmann::json j;
        j["dim"] = dim();
        j["dims"] = dims_;
        j["origin"] = std::vector<double>(origin_.data(), origin_.data() + origin_.size());
        j["spacing"] = std::vector<double>(spacing_.data(), spacing_.data() + spacing_.size());
        std::size_t on = 0;
        for (auto m : mask_) on += m;
        j["active"] = on;
        return j;
    }

    void write_csv(std::ostream& os) const {
        for (int a = 0; a < dim(); ++a) os << "x" << a << ",";
        os << "h=";
        for (int a = 0; a < dim(); ++a) os << (a ? ";" : "") << spacing_(a);
        os << ",mask,value\n";
        os.precision(17);
        for (std::size_t f = 0; f < size(); ++f) {
            const Vec p = point(f);
            for (int a = 0; a < dim(); ++a) os << p(a) << ",";
            os << "," << int(mask_[f]) << "," << values_[f] << "\n";
        }
    }

private:
    // first derivative along axis a, optionally on a shifted node
    [[nodiscard]] double axis_derivative(std::size_t f, int a) const {
        const double h = spacing_(a);
        std::size_t p = 0, m = 0, p2 = 0, m2 = 0;
        const bool hp = neighbor(f, a, 1, p), hm = neighbor(f, a, -1, m);
        if (hp && hm) return (values_[p] - values_[m]) / (2 * h);
        if (hp && neighbor(f, a, 2, p2)) return (-3 * values_[f] + 4 * values_[p] - values_[p2]) / (2 * h);
        if (hm && neighbor(f, a, -2, m2)) return (3 * values_[f] - 4 * values_[m] + values_[m2]) / (2 * h);
        throw std::domain_error("GridFunction: stencil does not fit in the mask");
    }

    [[nodiscard]] double axis_second(std::size_t f, int a) const {
        const double h2 = spacing_(a) * spacing_(a);
        std::size_t p = 0, m = 0, q1 = 0, q2 = 0, q3 = 0;
        const bool hp = neighbor(f, a, 1, p), hm = neighbor(f, a, -1, m);
        if (hp && hm) return (values_[p] - 2 * values_[f] + values_[m]) / h2;
        if (hp && neighbor(f, a, 2, q2) && neighbor(f, a, 3, q3)) {
            q1 = p;
            return (2 * values_[f] - 5 * values_[q1] + 4 * values_[q2] - values_[q3]) / h2;
        }
        if (hm && neighbor(f, a, -2, q2) && neighbor(f, a, -3, q3)) {
            q1 = m;
            return (2 * values_[f] - 5 * values_[q1] + 4 * values_[q2] - values_[q3]) / h2;
        }
        throw std::domain_error("GridFunction: stencil does not fit in the mask");
    }

    [[nodiscard]] double mixed(std::size_t f, int a, int b) const {
        const double h = spacing_(b);
        std::size_t p = 0, m = 0, p2 = 0, m2 = 0;
        const bool hp = neighbor(f, b, 1, p), hm = neighbor(f, b, -1, m);
        if (hp && hm) return (axis_derivative(p, a) - axis_derivative(m, a)) / (2 * h);
        if (hp && neighbor(f, b, 2, p2))
            return (-3 * axis_derivative(f, a) + 4 * axis_derivative(p, a) - axis_derivative(p2, a)) / (2 * h);
        if (hm && neighbor(f, b, -2, m2))
            return (3 * axis_derivative(f, a) - 4 * axis_derivative(m, a) + axis_derivative(m2, a)) / (2 * h);
        throw std::domain_error("GridFunction: stencil does not fit in the mask");
    }

    Vec origin_, spacing_;
    std::vector<int> dims_;
    std::vector<double> values_;
    std::vector<unsigned char> mask_;
};

/// True when the full central stencil (all 3^d neighbors) of node f is active.
[[nodiscard]] inline bool interior_node(const GridFunction& g, std::size_t f) {
    if (!g.active(f)) return false;
    const auto idx = g.multi(f);
    const int d = g.dim();
    std::vector<int> off(d, -1);
    while (true) {
        std::vector<int> j(d);
        for (int a = 0; a < d; ++a) {
            j[a] = idx[a] + off[a];
            if (j[a] < 0 || j[a] >= g.dims()[a]) return false;
        }
        if (!g.active(g.flat(j))) return false;
        int a = 0;
        while (a < d && off[a] == 1) off[a++] = -1;
        if (a == d) break;
        ++off[a];
    }
    return true;
}

// ---------------------------------------------------------------------------
// Legendre transform

namespace detail {

struct Argmax {
    std::size_t node = 0;
    double value = -std::numeric_limits<double>::infinity();
};

inline Argmax sample_sup(const GridFunction& g, const std::vector<std::size_t>& nodes,
                         const std::vector<Vec>& pts, const Vec& y) {
    Argmax best;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double v = pts[i].dot(y) - g[nodes[i]];
        if (v > best.value) best = {i, v};
    }
    return best;
}

}  // namespace detail

/// Conjugate sup_x (x.y - u(x)) of a sampled convex function, evaluated on the
/// nodes of `target`; coarse argmax then one Newton step on the local quadratic
/// model. Nodes whose argmax is not an interior sample are deactivated.
[[nodiscard]] inline GridFunction legendre(const GridFunction& g, GridFunction target) {
    std::vector<std::size_t> nodes;
    std::vector<Vec> pts;
    std::vector<bool> inner;
    for (std::size_t f = 0; f < g.size(); ++f)
        if (g.active(f)) {
            nodes.push_back(f);
            pts.push_back(g.point(f));
            inner.push_back(interior_node(g, f));
        }
    for (std::size_t f = 0; f < target.size(); ++f) {
        if (!target.active(f)) continue;
        const Vec y = target.point(f);
        const auto best = detail::sample_sup(g, nodes, pts, y);
        if (!inner[best.node]) {
            target.set_active(f, false);
            target[f] = best.value;
            continue;
        }
        const std::size_t node = nodes[best.node];
        const Vec gr = g.gradient(node);
        const Mat H = g.hessian(node);
        Eigen::LLT<Mat> llt(H);
        if (llt.info() != Eigen::Success)
            throw AdmissibilityError("legendre: input Hessian is not positive definite");
        const Vec r = y - gr;
        const Vec s = llt.solve(r);
        target[f] = pts[best.node].dot(y) - g[node] + 0.5 * r.dot(s);
    }
    return target;
}

/// Legendre transform on a grid over the bounding box of the sampled gradient image.
[[nodiscard]] inline GridFunction legendre(const GridFunction& g, double out_spacing) {
    const int d = g.dim();
    Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
    Vec hi = -lo;
    for (std::size_t f = 0; f < g.size(); ++f)
        if (interior_node(g, f)) {
            const Vec gr = g.gradient(f);
            lo = lo.cwiseMin(gr);
            hi = hi.cwiseMax(gr);
        }
    // align the output lattice to multiples of the spacing
    for (int a = 0; a < d; ++a) {
        lo(a) = std::ceil(lo(a) / out_spacing) * out_spacing;
        hi(a) = std::floor(hi(a) / out_spacing) * out_spacing;
    }
    return legendre(g, GridFunction::box(lo, hi, out_spacing));
}

// ---------------------------------------------------------------------------
// Dual and hyperbolic quantities

[[nodiscard]] inline double what(const Vec& xi) { return std::sqrt(1.0 - xi.squaredNorm()); }

/// gamma*_ij = delta_ij - xi_i xi_j / (1 + what); its square is delta - xi xi^T.
[[nodiscard]] inline Mat gamma_dual(const Vec& xi) {
    const double w = what(xi);
    return Mat::Identity(xi.size(), xi.size()) - xi * xi.transpose() / (1.0 + w);
}

/// what * gamma* D2u* gamma*; its eigenvalues are the curvature radii.
[[nodiscard]] inline Mat dual_operator(const Vec& xi, const Mat& d2u) {
    const Mat gs = gamma_dual(xi);
    return what(xi) * gs * (0.5 * (d2u + d2u.transpose())) * gs;
}

struct DualCurvatures {
    Mat second_ff;   // inverse Hessian / what
    Mat winv;        // what * g * D2u*
    Vec kappa_star;  // ascending curvature radii
};

[[nodiscard]] inline DualCurvatures dual_curvatures(const Vec& xi, const Mat& d2u) {
    if (!(xi.squaredNorm() < 1.0)) throw MarginError("dual_curvatures: |xi| >= 1");
    Eigen::LLT<Mat> llt(0.5 * (d2u + d2u.transpose()));
    if (llt.info() != Eigen::Success) throw AdmissibilityError("dual_curvatures: D2u* not positive definite");
    const auto n = xi.size();
    const double w = what(xi);
    DualCurvatures out;
    out.second_ff = llt.solve(Mat::Identity(n, n)) / w;
    out.winv = w * (Mat::Identity(n, n) - xi * xi.transpose()) * d2u;
    out.kappa_star = eigen_ascending(dual_operator(xi, d2u)).values;
    return out;
}

/// Covariant Klein-ball Hessian of ut = u/what in the frame what*gamma* d_xi,
/// minus ut*delta, from the coordinate derivatives of ut.
[[nodiscard]] inline Mat klein_from_derivatives(const Vec& xi, double ut, const Vec& dut, const Mat& d2ut) {
    const auto n = xi.size();
    const double w2 = 1.0 - xi.squaredNorm();
    const Mat cov = d2ut - (xi * dut.transpose() + dut * xi.transpose()) / w2;
    const Mat gs = gamma_dual(xi);
    Mat out = w2 * gs * cov * gs;
    out -= ut * Mat::Identity(n, n);
    return 0.5 * (out + out.transpose());
}

inline void require_margin(const Vec& xi, double margin, const char* where) {
    if (!(xi.norm() < 1.0 - margin))
        throw MarginError(std::string(where) + ": |xi| exceeds 1 - margin");
}

/// Left side of the Klein identity for a callable u, differences with step h.
template <class Fn>
[[nodiscard]] Mat klein_hessian_lhs(Fn&& u, const Vec& xi, double h, double margin = 0.05) {
    require_margin(xi, margin, "klein_hessian_lhs");
    auto ut = [&](const Vec& y) { return u(y) / what(y); };
    const Jet j = fd_jet(ut, xi, h);
    return klein_from_derivatives(xi, j.value, j.grad, j.hess);
}

/// Left side of the Klein identity at grid node f.
[[nodiscard]] inline Mat klein_hessian_lhs(const GridFunction& u, std::size_t f, double margin = 0.05) {
    const Vec xi = u.point(f);
    require_margin(xi, margin, "klein_hessian_lhs");
    // sample ut = u / what only on the 3^d block around f
    GridFunction ut = u;
    const auto idx = u.multi(f);
    const int d = u.dim();
    std::vector<int> off(d, -2);
    while (true) {
        std::vector<int> j(d);
        bool inside = true;
        for (int a = 0; a < d; ++a) {
            j[a] = idx[a] + off[a];
            inside = inside && j[a] >= 0 && j[a] < u.dims()[a];
        }
        if (inside) {
            const auto q = u.flat(j);
            const Vec p = u.point(q);
            if (p.squaredNorm() < 1.0) ut[q] = u[q] / what(p);
            else ut.set_active(q, false);
        }
        int a = 0;
        while (a < d && off[a] == 3) off[a++] = -2;
        if (a == d) break;
        ++off[a];
    }
    return klein_from_derivatives(xi, ut[f], ut.gradient(f), ut.hessian(f));
}

/// Right side of the Klein identity.
[[nodiscard]] inline Mat klein_hessian_rhs(const Vec& xi, const Mat& d2u) { return dual_operator(xi, d2u); }

// ---------------------------------------------------------------------------
// Lorentz boosts

/// Boost of a point of R^{n,1} (last coordinate is time) along a unit spatial axis.
[[nodiscard]] inline Vec lorentz_boost(const Vec& p, double alpha, const Vec& axis) {
    if (!(std::abs(alpha) < 1.0)) throw std::domain_error("lorentz_boost: |alpha| must be < 1");
    const auto n = p.size() - 1;
    const double s = std::sqrt(1.0 - alpha * alpha);
    const double x1 = p.head(n).dot(axis);
    const double t = p(n);
    Vec q = p;
    const double x1n = (x1 - alpha * t) / s;
    q.head(n) += (x1n - x1) * axis;
    q(n) = (t - alpha * x1) / s;
    return q;
}

/// Graph of the boost image of a spacelike graph: x' -> u'(x').
/// Solves the monotone scalar equation for the preimage along the axis.
template <class Fn>
[[nodiscard]] ScalarField boost_graph(Fn u, double alpha, Vec axis) {
    if (!(std::abs(alpha) < 1.0)) throw std::domain_error("boost_graph: |alpha| must be < 1");
    return [u = std::move(u), alpha, axis = std::move(axis)](const Vec& xp) {
        const double s = std::sqrt(1.0 - alpha * alpha);
        const double target = s * xp.dot(axis);
        const Vec perp = xp - xp.dot(axis) * axis;
        auto g = [&](double t) { return t - alpha * u(Vec(perp + t * axis)); };
        // g is increasing with slope in [1 - |alpha|, 1 + |alpha|]
        double t = target + alpha * u(Vec(perp + target * axis));
        for (int it = 0; it < 60; ++it) {
            const double gt = g(t) - target;
            const double dt = 1e-6 * (1.0 + std::abs(t));
            const double slope = (g(t + dt) - g(t - dt)) / (2 * dt);
            const double step = gt / slope;
            t -= step;
            if (std::abs(step) <= 1e-15 * (1.0 + std::abs(t))) break;
        }
        return (u(Vec(perp + t * axis)) - alpha * t) / s;
    };
}

}  // namespace spacelike::geom
