#pragma once

#include "spacelike/barriers.hpp"
#include "spacelike/geomkit.hpp"
#include "spacelike/solver.hpp"
#include "spacelike/symk.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace spacelike::reconstruct {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using solver::DualSolution;

/// Closed-form dual potential on the ball |xi| < radius.
struct AnalyticDual {
    int n = 3;
    double radius = 1.0;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::function<Mat(const Vec&)> hess;
};

/// u* = -sqrt(1 - |xi|^2), the dual of the hyperboloid sqrt(1 + |x|^2).
[[nodiscard]] inline AnalyticDual hyperboloid_dual(int n) {
    AnalyticDual d;
    d.n = n;
    d.value = [](const Vec& xi) { return -geom::what(xi); };
    d.grad = [](const Vec& xi) { return Vec(xi / geom::what(xi)); };
    d.hess = [](const Vec& xi) {
        const double w = geom::what(xi);
        return Mat(Mat::Identity(xi.size(), xi.size()) / w + xi * xi.transpose() / (w * w * w));
    };
    return d;
}

/// Local quadratic model of u* around a lattice node.
struct QuadraticModel {
    Vec center;
    double value = 0;
    Vec grad;
    Mat hess;

    /// Conjugate of the model: x.xi - q(xi) maximized at xi = center + H^{-1}(x - grad).
    [[nodiscard]] double conjugate(const Vec& x, Vec* argmax = nullptr) const {
        const Vec d = hess.llt().solve(x - grad);
        if (argmax) *argmax = center + d;
        return x.dot(center + d) - (value + grad.dot(d) + 0.5 * d.dot(hess * d));
    }
};

/// Entire graph u(x) = sup_xi (x.xi - u*(xi)) of a dual potential.
class EntireGraphSample {
public:
    /// Grid dual; `trace` is the Dirichlet data on the boundary of the solved domain.
    EntireGraphSample(DualSolution dual, std::function<double(const Vec&)> trace)
        : grid_(std::move(dual)), trace_(std::move(trace)) {
        const auto& g = grid_->grid;
        for (std::size_t f = 0; f < g.size(); ++f)
            if (g.active(f)) active_.push_back(f);
        if (active_.empty()) throw std::domain_error("EntireGraphSample: empty dual grid");
        stride_ = std::max<std::size_t>(1, active_.size() / 4000);
    }

    explicit EntireGraphSample(AnalyticDual dual) : analytic_(std::move(dual)) {}

    [[nodiscard]] int dim() const { return analytic_ ? analytic_->n : grid_->grid.dim(); }
    [[nodiscard]] bool analytic() const { return analytic_.has_value(); }
    [[nodiscard]] const DualSolution& dual() const { return *grid_; }

    /// evaluate_entire; `argmax` receives the maximizing xi, which is the gradient Du(x).
    [[nodiscard]] double value(const Vec& x, Vec* argmax = nullptr) const {
        return analytic_ ? analytic_value(x, argmax) : grid_value(x, argmax);
    }

    double operator()(const Vec& x) const { return value(x); }

    /// Quadratic model of u* at the active node nearest to xi (requires all lattice neighbors active).
    [[nodiscard]] QuadraticModel model_at(const Vec& xi) const {
        if (analytic_) return {xi, analytic_->value(xi), analytic_->grad(xi), analytic_->hess(xi)};
        const auto& g = grid_->grid;
        const auto f = nearest(xi);
        if (!geom::interior_node(g, f)) throw std::domain_error("model_at: node has inactive neighbors");
        return {g.point(f), g[f], g.gradient(f), g.hessian(f)};
    }

    /// Lattice nodes whose full stencil lies in the solved domain.
    [[nodiscard]] std::vector<std::size_t> interior_nodes() const {
        std::vector<std::size_t> out;
        for (auto f : active_)
            if (geom::interior_node(grid_->grid, f)) out.push_back(f);
        return out;
    }

private:
    [[nodiscard]] std::size_t nearest(const Vec& xi) const {
        const auto& g = grid_->grid;
        std::vector<int> idx(g.dim());
        for (int a = 0; a < g.dim(); ++a)
            idx[a] = std::clamp(static_cast<int>(std::lround((xi(a) - g.origin()(a)) / g.spacing()(a))), 0, g.dims()[a] - 1);
        return g.flat(idx);
    }

    // value of a node together with the boundary points on its stencil lines
    [[nodiscard]] double node_score(const Vec& x, std::size_t f, Vec* arg) const {
        const auto& g = grid_->grid;
        const Vec p = g.point(f);
        double best = x.dot(p) - g[f];
        if (arg) *arg = p;
        const auto it = grid_->node_bpoints.find(f);
        if (it != grid_->node_bpoints.end())
            for (int b : it->second) {
                const double s = x.dot(grid_->bpoints[b]) - grid_->bvalues[b];
                if (s > best) {
                    best = s;
                    if (arg) *arg = grid_->bpoints[b];
                }
            }
        return best;
    }

    [[nodiscard]] double grid_value(const Vec& x, Vec* argmax) const {
        const auto& g = grid_->grid;
        const int d = g.dim();
        std::size_t best_f = active_.front();
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < active_.size(); i += stride_) {
            const double s = node_score(x, active_[i], nullptr);
            if (s > best) {
                best = s;
                best_f = active_[i];
            }
        }
        // hill climb over the 3^d lattice neighbourhood
        bool moved = true;
        while (moved) {
            moved = false;
            const auto idx = g.multi(best_f);
            std::vector<int> off(d, -1);
            while (true) {
                std::vector<int> q(d);
                bool ok = true;
                for (int a = 0; a < d; ++a) {
                    q[a] = idx[a] + off[a];
                    ok = ok && q[a] >= 0 && q[a] < g.dims()[a];
                }
                if (ok) {
                    const auto f = g.flat(q);
                    if (f != best_f && g.active(f)) {
                        const double s = node_score(x, f, nullptr);
                        if (s > best) {
                            best = s;
                            best_f = f;
                            moved = true;
                        }
                    }
                }
                int a = 0;
                while (a < d && off[a] == 1) off[a++] = -1;
                if (a == d) break;
                ++off[a];
            }
        }
        Vec arg;
        best = node_score(x, best_f, &arg);
        // quadratic refinement inside the node's cell
        if (geom::interior_node(g, best_f) && (arg - g.point(best_f)).norm() == 0.0) {
            const QuadraticModel q{g.point(best_f), g[best_f], g.gradient(best_f), g.hessian(best_f)};
            Eigen::LLT<Mat> llt(q.hess);
            if (llt.info() == Eigen::Success) {
                Vec xi;
                const double v = q.conjugate(x, &xi);
                if ((xi - q.center).cwiseAbs().maxCoeff() <= 0.5 * g.spacing().maxCoeff() && v > best) {
                    best = v;
                    arg = xi;
                }
            }
        }
        // exact trace on the spherical part of the boundary, once the discrete argmax reaches it
        const double h = grid_->grid.spacing().maxCoeff();
        if (trace_ && x.norm() > 0 && arg.norm() > grid_->domain.radius - 2 * h) {
            if (auto xi = spherical_argmax(x)) {
                const double v = x.dot(*xi) - trace_(*xi);
                if (v > best) {
                    best = v;
                    arg = *xi;
                }
            }
        }
        if (argmax) *argmax = arg;
        return best;
    }

    // maximizer of x.xi - trace(xi) over the sphere |xi| = radius, by the fixed point
    // xi = radius * normalize(x - grad trace(xi))
    [[nodiscard]] std::optional<Vec> spherical_argmax(const Vec& x) const {
        const auto& dom = grid_->domain;
        auto p = dom.spherical_support(x);
        if (!p) return std::nullopt;
        Vec xi = *p;
        const double h = 1e-6;
        for (int it = 0; it < 50; ++it) {
            Vec gr(xi.size()), y = xi;
            for (Eigen::Index a = 0; a < xi.size(); ++a) {
                y(a) = xi(a) + h;
                const double fp = trace_(y);
                y(a) = xi(a) - h;
                const double fm = trace_(y);
                y(a) = xi(a);
                gr(a) = (fp - fm) / (2 * h);
            }
            const Vec next = dom.radius * (x - gr).normalized();
            const double step = (next - xi).norm();
            xi = next;
            if (step < 1e-12) break;
        }
        for (std::size_t i = 0; i < dom.normals.size(); ++i)
            if (dom.normals[i].dot(xi) > dom.offsets[i]) return std::nullopt;
        return xi;
    }

    [[nodiscard]] double analytic_value(const Vec& x, Vec* argmax) const {
        const auto& d = *analytic_;
        Vec xi = x / std::sqrt(1.0 + x.squaredNorm()) * std::min(1.0, d.radius);
        if (xi.norm() >= d.radius) xi *= 0.5;
        auto obj = [&](const Vec& z) { return x.dot(z) - d.value(z); };
        double f = obj(xi);
        for (int it = 0; it < 100; ++it) {
            const Vec g = x - d.grad(xi);
            if (g.norm() < 1e-15 * (1.0 + x.norm())) break;
            const Vec step = d.hess(xi).llt().solve(g);
            double t = 1.0;
            while (t > 1e-16) {
                const Vec z = xi + t * step;
                if (z.norm() < d.radius) {
                    const double fz = obj(z);
                    if (fz >= f) {
                        xi = z;
                        f = fz;
                        break;
                    }
                }
                t *= 0.5;
            }
            if (t <= 1e-16) break;
        }
        if (argmax) *argmax = xi;
        return f;
    }

    std::optional<DualSolution> grid_;
    std::function<double(const Vec&)> trace_;
    std::optional<AnalyticDual> analytic_;
    std::vector<std::size_t> active_;
    std::size_t stride_ = 1;
};

/// Resampling step for local second differences.
[[nodiscard]] inline double local_spacing(const Vec& x) { return std::max(1e-3, 1e-4 * x.norm()); }

/// Graph quantities of u near x. Grid duals use the quadratic model at the node where the
/// supremum for x is attained, so the resample does not cross cell boundaries.
[[nodiscard]] inline geom::GraphQuantities local_graph(const EntireGraphSample& e, const Vec& x) {
    const double h = local_spacing(x);
    geom::Jet j;
    if (e.analytic()) {
        j = geom::fd_jet([&](const Vec& y) { return e.value(y); }, x, h);
    } else {
        Vec xi;
        (void)e.value(x, &xi);
        const auto q = e.model_at(xi);
        j = geom::fd_jet([&](const Vec& y) { return q.conjugate(y); }, x, h);
    }
    return geom::graph_quantities(j.grad, j.hess);
}

struct Witnessed {
    double value = 0;
    Vec witness;
};

/// Max |sigma_k(kappa) - binom(n,k)| over the points.
[[nodiscard]] inline Witnessed curvature_residual(const EntireGraphSample& e, int k, const std::vector<Vec>& points) {
    const int n = e.dim();
    const double target = symk::binomial(n, k);
    Witnessed w{0, points.empty() ? Vec() : points.front()};
    for (const auto& x : points) {
        const auto gq = local_graph(e, x);
        const double r = std::abs(symk::sigma(gq.kappa, k) - target);
        if (!(r <= w.value)) {
            w.value = r;
            w.witness = x;
        }
    }
    return w;
}

/// Points x = Du*(xi) at interior nodes whose full stencil lies in the domain, |x| <= radius,
/// drawn with a seeded generator. Nodes closer than `min_depth` to the domain boundary are
/// skipped: the cut-cell layer there is only first-order accurate.
[[nodiscard]] inline std::vector<Vec> gradient_image_points(const EntireGraphSample& e, double radius, std::size_t count,
                                                            std::uint64_t seed, double min_depth = 0.0) {
    const auto& g = e.dual().grid;
    const auto& dom = e.dual().domain;
    std::vector<Vec> pool;
    for (auto f : e.interior_nodes()) {
        if (dom.depth(g.point(f)) < min_depth) continue;
        const Vec x = g.gradient(f);
        if (x.norm() <= radius) pool.push_back(x);
    }
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    if (pool.size() > count) pool.resize(count);
    return pool;
}

struct GapSequence {
    std::vector<double> radii, gaps;
    double limit = 0, error = 0;
    bool decreasing = true;
};

/// u(r theta) - r * support + phi along a direction of F; the limit is Richardson-extrapolated in 1/r.
[[nodiscard]] inline GapSequence asymptotics_check(const EntireGraphSample& e, const barrier::CapDomain& F,
                                                   const Vec& theta, double phi, const std::vector<double>& radii,
                                                   double support = 1.0) {
    if (!F.contains(theta.normalized())) throw std::domain_error("asymptotics_check: direction not in F");
    if (radii.size() < 3) throw std::invalid_argument("asymptotics_check: need at least three radii");
    GapSequence s;
    s.radii = radii;
    for (double r : radii) s.gaps.push_back(e.value(Vec(r * theta.normalized())) - r * support + phi);
    for (std::size_t i = 1; i < s.gaps.size(); ++i)
        if (s.gaps[i] > s.gaps[i - 1] + 1e-12) s.decreasing = false;
    const std::size_t m = radii.size();
    // two-term fit gap = L + b/r on the last two radii; error from the previous pair
    auto fit = [&](std::size_t i, std::size_t j) {
        return (radii[j] * s.gaps[j] - radii[i] * s.gaps[i]) / (radii[j] - radii[i]);
    };
    s.limit = fit(m - 2, m - 1);
    s.error = std::abs(s.limit - fit(m - 3, m - 2));
    return s;
}

struct GaussImage {
    std::vector<Vec> cloud;
    std::vector<double> margins;  // V_F(theta) - xi.theta minimized over the test mesh (negative = outside)
    std::size_t violations = 0;
    double coverage_gap = 0;      // sup over the mesh of V_F - support of the cloud
};

/// Gradients Du at seeded points of the ball |x| <= R; membership in conv(F) by support functions.
[[nodiscard]] inline GaussImage gauss_image(const EntireGraphSample& e, const barrier::CapDomain& F, double R,
                                            std::size_t count, std::uint64_t seed, double tol = 1e-3) {
    if (count < 1000) throw std::invalid_argument("gauss_image: count must be >= 1000");
    const int n = e.dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const auto mesh = barrier::sphere_mesh(n, n == 2 ? 360 : 1000);
    std::vector<double> V;
    for (const auto& th : mesh) V.push_back(F.support(th));
    GaussImage out;
    std::vector<double> cloud_support(mesh.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < count; ++s) {
        Vec d(n);
        for (int a = 0; a < n; ++a) d(a) = N(rng);
        const Vec x = R * std::pow(U(rng), 1.0 / n) * d.normalized();
        Vec xi;
        (void)e.value(x, &xi);
        double margin = 1.0 - xi.norm();
        for (std::size_t m = 0; m < mesh.size(); ++m) {
            const double p = xi.dot(mesh[m]);
            margin = std::min(margin, V[m] - p);
            cloud_support[m] = std::max(cloud_support[m], p);
        }
        if (margin < -tol) ++out.violations;
        out.cloud.push_back(xi);
        out.margins.push_back(margin);
    }
    for (std::size_t m = 0; m < mesh.size(); ++m) out.coverage_gap = std::max(out.coverage_gap, V[m] - cloud_support[m]);
    return out;
}

struct Sandwich {
    double below_upper = std::numeric_limits<double>::infinity();  // min (upper - u)
    double above_lower = std::numeric_limits<double>::infinity();  // min (u - lower)
    Vec witness_upper, witness_lower;
};

template <class U, class L, class H>
[[nodiscard]] Sandwich sandwich_check(U&& u, L&& lower, H&& upper, const std::vector<Vec>& points) {
    Sandwich s;
    for (const auto& x : points) {
        const double v = u(x);
        const double a = upper(x) - v, b = v - lower(x);
        if (a < s.below_upper) {
            s.below_upper = a;
            s.witness_upper = x;
        }
        if (b < s.above_lower) {
            s.above_lower = b;
            s.witness_lower = x;
        }
    }
    return s;
}

/// Max of (s - u) kappa_max over points of the sublevel set {u < s}.
[[nodiscard]] inline Witnessed pogorelov_diagnostic(const EntireGraphSample& e, double s, const std::vector<Vec>& points) {
    Witnessed w{0, points.empty() ? Vec() : points.front()};
    for (const auto& x : points) {
        const double u = e.value(x);
        if (!(u < s)) throw std::domain_error("pogorelov_diagnostic: sample outside {u < s}");
        const auto gq = local_graph(e, x);
        const double p = (s - u) * gq.kappa.maxCoeff();
        if (p > w.value) {
            w.value = p;
            w.witness = x;
        }
    }
    return w;
}

}  // namespace spacelike::reconstruct
