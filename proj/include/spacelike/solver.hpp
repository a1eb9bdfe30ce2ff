#pragma once

#include "spacelike/barriers.hpp"
#include "spacelike/geomkit.hpp"
#include "spacelike/symk.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace spacelike::solver {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using geom::GridFunction;

/// Intersection of the ball |xi| <= radius with half-spaces normal.xi <= offset (unit normals).
struct ConvexDomain {
    double radius = 1.0;
    std::vector<Vec> normals;
    std::vector<double> offsets;

    /// Signed distance to the boundary, positive inside.
    [[nodiscard]] double depth(const Vec& xi) const {
        double d = radius - xi.norm();
        for (std::size_t i = 0; i < normals.size(); ++i) d = std::min(d, offsets[i] - normals[i].dot(xi));
        return d;
    }

    [[nodiscard]] bool contains(const Vec& xi) const { return depth(xi) >= 0; }

    /// First boundary crossing xi + t*dir, t > 0, for xi inside.
    [[nodiscard]] double exit(const Vec& xi, const Vec& dir) const {
        const double b = xi.dot(dir), a = dir.squaredNorm(), c = xi.squaredNorm() - radius * radius;
        double t = (-b + std::sqrt(std::max(0.0, b * b - a * c))) / a;
        for (std::size_t i = 0; i < normals.size(); ++i) {
            const double s = normals[i].dot(dir);
            if (s > 0) t = std::min(t, (offsets[i] - normals[i].dot(xi)) / s);
        }
        return std::max(t, 0.0);
    }

    /// Support point in direction theta when it lies on the spherical part of the boundary.
    [[nodiscard]] std::optional<Vec> spherical_support(const Vec& theta) const {
        const Vec p = radius * theta.normalized();
        for (std::size_t i = 0; i < normals.size(); ++i)
            if (normals[i].dot(p) > offsets[i]) return std::nullopt;
        return p;
    }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j{{"radius", radius}, {"halfspaces", nlohmann::json::array()}};
        for (std::size_t i = 0; i < normals.size(); ++i)
            j["halfspaces"].push_back({{"normal", std::vector<double>(normals[i].data(), normals[i].data() + normals[i].size())},
                                       {"offset", offsets[i]}});
        return j;
    }
};

/// conv(F) shrunk inward by s, intersected with |xi| <= rho. A single cap is represented exactly;
/// unions use supporting half-spaces on a direction mesh plus the cap axes.
[[nodiscard]] inline ConvexDomain shrunk_hull(const barrier::CapDomain& F, double s, double rho, int mesh = 2000) {
    ConvexDomain d;
    d.radius = rho;
    if (F.caps.size() == 1) {
        const auto& c = F.caps.front();
        d.normals.push_back(-c.center.normalized());
        d.offsets.push_back(-std::cos(c.delta) - s);
    } else {
        std::vector<Vec> dirs = barrier::sphere_mesh(F.n, F.n == 2 ? 720 : mesh);
        for (const auto& c : F.caps) dirs.push_back(-c.center.normalized());
        for (const auto& th : dirs) {
            const double off = F.support(th) - s;
            if (off < rho - 1e-12) {
                d.normals.push_back(th);
                d.offsets.push_back(off);
            }
        }
    }
    return d;
}

/// Approximating Dirichlet problem F(what gamma* D2u* gamma*) = c on a convex domain, u* = phi on the boundary.
struct DirichletProblem {
    int n = 3, k = 2, J = 0;
    double c = 0;
    double shrink = 0;
    ConvexDomain domain;
    std::function<double(const Vec&)> boundary;  // phi, a u*-value
    std::shared_ptr<const barrier::BarrierFunction> lower, upper;
};

struct AssembleOptions {
    int J0 = 4;
    int samples = 0;  // 0: default cap-family density
};

[[nodiscard]] inline DirichletProblem assemble_problem(const barrier::CapDomain& F, int J, int n, int k,
                                                       const barrier::TroughProfiles& profiles,
                                                       const AssembleOptions& opt = {}) {
    if (J < 1) throw std::domain_error("assemble_problem: J must be >= 1");
    symk::detail::require_order(n, k, "assemble_problem");
    if (F.n != n) throw std::domain_error("assemble_problem: cap dimension differs from n");
    DirichletProblem p;
    p.n = n;
    p.k = k;
    p.J = J;
    p.c = symk::rhs_constant(n, k);
    p.shrink = 1.0 / (J + opt.J0);
    p.domain = shrunk_hull(F, p.shrink, 1.0 - p.shrink);
    // the origin-independent emptiness test: some mesh point must lie inside
    bool any = false;
    for (const auto& th : barrier::sphere_mesh(n, 400))
        for (double r : {0.0, 0.25, 0.5, 0.75})
            any = any || p.domain.depth(Vec(r * th)) > 0;
    if (!any) throw std::domain_error("assemble_problem: shrunk domain is empty");
    const int samples = opt.samples > 0 ? opt.samples : barrier::default_cap_samples(n);
    p.lower = std::make_shared<const barrier::BarrierFunction>(barrier::lower_barrier(F, profiles.gauss, samples));
    try {
        p.upper = std::make_shared<const barrier::BarrierFunction>(barrier::upper_barrier(F, profiles.mean, samples));
    } catch (const std::domain_error&) {
        p.upper.reset();
    }
    auto lower = p.lower;
    p.boundary = [lower](const Vec& xi) { return lower->dual(xi); };
    return p;
}

/// Problem on a ball with explicit boundary data (used for the closed-form hyperboloid case).
[[nodiscard]] inline DirichletProblem ball_problem(double rho, int n, int k, std::function<double(const Vec&)> phi) {
    symk::detail::require_order(n, k, "ball_problem");
    DirichletProblem p;
    p.n = n;
    p.k = k;
    p.c = symk::rhs_constant(n, k);
    p.shrink = 1.0 - rho;
    p.domain.radius = rho;
    p.boundary = std::move(phi);
    return p;
}

/// Structured lattice h*Z^n restricted to the domain; stencil lines that leave the domain are
/// cut at the boundary crossing, which becomes a boundary unknown.
struct Discretization {
    struct Side {
        int index;  // unknown index (interior or boundary)
        double t;   // distance along the line
    };
    struct Line {
        Side plus, minus;
    };

    int n = 0;
    double h = 0;
    int M = 0;  // lattice indices in [-M, M]
    std::vector<Vec> dirs;
    std::vector<Vec> nodes;                // interior lattice points
    std::vector<std::vector<int>> lattice; // their integer coordinates
    std::vector<Vec> bpoints;              // boundary crossing points
    std::vector<double> bphi;              // u* boundary data at bpoints
    std::vector<Line> lines;               // nodes.size() * dirs.size()

    [[nodiscard]] std::size_t interior() const { return nodes.size(); }
    [[nodiscard]] std::size_t unknowns() const { return nodes.size() + bpoints.size(); }
    [[nodiscard]] const Line& line(std::size_t i, std::size_t m) const { return lines[i * dirs.size() + m]; }

    [[nodiscard]] long lattice_key(const std::vector<int>& idx) const {
        long key = 0;
        for (int a = n - 1; a >= 0; --a) key = key * (2L * M + 1) + (idx[a] + M);
        return key;
    }
};

/// Unit stencil directions: the axes, then (e_a + e_b)/sqrt2 and (e_a - e_b)/sqrt2 for a < b.
[[nodiscard]] inline std::vector<Vec> stencil_directions(int n) {
    std::vector<Vec> d;
    for (int a = 0; a < n; ++a) d.push_back(Vec::Unit(n, a));
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            d.push_back((Vec::Unit(n, a) + Vec::Unit(n, b)) / std::sqrt(2.0));
            d.push_back((Vec::Unit(n, a) - Vec::Unit(n, b)) / std::sqrt(2.0));
        }
    return d;
}

/// Nodes closer to the boundary than `drop * h` are not unknowns; their lines snap to the boundary.
[[nodiscard]] inline Discretization discretize(const DirichletProblem& p, double h, double drop = 0.5) {
    if (!(h > 0)) throw std::invalid_argument("discretize: spacing must be positive");
    Discretization D;
    D.n = p.n;
    D.h = h;
    D.M = static_cast<int>(std::ceil(p.domain.radius / h)) + 1;
    D.dirs = stencil_directions(p.n);
    const int n = p.n, side = 2 * D.M + 1;
    long total = 1;
    for (int a = 0; a < n; ++a) total *= side;
    std::unordered_map<long, int> index;
    std::vector<int> idx(n);
    Vec xi(n);
    for (long key = 0; key < total; ++key) {
        long r = key;
        for (int a = 0; a < n; ++a) {
            idx[a] = static_cast<int>(r % side) - D.M;
            r /= side;
            xi(a) = idx[a] * h;
        }
        if (p.domain.depth(xi) > drop * h) {
            index.emplace(key, static_cast<int>(D.nodes.size()));
            D.nodes.push_back(xi);
            D.lattice.push_back(idx);
        }
    }
    const std::size_t N = D.nodes.size();
    if (N == 0) throw std::domain_error("discretize: no interior lattice points");
    D.lines.resize(N * D.dirs.size());
    // integer offsets of each direction
    std::vector<std::vector<int>> off;
    std::vector<double> step;
    for (const auto& d : D.dirs) {
        std::vector<int> o(n);
        for (int a = 0; a < n; ++a) o[a] = d(a) > 1e-9 ? 1 : (d(a) < -1e-9 ? -1 : 0);
        int nz = 0;
        for (int a = 0; a < n; ++a) nz += o[a] != 0;
        off.push_back(o);
        step.push_back(h * std::sqrt(static_cast<double>(nz)));
    }
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t m = 0; m < D.dirs.size(); ++m) {
            Discretization::Line L{};
            for (int s : {1, -1}) {
                std::vector<int> q = D.lattice[i];
                for (int a = 0; a < n; ++a) q[a] += s * off[m][a];
                Discretization::Side S{};
                const auto it = index.find(D.lattice_key(q));
                if (it != index.end()) {
                    S = {it->second, step[m]};
                } else {
                    const Vec dir = s * D.dirs[m];
                    const double t = p.domain.exit(D.nodes[i], dir);
                    S = {static_cast<int>(N + D.bpoints.size()), std::max(t, 1e-12)};
                    const Vec b = D.nodes[i] + t * dir;
                    D.bpoints.push_back(b);
                    D.bphi.push_back(p.boundary(b));
                }
                (s > 0 ? L.plus : L.minus) = S;
            }
            D.lines[i * D.dirs.size() + m] = L;
        }
    }
    return D;
}

namespace detail {

// Shortley-Weller weights along one line: second derivative (c+, c-, c0) and first derivative (d+, d-, d0)
struct Weights {
    double cp, cm, c0, dp, dm, d0;
};

inline Weights weights(double tp, double tm) {
    const double s = tp + tm;
    Weights w{};
    w.cp = 2.0 / (tp * s);
    w.cm = 2.0 / (tm * s);
    w.c0 = -(w.cp + w.cm);
    w.dp = tm / (tp * s);
    w.dm = -tp / (tm * s);
    w.d0 = -(w.dp + w.dm);
    return w;
}

struct Local {
    Vec grad;
    Mat hess;
    Mat lambda;  // hyperbolic Hessian v_ij - v delta_ij in the Klein frame
};

inline Local local(const Discretization& D, std::size_t i, const Vec& v) {
    const int n = D.n;
    Local L{Vec::Zero(n), Mat::Zero(n, n), Mat()};
    auto second = [&](std::size_t m) {
        const auto& l = D.line(i, m);
        const auto w = weights(l.plus.t, l.minus.t);
        return w.cp * v(l.plus.index) + w.cm * v(l.minus.index) + w.c0 * v(static_cast<Eigen::Index>(i));
    };
    for (int a = 0; a < n; ++a) {
        const auto& l = D.line(i, a);
        const auto w = weights(l.plus.t, l.minus.t);
        L.grad(a) = w.dp * v(l.plus.index) + w.dm * v(l.minus.index) + w.d0 * v(static_cast<Eigen::Index>(i));
        L.hess(a, a) = second(a);
    }
    std::size_t m = n;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            const double hab = 0.5 * (second(m) - second(m + 1));
            L.hess(a, b) = L.hess(b, a) = hab;
            m += 2;
        }
    L.lambda = geom::klein_from_derivatives(D.nodes[i], v(static_cast<Eigen::Index>(i)), L.grad, L.hess);
    return L;
}

}  // namespace detail

struct AdmissibilityReport {
    bool admissible = true;
    double margin = std::numeric_limits<double>::infinity();  // min eigenvalue of D2u* over interior nodes
    std::size_t witness = 0;
};

/// Pointwise residual F(Lambda) - c at interior nodes followed by boundary rows v - phi/what.
/// Throws AdmissibilityError with the witness node when Lambda leaves the positive cone.
[[nodiscard]] inline Vec residual_vector(const DirichletProblem& p, const Discretization& D, const Vec& v,
                                         AdmissibilityReport* rep = nullptr, double rhs = -1) {
    const double c = rhs > 0 ? rhs : p.c;
    Vec R(D.unknowns());
    AdmissibilityReport local;
    for (std::size_t i = 0; i < D.interior(); ++i) {
        const auto L = detail::local(D, i, v);
        const auto es = geom::eigen_ascending(L.lambda);
        // D2u* = gamma*^{-1} Lambda gamma*^{-1} / what, with gamma*^{-1} = I + xi xi^T / (what (1 + what))
        const Vec& xi = D.nodes[i];
        const double w = geom::what(xi);
        const Mat gi = Mat::Identity(D.n, D.n) + xi * xi.transpose() / (w * (1.0 + w));
        const double mu = geom::eigen_ascending(Mat(gi * L.lambda * gi / w)).values(0);
        if (mu < local.margin) {
            local.margin = mu;
            local.witness = i;
        }
        if (!(es.values(0) > 0)) {
            local.admissible = false;
            if (!rep)
                throw geom::AdmissibilityError("residual: curvature radii leave the positive cone at node " +
                                               std::to_string(i));
            R(static_cast<Eigen::Index>(i)) = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        R(static_cast<Eigen::Index>(i)) = symk::quotient_F(es.values, p.k) - c;
    }
    for (std::size_t b = 0; b < D.bpoints.size(); ++b) {
        const auto j = static_cast<Eigen::Index>(D.interior() + b);
        R(j) = v(j) - D.bphi[b] / geom::what(D.bpoints[b]);
    }
    if (rep) *rep = local;
    return R;
}

/// Newton matrix of the residual map at v.
[[nodiscard]] inline Eigen::SparseMatrix<double, Eigen::RowMajor> jacobian(const DirichletProblem& p,
                                                                           const Discretization& D, const Vec& v) {
    const int n = D.n;
    const std::size_t N = D.interior();
    std::vector<Eigen::Triplet<double>> T;
    T.reserve(N * (1 + 2 * D.dirs.size()) + D.bpoints.size());
    for (std::size_t i = 0; i < N; ++i) {
        const auto L = detail::local(D, i, v);
        const auto G = symk::matrix_F(symk::SymMatrix(L.lambda), p.k).gradient;
        const Vec& xi = D.nodes[i];
        const double w2 = 1.0 - xi.squaredNorm();
        const Mat gs = geom::gamma_dual(xi);
        const Mat P = w2 * gs * G * gs;
        const Vec Pxi = P * xi;
        const auto row = static_cast<int>(i);
        double diag = -G.trace();
        auto add_line = [&](std::size_t m, double second_coef, double first_coef) {
            const auto& l = D.line(i, m);
            const auto wt = detail::weights(l.plus.t, l.minus.t);
            T.emplace_back(row, l.plus.index, second_coef * wt.cp + first_coef * wt.dp);
            T.emplace_back(row, l.minus.index, second_coef * wt.cm + first_coef * wt.dm);
            diag += second_coef * wt.c0 + first_coef * wt.d0;
        };
        for (int a = 0; a < n; ++a) add_line(a, P(a, a), -2.0 * Pxi(a) / w2);
        std::size_t m = n;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                add_line(m, P(a, b), 0.0);
                add_line(m + 1, -P(a, b), 0.0);
                m += 2;
            }
        T.emplace_back(row, row, diag);
    }
    for (std::size_t b = 0; b < D.bpoints.size(); ++b) {
        const auto j = static_cast<int>(N + b);
        T.emplace_back(j, j, 1.0);
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> A(static_cast<Eigen::Index>(D.unknowns()),
                                                   static_cast<Eigen::Index>(D.unknowns()));
    A.setFromTriplets(T.begin(), T.end());
    return A;
}

struct NewtonState {
    Vec v;  // Klein variable u*/what at interior nodes, then boundary unknowns
    std::vector<double> history;
    std::vector<double> damping;
    std::vector<double> margins;
    double margin = 0;
    int iterations = 0;
    bool converged = false;
};

struct NonConvergence : std::runtime_error {
    NewtonState state;
    NonConvergence(const std::string& what, NewtonState s) : std::runtime_error(what), state(std::move(s)) {}
};

struct Stagnation : std::runtime_error {
    NewtonState state;
    Stagnation(const std::string& what, NewtonState s) : std::runtime_error(what), state(std::move(s)) {}
};

[[nodiscard]] inline double sup_norm(const Vec& r) {
    return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

/// Jacobi-preconditioned BiCGSTAB; incomplete LU when that stalls.
[[nodiscard]] inline Vec linear_solve(const Eigen::SparseMatrix<double, Eigen::RowMajor>& A, const Vec& b) {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>> jac;
    jac.setTolerance(1e-12);
    jac.setMaxIterations(4000);
    jac.compute(A);
    Vec x = jac.solve(b);
    if (jac.info() == Eigen::Success && x.allFinite()) return x;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::IncompleteLUT<double>> ilu;
    ilu.preconditioner().setDroptol(1e-4);
    ilu.preconditioner().setFillfactor(10);
    ilu.setTolerance(1e-12);
    ilu.compute(A);
    return ilu.solve(b);
}

struct NewtonOptions {
    double tol = 1e-8;
    int max_iter = 30;
    double damping_floor = 1e-8;
    double rhs = -1;  // override of the right-hand side constant
};

/// Damped Newton: a step is accepted only if the trial is admissible and the sup-norm residual drops.
[[nodiscard]] inline NewtonState newton_solve(const DirichletProblem& p, const Discretization& D, Vec init,
                                              const NewtonOptions& opt = {}) {
    NewtonState st;
    st.v = std::move(init);
    if (st.v.size() != static_cast<Eigen::Index>(D.unknowns()))
        throw std::invalid_argument("newton_solve: initial vector has the wrong size");
    AdmissibilityReport rep;
    Vec R = residual_vector(p, D, st.v, &rep, opt.rhs);
    if (!rep.admissible)
        throw geom::AdmissibilityError("newton_solve: initial iterate not admissible at node " +
                                       std::to_string(rep.witness));
    double norm = sup_norm(R);
    st.history.push_back(norm);
    st.margins.push_back(rep.margin);
    st.margin = rep.margin;
    while (norm >= opt.tol) {
        if (st.iterations >= opt.max_iter)
            throw NonConvergence("newton_solve: max_iter exceeded, residual " + std::to_string(norm), st);
        const auto A = jacobian(p, D, st.v);
        Vec delta = linear_solve(A, -R);
        if (!delta.allFinite()) throw NonConvergence("newton_solve: linear solve failed", st);
        double theta = 1.0;
        while (true) {
            const Vec trial = st.v + theta * delta;
            AdmissibilityReport tr;
            const Vec Rt = residual_vector(p, D, trial, &tr, opt.rhs);
            const double nt = tr.admissible ? sup_norm(Rt) : std::numeric_limits<double>::infinity();
            if (tr.admissible && nt < norm) {
                st.v = trial;
                R = Rt;
                norm = nt;
                st.margin = tr.margin;
                break;
            }
            theta *= 0.5;
            if (theta < opt.damping_floor) throw Stagnation("newton_solve: line search below damping floor", st);
        }
        ++st.iterations;
        st.history.push_back(norm);
        st.damping.push_back(theta);
        st.margins.push_back(st.margin);
    }
    st.converged = true;
    return st;
}

/// v = -a at every unknown, i.e. u* = -a what: admissible for every a > 0.
[[nodiscard]] inline Vec scaled_hyperboloid(const Discretization& D, double a) {
    return Vec::Constant(static_cast<Eigen::Index>(D.unknowns()), -a);
}

/// Dual potential u* on the lattice box, active on interior nodes, with the boundary trace.
struct DualSolution {
    GridFunction grid;
    std::vector<Vec> bpoints;
    std::vector<double> bvalues;
    std::unordered_map<std::size_t, std::vector<int>> node_bpoints;  // grid flat index -> boundary points on its lines
    ConvexDomain domain;
    bool admissible = false;
    double margin = 0;

    [[nodiscard]] nlohmann::json report() const {
        return {{"grid", grid.descriptor()}, {"boundary_points", bpoints.size()}, {"admissible", admissible},
                {"admissibility_margin", margin}};
    }
};

[[nodiscard]] inline DualSolution to_dual(const Discretization& D, const ConvexDomain& dom, const NewtonState& st) {
    const int n = D.n;
    Vec origin = Vec::Constant(n, -D.M * D.h);
    GridFunction g(origin, Vec::Constant(n, D.h), std::vector<int>(n, 2 * D.M + 1));
    for (std::size_t f = 0; f < g.size(); ++f) g.set_active(f, false);
    for (std::size_t i = 0; i < D.interior(); ++i) {
        std::vector<int> idx(n);
        for (int a = 0; a < n; ++a) idx[a] = D.lattice[i][a] + D.M;
        const auto f = g.flat(idx);
        g.set_active(f, true);
        g[f] = st.v(static_cast<Eigen::Index>(i)) * geom::what(D.nodes[i]);
    }
    DualSolution s{std::move(g), D.bpoints, {}, {}, dom, true, st.margin};
    const auto N = static_cast<int>(D.interior());
    for (std::size_t i = 0; i < D.interior(); ++i) {
        std::vector<int> idx(n);
        for (int a = 0; a < n; ++a) idx[a] = D.lattice[i][a] + D.M;
        auto& list = s.node_bpoints[s.grid.flat(idx)];
        for (std::size_t m = 0; m < D.dirs.size(); ++m)
            for (const auto* side : {&D.line(i, m).plus, &D.line(i, m).minus})
                if (side->index >= N) list.push_back(side->index - N);
    }
    for (std::size_t b = 0; b < D.bpoints.size(); ++b)
        s.bvalues.push_back(st.v(static_cast<Eigen::Index>(D.interior() + b)) * geom::what(D.bpoints[b]));
    return s;
}

/// Max eigenvalue mismatch between what gamma* D2u* gamma* and the covariant Klein Hessian of
/// u*/what, both from differences of the grid with stride `stride`.
[[nodiscard]] inline double hyperbolic_crosscheck(const DualSolution& u, const std::vector<Vec>& samples,
                                                  int stride = 1, double margin = 0.05) {
    const auto& g = u.grid;
    const int n = g.dim();
    const double h = g.spacing()(0) * stride;
    // sub-lattice through the origin with the coarser spacing
    const int M = (g.dims()[0] - 1) / 2;
    const int Ms = M / stride;
    GridFunction s(Vec::Constant(n, -Ms * h), Vec::Constant(n, h), std::vector<int>(n, 2 * Ms + 1));
    for (std::size_t f = 0; f < s.size(); ++f) {
        auto idx = s.multi(f);
        for (auto& a : idx) a = (a - Ms) * stride + M;
        const auto q = g.flat(idx);
        s[f] = g[q];
        s.set_active(f, g.active(q));
    }
    double worst = 0;
    for (const auto& xi : samples) {
        geom::require_margin(xi, margin, "hyperbolic_crosscheck");
        std::vector<int> idx(n);
        for (int a = 0; a < n; ++a) idx[a] = static_cast<int>(std::lround(xi(a) / h)) + Ms;
        const auto f = s.flat(idx);
        if (!geom::interior_node(s, f)) throw geom::MarginError("hyperbolic_crosscheck: sample too close to the boundary");
        const Vec p = s.point(f);
        const Mat lhs = geom::klein_hessian_lhs(s, f, margin);
        const Mat rhs = geom::klein_hessian_rhs(p, s.hessian(f));
        const Vec a = geom::eigen_ascending(lhs).values, b = geom::eigen_ascending(rhs).values;
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    return worst;
}

struct ContinuationStep {
    int J = 0;
    DirichletProblem problem;
    Discretization disc;
    NewtonState state;
    bool warm = false;
};

struct ContinuationError : std::runtime_error {
    int J;
    ContinuationError(int j, const std::string& what) : std::runtime_error("J=" + std::to_string(j) + ": " + what), J(j) {}
};

struct ContinuationOptions {
    double spacing = 0.02;
    double init_scale = 0.9;
    NewtonOptions newton;
    AssembleOptions assemble;
};

/// Solves the problems for increasing J, warm-starting each from the previous solution on the
/// shared lattice and from the boundary data on the new region.
[[nodiscard]] inline std::vector<ContinuationStep> continuation_run(const barrier::CapDomain& F,
                                                                    const std::vector<int>& J_list, int n, int k,
                                                                    const barrier::TroughProfiles& profiles,
                                                                    const ContinuationOptions& opt = {}) {
    for (std::size_t i = 1; i < J_list.size(); ++i)
        if (J_list[i] <= J_list[i - 1]) throw std::invalid_argument("continuation_run: J list must increase");
    std::vector<ContinuationStep> out;
    for (int J : J_list) {
        try {
            ContinuationStep step;
            step.J = J;
            step.problem = assemble_problem(F, J, n, k, profiles, opt.assemble);
            step.disc = discretize(step.problem, opt.spacing);
            const auto& D = step.disc;
            Vec init = scaled_hyperboloid(D, opt.init_scale);
            if (!out.empty()) {
                const auto& prev = out.back();
                std::unordered_map<long, int> old;
                for (std::size_t i = 0; i < prev.disc.interior(); ++i) old.emplace(D.lattice_key(prev.disc.lattice[i]), static_cast<int>(i));
                for (std::size_t i = 0; i < D.interior(); ++i) {
                    const auto it = old.find(D.lattice_key(D.lattice[i]));
                    init(static_cast<Eigen::Index>(i)) = it != old.end()
                                                             ? prev.state.v(it->second)
                                                             : step.problem.boundary(D.nodes[i]) / geom::what(D.nodes[i]);
                }
                for (std::size_t b = 0; b < D.bpoints.size(); ++b)
                    init(static_cast<Eigen::Index>(D.interior() + b)) = D.bphi[b] / geom::what(D.bpoints[b]);
                AdmissibilityReport rep;
                (void)residual_vector(step.problem, D, init, &rep);
                if (rep.admissible) step.warm = true;
                else init = scaled_hyperboloid(D, opt.init_scale);
            }
            step.state = newton_solve(step.problem, D, std::move(init), opt.newton);
            out.push_back(std::move(step));
        } catch (const NonConvergence& e) {
            throw ContinuationError(J, e.what());
        } catch (const Stagnation& e) {
            throw ContinuationError(J, e.what());
        } catch (const geom::AdmissibilityError& e) {
            throw ContinuationError(J, e.what());
        }
    }
    return out;
}

/// C0 bounds: max u* <= max boundary data; u* >= upper-barrier dual at every node (when available).
struct C0Report {
    double max_interior = 0, max_boundary = 0;
    double min_margin_above_upper_dual = std::numeric_limits<double>::infinity();
    bool upper_available = false;
    [[nodiscard]] bool holds() const {
        return max_interior <= max_boundary + 1e-12 && (!upper_available || min_margin_above_upper_dual > 0);
    }
};

[[nodiscard]] inline C0Report c0_check(const DirichletProblem& p, const Discretization& D, const NewtonState& st) {
    C0Report r;
    r.max_interior = -std::numeric_limits<double>::infinity();
    r.max_boundary = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < D.interior(); ++i) {
        const double u = st.v(static_cast<Eigen::Index>(i)) * geom::what(D.nodes[i]);
        r.max_interior = std::max(r.max_interior, u);
        if (p.upper) r.min_margin_above_upper_dual = std::min(r.min_margin_above_upper_dual, u - p.upper->dual(D.nodes[i]));
    }
    for (double b : D.bphi) r.max_boundary = std::max(r.max_boundary, b);
    r.upper_available = static_cast<bool>(p.upper);
    return r;
}

/// |Du*| at interior node i, from the line stencils of v.
[[nodiscard]] inline double dual_gradient_norm(const Discretization& D, const Vec& v, std::size_t i) {
    const auto L = detail::local(D, i, v);
    const Vec& xi = D.nodes[i];
    const double w = geom::what(xi);
    return (w * L.grad - v(static_cast<Eigen::Index>(i)) * xi / w).norm();
}

[[nodiscard]] inline bool touches_boundary(const Discretization& D, std::size_t i) {
    for (std::size_t m = 0; m < D.dirs.size(); ++m) {
        const auto& l = D.line(i, m);
        if (l.plus.index >= static_cast<int>(D.interior()) || l.minus.index >= static_cast<int>(D.interior())) return true;
    }
    return false;
}

/// C1 bound: max interior |Du*| against the boundary gradient of a subsolution with the same data,
/// obtained by solving with the right-hand side raised by a factor (1 + eps).
struct C1Report {
    double max_interior = 0, max_boundary_sub = 0;
    int sub_iterations = 0;
    [[nodiscard]] bool holds() const { return max_interior <= max_boundary_sub + 1e-9; }
};

[[nodiscard]] inline C1Report c1_check(const DirichletProblem& p, const Discretization& D, const NewtonState& st,
                                       double eps = 0.1, NewtonOptions opt = {}) {
    opt.rhs = p.c * (1.0 + eps);
    const auto sub = newton_solve(p, D, st.v, opt);
    C1Report r;
    r.sub_iterations = sub.iterations;
    for (std::size_t i = 0; i < D.interior(); ++i) {
        r.max_interior = std::max(r.max_interior, dual_gradient_norm(D, st.v, i));
        if (touches_boundary(D, i)) r.max_boundary_sub = std::max(r.max_boundary_sub, dual_gradient_norm(D, sub.v, i));
    }
    return r;
}

[[nodiscard]] inline nlohmann::json state_report(const NewtonState& st) {
    return {{"iterations", st.iterations},       {"residual_history", st.history}, {"damping", st.damping},
            {"admissibility_margin", st.margin}, {"margins", st.margins},          {"converged", st.converged}};
}

}  // namespace spacelike::solver
