#pragma once

#include "spacelike/geomkit.hpp"
#include "spacelike/semitrough.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace spacelike::barrier {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using trough::Cap;

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Quasi-uniform unit directions: equal angles on the circle, a golden spiral on S^2,
/// seeded Gaussian directions above.
[[nodiscard]] inline std::vector<Vec> sphere_mesh(int n, int count) {
    std::vector<Vec> out;
    out.reserve(count);
    if (n == 2) {
        for (int i = 0; i < count; ++i) {
            const double a = 2 * std::numbers::pi * (i + 0.5) / count;
            Vec v(2);
            v << std::cos(a), std::sin(a);
            out.push_back(v);
        }
    } else if (n == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < count; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / count;
            const double r = std::sqrt(1.0 - z * z);
            Vec v(3);
            v << z, r * std::cos(golden * i), r * std::sin(golden * i);
            out.push_back(v);
        }
    } else {
        std::mt19937_64 rng(0x5eedULL + n);
        std::normal_distribution<double> N;
        for (int i = 0; i < count; ++i) {
            Vec v(n);
            for (int a = 0; a < n; ++a) v(a) = N(rng);
            out.push_back(v.normalized());
        }
    }
    return out;
}

[[nodiscard]] inline double angle(const Vec& a, const Vec& b) {
    return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
}

/// Finite union of closed spherical caps F and its hull conv(F).
struct CapDomain {
    int n = 3;
    std::vector<Cap> caps;
    double delta0 = 0.1;

    void validate() const {
        if (caps.empty()) throw ParameterError("CapDomain: no caps");
        if (!(delta0 > 0 && delta0 < std::numbers::pi / 2)) throw ParameterError("CapDomain: delta0 out of range");
        for (const auto& c : caps) {
            if (c.center.size() != n) throw ParameterError("CapDomain: center dimension mismatch");
            if (c.delta < delta0 - 1e-12 || c.delta > std::numbers::pi - delta0 + 1e-12)
                throw ParameterError("CapDomain: cap radius outside [delta0, pi - delta0]");
        }
    }

    /// V_F(x) = sup over xi in F of xi.x.
    [[nodiscard]] double support(const Vec& x) const {
        double v = -std::numeric_limits<double>::infinity();
        for (const auto& c : caps) v = std::max(v, trough::cap_support(c, x));
        return v;
    }

    [[nodiscard]] bool contains(const Vec& theta, double tol = 0.0) const {
        for (const auto& c : caps)
            if (angle(c.center, theta) <= c.delta + tol) return true;
        return false;
    }

    /// Angular radius of a cap centered at c that stays inside F (pi if F covers the sphere).
    /// The distance to sampled complement points is reduced by the mesh covering radius,
    /// so the result never overshoots; a single containing cap gives an exact lower bound.
    [[nodiscard]] double inscribed_radius(const Vec& c, int resolution = 4000) const {
        double exact = -std::numbers::pi;
        for (const auto& cap : caps) exact = std::max(exact, cap.delta - angle(c, cap.center));
        if (n > 3) return exact;
        const double cover = n == 2 ? std::numbers::pi / resolution : 2.0 * std::sqrt(4.0 * std::numbers::pi / resolution);
        double r = std::numbers::pi + cover;
        for (const auto& th : sphere_mesh(n, resolution))
            if (!contains(th)) r = std::min(r, angle(c, th));
        return std::max(exact, r - cover);
    }

    /// Smallest radius of a cap centered at c that contains F.
    [[nodiscard]] double circumscribed_radius(const Vec& c) const {
        double r = 0;
        for (const auto& cap : caps) r = std::max(r, angle(c, cap.center) + cap.delta);
        return r;
    }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j;
        j["delta0"] = delta0;
        j["caps"] = nlohmann::json::array();
        for (const auto& c : caps)
            j["caps"].push_back({{"center", std::vector<double>(c.center.data(), c.center.data() + c.center.size())},
                                 {"delta", c.delta}});
        return j;
    }

    static CapDomain from_json(const nlohmann::json& j) {
        CapDomain d;
        d.delta0 = j.at("delta0").get<double>();
        for (const auto& c : j.at("caps")) {
            const auto v = c.at("center").get<std::vector<double>>();
            Cap cap{Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())).normalized(),
                    c.at("delta").get<double>()};
            d.caps.push_back(cap);
        }
        if (d.caps.empty()) throw ParameterError("CapDomain: no caps");
        d.n = static_cast<int>(d.caps.front().center.size());
        d.validate();
        return d;
    }
};

enum class BarrierKind { lower, upper };

/// Pointwise max (lower) or min (upper) of a family of troughs.
class BarrierFunction {
public:
    BarrierFunction(BarrierKind kind, std::vector<trough::Trough> gens)
        : kind_(kind), gens_(std::move(gens)) {
        if (gens_.empty()) throw std::domain_error("BarrierFunction: empty generator family");
    }

    [[nodiscard]] BarrierKind kind() const { return kind_; }
    [[nodiscard]] const std::vector<trough::Trough>& generators() const { return gens_; }

    [[nodiscard]] double value(const Vec& x, int* which = nullptr, Vec* grad = nullptr) const {
        const bool lower = kind_ == BarrierKind::lower;
        double best = lower ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t i = 0; i < gens_.size(); ++i) {
            const double v = gens_[i].value(x);
            if (lower ? v > best : v < best) {
                best = v;
                arg = static_cast<int>(i);
            }
        }
        if (which) *which = arg;
        if (grad) (void)gens_[arg].value(x, grad);
        return best;
    }

    double operator()(const Vec& x) const { return value(x); }

    /// Legendre transform. For the upper kind it is the max of generator transforms.
    /// For the lower kind the min of generator transforms is exact when the minimizing
    /// generator is active at its own preimage point; otherwise the concave conjugate
    /// problem is maximized directly.
    [[nodiscard]] double dual(const Vec& xi) const {
        if (kind_ == BarrierKind::upper) {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& g : gens_) best = std::max(best, g.dual(xi));
            return best;
        }
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t i = 0; i < gens_.size(); ++i) {
            const double d = gens_[i].dual(xi);
            if (d < best) {
                best = d;
                arg = i;
            }
        }
        if (!std::isfinite(best)) return best;
        Vec x;
        (void)gens_[arg].dual(xi, &x);
        if (x.allFinite()) {
            const double own = gens_[arg].value(x);
            if (value(x) <= own + 1e-12 * (1.0 + std::abs(own))) return best;
        } else {
            x = Vec::Zero(xi.size());
        }
        return conjugate_search(xi, x);
    }

private:
    // pattern search on the concave objective x.xi - value(x)
    [[nodiscard]] double conjugate_search(const Vec& xi, Vec x) const {
        auto obj = [&](const Vec& y) { return y.dot(xi) - value(y); };
        double fx = obj(x);
        double step = 1.0 + 0.1 * x.norm();
        const auto n = xi.size();
        while (step > 1e-12 * (1.0 + x.norm())) {
            bool moved = false;
            for (Eigen::Index a = 0; a < n; ++a)
                for (double s : {1.0, -1.0}) {
                    Vec y = x;
                    y(a) += s * step;
                    const double fy = obj(y);
                    if (fy > fx) {
                        x = y;
                        fx = fy;
                        moved = true;
                    }
                }
            if (!moved) step *= 0.5;
        }
        return fx;
    }

    BarrierKind kind_;
    std::vector<trough::Trough> gens_;
};

struct TroughProfiles {
    std::shared_ptr<const trough::Profile> mean;
    std::shared_ptr<const trough::Profile> gauss;
};

[[nodiscard]] inline TroughProfiles make_profiles(int n, const trough::ProfileOptions& opt = {}) {
    return {std::make_shared<const trough::Profile>(trough::solve_profile(trough::Curvature::mean, n, opt)),
            std::make_shared<const trough::Profile>(trough::solve_profile(trough::Curvature::gauss, n, opt))};
}

[[nodiscard]] inline int default_cap_samples(int n) { return n == 2 ? 32 : 64; }

/// Sup of Gauss-curvature troughs over inscribed caps of radius >= delta0.
[[nodiscard]] inline BarrierFunction lower_barrier(const CapDomain& F, std::shared_ptr<const trough::Profile> gauss,
                                                   int samples) {
    if (samples < 1) throw std::domain_error("lower_barrier: need at least one sample");
    std::vector<trough::Trough> gens;
    for (const auto& c : F.caps) gens.emplace_back(gauss, c);
    for (const auto& c : sphere_mesh(F.n, samples)) {
        const double r = std::min(F.inscribed_radius(c), std::numbers::pi - F.delta0);
        if (r >= F.delta0) gens.emplace_back(gauss, Cap{c, r});
    }
    return BarrierFunction(BarrierKind::lower, std::move(gens));
}

/// Inf of mean-curvature troughs over circumscribed caps of radius <= pi - delta0.
[[nodiscard]] inline BarrierFunction upper_barrier(const CapDomain& F, std::shared_ptr<const trough::Profile> mean,
                                                   int samples) {
    if (samples < 1) throw std::domain_error("upper_barrier: need at least one sample");
    std::vector<trough::Trough> gens;
    if (F.caps.size() == 1) gens.emplace_back(mean, F.caps.front());
    for (const auto& c : sphere_mesh(F.n, samples)) {
        const double r = F.circumscribed_radius(c);
        if (r <= std::numbers::pi - F.delta0) gens.emplace_back(mean, Cap{c, r});
    }
    if (gens.empty()) throw std::domain_error("upper_barrier: no circumscribed cap of radius <= pi - delta0");
    return BarrierFunction(BarrierKind::upper, std::move(gens));
}

struct Blowdown {
    double limit = 0;
    double error = 0;
    bool monotone = true;
};

/// Richardson-extrapolated limit of value(r theta)/r in 1/r.
template <class Fn>
[[nodiscard]] Blowdown blowdown(Fn&& f, const Vec& theta, const std::vector<double>& radii) {
    if (radii.size() < 3) throw std::invalid_argument("blowdown: need at least three radii");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] > radii[i - 1])) throw std::invalid_argument("blowdown: radii must increase");
    std::vector<double> q;
    for (double r : radii) q.push_back(f(Vec(r * theta)) / r);
    Blowdown b;
    for (std::size_t i = 2; i < q.size(); ++i)
        if ((q[i] - q[i - 1]) * (q[i - 1] - q[i - 2]) < 0) b.monotone = false;
    const std::size_t m = q.size();
    auto two = [&](std::size_t i, std::size_t j) {
        return (radii[j] * q[j] - radii[i] * q[i]) / (radii[j] - radii[i]);
    };
    const double l2 = two(m - 2, m - 1);
    // three-term fit q = L + b/r + c/r^2 on the last three radii
    Eigen::Matrix3d A;
    Eigen::Vector3d rhs;
    for (int i = 0; i < 3; ++i) {
        const double r = radii[m - 3 + i];
        A(i, 0) = 1.0;
        A(i, 1) = 1.0 / r;
        A(i, 2) = 1.0 / (r * r);
        rhs(i) = q[m - 3 + i];
    }
    const double l3 = A.colPivHouseholderQr().solve(rhs)(0);
    b.limit = l3;
    b.error = std::abs(l3 - l2);
    return b;
}

/// Explicit spacelike cutoff attached to the half-space frame e1 -> frame * e1.
class Cutoff {
public:
    Cutoff(double lambda, double R0, double R1, Mat frame)
        : lambda_(lambda), R0_(R0), R1_(R1), frame_(std::move(frame)) {
        if (!(lambda > 0 && lambda <= 1)) throw ParameterError("cutoff: lambda must lie in (0, 1]");
        if (!(R0 > 10.0 / lambda)) throw ParameterError("cutoff: violated R0 > 10/lambda");
        if (!(R1 > R0 * (1.0 + 10.0 / (lambda * lambda))))
            throw ParameterError("cutoff: violated R1 > R0 (1 + 10/lambda^2)");
    }

    Cutoff(double lambda, double R0, double R1, int n) : Cutoff(lambda, R0, R1, Mat::Identity(n, n)) {}

    /// Support function of the closed half-sphere {xi1 >= 0}.
    [[nodiscard]] static double half_support(const Vec& y) {
        return y(0) >= 0 ? y.norm() : y.tail(y.size() - 1).norm();
    }

    [[nodiscard]] double operator()(const Vec& x) const {
        const Vec y = frame_.transpose() * x;
        const double V = half_support(y);
        const double phi = std::sqrt(lambda_ * lambda_ + V * V);
        const double r = y.norm();
        if (r <= R0_) return phi;
        const double bump = (1.0 - V / r) / std::sqrt(1.0 + y.tail(y.size() - 1).squaredNorm());
        if (r >= R1_) return phi + bump;
        return phi + bump * (r - R0_) / (R1_ - R0_);
    }

    [[nodiscard]] double R0() const { return R0_; }
    [[nodiscard]] double R1() const { return R1_; }
    [[nodiscard]] double lambda() const { return lambda_; }

private:
    double lambda_, R0_, R1_;
    Mat frame_;
};

struct SpacelikeReport {
    double max_gradient = 0;
    Vec witness;
    std::size_t samples = 0;
};

/// Max central-difference gradient norm over the lattice lo + i*h inside the box [lo, hi].
/// The difference step defaults to min(h, 1e-3): a step as coarse as the lattice straddles
/// the C^1 seams of piecewise functions and reports an O(h) artifact there.
template <class Fn>
[[nodiscard]] SpacelikeReport spacelike_check(Fn&& f, const Vec& lo, const Vec& hi, double h, double step = 0.0) {
    if (!(step > 0)) step = std::min(h, 1e-3);
    const auto d = lo.size();
    std::vector<long> dims(d);
    std::size_t total = 1;
    for (Eigen::Index a = 0; a < d; ++a) {
        dims[a] = std::lround((hi(a) - lo(a)) / h) + 1;
        total *= dims[a];
    }
    SpacelikeReport rep;
    rep.witness = lo;
    Vec x(d), y(d), g(d);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t r = k;
        for (Eigen::Index a = 0; a < d; ++a) {
            x(a) = lo(a) + static_cast<double>(r % dims[a]) * h;
            r /= dims[a];
        }
        y = x;
        for (Eigen::Index a = 0; a < d; ++a) {
            y(a) = x(a) + step;
            const double fp = f(y);
            y(a) = x(a) - step;
            const double fm = f(y);
            y(a) = x(a);
            g(a) = (fp - fm) / (2 * step);
        }
        const double m = g.norm();
        if (m > rep.max_gradient) {
            rep.max_gradient = m;
            rep.witness = x;
        }
    }
    rep.samples = total;
    return rep;
}

/// Right side of the gradient estimate
/// 1/sqrt(1-|Du|^2) <= (1/(u-psi)) sup_{u>psi} (ubar - psi)/sqrt(1-|Dpsi|^2),
/// with the sup taken over the supplied sample points.
template <class U, class UB, class P>
[[nodiscard]] double gradient_bound(U&& u, UB&& ubar, P&& psi, const Vec& x, const std::vector<Vec>& sup_points) {
    const double gap = u(x) - psi(x);
    if (!(gap > 0)) throw std::domain_error("gradient_bound: point outside {u > psi}");
    double sup = 0;
    for (const auto& y : sup_points) {
        if (!(u(y) > psi(y))) continue;
        const double h = 1e-6 * (1.0 + y.norm());
        Vec g(y.size()), z = y;
        for (Eigen::Index a = 0; a < y.size(); ++a) {
            z(a) = y(a) + h;
            const double fp = psi(z);
            z(a) = y(a) - h;
            const double fm = psi(z);
            z(a) = y(a);
            g(a) = (fp - fm) / (2 * h);
        }
        const double q = g.squaredNorm();
        if (!(q < 1.0)) throw geom::SpacelikeViolation("gradient_bound: cutoff not spacelike at a sample");
        sup = std::max(sup, (ubar(y) - psi(y)) / std::sqrt(1.0 - q));
    }
    return sup / gap;
}

struct UpperEstimate {
    double lhs = 0, rhs = 0;
};

/// Both sides of zeta(x) <= V(x) + (1 - V(x/|x|)) / sqrt(1 + |xbar|^2) for the standard mean-curvature trough.
[[nodiscard]] inline UpperEstimate semitrough_upper_estimate(const trough::Trough& z, const Vec& x) {
    const double V = Cutoff::half_support(x);
    const double r = x.norm();
    return {z.value(x), V + (1.0 - V / r) / std::sqrt(1.0 + x.tail(x.size() - 1).squaredNorm())};
}

}  // namespace spacelike::barrier
