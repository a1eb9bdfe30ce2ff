#pragma once

#include "spacelike/geomkit.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spacelike::trough {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// mean: sigma_1 = n; gauss: sigma_n = 1.
enum class Curvature { mean, gauss };

[[nodiscard]] inline const char* to_string(Curvature c) { return c == Curvature::mean ? "sigma_1" : "sigma_n"; }

/// Limit of the profile at t -> -infinity.
[[nodiscard]] inline double entry_level(Curvature c, int n) {
    return c == Curvature::mean ? double(n - 1) / n : 0.0;
}

/// Order of the curvature function held constant, and its value.
[[nodiscard]] inline int curvature_order(Curvature c, int n) { return c == Curvature::mean ? 1 : n; }
[[nodiscard]] inline double curvature_value(Curvature c, int n) { return c == Curvature::mean ? double(n) : 1.0; }

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StepSizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Right-hand side f'' of the profile equation in terms of g = f - l and p = f'.
/// Written so that tiny g and p keep full relative precision.
[[nodiscard]] inline double profile_rhs(Curvature c, int n, double g, double p) {
    const double w2 = (1.0 - p) * (1.0 + p);
    if (c == Curvature::gauss) return std::pow(g, n - 1) * std::pow(w2, 0.5 * (n + 2));
    const double l = entry_level(c, n);
    const double eps = g / l;
    const double q = std::sqrt(w2);
    return n * w2 * (eps * q - p * p / (1.0 + q)) / (1.0 + eps);
}

/// 1 - p^2 along the entry branch, as a function of g = f - l (first integral of the ODE).
[[nodiscard]] inline double first_integral_w2(Curvature c, int n, double g) {
    if (c == Curvature::gauss) return std::exp(-2.0 / n * std::log1p(std::pow(g, n)));
    // 1/sqrt(1-p^2) = f + C f^{1-n}, C = l^{n-1}/n; expanded around f = l
    const double l = entry_level(c, n);
    const double eps = g / l;
    const int m = n - 1;
    double delta = 0.0;
    if (std::abs(eps) < 1e-3) {
        double term = 1.0, sum = 0.0;
        for (int j = 1; j <= 10; ++j) {
            term *= (-m - (j - 1)) * eps / j;
            if (j >= 2) sum += term;
        }
        delta = sum / n;
    } else {
        delta = (std::pow(1.0 + eps, -m) - 1.0 + m * eps) / n;
    }
    const double Q = 1.0 + delta;
    return 1.0 / (Q * Q);
}

/// Slope on the entry branch from the first integral.
[[nodiscard]] inline double first_integral_slope(Curvature c, int n, double g) {
    if (c == Curvature::gauss) return std::sqrt(-std::expm1(-2.0 / n * std::log1p(std::pow(g, n))));
    const double l = entry_level(c, n);
    const double eps = g / l;
    const int m = n - 1;
    double delta = 0.0;
    if (std::abs(eps) < 1e-3) {
        double term = 1.0, sum = 0.0;
        for (int j = 1; j <= 10; ++j) {
            term *= (-m - (j - 1)) * eps / j;
            if (j >= 2) sum += term;
        }
        delta = sum / n;
    } else {
        delta = (std::pow(1.0 + eps, -m) - 1.0 + m * eps) / n;
    }
    return std::sqrt(delta * (2.0 + delta)) / (1.0 + delta);
}

struct ProfileOptions {
    double t_min = -20.0;
    double t_max = 20.0;
    double tol = 1e-8;
    double step = 1e-3;
};

struct ProfileSample {
    double f, fp, fpp;
};

/// Profile f of the standard semitrough sqrt(f(x1)^2 + |xbar|^2) on [t_min, t_max],
/// with closed-form tails outside.
class Profile {
public:
    Curvature kind = Curvature::mean;
    int n = 2;
    double t_min = -20, t_max = 20, step = 1e-3;
    std::vector<double> t, f, fp;
    std::vector<double> excess;  // f - l, kept separately for precision near the entry level

    // diagnostics
    double shoot_parameter = 0;    // log of f(t_min) - l
    double normalization = 0;      // f(t_max) - t_max - tail(f(t_max)) after shooting
    double halving_estimate = 0;   // max |f_h - f_{h/2}| at common nodes
    double ode_residual = 0;       // direct substitution, five-point differences of f'
    double integral_residual = 0;  // first-integral defect
    double entry_gap = 0;          // f(t_min) - l

    [[nodiscard]] double level() const { return entry_level(kind, n); }

    [[nodiscard]] double rhs(double fval, double p) const { return profile_rhs(kind, n, fval - level(), p); }

    /// Tail integral R(f) = int_f^inf (1/p - 1) dq, so that t = f - R(f) beyond t_max.
    [[nodiscard]] double tail(double fval) const {
        auto integrand = [&](double s) {
            const double q = fval / s;
            const double w2 = first_integral_w2(kind, n, q - level());
            const double p = std::sqrt(1.0 - w2);
            return w2 / (p * (1.0 + p)) * fval / (s * s);
        };
        return boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.0, 0.5) +
               boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.5, 1.0);
    }

    [[nodiscard]] ProfileSample sample(double tt) const {
        const double l = level();
        if (tt < t_min) {
            const double gm = excess.front(), pm = fp.front();
            if (kind == Curvature::gauss && n >= 3) {
                const double sig = 2.0 * gm / ((n - 2) * pm);
                const double z = 1.0 + (t_min - tt) / sig;
                const double g = gm * std::pow(z, -2.0 / (n - 2));
                const double p = pm * std::pow(z, -double(n) / (n - 2));
                return {l + g, p, pm * n / ((n - 2) * sig) * std::pow(z, -double(n) / (n - 2) - 1)};
            }
            const double mu = pm / gm;
            const double g = gm * std::exp(mu * (tt - t_min));
            return {l + g, mu * g, mu * mu * g};
        }
        if (tt > t_max) {
            const double fv = invert_tail(tt);
            const double p = std::sqrt(1.0 - first_integral_w2(kind, n, fv - l));
            return {fv, p, rhs(fv, p)};
        }
        return interpolate(tt);
    }

    [[nodiscard]] double value(double tt) const { return sample(tt).f; }
    [[nodiscard]] double slope(double tt) const { return sample(tt).fp; }

    /// Point t with f'(t) = p, for p in (0, 1).
    [[nodiscard]] double inverse_slope(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_slope: slope must lie in (0,1)");
        const double l = level();
        if (p < fp.front()) {
            const double gm = excess.front(), pm = fp.front();
            if (kind == Curvature::gauss && n >= 3) {
                const double sig = 2.0 * gm / ((n - 2) * pm);
                const double z = std::pow(p / pm, -double(n - 2) / n);
                return t_min - sig * (z - 1.0);
            }
            const double mu = pm / gm;
            return t_min + std::log(p / pm) / mu;
        }
        if (p > fp.back()) {
            // invert the first integral for f, then use t = f - R(f)
            const double w2 = (1.0 - p) * (1.0 + p);
            double fv = 0;
            if (kind == Curvature::gauss) {
                fv = std::pow(std::pow(w2, -0.5 * n) - 1.0, 1.0 / n);
            } else {
                const double target = 1.0 / std::sqrt(w2);
                const double C = std::pow(l, n - 1) / n;
                auto fn = [&](double x) { return x + C * std::pow(x, 1 - n) - target; };
                std::uintmax_t iters = 200;
                auto r = boost::math::tools::toms748_solve(fn, f.back(), target + 1.0,
                                                           boost::math::tools::eps_tolerance<double>(52), iters);
                fv = 0.5 * (r.first + r.second);
            }
            return fv - tail(fv);
        }
        const auto it = std::upper_bound(fp.begin(), fp.end(), p);
        std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - fp.begin() - 1, 0), fp.size() - 2);
        auto fn = [&](double tt) { return interpolate(tt).fp - p; };
        double a = t[i], b = t[i + 1];
        if (fn(a) > 0) a = t[i > 0 ? i - 1 : 0];
        if (fn(b) < 0) b = t[std::min(i + 2, t.size() - 1)];
        std::uintmax_t iters = 200;
        auto r = boost::math::tools::toms748_solve(fn, a, b, boost::math::tools::eps_tolerance<double>(50), iters);
        return 0.5 * (r.first + r.second);
    }

    /// One-dimensional conjugate sup_t (t p - f(t)) for p in [0, 1].
    [[nodiscard]] double conjugate(double p) const {
        if (p < 0.0 || p > 1.0) return std::numeric_limits<double>::infinity();
        if (p == 0.0) return -level();
        if (p == 1.0) return 0.0;
        const double tt = inverse_slope(p);
        return tt * p - value(tt);
    }

    [[nodiscard]] nlohmann::json metadata() const {
        return {{"type", to_string(kind)},
                {"n", n},
                {"t_min", t_min},
                {"t_max", t_max},
                {"step", step},
                {"level", level()},
                {"shoot_parameter", shoot_parameter},
                {"normalization", normalization},
                {"halving_estimate", halving_estimate},
                {"ode_residual", ode_residual},
                {"first_integral_residual", integral_residual},
                {"entry_gap", entry_gap}};
    }

    void write_csv(std::ostream& os) const {
        os.precision(17);
        os << "t,f,fprime\n";
        for (std::size_t i = 0; i < t.size(); ++i) os << t[i] << "," << f[i] << "," << fp[i] << "\n";
    }

private:
    [[nodiscard]] double invert_tail(double tt) const {
        // t = f - R(f) with d/df = 1/p; start from f = t
        double fv = std::max(tt, f.back());
        for (int it = 0; it < 50; ++it) {
            const double r = fv - tail(fv) - tt;
            const double p = std::sqrt(1.0 - first_integral_w2(kind, n, fv - level()));
            const double dfv = r * p;
            fv -= dfv;
            if (std::abs(dfv) < 1e-15 * std::abs(fv)) break;
        }
        return fv;
    }

    [[nodiscard]] ProfileSample interpolate(double tt) const {
        const double h = step;
        std::size_t i = static_cast<std::size_t>(std::floor((tt - t_min) / h));
        i = std::min(i, t.size() - 2);
        const double s = (tt - t[i]) / h;
        const double y0 = f[i], y1 = f[i + 1];
        const double d0 = fp[i] * h, d1 = fp[i + 1] * h;
        const double c0 = rhs(f[i], fp[i]) * h * h, c1 = rhs(f[i + 1], fp[i + 1]) * h * h;
        // quintic Hermite basis
        const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
        const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5, h1 = s - 6 * s3 + 8 * s4 - 3 * s5,
                     h2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5), h3 = 0.5 * (s3 - 2 * s4 + s5),
                     h4 = -4 * s3 + 7 * s4 - 3 * s5, h5 = 10 * s3 - 15 * s4 + 6 * s5;
        const double dh0 = -30 * s2 + 60 * s3 - 30 * s4, dh1 = 1 - 18 * s2 + 32 * s3 - 15 * s4,
                     dh2 = 0.5 * (2 * s - 9 * s2 + 12 * s3 - 5 * s4), dh3 = 0.5 * (3 * s2 - 8 * s3 + 5 * s4),
                     dh4 = -12 * s2 + 28 * s3 - 15 * s4, dh5 = 30 * s2 - 60 * s3 + 30 * s4;
        const double ddh0 = -60 * s + 180 * s2 - 120 * s3, ddh1 = -36 * s + 96 * s2 - 60 * s3,
                     ddh2 = 0.5 * (2 - 18 * s + 36 * s2 - 20 * s3), ddh3 = 0.5 * (6 * s - 24 * s2 + 20 * s3),
                     ddh4 = -24 * s + 84 * s2 - 60 * s3, ddh5 = 60 * s - 180 * s2 + 120 * s3;
        return {h0 * y0 + h1 * d0 + h2 * c0 + h3 * c1 + h4 * d1 + h5 * y1,
                (dh0 * y0 + dh1 * d0 + dh2 * c0 + dh3 * c1 + dh4 * d1 + dh5 * y1) / h,
                (ddh0 * y0 + ddh1 * d0 + ddh2 * c0 + ddh3 * c1 + ddh4 * d1 + ddh5 * y1) / (h * h)};
    }
};

namespace detail {

struct Trajectory {
    std::vector<double> g, p;
};

// Classical RK4 for (g, p)' = (p, rhs(g, p)) from t_min with the entry-branch seed g0.
inline Trajectory integrate(Curvature c, int n, double g0, double t_min, double t_max, double h) {
    const auto steps = static_cast<std::size_t>(std::llround((t_max - t_min) / h));
    Trajectory tr;
    tr.g.resize(steps + 1);
    tr.p.resize(steps + 1);
    double g = g0, p = first_integral_slope(c, n, g0);
    tr.g[0] = g;
    tr.p[0] = p;
    auto F = [&](double gg, double pp) { return profile_rhs(c, n, gg, pp); };
    for (std::size_t i = 0; i < steps; ++i) {
        const double k1g = p, k1p = F(g, p);
        const double k2g = p + 0.5 * h * k1p, k2p = F(g + 0.5 * h * k1g, p + 0.5 * h * k1p);
        const double k3g = p + 0.5 * h * k2p, k3p = F(g + 0.5 * h * k2g, p + 0.5 * h * k2p);
        const double k4g = p + h * k3p, k4p = F(g + h * k3g, p + h * k3p);
        g += h / 6 * (k1g + 2 * k2g + 2 * k3g + k4g);
        p += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
        if (!(p < 1.0) || !std::isfinite(g)) {
            tr.g.resize(i + 1);
            tr.p.resize(i + 1);
            return tr;
        }
        tr.g[i + 1] = g;
        tr.p[i + 1] = p;
    }
    return tr;
}

}  // namespace detail

/// Solve the profile equation by shooting from t_min along the entry branch,
/// bisecting on log(f(t_min) - l) until f(t) - t -> 0 holds at t_max.
[[nodiscard]] inline Profile solve_profile(Curvature kind, int n, const ProfileOptions& opt = {}) {
    if (n < 2) throw std::domain_error("solve_profile: n must be >= 2");
    if (opt.t_min > -10 || opt.t_max < 10) throw std::domain_error("solve_profile: need t_min <= -10, t_max >= 10");
    if (!(opt.tol > 0)) throw std::domain_error("solve_profile: tol must be positive");
    Profile pr;
    pr.kind = kind;
    pr.n = n;
    pr.t_min = opt.t_min;
    pr.t_max = opt.t_max;
    pr.step = opt.step;
    const double l = pr.level();
    const std::size_t steps = static_cast<std::size_t>(std::llround((opt.t_max - opt.t_min) / opt.step));

    auto mismatch = [&](double logg) {
        const auto tr = detail::integrate(kind, n, std::exp(logg), opt.t_min, opt.t_max, opt.step);
        if (tr.g.size() < steps + 1) return std::numeric_limits<double>::infinity();
        const double fT = l + tr.g.back();
        return fT - opt.t_max - pr.tail(fT);
    };

    double lo = -700.0, hi = std::log(std::max(1.0, opt.t_max));
    double mlo = mismatch(lo), mhi = mismatch(hi);
    if (!(mlo < 0 && mhi > 0))
        throw SolverError("solve_profile: shooting bracket not found (mismatch " + std::to_string(mlo) + ", " +
                          std::to_string(mhi) + ")");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double m = mismatch(mid);
        (m < 0 ? lo : hi) = mid;
        (m < 0 ? mlo : mhi) = m;
    }
    pr.shoot_parameter = std::abs(mlo) < std::abs(mhi) ? lo : hi;
    pr.normalization = std::abs(mlo) < std::abs(mhi) ? mlo : mhi;

    const auto tr = detail::integrate(kind, n, std::exp(pr.shoot_parameter), opt.t_min, opt.t_max, opt.step);
    pr.t.resize(tr.g.size());
    pr.f.resize(tr.g.size());
    pr.fp = tr.p;
    pr.excess = tr.g;
    for (std::size_t i = 0; i < tr.g.size(); ++i) {
        pr.t[i] = opt.t_min + i * opt.step;
        pr.f[i] = l + tr.g[i];
    }
    pr.entry_gap = tr.g.front();

    // step-halving verification
    const auto half = detail::integrate(kind, n, std::exp(pr.shoot_parameter), opt.t_min, opt.t_max, 0.5 * opt.step);
    double diff = 0;
    for (std::size_t i = 0; i < tr.g.size() && 2 * i < half.g.size(); ++i)
        diff = std::max(diff, std::abs(tr.g[i] - half.g[2 * i]) / std::max(1.0, std::abs(pr.f[i])));
    pr.halving_estimate = diff;
    if (diff > opt.tol) throw StepSizeError("solve_profile: step-halving difference exceeds tolerance");

    // direct substitution: five-point differences of f' against the right-hand side
    double res = 0, ires = 0;
    const double h = opt.step;
    for (std::size_t i = 2; i + 2 < pr.t.size(); ++i) {
        const double fpp = (-pr.fp[i + 2] + 8 * pr.fp[i + 1] - 8 * pr.fp[i - 1] + pr.fp[i - 2]) / (12 * h);
        res = std::max(res, std::abs(fpp - profile_rhs(kind, n, tr.g[i], pr.fp[i])));
    }
    for (std::size_t i = 0; i < pr.t.size(); ++i) {
        const double w2 = (1 - pr.fp[i]) * (1 + pr.fp[i]);
        ires = std::max(ires, std::abs(w2 - first_integral_w2(kind, n, tr.g[i])) / w2);
    }
    pr.ode_residual = res;
    pr.integral_residual = ires;
    for (std::size_t i = 0; i < pr.t.size(); ++i)
        if (!(pr.f[i] > 0 && pr.fp[i] > 0 && pr.fp[i] < 1))
            throw SolverError("solve_profile: profile left the admissible range at t = " + std::to_string(pr.t[i]));
    return pr;
}

// ---------------------------------------------------------------------------
// Boosted and rotated troughs

/// Proper rotation R with R e1 = c.
[[nodiscard]] inline Mat rotation_to(const Vec& c) {
    const auto n = c.size();
    Mat R = Mat::Identity(n, n);
    const Vec u = Vec::Unit(n, 0);
    const double cth = std::clamp(c.dot(u), -1.0, 1.0);
    if (cth > 1.0 - 1e-15) return R;
    if (cth < -1.0 + 1e-15) {
        R(0, 0) = -1;
        R(1, 1) = -1;
        return R;
    }
    Vec v = c - cth * u;
    v.normalize();
    const double sth = std::sqrt(1.0 - cth * cth);
    R += (cth - 1.0) * (u * u.transpose() + v * v.transpose()) + sth * (v * u.transpose() - u * v.transpose());
    return R;
}

struct Cap {
    Vec center;
    double delta = std::numbers::pi / 2;
};

struct BoostFrame {
    double alpha = 0;
    Mat rotation;
};

/// Boost and rotation realizing a cap as Gauss image: R e1 = center, alpha = -cos(delta).
[[nodiscard]] inline BoostFrame cap_to_boost(const Cap& cap) {
    if (!(cap.delta > 0 && cap.delta < std::numbers::pi)) throw std::domain_error("cap_to_boost: degenerate cap");
    return {-std::cos(cap.delta), rotation_to(cap.center.normalized())};
}

/// Support value of a cap: sup over its points xi of xi.x.
[[nodiscard]] inline double cap_support(const Cap& cap, const Vec& x) {
    const double r = x.norm();
    if (r == 0.0) return 0.0;
    const double ang = std::acos(std::clamp(cap.center.dot(x) / r, -1.0, 1.0));
    return r * std::cos(std::max(0.0, ang - cap.delta));
}

/// The semitrough over a cap: graph of a boosted, rotated standard trough.
class Trough {
public:
    Trough(std::shared_ptr<const Profile> profile, const Cap& cap)
        : profile_(std::move(profile)), cap_(cap) {
        cap_.center.normalize();
        const auto b = cap_to_boost(cap_);
        alpha_ = b.alpha;
        R_ = b.rotation;
        s_ = std::sqrt(1.0 - alpha_ * alpha_);
    }

    [[nodiscard]] const Profile& profile() const { return *profile_; }
    [[nodiscard]] const Cap& cap() const { return cap_; }
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] const Mat& rotation() const { return R_; }

    /// Value of the standard (unboosted) trough and its gradient.
    [[nodiscard]] double standard(const Vec& y, Vec* grad = nullptr) const {
        const auto sm = profile_->sample(y(0));
        const double bar2 = y.tail(y.size() - 1).squaredNorm();
        const double z = std::sqrt(sm.f * sm.f + bar2);
        if (grad) {
            *grad = y / z;
            (*grad)(0) = sm.f * sm.fp / z;
        }
        return z;
    }

    /// Exact Hessian of the standard trough from f, f' and f''.
    [[nodiscard]] Mat standard_hessian(const Vec& y) const {
        const auto sm = profile_->sample(y(0));
        const auto n = y.size();
        const double z = std::sqrt(sm.f * sm.f + y.tail(n - 1).squaredNorm());
        Vec p = y;
        p(0) = sm.f * sm.fp;
        Mat H = Mat::Identity(n, n) / z - p * p.transpose() / (z * z * z);
        H(0, 0) = (sm.fp * sm.fp + sm.f * sm.fpp) / z - p(0) * p(0) / (z * z * z);
        return H;
    }

    [[nodiscard]] double value(const Vec& x, Vec* grad = nullptr) const {
        const Vec y = R_.transpose() * x;
        Vec gs;
        double z = 0;
        Vec pre = y;
        if (alpha_ == 0.0) {
            z = standard(y, &gs);
        } else {
            // preimage: x1 - alpha*zeta(x1, ybar) = s*y1, monotone in x1
            const double target = s_ * y(0);
            double t = target;
            for (int it = 0; it < 100; ++it) {
                pre(0) = t;
                z = standard(pre, &gs);
                const double r = t - alpha_ * z - target;
                const double step = r / (1.0 - alpha_ * gs(0));
                t -= step;
                if (std::abs(step) <= 4e-16 * (1.0 + std::abs(t))) break;
            }
            pre(0) = t;
            z = standard(pre, &gs);
            const double denom = 1.0 - alpha_ * gs(0);
            Vec gb = gs * (s_ / denom);
            gb(0) = (gs(0) - alpha_) / denom;
            gs = gb;
            z = (z - alpha_ * t) / s_;
        }
        if (grad) *grad = R_ * gs;
        return z;
    }

    /// Legendre transform of the trough, +infinity outside the cap hull.
    [[nodiscard]] double dual(const Vec& xi, Vec* argmax = nullptr) const {
        const Vec xr = R_.transpose() * xi;
        const double den = 1.0 + alpha_ * xr(0);
        if (!(xi.squaredNorm() < 1.0) || !(den > 0)) return std::numeric_limits<double>::infinity();
        Vec e = xr * (s_ / den);
        e(0) = (xr(0) + alpha_) / den;
        if (e(0) < 0) return std::numeric_limits<double>::infinity();
        const double wbar = std::sqrt(1.0 - e.tail(e.size() - 1).squaredNorm());
        const double p = e(0) / wbar;
        const double std_dual = wbar * profile_->conjugate(std::min(p, 1.0));
        if (argmax) {
            // preimage of xi under the gradient map
            Vec x(e.size());
            if (p > 0 && p < 1) {
                const double tt = profile_->inverse_slope(p);
                const double z = profile_->value(tt) / wbar;
                x = e * z;
                x(0) = tt;
                Vec xb = x;
                if (alpha_ != 0.0) {
                    const double zz = standard(x);
                    xb(0) = (x(0) - alpha_ * zz) / s_;
                }
                *argmax = R_ * xb;
            } else {
                *argmax = Vec::Constant(e.size(), std::numeric_limits<double>::quiet_NaN());
            }
        }
        return std_dual * den / s_;
    }

private:
    std::shared_ptr<const Profile> profile_;
    Cap cap_;
    double alpha_ = 0, s_ = 1;
    Mat R_;
};

/// zeta(r theta) - V(r theta) for the trough's own cap.
[[nodiscard]] inline std::vector<double> asymptotic_gap(const Trough& z, const Vec& theta,
                                                       const std::vector<double>& radii) {
    std::vector<double> out;
    out.reserve(radii.size());
    for (double r : radii) {
        const Vec x = r * theta;
        out.push_back(z.value(x) - cap_support(z.cap(), x));
    }
    return out;
}

}  // namespace spacelike::trough
