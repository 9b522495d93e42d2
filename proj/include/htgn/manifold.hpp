#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace htgn::manifold {

// Numerical guards. Points are kept at squared norm c*|x|^2 <= (1 - kBallEps)^2
// and arctanh arguments are clamped away from +-1, where the metric blows up.
inline constexpr double kBallEps = 1e-5;
inline constexpr double kAtanhClamp = 1.0 - 1e-15;

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void check_finite(const Vec& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::domain_error(std::string(what) + ": non-finite input");
}

inline double clamp_atanh(double x) {
    if (x > kAtanhClamp) return kAtanhClamp;
    if (x < -kAtanhClamp) return -kAtanhClamp;
    return x;
}

// Negative curvature -c with c > 0.
struct Curvature {
    double c;
    explicit Curvature(double c_) : c(c_) {
        if (!(c > 0.0) || !std::isfinite(c))
            throw std::invalid_argument("Curvature: c must be positive, got " +
                                        std::to_string(c_));
    }
    double sqrt_c() const { return std::sqrt(c); }
};

// Rescales x onto the (1 - kBallEps) shell if it is on or outside it.
inline Vec project_to_ball(Vec x, double c) {
    check_finite(x, "project_to_ball");
    const double n = norm(x);
    const double max_norm = (1.0 - kBallEps) / std::sqrt(c);
    if (n >= max_norm && n > 0.0) {
        const double s = max_norm / n;
        for (double& v : x) v *= s;
    }
    return x;
}

// A point of the curvature-c Poincare ball; construction projects inside.
struct PoincarePoint {
    Vec coords;
    double c;

    PoincarePoint(Vec raw, Curvature curv)
        : coords(project_to_ball(std::move(raw), curv.c)), c(curv.c) {}
};

// Tangent vector anchored at the origin (the reference point used throughout).
struct TangentVector {
    Vec coords;
    explicit TangentVector(Vec v) : coords(std::move(v)) {
        check_finite(coords, "TangentVector");
    }
};

inline void check_same_curvature(const PoincarePoint& u, const PoincarePoint& v,
                                 const char* what) {
    if (u.c != v.c)
        throw std::invalid_argument(std::string(what) + ": curvature mismatch " +
                                    std::to_string(u.c) + " vs " + std::to_string(v.c));
    if (u.coords.size() != v.coords.size())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

// lambda_x = 2 / (1 - c|x|^2)
inline double conformal_factor(const Vec& x, double c) {
    return 2.0 / (1.0 - c * dot(x, x));
}
inline double conformal_factor(const PoincarePoint& x) {
    return conformal_factor(x.coords, x.c);
}

inline Vec mobius_add(const Vec& u, const Vec& v, double c) {
    check_finite(u, "mobius_add");
    check_finite(v, "mobius_add");
    const double uv = dot(u, v), uu = dot(u, u), vv = dot(v, v);
    const double cu = 1.0 + 2.0 * c * uv + c * vv;
    const double cv = 1.0 - c * uu;
    const double den = 1.0 + 2.0 * c * uv + c * c * uu * vv;
    Vec out(u.size());
    for (size_t i = 0; i < u.size(); ++i) out[i] = (cu * u[i] + cv * v[i]) / den;
    return out;
}

inline PoincarePoint mobius_add(const PoincarePoint& u, const PoincarePoint& v) {
    check_same_curvature(u, v, "mobius_add");
    return PoincarePoint(mobius_add(u.coords, v.coords, u.c), Curvature(u.c));
}

// exp_0(a) = tanh(sqrt(c)|a|) * a / (sqrt(c)|a|)
inline Vec expmap0(const Vec& a, double c) {
    check_finite(a, "expmap0");
    const double sc = std::sqrt(c);
    const double n = sc * norm(a);
    double scale;
    if (n < 1e-4) {
        scale = 1.0 - n * n / 3.0;  // tanh(n)/n
    } else {
        scale = std::tanh(n) / n;
    }
    Vec out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * scale;
    return project_to_ball(std::move(out), c);
}

// log_0(b) = arctanh(sqrt(c)|b|) * b / (sqrt(c)|b|)
inline Vec logmap0(const Vec& b, double c) {
    check_finite(b, "logmap0");
    const double nb = norm(b);
    if (c * nb * nb >= 1.0)
        throw std::domain_error("logmap0: point on or outside the ball boundary");
    const double n = std::sqrt(c) * nb;
    double scale;
    if (n < 1e-4) {
        scale = 1.0 + n * n / 3.0;  // arctanh(n)/n
    } else {
        const double nc = clamp_atanh(n);
        scale = std::atanh(nc) / nc;
    }
    Vec out(b.size());
    for (size_t i = 0; i < b.size(); ++i) out[i] = b[i] * scale;
    return out;
}

// General-reference-point maps. Only the origin is exercised by the model,
// but these implement the full formulas for completeness and testing.
inline Vec expmap_at(const Vec& base, const Vec& a, double c) {
    check_finite(a, "expmap_at");
    const double sc = std::sqrt(c);
    const double na = norm(a);
    if (na == 0.0) return base;
    const double lam = conformal_factor(base, c);
    const double t = std::tanh(sc * lam * na / 2.0);
    Vec scaled(a.size());
    for (size_t i = 0; i < a.size(); ++i) scaled[i] = t * a[i] / (sc * na);
    return project_to_ball(mobius_add(base, scaled, c), c);
}

inline Vec logmap_at(const Vec& base, const Vec& b, double c) {
    const Vec w = mobius_add([&] {
        Vec nb = base;
        for (double& x : nb) x = -x;
        return nb;
    }(), b, c);
    const double nw = norm(w);
    if (nw == 0.0) return Vec(b.size(), 0.0);
    const double sc = std::sqrt(c);
    const double lam = conformal_factor(base, c);
    const double s = 2.0 / (sc * lam) * std::atanh(clamp_atanh(sc * nw));
    Vec out(w.size());
    for (size_t i = 0; i < w.size(); ++i) out[i] = s * w[i] / nw;
    return out;
}

// d(u, v) = (2 / sqrt(c)) * arctanh(sqrt(c) |(-u) o v|)
inline double dist(const Vec& u, const Vec& v, double c) {
    Vec nu = u;
    for (double& x : nu) x = -x;
    const Vec w = mobius_add(nu, v, c);
    const double sc = std::sqrt(c);
    return 2.0 / sc * std::atanh(clamp_atanh(sc * norm(w)));
}

inline double dist(const PoincarePoint& u, const PoincarePoint& v) {
    check_same_curvature(u, v, "dist");
    return dist(u.coords, v.coords, u.c);
}

struct SingularGradient : std::domain_error {
    using std::domain_error::domain_error;
};

// Closed-form euclidean gradient of dist w.r.t. u on the unit ball (c = 1).
// The training path differentiates through the tape instead; this form exists
// for testing. Note the gamma coefficient uses |v|^2, not |u|^2: the |u|^2
// variant sometimes seen in print does not match finite differences.
inline Vec dist_grad_u(const Vec& u, const Vec& v) {
    const double uu = dot(u, u), vv = dot(v, v), uv = dot(u, v);
    const double alpha = 1.0 - uu;
    const double beta = 1.0 - vv;
    double duv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) duv += (u[i] - v[i]) * (u[i] - v[i]);
    const double gamma = 1.0 + 2.0 / (alpha * beta) * duv;
    const double disc = gamma * gamma - 1.0;
    if (disc <= 0.0)
        throw SingularGradient("dist_grad_u: gamma = 1 (u == v), gradient singular");
    const double coef = 4.0 / (beta * std::sqrt(disc));
    Vec out(u.size());
    for (size_t i = 0; i < u.size(); ++i)
        out[i] = coef * ((vv - 2.0 * uv + 1.0) / (alpha * alpha) * u[i] - v[i] / alpha);
    return out;
}

// P_{0->x}(b) = (lambda_0 / lambda_x) b = (1 - c|x|^2) b
inline Vec transport_from_origin(const Vec& b, const Vec& x, double c) {
    const double s = 1.0 - c * dot(x, x);
    Vec out(b.size());
    for (size_t i = 0; i < b.size(); ++i) out[i] = s * b[i];
    return out;
}

inline TangentVector parallel_transport_from_origin(const TangentVector& b,
                                                    const PoincarePoint& x) {
    return TangentVector(transport_from_origin(b.coords, x.coords, x.c));
}

// Bias addition per the transport recipe: exp_x(P_{0->x}(b)). Algebraically
// equal to x o exp_0(b); both routes are kept so tests can cross-check them.
inline Vec bias_add_transport(const Vec& x, const Vec& b, double c) {
    return expmap_at(x, transport_from_origin(b, x, c), c);
}

}  // namespace htgn::manifold
