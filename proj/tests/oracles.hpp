#pragma once

// Straight-line long-double re-implementations of the formulas, kept
// deliberately independent of the library code paths they check. Each one
// evaluates its formula exactly as written, with no shared helpers, no
// projection guards, and no tape.

#include <cmath>
#include <vector>

#include "htgn/matrix.hpp"

namespace oracle {

using ld = long double;
using VecL = std::vector<ld>;

inline ld dotL(const VecL& a, const VecL& b) {
    ld s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline ld normL(const VecL& a) { return std::sqrt(dotL(a, a)); }

inline VecL mobius(const VecL& u, const VecL& v, ld c) {
    const ld uv = dotL(u, v), uu = dotL(u, u), vv = dotL(v, v);
    const ld num_u = 1 + 2 * c * uv + c * vv;
    const ld num_v = 1 - c * uu;
    const ld den = 1 + 2 * c * uv + c * c * uu * vv;
    VecL out(u.size());
    for (size_t i = 0; i < u.size(); ++i) out[i] = (num_u * u[i] + num_v * v[i]) / den;
    return out;
}

inline ld conformal(const VecL& x, ld c) { return 2 / (1 - c * dotL(x, x)); }

// general-reference exponential map, evaluated literally
inline VecL expmap_at(const VecL& base, const VecL& a, ld c) {
    const ld na = normL(a);
    if (na == 0) return base;
    const ld sc = std::sqrt(c);
    const ld lam = conformal(base, c);
    const ld t = std::tanh(sc * lam * na / 2);
    VecL scaled(a.size());
    for (size_t i = 0; i < a.size(); ++i) scaled[i] = t * a[i] / (sc * na);
    return mobius(base, scaled, c);
}

inline VecL expmap0(const VecL& a, ld c) {
    return expmap_at(VecL(a.size(), 0), a, c);
}

inline VecL logmap_at(const VecL& base, const VecL& b, ld c) {
    VecL nb = base;
    for (ld& x : nb) x = -x;
    const VecL w = mobius(nb, b, c);
    const ld nw = normL(w);
    if (nw == 0) return VecL(b.size(), 0);
    const ld sc = std::sqrt(c);
    const ld lam = conformal(base, c);
    const ld s = 2 / (sc * lam) * std::atanh(sc * nw);
    VecL out(w.size());
    for (size_t i = 0; i < w.size(); ++i) out[i] = s * w[i] / nw;
    return out;
}

inline VecL logmap0(const VecL& b, ld c) { return logmap_at(VecL(b.size(), 0), b, c); }

inline ld dist(const VecL& u, const VecL& v, ld c) {
    VecL nu = u;
    for (ld& x : nu) x = -x;
    const ld sc = std::sqrt(c);
    return 2 / sc * std::atanh(sc * normL(mobius(nu, v, c)));
}

// bias addition exactly per the transported-bias definition:
// exp_x(P_{0->x}(b)) with P_{0->x}(b) = (lambda_0/lambda_x) b
inline VecL bias_add(const VecL& x, const VecL& b, ld c) {
    const ld factor = (1 - c * dotL(x, x));  // lambda_0 / lambda_x
    VecL tb(b.size());
    for (size_t i = 0; i < b.size(); ++i) tb[i] = factor * b[i];
    return expmap_at(x, tb, c);
}

// ---- conversions to and from htgn::Matrix rows ----

inline VecL row_of(const htgn::Matrix& m, int i) {
    VecL v(m.cols);
    for (int j = 0; j < m.cols; ++j) v[j] = m(i, j);
    return v;
}

inline double max_row_diff(const htgn::Matrix& m, int i, const VecL& v) {
    double worst = 0;
    for (int j = 0; j < m.cols; ++j)
        worst = std::max(worst, std::fabs(m(i, j) - static_cast<double>(v[j])));
    return worst;
}

}  // namespace oracle
