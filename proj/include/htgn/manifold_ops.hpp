#pragma once

#include <cmath>

#include "htgn/manifold.hpp"
#include "htgn/tape.hpp"

namespace htgn::mops {

using ad::Var;

// Row-wise ball projection. Rows with sqrt(c)|x| >= 1 - kBallEps are rescaled
// onto that shell; interior rows pass through untouched. The backward rule
// follows the branch each row actually took, including the dependence of the
// shell radius on the curvature.
inline Var project_rows(Var x, Var sqrt_c) {
    ad::Tape& t = *x.tape;
    const Matrix& xv = x.value();
    const double sc = sqrt_c.scalar();
    const double limit = (1.0 - manifold::kBallEps) / sc;
    Matrix v = xv;
    std::vector<char> projected(xv.rows, 0);
    std::vector<double> norms(xv.rows, 0.0);
    for (int i = 0; i < xv.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < xv.cols; ++j) s += xv(i, j) * xv(i, j);
        norms[i] = std::sqrt(s);
        if (norms[i] >= limit && norms[i] > 0.0) {
            projected[i] = 1;
            const double f = limit / norms[i];
            for (int j = 0; j < xv.cols; ++j) v(i, j) *= f;
        }
    }
    Var out = t.record("project-rows", std::move(v),
                       ad::detail::any_grad(x, sqrt_c), nullptr);
    t.node(out.id).back = [x, sqrt_c, out, projected, norms, limit, sc](ad::Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const Matrix& xv = t.node(x.id).value;
        const double s = t.fault_sign("project-rows");
        double dsc = 0.0;
        Matrix dx(xv.rows, xv.cols);
        for (int i = 0; i < xv.rows; ++i) {
            if (!projected[i]) {
                for (int j = 0; j < xv.cols; ++j) dx(i, j) = g(i, j);
                continue;
            }
            // out = x * limit / |x|, limit = (1 - eps) / sqrt_c
            const double inv_n = 1.0 / norms[i];
            double xg = 0.0, xx = 0.0;
            for (int j = 0; j < xv.cols; ++j) {
                xg += xv(i, j) * g(i, j);
                xx += xv(i, j) * xv(i, j);
            }
            const double f = limit * inv_n;
            for (int j = 0; j < xv.cols; ++j)
                dx(i, j) = f * (g(i, j) - xv(i, j) * xg / xx);
            dsc += -(limit / sc) * inv_n * xg;
        }
        ad::detail::accum(t, x.id, dx, s);
        if (ad::detail::any_grad(sqrt_c)) {
            Matrix dc(1, 1);
            dc(0, 0) = dsc;
            ad::detail::accum(t, sqrt_c.id, dc, s);
        }
    };
    return out;
}

// exp_0 applied to each row: a -> a * tanhc(sqrt(c)|a|), then projected.
inline Var expmap_rows(Var tangent, Var sqrt_c) {
    const int n = tangent.rows(), d = tangent.cols();
    Var s = mul(ad::row_norms(tangent), ad::expand_scalar(sqrt_c, n, 1));
    Var scale = ad::tanhc(s);
    Var raw = mul(tangent, ad::expand_cols(scale, d));
    return project_rows(raw, sqrt_c);
}

// log_0 applied to each row: b -> b * atanhc(sqrt(c)|b|).
inline Var logmap_rows(Var points, Var sqrt_c) {
    const int n = points.rows(), d = points.cols();
    Var s = mul(ad::row_norms(points), ad::expand_scalar(sqrt_c, n, 1));
    Var scale = ad::atanhc(s);
    return mul(points, ad::expand_cols(scale, d));
}

// Row-wise Mobius addition u o v under curvature c (a 1x1 var).
inline Var mobius_add_rows(Var u, Var v, Var c) {
    ad::detail::require_same_shape(u, v, "mobius-add-rows");
    const int n = u.rows(), d = u.cols();
    Var c_col = ad::expand_scalar(c, n, 1);
    Var uv = ad::row_dots(u, v);
    Var uu = ad::row_dots(u, u);
    Var vv = ad::row_dots(v, v);
    Var two_c_uv = ad::scalar_mul(mul(c_col, uv), 2.0);
    Var ones = ad::const_filled(*u.tape, n, 1, 1.0);
    Var coef_u = ad::add(ad::add(ones, two_c_uv), mul(c_col, vv));
    Var coef_v = ad::sub(ones, mul(c_col, uu));
    Var den = ad::add(ad::add(ones, two_c_uv),
                      mul(mul(c_col, c_col), mul(uu, vv)));
    Var num = ad::add(mul(ad::expand_cols(coef_u, d), u),
                      mul(ad::expand_cols(coef_v, d), v));
    return ad::ediv(num, ad::expand_cols(den, d));
}

// Poincare distance per row pair: (m x d, m x d) -> m x 1.
inline Var dist_rows(Var u, Var v, Var sqrt_c) {
    const int n = u.rows();
    Var c = mul(sqrt_c, sqrt_c);
    Var w = mobius_add_rows(ad::neg(u), v, c);
    Var s = mul(ad::row_norms(w), ad::expand_scalar(sqrt_c, n, 1));
    Var two_over_sc = ad::ediv(ad::const_filled(*u.tape, 1, 1, 2.0), sqrt_c);
    return mul(ad::arctanh(s), ad::expand_scalar(two_over_sc, n, 1));
}

// Geometry mode used by every model component. Hyperbolic mode threads the
// learnable curvature through exp/log/dist; the euclidean ablation replaces
// the maps by the identity and the distance by its flat limit 2|u - v|.
struct Geometry {
    bool hyperbolic = true;
    Var sqrt_c;  // 1x1, valid in hyperbolic mode

    Var to_manifold(Var tangent_rows) const {
        return hyperbolic ? expmap_rows(tangent_rows, sqrt_c) : tangent_rows;
    }
    Var to_tangent(Var point_rows) const {
        return hyperbolic ? logmap_rows(point_rows, sqrt_c) : point_rows;
    }
    Var pair_dist(Var u, Var v) const {
        if (hyperbolic) return dist_rows(u, v, sqrt_c);
        return ad::scalar_mul(ad::row_norms(ad::sub(u, v)), 2.0);
    }
};

}  // namespace htgn::mops
