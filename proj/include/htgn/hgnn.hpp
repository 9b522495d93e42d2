#pragma once

#include <stdexcept>

#include "htgn/data.hpp"
#include "htgn/manifold_ops.hpp"
#include "htgn/matrix.hpp"
#include "htgn/rng.hpp"
#include "htgn/tape.hpp"

namespace htgn {

enum class Aggregation { attention, laplacian };

inline Aggregation parse_aggregation(const std::string& s) {
    if (s == "attention") return Aggregation::attention;
    if (s == "laplacian") return Aggregation::laplacian;
    throw std::invalid_argument("aggregation: expected attention|laplacian, got " + s);
}

// One layer's trainables: W (d_in x d_out), bias row b (1 x d_out, tangent at
// the origin) and the attention vector a (2*d_out x 1).
struct HgnnParams {
    Matrix W, b, a;

    static HgnnParams init(int d_in, int d_out, Rng& rng) {
        HgnnParams p;
        p.W = glorot_uniform(d_in, d_out, rng);
        p.b = Matrix(1, d_out);
        p.a = glorot_uniform(2 * d_out, 1, rng);
        return p;
    }
};

struct HgnnVars {
    ad::Var W, b, a;
};

// Additive attention mask: 0 on (i,j) with j in N(i) (self-loops included),
// -1e9 elsewhere. Softmax then puts exactly zero weight off-neighborhood.
inline Matrix attention_mask(const SnapshotGraph& g) {
    Matrix m(g.n, g.n, -1e9);
    for (int i = 0; i < g.n; ++i) m(i, i) = 0.0;
    for (const Edge& e : g.edges) {
        m(e.first, e.second) = 0.0;
        m(e.second, e.first) = 0.0;
    }
    return m;
}

// alpha_ij = 1/sqrt((d_i+1)(d_j+1)) over N(i) plus self-loop, zero elsewhere.
inline Matrix laplacian_weights(const SnapshotGraph& g) {
    Matrix m(g.n, g.n);
    auto w = [&](int i, int j) {
        return 1.0 / std::sqrt(static_cast<double>(g.degree[i] + 1) *
                               static_cast<double>(g.degree[j] + 1));
    };
    for (int i = 0; i < g.n; ++i) m(i, i) = w(i, i);
    for (const Edge& e : g.edges) {
        m(e.first, e.second) = w(e.first, e.second);
        m(e.second, e.first) = w(e.second, e.first);
    }
    return m;
}

// exp(W log(x)) followed by Mobius bias addition x' o exp_0(b), which equals
// the transported-bias form exp_x(P_{0->x}(b)).
inline ad::Var hyp_linear(ad::Var x_points, ad::Var W, ad::Var b,
                          const mops::Geometry& geo) {
    if (x_points.cols() != W.rows())
        throw std::invalid_argument("hyp_linear: dimension mismatch " +
                                    shape_str(x_points.value()) + " vs " +
                                    shape_str(W.value()));
    ad::Var t = ad::matmul(geo.to_tangent(x_points), W);
    if (!geo.hyperbolic) return ad::broadcast_row_add(t, b);
    ad::Var m = geo.to_manifold(t);
    ad::Var bias_pt = mops::expmap_rows(b, geo.sqrt_c);  // 1 x d_out point
    ad::Var bias_rows = ad::matmul(ad::const_filled(*m.tape, m.rows(), 1, 1.0), bias_pt);
    ad::Var c = ad::mul(geo.sqrt_c, geo.sqrt_c);
    return mops::project_rows(mops::mobius_add_rows(m, bias_rows, c), geo.sqrt_c);
}

// Tangent-space neighborhood aggregation (self-loops always added).
inline ad::Var aggregate(ad::Var m_points, const SnapshotGraph& g, ad::Var a,
                         Aggregation mode, const mops::Geometry& geo,
                         double leaky_slope = 0.2) {
    if (m_points.rows() != g.n)
        throw std::invalid_argument("aggregate: row count " + shape_str(m_points.value()) +
                                    " does not match node count " + std::to_string(g.n));
    ad::Tape& t = *m_points.tape;
    ad::Var u = geo.to_tangent(m_points);  // n x d
    const int n = u.rows(), d = u.cols();
    ad::Var agg{};
    if (mode == Aggregation::laplacian) {
        agg = ad::matmul(t.constant(laplacian_weights(g)), u);
    } else {
        if (a.rows() != 2 * d || a.cols() != 1)
            throw std::invalid_argument("aggregate: attention vector " +
                                        shape_str(a.value()) + " does not match 2x" +
                                        std::to_string(d));
        // split a = [a_self; a_neigh]; s_ij = LeakyReLU(a_self.u_i + a_neigh.u_j)
        Matrix sel_top(d, 2 * d), sel_bot(d, 2 * d);
        for (int i = 0; i < d; ++i) {
            sel_top(i, i) = 1.0;
            sel_bot(i, d + i) = 1.0;
        }
        ad::Var p = ad::matmul(u, ad::matmul(t.constant(sel_top), a));  // n x 1
        ad::Var q = ad::matmul(u, ad::matmul(t.constant(sel_bot), a));  // n x 1
        ad::Var scores = ad::add(ad::matmul(p, ad::const_filled(t, 1, n, 1.0)),
                                 ad::matmul(ad::const_filled(t, n, 1, 1.0), ad::transpose(q)));
        ad::Var masked = ad::add(ad::leaky_relu(scores, leaky_slope),
                                 t.constant(attention_mask(g)));
        agg = ad::matmul(ad::softmax_rows(masked), u);
    }
    return geo.to_manifold(agg);
}

// exp(relu(log(x))) row-wise.
inline ad::Var hyp_activation(ad::Var x_points, const mops::Geometry& geo) {
    return geo.to_manifold(ad::relu(geo.to_tangent(x_points)));
}

// One HGNN layer: activation(aggregate(linear(x))).
inline ad::Var hgnn_layer(ad::Var x_points, const SnapshotGraph& g, const HgnnVars& p,
                          Aggregation mode, const mops::Geometry& geo,
                          double leaky_slope = 0.2) {
    ad::Var m = hyp_linear(x_points, p.W, p.b, geo);
    ad::Var agg = aggregate(m, g, p.a, mode, geo, leaky_slope);
    return hyp_activation(agg, geo);
}

}  // namespace htgn
