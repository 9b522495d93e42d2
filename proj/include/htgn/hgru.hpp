#pragma once

#include <stdexcept>

#include "htgn/manifold_ops.hpp"
#include "htgn/matrix.hpp"
#include "htgn/rng.hpp"
#include "htgn/tape.hpp"

namespace htgn {

// Gate weights, all d' x d'. No gate biases. Products are taken as X W^T
// with node states as n x d' rows.
struct HgruParams {
    Matrix Wz, Wr, Wh, Uz, Ur, Uh;

    static HgruParams init(int d, Rng& rng) {
        HgruParams p;
        p.Wz = glorot_uniform(d, d, rng);
        p.Wr = glorot_uniform(d, d, rng);
        p.Wh = glorot_uniform(d, d, rng);
        p.Uz = glorot_uniform(d, d, rng);
        p.Ur = glorot_uniform(d, d, rng);
        p.Uh = glorot_uniform(d, d, rng);
        return p;
    }
};

struct HgruVars {
    ad::Var Wz, Wr, Wh, Uz, Ur, Uh;
};

// One recurrent update in the tangent space:
//   P = sigma(X Wz^T + H Uz^T), R = sigma(X Wr^T + H Ur^T),
//   Htil = tanh(X Wh^T + (R . H) Uh^T), out = exp((1-P).Htil + P.H).
inline ad::Var hgru_step(ad::Var x_points, ad::Var h_prev_points, const HgruVars& p,
                         const mops::Geometry& geo) {
    if (!x_points.value().same_shape(h_prev_points.value()))
        throw std::invalid_argument("hgru_step: shape mismatch " +
                                    shape_str(x_points.value()) + " vs " +
                                    shape_str(h_prev_points.value()));
    ad::Tape& t = *x_points.tape;
    ad::Var x = geo.to_tangent(x_points);
    ad::Var h = geo.to_tangent(h_prev_points);

    ad::Var pg = ad::sigmoid(ad::add(ad::matmul(x, ad::transpose(p.Wz)),
                                     ad::matmul(h, ad::transpose(p.Uz))));
    ad::Var rg = ad::sigmoid(ad::add(ad::matmul(x, ad::transpose(p.Wr)),
                                     ad::matmul(h, ad::transpose(p.Ur))));
    ad::Var cand = ad::tanh(ad::add(ad::matmul(x, ad::transpose(p.Wh)),
                                    ad::matmul(ad::mul(rg, h), ad::transpose(p.Uh))));
    ad::Var ones = ad::const_filled(t, x.rows(), x.cols(), 1.0);
    ad::Var out = ad::add(ad::mul(ad::sub(ones, pg), cand), ad::mul(pg, h));
    return geo.to_manifold(out);
}

}  // namespace htgn
