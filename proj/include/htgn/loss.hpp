#pragma once

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "htgn/data.hpp"
#include "htgn/manifold.hpp"
#include "htgn/manifold_ops.hpp"
#include "htgn/matrix.hpp"
#include "htgn/rng.hpp"
#include "htgn/tape.hpp"

namespace htgn {

// Fermi-Dirac decoder parameters. Defaults follow the usual choice r=2, s=1.
struct FermiDiracParams {
    double radius = 2.0;
    double steepness = 1.0;
};

struct EmptyTimestep : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Equal-sized positive and negative edge lists for one timestep.
struct EdgeSampleBatch {
    std::vector<Edge> positives;
    std::vector<Edge> negatives;
};

// Training batch for snapshot g: positives are its edges; negatives are
// uniform non-edges among `active` nodes (nodes seen with an edge up to this
// timestep). If the active set is too saturated to supply enough non-edges,
// sampling widens to the whole universe.
inline EdgeSampleBatch sample_edge_batch(const SnapshotGraph& g,
                                         const std::vector<int>& active, Rng& rng) {
    if (g.edges.empty())
        throw EmptyTimestep("sample_edge_batch: snapshot has no edges");
    EdgeSampleBatch b;
    b.positives = g.edges;
    const size_t want = b.positives.size();
    size_t attempts = 0;
    const size_t cap = 200 * (want + 5);
    const bool have_active = active.size() >= 2;
    while (b.negatives.size() < want && attempts < cap) {
        ++attempts;
        int i, j;
        if (have_active && attempts <= cap / 2) {
            i = active[rng.uniform_int(0, static_cast<int>(active.size()) - 1)];
            j = active[rng.uniform_int(0, static_cast<int>(active.size()) - 1)];
        } else {
            i = rng.uniform_int(0, g.n - 1);
            j = rng.uniform_int(0, g.n - 1);
        }
        if (i == j || g.has_edge(i, j)) continue;
        b.negatives.push_back(make_edge(i, j));
    }
    if (b.negatives.size() < want)
        throw std::runtime_error("sample_edge_batch: could not sample enough negatives");
    return b;
}

// ---------------------------------------------------------------------------
// plain (non-tape) forms, used for scoring and the Proposition-2 oracle
// ---------------------------------------------------------------------------

inline double row_dist(const Matrix& h, int i, int j, double c, bool hyperbolic) {
    manifold::Vec u(h.cols), v(h.cols);
    for (int k = 0; k < h.cols; ++k) {
        u[k] = h(i, k);
        v[k] = h(j, k);
    }
    if (hyperbolic) return manifold::dist(u, v, c);
    double s = 0.0;
    for (int k = 0; k < h.cols; ++k) s += (u[k] - v[k]) * (u[k] - v[k]);
    return 2.0 * std::sqrt(s);
}

inline double fermi_dirac_prob(double d, const FermiDiracParams& fd) {
    const double z = (d - fd.radius) / fd.steepness;
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

inline double fermi_dirac_prob(const manifold::PoincarePoint& u,
                               const manifold::PoincarePoint& v,
                               const FermiDiracParams& fd) {
    return fermi_dirac_prob(manifold::dist(u, v), fd);
}

inline double homophily_loss_value(const Matrix& h, const EdgeSampleBatch& b, double c,
                                   bool hyperbolic, const FermiDiracParams& fd) {
    if (b.positives.empty()) throw EmptyTimestep("homophily_loss: empty positive set");
    double pos = 0.0, neg = 0.0;
    for (const Edge& e : b.positives)
        pos -= std::log(fermi_dirac_prob(row_dist(h, e.first, e.second, c, hyperbolic), fd));
    for (const Edge& e : b.negatives)
        neg -= std::log(1.0 -
                        fermi_dirac_prob(row_dist(h, e.first, e.second, c, hyperbolic), fd));
    return pos / static_cast<double>(b.positives.size()) +
           neg / static_cast<double>(b.negatives.size());
}

inline double htc_loss_value(const Matrix& h_t, const Matrix& h_prev, double c,
                             bool hyperbolic) {
    check_same_shape(h_t, h_prev, "htc_loss");
    double s = 0.0;
    for (int i = 0; i < h_t.rows; ++i) {
        manifold::Vec u(h_t.cols), v(h_t.cols);
        for (int k = 0; k < h_t.cols; ++k) {
            u[k] = h_t(i, k);
            v[k] = h_prev(i, k);
        }
        if (hyperbolic) {
            s += manifold::dist(u, v, c);
        } else {
            double d2 = 0.0;
            for (int k = 0; k < h_t.cols; ++k) d2 += (u[k] - v[k]) * (u[k] - v[k]);
            s += 2.0 * std::sqrt(d2);
        }
    }
    return s / h_t.rows;
}

// ---------------------------------------------------------------------------
// tape forms used in training
// ---------------------------------------------------------------------------

namespace detail {

// gather rows listed in `idx` from an n x d var via a constant 0/1 selector
inline ad::Var gather_rows(ad::Var h, const std::vector<int>& idx) {
    Matrix sel(static_cast<int>(idx.size()), h.rows());
    for (size_t r = 0; r < idx.size(); ++r) sel(static_cast<int>(r), idx[r]) = 1.0;
    return ad::matmul(h.tape->constant(sel), h);
}

inline ad::Var pair_dists(ad::Var h, const std::vector<Edge>& pairs,
                          const mops::Geometry& geo) {
    std::vector<int> is, js;
    is.reserve(pairs.size());
    js.reserve(pairs.size());
    for (const Edge& e : pairs) {
        is.push_back(e.first);
        js.push_back(e.second);
    }
    return geo.pair_dist(gather_rows(h, is), gather_rows(h, js));
}

}  // namespace detail

// p = sigmoid((r - d)/s), the bounded Fermi-Dirac form used for training and
// scoring. (The raw exp((d-r)/s)^-1 print exceeds 1 for d < r; it survives
// only inside the Proposition-2 oracle below, whose algebra needs it.)
inline ad::Var fermi_dirac_prob_rows(ad::Var u, ad::Var v, const mops::Geometry& geo,
                                     const FermiDiracParams& fd) {
    ad::Var d = geo.pair_dist(u, v);
    ad::Var r = ad::const_filled(*u.tape, d.rows(), 1, fd.radius);
    return ad::sigmoid(ad::scalar_mul(ad::sub(r, d), 1.0 / fd.steepness));
}

// Binary cross-entropy through the Fermi-Dirac decoder:
//   (1/E1) sum_pos softplus((d-r)/s) + (1/E2) sum_neg softplus((r-d)/s)
// using -log sigmoid(x) = softplus(-x) for stability.
inline ad::Var homophily_loss(ad::Var h, const EdgeSampleBatch& b,
                              const mops::Geometry& geo, const FermiDiracParams& fd) {
    if (b.positives.empty()) throw EmptyTimestep("homophily_loss: empty positive set");
    ad::Tape& t = *h.tape;
    ad::Var dpos = detail::pair_dists(h, b.positives, geo);
    ad::Var dneg = detail::pair_dists(h, b.negatives, geo);
    ad::Var rpos = ad::const_filled(t, dpos.rows(), 1, fd.radius);
    ad::Var rneg = ad::const_filled(t, dneg.rows(), 1, fd.radius);
    ad::Var lp = ad::softplus(ad::scalar_mul(ad::sub(dpos, rpos), 1.0 / fd.steepness));
    ad::Var ln = ad::softplus(ad::scalar_mul(ad::sub(rneg, dneg), 1.0 / fd.steepness));
    return ad::add(ad::scalar_mul(ad::sum(lp), 1.0 / dpos.rows()),
                   ad::scalar_mul(ad::sum(ln), 1.0 / dneg.rows()));
}

// (1/N) sum_i d(h_t[i], h_prev[i])
inline ad::Var htc_loss(ad::Var h_t, ad::Var h_prev, const mops::Geometry& geo) {
    if (!h_t.value().same_shape(h_prev.value()))
        throw std::invalid_argument("htc_loss: shape mismatch " + shape_str(h_t.value()) +
                                    " vs " + shape_str(h_prev.value()));
    return ad::scalar_mul(ad::sum(geo.pair_dist(h_t, h_prev)), 1.0 / h_t.rows());
}

// L_t = L_{t,r} + lambda * L_{t,c}
inline ad::Var total_loss(ad::Var h_t, ad::Var h_prev, const EdgeSampleBatch& b,
                          double lambda, const mops::Geometry& geo,
                          const FermiDiracParams& fd) {
    ad::Var homo = homophily_loss(h_t, b, geo, fd);
    if (lambda == 0.0) return homo;
    return ad::add(homo, ad::scalar_mul(htc_loss(h_t, h_prev, geo), lambda));
}

// ---------------------------------------------------------------------------
// Proposition-2 oracle (log-linear decoder form)
// ---------------------------------------------------------------------------

// Per-timestep loss in the derivation form, where -log p is taken literally
// with p = exp((d-r)/s)^-1, and the negative term enters as -(1/E2) sum (1 - log p):
//   (1/E1) sum_pos (d-r)/s - (1/E2) sum_neg (1 + (d-r)/s) + lambda * htc
// States are indexed 0..T with states[0] the initial state.
inline double prop2_direct_loss(const std::vector<Matrix>& states,
                                const std::vector<EdgeSampleBatch>& batches,
                                double lambda, double s, double r, double c) {
    if (states.size() != batches.size() + 1)
        throw std::invalid_argument("prop2_direct_loss: need T+1 states for T batches");
    double total = 0.0;
    for (size_t t = 0; t < batches.size(); ++t) {
        const Matrix& h = states[t + 1];
        const EdgeSampleBatch& b = batches[t];
        double pos = 0.0, neg = 0.0;
        for (const Edge& e : b.positives)
            pos += (row_dist(h, e.first, e.second, c, true) - r) / s;
        for (const Edge& e : b.negatives)
            neg += 1.0 + (row_dist(h, e.first, e.second, c, true) - r) / s;
        total += pos / b.positives.size() - neg / b.negatives.size() +
                 lambda * htc_loss_value(h, states[t], c, true);
    }
    return total;
}

// The same sum rearranged node-centrically with the derivation coefficients
// eps0 = -1 per timestep, eps1 = lambda/N, eps2 = eps3 = 1/(s |E_t|).
inline double prop2_rearranged_loss(const std::vector<Matrix>& states,
                                    const std::vector<EdgeSampleBatch>& batches,
                                    double lambda, double s, double c) {
    if (states.size() != batches.size() + 1)
        throw std::invalid_argument("prop2_rearranged_loss: need T+1 states for T batches");
    double total = 0.0;
    for (size_t t = 0; t < batches.size(); ++t) {
        const Matrix& h = states[t + 1];
        const EdgeSampleBatch& b = batches[t];
        const double eps1 = lambda / h.rows;
        const double eps2 = 1.0 / (s * static_cast<double>(b.positives.size()));
        const double eps3 = 1.0 / (s * static_cast<double>(b.negatives.size()));
        double acc = -1.0;
        for (int i = 0; i < h.rows; ++i) {
            manifold::Vec u(h.cols), v(h.cols);
            for (int k = 0; k < h.cols; ++k) {
                u[k] = h(i, k);
                v[k] = states[t](i, k);
            }
            acc += eps1 * manifold::dist(u, v, c);
        }
        for (const Edge& e : b.positives)
            acc += eps2 * row_dist(h, e.first, e.second, c, true);
        for (const Edge& e : b.negatives)
            acc -= eps3 * row_dist(h, e.first, e.second, c, true);
        total += acc;
    }
    return total;
}

}  // namespace htgn
