#pragma once

#include <deque>
#include <stdexcept>
#include <vector>

#include "htgn/manifold_ops.hpp"
#include "htgn/matrix.hpp"
#include "htgn/rng.hpp"
#include "htgn/tape.hpp"

namespace htgn {

// Ring buffer of the last w hidden-state matrices (hyperbolic points),
// oldest first. Pre-filled with copies of the initial state so attention
// always sees exactly w entries.
struct StateMemoryBank {
    int capacity = 0;
    std::deque<Matrix> states;

    explicit StateMemoryBank(int w = 0) : capacity(w) {}

    void fill_with(const Matrix& h0) {
        states.clear();
        for (int i = 0; i < capacity; ++i) states.push_back(h0);
    }
    void push(Matrix h) {
        states.push_back(std::move(h));
        while (static_cast<int>(states.size()) > capacity) states.pop_front();
    }
    const Matrix& latest() const { return states.back(); }
    int size() const { return static_cast<int>(states.size()); }
};

// Q weights node content (k x d'), r weights the time axis (k x 1).
struct HtaParams {
    Matrix Q, r;

    static HtaParams init(int k, int d, Rng& rng) {
        HtaParams p;
        p.Q = glorot_uniform(k, d, rng);
        p.r = glorot_uniform(k, 1, rng);
        return p;
    }
};

struct HtaVars {
    ad::Var Q, r;
};

// Temporal attention over the bank. Each node attends over its own w
// historical tangent vectors: s_tau = r . tanh(Q u_tau), alpha = softmax(s),
// output = exp(sum_tau alpha_tau u_tau). With `softmax_over_nodes` the
// normalization runs down the node axis instead (the alternate reading of
// the row softmax, kept for comparison).
inline ad::Var hta(const std::vector<ad::Var>& bank_points, const HtaVars& p,
                   const mops::Geometry& geo, bool softmax_over_nodes = false) {
    if (bank_points.empty()) throw std::invalid_argument("hta: empty state bank");
    ad::Tape& t = *bank_points.front().tape;
    const int w = static_cast<int>(bank_points.size());
    const int n = bank_points.front().rows();
    const int d = bank_points.front().cols();
    for (const ad::Var& s : bank_points)
        if (s.rows() != n || s.cols() != d)
            throw std::logic_error("hta: inconsistent state shapes in bank, " +
                                   shape_str(s.value()) + " vs " +
                                   shape_str(bank_points.front().value()));

    std::vector<ad::Var> u(bank_points.size());
    for (int i = 0; i < w; ++i) u[i] = geo.to_tangent(bank_points[i]);

    ad::Var qt = ad::transpose(p.Q);  // d x k
    ad::Var scores{};                 // n x w
    for (int tau = 0; tau < w; ++tau) {
        ad::Var s_col = ad::matmul(ad::tanh(ad::matmul(u[tau], qt)), p.r);  // n x 1
        Matrix unit(1, w);
        unit(0, tau) = 1.0;
        ad::Var piece = ad::matmul(s_col, t.constant(unit));
        scores = (tau == 0) ? piece : ad::add(scores, piece);
    }

    ad::Var alpha{};
    if (softmax_over_nodes) {
        alpha = ad::transpose(ad::softmax_rows(ad::transpose(scores)));
    } else {
        alpha = ad::softmax_rows(scores);
    }

    ad::Var mixed{};  // n x d, convex combination of historical tangents
    for (int tau = 0; tau < w; ++tau) {
        Matrix pick(w, 1);
        pick(tau, 0) = 1.0;
        ad::Var a_col = ad::matmul(alpha, t.constant(pick));  // n x 1
        ad::Var piece = ad::mul(ad::expand_cols(a_col, d), u[tau]);
        mixed = (tau == 0) ? piece : ad::add(mixed, piece);
    }
    return geo.to_manifold(mixed);
}

}  // namespace htgn
