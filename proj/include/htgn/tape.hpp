#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "htgn/matrix.hpp"

namespace htgn::ad {

class Tape;

// Handle into a tape; cheap to copy.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Matrix& value() const;
    const Matrix& grad() const;
    int rows() const { return value().rows; }
    int cols() const { return value().cols; }
    double scalar() const;
};

// One recorded operation: the forward value, a gradient accumulator of the
// same shape, and a backward closure that scatters the output gradient into
// the inputs' accumulators.
struct TapeNode {
    Matrix value;
    Matrix grad;
    std::string kind;
    bool needs_grad = false;
    std::function<void(Tape&)> back;  // empty for leaves
};

// Process-wide fault injection used by the gradcheck CLI's self-test: newly
// created tapes flip the backward sign of this op kind.
inline std::string g_injected_fault_kind;

class Tape {
public:
    Tape() : fault_kind(g_injected_fault_kind) {}

    Var leaf(Matrix value, bool needs_grad = true) {
        if (!value.all_finite())
            throw std::domain_error("Tape::leaf: non-finite input");
        return push("leaf", std::move(value), needs_grad, nullptr);
    }
    Var constant(Matrix value) { return leaf(std::move(value), false); }

    Var record(const std::string& kind, Matrix value, bool needs_grad,
               std::function<void(Tape&)> back) {
        return push(kind, std::move(value), needs_grad, std::move(back));
    }

    // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule once,
    // in reverse recording order.
    void backward(Var loss) {
        if (loss.tape != this) throw std::invalid_argument("backward: var from another tape");
        const Matrix& v = node(loss.id).value;
        if (v.rows != 1 || v.cols != 1)
            throw std::invalid_argument("backward: loss must be 1x1, got " + shape_str(v));
        if (backward_done_)
            throw std::logic_error("backward: called twice without reset");
        backward_done_ = true;
        node(loss.id).grad(0, 0) = 1.0;
        for (int i = loss.id; i >= 0; --i) {
            TapeNode& n = nodes_[i];
            if (n.back && n.needs_grad) n.back(*this);
        }
    }

    // Zeroes every gradient accumulator and re-arms backward.
    void reset() {
        for (TapeNode& n : nodes_) n.grad.zero();
        backward_done_ = false;
    }

    TapeNode& node(int id) { return nodes_[id]; }
    const TapeNode& node(int id) const { return nodes_[id]; }
    size_t size() const { return nodes_.size(); }

    // Test fixture for the gradcheck CLI contract: the named op kind
    // accumulates its input gradients with flipped sign.
    std::string fault_kind;
    double fault_sign(const std::string& kind) const {
        return kind == fault_kind ? -1.0 : 1.0;
    }

private:
    Var push(const std::string& kind, Matrix value, bool needs_grad,
             std::function<void(Tape&)> back) {
        TapeNode n;
        n.grad = Matrix(value.rows, value.cols);
        n.value = std::move(value);
        n.kind = kind;
        n.needs_grad = needs_grad;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{this, static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<TapeNode> nodes_;
    bool backward_done_ = false;
};

inline const Matrix& Var::value() const { return tape->node(id).value; }
inline const Matrix& Var::grad() const { return tape->node(id).grad; }
inline double Var::scalar() const {
    const Matrix& v = value();
    if (v.rows != 1 || v.cols != 1)
        throw std::invalid_argument("Var::scalar: not 1x1, got " + shape_str(v));
    return v(0, 0);
}

namespace detail {

inline Tape& same_tape(Var a, Var b, const char* what) {
    if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape)
        throw std::invalid_argument(std::string(what) + ": vars from different tapes");
    return *a.tape;
}

inline void require_same_shape(Var a, Var b, const char* what) {
    if (!a.value().same_shape(b.value()))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    shape_str(a.value()) + " vs " + shape_str(b.value()));
}

// dst.grad += sign * delta, skipped for nodes that do not need gradients
inline void accum(Tape& t, int id, const Matrix& delta, double sign = 1.0) {
    TapeNode& n = t.node(id);
    if (!n.needs_grad) return;
    for (size_t i = 0; i < n.grad.a.size(); ++i) n.grad.a[i] += sign * delta.a[i];
}

inline bool any_grad(Var a) { return a.tape->node(a.id).needs_grad; }
inline bool any_grad(Var a, Var b) { return any_grad(a) || any_grad(b); }

constexpr double kAtanhClamp = 1.0 - 1e-15;

inline double clamp_atanh(double x) {
    if (x > kAtanhClamp) return kAtanhClamp;
    if (x < -kAtanhClamp) return -kAtanhClamp;
    return x;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary ops
// ---------------------------------------------------------------------------

inline Var add(Var a, Var b) {
    Tape& t = detail::same_tape(a, b, "add");
    detail::require_same_shape(a, b, "add");
    Matrix v = a.value();
    axpy(v, b.value());
    Var out = t.record("add", std::move(v), detail::any_grad(a, b), nullptr);
    t.node(out.id).back = [a, b, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const double s = t.fault_sign("add");
        detail::accum(t, a.id, g, s);
        detail::accum(t, b.id, g, s);
    };
    return out;
}

inline Var sub(Var a, Var b) {
    Tape& t = detail::same_tape(a, b, "sub");
    detail::require_same_shape(a, b, "sub");
    Matrix v = a.value();
    axpy(v, b.value(), -1.0);
    Var out = t.record("sub", std::move(v), detail::any_grad(a, b), nullptr);
    t.node(out.id).back = [a, b, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const double s = t.fault_sign("sub");
        detail::accum(t, a.id, g, s);
        detail::accum(t, b.id, g, -s);
    };
    return out;
}

inline Var mul(Var a, Var b) {
    Tape& t = detail::same_tape(a, b, "elementwise-mul");
    detail::require_same_shape(a, b, "elementwise-mul");
    Matrix v = a.value();
    for (size_t i = 0; i < v.a.size(); ++i) v.a[i] *= b.value().a[i];
    Var out = t.record("elementwise-mul", std::move(v), detail::any_grad(a, b), nullptr);
    t.node(out.id).back = [a, b, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const double s = t.fault_sign("elementwise-mul");
        if (detail::any_grad(a)) {
            Matrix da = g;
            for (size_t i = 0; i < da.a.size(); ++i) da.a[i] *= b.value().a[i];
            detail::accum(t, a.id, da, s);
        }
        if (detail::any_grad(b)) {
            Matrix db = g;
            for (size_t i = 0; i < db.a.size(); ++i) db.a[i] *= a.value().a[i];
            detail::accum(t, b.id, db, s);
        }
    };
    return out;
}

inline Var ediv(Var a, Var b) {
    Tape& t = detail::same_tape(a, b, "elementwise-div");
    detail::require_same_shape(a, b, "elementwise-div");
    Matrix v = a.value();
    for (size_t i = 0; i < v.a.size(); ++i) v.a[i] /= b.value().a[i];
    Var out = t.record("elementwise-div", std::move(v), detail::any_grad(a, b), nullptr);
    t.node(out.id).back = [a, b, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const Matrix& y = t.node(out.id).value;
        const double s = t.fault_sign("elementwise-div");
        if (detail::any_grad(a)) {
            Matrix da = g;
            for (size_t i = 0; i < da.a.size(); ++i) da.a[i] /= b.value().a[i];
            detail::accum(t, a.id, da, s);
        }
        if (detail::any_grad(b)) {
            Matrix db = g;
            for (size_t i = 0; i < db.a.size(); ++i)
                db.a[i] *= -y.a[i] / b.value().a[i];
            detail::accum(t, b.id, db, s);
        }
    };
    return out;
}

inline Var matmul(Var a, Var b) {
    Tape& t = detail::same_tape(a, b, "matmul");
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimension mismatch " +
                                    shape_str(a.value()) + " vs " + shape_str(b.value()));
    Matrix v = matprod(a.value(), b.value());
    Var out = t.record("matmul", std::move(v), detail::any_grad(a, b), nullptr);
    t.node(out.id).back = [a, b, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const double s = t.fault_sign("matmul");
        if (detail::any_grad(a)) detail::accum(t, a.id, matprod(g, transposed(b.value())), s);
        if (detail::any_grad(b)) detail::accum(t, b.id, matprod(transposed(a.value()), g), s);
    };
    return out;
}

inline Var scalar_mul(Var a, double k) {
    Tape& t = *a.tape;
    Matrix v = a.value();
    for (double& x : v.a) x *= k;
    Var out = t.record("scalar-mul", std::move(v), detail::any_grad(a), nullptr);
    t.node(out.id).back = [a, k, out](Tape& t) {
        Matrix da = t.node(out.id).grad;
        for (double& x : da.a) x *= k;
        detail::accum(t, a.id, da, t.fault_sign("scalar-mul"));
    };
    return out;
}

inline Var neg(Var a) { return scalar_mul(a, -1.0); }

inline Var transpose(Var a) {
    Tape& t = *a.tape;
    Var out = t.record("transpose", transposed(a.value()), detail::any_grad(a), nullptr);
    t.node(out.id).back = [a, out](Tape& t) {
        detail::accum(t, a.id, transposed(t.node(out.id).grad), t.fault_sign("transpose"));
    };
    return out;
}

// ---------------------------------------------------------------------------
// elementwise nonlinearities
// ---------------------------------------------------------------------------

namespace detail {

template <class Fwd, class Bwd>
Var unary_op(Var a, const char* kind, Fwd fwd, Bwd dfdx_from_xy) {
    Tape& t = *a.tape;
    Matrix v = a.value();
    for (double& x : v.a) x = fwd(x);
    Var out = t.record(kind, std::move(v), any_grad(a), nullptr);
    std::string k = kind;
    t.node(out.id).back = [a, out, k, dfdx_from_xy](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const Matrix& y = t.node(out.id).value;
        const Matrix& x = t.node(a.id).value;
        Matrix da(g.rows, g.cols);
        for (size_t i = 0; i < da.a.size(); ++i)
            da.a[i] = g.a[i] * dfdx_from_xy(x.a[i], y.a[i]);
        accum(t, a.id, da, t.fault_sign(k));
    };
    return out;
}

}  // namespace detail

inline Var tanh(Var a) {
    return detail::unary_op(
        a, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
    return detail::unary_op(
        a, "sigmoid",
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

// Input clamped to +-(1 - 1e-15); the backward rule uses the clamped value so
// forward and backward stay consistent at the boundary.
inline Var arctanh(Var a) {
    return detail::unary_op(
        a, "arctanh", [](double x) { return std::atanh(detail::clamp_atanh(x)); },
        [](double x, double) {
            const double c = detail::clamp_atanh(x);
            return 1.0 / (1.0 - c * c);
        });
}

// tanh(x)/x, the radial scale of the exponential map; series near zero.
inline Var tanhc(Var a) {
    return detail::unary_op(
        a, "tanhc",
        [](double x) {
            if (std::fabs(x) < 1e-4) return 1.0 - x * x / 3.0 + 2.0 * x * x * x * x / 15.0;
            return std::tanh(x) / x;
        },
        [](double x, double) {
            if (std::fabs(x) < 1e-4) return -2.0 * x / 3.0 + 8.0 * x * x * x / 15.0;
            const double th = std::tanh(x);
            return (x * (1.0 - th * th) - th) / (x * x);
        });
}

// arctanh(x)/x, the radial scale of the logarithmic map; clamped like arctanh.
inline Var atanhc(Var a) {
    return detail::unary_op(
        a, "atanhc",
        [](double x) {
            const double c = detail::clamp_atanh(x);
            if (std::fabs(c) < 1e-4) return 1.0 + c * c / 3.0 + c * c * c * c / 5.0;
            return std::atanh(c) / c;
        },
        [](double x, double) {
            const double c = detail::clamp_atanh(x);
            if (std::fabs(c) < 1e-4) return 2.0 * c / 3.0 + 4.0 * c * c * c / 5.0;
            return (c / (1.0 - c * c) - std::atanh(c)) / (c * c);
        });
}

inline Var relu(Var a) {
    return detail::unary_op(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var leaky_relu(Var a, double slope = 0.2) {
    Tape& t = *a.tape;
    Matrix v = a.value();
    for (double& x : v.a) x = x > 0.0 ? x : slope * x;
    Var out = t.record("leaky-relu", std::move(v), detail::any_grad(a), nullptr);
    t.node(out.id).back = [a, out, slope](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const Matrix& x = t.node(a.id).value;
        Matrix da(g.rows, g.cols);
        for (size_t i = 0; i < da.a.size(); ++i)
            da.a[i] = g.a[i] * (x.a[i] > 0.0 ? 1.0 : slope);
        detail::accum(t, a.id, da, t.fault_sign("leaky-relu"));
    };
    return out;
}

inline Var softplus(Var a) {
    return detail::unary_op(
        a, "softplus",
        [](double x) {
            if (x > 0.0) return x + std::log1p(std::exp(-x));
            return std::log1p(std::exp(x));
        },
        [](double x, double) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
}

inline Var sqrt(Var a) {
    return detail::unary_op(
        a, "sqrt", [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / std::max(y, 1e-150); });
}

// ---------------------------------------------------------------------------
// reductions and structure ops
// ---------------------------------------------------------------------------

// n x d -> n x 1 euclidean norms per row
inline Var row_norms(Var a) {
    Tape& t = *a.tape;
    const Matrix& x = a.value();
    Matrix v(x.rows, 1);
    for (int i = 0; i < x.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < x.cols; ++j) s += x(i, j) * x(i, j);
        v(i, 0) = std::sqrt(s);
    }
    Var out = t.record("l2-norm-rows", std::move(v), detail::any_grad(a), nullptr);
    t.node(out.id).back = [a, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const Matrix& y = t.node(out.id).value;
        const Matrix& x = t.node(a.id).value;
        Matrix da(x.rows, x.cols);
        for (int i = 0; i < x.rows; ++i) {
            if (y(i, 0) == 0.0) continue;  // subgradient 0 at the origin
            const double s = g(i, 0) / y(i, 0);
            for (int j = 0; j < x.cols; ++j) da(i, j) = s * x(i, j);
        }
        detail::accum(t, a.id, da, t.fault_sign("l2-norm-rows"));
    };
    return out;
}

inline Var concat_rows(Var a, Var b) {
    Tape& t = detail::same_tape(a, b, "concat-rows");
    if (a.cols() != b.cols())
        throw std::invalid_argument("concat-rows: column mismatch " + shape_str(a.value()) +
                                    " vs " + shape_str(b.value()));
    Matrix v(a.rows() + b.rows(), a.cols());
    std::copy(a.value().a.begin(), a.value().a.end(), v.a.begin());
    std::copy(b.value().a.begin(), b.value().a.end(),
              v.a.begin() + a.value().a.size());
    Var out = t.record("concat-rows", std::move(v), detail::any_grad(a, b), nullptr);
    t.node(out.id).back = [a, b, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const double s = t.fault_sign("concat-rows");
        if (detail::any_grad(a)) {
            Matrix da(a.rows(), a.cols());
            std::copy(g.a.begin(), g.a.begin() + da.a.size(), da.a.begin());
            detail::accum(t, a.id, da, s);
        }
        if (detail::any_grad(b)) {
            Matrix db(b.rows(), b.cols());
            std::copy(g.a.begin() + a.value().a.size(), g.a.end(), db.a.begin());
            detail::accum(t, b.id, db, s);
        }
    };
    return out;
}

// row-wise softmax with max subtraction
inline Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    const Matrix& x = a.value();
    Matrix v(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double mx = -1e300;
        for (int j = 0; j < x.cols; ++j) mx = std::max(mx, x(i, j));
        double z = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            v(i, j) = std::exp(x(i, j) - mx);
            z += v(i, j);
        }
        for (int j = 0; j < x.cols; ++j) v(i, j) /= z;
    }
    Var out = t.record("softmax-rows", std::move(v), detail::any_grad(a), nullptr);
    t.node(out.id).back = [a, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const Matrix& y = t.node(out.id).value;
        Matrix da(g.rows, g.cols);
        for (int i = 0; i < g.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < g.cols; ++j) dot += g(i, j) * y(i, j);
            for (int j = 0; j < g.cols; ++j) da(i, j) = y(i, j) * (g(i, j) - dot);
        }
        detail::accum(t, a.id, da, t.fault_sign("softmax-rows"));
    };
    return out;
}

// full reduction to 1x1
inline Var sum(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double x : a.value().a) s += x;
    Matrix v(1, 1);
    v(0, 0) = s;
    Var out = t.record("sum", std::move(v), detail::any_grad(a), nullptr);
    t.node(out.id).back = [a, out](Tape& t) {
        const double g = t.node(out.id).grad(0, 0) * t.fault_sign("sum");
        TapeNode& n = t.node(a.id);
        if (!n.needs_grad) return;
        for (double& x : n.grad.a) x += g;
    };
    return out;
}

// n x d matrix plus a 1 x d row, broadcast down the rows
inline Var broadcast_row_add(Var a, Var row) {
    Tape& t = detail::same_tape(a, row, "broadcast-row-add");
    if (row.rows() != 1 || row.cols() != a.cols())
        throw std::invalid_argument("broadcast-row-add: need 1x" + std::to_string(a.cols()) +
                                    " row, got " + shape_str(row.value()) + " against " +
                                    shape_str(a.value()));
    Matrix v = a.value();
    for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j) v(i, j) += row.value()(0, j);
    Var out = t.record("broadcast-row-add", std::move(v), detail::any_grad(a, row), nullptr);
    t.node(out.id).back = [a, row, out](Tape& t) {
        const Matrix& g = t.node(out.id).grad;
        const double s = t.fault_sign("broadcast-row-add");
        if (detail::any_grad(a)) detail::accum(t, a.id, g, s);
        if (detail::any_grad(row)) {
            Matrix dr(1, g.cols);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) dr(0, j) += g(i, j);
            detail::accum(t, row.id, dr, s);
        }
    };
    return out;
}

// ---------------------------------------------------------------------------
// convenience builders
// ---------------------------------------------------------------------------

inline Var const_filled(Tape& t, int rows, int cols, double v) {
    return t.constant(Matrix(rows, cols, v));
}

// expand a 1x1 scalar var to rows x cols
inline Var expand_scalar(Var s, int rows, int cols) {
    Tape& t = *s.tape;
    Var col = matmul(const_filled(t, rows, 1, 1.0), s);       // rows x 1
    if (cols == 1) return col;
    return matmul(col, const_filled(t, 1, cols, 1.0));        // rows x cols
}

// expand an m x 1 column to m x cols
inline Var expand_cols(Var col, int cols) {
    if (col.cols() != 1)
        throw std::invalid_argument("expand_cols: need column vector, got " +
                                    shape_str(col.value()));
    if (cols == 1) return col;
    return matmul(col, const_filled(*col.tape, 1, cols, 1.0));
}

// per-row dot products: (m x d, m x d) -> m x 1
inline Var row_dots(Var a, Var b) {
    return matmul(mul(a, b), const_filled(*a.tape, a.cols(), 1, 1.0));
}

}  // namespace htgn::ad
