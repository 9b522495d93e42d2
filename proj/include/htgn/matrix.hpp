#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace htgn {

// Dense row-major matrix of doubles. Everything in this project is small
// enough (a few hundred rows) that a plain vector-backed type beats pulling
// in a linear-algebra dependency.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
    }
    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows = static_cast<int>(init.size());
        cols = rows > 0 ? static_cast<int>(init.begin()->size()) : 0;
        a.reserve(static_cast<size_t>(rows) * cols);
        for (const auto& row : init) {
            if (static_cast<int>(row.size()) != cols)
                throw std::invalid_argument("Matrix: ragged initializer");
            a.insert(a.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix filled(int r, int c, double v) { return Matrix(r, c, v); }
    static Matrix row_vector(const std::vector<double>& v) {
        Matrix m(1, static_cast<int>(v.size()));
        m.a = v;
        return m;
    }
    static Matrix col_vector(const std::vector<double>& v) {
        Matrix m(static_cast<int>(v.size()), 1);
        m.a = v;
        return m;
    }

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return a.size(); }
    bool empty() const { return a.empty(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }
    void zero() { fill(0.0); }

    bool all_finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }
    double max_abs() const {
        double m = 0.0;
        for (double v : a) m = std::max(m, std::fabs(v));
        return m;
    }
};

inline std::string shape_str(const Matrix& m) {
    return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

inline void check_same_shape(const Matrix& x, const Matrix& y, const char* what) {
    if (!x.same_shape(y))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(x) +
                                    " vs " + shape_str(y));
}

// C = A * B
inline Matrix matprod(const Matrix& x, const Matrix& y) {
    if (x.cols != y.rows)
        throw std::invalid_argument("matprod: inner dimension mismatch " + shape_str(x) +
                                    " vs " + shape_str(y));
    Matrix out(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = &x.a[static_cast<size_t>(i) * x.cols];
        double* oi = &out.a[static_cast<size_t>(i) * out.cols];
        for (int k = 0; k < x.cols; ++k) {
            const double v = xi[k];
            if (v == 0.0) continue;
            const double* yk = &y.a[static_cast<size_t>(k) * y.cols];
            for (int j = 0; j < y.cols; ++j) oi[j] += v * yk[j];
        }
    }
    return out;
}

inline Matrix transposed(const Matrix& x) {
    Matrix out(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) out(j, i) = x(i, j);
    return out;
}

inline void axpy(Matrix& dst, const Matrix& src, double scale = 1.0) {
    check_same_shape(dst, src, "axpy");
    for (size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += scale * src.a[i];
}

}  // namespace htgn
