#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "htgn/hgru.hpp"
#include "oracles.hpp"

using namespace htgn;
using oracle::VecL;

namespace {

mops::Geometry geo_on(ad::Tape& t, double c = 1.0) {
    mops::Geometry g;
    g.hyperbolic = true;
    g.sqrt_c = t.constant(Matrix(1, 1, std::sqrt(c)));
    return g;
}

Matrix random_points(int n, int d, double max_norm, Rng& rng) {
    Matrix m(n, d);
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int j = 0; j < d; ++j) {
            m(i, j) = rng.uniform(-1, 1);
            s += m(i, j) * m(i, j);
        }
        const double scale = rng.uniform(0.05, max_norm) / std::sqrt(s);
        for (int j = 0; j < d; ++j) m(i, j) *= scale;
    }
    return m;
}

// Straight-line evaluation of the gate equations, exposing internals.
struct GruOracle {
    HgruParams p;
    double c = 1.0;

    std::vector<VecL> gate_p, gate_r, cand, out_tangent;

    static long double sig(long double x) { return 1 / (1 + std::exp(-x)); }

    std::vector<VecL> run(const Matrix& x_pts, const Matrix& h_pts) {
        const int n = x_pts.rows, d = x_pts.cols;
        gate_p.assign(n, VecL(d));
        gate_r.assign(n, VecL(d));
        cand.assign(n, VecL(d));
        out_tangent.assign(n, VecL(d));
        std::vector<VecL> out(n);
        auto matvec = [&](const Matrix& w, const VecL& v) {
            VecL r(w.rows, 0);
            for (int i = 0; i < w.rows; ++i)
                for (int j = 0; j < w.cols; ++j) r[i] += w(i, j) * v[j];
            return r;
        };
        for (int i = 0; i < n; ++i) {
            VecL x = oracle::logmap0(oracle::row_of(x_pts, i), c);
            VecL h = oracle::logmap0(oracle::row_of(h_pts, i), c);
            VecL wzx = matvec(p.Wz, x), uzh = matvec(p.Uz, h);
            VecL wrx = matvec(p.Wr, x), urh = matvec(p.Ur, h);
            for (int j = 0; j < d; ++j) {
                gate_p[i][j] = sig(wzx[j] + uzh[j]);
                gate_r[i][j] = sig(wrx[j] + urh[j]);
            }
            VecL rh(d);
            for (int j = 0; j < d; ++j) rh[j] = gate_r[i][j] * h[j];
            VecL whx = matvec(p.Wh, x), uhrh = matvec(p.Uh, rh);
            for (int j = 0; j < d; ++j) {
                cand[i][j] = std::tanh(whx[j] + uhrh[j]);
                out_tangent[i][j] =
                    (1 - gate_p[i][j]) * cand[i][j] + gate_p[i][j] * h[j];
            }
            out[i] = oracle::expmap0(out_tangent[i], c);
        }
        return out;
    }
};

}  // namespace

TEST_CASE("all-zero parameters give the closed form exp(logmap(h)/2)") {
    ad::Tape t;
    auto geo = geo_on(t);
    Rng rng(3);
    Matrix h = random_points(4, 3, 0.7, rng);
    HgruParams zp;
    zp.Wz = zp.Wr = zp.Wh = zp.Uz = zp.Ur = zp.Uh = Matrix(3, 3);
    HgruVars hv{t.constant(zp.Wz), t.constant(zp.Wr), t.constant(zp.Wh),
                t.constant(zp.Uz), t.constant(zp.Ur), t.constant(zp.Uh)};
    Matrix x = random_points(4, 3, 0.5, rng);
    Matrix out = hgru_step(t.constant(x), t.constant(h), hv, geo).value();
    // P = R = 1/2, cand = 0 -> out = exp(0.5 * log(h))
    for (int i = 0; i < 4; ++i) {
        VecL lh = oracle::logmap0(oracle::row_of(h, i), 1.0);
        for (long double& v : lh) v *= 0.5;
        CHECK(oracle::max_row_diff(out, i, oracle::expmap0(lh, 1.0)) < 1e-12);
    }
}

TEST_CASE("origin in, origin out") {
    ad::Tape t;
    auto geo = geo_on(t);
    Rng rng(5);
    HgruParams p = HgruParams::init(3, rng);
    HgruVars hv{t.constant(p.Wz), t.constant(p.Wr), t.constant(p.Wh),
                t.constant(p.Uz), t.constant(p.Ur), t.constant(p.Uh)};
    Matrix out = hgru_step(t.constant(Matrix(3, 3)), t.constant(Matrix(3, 3)), hv, geo).value();
    CHECK(out.max_abs() < 1e-12);
}

TEST_CASE("random parameters match the straight-line gate oracle") {
    ad::Tape t;
    const double c = 1.4;
    auto geo = geo_on(t, c);
    Rng rng(7);
    GruOracle orc;
    orc.c = c;
    orc.p = HgruParams::init(3, rng);
    Matrix x = random_points(3, 3, 0.6, rng);
    Matrix h = random_points(3, 3, 0.6, rng);
    HgruVars hv{t.constant(orc.p.Wz), t.constant(orc.p.Wr), t.constant(orc.p.Wh),
                t.constant(orc.p.Uz), t.constant(orc.p.Ur), t.constant(orc.p.Uh)};
    Matrix out = hgru_step(t.constant(x), t.constant(h), hv, geo).value();
    auto expected = orc.run(x, h);
    for (int i = 0; i < 3; ++i) {
        INFO("row " << i);
        CHECK(oracle::max_row_diff(out, i, expected[i]) < 1e-10);
    }

    // gate ranges and per-coordinate convexity of the tangent output
    for (int i = 0; i < 3; ++i) {
        VecL h_tan = oracle::logmap0(oracle::row_of(h, i), c);
        for (int j = 0; j < 3; ++j) {
            CHECK(orc.gate_p[i][j] > 0.0L);
            CHECK(orc.gate_p[i][j] < 1.0L);
            CHECK(orc.gate_r[i][j] > 0.0L);
            CHECK(orc.gate_r[i][j] < 1.0L);
            const long double lo = std::min(orc.cand[i][j], h_tan[j]);
            const long double hi = std::max(orc.cand[i][j], h_tan[j]);
            CHECK(orc.out_tangent[i][j] >= lo - 1e-18L);
            CHECK(orc.out_tangent[i][j] <= hi + 1e-18L);
        }
    }
}

TEST_CASE("shape mismatch is rejected") {
    ad::Tape t;
    auto geo = geo_on(t);
    Rng rng(9);
    HgruParams p = HgruParams::init(3, rng);
    HgruVars hv{t.constant(p.Wz), t.constant(p.Wr), t.constant(p.Wh),
                t.constant(p.Uz), t.constant(p.Ur), t.constant(p.Uh)};
    CHECK_THROWS_AS(hgru_step(t.constant(Matrix(3, 3)), t.constant(Matrix(4, 3)), hv, geo),
                    std::invalid_argument);
}

TEST_CASE("output stays inside the ball even for saturated gates") {
    ad::Tape t;
    auto geo = geo_on(t);
    Rng rng(11);
    Matrix big = random_uniform(3, 3, -12.0, 12.0, rng);
    HgruVars hv{t.constant(big), t.constant(big), t.constant(big),
                t.constant(big), t.constant(big), t.constant(big)};
    Matrix x = random_points(3, 3, 0.95, rng);
    Matrix h = random_points(3, 3, 0.95, rng);
    Matrix out = hgru_step(t.constant(x), t.constant(h), hv, geo).value();
    for (int i = 0; i < 3; ++i) {
        double s = 0;
        for (int j = 0; j < 3; ++j) s += out(i, j) * out(i, j);
        CHECK(s < 1.0);
    }
}
