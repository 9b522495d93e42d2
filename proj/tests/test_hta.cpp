#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "htgn/hta.hpp"
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

// Per-node straight-line oracle of the attention procedure: for node i,
// stack its w historical tangent rows, score s_tau = r . tanh(Q u_tau),
// softmax over tau, mix, exp map. Also keeps the weights.
struct HtaOracle {
    Matrix Q, r;
    double c = 1.0;

    std::vector<std::vector<long double>> alphas;  // per node, length w

    std::vector<VecL> run(const std::vector<Matrix>& bank) {
        const int w = static_cast<int>(bank.size());
        const int n = bank[0].rows;
        const int d = bank[0].cols;
        const int k = Q.rows;
        alphas.assign(n, {});
        std::vector<VecL> out(n);
        for (int i = 0; i < n; ++i) {
            std::vector<VecL> hist(w);
            for (int t = 0; t < w; ++t)
                hist[t] = oracle::logmap0(oracle::row_of(bank[t], i), c);
            std::vector<long double> s(w, 0);
            for (int t = 0; t < w; ++t)
                for (int kk = 0; kk < k; ++kk) {
                    long double qm = 0;
                    for (int j = 0; j < d; ++j) qm += Q(kk, j) * hist[t][j];
                    s[t] += r(kk, 0) * std::tanh(qm);
                }
            const long double mx = *std::max_element(s.begin(), s.end());
            long double z = 0;
            for (long double& v : s) {
                v = std::exp(v - mx);
                z += v;
            }
            VecL mix(d, 0);
            alphas[i].resize(w);
            for (int t = 0; t < w; ++t) {
                alphas[i][t] = s[t] / z;
                for (int j = 0; j < d; ++j) mix[j] += (s[t] / z) * hist[t][j];
            }
            out[i] = oracle::expmap0(mix, c);
        }
        return out;
    }
};

}  // namespace

TEST_CASE("window of one returns the stored state") {
    ad::Tape t;
    auto geo = geo_on(t);
    Rng rng(3);
    Matrix s = random_points(4, 3, 0.7, rng);
    HtaParams hp = HtaParams::init(3, 3, rng);
    HtaVars hv{t.constant(hp.Q), t.constant(hp.r)};
    ad::Var out = hta({t.constant(s)}, hv, geo);
    for (int i = 0; i < 4; ++i)
        CHECK(oracle::max_row_diff(out.value(), i, oracle::row_of(s, i)) < 1e-8);
}

TEST_CASE("identical states collapse to that state") {
    ad::Tape t;
    auto geo = geo_on(t, 1.2);
    Rng rng(5);
    Matrix s = random_points(5, 3, 0.6, rng);
    HtaParams hp = HtaParams::init(3, 3, rng);
    HtaVars hv{t.constant(hp.Q), t.constant(hp.r)};
    std::vector<ad::Var> bank{t.constant(s), t.constant(s), t.constant(s), t.constant(s)};
    ad::Var out = hta(bank, hv, geo);
    for (int i = 0; i < 5; ++i)
        CHECK(oracle::max_row_diff(out.value(), i, oracle::row_of(s, i)) < 1e-8);
}

TEST_CASE("three distinct states match the per-node oracle") {
    ad::Tape t;
    const double c = 0.7;
    auto geo = geo_on(t, c);
    Rng rng(7);
    std::vector<Matrix> bank{random_points(4, 3, 0.6, rng), random_points(4, 3, 0.6, rng),
                             random_points(4, 3, 0.6, rng)};
    HtaOracle orc;
    orc.c = c;
    orc.Q = glorot_uniform(5, 3, rng);  // k = 5 distinct from d' to catch transposes
    orc.r = glorot_uniform(5, 1, rng);
    HtaVars hv{t.constant(orc.Q), t.constant(orc.r)};
    std::vector<ad::Var> bank_vars;
    for (const Matrix& m : bank) bank_vars.push_back(t.constant(m));
    ad::Var out = hta(bank_vars, hv, geo);
    auto expected = orc.run(bank);
    for (int i = 0; i < 4; ++i) {
        INFO("row " << i);
        CHECK(oracle::max_row_diff(out.value(), i, expected[i]) < 1e-10);
    }
    for (const auto& al : orc.alphas) {
        long double sum = 0;
        for (long double v : al) {
            CHECK(v >= 0.0L);
            sum += v;
        }
        CHECK(static_cast<double>(sum) == Catch::Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("zero Q and r give exact uniform attention") {
    ad::Tape t;
    auto geo = geo_on(t);
    Rng rng(9);
    const int w = 4, n = 3, d = 3;
    std::vector<Matrix> bank;
    for (int i = 0; i < w; ++i) bank.push_back(random_points(n, d, 0.6, rng));
    HtaVars hv{t.constant(Matrix(d, d)), t.constant(Matrix(d, 1))};
    std::vector<ad::Var> bank_vars;
    for (const Matrix& m : bank) bank_vars.push_back(t.constant(m));
    ad::Var out = hta(bank_vars, hv, geo);

    // expected: exp map of the plain mean of the historical tangents
    for (int i = 0; i < n; ++i) {
        VecL mean(d, 0);
        for (int tt = 0; tt < w; ++tt) {
            VecL u = oracle::logmap0(oracle::row_of(bank[tt], i), 1.0);
            for (int j = 0; j < d; ++j) mean[j] += u[j] / w;
        }
        CHECK(oracle::max_row_diff(out.value(), i, oracle::expmap0(mean, 1.0)) < 1e-12);
    }
}

TEST_CASE("output rows live in the tangent hull") {
    // reconstruct the output from the oracle's extracted weights
    ad::Tape t;
    auto geo = geo_on(t);
    Rng rng(11);
    std::vector<Matrix> bank{random_points(6, 4, 0.6, rng), random_points(6, 4, 0.6, rng),
                             random_points(6, 4, 0.6, rng)};
    HtaOracle orc;
    orc.Q = glorot_uniform(4, 4, rng);
    orc.r = glorot_uniform(4, 1, rng);
    HtaVars hv{t.constant(orc.Q), t.constant(orc.r)};
    std::vector<ad::Var> bank_vars;
    for (const Matrix& m : bank) bank_vars.push_back(t.constant(m));
    Matrix out = hta(bank_vars, hv, geo).value();
    orc.run(bank);
    for (int i = 0; i < 6; ++i) {
        VecL mix(4, 0);
        for (int tt = 0; tt < 3; ++tt) {
            VecL u = oracle::logmap0(oracle::row_of(bank[tt], i), 1.0);
            for (int j = 0; j < 4; ++j) mix[j] += orc.alphas[i][tt] * u[j];
        }
        CHECK(oracle::max_row_diff(out, i, oracle::expmap0(mix, 1.0)) < 1e-10);
    }
}

TEST_CASE("inconsistent bank shapes are rejected") {
    ad::Tape t;
    auto geo = geo_on(t);
    HtaVars hv{t.constant(Matrix(3, 3)), t.constant(Matrix(3, 1))};
    std::vector<ad::Var> bank{t.constant(Matrix(4, 3)), t.constant(Matrix(5, 3))};
    CHECK_THROWS_AS(hta(bank, hv, geo), std::logic_error);
    CHECK_THROWS_AS(hta({}, hv, geo), std::invalid_argument);
}

TEST_CASE("softmax-over-nodes variant differs from the per-node default") {
    ad::Tape t;
    auto geo = geo_on(t);
    Rng rng(15);
    const int n = 4, d = 3, w = 3;
    std::vector<Matrix> bank;
    for (int i = 0; i < w; ++i) bank.push_back(random_points(n, d, 0.6, rng));
    HtaParams hp = HtaParams::init(d, d, rng);
    HtaVars hv{t.constant(hp.Q), t.constant(hp.r)};
    std::vector<ad::Var> bank_vars;
    for (const Matrix& m : bank) bank_vars.push_back(t.constant(m));
    Matrix a = hta(bank_vars, hv, geo, false).value();
    Matrix b = hta(bank_vars, hv, geo, true).value();
    double diff = 0;
    for (size_t i = 0; i < a.a.size(); ++i) diff = std::max(diff, std::fabs(a.a[i] - b.a[i]));
    CHECK(diff > 1e-6);
}

TEST_CASE("state memory bank ring behavior") {
    StateMemoryBank bank(3);
    Matrix h0(2, 2);
    bank.fill_with(h0);
    CHECK(bank.size() == 3);
    Matrix s1(2, 2, 1.0), s2(2, 2, 2.0);
    bank.push(s1);
    bank.push(s2);
    CHECK(bank.size() == 3);
    CHECK(bank.states.front().max_abs() == 0.0);  // one h0 copy left
    CHECK(bank.latest()(0, 0) == 2.0);
}
