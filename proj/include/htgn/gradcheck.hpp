#pragma once

#include <functional>
#include <string>
#include <vector>

#include "htgn/data.hpp"
#include "htgn/hgnn.hpp"
#include "htgn/hgru.hpp"
#include "htgn/hta.hpp"
#include "htgn/loss.hpp"
#include "htgn/manifold_ops.hpp"
#include "htgn/model.hpp"
#include "htgn/rng.hpp"
#include "htgn/tape.hpp"
#include "htgn/trainer.hpp"

namespace htgn {

struct GradCheckEntry {
    std::string param;
    double max_rel = 0.0;
    double max_abs = 0.0;
};

struct GradCheckReport {
    std::string name;
    std::vector<GradCheckEntry> entries;

    double worst_rel() const {
        double w = 0.0;
        for (const auto& e : entries) w = std::max(w, e.max_rel);
        return w;
    }
    double worst_abs() const {
        double w = 0.0;
        for (const auto& e : entries) w = std::max(w, e.max_abs);
        return w;
    }
    bool pass(double tol) const { return worst_rel() < tol; }
};

// Compares tape gradients of a scalar-valued builder against central finite
// differences over every entry of every parameter. The builder receives
// leaves bound to the parameter matrices in the order given.
//
// Relative error per entry: |g_tape - g_fd| / max(|g_tape|, |g_fd|, floor).
template <class BuildFn>
GradCheckReport grad_check(const std::string& name,
                           const std::vector<std::pair<std::string, Matrix*>>& params,
                           BuildFn build, double step = 1e-6,
                           double denom_floor = 1e-6) {
    GradCheckReport report;
    report.name = name;

    auto eval_loss = [&](bool with_grad, std::vector<Matrix>* grads_out) {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        leaves.reserve(params.size());
        for (auto& [pname, m] : params) leaves.push_back(tape.leaf(*m, with_grad));
        ad::Var loss = build(tape, leaves);
        const double v = loss.scalar();
        if (with_grad) {
            tape.backward(loss);
            grads_out->clear();
            for (const ad::Var& l : leaves) grads_out->push_back(l.grad());
        }
        return v;
    };

    std::vector<Matrix> tape_grads;
    eval_loss(true, &tape_grads);

    for (size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k].second;
        GradCheckEntry entry;
        entry.param = params[k].first;
        for (size_t i = 0; i < p.a.size(); ++i) {
            const double saved = p.a[i];
            p.a[i] = saved + step;
            const double up = eval_loss(false, nullptr);
            p.a[i] = saved - step;
            const double down = eval_loss(false, nullptr);
            p.a[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double tg = tape_grads[k].a[i];
            const double abs_err = std::fabs(tg - fd);
            const double rel =
                abs_err / std::max({std::fabs(tg), std::fabs(fd), denom_floor});
            entry.max_abs = std::max(entry.max_abs, abs_err);
            entry.max_rel = std::max(entry.max_rel, rel);
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

// ---------------------------------------------------------------------------
// per-component check suites over seeded toy instances
// ---------------------------------------------------------------------------

struct NamedCheck {
    std::string name;
    std::string component;
    std::function<GradCheckReport()> run;
};

namespace gc_detail {

// random points strictly inside the unit-curvature ball, norm <= max_norm
inline Matrix random_points(int n, int d, double max_norm, Rng& rng) {
    Matrix m(n, d);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            m(i, j) = rng.uniform(-1.0, 1.0);
            s += m(i, j) * m(i, j);
        }
        const double target = rng.uniform(0.05, max_norm);
        const double scale = target / std::sqrt(s);
        for (int j = 0; j < d; ++j) m(i, j) *= scale;
    }
    return m;
}

// weighted sum reduction so index errors cannot cancel
inline ad::Var weighted_sum(ad::Var x, Rng& rng) {
    Matrix w(x.rows(), x.cols());
    for (double& v : w.a) v = rng.uniform(0.5, 1.5);
    return ad::sum(ad::mul(x, x.tape->constant(w)));
}

inline ad::Var sqrt_c_of(ad::Var raw) { return ad::sqrt(ad::softplus(raw)); }

inline SnapshotGraph toy_graph(int n, Rng& rng) {
    SnapshotGraph g;
    g.n = n;
    for (int i = 1; i < n; ++i) g.edges.push_back(make_edge(rng.uniform_int(0, i - 1), i));
    g.edges.push_back(make_edge(0, n - 1));
    g.finalize();
    return g;
}

}  // namespace gc_detail

// The full battery; `component` filters by module name ("manifold", "hgnn",
// "hta", "hgru", "loss", "model"), empty string keeps everything.
inline std::vector<NamedCheck> build_grad_checks(const std::string& component,
                                                 uint64_t seed) {
    std::vector<NamedCheck> checks;
    auto want = [&](const std::string& c) { return component.empty() || component == c; };

    const int n = 5, d = 4;

    if (want("manifold")) {
        checks.push_back({"mobius_add", "manifold", [seed] {
            Rng rng(mix_seed(seed, "gc-mobius"));
            auto u = gc_detail::random_points(n, d, 0.7, rng);
            auto v = gc_detail::random_points(n, d, 0.7, rng);
            Matrix raw(1, 1, 0.3);
            std::vector<std::pair<std::string, Matrix*>> ps{
                {"u", &u}, {"v", &v}, {"curvature_raw", &raw}};
            return grad_check("mobius_add", ps, [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                ad::Var sc = gc_detail::sqrt_c_of(l[2]);
                ad::Var c = ad::mul(sc, sc);
                Rng wrng(mix_seed(seed, "gc-mobius-w"));
                return gc_detail::weighted_sum(mops::mobius_add_rows(l[0], l[1], c), wrng);
            });
        }});
        checks.push_back({"expmap", "manifold", [seed] {
            Rng rng(mix_seed(seed, "gc-exp"));
            Matrix a = random_uniform(n, d, -1.0, 1.0, rng);
            Matrix raw(1, 1, 0.2);
            std::vector<std::pair<std::string, Matrix*>> ps{{"a", &a}, {"curvature_raw", &raw}};
            return grad_check("expmap", ps, [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                Rng wrng(mix_seed(seed, "gc-exp-w"));
                return gc_detail::weighted_sum(mops::expmap_rows(l[0], gc_detail::sqrt_c_of(l[1])), wrng);
            });
        }});
        checks.push_back({"logmap", "manifold", [seed] {
            Rng rng(mix_seed(seed, "gc-log"));
            Matrix b = gc_detail::random_points(n, d, 0.8, rng);
            Matrix raw(1, 1, 0.4);
            std::vector<std::pair<std::string, Matrix*>> ps{{"b", &b}, {"curvature_raw", &raw}};
            return grad_check("logmap", ps, [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                Rng wrng(mix_seed(seed, "gc-log-w"));
                return gc_detail::weighted_sum(mops::logmap_rows(l[0], gc_detail::sqrt_c_of(l[1])), wrng);
            });
        }});
        checks.push_back({"dist", "manifold", [seed] {
            Rng rng(mix_seed(seed, "gc-dist"));
            auto u = gc_detail::random_points(n, d, 0.6, rng);
            auto v = gc_detail::random_points(n, d, 0.6, rng);
            Matrix raw(1, 1, 0.5);
            std::vector<std::pair<std::string, Matrix*>> ps{
                {"u", &u}, {"v", &v}, {"curvature_raw", &raw}};
            return grad_check("dist", ps, [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                Rng wrng(mix_seed(seed, "gc-dist-w"));
                return gc_detail::weighted_sum(
                    mops::dist_rows(l[0], l[1], gc_detail::sqrt_c_of(l[2])), wrng);
            });
        }});
        checks.push_back({"dist_expmap_chain", "manifold", [seed] {
            Rng rng(mix_seed(seed, "gc-chain"));
            Matrix a = random_uniform(2, d, -0.8, 0.8, rng);
            Matrix b = random_uniform(2, d, -0.8, 0.8, rng);
            Matrix raw(1, 1, 0.55);
            std::vector<std::pair<std::string, Matrix*>> ps{
                {"a", &a}, {"b", &b}, {"curvature_raw", &raw}};
            return grad_check("dist_expmap_chain", ps,
                              [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                ad::Var sc = gc_detail::sqrt_c_of(l[2]);
                return ad::sum(mops::dist_rows(mops::expmap_rows(l[0], sc),
                                               mops::expmap_rows(l[1], sc), sc));
            });
        }});
    }

    if (want("hgnn")) {
        auto make = [seed](const std::string& name, Aggregation agg, bool full_layer) {
            return [seed, name, agg, full_layer] {
                Rng rng(mix_seed(seed, "gc-" + name));
                SnapshotGraph g = gc_detail::toy_graph(n, rng);
                Matrix x = gc_detail::random_points(n, d, 0.6, rng);
                HgnnParams hp = HgnnParams::init(d, d, rng);
                Matrix raw(1, 1, 0.5413248546129181);
                std::vector<std::pair<std::string, Matrix*>> ps{{"x", &x},
                                                                {"W", &hp.W},
                                                                {"b", &hp.b},
                                                                {"a", &hp.a},
                                                                {"curvature_raw", &raw}};
                return grad_check(name, ps, [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                    mops::Geometry geo;
                    geo.hyperbolic = true;
                    geo.sqrt_c = gc_detail::sqrt_c_of(l[4]);
                    HgnnVars hv{l[1], l[2], l[3]};
                    ad::Var out = full_layer
                                      ? hgnn_layer(l[0], g, hv, agg, geo)
                                      : aggregate(hyp_linear(l[0], hv.W, hv.b, geo), g,
                                                  hv.a, agg, geo);
                    Rng wrng(mix_seed(seed, "gc-" + name + "-w"));
                    return gc_detail::weighted_sum(out, wrng);
                });
            };
        };
        checks.push_back({"hyp_linear_aggregate_attention", "hgnn",
                          make("hyp_linear_aggregate_attention", Aggregation::attention, false)});
        checks.push_back({"hgnn_layer_laplacian", "hgnn",
                          make("hgnn_layer_laplacian", Aggregation::laplacian, true)});
    }

    if (want("hta")) {
        checks.push_back({"hta", "hta", [seed] {
            Rng rng(mix_seed(seed, "gc-hta"));
            const int w = 3;
            std::vector<Matrix> bank;
            for (int i = 0; i < w; ++i) bank.push_back(gc_detail::random_points(n, d, 0.6, rng));
            HtaParams hp = HtaParams::init(d, d, rng);
            Matrix raw(1, 1, 0.5413248546129181);
            std::vector<std::pair<std::string, Matrix*>> ps;
            for (int i = 0; i < w; ++i)
                ps.emplace_back("state" + std::to_string(i), &bank[i]);
            ps.emplace_back("Q", &hp.Q);
            ps.emplace_back("r", &hp.r);
            ps.emplace_back("curvature_raw", &raw);
            return grad_check("hta", ps, [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                mops::Geometry geo;
                geo.hyperbolic = true;
                geo.sqrt_c = gc_detail::sqrt_c_of(l[w + 2]);
                HtaVars hv{l[w], l[w + 1]};
                std::vector<ad::Var> bank_vars(l.begin(), l.begin() + w);
                Rng wrng(mix_seed(seed, "gc-hta-w"));
                return gc_detail::weighted_sum(hta(bank_vars, hv, geo), wrng);
            });
        }});
    }

    if (want("hgru")) {
        checks.push_back({"hgru_step", "hgru", [seed] {
            Rng rng(mix_seed(seed, "gc-hgru"));
            Matrix x = gc_detail::random_points(n, d, 0.6, rng);
            Matrix h = gc_detail::random_points(n, d, 0.6, rng);
            HgruParams hp = HgruParams::init(d, rng);
            Matrix raw(1, 1, 0.5413248546129181);
            std::vector<std::pair<std::string, Matrix*>> ps{
                {"x", &x},          {"h", &h},          {"Wz", &hp.Wz}, {"Wr", &hp.Wr},
                {"Wh", &hp.Wh},     {"Uz", &hp.Uz},     {"Ur", &hp.Ur}, {"Uh", &hp.Uh},
                {"curvature_raw", &raw}};
            return grad_check("hgru_step", ps, [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                mops::Geometry geo;
                geo.hyperbolic = true;
                geo.sqrt_c = gc_detail::sqrt_c_of(l[8]);
                HgruVars hv{l[2], l[3], l[4], l[5], l[6], l[7]};
                Rng wrng(mix_seed(seed, "gc-hgru-w"));
                return gc_detail::weighted_sum(hgru_step(l[0], l[1], hv, geo), wrng);
            });
        }});
    }

    if (want("loss")) {
        checks.push_back({"fermi_dirac_prob", "loss", [seed] {
            Rng rng(mix_seed(seed, "gc-fd"));
            auto u = gc_detail::random_points(4, d, 0.6, rng);
            auto v = gc_detail::random_points(4, d, 0.6, rng);
            Matrix raw(1, 1, 0.5413248546129181);
            std::vector<std::pair<std::string, Matrix*>> ps{
                {"u", &u}, {"v", &v}, {"curvature_raw", &raw}};
            return grad_check("fermi_dirac_prob", ps,
                              [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                mops::Geometry geo;
                geo.hyperbolic = true;
                geo.sqrt_c = gc_detail::sqrt_c_of(l[2]);
                Rng wrng(mix_seed(seed, "gc-fd-w"));
                return gc_detail::weighted_sum(
                    fermi_dirac_prob_rows(l[0], l[1], geo, FermiDiracParams{}), wrng);
            });
        }});
        checks.push_back({"homophily_and_htc_loss", "loss", [seed] {
            Rng rng(mix_seed(seed, "gc-losses"));
            const int m = 6;
            auto h_t = gc_detail::random_points(m, d, 0.6, rng);
            auto h_prev = gc_detail::random_points(m, d, 0.6, rng);
            EdgeSampleBatch batch;
            batch.positives = {{0, 1}, {1, 2}, {3, 4}, {0, 5}};
            batch.negatives = {{0, 2}, {2, 5}, {1, 4}, {3, 5}};
            Matrix raw(1, 1, 0.5413248546129181);
            std::vector<std::pair<std::string, Matrix*>> ps{
                {"h_t", &h_t}, {"h_prev", &h_prev}, {"curvature_raw", &raw}};
            return grad_check("homophily_and_htc_loss", ps,
                              [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                mops::Geometry geo;
                geo.hyperbolic = true;
                geo.sqrt_c = gc_detail::sqrt_c_of(l[2]);
                return total_loss(l[0], l[1], batch, 0.7, geo, FermiDiracParams{});
            });
        }});
    }

    if (want("model")) {
        checks.push_back({"full_model_step", "model", [seed] {
            Rng rng(mix_seed(seed, "gc-model"));
            SnapshotSequence seq;
            seq.n = 5;
            seq.snapshots.assign(3, SnapshotGraph{});
            for (auto& g : seq.snapshots) g.n = 5;
            seq.snapshots[0].edges = {{0, 1}, {1, 2}};
            seq.snapshots[1].edges = {{0, 1}, {2, 3}, {3, 4}};
            seq.snapshots[2].edges = {{1, 2}, {0, 4}};
            for (auto& g : seq.snapshots) g.finalize();

            ModelMeta meta;
            meta.dim = 4;
            meta.window = 2;
            meta.features = FeatureSpec::parse("glorot:3");
            ModelParams params = init_model(seq, meta, seed);
            EdgeSampleBatch batch;
            batch.positives = seq.snapshots[1].edges;
            batch.negatives = {{0, 2}, {1, 4}, {2, 4}};
            Matrix h_prev = gc_detail::random_points(5, 4, 0.4, rng);
            std::vector<Matrix> bank{gc_detail::random_points(5, 4, 0.4, rng), h_prev};

            auto reg = params.registry();
            return grad_check("full_model_step", reg,
                              [&](ad::Tape& t, const std::vector<ad::Var>& l) {
                ModelVars mv;
                // rebind by registry order (mirrors bind_model)
                size_t k = 0;
                for (size_t layer = 0; layer < params.hgnn.size(); ++layer) {
                    HgnnVars hv{l[k], l[k + 1], l[k + 2]};
                    k += 3;
                    mv.hgnn.push_back(hv);
                }
                mv.hta = {l[k], l[k + 1]};
                k += 2;
                mv.hgru = {l[k], l[k + 1], l[k + 2], l[k + 3], l[k + 4], l[k + 5]};
                k += 6;
                mv.curvature_raw = l[k++];
                mv.features = l[k++];
                mv.geo.hyperbolic = true;
                mv.geo.sqrt_c = ad::sqrt(ad::softplus(mv.curvature_raw));
                std::vector<ad::Var> bank_vars;
                for (const Matrix& s : bank) bank_vars.push_back(t.constant(s));
                ad::Var h_t = forward_step(mv, seq.snapshots[1], bank_vars, meta);
                return total_loss(h_t, t.constant(h_prev), batch, 0.5, mv.geo,
                                  FermiDiracParams{});
            });
        }});
    }

    return checks;
}

}  // namespace htgn
