#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "htgn/data.hpp"
#include "htgn/hgnn.hpp"
#include "htgn/hgru.hpp"
#include "htgn/hta.hpp"
#include "htgn/loss.hpp"
#include "htgn/metrics.hpp"
#include "htgn/model.hpp"

namespace htgn {

struct TrainConfig {
    int dim = 16;
    int window = 5;
    double lambda = 0.5;
    double lr = 1e-2;
    int max_epochs = 500;
    int patience = 50;
    uint64_t seed = 1;
    int test_k = 3;
    Ablation ablation = Ablation::none;
    Aggregation agg = Aggregation::attention;
    BpttMode bptt = BpttMode::truncated;
    FermiDiracParams fd;
    FeatureSpec features;
    int hgnn_layers = 1;
    int hta_hidden = 0;
    bool hta_softmax_over_nodes = false;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double weight_decay = 0.0;

    void validate(int T) const {
        if (dim < 2) throw std::invalid_argument("config: dim must be >= 2");
        if (window < 1) throw std::invalid_argument("config: window must be >= 1");
        if (patience < 1) throw std::invalid_argument("config: patience must be >= 1");
        if (lambda < 0.0 || lambda > 1.0)
            throw std::invalid_argument("config: lambda must be in [0,1]");
        if (test_k < 1 || test_k >= T)
            throw std::invalid_argument("config: need 1 <= test-k < T, got test-k=" +
                                        std::to_string(test_k) + " T=" + std::to_string(T));
        if (T - test_k < 2)
            throw std::invalid_argument("config: need at least 2 training snapshots");
    }

    ModelMeta meta() const {
        ModelMeta m;
        m.dim = dim;
        m.window = window;
        m.hgnn_layers = hgnn_layers;
        m.hta_hidden = hta_hidden;
        m.lambda = lambda;
        m.agg = agg;
        m.ablation = ablation;
        m.fd = fd;
        m.features = features;
        m.hta_softmax_over_nodes = hta_softmax_over_nodes;
        return m;
    }
};

struct TrainAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

class Adam {
public:
    Adam(double lr, double b1, double b2, double wd)
        : lr_(lr), b1_(b1), b2_(b2), wd_(wd) {}

    void init(const std::vector<std::pair<std::string, Matrix*>>& registry) {
        m_.clear();
        v_.clear();
        for (auto& [name, p] : registry) {
            m_.emplace_back(p->rows, p->cols);
            v_.emplace_back(p->rows, p->cols);
        }
        t_ = 0;
    }

    void step(const std::vector<std::pair<std::string, Matrix*>>& registry,
              const std::vector<const Matrix*>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (size_t k = 0; k < registry.size(); ++k) {
            Matrix& p = *registry[k].second;
            const Matrix& g = *grads[k];
            for (size_t i = 0; i < p.a.size(); ++i) {
                const double gi = g.a[i] + wd_ * p.a[i];
                m_[k].a[i] = b1_ * m_[k].a[i] + (1.0 - b1_) * gi;
                v_[k].a[i] = b2_ * v_[k].a[i] + (1.0 - b2_) * gi * gi;
                p.a[i] -= lr_ * (m_[k].a[i] / bc1) / (std::sqrt(v_[k].a[i] / bc2) + 1e-8);
            }
        }
    }

private:
    double lr_, b1_, b2_, wd_;
    int t_ = 0;
    std::vector<Matrix> m_, v_;
};

// ---------------------------------------------------------------------------
// model forward on a tape
// ---------------------------------------------------------------------------

struct ModelVars {
    std::vector<HgnnVars> hgnn;
    HtaVars hta;
    HgruVars hgru;
    ad::Var curvature_raw;
    ad::Var features;
    mops::Geometry geo;
    std::vector<ad::Var> leaves;  // registry order, for reading gradients
};

inline ModelVars bind_model(ad::Tape& tape, ModelParams& params, const ModelMeta& meta,
                            bool needs_grad) {
    ModelVars mv;
    auto reg = params.registry();
    std::map<std::string, ad::Var> by_name;
    for (auto& [name, m] : reg) {
        ad::Var v = tape.leaf(*m, needs_grad);
        mv.leaves.push_back(v);
        by_name[name] = v;
    }
    for (size_t l = 0; l < params.hgnn.size(); ++l) {
        const std::string p = "hgnn" + std::to_string(l) + ".";
        mv.hgnn.push_back({by_name[p + "W"], by_name[p + "b"], by_name[p + "a"]});
    }
    mv.hta = {by_name["hta.Q"], by_name["hta.r"]};
    mv.hgru = {by_name["hgru.Wz"], by_name["hgru.Wr"], by_name["hgru.Wh"],
               by_name["hgru.Uz"], by_name["hgru.Ur"], by_name["hgru.Uh"]};
    mv.curvature_raw = by_name["curvature_raw"];
    mv.features = params.features_trainable ? by_name["features"]
                                            : tape.constant(params.features);
    mv.geo.hyperbolic = meta.ablation != Ablation::euclidean;
    if (mv.geo.hyperbolic)
        mv.geo.sqrt_c = ad::sqrt(ad::softplus(mv.curvature_raw));
    return mv;
}

struct StepTimer {
    struct Acc {
        double seconds = 0.0;
        long calls = 0;
    };
    std::map<std::string, Acc> components;

    void add(const std::string& name, double sec) {
        auto& a = components[name];
        a.seconds += sec;
        ++a.calls;
    }
    double per_step(const std::string& name) const {
        auto it = components.find(name);
        if (it == components.end() || it->second.calls == 0) return 0.0;
        return it->second.seconds / it->second.calls;
    }
};

namespace detail {

inline double now_sec() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace detail

// One Algorithm-2 step: features -> exp map -> HGNN -> HTA(bank) -> HGRU.
// `bank_vars` holds the w historical states oldest-first (constants under
// truncated BPTT, live vars under full BPTT).
inline ad::Var forward_step(const ModelVars& mv, const SnapshotGraph& g,
                            const std::vector<ad::Var>& bank_vars, const ModelMeta& meta,
                            StepTimer* timer = nullptr) {
    double t0 = detail::now_sec();
    ad::Var x = mv.geo.to_manifold(mv.features);
    for (size_t l = 0; l < mv.hgnn.size(); ++l)
        x = hgnn_layer(x, g, mv.hgnn[l], meta.agg, mv.geo);
    if (timer) timer->add("hgnn", detail::now_sec() - t0);

    t0 = detail::now_sec();
    ad::Var h_att = (meta.ablation == Ablation::no_hta)
                        ? bank_vars.back()
                        : hta(bank_vars, mv.hta, mv.geo, meta.hta_softmax_over_nodes);
    if (timer) timer->add("hta", detail::now_sec() - t0);

    return hgru_step(x, h_att, mv.hgru, mv.geo);
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

// Rolls the model through the whole sequence with fixed parameters.
// states_before[t] is the hidden state available before consuming snapshot t
// (for t = 0 it is the initial origin state), i.e. what a deployment would
// use to predict snapshot t.
inline std::vector<Matrix> roll_states(ModelParams& params, const ModelMeta& meta,
                                       const SnapshotSequence& seq) {
    const int n = seq.n;
    Matrix h0(n, meta.dim);
    StateMemoryBank bank(meta.window);
    bank.fill_with(h0);
    std::vector<Matrix> before;
    Matrix latest = h0;
    for (int t = 0; t < seq.T(); ++t) {
        before.push_back(latest);
        ad::Tape tape;
        ModelVars mv = bind_model(tape, params, meta, /*needs_grad=*/false);
        std::vector<ad::Var> bank_vars;
        for (const Matrix& s : bank.states) bank_vars.push_back(tape.constant(s));
        ad::Var h = forward_step(mv, seq.snapshots[t], bank_vars, meta);
        latest = h.value();
        bank.push(latest);
    }
    return before;
}

struct TaskScores {
    double auc = std::numeric_limits<double>::quiet_NaN();
    double ap = std::numeric_limits<double>::quiet_NaN();
    int snapshots_used = 0;
};

inline TaskScores score_task(const std::vector<Matrix>& states_before,
                             const std::vector<SnapshotEvalSet>& sets, double curvature,
                             bool hyperbolic, const FermiDiracParams& fd) {
    TaskScores out;
    double auc_sum = 0.0, ap_sum = 0.0;
    for (const SnapshotEvalSet& es : sets) {
        if (es.skipped) continue;
        const Matrix& h = states_before[es.t];
        std::vector<double> pos, neg;
        pos.reserve(es.positives.size());
        neg.reserve(es.negatives.size());
        for (const Edge& e : es.positives)
            pos.push_back(
                fermi_dirac_prob(row_dist(h, e.first, e.second, curvature, hyperbolic), fd));
        for (const Edge& e : es.negatives)
            neg.push_back(
                fermi_dirac_prob(row_dist(h, e.first, e.second, curvature, hyperbolic), fd));
        auc_sum += auc_score(pos, neg);
        ap_sum += ap_score(pos, neg);
        ++out.snapshots_used;
    }
    if (out.snapshots_used > 0) {
        out.auc = auc_sum / out.snapshots_used;
        out.ap = ap_sum / out.snapshots_used;
    }
    return out;
}

struct EvalReport {
    TaskScores link;
    TaskScores new_link;
};

inline EvalReport evaluate(ModelParams& params, const ModelMeta& meta,
                           const SnapshotSequence& seq,
                           const std::vector<SnapshotEvalSet>& link_sets,
                           const std::vector<SnapshotEvalSet>& new_sets) {
    std::vector<Matrix> before = roll_states(params, meta, seq);
    const double c = params.curvature();
    const bool hyp = meta.ablation != Ablation::euclidean;
    EvalReport r;
    r.link = score_task(before, link_sets, c, hyp, meta.fd);
    r.new_link = score_task(before, new_sets, c, hyp, meta.fd);
    return r;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct EpochMetrics {
    int epoch = 0;
    double mean_loss = 0.0;
    double homophily_loss = 0.0;
    double htc_loss = 0.0;
    double auc_link = std::numeric_limits<double>::quiet_NaN();
    double ap_link = std::numeric_limits<double>::quiet_NaN();
    double auc_new = std::numeric_limits<double>::quiet_NaN();
    double ap_new = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    ModelParams params;
    ModelMeta meta;
    std::vector<EpochMetrics> history;
    EpochMetrics final_metrics;  // best-epoch params, full eval
    int best_epoch = -1;
    int epochs_run = 0;
};

// Debug/instrumentation hook: called after every optimizer step with the
// bank contents and the state just emitted.
using StepHook =
    std::function<void(int epoch, int t, const StateMemoryBank&, const Matrix&)>;

inline TrainResult train(const SnapshotSequence& seq, const TrainConfig& cfg,
                         StepTimer* timer = nullptr, const StepHook& hook = {}) {
    cfg.validate(seq.T());
    const ModelMeta meta = cfg.meta();
    const int T_train = seq.T() - cfg.test_k;
    const int n = seq.n;

    ModelParams params = init_model(seq, meta, cfg.seed);
    auto registry = params.registry();
    Adam adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.weight_decay);
    adam.init(registry);

    // nodes seen with at least one edge in snapshots 0..t (negative sampling pool)
    std::vector<std::vector<int>> active_up_to(T_train);
    {
        std::vector<char> seen(n, 0);
        for (int t = 0; t < T_train; ++t) {
            for (const Edge& e : seq.snapshots[t].edges) {
                seen[e.first] = 1;
                seen[e.second] = 1;
            }
            for (int i = 0; i < n; ++i)
                if (seen[i]) active_up_to[t].push_back(i);
        }
    }

    auto link_sets = build_eval_pairs(seq, cfg.test_k, EvalTask::link, cfg.seed);
    auto new_sets = build_eval_pairs(seq, cfg.test_k, EvalTask::new_link, cfg.seed);

    // Early stopping watches link prediction on the training snapshots
    // (performance of the training set, not its loss): one fixed seeded set
    // of negatives per training snapshot, scored with the rolled states.
    std::vector<SnapshotEvalSet> train_sets;
    {
        Rng trng(mix_seed(cfg.seed, "train-eval-negatives"));
        for (int t = 1; t < T_train; ++t) {
            const SnapshotGraph& g = seq.snapshots[t];
            if (g.edges.empty()) continue;
            SnapshotEvalSet es;
            es.t = t;
            es.positives = g.edges;
            es.negatives = sample_negatives(g, g.edges.size(), trng);
            train_sets.push_back(std::move(es));
        }
    }

    Rng neg_rng(mix_seed(cfg.seed, "train-negatives"));
    const Matrix h0(n, cfg.dim);

    TrainResult result;
    result.meta = meta;
    double best_train_auc = -std::numeric_limits<double>::infinity();
    ModelParams best_params = params;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        StateMemoryBank bank(cfg.window);
        bank.fill_with(h0);
        Matrix h_prev = h0;
        double loss_sum = 0.0, homo_sum = 0.0, htc_sum = 0.0;
        int steps = 0;

        auto diagnose = [&](int t, double total, double homo, double htc) {
            std::ostringstream os;
            os << "train: non-finite loss at epoch " << epoch << " timestep " << t
               << " (total=" << total << " homophily=" << homo << " htc=" << htc << ")";
            return os.str();
        };

        if (cfg.bptt == BpttMode::truncated) {
            for (int t = 0; t < T_train; ++t) {
                const SnapshotGraph& g = seq.snapshots[t];
                ad::Tape tape;
                ModelVars mv = bind_model(tape, params, meta, /*needs_grad=*/true);
                std::vector<ad::Var> bank_vars;
                for (const Matrix& s : bank.states) bank_vars.push_back(tape.constant(s));
                ad::Var h_t = forward_step(mv, g, bank_vars, meta, timer);

                if (!g.edges.empty()) {
                    EdgeSampleBatch batch = sample_edge_batch(g, active_up_to[t], neg_rng);
                    const double ts = detail::now_sec();
                    ad::Var homo = homophily_loss(h_t, batch, mv.geo, cfg.fd);
                    ad::Var total = homo;
                    double htc_val = 0.0;
                    if (meta.ablation != Ablation::no_htc && cfg.lambda > 0.0) {
                        ad::Var htc = htc_loss(h_t, tape.constant(h_prev), mv.geo);
                        htc_val = htc.scalar();
                        total = ad::add(homo, ad::scalar_mul(htc, cfg.lambda));
                    }
                    if (timer) timer->add("loss", detail::now_sec() - ts);
                    const double total_val = total.scalar();
                    if (!std::isfinite(total_val))
                        throw TrainAbort(diagnose(t, total_val, homo.scalar(), htc_val));
                    tape.backward(total);
                    std::vector<const Matrix*> grads;
                    for (size_t k = 0; k < registry.size(); ++k)
                        grads.push_back(&mv.leaves[k].grad());
                    adam.step(registry, grads);
                    if (!params.all_finite())
                        throw TrainAbort(diagnose(t, total_val, homo.scalar(), htc_val) +
                                         " (parameters became non-finite)");
                    loss_sum += total_val;
                    homo_sum += homo.scalar();
                    htc_sum += htc_val;
                    ++steps;
                }
                // recurrence continues regardless; states enter the bank detached
                h_prev = h_t.value();
                bank.push(h_prev);
                if (hook) hook(epoch, t, bank, h_prev);
            }
        } else {
            // full BPTT: one tape across the epoch, gradients flow through the
            // bank, one optimizer step on the summed loss
            ad::Tape tape;
            ModelVars mv = bind_model(tape, params, meta, /*needs_grad=*/true);
            std::deque<ad::Var> bank_vars;
            for (int i = 0; i < cfg.window; ++i) bank_vars.push_back(tape.constant(h0));
            ad::Var h_prev_var = tape.constant(h0);
            std::optional<ad::Var> epoch_total;
            for (int t = 0; t < T_train; ++t) {
                const SnapshotGraph& g = seq.snapshots[t];
                std::vector<ad::Var> bank_now(bank_vars.begin(), bank_vars.end());
                ad::Var h_t = forward_step(mv, g, bank_now, meta, timer);
                if (!g.edges.empty()) {
                    EdgeSampleBatch batch = sample_edge_batch(g, active_up_to[t], neg_rng);
                    ad::Var homo = homophily_loss(h_t, batch, mv.geo, cfg.fd);
                    ad::Var total = homo;
                    double htc_val = 0.0;
                    if (meta.ablation != Ablation::no_htc && cfg.lambda > 0.0) {
                        ad::Var htc = htc_loss(h_t, h_prev_var, mv.geo);
                        htc_val = htc.scalar();
                        total = ad::add(homo, ad::scalar_mul(htc, cfg.lambda));
                    }
                    const double total_val = total.scalar();
                    if (!std::isfinite(total_val))
                        throw TrainAbort(diagnose(t, total_val, homo.scalar(), htc_val));
                    loss_sum += total_val;
                    homo_sum += homo.scalar();
                    htc_sum += htc_val;
                    ++steps;
                    epoch_total = epoch_total ? ad::add(*epoch_total, total) : total;
                }
                h_prev_var = h_t;
                bank_vars.push_back(h_t);
                while (static_cast<int>(bank_vars.size()) > cfg.window)
                    bank_vars.pop_front();
                bank.push(h_t.value());
                if (hook) hook(epoch, t, bank, h_t.value());
            }
            if (epoch_total) {
                tape.backward(*epoch_total);
                std::vector<const Matrix*> grads;
                for (size_t k = 0; k < registry.size(); ++k)
                    grads.push_back(&mv.leaves[k].grad());
                adam.step(registry, grads);
                if (!params.all_finite())
                    throw TrainAbort(diagnose(T_train - 1, loss_sum, homo_sum, htc_sum) +
                                     " (parameters became non-finite)");
            }
        }

        if (steps == 0)
            throw TrainAbort("train: no training snapshot has edges");

        EpochMetrics em;
        em.epoch = epoch;
        em.mean_loss = loss_sum / steps;
        em.homophily_loss = homo_sum / steps;
        em.htc_loss = htc_sum / steps;
        std::vector<Matrix> before = roll_states(params, meta, seq);
        const double c_now = params.curvature();
        const bool hyp = meta.ablation != Ablation::euclidean;
        TaskScores link = score_task(before, link_sets, c_now, hyp, meta.fd);
        TaskScores nl = score_task(before, new_sets, c_now, hyp, meta.fd);
        TaskScores train_perf = score_task(before, train_sets, c_now, hyp, meta.fd);
        em.auc_link = link.auc;
        em.ap_link = link.ap;
        em.auc_new = nl.auc;
        em.ap_new = nl.ap;
        result.history.push_back(em);
        result.epochs_run = epoch + 1;

        const double train_auc =
            train_perf.snapshots_used > 0 ? train_perf.auc : -loss_sum;
        if (train_auc > best_train_auc + 1e-12) {
            best_train_auc = train_auc;
            best_params = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    result.params = std::move(best_params);
    // Recompute with the restored best-epoch parameters; this is exactly what
    // a later `eval` run on the saved params file will see.
    EvalReport rep = evaluate(result.params, meta, seq, link_sets, new_sets);
    if (result.best_epoch >= 0) result.final_metrics = result.history[result.best_epoch];
    result.final_metrics.auc_link = rep.link.auc;
    result.final_metrics.ap_link = rep.link.ap;
    result.final_metrics.auc_new = rep.new_link.auc;
    result.final_metrics.ap_new = rep.new_link.ap;
    return result;
}

// ---------------------------------------------------------------------------
// metrics CSV (the trainer's external interface)
// ---------------------------------------------------------------------------

inline std::string format_metric(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_metrics_csv(const std::string& path,
                              const std::vector<EpochMetrics>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    out << "epoch,mean_loss,homophily_loss,htc_loss,auc_link,ap_link,auc_new,ap_new\n";
    for (const EpochMetrics& m : history)
        out << m.epoch << "," << format_metric(m.mean_loss) << ","
            << format_metric(m.homophily_loss) << "," << format_metric(m.htc_loss) << ","
            << format_metric(m.auc_link) << "," << format_metric(m.ap_link) << ","
            << format_metric(m.auc_new) << "," << format_metric(m.ap_new) << "\n";
}

// ---------------------------------------------------------------------------
// component microbenchmarks (scaling checks for the complexity claims)
// ---------------------------------------------------------------------------

// Median wall time of one HTA forward pass over a synthetic bank.
inline double time_hta_forward(int n, int w, int d, int reps, uint64_t seed) {
    Rng rng(mix_seed(seed, "bench-hta"));
    HtaParams hp = HtaParams::init(d, d, rng);
    std::vector<Matrix> bank;
    for (int i = 0; i < w; ++i) {
        Matrix s = random_uniform(n, d, -0.3, 0.3, rng);
        bank.push_back(std::move(s));
    }
    std::vector<double> times;
    for (int r = 0; r < reps; ++r) {
        ad::Tape tape;
        mops::Geometry geo;
        geo.hyperbolic = true;
        geo.sqrt_c = tape.constant(Matrix(1, 1, 1.0));
        HtaVars hv{tape.leaf(hp.Q, false), tape.leaf(hp.r, false)};
        std::vector<ad::Var> bank_vars;
        for (const Matrix& s : bank) bank_vars.push_back(tape.constant(s));
        const double t0 = detail::now_sec();
        ad::Var out = hta(bank_vars, hv, geo);
        (void)out;
        times.push_back(detail::now_sec() - t0);
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace htgn
