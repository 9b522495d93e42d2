#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "htgn/data.hpp"
#include "htgn/gradcheck.hpp"
#include "htgn/model.hpp"
#include "htgn/trainer.hpp"

namespace fs = std::filesystem;
using namespace htgn;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path + " for hashing");
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void print_final_table(const EpochMetrics& m) {
    std::printf("task      auc        ap\n");
    std::printf("link      %-10.6g %-10.6g\n", m.auc_link, m.ap_link);
    std::printf("new-link  %-10.6g %-10.6g\n", m.auc_new, m.ap_new);
}

struct TrainFlags {
    std::string data;
    std::string out = "out";
    TrainConfig cfg;
    std::string ablation = "none";
    std::string agg = "attention";
    std::string features = "identity";
    std::string bptt = "truncated";
};

int run_train(const TrainFlags& f) {
    SnapshotSequence seq = load_snapshots(f.data);
    TrainConfig cfg = f.cfg;
    cfg.ablation = parse_ablation(f.ablation);
    cfg.agg = parse_aggregation(f.agg);
    cfg.features = FeatureSpec::parse(f.features);
    cfg.bptt = parse_bptt(f.bptt);
    try {
        cfg.validate(seq.T());
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    fs::create_directories(f.out);
    StepTimer timer;
    TrainResult res = train(seq, cfg, &timer);

    const std::string params_path = (fs::path(f.out) / "params.txt").string();
    const std::string metrics_path = (fs::path(f.out) / "metrics.csv").string();
    save_params(params_path, res.params, res.meta);
    write_metrics_csv(metrics_path, res.history);

    // manifest, written atomically at the end of the run
    {
        const std::string tmp = (fs::path(f.out) / "manifest.txt.tmp").string();
        std::ofstream mf(tmp);
        mf << "command = train\n";
        mf << "data = " << f.data << "\n";
        mf << "data_hash = " << hex64(fnv1a64_file(f.data)) << "\n";
        mf << "seed = " << cfg.seed << "\n";
        mf << "test_k = " << cfg.test_k << "\n";
        mf << "dim = " << cfg.dim << "\n";
        mf << "window = " << cfg.window << "\n";
        mf << "lambda = " << cfg.lambda << "\n";
        mf << "lr = " << cfg.lr << "\n";
        mf << "epochs = " << cfg.max_epochs << "\n";
        mf << "patience = " << cfg.patience << "\n";
        mf << "ablation = " << to_string(cfg.ablation) << "\n";
        mf << "agg = " << (cfg.agg == Aggregation::attention ? "attention" : "laplacian") << "\n";
        mf << "features = " << cfg.features.to_string() << "\n";
        mf << "bptt = " << to_string(cfg.bptt) << "\n";
        mf << "hgnn_layers = " << cfg.hgnn_layers << "\n";
        mf << "fd_radius = " << cfg.fd.radius << "\n";
        mf << "fd_steepness = " << cfg.fd.steepness << "\n";
        mf << "epochs_run = " << res.epochs_run << "\n";
        mf << "best_epoch = " << res.best_epoch << "\n";
        mf << "params_hash = " << hex64(fnv1a64_file(params_path)) << "\n";
        mf << "metrics_hash = " << hex64(fnv1a64_file(metrics_path)) << "\n";
        mf.close();
        fs::rename(tmp, fs::path(f.out) / "manifest.txt");
    }

    std::printf("trained %d epochs (best %d), outputs in %s\n", res.epochs_run,
                res.best_epoch, f.out.c_str());
    for (const auto& [name, acc] : timer.components)
        std::printf("timing %-6s %.3f ms/step over %ld steps\n", name.c_str(),
                    1e3 * acc.seconds / std::max(1L, acc.calls), acc.calls);
    print_final_table(res.final_metrics);
    return 0;
}

struct EvalFlags {
    std::string params;
    std::string data;
    int test_k = 3;
    uint64_t seed = 1;
    std::string task = "both";
};

int run_eval(const EvalFlags& f) {
    if (f.task != "link" && f.task != "new-link" && f.task != "both")
        throw UsageError("eval: --task must be link|new-link|both");
    SnapshotSequence seq = load_snapshots(f.data);
    if (f.test_k < 1 || f.test_k >= seq.T())
        throw UsageError("eval: need 1 <= test-k < T");
    auto [params, meta] = load_params(f.params, seq);

    std::vector<SnapshotEvalSet> link_sets, new_sets;
    if (f.task != "new-link")
        link_sets = build_eval_pairs(seq, f.test_k, EvalTask::link, f.seed);
    if (f.task != "link")
        new_sets = build_eval_pairs(seq, f.test_k, EvalTask::new_link, f.seed);
    EvalReport rep = evaluate(params, meta, seq, link_sets, new_sets);

    EpochMetrics m;
    m.auc_link = rep.link.auc;
    m.ap_link = rep.link.ap;
    m.auc_new = rep.new_link.auc;
    m.ap_new = rep.new_link.ap;
    print_final_table(m);
    return 0;
}

struct GradcheckFlags {
    std::string component;
    uint64_t seed = 7;
    double tol = 1e-4;
    std::string inject_fault;
};

int run_gradcheck(const GradcheckFlags& f) {
    if (!f.component.empty() && f.component != "manifold" && f.component != "hgnn" &&
        f.component != "hta" && f.component != "hgru" && f.component != "loss" &&
        f.component != "model")
        throw UsageError("gradcheck: unknown component " + f.component);
    ad::g_injected_fault_kind = f.inject_fault;
    auto checks = build_grad_checks(f.component, f.seed);
    bool ok = true;
    for (const NamedCheck& c : checks) {
        GradCheckReport rep = c.run();
        const bool pass = rep.pass(f.tol);
        ok = ok && pass;
        std::printf("%-32s [%s] worst rel err %.3g\n", c.name.c_str(),
                    pass ? "ok" : "FAIL", rep.worst_rel());
        if (!pass && !f.inject_fault.empty())
            std::printf("  fault injected in op '%s' detected\n", f.inject_fault.c_str());
    }
    ad::g_injected_fault_kind.clear();
    return ok ? 0 : 1;
}

struct SynthFlags {
    std::string model = "tree";
    int nodes = 200;
    int snapshots = 7;
    double branching = 2.0;
    int feat_dim = 0;
    double feat_sigma = 0.5;
    int persist = 1;
    int backbone_edges = 0;
    double edges_per_snapshot = 0.0;
    uint64_t seed = 1;
    std::string out;
};

int run_synth(const SynthFlags& f) {
    if (f.nodes < 2) throw UsageError("synth: need --nodes >= 2");
    SnapshotSequence seq;
    if (f.model == "tree") {
        seq = synth_tree(f.nodes, f.branching, f.snapshots, f.seed, f.feat_dim, f.feat_sigma, f.persist);
    } else if (f.model == "social") {
        const int backbone = f.backbone_edges > 0 ? f.backbone_edges : 4 * f.nodes;
        const double per_snap =
            f.edges_per_snapshot > 0.0 ? f.edges_per_snapshot : 0.6 * backbone;
        seq = synth_social(f.nodes, f.snapshots, backbone, per_snap, f.seed);
    } else {
        throw UsageError("synth: --model must be tree|social");
    }
    save_snapshots(f.out, seq);
    if (seq.has_features()) save_feature_file(f.out + ".features", seq.features);
    DatasetStats st = compute_stats(seq, f.model, 0);
    long long instances = 0;
    for (const auto& g : seq.snapshots) instances += static_cast<long long>(g.edges.size());
    std::printf("wrote %s: n=%d T=%d unique_edges=%lld edge_instances=%lld%s\n",
                f.out.c_str(), st.n, st.T, st.total_edges, instances,
                seq.has_features() ? " (+features)" : "");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperbolic temporal graph network trainer"};
    app.require_subcommand(1);

    TrainFlags tf;
    CLI::App* train_cmd = app.add_subcommand("train", "train on a snapshot edge list");
    train_cmd->add_option("--data", tf.data, "snapshot edge list file")->required();
    train_cmd->add_option("--test-k", tf.cfg.test_k, "number of test snapshots");
    train_cmd->add_option("--dim", tf.cfg.dim, "embedding dimension");
    train_cmd->add_option("--window", tf.cfg.window, "attention window w");
    train_cmd->add_option("--lambda", tf.cfg.lambda, "consistency weight");
    train_cmd->add_option("--lr", tf.cfg.lr, "learning rate");
    train_cmd->add_option("--epochs", tf.cfg.max_epochs, "max epochs");
    train_cmd->add_option("--patience", tf.cfg.patience, "early-stopping patience");
    train_cmd->add_option("--seed", tf.cfg.seed, "random seed");
    train_cmd->add_option("--out", tf.out, "output directory");
    train_cmd->add_option("--ablation", tf.ablation, "none|no-htc|no-hta|euclidean");
    train_cmd->add_option("--agg", tf.agg, "attention|laplacian");
    train_cmd->add_option("--features", tf.features, "identity|glorot:DIM|file:PATH");
    train_cmd->add_option("--bptt", tf.bptt, "truncated|full");
    train_cmd->add_option("--hgnn-layers", tf.cfg.hgnn_layers, "stacked HGNN layers");
    train_cmd->add_option("--hta-hidden", tf.cfg.hta_hidden, "attention hidden size k");
    train_cmd->add_flag("--hta-softmax-over-nodes", tf.cfg.hta_softmax_over_nodes,
                        "normalize temporal attention over nodes instead of time");
    train_cmd->add_option("--fd-r", tf.cfg.fd.radius, "Fermi-Dirac radius");
    train_cmd->add_option("--fd-s", tf.cfg.fd.steepness, "Fermi-Dirac steepness");

    EvalFlags ef;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate saved parameters");
    eval_cmd->add_option("--params", ef.params, "params file")->required();
    eval_cmd->add_option("--data", ef.data, "snapshot edge list file")->required();
    eval_cmd->add_option("--test-k", ef.test_k, "number of test snapshots");
    eval_cmd->add_option("--seed", ef.seed, "eval-pair sampling seed");
    eval_cmd->add_option("--task", ef.task, "link|new-link|both");

    GradcheckFlags gf;
    CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gc_cmd->add_option("--component", gf.component,
                       "manifold|hgnn|hta|hgru|loss|model (default: all)");
    gc_cmd->add_option("--seed", gf.seed, "random seed");
    gc_cmd->add_option("--tol", gf.tol, "relative error tolerance");
    gc_cmd->add_option("--inject-sign-flip", gf.inject_fault,
                       "test fixture: flip the backward sign of this op kind")
        ->group("");  // hidden

    SynthFlags sf;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--model", sf.model, "tree|social");
    synth_cmd->add_option("--nodes", sf.nodes, "node count");
    synth_cmd->add_option("--snapshots", sf.snapshots, "snapshot count");
    synth_cmd->add_option("--branching", sf.branching, "tree: layer growth factor");
    synth_cmd->add_option("--feat-dim", sf.feat_dim,
                          "tree: diffusion feature dimension (0 = none)");
    synth_cmd->add_option("--feat-sigma", sf.feat_sigma, "tree: diffusion noise scale");
    synth_cmd->add_option("--persist", sf.persist,
                          "tree: snapshots each contact edge stays visible");
    synth_cmd->add_option("--backbone-edges", sf.backbone_edges,
                          "social: unique edge count");
    synth_cmd->add_option("--edges-per-snapshot", sf.edges_per_snapshot,
                          "social: expected edges per snapshot");
    synth_cmd->add_option("--seed", sf.seed, "random seed");
    synth_cmd->add_option("--out", sf.out, "output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train_cmd) return run_train(tf);
        if (*eval_cmd) return run_eval(ef);
        if (*gc_cmd) return run_gradcheck(gf);
        if (*synth_cmd) return run_synth(sf);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
