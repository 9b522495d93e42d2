#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "htgn/matrix.hpp"
#include "htgn/rng.hpp"

namespace htgn {

using Edge = std::pair<int, int>;  // undirected, stored with first < second

inline Edge make_edge(int i, int j) { return i < j ? Edge{i, j} : Edge{j, i}; }

// One snapshot of the temporal graph over the global node universe.
// Edges are undirected, deduplicated, sorted; self-loops are never stored
// (aggregation adds them on the fly).
struct SnapshotGraph {
    int n = 0;
    std::vector<Edge> edges;
    std::vector<int> degree;

    void finalize() {
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        degree.assign(n, 0);
        for (const Edge& e : edges) {
            ++degree[e.first];
            ++degree[e.second];
        }
    }
    bool has_edge(int i, int j) const {
        return std::binary_search(edges.begin(), edges.end(), make_edge(i, j));
    }
};

struct SnapshotSequence {
    int n = 0;
    std::vector<SnapshotGraph> snapshots;
    // original node labels, index -> label (identity when input was contiguous)
    std::vector<long long> node_labels;
    // optional bundled node features (n x d), e.g. from a generator
    Matrix features;

    int T() const { return static_cast<int>(snapshots.size()); }
    bool has_features() const { return !features.empty(); }
};

struct DatasetStats {
    std::string name;
    int T = 0;
    int test_k = 0;
    int n = 0;
    long long total_edges = 0;  // unique undirected edges in the union
    std::optional<double> density;        // reported metadata, never computed here
    std::optional<double> hyperbolicity;  // reported metadata, never computed here
};

inline DatasetStats compute_stats(const SnapshotSequence& seq, const std::string& name,
                                  int test_k) {
    DatasetStats s;
    s.name = name;
    s.T = seq.T();
    s.test_k = test_k;
    s.n = seq.n;
    std::set<Edge> uni;
    for (const auto& g : seq.snapshots) uni.insert(g.edges.begin(), g.edges.end());
    s.total_edges = static_cast<long long>(uni.size());
    return s;
}

// ---------------------------------------------------------------------------
// on-disk format: "src<TAB>dst<TAB>snapshot-id" per line, '#' comments
// ---------------------------------------------------------------------------

inline SnapshotSequence load_snapshots(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_snapshots: cannot open " + path);

    struct RawEdge {
        long long u, v, t;
    };
    std::vector<RawEdge> raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t p = line.find_first_not_of(" \t\r");
        if (p == std::string::npos || line[p] == '#') continue;
        std::istringstream ls(line);
        long long u, v, t;
        if (!(ls >> u >> v >> t))
            throw std::runtime_error("load_snapshots: malformed line " +
                                     std::to_string(lineno) + " in " + path);
        if (u < 0 || v < 0 || t < 0)
            throw std::runtime_error("load_snapshots: negative id at line " +
                                     std::to_string(lineno) + " in " + path);
        raw.push_back({u, v, t});
    }
    if (raw.empty()) throw std::runtime_error("load_snapshots: no edges in " + path);

    // node universe = union of endpoints, remapped to dense 0..n-1
    std::set<long long> labels;
    std::set<long long> times;
    for (const auto& e : raw) {
        labels.insert(e.u);
        labels.insert(e.v);
        times.insert(e.t);
    }
    std::map<long long, int> node_of;
    SnapshotSequence seq;
    for (long long l : labels) {
        node_of[l] = static_cast<int>(seq.node_labels.size());
        seq.node_labels.push_back(l);
    }
    seq.n = static_cast<int>(seq.node_labels.size());

    std::map<long long, int> snap_of;
    {
        long long expect = 0;
        bool contiguous = true;
        for (long long t : times) {
            if (t != expect++) contiguous = false;
            snap_of[t] = static_cast<int>(snap_of.size());
        }
        if (!contiguous)
            std::cerr << "warning: non-contiguous snapshot ids in " << path
                      << ", remapped to 0.." << times.size() - 1 << "\n";
    }

    seq.snapshots.assign(times.size(), SnapshotGraph{});
    for (auto& g : seq.snapshots) g.n = seq.n;
    for (const auto& e : raw) {
        if (e.u == e.v) continue;  // ignore self-loops in input
        seq.snapshots[snap_of[e.t]].edges.push_back(
            make_edge(node_of[e.u], node_of[e.v]));
    }
    for (auto& g : seq.snapshots) g.finalize();
    return seq;
}

inline void save_snapshots(const std::string& path, const SnapshotSequence& seq) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_snapshots: cannot open " + path);
    out << "# src\tdst\tsnapshot\n";
    for (int t = 0; t < seq.T(); ++t)
        for (const Edge& e : seq.snapshots[t].edges) {
            long long a = seq.node_labels.empty() ? e.first : seq.node_labels[e.first];
            long long b = seq.node_labels.empty() ? e.second : seq.node_labels[e.second];
            out << a << "\t" << b << "\t" << t << "\n";
        }
}

// ---------------------------------------------------------------------------
// feature initialization
// ---------------------------------------------------------------------------

struct FeatureSpec {
    enum class Mode { identity, trainable_glorot, file, dataset } mode = Mode::identity;
    int dim = 0;          // trainable_glorot
    std::string path;     // file

    static FeatureSpec parse(const std::string& s) {
        FeatureSpec f;
        if (s == "identity") {
            f.mode = Mode::identity;
        } else if (s == "dataset") {
            f.mode = Mode::dataset;
        } else if (s.rfind("glorot:", 0) == 0) {
            f.mode = Mode::trainable_glorot;
            f.dim = std::stoi(s.substr(7));
            if (f.dim < 1) throw std::invalid_argument("features: glorot dim must be >= 1");
        } else if (s.rfind("file:", 0) == 0) {
            f.mode = Mode::file;
            f.path = s.substr(5);
        } else {
            throw std::invalid_argument(
                "features: expected identity|glorot:DIM|file:PATH|dataset, got " + s);
        }
        return f;
    }
    std::string to_string() const {
        switch (mode) {
            case Mode::identity: return "identity";
            case Mode::trainable_glorot: return "glorot:" + std::to_string(dim);
            case Mode::file: return "file:" + path;
            case Mode::dataset: return "dataset";
        }
        return "identity";
    }
};

inline Matrix load_feature_file(const std::string& path, int expected_rows) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("features: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        size_t p = line.find_first_not_of(" \t\r");
        if (p == std::string::npos || line[p] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (static_cast<int>(rows.size()) != expected_rows)
        throw std::invalid_argument("features: file has " + std::to_string(rows.size()) +
                                    " rows, expected " + std::to_string(expected_rows));
    Matrix m(expected_rows, static_cast<int>(rows[0].size()));
    for (int i = 0; i < m.rows; ++i) {
        if (static_cast<int>(rows[i].size()) != m.cols)
            throw std::invalid_argument("features: ragged row in " + path);
        for (int j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

// Returns the initial feature matrix; `trainable` reports whether it should
// be registered as a learnable parameter.
inline Matrix init_features(const SnapshotSequence& seq, const FeatureSpec& spec,
                            Rng& rng, bool* trainable) {
    *trainable = false;
    switch (spec.mode) {
        case FeatureSpec::Mode::identity:
            return Matrix::identity(seq.n);
        case FeatureSpec::Mode::trainable_glorot:
            *trainable = true;
            return glorot_uniform(seq.n, spec.dim, rng);
        case FeatureSpec::Mode::file:
            return load_feature_file(spec.path, seq.n);
        case FeatureSpec::Mode::dataset:
            if (!seq.has_features())
                throw std::invalid_argument(
                    "features: dataset mode requested but the sequence carries none");
            return seq.features;
    }
    throw std::logic_error("init_features: bad mode");
}

inline void save_feature_file(const std::string& path, const Matrix& features) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_feature_file: cannot open " + path);
    char buf[64];
    for (int i = 0; i < features.rows; ++i) {
        for (int j = 0; j < features.cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", features(i, j));
            out << (j ? " " : "") << buf;
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// train/test split and evaluation pairs
// ---------------------------------------------------------------------------

inline std::pair<SnapshotSequence, std::vector<SnapshotGraph>> split_last_k(
    const SnapshotSequence& seq, int k) {
    const int T = seq.T();
    if (k < 1 || k >= T)
        throw std::invalid_argument("split_last_k: need 1 <= k < T, got k=" +
                                    std::to_string(k) + " T=" + std::to_string(T));
    SnapshotSequence train;
    train.n = seq.n;
    train.node_labels = seq.node_labels;
    train.snapshots.assign(seq.snapshots.begin(), seq.snapshots.end() - k);
    std::vector<SnapshotGraph> test(seq.snapshots.end() - k, seq.snapshots.end());
    return {std::move(train), std::move(test)};
}

enum class EvalTask { link, new_link };

struct SnapshotEvalSet {
    int t = 0;  // index into the full sequence
    std::vector<Edge> positives;
    std::vector<Edge> negatives;
    bool skipped = false;
};

// Uniform non-edges of snapshot g over the whole universe; never a self-pair,
// never an edge of g. Count matches `count` (throws only if the graph is
// complete, which cannot happen for the sizes used here).
inline std::vector<Edge> sample_negatives(const SnapshotGraph& g, size_t count, Rng& rng) {
    std::vector<Edge> out;
    out.reserve(count);
    const long long possible = static_cast<long long>(g.n) * (g.n - 1) / 2;
    if (possible <= static_cast<long long>(g.edges.size()))
        throw std::runtime_error("sample_negatives: graph is complete");
    size_t attempts = 0, max_attempts = 1000 * (count + 10);
    while (out.size() < count) {
        if (++attempts > max_attempts)
            throw std::runtime_error("sample_negatives: rejection sampling stalled");
        int i = rng.uniform_int(0, g.n - 1);
        int j = rng.uniform_int(0, g.n - 1);
        if (i == j) continue;
        if (g.has_edge(i, j)) continue;
        out.push_back(make_edge(i, j));
    }
    return out;
}

// Positives per test snapshot (all edges, or only edges new w.r.t. the
// preceding snapshot) plus equally many seeded uniform negatives.
inline std::vector<SnapshotEvalSet> build_eval_pairs(const SnapshotSequence& seq, int k,
                                                     EvalTask task, uint64_t seed) {
    const int T = seq.T();
    if (k < 1 || k >= T) throw std::invalid_argument("build_eval_pairs: bad k");
    Rng rng(mix_seed(seed, task == EvalTask::link ? "eval-link" : "eval-new"));
    std::vector<SnapshotEvalSet> out;
    for (int t = T - k; t < T; ++t) {
        SnapshotEvalSet es;
        es.t = t;
        const SnapshotGraph& g = seq.snapshots[t];
        if (task == EvalTask::link) {
            es.positives = g.edges;
        } else {
            const SnapshotGraph& prev = seq.snapshots[t - 1];
            for (const Edge& e : g.edges)
                if (!prev.has_edge(e.first, e.second)) es.positives.push_back(e);
        }
        if (es.positives.empty()) {
            es.skipped = true;
            std::cerr << "warning: snapshot " << t << " has no "
                      << (task == EvalTask::link ? "edges" : "new edges")
                      << ", skipped in evaluation\n";
        } else {
            es.negatives = sample_negatives(g, es.positives.size(), rng);
        }
        out.push_back(std::move(es));
    }
    return out;
}

// ---------------------------------------------------------------------------
// synthetic generators
// ---------------------------------------------------------------------------

// Random tree revealed breadth-first: snapshot t contains the parent edges of
// the nodes born at layer t. Layer sizes grow geometrically with `branching`;
// each new node attaches uniformly to a node of the previous layer. The union
// over snapshots is a tree on n nodes (n-1 edges, hyperbolicity 0).
//
// With feat_dim > 0 the sequence also carries diffusion features: the root
// draws from N(0, I) and every child copies its parent plus N(0, sigma^2 I)
// noise, the way traits propagate along an infection tree. These give unseen
// nodes an inductive signal, mirroring the featured disease-spread data this
// generator stands in for.
//
// `persist` models recurring contacts: a contact edge born at layer t
// re-occurs every other snapshot, at t, t+2, ..., t+2(persist-1). Predicting
// an echo requires carrying the pair across the gap snapshot where the edge
// is absent. The union over snapshots is the same tree regardless;
// persist = 1 reveals each edge exactly once.
inline SnapshotSequence synth_tree(int n, double branching, int T, uint64_t seed,
                                   int feat_dim = 0, double feat_sigma = 0.5,
                                   int persist = 1) {
    if (n < 2) throw std::invalid_argument("synth_tree: need n >= 2");
    if (T < 1 || T > n - 1) throw std::invalid_argument("synth_tree: need 1 <= T <= n-1");
    if (branching <= 0.0) throw std::invalid_argument("synth_tree: branching must be > 0");
    if (persist < 1) throw std::invalid_argument("synth_tree: persist must be >= 1");
    Rng rng(mix_seed(seed, "synth-tree"));

    // layer sizes proportional to branching^t, each >= 1, summing to n-1
    std::vector<int> size(T, 1);
    {
        std::vector<double> weight(T);
        double tot = 0.0;
        for (int t = 0; t < T; ++t) tot += (weight[t] = std::pow(branching, t));
        int assigned = T;
        for (int t = 0; t < T && assigned < n - 1; ++t) {
            int extra = static_cast<int>(std::floor((n - 1 - T) * weight[t] / tot + 0.5));
            extra = std::min(extra, n - 1 - assigned);
            size[t] += extra;
            assigned += extra;
        }
        size[T - 1] += (n - 1) - assigned;
    }

    SnapshotSequence seq;
    seq.n = n;
    seq.snapshots.assign(T, SnapshotGraph{});
    for (auto& g : seq.snapshots) g.n = n;

    int next_node = 1;  // node 0 is the root
    std::vector<int> parent_of(n, -1);
    std::vector<int> prev_layer{0};
    for (int t = 0; t < T; ++t) {
        std::vector<int> layer;
        for (int s = 0; s < size[t] && next_node < n; ++s) {
            int parent = prev_layer[rng.uniform_int(0, static_cast<int>(prev_layer.size()) - 1)];
            for (int j = 0; j < persist && t + 2 * j < T; ++j)
                seq.snapshots[t + 2 * j].edges.push_back(make_edge(parent, next_node));
            parent_of[next_node] = parent;
            layer.push_back(next_node);
            ++next_node;
        }
        if (!layer.empty()) prev_layer = std::move(layer);
    }
    for (auto& g : seq.snapshots) g.finalize();

    if (feat_dim > 0) {
        seq.features = Matrix(n, feat_dim);
        for (int j = 0; j < feat_dim; ++j) seq.features(0, j) = rng.normal(0.0, 1.0);
        for (int i = 1; i < n; ++i) {
            const int p = parent_of[i];
            for (int j = 0; j < feat_dim; ++j)
                seq.features(i, j) = seq.features(p, j) + rng.normal(0.0, feat_sigma);
        }
        // unit rows: the signal is the profile direction, and bounded inputs
        // keep the exponential map away from its saturation regime
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < feat_dim; ++j) s += seq.features(i, j) * seq.features(i, j);
            s = std::sqrt(s);
            if (s > 0)
                for (int j = 0; j < feat_dim; ++j) seq.features(i, j) /= s;
        }
    }
    return seq;
}

// Temporal social-style generator: nodes live on a latent hyperbolic disk,
// a fixed backbone of likely pairs is selected by latent proximity, and each
// backbone pair re-occurs independently per snapshot. Produces recurring
// edges with power-law-ish hubs, the regime of email/co-authorship graphs.
//
// The generator self-calibrates mu (and an overall activation scale) so the
// backbone holds `backbone_edges` unique pairs covering every node and the
// expected per-snapshot edge count is `edges_per_snapshot`.
inline SnapshotSequence synth_social(int n, int T, int backbone_edges,
                                     double edges_per_snapshot, uint64_t seed) {
    if (n < 3) throw std::invalid_argument("synth_social: need n >= 3");
    if (T < 2) throw std::invalid_argument("synth_social: need T >= 2");
    if (backbone_edges < n / 2 + 1)
        throw std::invalid_argument("synth_social: backbone too small to cover nodes");
    Rng rng(mix_seed(seed, "synth-social"));

    // latent placement: radii with quasi-uniform hyperbolic density, uniform angles
    const double R = 2.0 * std::log(static_cast<double>(n));
    const double alpha = 0.75;
    std::vector<double> r(n), theta(n);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform(1e-12, 1.0);
        r[i] = std::acosh(1.0 + (std::cosh(alpha * R) - 1.0) * u) / alpha;
        theta[i] = rng.uniform(0.0, 2.0 * M_PI);
    }
    auto latent_dist = [&](int i, int j) {
        const double ang = M_PI - std::fabs(M_PI - std::fabs(theta[i] - theta[j]));
        const double ch = std::cosh(r[i]) * std::cosh(r[j]) -
                          std::sinh(r[i]) * std::sinh(r[j]) * std::cos(ang);
        return std::acosh(std::max(1.0, ch));
    };

    struct Pair {
        int i, j;
        double d;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.push_back({i, j, latent_dist(i, j)});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.d != b.d) return a.d < b.d;
        return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    });

    // backbone: each node's closest pair first (coverage), then fill by proximity
    std::vector<char> taken(pairs.size(), 0);
    std::vector<Pair> backbone;
    {
        std::vector<int> best(n, -1);
        for (size_t p = 0; p < pairs.size(); ++p) {
            if (best[pairs[p].i] < 0) best[pairs[p].i] = static_cast<int>(p);
            if (best[pairs[p].j] < 0) best[pairs[p].j] = static_cast<int>(p);
        }
        std::set<int> chosen(best.begin(), best.end());
        for (int p : chosen) {
            taken[p] = 1;
            backbone.push_back(pairs[p]);
        }
        for (size_t p = 0; p < pairs.size() &&
                           backbone.size() < static_cast<size_t>(backbone_edges);
             ++p) {
            if (taken[p]) continue;
            taken[p] = 1;
            backbone.push_back(pairs[p]);
        }
    }

    // per-snapshot activation probability: q = qmax * sigmoid((mu - d)/tau),
    // with mu set by bisection so that sum(q) = edges_per_snapshot
    const double tau = 1.0;
    const double qmax = std::min(0.97, 1.25 * edges_per_snapshot /
                                           static_cast<double>(backbone.size()));
    auto expected = [&](double mu) {
        double s = 0.0;
        for (const Pair& p : backbone) s += qmax / (1.0 + std::exp((p.d - mu) / tau));
        return s;
    };
    double lo = 0.0, hi = 4.0 * R;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (expected(mid) < edges_per_snapshot ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);

    SnapshotSequence seq;
    seq.n = n;
    seq.snapshots.assign(T, SnapshotGraph{});
    for (auto& g : seq.snapshots) g.n = n;
    for (const Pair& p : backbone) {
        const double q = qmax / (1.0 + std::exp((p.d - mu) / tau));
        bool seen = false;
        for (int t = 0; t < T; ++t)
            if (rng.bernoulli(q)) {
                seq.snapshots[t].edges.push_back(make_edge(p.i, p.j));
                seen = true;
            }
        if (!seen)  // force every backbone pair to appear at least once
            seq.snapshots[rng.uniform_int(0, T - 1)].edges.push_back(make_edge(p.i, p.j));
    }
    for (auto& g : seq.snapshots) g.finalize();
    return seq;
}

}  // namespace htgn
