#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "htgn/data.hpp"

using namespace htgn;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name, const std::string& content = "") {
        path = fs::temp_directory_path() / name;
        if (!content.empty()) {
            std::ofstream out(path);
            out << content;
        }
    }
    ~TempFile() { std::error_code ec; fs::remove(path, ec); }
};

}  // namespace

TEST_CASE("load_snapshots parses, dedups, symmetrizes") {
    TempFile f("htgn_load1.edges",
               "# comment line\n"
               "0\t1\t0\n"
               "1\t2\t1\n");
    SnapshotSequence seq = load_snapshots(f.path.string());
    CHECK(seq.T() == 2);
    CHECK(seq.n == 3);
    REQUIRE(seq.snapshots[0].edges.size() == 1);
    CHECK(seq.snapshots[0].edges[0] == Edge{0, 1});
    REQUIRE(seq.snapshots[1].edges.size() == 1);
    CHECK(seq.snapshots[1].edges[0] == Edge{1, 2});

    TempFile g("htgn_load2.edges",
               "0 1 0\n"
               "0 1 0\n"
               "1 0 0\n");
    SnapshotSequence seq2 = load_snapshots(g.path.string());
    CHECK(seq2.T() == 1);
    CHECK(seq2.snapshots[0].edges.size() == 1);  // duplicate and reverse collapse
}

TEST_CASE("load_snapshots reports malformed lines with their number") {
    TempFile f("htgn_bad.edges", "0\t1\t0\nbroken line\n");
    try {
        load_snapshots(f.path.string());
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("non-contiguous snapshot ids are remapped") {
    TempFile f("htgn_gap.edges", "0 1 0\n1 2 5\n");
    SnapshotSequence seq = load_snapshots(f.path.string());
    CHECK(seq.T() == 2);  // snapshot 5 remapped to index 1
}

TEST_CASE("save/load round trip preserves edges and T") {
    SnapshotSequence seq = synth_tree(20, 2.0, 4, 99);
    TempFile f("htgn_rt.edges");
    save_snapshots(f.path.string(), seq);
    SnapshotSequence back = load_snapshots(f.path.string());
    REQUIRE(back.T() == seq.T());
    REQUIRE(back.n == seq.n);
    for (int t = 0; t < seq.T(); ++t) CHECK(back.snapshots[t].edges == seq.snapshots[t].edges);
}

TEST_CASE("split_last_k") {
    SnapshotSequence seq;
    seq.n = 4;
    seq.snapshots.assign(11, SnapshotGraph{});
    for (auto& g : seq.snapshots) {
        g.n = 4;
        g.edges = {{0, 1}};
        g.finalize();
    }
    auto [train, test] = split_last_k(seq, 3);
    CHECK(train.T() == 8);
    CHECK(test.size() == 3);

    auto [train1, test1] = split_last_k(seq, 10);  // k = T-1 leaves one train snapshot
    CHECK(train1.T() == 1);

    CHECK_THROWS_AS(split_last_k(seq, 11), std::invalid_argument);
    CHECK_THROWS_AS(split_last_k(seq, 0), std::invalid_argument);
}

TEST_CASE("feature initialization") {
    SnapshotSequence seq = synth_tree(4, 2.0, 2, 1);
    Rng rng(5);
    bool trainable = false;

    Matrix ident = init_features(seq, FeatureSpec::parse("identity"), rng, &trainable);
    CHECK_FALSE(trainable);
    CHECK(ident.rows == 4);
    CHECK(ident.cols == 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(ident(i, j) == (i == j ? 1.0 : 0.0));

    SnapshotSequence big = synth_tree(100, 2.0, 5, 2);
    Matrix glorot = init_features(big, FeatureSpec::parse("glorot:128"), rng, &trainable);
    CHECK(trainable);
    CHECK(glorot.rows == 100);
    CHECK(glorot.cols == 128);
    const double bound = std::sqrt(6.0 / (100 + 128));
    for (double v : glorot.a) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }

    TempFile f("htgn_feat.txt", "1 2\n3 4\n5 6\n");
    CHECK_THROWS_AS(
        init_features(seq, FeatureSpec::parse("file:" + f.path.string()), rng, &trainable),
        std::invalid_argument);  // 3 rows for 4 nodes
    SnapshotSequence three = synth_tree(3, 2.0, 2, 3);
    Matrix loaded =
        init_features(three, FeatureSpec::parse("file:" + f.path.string()), rng, &trainable);
    CHECK_FALSE(trainable);
    CHECK(loaded(2, 1) == 6.0);
}

TEST_CASE("eval pairs: link and new-link") {
    SnapshotSequence seq;
    seq.n = 6;
    seq.snapshots.assign(4, SnapshotGraph{});
    for (auto& g : seq.snapshots) g.n = 6;
    seq.snapshots[0].edges = {{0, 1}};
    seq.snapshots[1].edges = {{0, 1}, {1, 2}};
    seq.snapshots[2].edges = {{0, 1}, {1, 2}};          // nothing new vs snapshot 1
    seq.snapshots[3].edges = {{0, 1}, {2, 3}, {4, 5}};  // two new edges
    for (auto& g : seq.snapshots) g.finalize();

    auto link = build_eval_pairs(seq, 2, EvalTask::link, 7);
    REQUIRE(link.size() == 2);
    CHECK_FALSE(link[0].skipped);
    CHECK(link[0].positives.size() == 2);
    CHECK(link[1].positives.size() == 3);

    auto nl = build_eval_pairs(seq, 2, EvalTask::new_link, 7);
    CHECK(nl[0].skipped);  // G_t == G_{t+1}
    CHECK(nl[0].positives.empty());
    REQUIRE_FALSE(nl[1].skipped);
    CHECK(nl[1].positives == std::vector<Edge>{{2, 3}, {4, 5}});

    // new-link positives are a subset of link positives
    for (const Edge& e : nl[1].positives) {
        bool found = false;
        for (const Edge& l : link[1].positives) found = found || l == e;
        CHECK(found);
    }

    // negatives never intersect the snapshot's edges, counts match
    for (const auto& es : {link[0], link[1], nl[1]}) {
        CHECK(es.negatives.size() == es.positives.size());
        const SnapshotGraph& g = seq.snapshots[es.t];
        for (const Edge& e : es.negatives) {
            CHECK(e.first != e.second);
            CHECK(!g.has_edge(e.first, e.second));
        }
    }
}

TEST_CASE("new-link from an empty previous snapshot takes everything") {
    SnapshotSequence seq;
    seq.n = 3;
    seq.snapshots.assign(2, SnapshotGraph{});
    for (auto& g : seq.snapshots) g.n = 3;
    seq.snapshots[1].edges = {{0, 1}};
    for (auto& g : seq.snapshots) g.finalize();
    auto nl = build_eval_pairs(seq, 1, EvalTask::new_link, 3);
    REQUIRE_FALSE(nl[0].skipped);
    CHECK(nl[0].positives == std::vector<Edge>{{0, 1}});
}

TEST_CASE("eval pair sampling is seed-deterministic") {
    SnapshotSequence seq = synth_tree(40, 2.0, 5, 11);
    auto a = build_eval_pairs(seq, 2, EvalTask::link, 42);
    auto b = build_eval_pairs(seq, 2, EvalTask::link, 42);
    auto c = build_eval_pairs(seq, 2, EvalTask::link, 43);
    REQUIRE(a.size() == b.size());
    bool identical = true, differs = false;
    for (size_t i = 0; i < a.size(); ++i) {
        identical = identical && a[i].negatives == b[i].negatives;
        differs = differs || a[i].negatives != c[i].negatives;
    }
    CHECK(identical);
    CHECK(differs);
}

TEST_CASE("synth_tree structure") {
    // n = 3, T = 2: root + first child, then the second node
    SnapshotSequence small = synth_tree(3, 2.0, 2, 5);
    CHECK(small.T() == 2);
    CHECK(small.snapshots[0].edges.size() == 1);
    CHECK(small.snapshots[0].edges[0].first == 0);
    CHECK(small.snapshots[1].edges.size() == 1);

    // edge count across snapshots is n-1 and the union is acyclic (a tree)
    SnapshotSequence seq = synth_tree(57, 1.7, 6, 9);
    size_t total = 0;
    std::set<Edge> uni;
    for (const auto& g : seq.snapshots) {
        total += g.edges.size();
        uni.insert(g.edges.begin(), g.edges.end());
    }
    CHECK(total == 56);
    CHECK(uni.size() == 56);  // no edge repeats -> union of 56 edges on 57 nodes is a tree
    // connectivity: union-find over the union edge set
    std::vector<int> parent(57);
    for (int i = 0; i < 57; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    int merges = 0;
    for (const Edge& e : uni) {
        int a = find(e.first), b = find(e.second);
        if (a != b) {
            parent[a] = b;
            ++merges;
        }
    }
    CHECK(merges == 56);  // acyclic and connected

    CHECK_THROWS_AS(synth_tree(1, 2.0, 2, 1), std::invalid_argument);
}

TEST_CASE("synth_social hits its stat targets") {
    SnapshotSequence seq = synth_social(60, 8, 150, 90.0, 4);
    CHECK(seq.n == 60);
    CHECK(seq.T() == 8);
    std::set<Edge> uni;
    std::set<int> seen;
    long long instances = 0;
    for (const auto& g : seq.snapshots) {
        instances += static_cast<long long>(g.edges.size());
        for (const Edge& e : g.edges) {
            uni.insert(e);
            seen.insert(e.first);
            seen.insert(e.second);
        }
    }
    CHECK(uni.size() == 150);                      // backbone fully realized
    CHECK(static_cast<int>(seen.size()) == 60);    // every node appears
    CHECK(instances > 8 * 60);                     // recurrence actually happens
    CHECK(std::llabs(instances - 8 * 90) < 8 * 45);  // near the calibration target
}

TEST_CASE("dataset stats") {
    SnapshotSequence seq = synth_tree(30, 2.0, 5, 21);
    DatasetStats st = compute_stats(seq, "tree", 2);
    CHECK(st.n == 30);
    CHECK(st.T == 5);
    CHECK(st.total_edges == 29);
    CHECK_FALSE(st.density.has_value());
    CHECK_FALSE(st.hyperbolicity.has_value());
}
