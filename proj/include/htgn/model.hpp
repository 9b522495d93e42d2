#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "htgn/data.hpp"
#include "htgn/hgnn.hpp"
#include "htgn/hgru.hpp"
#include "htgn/hta.hpp"
#include "htgn/loss.hpp"
#include "htgn/matrix.hpp"
#include "htgn/rng.hpp"

namespace htgn {

enum class Ablation { none, no_htc, no_hta, euclidean };

inline Ablation parse_ablation(const std::string& s) {
    if (s == "none") return Ablation::none;
    if (s == "no-htc") return Ablation::no_htc;
    if (s == "no-hta") return Ablation::no_hta;
    if (s == "euclidean") return Ablation::euclidean;
    throw std::invalid_argument("ablation: expected none|no-htc|no-hta|euclidean, got " + s);
}
inline std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_htc: return "no-htc";
        case Ablation::no_hta: return "no-hta";
        case Ablation::euclidean: return "euclidean";
    }
    return "none";
}

enum class BpttMode { truncated, full };

inline BpttMode parse_bptt(const std::string& s) {
    if (s == "truncated") return BpttMode::truncated;
    if (s == "full") return BpttMode::full;
    throw std::invalid_argument("bptt: expected truncated|full, got " + s);
}
inline std::string to_string(BpttMode b) {
    return b == BpttMode::truncated ? "truncated" : "full";
}

// Raw curvature parameter such that c = softplus(raw); raw for c = 1.
inline double curvature_raw_for(double c) { return std::log(std::exp(c) - 1.0); }
inline double curvature_from_raw(double raw) {
    return raw > 0.0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
}

// Every trainable tensor of the model. Fixed (identity/file) feature
// matrices are stored too but excluded from the parameter registry.
struct ModelParams {
    std::vector<HgnnParams> hgnn;  // one entry per layer
    HtaParams hta;
    HgruParams hgru;
    Matrix curvature_raw;  // 1x1
    Matrix features;       // n x d_in
    bool features_trainable = false;

    double curvature() const { return curvature_from_raw(curvature_raw(0, 0)); }

    // name -> tensor, in a stable order (drives the optimizer and the params file)
    std::vector<std::pair<std::string, Matrix*>> registry() {
        std::vector<std::pair<std::string, Matrix*>> r;
        for (size_t l = 0; l < hgnn.size(); ++l) {
            const std::string p = "hgnn" + std::to_string(l) + ".";
            r.emplace_back(p + "W", &hgnn[l].W);
            r.emplace_back(p + "b", &hgnn[l].b);
            r.emplace_back(p + "a", &hgnn[l].a);
        }
        r.emplace_back("hta.Q", &hta.Q);
        r.emplace_back("hta.r", &hta.r);
        r.emplace_back("hgru.Wz", &hgru.Wz);
        r.emplace_back("hgru.Wr", &hgru.Wr);
        r.emplace_back("hgru.Wh", &hgru.Wh);
        r.emplace_back("hgru.Uz", &hgru.Uz);
        r.emplace_back("hgru.Ur", &hgru.Ur);
        r.emplace_back("hgru.Uh", &hgru.Uh);
        r.emplace_back("curvature_raw", &curvature_raw);
        if (features_trainable) r.emplace_back("features", &features);
        return r;
    }

    bool all_finite() {
        for (auto& [name, m] : registry())
            if (!m->all_finite()) return false;
        return true;
    }
};

struct ModelMeta {
    int dim = 16;
    int window = 5;
    int hgnn_layers = 1;
    int hta_hidden = 0;  // 0 = same as dim
    double lambda = 0.5;
    Aggregation agg = Aggregation::attention;
    Ablation ablation = Ablation::none;
    FermiDiracParams fd;
    FeatureSpec features;
    bool hta_softmax_over_nodes = false;

    int hta_k() const { return hta_hidden > 0 ? hta_hidden : dim; }
};

inline ModelParams init_model(const SnapshotSequence& seq, const ModelMeta& meta,
                              uint64_t seed) {
    Rng rng(mix_seed(seed, "model-init"));
    ModelParams p;
    bool trainable = false;
    p.features = init_features(seq, meta.features, rng, &trainable);
    p.features_trainable = trainable;
    int d_in = p.features.cols;
    for (int l = 0; l < meta.hgnn_layers; ++l) {
        p.hgnn.push_back(HgnnParams::init(d_in, meta.dim, rng));
        d_in = meta.dim;
    }
    p.hta = HtaParams::init(meta.hta_k(), meta.dim, rng);
    p.hgru = HgruParams::init(meta.dim, rng);
    p.curvature_raw = Matrix(1, 1, curvature_raw_for(1.0));
    return p;
}

// ---------------------------------------------------------------------------
// params file: versioned text, shape headers, %.17g rows (round-trips exactly)
// ---------------------------------------------------------------------------

inline void save_params(const std::string& path, ModelParams& params,
                        const ModelMeta& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_params: cannot open " + path);
    char buf[64];
    out << "htgn-params v1\n";
    out << "meta dim " << meta.dim << "\n";
    out << "meta window " << meta.window << "\n";
    out << "meta hgnn_layers " << meta.hgnn_layers << "\n";
    out << "meta hta_hidden " << meta.hta_hidden << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", meta.lambda);
    out << "meta lambda " << buf << "\n";
    out << "meta agg " << (meta.agg == Aggregation::attention ? "attention" : "laplacian")
        << "\n";
    out << "meta ablation " << to_string(meta.ablation) << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", meta.fd.radius);
    out << "meta fd_radius " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", meta.fd.steepness);
    out << "meta fd_steepness " << buf << "\n";
    out << "meta features " << meta.features.to_string() << "\n";
    out << "meta hta_softmax_over_nodes " << (meta.hta_softmax_over_nodes ? 1 : 0) << "\n";
    for (auto& [name, m] : params.registry()) {
        out << "tensor " << name << " " << m->rows << " " << m->cols << "\n";
        for (int i = 0; i < m->rows; ++i) {
            for (int j = 0; j < m->cols; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", (*m)(i, j));
                out << (j ? " " : "") << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("save_params: write failed for " + path);
}

inline std::pair<ModelParams, ModelMeta> load_params(const std::string& path,
                                                     const SnapshotSequence& seq) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_params: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "htgn-params v1")
        throw std::runtime_error("load_params: bad header in " + path);

    ModelMeta meta;
    std::map<std::string, Matrix> tensors;
    std::vector<std::string> order;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key, val;
            ls >> key;
            ls >> std::ws;
            std::getline(ls, val);  // value may be a path containing spaces
            if (key == "dim") meta.dim = std::stoi(val);
            else if (key == "window") meta.window = std::stoi(val);
            else if (key == "hgnn_layers") meta.hgnn_layers = std::stoi(val);
            else if (key == "hta_hidden") meta.hta_hidden = std::stoi(val);
            else if (key == "lambda") meta.lambda = std::stod(val);
            else if (key == "agg") meta.agg = parse_aggregation(val);
            else if (key == "ablation") meta.ablation = parse_ablation(val);
            else if (key == "fd_radius") meta.fd.radius = std::stod(val);
            else if (key == "fd_steepness") meta.fd.steepness = std::stod(val);
            else if (key == "features") meta.features = FeatureSpec::parse(val);
            else if (key == "hta_softmax_over_nodes") meta.hta_softmax_over_nodes = val == "1";
            else throw std::runtime_error("load_params: unknown meta key " + key);
        } else if (tag == "tensor") {
            std::string name;
            int rows, cols;
            if (!(ls >> name >> rows >> cols))
                throw std::runtime_error("load_params: bad tensor header in " + path);
            Matrix m(rows, cols);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    if (!(in >> m(i, j)))
                        throw std::runtime_error("load_params: truncated tensor " + name);
            in.ignore();  // trailing newline
            tensors.emplace(name, std::move(m));
            order.push_back(name);
        } else {
            throw std::runtime_error("load_params: unexpected line: " + line);
        }
    }

    ModelParams p = init_model(seq, meta, 0);
    for (auto& [name, dst] : p.registry()) {
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw std::runtime_error("load_params: missing tensor " + name);
        if (!dst->same_shape(it->second))
            throw std::runtime_error("load_params: tensor " + name + " has shape " +
                                     shape_str(it->second) + ", expected " + shape_str(*dst));
        *dst = it->second;
    }
    return {std::move(p), meta};
}

}  // namespace htgn
