#pragma once

// Initial-model selection: channel partition, G-means clustering over
// (delta_o, delta_s), closest-model distance, and the graph-similarity
// filter that reduces oversized candidate sets to the most used
// architecture.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nascur/database.hpp"
#include "nascur/gmeans.hpp"
#include "nascur/shape.hpp"

namespace nascur {

struct ClusterSet {
    std::vector<std::vector<int>> clusters;  // db record indices per cluster
    std::vector<Point2> feature_space;       // (delta_o, delta_s) per member, ordered
};

struct CandidateSet {
    std::vector<int> indices;                // db record indices, stable order
    std::vector<DeltaVector> candidate_deltas;
    int cluster_count = 0;
    int chosen_cluster = -1;
    bool channel_fallback = false;           // no record matched the input channel
    bool filtered = false;                   // the most-used-architecture filter ran
};

// Records whose input channel matches the dataset's; the piecewise
// distance is only defined over delta_i = 0.
inline std::pair<std::vector<int>, std::vector<int>> partition_by_channel(
    const ModelDatabase& db, const DataCharacteristics& dc) {
    std::pair<std::vector<int>, std::vector<int>> out;
    for (std::size_t k = 0; k < db.records.size(); ++k) {
        if (db.records[k].characteristics.input_channel == dc.input_channel)
            out.first.push_back(static_cast<int>(k));
        else
            out.second.push_back(static_cast<int>(k));
    }
    if (out.first.empty() && !db.records.empty())
        throw Error(errkind::no_channel_match,
                    "no model matches input channel " + std::to_string(dc.input_channel));
    return out;
}

struct GMeansConfig {
    double alpha = 1e-4;
    std::uint64_t seed = 0;
};

inline ClusterSet gmeans_cluster(const std::vector<Point2>& points,
                                 const GMeansConfig& cfg = {}) {
    ClusterSet cs;
    cs.feature_space = points;
    GMeansOptions opts;
    opts.alpha = cfg.alpha;
    opts.seed = cfg.seed;
    auto clustering = gmeans(points, opts);
    cs.clusters.assign(clustering.centers.size(), {});
    for (std::size_t i = 0; i < clustering.assignment.size(); ++i)
        cs.clusters[clustering.assignment[i]].push_back(static_cast<int>(i));
    return cs;
}

// Lexicographic argmin over (delta_o, delta_s); delta_o takes precedence.
// Ties resolve to the earliest candidate, so the result is stable under
// permutation up to that rule.
inline int closest_model(const std::vector<DeltaVector>& candidates) {
    if (candidates.empty())
        throw Error(errkind::empty_candidates, "no candidates to rank");
    int best = 0;
    for (int i = 1; i < static_cast<int>(candidates.size()); ++i) {
        const auto& a = candidates[i];
        const auto& b = candidates[best];
        if (a.delta_o < b.delta_o ||
            (a.delta_o == b.delta_o && a.delta_s < b.delta_s))
            best = i;
    }
    return best;
}

// N*: every model in the G-means cluster that contains the closest model.
// When no record matches the input channel, the set relaxes to the
// records with minimal delta_i and the same rule applies.
inline CandidateSet select_initial(const ModelDatabase& db, const DataCharacteristics& dc,
                                   const GMeansConfig& cfg = {}) {
    if (db.records.empty())
        throw Error(errkind::empty_candidates, "empty model database");

    CandidateSet out;
    std::vector<int> pool;
    try {
        pool = partition_by_channel(db, dc).first;
    } catch (const Error& e) {
        if (e.kind() != errkind::no_channel_match) throw;
        out.channel_fallback = true;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : db.records)
            best = std::min(best, std::abs(static_cast<double>(dc.input_channel -
                                                               r.characteristics.input_channel)));
        for (std::size_t k = 0; k < db.records.size(); ++k)
            if (std::abs(static_cast<double>(dc.input_channel -
                                             db.records[k].characteristics.input_channel)) == best)
                pool.push_back(static_cast<int>(k));
    }

    std::vector<Point2> points;
    std::vector<DeltaVector> pool_deltas;
    points.reserve(pool.size());
    for (int k : pool) {
        auto d = deltas(dc, db.records[k].characteristics);
        pool_deltas.push_back(d);
        points.push_back({d.delta_o, d.delta_s});
    }

    auto cs = gmeans_cluster(points, cfg);
    int closest = closest_model(pool_deltas);
    out.cluster_count = static_cast<int>(cs.clusters.size());
    for (std::size_t c = 0; c < cs.clusters.size(); ++c) {
        for (int member : cs.clusters[c]) {
            if (member == closest) {
                out.chosen_cluster = static_cast<int>(c);
                break;
            }
        }
        if (out.chosen_cluster >= 0) break;
    }
    for (int member : cs.clusters[out.chosen_cluster]) {
        out.indices.push_back(pool[member]);
        out.candidate_deltas.push_back(pool_deltas[member]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Architecture graphs and similarity

// Trainable-layer graph: vertices are convolutional/linear nodes in
// topological order; an edge joins two trainables connected by a path of
// non-trainable nodes; its weight is the upstream vertex's out-channels.
struct ArchGraph {
    std::vector<std::string> vertex_funcs;
    std::vector<std::int64_t> out_channels;        // per vertex
    std::map<std::pair<int, int>, double> weights;  // undirected, key ordered
};

inline ArchGraph arch_graph(const AbstractNeuralNetwork& ann) {
    ArchGraph g;
    auto order = topological_order(ann);
    std::vector<int> vertex_of(ann.nodes.size(), -1);
    for (int i : order) {
        if (!is_trainable(ann.nodes[i].func)) continue;
        vertex_of[i] = static_cast<int>(g.vertex_funcs.size());
        g.vertex_funcs.push_back(ann.nodes[i].func);
        const Literal* units = ann.nodes[i].positional(2);
        g.out_channels.push_back(units && is_int(*units) ? std::get<std::int64_t>(*units) : 1);
    }
    // Flow from each trainable source through non-trainable nodes.
    auto succ = successors(ann);
    for (std::size_t s = 0; s < ann.nodes.size(); ++s) {
        if (vertex_of[s] < 0) continue;
        std::vector<int> stack(succ[s].begin(), succ[s].end());
        std::vector<char> seen(ann.nodes.size(), 0);
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            if (seen[v]) continue;
            seen[v] = 1;
            if (vertex_of[v] >= 0) {
                int a = vertex_of[s], b = vertex_of[v];
                auto key = std::minmax(a, b);
                g.weights[{key.first, key.second}] =
                    static_cast<double>(g.out_channels[vertex_of[s]]);
                continue;
            }
            for (int w : succ[v]) stack.push_back(w);
        }
    }
    return g;
}

struct SimilarityMatrix {
    int rows = 0, cols = 0;
    std::vector<double> m;  // row-major
    double at(int i, int j) const { return m[static_cast<std::size_t>(i) * cols + j]; }
};

namespace detail {

inline double arch_weight(const ArchGraph& g, int p, int q) {
    auto key = std::minmax(p, q);
    auto it = g.weights.find({key.first, key.second});
    return it == g.weights.end() ? 0.0 : it->second;
}

inline double incident_norm(const ArchGraph& g, int v) {
    double s = 0;
    for (const auto& [e, w] : g.weights)
        if (e.first == v || e.second == v) s += w * w;
    return std::sqrt(s);
}

}  // namespace detail

// Cosine similarity between vertex neighborhoods. Common neighbors are
// aligned by topological vertex index; the denominators run over all
// edges incident to each vertex. Zero-norm vertices give a zero row.
inline SimilarityMatrix similarity_matrix(const ArchGraph& a, const ArchGraph& b) {
    SimilarityMatrix s;
    s.rows = static_cast<int>(a.vertex_funcs.size());
    s.cols = static_cast<int>(b.vertex_funcs.size());
    s.m.assign(static_cast<std::size_t>(s.rows) * s.cols, 0.0);
    const int common = std::min(s.rows, s.cols);
    for (int i = 0; i < s.rows; ++i) {
        const double ni = detail::incident_norm(a, i);
        for (int j = 0; j < s.cols; ++j) {
            const double nj = detail::incident_norm(b, j);
            if (ni <= 0 || nj <= 0) continue;
            double num = 0;
            for (int k = 0; k < common; ++k)
                num += detail::arch_weight(a, i, k) * detail::arch_weight(b, j, k);
            s.m[static_cast<std::size_t>(i) * s.cols + j] = num / (ni * nj);
        }
    }
    return s;
}

// Two architectures are equivalent when they have the same vertex count
// and every order-aligned diagonal similarity is 1. Non-trainable layers
// never participate, so dropout/activation variants share a class.
inline bool arch_equivalent(const ArchGraph& a, const ArchGraph& b, double eps = 1e-9) {
    if (a.vertex_funcs.size() != b.vertex_funcs.size()) return false;
    auto s = similarity_matrix(a, b);
    for (int i = 0; i < s.rows; ++i)
        if (std::abs(s.at(i, i) - 1.0) > eps) return false;
    return true;
}

// Over-threshold candidate sets shrink to the largest architecture-
// equivalence class; ties prefer the class with the smallest mean
// parameter count. At or below the threshold this is the identity.
inline CandidateSet filter_most_used(const CandidateSet& candidates, const ModelDatabase& db,
                                     int threshold = 40) {
    if (static_cast<int>(candidates.indices.size()) <= threshold) return candidates;

    std::vector<ArchGraph> graphs;
    graphs.reserve(candidates.indices.size());
    for (int idx : candidates.indices) graphs.push_back(arch_graph(db.records[idx].ann));

    std::vector<std::vector<int>> classes;  // positions into candidates
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        bool placed = false;
        for (auto& cls : classes) {
            if (arch_equivalent(graphs[cls.front()], graphs[i])) {
                cls.push_back(static_cast<int>(i));
                placed = true;
                break;
            }
        }
        if (!placed) classes.push_back({static_cast<int>(i)});
    }

    auto mean_params = [&](const std::vector<int>& cls) {
        double sum = 0;
        for (int p : cls)
            sum += static_cast<double>(parameter_count(db.records[candidates.indices[p]].ann));
        return sum / static_cast<double>(cls.size());
    };
    int best = 0;
    for (int c = 1; c < static_cast<int>(classes.size()); ++c) {
        if (classes[c].size() > classes[best].size() ||
            (classes[c].size() == classes[best].size() &&
             mean_params(classes[c]) < mean_params(classes[best])))
            best = c;
    }

    CandidateSet out = candidates;
    out.indices.clear();
    out.candidate_deltas.clear();
    out.filtered = true;
    for (int p : classes[best]) {
        out.indices.push_back(candidates.indices[p]);
        out.candidate_deltas.push_back(candidates.candidate_deltas[p]);
    }
    return out;
}

}  // namespace nascur
