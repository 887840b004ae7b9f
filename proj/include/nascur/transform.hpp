#pragma once

// The four pre-defined transformation rules: batch normalization between
// convolutions and their activations, flatten to global average pooling,
// hidden activations to ReLU, and dropout after hidden / fully connected
// blocks. All rules are idempotent and leave the trainable-layer graph
// untouched. Dropout is deferred until after best-model selection.

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "nascur/ann.hpp"

namespace nascur {

struct DropoutRates {
    double hidden = 0.25;
    double fc = 0.5;
};

namespace detail {

// Splices a new node into an existing edge; the node lands at index
// from+1 and all other edges are remapped around it.
inline void insert_on_edge(AbstractNeuralNetwork& ann, Edge edge, AbstractLayer node) {
    const int pos = edge.first + 1;
    ann.nodes.insert(ann.nodes.begin() + pos, std::move(node));
    bool replaced = false;
    for (auto& [f, t] : ann.edges) {
        const bool was_target = f == edge.first && t == edge.second && !replaced;
        if (f >= pos) ++f;
        if (t >= pos) ++t;
        if (was_target) {
            t = pos;
            replaced = true;
        }
    }
    ann.edges.emplace_back(pos, edge.second >= pos ? edge.second + 1 : edge.second);
    std::sort(ann.edges.begin(), ann.edges.end());
}

// Appends a new node after `at`: all outgoing edges of `at` move onto
// the new node.
inline void insert_after(AbstractNeuralNetwork& ann, int at, AbstractLayer node) {
    const int pos = at + 1;
    ann.nodes.insert(ann.nodes.begin() + pos, std::move(node));
    for (auto& [f, t] : ann.edges) {
        if (f >= pos) ++f;
        if (t >= pos) ++t;
        if (f == at) f = pos;
    }
    ann.edges.emplace_back(at, pos);
    std::sort(ann.edges.begin(), ann.edges.end());
}

inline std::vector<char> reachable_from(const AbstractNeuralNetwork& ann, int start,
                                        bool forward) {
    std::vector<char> seen(ann.nodes.size(), 0);
    std::vector<int> stack{start};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (const auto& [f, t] : ann.edges) {
            int next = -1;
            if (forward && f == v) next = t;
            if (!forward && t == v) next = f;
            if (next >= 0 && !seen[next]) {
                seen[next] = 1;
                stack.push_back(next);
            }
        }
    }
    return seen;
}

inline std::optional<int> unique_successor(const AbstractNeuralNetwork& ann, int v) {
    int found = -1;
    for (const auto& [f, t] : ann.edges) {
        if (f != v) continue;
        if (found >= 0) return std::nullopt;
        found = t;
    }
    if (found < 0) return std::nullopt;
    return found;
}

}  // namespace detail

// Inserts a batch normalization node on every direct conv-to-activation
// edge. The BN node carries the convolution's out-channel count.
inline AbstractNeuralNetwork apply_bn(AbstractNeuralNetwork ann) {
    bool changed = true;
    while (changed) {
        changed = false;
        auto ch = channels_out(ann);
        for (const auto& e : ann.edges) {
            if (ann.nodes[e.first].func != layer::conv) continue;
            if (!is_activation(ann.nodes[e.second].func)) continue;
            AbstractLayer bn;
            bn.func = layer::batch_norm;
            if (ch[e.first] >= 0) bn.positional_args[1] = ch[e.first];
            detail::insert_on_edge(ann, e, std::move(bn));
            changed = true;
            break;
        }
    }
    return renormalize(std::move(ann));
}

// Replaces every Flatten with global average pooling, which ignores the
// input extent and so survives input-size adaptation.
inline AbstractNeuralNetwork apply_gap(AbstractNeuralNetwork ann) {
    for (auto& n : ann.nodes) {
        if (n.func != layer::flatten) continue;
        n.func = layer::global_avg_pool;
        n.positional_args.clear();
        n.named_args.clear();
    }
    // GAP makes downstream fan-ins derivable where Flatten did not;
    // restore the normal form.
    return renormalize(std::move(ann));
}

// Rewrites hidden activations (those downstream of a convolution and
// upstream of a trainable layer) to ReLU; the output activation stays.
inline AbstractNeuralNetwork apply_relu(AbstractNeuralNetwork ann) {
    const int n = static_cast<int>(ann.nodes.size());
    for (int i = 0; i < n; ++i) {
        if (!is_activation(ann.nodes[i].func)) continue;
        auto up = detail::reachable_from(ann, i, false);
        auto down = detail::reachable_from(ann, i, true);
        bool conv_above = false, trainable_below = false;
        for (int v = 0; v < n; ++v) {
            conv_above = conv_above || (up[v] && ann.nodes[v].func == layer::conv);
            trainable_below = trainable_below || (down[v] && is_trainable(ann.nodes[v].func));
        }
        if (conv_above && trainable_below) {
            ann.nodes[i].func = layer::relu;
            ann.nodes[i].positional_args.clear();
            ann.nodes[i].named_args.clear();
        }
    }
    return ann;
}

// Appends dropout after each hidden block (a convolution run with its
// batch norm / activation / max pooling tail) and after each
// fully-connected block except the output one. Blocks already ending in
// dropout are untouched.
inline AbstractNeuralNetwork apply_dropout(AbstractNeuralNetwork ann,
                                           const DropoutRates& rates = {}) {
    auto member_func = [](const std::string& f) {
        return f == layer::batch_norm || f == layer::max_pool || is_activation(f);
    };
    bool changed = true;
    while (changed) {
        changed = false;
        auto order = topological_order(ann);
        std::vector<char> absorbed(ann.nodes.size(), 0);

        for (int start : order) {
            if (absorbed[start]) continue;
            const bool conv_block = ann.nodes[start].func == layer::conv;
            const bool fc_block = ann.nodes[start].func == layer::linear;
            if (!conv_block && !fc_block) continue;

            int terminal = start;
            absorbed[start] = 1;
            if (conv_block) {
                // VGG-style stacks: consecutive convolutions share a block.
                while (auto next = detail::unique_successor(ann, terminal)) {
                    if (ann.nodes[*next].func != layer::conv) break;
                    terminal = *next;
                    absorbed[terminal] = 1;
                }
                while (auto next = detail::unique_successor(ann, terminal)) {
                    if (!member_func(ann.nodes[*next].func)) break;
                    terminal = *next;
                    absorbed[terminal] = 1;
                }
            } else {
                auto down = detail::reachable_from(ann, start, true);
                bool trainable_below = false;
                for (std::size_t v = 0; v < ann.nodes.size(); ++v)
                    trainable_below = trainable_below ||
                                      (down[v] && is_trainable(ann.nodes[v].func));
                if (!trainable_below) continue;  // the output block keeps no dropout
                while (auto next = detail::unique_successor(ann, terminal)) {
                    const auto& f = ann.nodes[*next].func;
                    if (f != layer::batch_norm && !is_activation(f)) break;
                    terminal = *next;
                    absorbed[terminal] = 1;
                }
            }

            bool has_dropout = false;
            for (const auto& [f, t] : ann.edges)
                if (f == terminal && ann.nodes[t].func == layer::dropout) has_dropout = true;
            if (has_dropout) continue;

            AbstractLayer drop;
            drop.func = layer::dropout;
            drop.positional_args[1] = conv_block ? rates.hidden : rates.fc;
            detail::insert_after(ann, terminal, std::move(drop));
            changed = true;
            break;
        }
    }
    return ann;
}

// Pre-search composition: activations first so BN insertion sees the
// final activation layers, then GAP, then BN. Dropout stays out until a
// best model has been selected.
inline AbstractNeuralNetwork transform_pre_search(AbstractNeuralNetwork ann) {
    return apply_bn(apply_gap(apply_relu(std::move(ann))));
}

// Post-selection dropout variant; the harness evaluates both and keeps
// whichever scores lower.
inline AbstractNeuralNetwork transform_post_selection(AbstractNeuralNetwork best,
                                                      const DropoutRates& rates = {}) {
    return apply_dropout(std::move(best), rates);
}

}  // namespace nascur
