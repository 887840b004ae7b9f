#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nascur/errors.hpp"
#include "nascur/literal.hpp"

namespace nascur {

// Canonical layer-kind names. Mined calls are mapped onto these, so two
// programs using different API spellings of the same layer compare equal.
namespace layer {
inline constexpr const char* conv = "Conv2D";
inline constexpr const char* linear = "linear";
inline constexpr const char* batch_norm = "BatchNorm2d";
inline constexpr const char* max_pool = "MaxPool2d";
inline constexpr const char* global_avg_pool = "GlobalAvgPool2d";
inline constexpr const char* flatten = "Flatten";
inline constexpr const char* dropout = "Dropout";
inline constexpr const char* concat = "concatenate";
inline constexpr const char* add = "add";
inline constexpr const char* relu = "relu";
inline constexpr const char* softmax = "softmax";
inline constexpr const char* tanh = "tanh";
inline constexpr const char* sigmoid = "sigmoid";
}  // namespace layer

// One node of the abstract network: an API call with literal arguments.
// Positional arguments are keyed argN. For layers with a channel slot
// (convolutional, linear, batch norm) arg1 is the incoming channel count
// and source positionals start at arg2; arg1 is filled in only when it
// can be derived from the upstream node, otherwise it is absent.
struct AbstractLayer {
    std::string func;
    std::map<int, Literal> positional_args;
    std::map<std::string, Literal> named_args;

    bool operator==(const AbstractLayer&) const = default;

    const Literal* positional(int n) const {
        auto it = positional_args.find(n);
        return it == positional_args.end() ? nullptr : &it->second;
    }
    const Literal* named(const std::string& key) const {
        auto it = named_args.find(key);
        return it == named_args.end() ? nullptr : &it->second;
    }
};

struct OptimizerSpec {
    std::string func;
    std::map<std::string, Literal> named_args;

    bool operator==(const OptimizerSpec&) const = default;
};

using Edge = std::pair<int, int>;

// Nodes are API calls, edges are the call-order / data-flow relation.
// Node indices are assigned in program order, so every edge satisfies
// from < to in practice, though only acyclicity is required.
struct AbstractNeuralNetwork {
    std::vector<AbstractLayer> nodes;
    std::vector<Edge> edges;
    std::optional<OptimizerSpec> optimizer;
    std::string provenance;
};

struct LayerVocabulary {
    std::set<std::string> supported_layers;
    std::set<std::string> supported_optimizers;
    std::set<std::string> trainable_layers;
    std::set<std::string> activation_layers;

    static LayerVocabulary standard() {
        LayerVocabulary v;
        v.supported_layers = {layer::conv,     layer::linear, layer::batch_norm,
                              layer::concat,   layer::add,    layer::max_pool,
                              layer::dropout,  layer::softmax, layer::relu,
                              layer::flatten,  layer::global_avg_pool};
        v.supported_optimizers = {"SGD",      "Adam",   "RMSprop", "Adagrad",
                                  "Adadelta", "Adamax", "Nadam"};
        v.trainable_layers = {layer::conv, layer::linear};
        v.activation_layers = {layer::relu, layer::softmax, layer::tanh, layer::sigmoid};
        return v;
    }
};

inline bool is_trainable(const std::string& func) {
    return func == layer::conv || func == layer::linear;
}

inline bool is_activation(const std::string& func) {
    static const std::set<std::string> known = {layer::relu, layer::softmax,
                                                layer::tanh, layer::sigmoid,
                                                "elu", "selu", "softplus", "softsign",
                                                "hard_sigmoid", "exponential", "swish",
                                                "gelu", "LeakyReLU", "PReLU", "ELU",
                                                "ThresholdedReLU"};
    return known.count(func) > 0;
}

// Layers whose framework signature leads with the incoming channel count.
inline bool has_channel_slot(const std::string& func) {
    return func == layer::conv || func == layer::linear || func == layer::batch_norm;
}

// ---------------------------------------------------------------------------
// Source-name mapping

namespace detail {

inline const std::map<std::string, std::string>& canonical_layer_names() {
    static const std::map<std::string, std::string> m = {
        {"Conv2D", layer::conv},
        {"Convolution2D", layer::conv},
        {"Dense", layer::linear},
        {"linear", layer::linear},
        {"Linear", layer::linear},
        {"BatchNormalization", layer::batch_norm},
        {"BatchNorm2d", layer::batch_norm},
        {"MaxPooling2D", layer::max_pool},
        {"MaxPool2D", layer::max_pool},
        {"MaxPool2d", layer::max_pool},
        {"GlobalAveragePooling2D", layer::global_avg_pool},
        {"GlobalAvgPool2d", layer::global_avg_pool},
        {"Flatten", layer::flatten},
        {"Dropout", layer::dropout},
        {"Dropout2d", layer::dropout},
        {"Add", layer::add},
        {"add", layer::add},
        {"Concatenate", layer::concat},
        {"concatenate", layer::concat},
        {"ReLU", layer::relu},
        {"relu", layer::relu},
        {"Softmax", layer::softmax},
        {"softmax", layer::softmax},
        {"Tanh", layer::tanh},
        {"tanh", layer::tanh},
        {"Sigmoid", layer::sigmoid},
        {"sigmoid", layer::sigmoid},
    };
    return m;
}

// Layer constructors recognized from the framework API but outside the
// supported vocabulary. They are extracted as-is so the supported-layer
// filter can reject the whole model.
inline const std::set<std::string>& recognized_unsupported_layers() {
    static const std::set<std::string> s = {
        "LSTM", "GRU", "SimpleRNN", "Embedding", "Bidirectional", "TimeDistributed",
        "ConvLSTM2D", "Conv1D", "Conv3D", "Conv2DTranspose", "SeparableConv2D",
        "DepthwiseConv2D", "LocallyConnected1D", "LocallyConnected2D",
        "AveragePooling1D", "AveragePooling2D", "AveragePooling3D",
        "MaxPooling1D", "MaxPooling3D", "GlobalMaxPooling1D", "GlobalMaxPooling2D",
        "GlobalAveragePooling1D", "UpSampling1D", "UpSampling2D", "UpSampling3D",
        "ZeroPadding1D", "ZeroPadding2D", "Cropping1D", "Cropping2D",
        "Reshape", "Permute", "RepeatVector", "Lambda", "Masking",
        "SpatialDropout1D", "SpatialDropout2D", "GaussianNoise", "GaussianDropout",
        "AlphaDropout", "ActivityRegularization", "LeakyReLU", "PReLU", "ELU",
        "ThresholdedReLU", "Multiply", "multiply", "Average", "average",
        "Subtract", "subtract", "Maximum", "maximum", "Minimum", "minimum",
        "Dot", "dot",
    };
    return s;
}

}  // namespace detail

// Maps a source callee name onto a canonical layer kind. Recognized but
// unsupported layer names map to themselves; unknown names map to nothing.
inline std::optional<std::string> map_layer_name(const std::string& name) {
    const auto& canon = detail::canonical_layer_names();
    if (auto it = canon.find(name); it != canon.end()) return it->second;
    if (detail::recognized_unsupported_layers().count(name)) return name;
    return std::nullopt;
}

inline bool is_layer_call_name(const std::string& name) {
    return name == "Activation" || map_layer_name(name).has_value();
}

// Maps an inline activation string ('relu', 'softmax', ...) onto an
// activation node kind. 'linear' and '' are the identity activation.
inline std::optional<std::string> map_activation_string(const std::string& s) {
    if (s.empty() || s == "linear") return std::nullopt;
    return s;
}

// ---------------------------------------------------------------------------
// Graph utilities

// Kahn topological order; empty result means the edge relation is cyclic.
inline std::vector<int> topological_order(const AbstractNeuralNetwork& ann) {
    const int n = static_cast<int>(ann.nodes.size());
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> out(n);
    for (const auto& [f, t] : ann.edges) {
        if (f < 0 || t < 0 || f >= n || t >= n) return {};
        out[f].push_back(t);
        ++indeg[t];
    }
    std::vector<int> order;
    order.reserve(n);
    std::vector<int> ready;
    for (int i = n - 1; i >= 0; --i)
        if (indeg[i] == 0) ready.push_back(i);
    while (!ready.empty()) {
        int v = ready.back();
        ready.pop_back();
        order.push_back(v);
        std::sort(out[v].begin(), out[v].end(), std::greater<int>());
        for (int w : out[v])
            if (--indeg[w] == 0) ready.push_back(w);
    }
    if (static_cast<int>(order.size()) != n) return {};
    return order;
}

inline std::vector<std::vector<int>> predecessors(const AbstractNeuralNetwork& ann) {
    std::vector<std::vector<int>> pred(ann.nodes.size());
    for (const auto& [f, t] : ann.edges) pred[t].push_back(f);
    return pred;
}

inline std::vector<std::vector<int>> successors(const AbstractNeuralNetwork& ann) {
    std::vector<std::vector<int>> succ(ann.nodes.size());
    for (const auto& [f, t] : ann.edges) succ[f].push_back(t);
    return succ;
}

// Output channel count per node, propagated along the graph; -1 where it
// cannot be derived statically (e.g. after Flatten, where the feature
// count depends on spatial dimensions).
inline std::vector<std::int64_t> channels_out(const AbstractNeuralNetwork& ann) {
    auto order = topological_order(ann);
    auto pred = predecessors(ann);
    std::vector<std::int64_t> ch(ann.nodes.size(), -1);
    for (int i : order) {
        const auto& node = ann.nodes[i];
        if (is_trainable(node.func)) {
            const Literal* units = node.positional(2);
            ch[i] = (units && is_int(*units)) ? std::get<std::int64_t>(*units) : -1;
        } else if (node.func == layer::concat) {
            std::int64_t sum = 0;
            bool ok = !pred[i].empty();
            for (int p : pred[i]) {
                if (ch[p] < 0) { ok = false; break; }
                sum += ch[p];
            }
            ch[i] = ok ? sum : -1;
        } else if (node.func == layer::add) {
            std::int64_t c = pred[i].empty() ? -1 : ch[pred[i].front()];
            for (int p : pred[i])
                if (ch[p] != c) c = -1;
            ch[i] = c;
        } else if (node.func == layer::flatten) {
            ch[i] = -1;
        } else {
            ch[i] = pred[i].size() == 1 ? ch[pred[i].front()] : -1;
        }
    }
    return ch;
}

// ---------------------------------------------------------------------------
// Normalization

// A parsed layer call, before normalization: callee as written in source
// plus its literal arguments in call order.
struct RawLayer {
    std::string callee;
    std::vector<Literal> positional;
    std::vector<std::pair<std::string, Literal>> named;
};

namespace detail {

inline AbstractLayer layer_from_raw(const RawLayer& raw) {
    AbstractLayer node;
    if (raw.callee == "Activation") {
        if (raw.positional.size() != 1 || !is_string(raw.positional[0]))
            throw Error(errkind::malformed_layer,
                        "Activation expects one string argument");
        auto mapped = map_activation_string(std::get<std::string>(raw.positional[0]));
        node.func = mapped ? *mapped : "";
        return node;
    }
    auto func = map_layer_name(raw.callee);
    if (!func)
        throw Error(errkind::malformed_layer, "unknown layer call: " + raw.callee);
    node.func = *func;
    const int base = has_channel_slot(node.func) ? 2 : 1;
    for (std::size_t k = 0; k < raw.positional.size(); ++k)
        node.positional_args[base + static_cast<int>(k)] = raw.positional[k];
    for (const auto& [key, value] : raw.named) node.named_args[key] = value;
    return node;
}

// Inline activation arguments become their own nodes immediately after
// the host layer; the host's outgoing edges move onto the new node.
inline void split_inline_activations(AbstractNeuralNetwork& ann) {
    for (std::size_t i = 0; i < ann.nodes.size(); ++i) {
        auto it = ann.nodes[i].named_args.find("activation");
        if (it == ann.nodes[i].named_args.end()) continue;
        if (!is_string(it->second))
            throw Error(errkind::malformed_layer,
                        "activation argument must be a string");
        auto mapped = map_activation_string(std::get<std::string>(it->second));
        ann.nodes[i].named_args.erase(it);
        if (!mapped) continue;

        const int host = static_cast<int>(i);
        const int act = host + 1;
        AbstractLayer act_node;
        act_node.func = *mapped;
        ann.nodes.insert(ann.nodes.begin() + act, act_node);
        for (auto& [f, t] : ann.edges) {
            if (f >= act) ++f;
            if (t >= act) ++t;
            if (f == host) f = act;  // host's consumers now read the activation
        }
        ann.edges.emplace_back(host, act);
    }
    std::sort(ann.edges.begin(), ann.edges.end());
}

// input_shape belongs to the input layer alone: when a convolutional
// node exists, every other node's copy is dropped (branches applied
// straight to the input would otherwise each carry one).
inline void repair_input_shape(AbstractNeuralNetwork& ann) {
    int first_conv = -1;
    for (std::size_t i = 0; i < ann.nodes.size(); ++i)
        if (ann.nodes[i].func == layer::conv) {
            first_conv = static_cast<int>(i);
            break;
        }
    if (first_conv < 0) return;
    for (std::size_t i = 0; i < ann.nodes.size(); ++i)
        if (static_cast<int>(i) != first_conv) ann.nodes[i].named_args.erase("input_shape");
}

// Fills arg1 (incoming channels) on channel-slot nodes where the value
// is derivable from the single upstream path. The first convolutional
// node never gets one: its channel count lives in input_shape.
inline void derive_channel_args(AbstractNeuralNetwork& ann) {
    auto ch = channels_out(ann);
    auto pred = predecessors(ann);
    for (std::size_t i = 0; i < ann.nodes.size(); ++i) {
        auto& node = ann.nodes[i];
        if (!has_channel_slot(node.func)) continue;
        if (node.positional_args.count(1)) continue;
        if (pred[i].size() != 1) continue;
        std::int64_t in = ch[pred[i].front()];
        if (in >= 0) node.positional_args[1] = in;
    }
}

}  // namespace detail

// Normalizes a graph of parsed layer calls into the abstract form:
// canonical layer kinds, activation arguments split into nodes,
// positional args keyed argN, derivable channel slots filled in.
inline AbstractNeuralNetwork normalize_graph(const std::vector<RawLayer>& raw_layers,
                                             std::vector<Edge> edges) {
    AbstractNeuralNetwork ann;
    ann.edges = std::move(edges);
    for (const auto& raw : raw_layers) ann.nodes.push_back(detail::layer_from_raw(raw));

    // An Activation('linear') call is the identity; drop the empty node.
    for (int i = static_cast<int>(ann.nodes.size()) - 1; i >= 0; --i) {
        if (!ann.nodes[i].func.empty()) continue;
        std::vector<int> in, out;
        for (const auto& [f, t] : ann.edges) {
            if (t == i) in.push_back(f);
            if (f == i) out.push_back(t);
        }
        std::vector<Edge> next;
        for (const auto& [f, t] : ann.edges)
            if (f != i && t != i) next.push_back({f, t});
        for (int f : in)
            for (int t : out) next.push_back({f, t});
        for (auto& [f, t] : next) {
            if (f > i) --f;
            if (t > i) --t;
        }
        ann.edges = std::move(next);
        ann.nodes.erase(ann.nodes.begin() + i);
    }

    detail::split_inline_activations(ann);
    detail::repair_input_shape(ann);
    detail::derive_channel_args(ann);
    std::sort(ann.edges.begin(), ann.edges.end());
    ann.edges.erase(std::unique(ann.edges.begin(), ann.edges.end()), ann.edges.end());
    return ann;
}

// Chain form: layer calls in program order, edges implied by call order.
inline AbstractNeuralNetwork normalize(const std::vector<RawLayer>& raw_layers) {
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < static_cast<int>(raw_layers.size()); ++i)
        edges.emplace_back(i, i + 1);
    return normalize_graph(raw_layers, std::move(edges));
}

// Re-runs the normalization passes over an already-built ANN. A fixpoint
// of this is the normal form every pipeline stage expects.
inline AbstractNeuralNetwork renormalize(AbstractNeuralNetwork ann) {
    detail::split_inline_activations(ann);
    detail::repair_input_shape(ann);
    detail::derive_channel_args(ann);
    std::sort(ann.edges.begin(), ann.edges.end());
    ann.edges.erase(std::unique(ann.edges.begin(), ann.edges.end()), ann.edges.end());
    return ann;
}

// Structural equality: node sequences and edge sets. Provenance and
// optimizer are deliberately excluded; duplicate detection keys on the
// architecture alone.
inline bool ann_equal(const AbstractNeuralNetwork& a, const AbstractNeuralNetwork& b) {
    if (a.nodes != b.nodes) return false;
    auto ea = a.edges, eb = b.edges;
    std::sort(ea.begin(), ea.end());
    std::sort(eb.begin(), eb.end());
    ea.erase(std::unique(ea.begin(), ea.end()), ea.end());
    eb.erase(std::unique(eb.begin(), eb.end()), eb.end());
    return ea == eb;
}

// Invariant check; returns human-readable violations (empty == valid).
inline std::vector<std::string> validate_ann(const AbstractNeuralNetwork& ann) {
    std::vector<std::string> bad;
    const int n = static_cast<int>(ann.nodes.size());
    for (int i = 0; i < n; ++i) {
        const auto& node = ann.nodes[i];
        if (node.func.empty()) bad.push_back("node " + std::to_string(i) + ": empty func");
        int expect = node.positional_args.count(1) || !has_channel_slot(node.func) ? 1 : 2;
        for (const auto& [k, v] : node.positional_args) {
            if (k != expect) {
                bad.push_back("node " + std::to_string(i) + ": positional arg gap at arg" +
                              std::to_string(expect));
                break;
            }
            ++expect;
        }
        if (node.named_args.count("activation"))
            bad.push_back("node " + std::to_string(i) + ": inline activation argument");
    }
    for (const auto& [f, t] : ann.edges) {
        if (f < 0 || t < 0 || f >= n || t >= n)
            bad.push_back("edge out of range");
        else if (f == t)
            bad.push_back("self edge at node " + std::to_string(f));
    }
    if (n > 0 && topological_order(ann).empty()) bad.push_back("edge relation is cyclic");

    int shape_holder = -1, first_conv = -1;
    for (int i = 0; i < n; ++i) {
        if (ann.nodes[i].named("input_shape")) {
            if (shape_holder >= 0) bad.push_back("multiple input_shape nodes");
            shape_holder = i;
        }
        if (first_conv < 0 && ann.nodes[i].func == layer::conv) first_conv = i;
    }
    if (shape_holder >= 0 && first_conv >= 0 && shape_holder != first_conv)
        bad.push_back("input_shape is not on the first convolutional node");
    return bad;
}

// ---------------------------------------------------------------------------
// Canonical JSON (the on-disk record format)
//
// Node key order follows the database record style: func, input_shape,
// argN ascending, remaining named args sorted. Floats are written with
// the shortest round-trip formatting, so 1e-06 persists as 1e-06.

inline nlohmann::ordered_json layer_to_json(const AbstractLayer& node) {
    nlohmann::ordered_json j;
    j["func"] = node.func;
    if (const Literal* shape = node.named("input_shape"))
        j["input_shape"] = literal_to_json(*shape);
    for (const auto& [k, v] : node.positional_args)
        j["arg" + std::to_string(k)] = literal_to_json(v);
    for (const auto& [k, v] : node.named_args)
        if (k != "input_shape") j[k] = literal_to_json(v);
    return j;
}

inline nlohmann::ordered_json optimizer_to_json(const OptimizerSpec& opt) {
    nlohmann::ordered_json j;
    j["func"] = opt.func;
    for (const auto& [k, v] : opt.named_args) j[k] = literal_to_json(v);
    return j;
}

inline nlohmann::ordered_json ann_to_json(const AbstractNeuralNetwork& ann) {
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& node : ann.nodes) j["nodes"].push_back(layer_to_json(node));
    j["edges"] = nlohmann::ordered_json::array();
    auto edges = ann.edges;
    std::sort(edges.begin(), edges.end());
    for (const auto& [f, t] : edges) j["edges"].push_back({f, t});
    j["optimizer"] = ann.optimizer ? optimizer_to_json(*ann.optimizer)
                                   : nlohmann::ordered_json(nullptr);
    j["provenance"] = ann.provenance;
    return j;
}

inline AbstractLayer layer_from_json(const nlohmann::json& j) {
    AbstractLayer node;
    for (const auto& [key, value] : j.items()) {
        if (key == "func") {
            node.func = value.get<std::string>();
        } else if (key.rfind("arg", 0) == 0 && key.size() > 3 &&
                   key.find_first_not_of("0123456789", 3) == std::string::npos) {
            node.positional_args[std::stoi(key.substr(3))] = literal_from_json(value);
        } else {
            node.named_args[key] = literal_from_json(value);
        }
    }
    if (node.func.empty())
        throw Error(errkind::bad_artifact, "layer record without func");
    return node;
}

inline OptimizerSpec optimizer_from_json(const nlohmann::json& j) {
    OptimizerSpec opt;
    for (const auto& [key, value] : j.items()) {
        if (key == "func")
            opt.func = value.get<std::string>();
        else
            opt.named_args[key] = literal_from_json(value);
    }
    if (opt.func.empty())
        throw Error(errkind::bad_artifact, "optimizer record without func");
    return opt;
}

inline AbstractNeuralNetwork ann_from_json(const nlohmann::json& j) {
    AbstractNeuralNetwork ann;
    for (const auto& node : j.at("nodes")) ann.nodes.push_back(layer_from_json(node));
    for (const auto& e : j.at("edges"))
        ann.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    if (j.contains("optimizer") && !j.at("optimizer").is_null())
        ann.optimizer = optimizer_from_json(j.at("optimizer"));
    if (j.contains("provenance")) ann.provenance = j.at("provenance").get<std::string>();
    auto bad = validate_ann(ann);
    if (!bad.empty()) throw Error(errkind::bad_artifact, bad.front());
    return ann;
}

}  // namespace nascur
