#pragma once

// Adaptation of a selected model to a target dataset: rewrite the input
// shape and output units, pick the training optimizer (mined when
// supported, configured default otherwise), and emit trainable source
// that the miner maps back onto the identical abstract network.

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nascur/ann.hpp"
#include "nascur/characteristics.hpp"
#include "nascur/errors.hpp"
#include "nascur/shape.hpp"

namespace nascur {

struct AdaptedModel {
    AbstractNeuralNetwork ann;
    OptimizerSpec optimizer;
    DataCharacteristics characteristics;
};

// Rewrites exactly two fields: the input node's input_shape (preserving
// the source's channel layout) and the output linear node's unit count.
// Shape-traces the result so impossible pooling stacks fail loudly.
inline AbstractNeuralNetwork adapt_model(AbstractNeuralNetwork ann,
                                         const DataCharacteristics& dc) {
    AbstractLayer* input = nullptr;
    AbstractLayer* output = nullptr;
    for (auto& n : ann.nodes) {
        if (!input && n.named("input_shape")) input = &n;
        if (n.func == layer::linear) output = &n;
    }
    if (!input)
        throw Error(errkind::missing_input_shape, "model has no input_shape to adapt");
    if (!output)
        throw Error(errkind::incomplete_model, "model has no output linear layer");

    const IntList& src = std::get<IntList>(input->named_args.at("input_shape"));
    IntList replacement;
    if (src.size() == 3 && split_input_shape(src).channel_first)
        replacement = {dc.input_channel, dc.height, dc.width};
    else if (src.size() == 2 && dc.input_channel == 1)
        replacement = {dc.height, dc.width};
    else
        replacement = {dc.height, dc.width, dc.input_channel};
    input->named_args["input_shape"] = replacement;
    output->positional_args[2] = dc.output_channel;

    trace_shapes(ann, dc);  // throws ShapeUnadaptable on pooling underflow
    return ann;
}

// Mined optimizer when supported; the configured default otherwise. The
// default stands in for the downstream search tool's own default.
inline OptimizerSpec default_optimizer() {
    OptimizerSpec opt;
    opt.func = "Adam";
    opt.named_args["lr"] = 0.001;
    return opt;
}

inline OptimizerSpec adapt_optimizer(const std::optional<OptimizerSpec>& mined,
                                     const LayerVocabulary& vocab = LayerVocabulary::standard(),
                                     const OptimizerSpec& fallback = default_optimizer()) {
    if (mined && vocab.supported_optimizers.count(mined->func)) return *mined;
    return fallback;
}

// ---------------------------------------------------------------------------
// Source emission

enum class Dialect { Auto, Sequential, Functional };

namespace detail {

inline bool is_chain(const AbstractNeuralNetwork& ann) {
    if (ann.edges.size() + 1 != ann.nodes.size() && !ann.nodes.empty())
        return ann.nodes.size() == 1 && ann.edges.empty();
    for (int i = 0; i + 1 < static_cast<int>(ann.nodes.size()); ++i)
        if (ann.edges[i] != Edge{i, i + 1}) return false;
    return true;
}

struct EmitSpec {
    std::string ctor;        // framework constructor name
    bool activation = false; // emitted as Activation('<func>')
};

inline EmitSpec emit_spec(const std::string& func) {
    if (func == layer::conv) return {"Conv2D"};
    if (func == layer::linear) return {"Dense"};
    if (func == layer::batch_norm) return {"BatchNormalization"};
    if (func == layer::max_pool) return {"MaxPooling2D"};
    if (func == layer::global_avg_pool) return {"GlobalAveragePooling2D"};
    if (func == layer::flatten) return {"Flatten"};
    if (func == layer::dropout) return {"Dropout"};
    if (func == layer::add) return {"Add"};
    if (func == layer::concat) return {"Concatenate"};
    if (is_activation(func)) return {"Activation", true};
    throw Error(errkind::unsupported_dialect, "no emission for layer kind: " + func);
}

// Renders a layer constructor call. The derived channel slot (arg1 on
// conv/linear/BN) is implicit in the framework signature and re-derived
// on the way back in.
inline std::string render_ctor(const AbstractLayer& node, bool include_input_shape) {
    EmitSpec spec = emit_spec(node.func);
    std::ostringstream out;
    out << spec.ctor << "(";
    bool first = true;
    auto sep = [&]() {
        if (!first) out << ", ";
        first = false;
    };
    if (spec.activation) {
        sep();
        out << "'" << node.func << "'";
    }
    const int base = has_channel_slot(node.func) ? 2 : 1;
    for (const auto& [k, v] : node.positional_args) {
        if (k < base) continue;
        sep();
        out << literal_to_source(v);
    }
    for (const auto& [k, v] : node.named_args) {
        if (k == "input_shape" && !include_input_shape) continue;
        sep();
        out << k << "=" << literal_to_source(v);
    }
    out << ")";
    return out.str();
}

inline std::string render_optimizer(const OptimizerSpec& opt) {
    std::ostringstream out;
    out << opt.func << "(";
    bool first = true;
    for (const auto& [k, v] : opt.named_args) {
        if (!first) out << ", ";
        first = false;
        out << k << "=" << literal_to_source(v);
    }
    out << ")";
    return out.str();
}

inline std::string import_block(const AbstractNeuralNetwork& ann, bool functional,
                                const std::optional<OptimizerSpec>& opt) {
    std::set<std::string> ctors;
    for (const auto& n : ann.nodes) ctors.insert(emit_spec(n.func).ctor);
    if (functional) ctors.insert("Input");
    std::ostringstream out;
    out << "from keras.models import " << (functional ? "Model" : "Sequential") << "\n";
    out << "from keras.layers import ";
    bool first = true;
    for (const auto& c : ctors) {
        if (!first) out << ", ";
        first = false;
        out << c;
    }
    out << "\n";
    if (opt) out << "from keras.optimizers import " << opt->func << "\n";
    return out.str();
}

inline std::string compile_line(const DataCharacteristics& dc,
                                const std::optional<OptimizerSpec>& opt) {
    std::ostringstream out;
    out << "model.compile(loss='"
        << (dc.task == Task::Regression ? "mse" : "categorical_crossentropy") << "'";
    if (opt) out << ", optimizer=" << render_optimizer(*opt);
    out << ")\n";
    return out.str();
}

}  // namespace detail

// Emits a model definition whose re-mined form is ann_equal to the input
// with the same optimizer. Chains emit in the sequential dialect; graphs
// with merge nodes need the functional one.
inline std::string emit_source(const AbstractNeuralNetwork& ann,
                               const std::optional<OptimizerSpec>& optimizer,
                               const DataCharacteristics& dc,
                               Dialect dialect = Dialect::Auto) {
    const bool chain = detail::is_chain(ann);
    if (dialect == Dialect::Auto) dialect = chain ? Dialect::Sequential : Dialect::Functional;
    if (dialect == Dialect::Sequential && !chain)
        throw Error(errkind::unsupported_dialect,
                    "model with skip connections needs the functional dialect");
    std::ostringstream out;

    if (dialect == Dialect::Sequential) {
        out << detail::import_block(ann, false, optimizer) << "\n";
        out << "model = Sequential()\n";
        for (const auto& n : ann.nodes)
            out << "model.add(" << detail::render_ctor(n, true) << ")\n";
        out << detail::compile_line(dc, optimizer);
        return out.str();
    }

    auto order = topological_order(ann);
    if (order.empty() && !ann.nodes.empty())
        throw Error(errkind::unsupported_dialect, "cyclic edge relation");
    int terminal = -1, terminals = 0;
    for (std::size_t i = 0; i < ann.nodes.size(); ++i) {
        bool has_out = false;
        for (const auto& [f, t] : ann.edges) has_out = has_out || f == static_cast<int>(i);
        if (!has_out) {
            terminal = static_cast<int>(i);
            ++terminals;
        }
    }
    if (terminals != 1)
        throw Error(errkind::unsupported_dialect, "functional emission needs one output node");

    out << detail::import_block(ann, true, optimizer) << "\n";
    const IntList* shape = nullptr;
    for (const auto& n : ann.nodes)
        if (const Literal* s = n.named("input_shape"); s && is_int_list(*s)) {
            shape = &std::get<IntList>(*s);
            break;
        }
    out << "inputs = Input(" << (shape ? "shape=" + literal_to_source(Literal{*shape}) : "")
        << ")\n";

    auto pred = predecessors(ann);
    for (int i : order) {
        out << "v" << i << " = " << detail::render_ctor(ann.nodes[i], false) << "(";
        auto in = pred[i];
        std::sort(in.begin(), in.end());
        if (in.empty()) {
            out << "inputs";
        } else if (in.size() == 1) {
            out << "v" << in[0];
        } else {
            out << "[";
            for (std::size_t k = 0; k < in.size(); ++k) {
                if (k) out << ", ";
                out << "v" << in[k];
            }
            out << "]";
        }
        out << ")\n";
    }
    out << "model = Model(inputs, v" << terminal << ")\n";
    out << detail::compile_line(dc, optimizer);
    return out.str();
}

inline std::string emit_source(const AdaptedModel& adapted, Dialect dialect = Dialect::Auto) {
    return emit_source(adapted.ann, adapted.optimizer, adapted.characteristics, dialect);
}

}  // namespace nascur
