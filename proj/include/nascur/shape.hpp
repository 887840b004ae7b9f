#pragma once

// Static shape trace along a model graph: channels and spatial extent
// per node, plus the parameter-count estimate built on top of it.
// Convolutions keep spatial extent (same-padding convention); pooling
// divides by the pool size and fails when the map would drop below 1x1.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "nascur/ann.hpp"
#include "nascur/characteristics.hpp"
#include "nascur/errors.hpp"

namespace nascur {

struct TraceEntry {
    std::int64_t channels = -1;  // -1 when unknown
    std::int64_t height = -1;
    std::int64_t width = -1;
    std::int64_t features = -1;  // flattened feature count where defined
};

namespace detail {

inline std::pair<std::int64_t, std::int64_t> pool_extent(const AbstractLayer& node) {
    const Literal* p = node.named("pool_size");
    if (!p) p = node.positional(1);
    if (p && is_int_list(*p)) {
        const auto& xs = std::get<IntList>(*p);
        if (xs.size() >= 2) return {xs[0], xs[1]};
        if (xs.size() == 1) return {xs[0], xs[0]};
    }
    if (p && is_int(*p)) {
        auto k = std::get<std::int64_t>(*p);
        return {k, k};
    }
    return {2, 2};  // framework default
}

inline std::pair<std::int64_t, std::int64_t> kernel_extent(const AbstractLayer& node) {
    const Literal* k = node.named("kernel_size");
    if (!k) k = node.positional(3);
    if (k && is_int_list(*k)) {
        const auto& xs = std::get<IntList>(*k);
        if (xs.size() >= 2) return {xs[0], xs[1]};
        if (xs.size() == 1) return {xs[0], xs[0]};
    }
    if (k && is_int(*k)) {
        auto v = std::get<std::int64_t>(*k);
        return {v, v};
    }
    return {1, 1};
}

}  // namespace detail

// Traces shapes from the given input characteristics (or the model's own
// input_shape when absent). Throws ShapeUnadaptable when pooling reduces
// the spatial extent below 1x1.
inline std::vector<TraceEntry> trace_shapes(
    const AbstractNeuralNetwork& ann,
    std::optional<DataCharacteristics> input = std::nullopt) {
    std::vector<TraceEntry> trace(ann.nodes.size());
    auto order = topological_order(ann);
    auto pred = predecessors(ann);

    std::optional<TraceEntry> source;
    if (input) {
        source = TraceEntry{input->input_channel, input->height, input->width, -1};
    } else {
        for (const auto& n : ann.nodes) {
            if (const Literal* s = n.named("input_shape"); s && is_int_list(*s)) {
                auto layout = split_input_shape(std::get<IntList>(*s));
                source = TraceEntry{layout.c, layout.h, layout.w, -1};
                break;
            }
        }
    }

    for (int i : order) {
        const auto& node = ann.nodes[i];
        TraceEntry in;
        if (pred[i].empty()) {
            if (source) in = *source;
        } else {
            in = trace[pred[i].front()];
            if (node.func == layer::concat) {
                std::int64_t sum = 0;
                bool known = true;
                for (int p : pred[i]) {
                    known = known && trace[p].channels >= 0;
                    if (known) sum += trace[p].channels;
                }
                in.channels = known ? sum : -1;
            }
        }
        TraceEntry out = in;
        if (node.func == layer::conv) {
            const Literal* units = node.positional(2);
            out.channels = units && is_int(*units) ? std::get<std::int64_t>(*units) : -1;
        } else if (node.func == layer::max_pool) {
            auto [ph, pw] = detail::pool_extent(node);
            if (in.height > 0 && in.width > 0 && ph > 0 && pw > 0) {
                out.height = in.height / ph;
                out.width = in.width / pw;
                if (out.height < 1 || out.width < 1)
                    throw Error(errkind::shape_unadaptable,
                                "pooling reduces the feature map below 1x1");
            }
        } else if (node.func == layer::global_avg_pool) {
            out.height = 1;
            out.width = 1;
            out.features = in.channels;
        } else if (node.func == layer::flatten) {
            if (in.channels > 0 && in.height > 0 && in.width > 0)
                out.features = in.channels * in.height * in.width;
            else
                out.features = -1;
            out.height = out.width = -1;
        } else if (node.func == layer::linear) {
            const Literal* units = node.positional(2);
            std::int64_t u = units && is_int(*units) ? std::get<std::int64_t>(*units) : -1;
            out.channels = u;
            out.features = u;
        }
        trace[i] = out;
    }
    return trace;
}

// Deterministic parameter-count estimate; unknown fan-ins count as 1 so
// the value stays comparable across models. Always at least 1.
inline std::int64_t parameter_count(const AbstractNeuralNetwork& ann) {
    std::vector<TraceEntry> trace;
    try {
        trace = trace_shapes(ann);
    } catch (const Error&) {
        trace.assign(ann.nodes.size(), TraceEntry{});
    }
    auto pred = predecessors(ann);
    std::int64_t source_channels = -1;
    for (const auto& n : ann.nodes)
        if (const Literal* s = n.named("input_shape"); s && is_int_list(*s)) {
            try {
                source_channels = split_input_shape(std::get<IntList>(*s)).c;
            } catch (const Error&) {
            }
            break;
        }
    std::int64_t total = 0;
    for (std::size_t i = 0; i < ann.nodes.size(); ++i) {
        const auto& node = ann.nodes[i];
        auto fan_in = [&]() -> std::int64_t {
            if (pred[i].empty()) return source_channels > 0 ? source_channels : 1;
            const auto& p = trace[pred[i].front()];
            if (node.func == layer::linear && p.features > 0) return p.features;
            if (p.channels > 0) return p.channels;
            return 1;
        };
        if (node.func == layer::conv) {
            auto [kh, kw] = detail::kernel_extent(node);
            const Literal* units = node.positional(2);
            std::int64_t out = units && is_int(*units) ? std::get<std::int64_t>(*units) : 1;
            total += fan_in() * out * kh * kw + out;
        } else if (node.func == layer::linear) {
            const Literal* units = node.positional(2);
            std::int64_t out = units && is_int(*units) ? std::get<std::int64_t>(*units) : 1;
            total += fan_in() * out + out;
        } else if (node.func == layer::batch_norm) {
            std::int64_t c = pred[i].empty() ? 1 : trace[pred[i].front()].channels;
            total += 2 * (c > 0 ? c : 1);
        }
    }
    return total > 0 ? total : 1;
}

}  // namespace nascur
