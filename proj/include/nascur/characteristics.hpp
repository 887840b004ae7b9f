#pragma once

// Meta-feature derivation: input size, input channel and output channel,
// read either from a model's input/output layers, from a dataset
// manifest, or from an image directory (headers only, PNG and JPEG).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nascur/ann.hpp"
#include "nascur/errors.hpp"

namespace nascur {

enum class Task { Classification, Regression };

inline std::string task_name(Task t) {
    return t == Task::Classification ? "classification" : "regression";
}

inline Task task_from_name(const std::string& s) {
    if (s == "classification") return Task::Classification;
    if (s == "regression") return Task::Regression;
    throw Error(errkind::bad_artifact, "unknown task: " + s);
}

struct DataCharacteristics {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::int64_t input_channel = 0;   // 1 or 3
    std::int64_t output_channel = 0;  // class count; 1 for regression
    Task task = Task::Classification;

    bool operator==(const DataCharacteristics&) const = default;
};

inline nlohmann::ordered_json characteristics_to_json(const DataCharacteristics& dc) {
    nlohmann::ordered_json j;
    j["height"] = dc.height;
    j["width"] = dc.width;
    j["channels"] = dc.input_channel;
    j["num_classes"] = dc.output_channel;
    j["task"] = task_name(dc.task);
    return j;
}

inline DataCharacteristics characteristics_from_json(const nlohmann::json& j) {
    DataCharacteristics dc;
    dc.height = j.at("height").get<std::int64_t>();
    dc.width = j.at("width").get<std::int64_t>();
    dc.input_channel = j.at("channels").get<std::int64_t>();
    dc.output_channel = j.contains("num_classes") ? j.at("num_classes").get<std::int64_t>() : 1;
    dc.task = j.contains("task") ? task_from_name(j.at("task").get<std::string>())
                                 : Task::Classification;
    // Regression targets are numeric values: a single output channel.
    if (dc.task == Task::Regression) dc.output_channel = 1;
    if (dc.height < 1 || dc.width < 1 || dc.output_channel < 1 ||
        (dc.input_channel != 1 && dc.input_channel != 3))
        throw Error(errkind::bad_artifact, "manifest fields out of range");
    return dc;
}

// ---------------------------------------------------------------------------
// From a model

// Splits an input_shape into (h, w, c). Three-element shapes are
// channel-first [c,h,w] or channel-last [h,w,c], disambiguated by which
// end holds a 1 or 3; two-element shapes are grayscale [h,w].
struct ShapeLayout {
    std::int64_t h = 0, w = 0, c = 0;
    bool channel_first = false;
};

inline ShapeLayout split_input_shape(const IntList& shape) {
    auto channelish = [](std::int64_t v) { return v == 1 || v == 3; };
    if (shape.size() == 2) return {shape[0], shape[1], 1, false};
    if (shape.size() != 3)
        throw Error(errkind::ambiguous_shape,
                    "input_shape must have 2 or 3 entries");
    const bool first = channelish(shape[0]);
    const bool last = channelish(shape[2]);
    if (first == last)
        throw Error(errkind::ambiguous_shape,
                    "cannot tell channel-first from channel-last");
    if (first) return {shape[1], shape[2], shape[0], true};
    return {shape[0], shape[1], shape[2], false};
}

// Reads (h, w, i) from the input layer's input_shape and o from the
// output linear layer's unit argument.
inline DataCharacteristics from_model(const AbstractNeuralNetwork& ann) {
    const AbstractLayer* input = nullptr;
    const AbstractLayer* output = nullptr;
    for (const auto& n : ann.nodes) {
        if (!input && n.named("input_shape")) input = &n;
        if (n.func == layer::linear) output = &n;
    }
    if (!input || !is_int_list(*input->named("input_shape")))
        throw Error(errkind::missing_input_shape, "no input_shape on any node");
    if (!output || !output->positional(2) || !is_int(*output->positional(2)))
        throw Error(errkind::missing_input_shape, "no output linear layer with units");

    auto layout = split_input_shape(std::get<IntList>(*input->named("input_shape")));
    DataCharacteristics dc;
    dc.height = layout.h;
    dc.width = layout.w;
    dc.input_channel = layout.c;
    dc.output_channel = std::get<std::int64_t>(*output->positional(2));
    dc.task = dc.output_channel == 1 ? Task::Regression : Task::Classification;
    return dc;
}

// ---------------------------------------------------------------------------
// From a dataset

namespace detail {

struct ImageHeader {
    std::int64_t height = 0, width = 0, channels = 0;
};

inline std::optional<ImageHeader> read_png_header(const unsigned char* d, std::size_t n) {
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (n < 33) return std::nullopt;
    for (int i = 0; i < 8; ++i)
        if (d[i] != sig[i]) return std::nullopt;
    auto be32 = [&](std::size_t off) {
        return (std::int64_t(d[off]) << 24) | (std::int64_t(d[off + 1]) << 16) |
               (std::int64_t(d[off + 2]) << 8) | std::int64_t(d[off + 3]);
    };
    // First chunk must be IHDR: length(4) type(4) data(13).
    if (!(d[12] == 'I' && d[13] == 'H' && d[14] == 'D' && d[15] == 'R')) return std::nullopt;
    ImageHeader h;
    h.width = be32(16);
    h.height = be32(20);
    // Color type: 0 gray, 2 rgb, 3 palette, 4 gray+alpha, 6 rgb+alpha.
    switch (d[25]) {
        case 0: case 4: h.channels = 1; break;
        case 2: case 3: case 6: h.channels = 3; break;
        default: return std::nullopt;
    }
    return h;
}

inline std::optional<ImageHeader> read_jpeg_header(const unsigned char* d, std::size_t n) {
    if (n < 4 || d[0] != 0xFF || d[1] != 0xD8) return std::nullopt;
    std::size_t i = 2;
    while (i + 9 < n) {
        if (d[i] != 0xFF) return std::nullopt;
        unsigned char marker = d[i + 1];
        if (marker == 0xD8 || (marker >= 0xD0 && marker <= 0xD7)) { i += 2; continue; }
        std::size_t len = (std::size_t(d[i + 2]) << 8) | d[i + 3];
        // SOF0/1/2: baseline, extended sequential, progressive.
        if (marker == 0xC0 || marker == 0xC1 || marker == 0xC2) {
            ImageHeader h;
            h.height = (std::int64_t(d[i + 5]) << 8) | d[i + 6];
            h.width = (std::int64_t(d[i + 7]) << 8) | d[i + 8];
            h.channels = d[i + 9] == 1 ? 1 : 3;
            return h;
        }
        i += 2 + len;
    }
    return std::nullopt;
}

inline std::optional<ImageHeader> read_image_header(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    unsigned char buf[4096];
    in.read(reinterpret_cast<char*>(buf), sizeof(buf));
    auto n = static_cast<std::size_t>(in.gcount());
    if (auto h = read_png_header(buf, n)) return h;
    if (auto h = read_jpeg_header(buf, n)) return h;
    return std::nullopt;
}

}  // namespace detail

// Manifest file: {"height":H,"width":W,"channels":C,"num_classes":K,
// "task":"classification"|"regression"}.
inline DataCharacteristics from_manifest_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errkind::empty_dataset, "cannot open manifest: " + path.string());
    nlohmann::json j;
    in >> j;
    return characteristics_from_json(j);
}

// Image-directory mode: one subdirectory per class, sizes read from the
// first image header (sorted order), channel counts checked across all.
inline DataCharacteristics from_image_directory(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root))
        throw Error(errkind::empty_dataset, "not a directory: " + root.string());

    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty())
        throw Error(errkind::empty_dataset, "no class subdirectories in " + root.string());

    DataCharacteristics dc;
    dc.output_channel = static_cast<std::int64_t>(class_dirs.size());
    dc.task = Task::Classification;
    bool seen = false;
    for (const auto& dir : class_dirs) {
        std::vector<fs::path> images;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file()) images.push_back(e.path());
        std::sort(images.begin(), images.end());
        for (const auto& img : images) {
            auto h = detail::read_image_header(img);
            if (!h) continue;
            if (!seen) {
                dc.height = h->height;
                dc.width = h->width;
                dc.input_channel = h->channels;
                seen = true;
            } else if (h->channels != dc.input_channel) {
                throw Error(errkind::inconsistent_images,
                            "mixed channel counts under " + root.string());
            }
        }
    }
    if (!seen)
        throw Error(errkind::empty_dataset, "no readable images under " + root.string());
    return dc;
}

// Dispatcher: a manifest file path or a dataset directory.
inline DataCharacteristics from_dataset(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) return from_image_directory(path);
    return from_manifest_file(path);
}

// The delta features of the matching equations.
struct DeltaVector {
    double delta_i = 0;  // |i - i_k|
    double delta_o = 0;  // |o - o_k|
    double delta_s = 0;  // sqrt((w - w_k)^2 + (h - h_k)^2)
};

inline DeltaVector deltas(const DataCharacteristics& dataset,
                          const DataCharacteristics& model) {
    DeltaVector d;
    d.delta_i = std::abs(static_cast<double>(dataset.input_channel - model.input_channel));
    d.delta_o = std::abs(static_cast<double>(dataset.output_channel - model.output_channel));
    const double dw = static_cast<double>(dataset.width - model.width);
    const double dh = static_cast<double>(dataset.height - model.height);
    d.delta_s = std::sqrt(dw * dw + dh * dh);
    return d;
}

}  // namespace nascur
