#pragma once

// Persisted model collection. Records are deduplicated, complete and
// supported; each carries the model's own data characteristics and its
// provenance. The JSON form is canonical: fixed key order and shortest
// round-trip float formatting, so save/load is byte-stable.

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nascur/ann.hpp"
#include "nascur/characteristics.hpp"
#include "nascur/errors.hpp"
#include "nascur/miner.hpp"

namespace nascur {

struct ModelRecord {
    AbstractNeuralNetwork ann;
    DataCharacteristics characteristics;
    std::string provenance;
};

struct ModelDatabase {
    static constexpr const char* schema_version = "1";
    std::vector<ModelRecord> records;
};

// Appends unless an equal architecture already exists. Returns false on
// the duplicate no-op.
inline bool insert(ModelDatabase& db, const AbstractNeuralNetwork& ann,
                   const DataCharacteristics& characteristics, const std::string& provenance,
                   const LayerVocabulary& vocab = LayerVocabulary::standard()) {
    if (!is_complete(ann))
        throw Error(errkind::incomplete_model, "model lacks input/activation/output layers");
    if (!is_supported(ann, vocab))
        throw Error(errkind::unsupported_model, "model uses layers outside the vocabulary");
    for (const auto& r : db.records)
        if (ann_equal(r.ann, ann)) return false;
    ModelRecord rec;
    rec.ann = ann;
    rec.characteristics = characteristics;
    rec.provenance = provenance.empty() ? ann.provenance : provenance;
    db.records.push_back(std::move(rec));
    return true;
}

// ---------------------------------------------------------------------------
// Usage statistics

struct UsageStats {
    // Activation nodes whose predecessor is a convolutional node.
    std::map<std::string, long> activation_counts;
    // Dropout rates keyed by position relative to the flatten/GAP
    // boundary: before it is hidden, after it is fully connected.
    std::map<double, long> hidden_dropout_rate_counts;
    std::map<double, long> fc_dropout_rate_counts;

    long hidden_activation_total() const {
        long t = 0;
        for (const auto& [k, v] : activation_counts) t += v;
        return t;
    }
};

inline UsageStats compute_usage_stats(const ModelDatabase& db) {
    UsageStats stats;
    for (const auto& rec : db.records) {
        const auto& ann = rec.ann;
        auto pred = predecessors(ann);
        auto order = topological_order(ann);
        std::vector<int> position(ann.nodes.size(), 0);
        for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = static_cast<int>(k);

        int boundary = std::numeric_limits<int>::max();
        for (std::size_t i = 0; i < ann.nodes.size(); ++i) {
            const auto& f = ann.nodes[i].func;
            if (f == layer::flatten || f == layer::global_avg_pool)
                boundary = std::min(boundary, position[i]);
        }
        for (std::size_t i = 0; i < ann.nodes.size(); ++i) {
            const auto& node = ann.nodes[i];
            if (is_activation(node.func)) {
                bool after_conv = false;
                for (int p : pred[i]) after_conv = after_conv || ann.nodes[p].func == layer::conv;
                if (after_conv) stats.activation_counts[node.func]++;
            }
            if (node.func == layer::dropout) {
                const Literal* rate = node.positional(1);
                if (!rate) rate = node.named("rate");
                if (!rate) continue;
                double r = is_float(*rate) ? std::get<double>(*rate)
                                           : static_cast<double>(std::get<std::int64_t>(*rate));
                if (position[i] < boundary)
                    stats.hidden_dropout_rate_counts[r]++;
                else
                    stats.fc_dropout_rate_counts[r]++;
            }
        }
    }
    return stats;
}

inline nlohmann::ordered_json stats_to_json(const UsageStats& s) {
    nlohmann::ordered_json j;
    j["activation_counts"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s.activation_counts) j["activation_counts"][k] = v;
    auto rates = [](const std::map<double, long>& m) {
        nlohmann::ordered_json o = nlohmann::ordered_json::object();
        for (const auto& [k, v] : m) o[nlohmann::ordered_json(k).dump()] = v;
        return o;
    };
    j["hidden_dropout_rate_counts"] = rates(s.hidden_dropout_rate_counts);
    j["fc_dropout_rate_counts"] = rates(s.fc_dropout_rate_counts);
    return j;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::ordered_json database_to_json(const ModelDatabase& db) {
    nlohmann::ordered_json j;
    j["version"] = ModelDatabase::schema_version;
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& rec : db.records) {
        nlohmann::ordered_json r = ann_to_json(rec.ann);
        r.erase("provenance");
        r["characteristics"] = characteristics_to_json(rec.characteristics);
        r["provenance"] = rec.provenance;
        j["records"].push_back(std::move(r));
    }
    return j;
}

inline ModelDatabase database_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version").get<std::string>() != ModelDatabase::schema_version)
        throw Error(errkind::bad_artifact, "unknown database schema version");
    ModelDatabase db;
    for (const auto& r : j.at("records")) {
        ModelRecord rec;
        rec.ann = ann_from_json(r);
        rec.characteristics = characteristics_from_json(r.at("characteristics"));
        rec.provenance = r.at("provenance").get<std::string>();
        rec.ann.provenance = rec.provenance;
        db.records.push_back(std::move(rec));
    }
    return db;
}

inline void save_database(const ModelDatabase& db, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errkind::bad_artifact, "cannot write " + path.string());
    out << database_to_json(db).dump(2) << "\n";
}

inline ModelDatabase load_database(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errkind::bad_artifact, "cannot read " + path.string());
    nlohmann::json j;
    in >> j;
    return database_from_json(j);
}

// Builds a database from mining survivors: each model's characteristics
// must be derivable, otherwise the record is dropped with a diagnostic.
inline ModelDatabase build_database(const std::vector<AbstractNeuralNetwork>& models,
                                    MiningReport& report,
                                    const LayerVocabulary& vocab = LayerVocabulary::standard()) {
    ModelDatabase db;
    for (const auto& m : models) {
        try {
            DataCharacteristics dc = from_model(m);
            insert(db, m, dc, m.provenance, vocab);
        } catch (const Error& e) {
            report.diagnostics.push_back({m.provenance, e.what()});
        }
    }
    return db;
}

}  // namespace nascur
