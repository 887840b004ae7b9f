#pragma once

// Command-line entry point wiring the pipeline: fetch -> mine -> db ->
// match -> transform -> adapt -> select, plus inspection commands. All
// artifacts are canonical JSON, so identical inputs and seed give
// byte-identical outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nascur/adapt.hpp"
#include "nascur/characteristics.hpp"
#include "nascur/corpus.hpp"
#include "nascur/database.hpp"
#include "nascur/errors.hpp"
#include "nascur/harness.hpp"
#include "nascur/matching.hpp"
#include "nascur/miner.hpp"
#include "nascur/transform.hpp"

namespace nascur {

struct PipelineConfig {
    std::string corpus_dir;
    std::string db_path = "models.json";
    std::string manifest_path;
    int filter_threshold = 40;
    double gmeans_alpha = 1e-4;
    DropoutRates dropout_rates;
    std::string evaluator = "surrogate";
    double time_budget_s = 60.0;
    std::uint64_t seed = 0;
    int jobs = 1;
};

namespace detail {

inline void write_artifact(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errkind::bad_artifact, "cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline nlohmann::json read_artifact(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errkind::bad_artifact, "cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(errkind::bad_artifact, path.string() + ": " + e.what());
    }
    return j;
}

inline nlohmann::ordered_json candidates_to_json(const CandidateSet& cs, const ModelDatabase& db,
                                                 const DataCharacteristics& dc) {
    nlohmann::ordered_json j;
    j["dataset"] = characteristics_to_json(dc);
    j["cluster_count"] = cs.cluster_count;
    j["chosen_cluster"] = cs.chosen_cluster;
    j["channel_fallback"] = cs.channel_fallback;
    j["filtered"] = cs.filtered;
    j["candidates"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < cs.indices.size(); ++i) {
        const auto& rec = db.records[cs.indices[i]];
        nlohmann::ordered_json c;
        c["index"] = cs.indices[i];
        c["deltas"] = {{"di", cs.candidate_deltas[i].delta_i},
                       {"do", cs.candidate_deltas[i].delta_o},
                       {"ds", cs.candidate_deltas[i].delta_s}};
        c["model"] = ann_to_json(rec.ann);
        j["candidates"].push_back(std::move(c));
    }
    return j;
}

struct CandidateArtifact {
    DataCharacteristics dataset;
    std::vector<AbstractNeuralNetwork> models;
};

inline CandidateArtifact candidates_from_json(const nlohmann::json& j) {
    CandidateArtifact art;
    art.dataset = characteristics_from_json(j.at("dataset"));
    for (const auto& c : j.at("candidates")) art.models.push_back(ann_from_json(c.at("model")));
    return art;
}

inline void print_stats_table(const UsageStats& stats, std::ostream& os) {
    os << "activation (conv-attached)  count  share\n";
    const long total = stats.hidden_activation_total();
    for (const auto& [name, count] : stats.activation_counts) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-27s %6ld %6.2f%%\n", name.c_str(), count,
                      total ? 100.0 * static_cast<double>(count) / static_cast<double>(total)
                            : 0.0);
        os << line;
    }
    auto rates = [&](const char* title, const std::map<double, long>& m) {
        os << title << "\n";
        for (const auto& [rate, count] : m) {
            char line[128];
            std::snprintf(line, sizeof(line), "  %-8g %6ld\n", rate, count);
            os << line;
        }
    };
    rates("dropout rate (hidden layers)", stats.hidden_dropout_rate_counts);
    rates("dropout rate (fully connected)", stats.fc_dropout_rate_counts);
}

inline nlohmann::ordered_json selection_to_json(const SelectionReport& report) {
    nlohmann::ordered_json j;
    j["results"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < report.results.size(); ++i) {
        const auto& r = report.results[i];
        nlohmann::ordered_json e;
        e["index"] = i;
        e["failed"] = r.failed;
        if (r.failed) {
            e["error"] = r.error;
        } else {
            e["cost"] = r.cost;
            e["train_loss"] = r.train_loss;
        }
        e["params"] = r.params;
        e["depth"] = r.depth;
        j["results"].push_back(std::move(e));
    }
    j["best_index"] = report.best_index;
    j["dropout_kept"] = report.dropout_kept;
    if (report.dropout_result) {
        j["dropout_cost"] = report.dropout_result->failed
                                ? nlohmann::ordered_json(nullptr)
                                : nlohmann::ordered_json(report.dropout_result->cost);
    }
    j["best_model"] = ann_to_json(report.best.ann);
    j["best_optimizer"] = optimizer_to_json(report.best.optimizer);
    return j;
}

// Adapt every transformed candidate to the dataset; unadaptable ones are
// dropped with a note on stderr (kept out of artifacts for determinism).
inline std::vector<AdaptedModel> adapt_candidates(const std::vector<AbstractNeuralNetwork>& models,
                                                  const DataCharacteristics& dc,
                                                  std::vector<std::string>& notes) {
    std::vector<AdaptedModel> out;
    for (std::size_t i = 0; i < models.size(); ++i) {
        AdaptedModel m;
        try {
            m.ann = adapt_model(models[i], dc);
        } catch (const Error& e) {
            notes.push_back("candidate " + std::to_string(i) + " skipped: " + e.what());
            continue;
        }
        m.optimizer = adapt_optimizer(models[i].optimizer);
        m.characteristics = dc;
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace detail

inline int run_cli(int argc, char** argv) {
    CLI::App app{"mine, match, transform and adapt convolutional models for search warm-starts"};
    app.set_config("--config");
    bool as_json = false;
    app.add_flag("--json", as_json, "machine-readable output where applicable");

    PipelineConfig cfg;

    // fetch ------------------------------------------------------------
    auto* fetch = app.add_subcommand("fetch", "collect repository metadata by day queries");
    std::string fetch_start = "2015-01-01", fetch_end = "2020-12-31", fetch_out = "repos.json";
    std::string offline_dir, cache_dir, keyword = "keras";
    long top_n = 10000;
    fetch->add_option("--start", fetch_start, "first creation date (yyyy-mm-dd)");
    fetch->add_option("--end", fetch_end, "last creation date (yyyy-mm-dd)");
    fetch->add_option("--out", fetch_out, "output JSON path");
    fetch->add_option("--offline-dir", offline_dir, "fixture directory of {query}.json files");
    fetch->add_option("--cache", cache_dir, "response cache directory for live fetches");
    fetch->add_option("--top", top_n, "star-count cap applied after aggregation");
    fetch->add_option("--keyword", keyword, "search keyword");

    // mine -------------------------------------------------------------
    auto* mine = app.add_subcommand("mine", "extract models from a corpus of .py files");
    std::string mine_out = "models.json", mine_report;
    mine->add_option("--corpus", cfg.corpus_dir, "directory tree of source files")->required();
    mine->add_option("--out", mine_out, "database output path");
    mine->add_option("--report", mine_report, "mining report output path");
    mine->add_option("--jobs", cfg.jobs, "parallel workers for the corpus scan");

    // db ---------------------------------------------------------------
    auto* db_cmd = app.add_subcommand("db", "database inspection");
    auto* db_stats = db_cmd->add_subcommand("stats", "usage statistics over the database");
    std::string stats_db;
    db_stats->add_option("--db", stats_db, "database path")->required();

    // match ------------------------------------------------------------
    auto* match = app.add_subcommand("match", "select initial models for a dataset");
    std::string match_db, match_manifest, match_out = "candidates.json";
    match->add_option("--db", match_db, "database path")->required();
    match->add_option("--manifest", match_manifest, "dataset manifest or directory")->required();
    match->add_option("--out", match_out, "candidate set output path");
    match->add_option("--alpha", cfg.gmeans_alpha, "G-means significance level");
    match->add_option("--seed", cfg.seed, "clustering seed");
    match->add_option("--filter-threshold", cfg.filter_threshold,
                      "candidate count that triggers architecture filtering");

    // transform ----------------------------------------------------------
    auto* transform = app.add_subcommand("transform", "apply the pre-search transformations");
    std::string tr_in, tr_out = "transformed.json";
    bool with_dropout = false;
    transform->add_option("--in", tr_in, "candidates artifact")->required();
    transform->add_option("--out", tr_out, "output path");
    transform->add_flag("--with-dropout", with_dropout, "also apply the dropout rule");
    transform->add_option("--dropout-hidden", cfg.dropout_rates.hidden, "hidden-block rate");
    transform->add_option("--dropout-fc", cfg.dropout_rates.fc, "fully-connected rate");

    // adapt --------------------------------------------------------------
    auto* adapt_cmd = app.add_subcommand("adapt", "adapt one model to a dataset and emit source");
    std::string adapt_db, adapt_manifest, adapt_emit = "model_out.py";
    int adapt_id = 0;
    std::string dialect = "auto";
    adapt_cmd->add_option("--db", adapt_db, "database path")->required();
    adapt_cmd->add_option("--model", adapt_id, "record index in the database")->required();
    adapt_cmd->add_option("--manifest", adapt_manifest, "dataset manifest or directory")
        ->required();
    adapt_cmd->add_option("--emit", adapt_emit, "emitted source path");
    adapt_cmd->add_option("--dialect", dialect, "sequential|functional|auto")
        ->check(CLI::IsMember({"sequential", "functional", "auto"}));

    // select -------------------------------------------------------------
    auto* select = app.add_subcommand("select", "evaluate candidates and pick the best");
    std::string sel_in, sel_manifest, sel_out = "selection.json", sel_emit;
    select->add_option("--candidates", sel_in, "transformed candidates artifact")->required();
    select->add_option("--manifest", sel_manifest, "dataset manifest or directory")->required();
    select->add_option("--out", sel_out, "selection report path");
    select->add_option("--emit", sel_emit, "emit the winning model's source here");
    select->add_option("--seed", cfg.seed, "evaluation seed");
    select->add_option("--budget", cfg.time_budget_s, "total evaluation budget in seconds");
    select->add_option("--evaluator", cfg.evaluator, "surrogate or cmd:<command>");
    select->add_option("--workers", cfg.jobs, "parallel evaluations");
    select->add_option("--dropout-hidden", cfg.dropout_rates.hidden, "hidden-block rate");
    select->add_option("--dropout-fc", cfg.dropout_rates.fc, "fully-connected rate");

    // pipeline -----------------------------------------------------------
    auto* pipeline = app.add_subcommand("pipeline", "mine, match, transform, adapt and select");
    std::string pipe_out_dir = "out";
    pipeline->add_option("--corpus", cfg.corpus_dir, "directory tree of source files")
        ->required();
    pipeline->add_option("--manifest", cfg.manifest_path, "dataset manifest or directory")
        ->required();
    pipeline->add_option("--out-dir", pipe_out_dir, "artifact directory");
    pipeline->add_option("--seed", cfg.seed, "seed for clustering and evaluation");
    pipeline->add_option("--alpha", cfg.gmeans_alpha, "G-means significance level");
    pipeline->add_option("--filter-threshold", cfg.filter_threshold,
                         "candidate count that triggers architecture filtering");
    pipeline->add_option("--budget", cfg.time_budget_s, "evaluation budget in seconds");
    pipeline->add_option("--evaluator", cfg.evaluator, "surrogate or cmd:<command>");
    pipeline->add_option("--jobs", cfg.jobs, "parallel workers");
    pipeline->add_option("--dropout-hidden", cfg.dropout_rates.hidden, "hidden-block rate");
    pipeline->add_option("--dropout-fc", cfg.dropout_rates.fc, "fully-connected rate");

    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fetch) {
            std::vector<RepoMeta> repos;
            if (!offline_dir.empty()) {
                OfflineFetcher fetcher{std::filesystem::path(offline_dir)};
                repos = collect_repos(fetcher, Date::parse(fetch_start), Date::parse(fetch_end),
                                      top_n, keyword);
            } else {
                LiveFetcher fetcher(kSearchHost,
                                    cache_dir.empty()
                                        ? std::nullopt
                                        : std::optional<std::filesystem::path>(cache_dir));
                repos = collect_repos(fetcher, Date::parse(fetch_start), Date::parse(fetch_end),
                                      top_n, keyword);
            }
            detail::write_artifact(fetch_out, repos_to_json(repos));
            std::cout << "collected " << repos.size() << " repositories -> " << fetch_out
                      << "\n";
            return 0;
        }

        if (*mine) {
            auto output = mine_corpus(cfg.corpus_dir, LayerVocabulary::standard(), cfg.jobs);
            auto db = build_database(output.models, output.report);
            save_database(db, mine_out);
            if (!mine_report.empty())
                detail::write_artifact(mine_report, report_to_json(output.report));
            if (as_json) {
                std::cout << report_to_json(output.report).dump(2) << "\n";
            } else {
                const auto& r = output.report;
                std::cout << "programs scanned:   " << r.programs_scanned << "\n"
                          << "framework programs: " << r.framework_programs << "\n"
                          << "models extracted:   " << r.models_extracted << "\n"
                          << "complete models:    " << r.complete_models << "\n"
                          << "supported models:   " << r.supported_models << "\n"
                          << "deduplicated:       " << r.deduped_models << "\n";
            }
            return 0;
        }

        if (*db_stats) {
            auto db = load_database(stats_db);
            auto stats = compute_usage_stats(db);
            if (as_json)
                std::cout << stats_to_json(stats).dump(2) << "\n";
            else
                detail::print_stats_table(stats, std::cout);
            return 0;
        }

        if (*match) {
            auto db = load_database(match_db);
            auto dc = from_dataset(match_manifest);
            auto cs = select_initial(db, dc, {cfg.gmeans_alpha, cfg.seed});
            if (static_cast<int>(cs.indices.size()) > cfg.filter_threshold)
                cs = filter_most_used(cs, db, cfg.filter_threshold);
            detail::write_artifact(match_out, detail::candidates_to_json(cs, db, dc));
            std::cout << "selected " << cs.indices.size() << " initial models (cluster "
                      << cs.chosen_cluster << " of " << cs.cluster_count << ") -> " << match_out
                      << "\n";
            return 0;
        }

        if (*transform) {
            auto j = detail::read_artifact(tr_in);
            auto art = detail::candidates_from_json(j);
            nlohmann::ordered_json out = nlohmann::ordered_json::parse(j.dump());
            for (std::size_t i = 0; i < art.models.size(); ++i) {
                auto t = transform_pre_search(art.models[i]);
                if (with_dropout) t = apply_dropout(t, cfg.dropout_rates);
                t.optimizer = art.models[i].optimizer;
                t.provenance = art.models[i].provenance;
                out["candidates"][i]["model"] = ann_to_json(t);
            }
            detail::write_artifact(tr_out, out);
            std::cout << "transformed " << art.models.size() << " models -> " << tr_out << "\n";
            return 0;
        }

        if (*adapt_cmd) {
            auto db = load_database(adapt_db);
            if (adapt_id < 0 || adapt_id >= static_cast<int>(db.records.size()))
                throw Error(errkind::bad_artifact,
                            "no record " + std::to_string(adapt_id) + " in " + adapt_db);
            auto dc = from_dataset(adapt_manifest);
            AdaptedModel m;
            m.ann = adapt_model(transform_pre_search(db.records[adapt_id].ann), dc);
            m.optimizer = adapt_optimizer(db.records[adapt_id].ann.optimizer);
            m.characteristics = dc;
            Dialect d = dialect == "sequential"  ? Dialect::Sequential
                        : dialect == "functional" ? Dialect::Functional
                                                  : Dialect::Auto;
            std::ofstream out(adapt_emit, std::ios::binary);
            if (!out) throw Error(errkind::bad_artifact, "cannot write " + adapt_emit);
            out << emit_source(m, d);
            std::cout << "adapted record " << adapt_id << " -> " << adapt_emit << "\n";
            return 0;
        }

        if (*select) {
            auto art = detail::candidates_from_json(detail::read_artifact(sel_in));
            auto dc = from_dataset(sel_manifest);
            std::vector<std::string> notes;
            auto adapted = detail::adapt_candidates(art.models, dc, notes);
            for (const auto& n : notes) std::cerr << n << "\n";
            SearchConfig sc;
            sc.seed = cfg.seed;
            sc.time_budget_s = cfg.time_budget_s;
            sc.evaluator = cfg.evaluator;
            sc.workers = cfg.jobs;
            auto report = select_best(adapted, dc, sc, cfg.dropout_rates);
            detail::write_artifact(sel_out, detail::selection_to_json(report));
            if (!sel_emit.empty()) {
                std::ofstream out(sel_emit, std::ios::binary);
                out << emit_source(report.best);
            }
            std::cout << "best candidate " << report.best_index
                      << (report.dropout_kept ? " (with dropout)" : "") << " -> " << sel_out
                      << "\n";
            return 0;
        }

        if (*pipeline) {
            namespace fs = std::filesystem;
            fs::path dir = pipe_out_dir;
            fs::create_directories(dir);

            auto output = mine_corpus(cfg.corpus_dir, LayerVocabulary::standard(), cfg.jobs);
            auto db = build_database(output.models, output.report);
            save_database(db, dir / "models.json");
            detail::write_artifact(dir / "report.json", report_to_json(output.report));

            auto dc = from_dataset(cfg.manifest_path);
            auto cs = select_initial(db, dc, {cfg.gmeans_alpha, cfg.seed});
            if (static_cast<int>(cs.indices.size()) > cfg.filter_threshold)
                cs = filter_most_used(cs, db, cfg.filter_threshold);
            detail::write_artifact(dir / "candidates.json",
                                   detail::candidates_to_json(cs, db, dc));

            std::vector<AbstractNeuralNetwork> transformed;
            for (int idx : cs.indices) {
                auto t = transform_pre_search(db.records[idx].ann);
                t.optimizer = db.records[idx].ann.optimizer;
                t.provenance = db.records[idx].provenance;
                transformed.push_back(std::move(t));
            }
            {
                auto j = detail::read_artifact(dir / "candidates.json");
                nlohmann::ordered_json out = nlohmann::ordered_json::parse(j.dump());
                for (std::size_t i = 0; i < transformed.size(); ++i)
                    out["candidates"][i]["model"] = ann_to_json(transformed[i]);
                detail::write_artifact(dir / "transformed.json", out);
            }

            std::vector<std::string> notes;
            auto adapted = detail::adapt_candidates(transformed, dc, notes);
            for (const auto& n : notes) std::cerr << n << "\n";
            SearchConfig sc;
            sc.seed = cfg.seed;
            sc.time_budget_s = cfg.time_budget_s;
            sc.evaluator = cfg.evaluator;
            sc.workers = cfg.jobs;
            auto report = select_best(adapted, dc, sc, cfg.dropout_rates);
            detail::write_artifact(dir / "selection.json", detail::selection_to_json(report));
            {
                std::ofstream out(dir / "best_model.py", std::ios::binary);
                out << emit_source(report.best);
            }
            std::cout << "pipeline complete; artifacts in " << dir.string() << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    std::cout << app.help();
    return 2;
}

}  // namespace nascur
