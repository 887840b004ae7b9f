#pragma once

// Candidate selection loop: evaluate every adapted candidate within the
// time budget, pick the lowest-cost one, then let the dropout variant
// compete against it. Evaluation is pluggable: a deterministic surrogate
// for desk runs, or an external command speaking a JSON stdin/stdout
// protocol for real trainers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nascur/adapt.hpp"
#include "nascur/characteristics.hpp"
#include "nascur/errors.hpp"
#include "nascur/shape.hpp"
#include "nascur/transform.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace nascur {

// Published surrogate cost model (v1): weighted size, depth and
// meta-feature mismatch terms, an optional dropout adjustment, and a
// seeded jitter. All terms are documented in the README so tests can pin
// exact values.
struct SurrogateConfig {
    double size_weight = 0.05;      // * log10(1 + params)
    double depth_weight = 0.01;     // * node count
    double mismatch_weight = 0.3;   // * normalized (di, do, ds) mismatch
    double dropout_effect = -0.005; // added once when any dropout node exists
    double jitter_scale = 0.001;    // * seeded hash in [0,1)
};

struct SearchConfig {
    double time_budget_s = 60.0;
    std::string evaluator = "surrogate";  // "surrogate" or "cmd:<shell command>"
    std::uint64_t seed = 0;
    double val_split = 0.2;
    int workers = 1;
    SurrogateConfig surrogate;
};

struct EvaluationResult {
    double cost = 0;
    double train_loss = 0;
    std::int64_t params = 1;
    int depth = 1;
    double wall_time_s = 0;
    bool failed = false;
    std::string error;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline double seeded_unit(const std::string& key, std::uint64_t seed) {
    std::uint64_t h = fnv1a(key);
    h ^= seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 1099511628211ULL;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

inline EvaluationResult evaluate_surrogate(const AdaptedModel& candidate,
                                           const DataCharacteristics& dataset,
                                           std::uint64_t seed,
                                           const SurrogateConfig& cfg = {}) {
    EvaluationResult r;
    r.params = parameter_count(candidate.ann);
    r.depth = static_cast<int>(candidate.ann.nodes.size());

    DeltaVector d{};
    try {
        d = deltas(dataset, from_model(candidate.ann));
    } catch (const Error&) {
        d = {1.0, 1.0, 1.0};  // unknown characteristics count as mismatch
    }
    const double mismatch = (d.delta_i / (1.0 + d.delta_i) + d.delta_o / (1.0 + d.delta_o) +
                             d.delta_s / (1.0 + d.delta_s)) /
                            3.0;
    bool has_dropout = false;
    for (const auto& n : candidate.ann.nodes)
        has_dropout = has_dropout || n.func == layer::dropout;

    double cost = cfg.size_weight * std::log10(1.0 + static_cast<double>(r.params)) +
                  cfg.depth_weight * static_cast<double>(r.depth) +
                  cfg.mismatch_weight * mismatch +
                  (has_dropout ? cfg.dropout_effect : 0.0);
    if (cfg.jitter_scale != 0) {
        auto j = ann_to_json(candidate.ann);
        j.erase("provenance");
        cost += cfg.jitter_scale * detail::seeded_unit(j.dump(), seed);
    }
    r.cost = std::max(0.0, cost);
    r.train_loss = 1.5 * r.cost + 0.05;
    r.wall_time_s = 1e-3 * static_cast<double>(r.depth);  // simulated, deterministic
    return r;
}

// ---------------------------------------------------------------------------
// External evaluator: job JSON on the child's stdin, result JSON on its
// stdout. Nonzero exit or malformed output is an EvaluatorFailure; a
// deadline overrun is a BudgetExceeded failure.

inline EvaluationResult evaluate_external(const std::string& command,
                                          const AdaptedModel& candidate,
                                          const DataCharacteristics& dataset,
                                          std::uint64_t seed, double budget_s) {
    EvaluationResult r;
    r.params = parameter_count(candidate.ann);
    r.depth = static_cast<int>(candidate.ann.nodes.size());

    nlohmann::ordered_json job;
    job["model_source"] = emit_source(candidate.ann, candidate.optimizer, dataset);
    job["manifest"] = characteristics_to_json(dataset);
    job["seed"] = seed;
    job["budget_s"] = budget_s;
    const std::string job_text = job.dump();

    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
        throw Error(errkind::evaluator_failure, "pipe() failed");
    pid_t pid = fork();
    if (pid < 0) throw Error(errkind::evaluator_failure, "fork() failed");
    if (pid == 0) {
        setpgid(0, 0);  // own process group, so a timeout kill reaps grandchildren
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);

    const auto start = std::chrono::steady_clock::now();
    auto remaining_ms = [&]() {
        const double used =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return static_cast<int>(std::max(0.0, (budget_s - used) * 1000.0));
    };

    // The job is small; write it whole, then drain the child's stdout.
    ssize_t written = write(in_pipe[1], job_text.data(), job_text.size());
    (void)written;
    close(in_pipe[1]);

    std::string output;
    char buf[4096];
    bool timed_out = false;
    while (true) {
        struct pollfd pfd{out_pipe[0], POLLIN, 0};
        int pr = poll(&pfd, 1, std::max(1, remaining_ms()));
        if (pr == 0) {
            timed_out = true;
            break;
        }
        ssize_t got = read(out_pipe[0], buf, sizeof(buf));
        if (got <= 0) break;
        output.append(buf, static_cast<std::size_t>(got));
        if (remaining_ms() == 0) {
            timed_out = true;
            break;
        }
    }
    close(out_pipe[0]);
    if (timed_out) {
        kill(-pid, SIGKILL);
        kill(pid, SIGKILL);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    r.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (timed_out) {
        r.failed = true;
        r.error = errkind::budget_exceeded;
        return r;
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        r.failed = true;
        r.error = errkind::evaluator_failure;
        return r;
    }
    try {
        auto res = nlohmann::json::parse(output);
        r.cost = res.at("cost").get<double>();
        r.train_loss = res.value("train_loss", 0.0);
        if (res.contains("wall_time_s")) r.wall_time_s = res.at("wall_time_s").get<double>();
    } catch (const std::exception&) {
        r.failed = true;
        r.error = errkind::evaluator_failure;
        return r;
    }
    if (r.cost < 0) {
        r.failed = true;
        r.error = errkind::evaluator_failure;
    }
    return r;
}

inline EvaluationResult evaluate(const AdaptedModel& candidate,
                                 const DataCharacteristics& dataset,
                                 const SearchConfig& config, double budget_share) {
    if (config.evaluator == "surrogate")
        return evaluate_surrogate(candidate, dataset, config.seed, config.surrogate);
    if (config.evaluator.rfind("cmd:", 0) == 0)
        return evaluate_external(config.evaluator.substr(4), candidate, dataset, config.seed,
                                 budget_share);
    throw Error(errkind::evaluator_failure, "unknown evaluator: " + config.evaluator);
}

// ---------------------------------------------------------------------------
// Selection

struct SelectionReport {
    std::vector<EvaluationResult> results;  // one per candidate, index-aligned
    int best_index = -1;
    bool dropout_kept = false;
    std::optional<EvaluationResult> dropout_result;
    AdaptedModel best;
};

// Argmin of cost over all candidates (stable tiebreak: params, then
// index), then the post-selection dropout comparison keeps whichever
// variant scores lower. The budget splits into equal per-candidate
// shares; the dropout pass reuses one share.
inline SelectionReport select_best(const std::vector<AdaptedModel>& candidates,
                                   const DataCharacteristics& dataset,
                                   const SearchConfig& config,
                                   const DropoutRates& rates = {}) {
    if (candidates.empty())
        throw Error(errkind::empty_candidates, "no candidates to evaluate");
    const double share = config.time_budget_s / static_cast<double>(candidates.size() + 1);

    SelectionReport report;
    report.results.resize(candidates.size());
    if (config.workers > 1) {
        std::vector<std::future<EvaluationResult>> futs;
        futs.reserve(candidates.size());
        for (const auto& c : candidates)
            futs.push_back(std::async(std::launch::async, [&, share]() {
                return evaluate(c, dataset, config, share);
            }));
        for (std::size_t i = 0; i < futs.size(); ++i) report.results[i] = futs[i].get();
    } else {
        for (std::size_t i = 0; i < candidates.size(); ++i)
            report.results[i] = evaluate(candidates[i], dataset, config, share);
    }

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& r = report.results[i];
        if (r.failed) continue;
        if (report.best_index < 0) {
            report.best_index = static_cast<int>(i);
            continue;
        }
        const auto& b = report.results[report.best_index];
        if (r.cost < b.cost || (r.cost == b.cost && r.params < b.params))
            report.best_index = static_cast<int>(i);
    }
    if (report.best_index < 0) {
        bool any_budget = false;
        for (const auto& r : report.results)
            any_budget = any_budget || r.error == errkind::budget_exceeded;
        throw Error(any_budget ? errkind::budget_exceeded : errkind::evaluator_failure,
                    "no candidate evaluation completed");
    }

    report.best = candidates[report.best_index];
    AdaptedModel variant = report.best;
    variant.ann = transform_post_selection(variant.ann, rates);
    if (!ann_equal(variant.ann, report.best.ann)) {
        auto vr = evaluate(variant, dataset, config, share);
        report.dropout_result = vr;
        if (!vr.failed && vr.cost < report.results[report.best_index].cost) {
            report.best = std::move(variant);
            report.dropout_kept = true;
        }
    }
    return report;
}

}  // namespace nascur
