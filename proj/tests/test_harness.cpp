#include <gtest/gtest.h>

#include <cmath>

#include "nascur/harness.hpp"
#include "testutil.hpp"

using namespace nascur;

namespace {

AdaptedModel make_candidate(const AbstractNeuralNetwork& ann, const DataCharacteristics& dc) {
    AdaptedModel m;
    m.ann = ann;
    m.optimizer = default_optimizer();
    m.characteristics = dc;
    return m;
}

DataCharacteristics fig_dc() { return from_model(testutil::figure_ann()); }

}  // namespace

TEST(Surrogate, DeterministicForIdenticalCandidates) {
    auto dc = fig_dc();
    auto c = make_candidate(testutil::figure_ann(), dc);
    auto a = evaluate_surrogate(c, dc, 42);
    auto b = evaluate_surrogate(c, dc, 42);
    EXPECT_EQ(a.cost, b.cost);
    EXPECT_EQ(a.train_loss, b.train_loss);
    EXPECT_EQ(a.wall_time_s, b.wall_time_s);
    auto other_seed = evaluate_surrogate(c, dc, 43);
    EXPECT_NE(a.cost, other_seed.cost);  // jitter is seeded
}

TEST(Surrogate, HandComputedCostWithoutJitter) {
    // Published formula, evaluated by hand on a fixed two-node candidate:
    // cost = 0.05*log10(1+params) + 0.01*depth + 0.3*mismatch.
    auto ann = renormalize(testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{4}}},
                       {{"kernel_size", IntList{3, 3}}, {"input_shape", IntList{3, 10, 10}}}),
        testutil::node("relu"),
        testutil::node("GlobalAvgPool2d"),
        testutil::node("linear", {{2, std::int64_t{5}}}),
        testutil::node("softmax"),
    }));
    DataCharacteristics dc{10, 10, 3, 5, Task::Classification};
    SurrogateConfig cfg;
    cfg.jitter_scale = 0;
    auto r = evaluate_surrogate(make_candidate(ann, dc), dc, 0, cfg);
    // params: conv 3*4*3*3+4 = 112; linear 4*5+5 = 25; total 137.
    EXPECT_EQ(r.params, 137);
    EXPECT_EQ(r.depth, 5);
    const double expected = 0.05 * std::log10(138.0) + 0.01 * 5.0;
    EXPECT_NEAR(r.cost, expected, 1e-15);
    EXPECT_NEAR(r.train_loss, 1.5 * expected + 0.05, 1e-15);
}

TEST(Surrogate, MatchedSmallBeatsMismatchedHuge) {
    DataCharacteristics dc{32, 32, 3, 4, Task::Classification};
    auto small = renormalize(testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{8}}},
                       {{"kernel_size", IntList{3, 3}}, {"input_shape", IntList{3, 32, 32}}}),
        testutil::node("relu"),
        testutil::node("GlobalAvgPool2d"),
        testutil::node("linear", {{2, std::int64_t{4}}}),
        testutil::node("softmax"),
    }));
    auto huge = renormalize(testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{512}}},
                       {{"kernel_size", IntList{7, 7}}, {"input_shape", IntList{3, 999, 999}}}),
        testutil::node("relu"),
        testutil::node("Conv2D", {{2, std::int64_t{512}}}, {{"kernel_size", IntList{7, 7}}}),
        testutil::node("relu"),
        testutil::node("Flatten"),
        testutil::node("linear", {{2, std::int64_t{1000}}}),
        testutil::node("softmax"),
    }));
    auto rs = evaluate_surrogate(make_candidate(small, dc), dc, 1);
    auto rh = evaluate_surrogate(make_candidate(huge, dc), dc, 1);
    EXPECT_LT(rs.cost, rh.cost);
}

TEST(External, FalseCommandFails) {
    auto dc = fig_dc();
    auto c = make_candidate(testutil::figure_ann(), dc);
    auto r = evaluate_external("false", c, dc, 0, 5.0);
    EXPECT_TRUE(r.failed);
    EXPECT_EQ(r.error, errkind::evaluator_failure);
}

TEST(External, JsonProtocolRoundTrip) {
    auto dc = fig_dc();
    auto c = make_candidate(testutil::figure_ann(), dc);
    // An evaluator that checks it received a job and answers a fixed cost.
    const char* cmd =
        "python3 -c \"import json,sys; job=json.load(sys.stdin); "
        "assert 'model_source' in job and 'manifest' in job; "
        "print(json.dumps({'cost': 0.125, 'train_loss': 0.5, 'wall_time_s': 0.01}))\"";
    auto r = evaluate_external(cmd, c, dc, 7, 10.0);
    ASSERT_FALSE(r.failed) << r.error;
    EXPECT_DOUBLE_EQ(r.cost, 0.125);
    EXPECT_DOUBLE_EQ(r.train_loss, 0.5);
    EXPECT_DOUBLE_EQ(r.wall_time_s, 0.01);
}

TEST(External, MalformedOutputFails) {
    auto dc = fig_dc();
    auto c = make_candidate(testutil::figure_ann(), dc);
    auto r = evaluate_external("echo not-json", c, dc, 0, 5.0);
    EXPECT_TRUE(r.failed);
    EXPECT_EQ(r.error, errkind::evaluator_failure);
}

TEST(External, BudgetOverrunKilled) {
    auto dc = fig_dc();
    auto c = make_candidate(testutil::figure_ann(), dc);
    auto r = evaluate_external("sleep 30", c, dc, 0, 0.2);
    EXPECT_TRUE(r.failed);
    EXPECT_EQ(r.error, errkind::budget_exceeded);
    EXPECT_LT(r.wall_time_s, 5.0);
}

TEST(SelectBest, ArgminOfSurrogateCosts) {
    testutil::AnnGenerator gen(7);
    DataCharacteristics dc{32, 32, 3, 10, Task::Classification};
    std::vector<AdaptedModel> candidates;
    for (int i = 0; i < 3; ++i) candidates.push_back(make_candidate(gen.chain_model(), dc));
    SearchConfig cfg;
    cfg.seed = 5;
    auto report = select_best(candidates, dc, cfg);
    ASSERT_EQ(report.results.size(), 3u);
    for (const auto& r : report.results)
        EXPECT_GE(r.cost, report.results[report.best_index].cost);
}

TEST(SelectBest, BruteForceOracleOverRandomSets) {
    testutil::AnnGenerator gen(99);
    DataCharacteristics dc{64, 64, 3, 6, Task::Classification};
    for (int round = 0; round < 200; ++round) {
        std::vector<AdaptedModel> candidates;
        const int n = 1 + gen.pick(0, 9);
        for (int i = 0; i < n; ++i) candidates.push_back(make_candidate(gen.chain_model(), dc));
        SearchConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(round);
        auto report = select_best(candidates, dc, cfg);

        // Brute force: evaluate independently, scan for the argmin with
        // the documented (cost, params, index) tiebreak.
        int expect = 0;
        std::vector<EvaluationResult> rs;
        for (const auto& c : candidates)
            rs.push_back(evaluate_surrogate(c, dc, cfg.seed, cfg.surrogate));
        for (int i = 1; i < n; ++i) {
            if (rs[i].cost < rs[expect].cost ||
                (rs[i].cost == rs[expect].cost && rs[i].params < rs[expect].params))
                expect = i;
        }
        ASSERT_EQ(report.best_index, expect) << "round " << round;
    }
}

TEST(SelectBest, EqualCostTieBreaksOnParams) {
    DataCharacteristics dc{32, 32, 3, 4, Task::Classification};
    testutil::AnnGenerator gen(3);
    auto small = gen.chain_model();
    auto big = gen.chain_model();
    while (parameter_count(big) == parameter_count(small)) big = gen.chain_model();
    if (parameter_count(big) < parameter_count(small)) std::swap(small, big);
    std::vector<AdaptedModel> candidates = {make_candidate(big, dc), make_candidate(small, dc)};
    SearchConfig cfg;
    // Collapse every cost term so all candidates tie exactly.
    cfg.surrogate = SurrogateConfig{0, 0, 0, 0, 0};
    auto report = select_best(candidates, dc, cfg);
    EXPECT_EQ(report.best_index, 1);
}

TEST(SelectBest, DropoutVariantWinsUnderBonus) {
    DataCharacteristics dc{32, 32, 3, 4, Task::Classification};
    auto base = renormalize(testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{8}}},
                       {{"kernel_size", IntList{3, 3}}, {"input_shape", IntList{3, 32, 32}}}),
        testutil::node("relu"),
        testutil::node("GlobalAvgPool2d"),
        testutil::node("linear", {{2, std::int64_t{4}}}),
        testutil::node("softmax"),
    }));
    SearchConfig cfg;
    cfg.surrogate.dropout_effect = -0.05;  // dropout helps
    cfg.surrogate.jitter_scale = 0;
    auto report = select_best({make_candidate(base, dc)}, dc, cfg);
    EXPECT_TRUE(report.dropout_kept);
    bool has_dropout = false;
    for (const auto& n : report.best.ann.nodes) has_dropout |= n.func == "Dropout";
    EXPECT_TRUE(has_dropout);

    cfg.surrogate.dropout_effect = 0.05;  // dropout hurts
    auto report2 = select_best({make_candidate(base, dc)}, dc, cfg);
    EXPECT_FALSE(report2.dropout_kept);
    EXPECT_TRUE(ann_equal(report2.best.ann, base));
}

TEST(SelectBest, DropoutSaturatedSkipsReEvaluation) {
    DataCharacteristics dc{32, 32, 3, 4, Task::Classification};
    auto base = renormalize(testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{8}}},
                       {{"kernel_size", IntList{3, 3}}, {"input_shape", IntList{3, 32, 32}}}),
        testutil::node("relu"),
        testutil::node("Dropout", {{1, 0.25}}),
        testutil::node("GlobalAvgPool2d"),
        testutil::node("linear", {{2, std::int64_t{4}}}),
        testutil::node("softmax"),
    }));
    SearchConfig cfg;
    auto report = select_best({make_candidate(base, dc)}, dc, cfg);
    EXPECT_FALSE(report.dropout_result.has_value());
    EXPECT_TRUE(ann_equal(report.best.ann, base));
}

TEST(SelectBest, ReportCoversEveryCandidateIncludingFailures) {
    DataCharacteristics dc{32, 32, 3, 4, Task::Classification};
    testutil::AnnGenerator gen(21);
    std::vector<AdaptedModel> candidates;
    for (int i = 0; i < 4; ++i) candidates.push_back(make_candidate(gen.chain_model(), dc));
    SearchConfig cfg;
    cfg.evaluator =
        "cmd:python3 -c \"import json,sys; job=json.load(sys.stdin); "
        "n=len(job['model_source']); "
        "sys.exit(1) if n % 2 else print(json.dumps({'cost': n/1000.0}))\"";
    cfg.time_budget_s = 30;
    auto report = select_best(candidates, dc, cfg);
    ASSERT_EQ(report.results.size(), 4u);
    int failures = 0;
    for (const auto& r : report.results) failures += r.failed;
    EXPECT_GE(report.best_index, 0);
    EXPECT_FALSE(report.results[report.best_index].failed);
    (void)failures;
}

TEST(SelectBest, AllFailuresThrow) {
    DataCharacteristics dc{32, 32, 3, 4, Task::Classification};
    testutil::AnnGenerator gen(22);
    SearchConfig cfg;
    cfg.evaluator = "cmd:false";
    try {
        select_best({make_candidate(gen.chain_model(), dc)}, dc, cfg);
        FAIL() << "expected EvaluatorFailure";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), errkind::evaluator_failure);
    }
}

TEST(SelectBest, ParallelWorkersSameResult) {
    testutil::AnnGenerator gen(55);
    DataCharacteristics dc{48, 48, 3, 8, Task::Classification};
    std::vector<AdaptedModel> candidates;
    for (int i = 0; i < 6; ++i) candidates.push_back(make_candidate(gen.chain_model(), dc));
    SearchConfig serial;
    serial.seed = 9;
    SearchConfig parallel = serial;
    parallel.workers = 4;
    auto a = select_best(candidates, dc, serial);
    auto b = select_best(candidates, dc, parallel);
    EXPECT_EQ(a.best_index, b.best_index);
    for (std::size_t i = 0; i < a.results.size(); ++i)
        EXPECT_EQ(a.results[i].cost, b.results[i].cost);
}
