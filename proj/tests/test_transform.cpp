#include <gtest/gtest.h>

#include "nascur/matching.hpp"
#include "nascur/transform.hpp"
#include "testutil.hpp"

using namespace nascur;
using testutil::node;

namespace {

bool arch_graphs_equal(const AbstractNeuralNetwork& a, const AbstractNeuralNetwork& b) {
    auto ga = arch_graph(a);
    auto gb = arch_graph(b);
    return ga.vertex_funcs == gb.vertex_funcs && ga.out_channels == gb.out_channels &&
           ga.weights == gb.weights;
}

}  // namespace

TEST(Bn, InsertsBetweenConvAndActivation) {
    auto ann = testutil::chain({
        node("Conv2D", {{1, std::int64_t{3}}, {2, std::int64_t{32}}}),
        node("relu"),
    });
    auto out = apply_bn(ann);
    ASSERT_EQ(out.nodes.size(), 3u);
    EXPECT_EQ(out.nodes[0].func, "Conv2D");
    EXPECT_EQ(out.nodes[1].func, "BatchNorm2d");
    EXPECT_EQ(*out.nodes[1].positional(1), Literal{std::int64_t{32}});
    EXPECT_EQ(out.nodes[2].func, "relu");
    EXPECT_EQ(out.edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(Bn, ExistingBnUntouched) {
    auto ann = testutil::chain({
        node("Conv2D", {{1, std::int64_t{3}}, {2, std::int64_t{32}}}),
        node("BatchNorm2d", {{1, std::int64_t{32}}}),
        node("relu"),
    });
    EXPECT_TRUE(ann_equal(apply_bn(ann), ann));
}

TEST(Bn, BothConvPairsOfOriginalFigure) {
    auto out = apply_bn(testutil::transform_original_ann());
    std::vector<int> bn_positions;
    for (int i = 0; i < static_cast<int>(out.nodes.size()); ++i)
        if (out.nodes[i].func == "BatchNorm2d") bn_positions.push_back(i);
    EXPECT_EQ(bn_positions, (std::vector<int>{1, 5}));
    for (int p : bn_positions)
        EXPECT_EQ(*out.nodes[p].positional(1), Literal{std::int64_t{32}});
}

TEST(Gap, ReplacesFlatten) {
    auto ann = testutil::chain({
        node("Flatten"),
        node("linear", {{1, std::int64_t{32}}, {2, std::int64_t{32}}}),
    });
    auto out = apply_gap(ann);
    EXPECT_EQ(out.nodes[0].func, "GlobalAvgPool2d");
    EXPECT_EQ(out.nodes[1].func, "linear");
}

TEST(Gap, NoFlattenUnchanged) {
    auto ann = testutil::figure_ann();
    ann.nodes[7] = node("GlobalAvgPool2d");
    ann = renormalize(ann);
    EXPECT_TRUE(ann_equal(apply_gap(ann), ann));
}

TEST(Gap, PathologicalDoubleFlatten) {
    auto ann = testutil::chain({
        node("Conv2D", {{2, std::int64_t{8}}}),
        node("Flatten"),
        node("Flatten"),
        node("linear", {{2, std::int64_t{4}}}),
    });
    auto out = apply_gap(ann);
    EXPECT_EQ(out.nodes[1].func, "GlobalAvgPool2d");
    EXPECT_EQ(out.nodes[2].func, "GlobalAvgPool2d");
}

TEST(Relu, RewritesHiddenTanh) {
    auto ann = testutil::chain({
        node("Conv2D", {{1, std::int64_t{32}}, {2, std::int64_t{32}}}),
        node("tanh"),
        node("Flatten"),
        node("linear", {{2, std::int64_t{2}}}),
        node("softmax"),
    });
    auto out = apply_relu(ann);
    EXPECT_EQ(out.nodes[1].func, "relu");
    EXPECT_EQ(out.nodes[4].func, "softmax");  // output activation preserved
}

TEST(Relu, OutputSoftmaxPreserved) {
    auto out = apply_relu(testutil::transform_original_ann());
    EXPECT_EQ(out.nodes.back().func, "softmax");
    EXPECT_EQ(out.nodes[1].func, "relu");
    EXPECT_EQ(out.nodes[4].func, "relu");
}

TEST(Relu, AllReluUnchanged) {
    auto ann = testutil::figure_ann();
    EXPECT_TRUE(ann_equal(apply_relu(ann), ann));
}

TEST(Dropout, AppendsAfterPoolTerminal) {
    auto ann = testutil::chain({
        node("Conv2D", {{1, std::int64_t{32}}, {2, std::int64_t{32}}}),
        node("relu"),
        node("MaxPool2d", {}, {{"pool_size", IntList{2, 2}}}),
    });
    auto out = apply_dropout(ann, {0.25, 0.5});
    ASSERT_EQ(out.nodes.size(), 4u);
    EXPECT_EQ(out.nodes[3].func, "Dropout");
    EXPECT_EQ(*out.nodes[3].positional(1), Literal{0.25});
}

TEST(Dropout, SaturatedModelUnchanged) {
    auto ann = testutil::chain({
        node("Conv2D", {{1, std::int64_t{3}}, {2, std::int64_t{16}}}),
        node("relu"),
        node("Dropout", {{1, 0.3}}),
        node("GlobalAvgPool2d"),
        node("linear", {{1, std::int64_t{16}}, {2, std::int64_t{8}}}),
        node("relu"),
        node("Dropout", {{1, 0.4}}),
        node("linear", {{1, std::int64_t{8}}, {2, std::int64_t{2}}}),
        node("softmax"),
    });
    EXPECT_TRUE(ann_equal(apply_dropout(ann, {0.25, 0.5}), ann));
}

TEST(Dropout, FigureModelGetsOneHiddenDropout) {
    // The first conv block lacks dropout; the second already ends in
    // Dropout(0.25); the only linear block is the output one.
    auto fig = testutil::figure_ann();
    auto out = apply_dropout(fig, {0.25, 0.5});
    int dropouts = 0;
    for (const auto& n : out.nodes) dropouts += n.func == "Dropout";
    EXPECT_EQ(dropouts, 2);
    ASSERT_EQ(out.nodes.size(), fig.nodes.size() + 1);
    EXPECT_EQ(out.nodes[3].func, "Dropout");  // after the first MaxPool
    EXPECT_EQ(*out.nodes[3].positional(1), Literal{0.25});
}

TEST(Dropout, VggStyleDoubleConvSharesOneBlock) {
    auto ann = testutil::chain({
        node("Conv2D", {{1, std::int64_t{3}}, {2, std::int64_t{16}}}),
        node("Conv2D", {{1, std::int64_t{16}}, {2, std::int64_t{16}}}),
        node("relu"),
        node("MaxPool2d", {}, {{"pool_size", IntList{2, 2}}}),
        node("GlobalAvgPool2d"),
        node("linear", {{1, std::int64_t{16}}, {2, std::int64_t{2}}}),
        node("softmax"),
    });
    auto out = apply_dropout(ann, {0.25, 0.5});
    int dropouts = 0;
    for (const auto& n : out.nodes) dropouts += n.func == "Dropout";
    EXPECT_EQ(dropouts, 1);
    EXPECT_EQ(out.nodes[4].func, "Dropout");  // once, after the pool
}

TEST(PreSearch, ReproducesTransformedFigureWithoutDropout) {
    auto out = transform_pre_search(testutil::transform_original_ann());
    auto expected = testutil::transform_expected_ann(0.25, 0.5);
    // Strip the three dropout nodes from the expected full listing.
    std::vector<AbstractLayer> kept;
    for (const auto& n : expected.nodes)
        if (n.func != "Dropout") kept.push_back(n);
    auto expected_nodropout = testutil::chain(std::move(kept));
    EXPECT_TRUE(ann_equal(out, expected_nodropout)) << ann_to_json(out).dump(2);
}

TEST(PreSearch, FullFigureWithTextRatesAndFigureRates) {
    auto pre = transform_pre_search(testutil::transform_original_ann());
    auto text_rates = apply_dropout(pre, {0.25, 0.5});
    EXPECT_TRUE(ann_equal(text_rates, testutil::transform_expected_ann(0.25, 0.5)))
        << ann_to_json(text_rates).dump(2);
    auto figure_rates = apply_dropout(pre, {0.5, 0.25});
    EXPECT_TRUE(ann_equal(figure_rates, testutil::transform_expected_ann(0.5, 0.25)));
}

TEST(PreSearch, AlreadyTransformedIsFixpoint) {
    auto once = transform_pre_search(testutil::transform_original_ann());
    EXPECT_TRUE(ann_equal(transform_pre_search(once), once));
}

TEST(PostSelection, EmitsDropoutVariant) {
    auto pre = transform_pre_search(testutil::transform_original_ann());
    auto variant = transform_post_selection(pre, {0.25, 0.5});
    EXPECT_FALSE(ann_equal(variant, pre));
    int dropouts = 0;
    for (const auto& n : variant.nodes) dropouts += n.func == "Dropout";
    EXPECT_EQ(dropouts, 3);
}

TEST(Properties, RulesIdempotentAndGraphPreserving) {
    testutil::AnnGenerator gen(404);
    for (int i = 0; i < 1000; ++i) {
        auto ann = (i % 7 == 0) ? gen.skip_model() : gen.chain_model();
        const AbstractNeuralNetwork once_bn = apply_bn(ann);
        EXPECT_TRUE(ann_equal(apply_bn(once_bn), once_bn));
        EXPECT_TRUE(arch_graphs_equal(ann, once_bn));

        const AbstractNeuralNetwork once_gap = apply_gap(ann);
        EXPECT_TRUE(ann_equal(apply_gap(once_gap), once_gap));
        EXPECT_TRUE(arch_graphs_equal(ann, once_gap));

        const AbstractNeuralNetwork once_relu = apply_relu(ann);
        EXPECT_TRUE(ann_equal(apply_relu(once_relu), once_relu));
        EXPECT_TRUE(arch_graphs_equal(ann, once_relu));

        const AbstractNeuralNetwork once_drop = apply_dropout(ann);
        EXPECT_TRUE(ann_equal(apply_dropout(once_drop), once_drop))
            << ann_to_json(ann).dump(2);
        EXPECT_TRUE(arch_graphs_equal(ann, once_drop));
    }
}

TEST(Properties, PostTransformStructuralAssertions) {
    testutil::AnnGenerator gen(808);
    for (int i = 0; i < 1000; ++i) {
        auto ann = (i % 7 == 0) ? gen.skip_model() : gen.chain_model();
        auto out = transform_pre_search(ann);
        auto succ = successors(out);
        for (std::size_t v = 0; v < out.nodes.size(); ++v) {
            EXPECT_NE(out.nodes[v].func, "Flatten");
            if (out.nodes[v].func == "Conv2D")
                for (int s : succ[v]) EXPECT_FALSE(is_activation(out.nodes[s].func));
            if (is_activation(out.nodes[v].func)) {
                bool trainable_below = false;
                std::vector<int> stack(succ[v].begin(), succ[v].end());
                std::vector<char> seen(out.nodes.size(), 0);
                while (!stack.empty()) {
                    int w = stack.back();
                    stack.pop_back();
                    if (seen[w]) continue;
                    seen[w] = 1;
                    trainable_below = trainable_below || is_trainable(out.nodes[w].func);
                    for (int x : succ[w]) stack.push_back(x);
                }
                if (trainable_below) EXPECT_EQ(out.nodes[v].func, "relu");
            }
        }
        EXPECT_TRUE(arch_graphs_equal(ann, out));
    }
}
