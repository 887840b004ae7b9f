#include <gtest/gtest.h>

#include <filesystem>

#include "nascur/database.hpp"
#include "testutil.hpp"

using namespace nascur;

namespace {

DataCharacteristics fig_dc() { return from_model(testutil::figure_ann()); }

// Brute-force re-scan used as the oracle for compute_usage_stats: walks
// raw records independently of the production counting code.
UsageStats brute_force_stats(const ModelDatabase& db) {
    UsageStats s;
    for (const auto& rec : db.records) {
        const auto& ann = rec.ann;
        // Earliest flatten/GAP position in plain index order; records are
        // chains in these tests so index order is topological.
        int boundary = static_cast<int>(ann.nodes.size());
        for (int i = 0; i < static_cast<int>(ann.nodes.size()); ++i)
            if (ann.nodes[i].func == "Flatten" || ann.nodes[i].func == "GlobalAvgPool2d") {
                boundary = i;
                break;
            }
        for (int i = 0; i < static_cast<int>(ann.nodes.size()); ++i) {
            const auto& n = ann.nodes[i];
            if (is_activation(n.func))
                for (const auto& [f, t] : ann.edges)
                    if (t == i && ann.nodes[f].func == "Conv2D") s.activation_counts[n.func]++;
            if (n.func == "Dropout" && n.positional(1)) {
                double r = is_float(*n.positional(1))
                               ? std::get<double>(*n.positional(1))
                               : static_cast<double>(std::get<std::int64_t>(*n.positional(1)));
                (i < boundary ? s.hidden_dropout_rate_counts : s.fc_dropout_rate_counts)[r]++;
            }
        }
    }
    return s;
}

bool stats_equal(const UsageStats& a, const UsageStats& b) {
    return a.activation_counts == b.activation_counts &&
           a.hidden_dropout_rate_counts == b.hidden_dropout_rate_counts &&
           a.fc_dropout_rate_counts == b.fc_dropout_rate_counts;
}

}  // namespace

TEST(Insert, AppendsOnce) {
    ModelDatabase db;
    EXPECT_TRUE(insert(db, testutil::figure_ann(), fig_dc(), "figure.py"));
    EXPECT_EQ(db.records.size(), 1u);
    EXPECT_FALSE(insert(db, testutil::figure_ann(), fig_dc(), "copy.py"));
    EXPECT_EQ(db.records.size(), 1u);
}

TEST(Insert, RejectsIncomplete) {
    auto ann = testutil::chain({
        testutil::node("linear", {{2, std::int64_t{10}}}),
        testutil::node("softmax"),
    });
    ModelDatabase db;
    try {
        insert(db, ann, DataCharacteristics{1, 1, 1, 10, Task::Classification}, "x.py");
        FAIL() << "expected IncompleteModel";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), errkind::incomplete_model);
    }
}

TEST(Insert, RejectsUnsupported) {
    auto ann = testutil::figure_ann();
    ann.nodes[7] = testutil::node("LSTM", {{1, std::int64_t{64}}});
    ModelDatabase db;
    try {
        insert(db, ann, fig_dc(), "x.py");
        FAIL() << "expected UnsupportedModel";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), errkind::unsupported_model);
    }
}

TEST(Stats, FigureModelHandCount) {
    ModelDatabase db;
    insert(db, testutil::figure_ann(), fig_dc(), "figure.py");
    auto stats = compute_usage_stats(db);
    // Two conv-attached ReLUs; the output softmax follows a linear layer
    // and stays out of the hidden tally.
    std::map<std::string, long> expected{{"relu", 2}};
    EXPECT_EQ(stats.activation_counts, expected);
    EXPECT_EQ(stats.hidden_dropout_rate_counts, (std::map<double, long>{{0.25, 1}}));
    EXPECT_TRUE(stats.fc_dropout_rate_counts.empty());
}

TEST(Stats, EmptyDatabaseAllZero) {
    auto stats = compute_usage_stats(ModelDatabase{});
    EXPECT_TRUE(stats.activation_counts.empty());
    EXPECT_TRUE(stats.hidden_dropout_rate_counts.empty());
    EXPECT_TRUE(stats.fc_dropout_rate_counts.empty());
}

TEST(Stats, MatchesBruteForceOnRandomDatabases) {
    testutil::AnnGenerator gen(123);
    for (int round = 0; round < 100; ++round) {
        ModelDatabase db;
        const int n = 1 + gen.pick(0, 7);
        for (int i = 0; i < n; ++i) {
            auto ann = gen.chain_model();
            try {
                insert(db, ann, from_model(ann), "gen" + std::to_string(i));
            } catch (const Error&) {
            }
        }
        auto fast = compute_usage_stats(db);
        auto slow = brute_force_stats(db);
        ASSERT_TRUE(stats_equal(fast, slow)) << "round " << round;
    }
}

TEST(Persistence, SaveLoadBitExact) {
    auto dir = std::filesystem::temp_directory_path() / "nascur_test_db";
    std::filesystem::create_directories(dir);
    auto path = dir / "models.json";

    ModelDatabase db;
    insert(db, testutil::figure_ann(), fig_dc(), "figure.py");
    testutil::AnnGenerator gen(5);
    for (int i = 0; i < 5; ++i) {
        auto ann = gen.chain_model();
        try {
            insert(db, ann, from_model(ann), "gen" + std::to_string(i) + ".py");
        } catch (const Error&) {
        }
    }
    save_database(db, path);
    auto loaded = load_database(path);
    ASSERT_EQ(loaded.records.size(), db.records.size());
    for (std::size_t i = 0; i < db.records.size(); ++i) {
        EXPECT_TRUE(ann_equal(loaded.records[i].ann, db.records[i].ann));
        EXPECT_EQ(loaded.records[i].characteristics, db.records[i].characteristics);
        EXPECT_EQ(loaded.records[i].provenance, db.records[i].provenance);
    }
    EXPECT_EQ(database_to_json(loaded).dump(2), database_to_json(db).dump(2));

    save_database(loaded, dir / "models2.json");
    std::ifstream a(path), b(dir / "models2.json");
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    EXPECT_EQ(sa, sb);
}

TEST(Persistence, FloatFormattingSurvives) {
    ModelDatabase db;
    insert(db, testutil::figure_ann(), fig_dc(), "figure.py");
    auto text = database_to_json(db).dump();
    EXPECT_NE(text.find("\"decay\":1e-06"), std::string::npos);
    EXPECT_NE(text.find("\"lr\":0.01"), std::string::npos);
}

TEST(Persistence, VersionChecked) {
    nlohmann::json j;
    j["version"] = "999";
    j["records"] = nlohmann::json::array();
    try {
        database_from_json(j);
        FAIL() << "expected version error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), errkind::bad_artifact);
    }
}
