#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "nascur/characteristics.hpp"
#include "testutil.hpp"

using namespace nascur;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("nascur_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Minimal valid PNG header bytes: signature + IHDR chunk.
void write_png(const fs::path& p, std::uint32_t w, std::uint32_t h, unsigned char color_type) {
    unsigned char buf[33] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n',
                             0, 0, 0, 13, 'I', 'H', 'D', 'R'};
    auto be32 = [&](std::size_t off, std::uint32_t v) {
        buf[off] = static_cast<unsigned char>(v >> 24);
        buf[off + 1] = static_cast<unsigned char>(v >> 16);
        buf[off + 2] = static_cast<unsigned char>(v >> 8);
        buf[off + 3] = static_cast<unsigned char>(v);
    };
    be32(16, w);
    be32(20, h);
    buf[24] = 8;           // bit depth
    buf[25] = color_type;  // 0 gray, 2 rgb
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<char*>(buf), sizeof(buf));
}

// SOI + SOF0 segment carrying dimensions and component count.
void write_jpeg(const fs::path& p, std::uint16_t w, std::uint16_t h, unsigned char comps) {
    unsigned char buf[] = {0xFF, 0xD8,                          // SOI
                           0xFF, 0xC0, 0x00, 0x0B, 8,          // SOF0, len 11, precision
                           static_cast<unsigned char>(h >> 8), static_cast<unsigned char>(h),
                           static_cast<unsigned char>(w >> 8), static_cast<unsigned char>(w),
                           comps};
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<char*>(buf), sizeof(buf));
}

}  // namespace

TEST(FromModel, FigureExample) {
    auto ann = testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{64}}},
                       {{"input_shape", IntList{3, 120, 180}}}),
        testutil::node("relu"),
        testutil::node("linear", {{2, std::int64_t{10}}}),
    });
    auto dc = from_model(ann);
    EXPECT_EQ(dc.height, 120);
    EXPECT_EQ(dc.width, 180);
    EXPECT_EQ(dc.input_channel, 3);
    EXPECT_EQ(dc.output_channel, 10);
    EXPECT_EQ(dc.task, Task::Classification);
}

TEST(FromModel, ChannelLastGrayscale) {
    auto ann = testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{8}}},
                       {{"input_shape", IntList{28, 28, 1}}}),
        testutil::node("relu"),
        testutil::node("linear", {{2, std::int64_t{10}}}),
    });
    auto dc = from_model(ann);
    EXPECT_EQ(dc.height, 28);
    EXPECT_EQ(dc.width, 28);
    EXPECT_EQ(dc.input_channel, 1);
    EXPECT_EQ(dc.output_channel, 10);
}

TEST(FromModel, AmbiguousShape) {
    auto ann = testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{8}}}, {{"input_shape", IntList{3, 3, 3}}}),
        testutil::node("relu"),
        testutil::node("linear", {{2, std::int64_t{10}}}),
    });
    try {
        from_model(ann);
        FAIL() << "expected AmbiguousShape";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), errkind::ambiguous_shape);
    }
}

TEST(FromModel, MissingInputShape) {
    auto ann = testutil::chain({
        testutil::node("Conv2D", {{2, std::int64_t{8}}}),
        testutil::node("relu"),
        testutil::node("linear", {{2, std::int64_t{10}}}),
    });
    try {
        from_model(ann);
        FAIL() << "expected MissingInputShape";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), errkind::missing_input_shape);
    }
}

TEST(FromDataset, ManifestMatchesDeclaredFields) {
    auto dir = temp_dir("manifest");
    std::ofstream(dir / "data.json")
        << R"({"height":150,"width":150,"channels":3,"num_classes":6,"task":"classification"})";
    auto dc = from_dataset(dir / "data.json");
    EXPECT_EQ(dc, (DataCharacteristics{150, 150, 3, 6, Task::Classification}));
}

TEST(FromDataset, RegressionManifestForcesSingleOutput) {
    auto dir = temp_dir("regman");
    std::ofstream(dir / "data.json")
        << R"({"height":64,"width":64,"channels":3,"task":"regression"})";
    auto dc = from_dataset(dir / "data.json");
    EXPECT_EQ(dc.output_channel, 1);
    EXPECT_EQ(dc.task, Task::Regression);
}

TEST(FromDataset, DirectoryOfClassFolders) {
    auto dir = temp_dir("classdirs");
    for (int c = 0; c < 10; ++c) {
        fs::create_directories(dir / ("class" + std::to_string(c)));
        write_png(dir / ("class" + std::to_string(c)) / "img0.png", 28, 28, 0);
    }
    auto dc = from_dataset(dir);
    EXPECT_EQ(dc, (DataCharacteristics{28, 28, 1, 10, Task::Classification}));
}

TEST(FromDataset, JpegHeadersAndRgb) {
    auto dir = temp_dir("jpegs");
    fs::create_directories(dir / "cats");
    fs::create_directories(dir / "dogs");
    write_jpeg(dir / "cats" / "a.jpg", 150, 150, 3);
    write_jpeg(dir / "dogs" / "b.jpg", 150, 150, 3);
    auto dc = from_dataset(dir);
    EXPECT_EQ(dc, (DataCharacteristics{150, 150, 3, 2, Task::Classification}));
}

TEST(FromDataset, EmptyDirectory) {
    auto dir = temp_dir("empty");
    try {
        from_dataset(dir);
        FAIL() << "expected EmptyDataset";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), errkind::empty_dataset);
    }
}

TEST(FromDataset, MixedChannelsRejected) {
    auto dir = temp_dir("mixed");
    fs::create_directories(dir / "a");
    fs::create_directories(dir / "b");
    write_png(dir / "a" / "x.png", 32, 32, 2);
    write_png(dir / "b" / "y.png", 32, 32, 0);
    try {
        from_dataset(dir);
        FAIL() << "expected InconsistentImages";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), errkind::inconsistent_images);
    }
}

TEST(FromDataset, OrderIndependentOverListing) {
    auto dir = temp_dir("order");
    fs::create_directories(dir / "z_last");
    fs::create_directories(dir / "a_first");
    write_png(dir / "z_last" / "i.png", 40, 50, 2);
    write_png(dir / "a_first" / "j.png", 40, 50, 2);
    auto dc1 = from_dataset(dir);
    auto dc2 = from_dataset(dir);
    EXPECT_EQ(dc1, dc2);
    EXPECT_EQ(dc1.height, 50);  // PNG IHDR stores width first
    EXPECT_EQ(dc1.width, 40);
}

TEST(Deltas, MatchesDefinitions) {
    DataCharacteristics data{150, 150, 3, 6, Task::Classification};
    DataCharacteristics model{120, 180, 3, 20, Task::Classification};
    auto d = deltas(data, model);
    EXPECT_DOUBLE_EQ(d.delta_i, 0.0);
    EXPECT_DOUBLE_EQ(d.delta_o, 14.0);
    EXPECT_DOUBLE_EQ(d.delta_s, std::sqrt(30.0 * 30.0 + 30.0 * 30.0));
    EXPECT_NEAR(d.delta_s * d.delta_s, 30.0 * 30.0 + 30.0 * 30.0, 1e-9);
}
