#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dfv2/checkpoint.hpp"
#include "dfv2/dataset.hpp"
#include "dfv2/manifest.hpp"
#include "dfv2/netpbm.hpp"
#include "dfv2/random.hpp"
#include "dfv2/synth.hpp"

namespace dfv2 {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("dfv2_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

PnmImage random_image(Rng& rng, std::size_t channels, std::uint16_t maxval) {
    PnmImage img;
    img.width = static_cast<std::size_t>(rng.integer(1, 17));
    img.height = static_cast<std::size_t>(rng.integer(1, 17));
    img.channels = channels;
    img.maxval = maxval;
    img.samples.resize(img.width * img.height * channels);
    for (auto& s : img.samples) s = static_cast<std::uint16_t>(rng.integer(0, maxval));
    return img;
}

using Netpbm = TempDir;

TEST_F(Netpbm, RoundTripsBitExactly) {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        for (const auto& [channels, maxval] :
             {std::pair<std::size_t, std::uint16_t>{1, 255}, {3, 255}, {1, 65535}, {1, 1000}, {3, 4095}}) {
            auto img = random_image(rng, channels, maxval);
            if (trial % 2 == 1) img.comment = "trial " + std::to_string(trial);
            const auto path = dir_ / "img.pnm";
            write_pnm(path, img);
            const auto back = read_pnm(path);
            EXPECT_EQ(back.width, img.width);
            EXPECT_EQ(back.height, img.height);
            EXPECT_EQ(back.channels, img.channels);
            EXPECT_EQ(back.maxval, img.maxval);
            EXPECT_EQ(back.samples, img.samples);
            // Comments are dropped on read, so only uncommented files re-encode identically.
            if (img.comment.empty()) {
                EXPECT_EQ(encode_pnm(back), slurp(path));
            }
        }
    }
}

TEST_F(Netpbm, EncodeIsStable) {
    Rng rng(32);
    const auto img = random_image(rng, 3, 255);
    const auto bytes = encode_pnm(img);
    EXPECT_EQ(encode_pnm(decode_pnm(bytes, "mem")), bytes);
}

TEST(NetpbmErrors, DistinguishHeaderFromPayload) {
    auto expect_message = [](std::string_view bytes, std::string_view needle) {
        try {
            decode_pnm(bytes, "x.pgm");
            ADD_FAILURE() << "expected ParseError for " << needle;
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            EXPECT_NE(msg.find("x.pgm"), std::string::npos) << msg;
            EXPECT_NE(msg.find(needle), std::string::npos) << msg;
        }
    };
    expect_message("P3\n1 1\n255\n", "header");
    expect_message("P5\n2 2\n255\n\x01\x02", "truncated");
    expect_message("P5\n2\n", "header");
    EXPECT_THROW(read_pnm("/nonexistent/file.pgm"), IoError);
}

using Dataset = TempDir;

TEST_F(Dataset, SampleRoundTrip) {
    const auto scene = synth_scene(5, 32, 64, 4);
    write_sample(scene, dir_ / "a_rgb.ppm", dir_ / "a_depth.pgm", dir_ / "a_labels.pgm");
    const auto back = read_sample(dir_ / "a_rgb.ppm", dir_ / "a_depth.pgm", dir_ / "a_labels.pgm", "a");
    EXPECT_EQ(back.labels, scene.labels);
    for (std::size_t i = 0; i < scene.depth.numel(); ++i) EXPECT_EQ(back.depth[i], scene.depth[i]);
    for (std::size_t i = 0; i < scene.rgb.numel(); ++i) EXPECT_EQ(back.rgb[i], scene.rgb[i]);
}

TEST_F(Dataset, ManifestResolvesRelativePaths) {
    const auto samples = synth_dataset(10, 3, 32, 32, 4);
    const auto manifest = write_dataset(dir_ / "set", samples);
    const auto entries = read_manifest(manifest);
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_TRUE(fs::exists(entries[0].rgb));
    const auto loaded = load_manifest_samples(manifest);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(loaded[i].id, samples[i].id);
        EXPECT_EQ(loaded[i].labels, samples[i].labels);
    }
}

TEST_F(Dataset, RejectsMalformedManifestAndLabels) {
    {
        std::ofstream f(dir_ / "bad.tsv");
        f << "only\ttwo\n";
    }
    EXPECT_THROW(read_manifest(dir_ / "bad.tsv"), ParseError);
    auto scene = synth_scene(1, 32, 32, 4);
    scene.labels[3] = 9;
    EXPECT_THROW(scene.validate(4), DataError);
    scene.labels[3] = kIgnoreIndex;
    EXPECT_NO_THROW(scene.validate(4));
}

using Checkpoint = TempDir;

TEST_F(Checkpoint, FileRoundTripsBothWidths) {
    std::vector<CheckpointTensor> ts{{"a.w", {2, 3}, 4, {1, 2, 3, 4, 5, 6}},
                                     {"b", {1}, 8, {0.1}},
                                     {"c.scalar", {}, 8, {1.0 / 3.0}}};
    write_checkpoint_file(dir_ / "t.ckpt", ts);
    const auto back = read_checkpoint_file(dir_ / "t.ckpt");
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].name, ts[i].name);
        EXPECT_EQ(back[i].shape, ts[i].shape);
        EXPECT_EQ(back[i].width, ts[i].width);
        EXPECT_EQ(back[i].data, ts[i].data);
    }
}

template <typename T>
void expect_same_params(const SegmentationModel<T>& a, const SegmentationModel<T>& b) {
    const auto pa = a.parameters(), pb = b.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(pa[i].name, pb[i].name);
        for (std::size_t j = 0; j < pa[i].tensor.numel(); ++j) ASSERT_EQ(pa[i].tensor[j], pb[i].tensor[j]);
    }
}

TEST_F(Checkpoint, ModelRoundTripsInBothPrecisions) {
    RunConfig cfg;
    cfg.model = ModelConfig::tiny();
    const auto narrow = SegmentationModel<float>::create(cfg.model, 3);
    save_checkpoint(dir_ / "n.ckpt", narrow, cfg);
    RunConfig seen;
    expect_same_params(narrow, load_checkpoint<float>(dir_ / "n.ckpt", &seen));
    EXPECT_EQ(seen, cfg);

    cfg.train.precision = Precision::Wide;
    const auto wide = SegmentationModel<double>::create(cfg.model, 4);
    save_checkpoint(dir_ / "w.ckpt", wide, cfg);
    expect_same_params(wide, load_checkpoint<double>(dir_ / "w.ckpt"));
}

TEST_F(Checkpoint, RejectsCorruptFiles) {
    {
        std::ofstream f(dir_ / "bad.ckpt", std::ios::binary);
        f << "NOPE";
    }
    EXPECT_THROW(read_checkpoint_file(dir_ / "bad.ckpt"), ParseError);
    write_checkpoint_file(dir_ / "trunc.ckpt", {{"x", {4}, 8, {1, 2, 3, 4}}});
    const auto bytes = slurp(dir_ / "trunc.ckpt");
    {
        std::ofstream f(dir_ / "trunc.ckpt", std::ios::binary | std::ios::trunc);
        f << bytes.substr(0, bytes.size() - 3);
    }
    EXPECT_THROW(read_checkpoint_file(dir_ / "trunc.ckpt"), ParseError);
}

TEST(RunManifest, NumbersRoundTripExactly) {
    RunManifest m;
    m.set("command", "train-toy");
    m.set_number("metric.val.miou", 0.1 + 0.2);
    m.set_int("seed", 42);
    const auto back = RunManifest::parse(m.to_text());
    EXPECT_EQ(back.get("command"), "train-toy");
    EXPECT_EQ(back.get_number("metric.val.miou"), 0.1 + 0.2);
    EXPECT_EQ(back.get_number("seed"), 42.0);
    EXPECT_FALSE(back.get("absent").has_value());
    EXPECT_THROW(back.get_number("command"), ParseError);
    EXPECT_FALSE(version_string().empty());
}

} // namespace
} // namespace dfv2
