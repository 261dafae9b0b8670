#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "tsgan/data.hpp"
#include "tsgan/image_io.hpp"
#include "tsgan/trainer.hpp"

namespace tsgan {
namespace {

namespace fs = std::filesystem;

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "tsgan");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::string& s, std::size_t at) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
    return v;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("tsgan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

TEST_F(CliTest, UnknownFlagIsAUsageError) {
    const auto r = run_cli({"outline", "--image", "x.png", "--bogus", "1"});
    EXPECT_EQ(r.code, cli::kUsageError);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, MissingSubcommandIsAUsageError) {
    EXPECT_EQ(run_cli({}).code, cli::kUsageError);
    EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kUsageError);
}

TEST_F(CliTest, RuntimeFailureExitsTwo) {
    const fs::path bad = dir_ / "bad.png";
    std::ofstream(bad) << "not a png";
    const auto r = run_cli({"outline", "--image", bad.string(), "--out", (dir_ / "o.png").string()});
    EXPECT_EQ(r.code, cli::kRuntimeError);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, OutlineOfConstantImageIsBlack) {
    const fs::path in = dir_ / "flat.png", out = dir_ / "edge.png";
    imageops::save_image(Tensor<double>::full({1, 3, 24, 30}, 0.6), in);
    ASSERT_EQ(run_cli({"outline", "--image", in.string(), "--sigma", "2.0", "--out", out.string()}).code, 0);
    const auto edge = imageops::load_grayscale(out);
    EXPECT_EQ(edge.shape().h, 24);
    EXPECT_EQ(edge.shape().w, 30);
    for (double v : edge.data()) EXPECT_EQ(v, 0.0);
}

TEST_F(CliTest, SynthIsByteReproducible) {
    const fs::path a = dir_ / "a", b = dir_ / "b";
    ASSERT_EQ(run_cli({"synth", "--count", "4", "--seed", "1", "--out", a.string()}).code, 0);
    ASSERT_EQ(run_cli({"synth", "--count", "4", "--seed", "1", "--out", b.string()}).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++files;
        const fs::path other = b / fs::relative(e.path(), a);
        ASSERT_TRUE(fs::exists(other)) << other;
        EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path();
    }
    EXPECT_GE(files, 8u);
    EXPECT_EQ(data::load_dataset(a).size(), 4u);
}

class CliModelTest : public CliTest {
protected:
    void SetUp() override {
        CliTest::SetUp();
        TrainConfig c;
        c.epochs = 1;
        c.dataset = "synthetic:2";
        c.network.encoder_widths = {4, 4, 6, 6, 8, 8, 8, 8};
        c.network.decoder_channels = 8;
        c.network.deconv_widths = {8, 6, 4, 4};
        c.network.disc_widths = {4, 4, 6, 6, 8, 8, 8};
        c.checkpoint_dir = (dir_ / "ckpt").string();
        c.log_path = (dir_ / "log.csv").string();
        const fs::path cfg = dir_ / "config.json";
        std::ofstream(cfg) << nlohmann::json(c).dump(2);
        ASSERT_EQ(run_cli({"train", "--config", cfg.string()}).code, 0);
        ckpt_ = dir_ / "ckpt" / "final.ckpt";
        ASSERT_TRUE(fs::exists(ckpt_));
    }
    fs::path ckpt_;
};

TEST_F(CliModelTest, PredictWritesThreeFilesWithGrayFineMap) {
    const fs::path in = dir_ / "page.png";
    imageops::save_image(data::synth_webpage(3).image, in);
    const fs::path coarse = dir_ / "coarse.png", fine = dir_ / "fine.png", heat = dir_ / "heat.png";
    const auto r = run_cli({"predict", "--checkpoint", ckpt_.string(), "--image", in.string(), "--out-coarse",
                            coarse.string(), "--out-fine", fine.string(), "--heatmap", heat.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(coarse));
    EXPECT_TRUE(fs::exists(heat));
    const std::string png = slurp(fine);
    ASSERT_GT(png.size(), 26u);
    EXPECT_EQ(png.substr(1, 3), "PNG");
    EXPECT_EQ(be32(png, 16), 64u);
    EXPECT_EQ(be32(png, 20), 64u);
    EXPECT_EQ(static_cast<int>(png[25]), 0);  // color type 0: grayscale
}

TEST_F(CliModelTest, PredictCropsBackOddSizes) {
    const fs::path in = dir_ / "odd.png";
    imageops::save_image(imageops::crop(data::synth_webpage(3, 80, 96).image, 70, 90), in);
    const fs::path fine = dir_ / "fine.png";
    ASSERT_EQ(run_cli({"predict", "--checkpoint", ckpt_.string(), "--image", in.string(), "--out-coarse",
                       (dir_ / "c.png").string(), "--out-fine", fine.string(), "--heatmap", (dir_ / "h.png").string()})
                  .code,
              0);
    const auto map = imageops::load_grayscale(fine);
    EXPECT_EQ(map.shape().h, 70);
    EXPECT_EQ(map.shape().w, 90);
}

TEST_F(CliModelTest, PredictIsBitReproducible) {
    const fs::path in = dir_ / "page.png";
    imageops::save_image(data::synth_webpage(5).image, in);
    auto go = [&](const std::string& tag) {
        const fs::path fine = dir_ / (tag + ".png");
        EXPECT_EQ(run_cli({"predict", "--checkpoint", ckpt_.string(), "--image", in.string(), "--out-coarse",
                           (dir_ / (tag + "_c.png")).string(), "--out-fine", fine.string(), "--heatmap",
                           (dir_ / (tag + "_h.png")).string()})
                      .code,
                  0);
        return slurp(fine);
    };
    EXPECT_EQ(go("one"), go("two"));
}

TEST_F(CliModelTest, EvaluateWritesReport) {
    const fs::path data_dir = dir_ / "data", report = dir_ / "report";
    data::write_dataset(data::synth_dataset(3, 9), data_dir);
    const auto r = run_cli({"evaluate", "--checkpoint", ckpt_.string(), "--data", data_dir.string(), "--report",
                            report.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(report / "scores.csv"));
    EXPECT_TRUE(fs::exists(report / "summary.json"));
    EXPECT_TRUE(fs::exists(report / "manifest.json"));
    std::ifstream is(report / "summary.json");
    EXPECT_EQ(nlohmann::json::parse(is).at("count").get<int>(), 3);
}

TEST_F(CliModelTest, ResumeContinuesToTheNewBudget) {
    const auto r = run_cli({"train", "--resume", (dir_ / "ckpt" / "epoch_0001.ckpt").string(), "--epochs", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir_ / "ckpt" / "epoch_0002.ckpt"));
}

TEST_F(CliTest, TrainWithoutConfigOrResumeFails) {
    EXPECT_EQ(run_cli({"train"}).code, cli::kRuntimeError);
}

}  // namespace
}  // namespace tsgan
