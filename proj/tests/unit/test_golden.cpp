#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tsgan/data.hpp"
#include "tsgan/image_io.hpp"
#include "tsgan/imageops.hpp"

namespace tsgan {
namespace {

// Stored output of `tsgan synth --count 1 --seed 1` followed by
// `tsgan outline --sigma 2.0`, 8-bit quantized.
TEST(GoldenOutline, SyntheticPageMatchesStoredMap) {
    const auto golden = imageops::load_grayscale(TSGAN_TEST_DATA_DIR "/outline_synth_000_sigma2.pgm");
    // The stored map was computed from the 8-bit stimulus PNG.
    const auto page = data::synth_dataset(1, 1).front();
    std::vector<double> pixels(page.image.data().begin(), page.image.data().end());
    for (auto& v : pixels) v = std::round(v * 255.0) / 255.0;
    const auto outline = imageops::extract_outline(imageops::Image::from_data(page.image.shape(), pixels), 2.0);
    ASSERT_EQ(golden.shape().h, outline.shape().h);
    ASSERT_EQ(golden.shape().w, outline.shape().w);
    const auto g = golden.data();
    const auto o = outline.data();
    double worst = 0;
    int bright = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        worst = std::max(worst, std::abs(g[i] - o[i]));
        bright += g[i] > 0.25;
    }
    EXPECT_LE(worst, 0.5 / 255.0 + 1e-9);
    EXPECT_GT(bright, 50);  // block borders and text stripes light up
}

}  // namespace
}  // namespace tsgan
