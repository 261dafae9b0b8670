#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsgan/imageops.hpp"

namespace tsgan::data {

using imageops::Image;

enum class Category { textual, pictorial, mixed, synthetic, unspecified };

Category parse_category(const std::string& name);
std::string to_string(Category c);

/// One stimulus with its ground truth, padded to multiples of 16.
struct WebpageSample {
    std::string id;
    Image image;                        // (1,3,h,w), reflect-padded
    Image saliency;                     // (1,1,h,w), zero-padded
    std::optional<Image> fixation_mask; // (1,1,h,w) binary, zero-padded
    Category category = Category::unspecified;
    std::int64_t original_h = 0;
    std::int64_t original_w = 0;
};

/// Throws ValueError describing the first broken invariant.
void validate_sample(const WebpageSample& sample);

/// Reads `root/stimuli/<id>.{png,pgm}` with ground truth from
/// `root/fixmaps/<id>.{png,pgm}` and/or `root/fixations/<id>.txt` (one
/// "x y" pair per line, 0-based). An optional `root/categories.txt` holds
/// "id category" lines. Samples are sorted by id. `blur_sigma <= 0` selects
/// the width-scaled default. All missing or unreadable files are reported in
/// one error.
std::vector<WebpageSample> load_dataset(const std::filesystem::path& root, double blur_sigma = 0.0);

/// Parses a fixation text file.
std::vector<imageops::Point> read_fixations(const std::filesystem::path& path);

/// ids, padded and original dims, category and an FNV-1a checksum of the pixels.
nlohmann::json manifest(const std::vector<WebpageSample>& samples);

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
};

/// Shuffles ids with the seed and takes the first `train_count` for training.
DatasetSplit split_dataset(const std::vector<WebpageSample>& samples, std::size_t train_count, std::uint64_t seed);
DatasetSplit split_ids(std::vector<std::string> ids, std::size_t train_count, std::uint64_t seed);

struct Rect {
    std::int64_t x = 0, y = 0, w = 0, h = 0;
    [[nodiscard]] double cx() const { return static_cast<double>(x) + static_cast<double>(w - 1) / 2.0; }
    [[nodiscard]] double cy() const { return static_cast<double>(y) + static_cast<double>(h - 1) / 2.0; }
};

struct SaliencyBump {
    double cx = 0, cy = 0, sigma = 1, weight = 1;
};

/// Geometry of a synthetic page and the rule behind its ground truth.
struct SynthLayout {
    std::int64_t h = 0, w = 0;
    Rect header, nav, logo;
    std::vector<Rect> cards;
    std::vector<Rect> stripes;
    std::vector<SaliencyBump> bumps;  // logo, cards, first text block
    double prior_weight = 0.15;       // exp falloff from the top-left corner
    double prior_scale = 0.35;        // in units of the page extent
};

SynthLayout synth_layout(std::uint64_t seed, std::int64_t h, std::int64_t w);

/// Unnormalized ground-truth density of a layout at pixel (x, y).
double synth_density(const SynthLayout& layout, double x, double y);

/// Renders a layout and its ground truth; the fixation mask marks the bump centers.
WebpageSample synth_webpage(std::uint64_t seed, std::int64_t h = 64, std::int64_t w = 64);

/// `count` pages with ids synth_000, synth_001, ... and per-page seeds derived from `seed`.
std::vector<WebpageSample> synth_dataset(std::size_t count, std::uint64_t seed, std::int64_t h = 64,
                                         std::int64_t w = 64);

/// Writes samples as a dataset directory readable by load_dataset.
void write_dataset(const std::vector<WebpageSample>& samples, const std::filesystem::path& root);

/// Sample indices for one epoch: shuffled with seed ^ epoch, cut into batches,
/// last partial batch kept.
std::vector<std::vector<std::size_t>> batch_order(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                  std::uint64_t epoch);

struct Batch {
    Image images;    // (n,3,H,W)
    Image saliency;  // (n,1,H,W)
    std::vector<std::size_t> indices;
};

/// Stacks samples, padding each to the batch's max dims.
Batch make_batch(const std::vector<WebpageSample>& samples, const std::vector<std::size_t>& indices);

}  // namespace tsgan::data
