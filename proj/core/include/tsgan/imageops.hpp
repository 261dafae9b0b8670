#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tsgan/tensor.hpp"

namespace tsgan::imageops {

using Image = Tensor<double>;

/// Default LoG kernel radius: ceil(3 sigma).
int default_log_radius(double sigma);

/// Sampled Laplacian-of-Gaussian, -1/(pi s^4) (1 - r^2/2s^2) exp(-r^2/2s^2),
/// on a (2r+1)^2 grid, shifted to zero mean. `radius <= 0` selects the default.
Image log_kernel(double sigma, int radius = 0);

/// BT.601 luma of an (n,3,h,w) image.
Image grayscale(const Image& image);

/// |LoG * luma| with reflect padding, before normalization. (n,1,h,w).
Image log_response(const Image& image, double sigma, int radius = 0);

/// Per-image min-max normalization to [0,1]; near-constant planes become 0.
Image minmax_normalize(const Image& map);

/// Outline map: normalized |LoG| response of the luma channel.
Image extract_outline(const Image& image, double sigma, int radius = 0);

/// Area averaging with fractional bins. Target extent must not exceed the source.
Image downsample(const Image& map, std::int64_t target_h, std::int64_t target_w);

/// Outline maps resampled to each decoder resolution.
struct OutlinePyramid {
    std::vector<Image> levels;
    double sigma = 0.0;
};

OutlinePyramid make_outline_pyramid(const Image& image, double sigma, int radius,
                                    std::span<const std::pair<std::int64_t, std::int64_t>> level_dims);

struct Point {
    std::int64_t x = 0;
    std::int64_t y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Impulse map of the points blurred by a Gaussian, max-normalized. (1,1,h,w).
Image fixations_to_saliency(std::span<const Point> points, std::int64_t h, std::int64_t w, double sigma_blur);

/// Binary (1,1,h,w) mask with ones at the points.
Image fixation_mask(std::span<const Point> points, std::int64_t h, std::int64_t w);

/// Blur scale for fixation density maps: 25 px at 1360 px width, proportional otherwise.
double scaled_blur_sigma(std::int64_t width);

enum class PadMode { reflect, zero };

/// Pads bottom/right so both extents become multiples of `multiple`.
Image pad_to_multiple(const Image& image, std::int64_t multiple, PadMode mode);

/// Pads bottom/right to exactly (h, w).
Image pad_to(const Image& image, std::int64_t h, std::int64_t w, PadMode mode);

/// Top-left (h, w) window.
Image crop(const Image& image, std::int64_t h, std::int64_t w);

}  // namespace tsgan::imageops
