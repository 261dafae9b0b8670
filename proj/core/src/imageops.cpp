#include "tsgan/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace tsgan::imageops {

namespace {

// Mirror index into [0, n) without repeating the edge sample.
std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

void require_channels(const Image& image, std::int64_t channels, const char* op) {
    if (image.shape().c != channels)
        throw ShapeError(std::string(op) + ": expected " + std::to_string(channels) + " channel(s), got shape " +
                         image.shape().str());
}

// Fraction of source cell [i, i+1) covered by target bin t when `src` cells map
// onto `dst` bins; rows of the result sum to 1.
std::vector<std::vector<std::pair<std::int64_t, double>>> area_weights(std::int64_t src, std::int64_t dst) {
    std::vector<std::vector<std::pair<std::int64_t, double>>> bins(static_cast<std::size_t>(dst));
    const double ratio = static_cast<double>(src) / static_cast<double>(dst);
    for (std::int64_t t = 0; t < dst; ++t) {
        const double lo = t * ratio, hi = (t + 1) * ratio;
        for (auto i = static_cast<std::int64_t>(std::floor(lo)); i < src && static_cast<double>(i) < hi; ++i) {
            const double overlap = std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
            if (overlap > 0) bins[static_cast<std::size_t>(t)].emplace_back(i, overlap / ratio);
        }
    }
    return bins;
}

}  // namespace

int default_log_radius(double sigma) { return static_cast<int>(std::ceil(3.0 * sigma)); }

Image log_kernel(double sigma, int radius) {
    if (!(sigma > 0.0)) throw ValueError("log_kernel: sigma must be > 0, got " + std::to_string(sigma));
    if (radius <= 0) radius = default_log_radius(sigma);
    const int size = 2 * radius + 1;
    std::vector<double> k(static_cast<std::size_t>(size * size));
    const double s2 = sigma * sigma;
    const double norm = -1.0 / (std::numbers::pi * s2 * s2);
    double total = 0;
    for (int y = -radius; y <= radius; ++y) {
        for (int x = -radius; x <= radius; ++x) {
            const double q = (x * x + y * y) / (2.0 * s2);
            const double v = norm * (1.0 - q) * std::exp(-q);
            k[static_cast<std::size_t>((y + radius) * size + (x + radius))] = v;
            total += v;
        }
    }
    const double shift = total / static_cast<double>(k.size());
    for (auto& v : k) v -= shift;
    return Image::from_data({1, 1, size, size}, std::move(k));
}

Image grayscale(const Image& image) {
    require_channels(image, 3, "grayscale");
    const Shape s = image.shape();
    const std::int64_t plane = s.h * s.w;
    std::vector<double> out(static_cast<std::size_t>(s.n * plane));
    const auto src = image.data();
    for (std::int64_t n = 0; n < s.n; ++n) {
        const double* r = src.data() + n * 3 * plane;
        for (std::int64_t i = 0; i < plane; ++i)
            out[static_cast<std::size_t>(n * plane + i)] = 0.299 * r[i] + 0.587 * r[plane + i] + 0.114 * r[2 * plane + i];
    }
    return Image::from_data({s.n, 1, s.h, s.w}, std::move(out));
}

Image log_response(const Image& image, double sigma, int radius) {
    const Image kernel = log_kernel(sigma, radius);
    const std::int64_t r = kernel.shape().h / 2, size = kernel.shape().h;
    const Image gray = grayscale(image);
    const Shape s = gray.shape();
    const auto src = gray.data();
    const auto k = kernel.data();
    std::vector<double> out(src.size());
    for (std::int64_t n = 0; n < s.n; ++n) {
        const double* g = src.data() + n * s.h * s.w;
        for (std::int64_t y = 0; y < s.h; ++y) {
            for (std::int64_t x = 0; x < s.w; ++x) {
                double acc = 0;
                for (std::int64_t ky = 0; ky < size; ++ky) {
                    const std::int64_t iy = reflect_index(y + ky - r, s.h);
                    for (std::int64_t kx = 0; kx < size; ++kx)
                        acc += k[static_cast<std::size_t>(ky * size + kx)] * g[iy * s.w + reflect_index(x + kx - r, s.w)];
                }
                out[static_cast<std::size_t>((n * s.h + y) * s.w + x)] = std::abs(acc);
            }
        }
    }
    return Image::from_data(s, std::move(out));
}

Image minmax_normalize(const Image& map) {
    const Shape s = map.shape();
    const std::int64_t per_image = s.c * s.h * s.w;
    std::vector<double> out(map.data().begin(), map.data().end());
    for (std::int64_t n = 0; n < s.n; ++n) {
        auto first = out.begin() + n * per_image, last = first + per_image;
        const auto [lo, hi] = std::minmax_element(first, last);
        const double min = *lo, range = *hi - *lo;
        // Zero-mean kernels leave ~1e-17 residue on flat input; that is not an edge.
        if (range <= 1e-9) {
            std::fill(first, last, 0.0);
            continue;
        }
        for (auto it = first; it != last; ++it) *it = (*it - min) / range;
    }
    return Image::from_data(s, std::move(out));
}

Image extract_outline(const Image& image, double sigma, int radius) {
    return minmax_normalize(log_response(image, sigma, radius));
}

Image downsample(const Image& map, std::int64_t target_h, std::int64_t target_w) {
    const Shape s = map.shape();
    if (target_h < 1 || target_w < 1) throw ValueError("downsample: target extent must be >= 1");
    if (target_h > s.h || target_w > s.w)
        throw ValueError("downsample: cannot upsample " + std::to_string(s.h) + "x" + std::to_string(s.w) + " to " +
                         std::to_string(target_h) + "x" + std::to_string(target_w));
    const auto wy = area_weights(s.h, target_h);
    const auto wx = area_weights(s.w, target_w);
    const auto src = map.data();
    std::vector<double> out(static_cast<std::size_t>(s.n * s.c * target_h * target_w), 0.0);
    std::vector<double> row(static_cast<std::size_t>(target_w));
    for (std::int64_t p = 0; p < s.n * s.c; ++p) {
        const double* plane = src.data() + p * s.h * s.w;
        for (std::int64_t ty = 0; ty < target_h; ++ty) {
            double* dst = out.data() + (p * target_h + ty) * target_w;
            for (const auto& [iy, fy] : wy[static_cast<std::size_t>(ty)]) {
                for (std::int64_t tx = 0; tx < target_w; ++tx) {
                    double acc = 0;
                    for (const auto& [ix, fx] : wx[static_cast<std::size_t>(tx)]) acc += fx * plane[iy * s.w + ix];
                    dst[tx] += fy * acc;
                }
            }
        }
    }
    return Image::from_data({s.n, s.c, target_h, target_w}, std::move(out));
}

OutlinePyramid make_outline_pyramid(const Image& image, double sigma, int radius,
                                    std::span<const std::pair<std::int64_t, std::int64_t>> level_dims) {
    const Image outline = extract_outline(image, sigma, radius);
    OutlinePyramid pyramid;
    pyramid.sigma = sigma;
    for (const auto& [h, w] : level_dims) {
        Image level = (h == outline.shape().h && w == outline.shape().w) ? outline : downsample(outline, h, w);
        // Area averaging of a [0,1] map stays in [0,1] up to rounding; renormalize for the invariant.
        pyramid.levels.push_back(minmax_normalize(level));
    }
    return pyramid;
}

Image fixations_to_saliency(std::span<const Point> points, std::int64_t h, std::int64_t w, double sigma_blur) {
    if (!(sigma_blur > 0.0)) throw ValueError("fixations_to_saliency: sigma_blur must be > 0");
    if (h < 1 || w < 1) throw ValueError("fixations_to_saliency: map extent must be >= 1");
    std::string bad;
    for (const auto& p : points) {
        if (p.x < 0 || p.x >= w || p.y < 0 || p.y >= h)
            bad += " (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
    }
    if (!bad.empty())
        throw ValueError("fixation points outside " + std::to_string(w) + "x" + std::to_string(h) + " image:" + bad);

    std::vector<double> impulses(static_cast<std::size_t>(h * w), 0.0);
    for (const auto& p : points) impulses[static_cast<std::size_t>(p.y * w + p.x)] += 1.0;
    if (points.empty()) return Image::from_data({1, 1, h, w}, std::move(impulses));

    const auto radius = static_cast<std::int64_t>(std::ceil(4.0 * sigma_blur));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    for (std::int64_t i = -radius; i <= radius; ++i)
        taps[static_cast<std::size_t>(i + radius)] = std::exp(-(double(i * i)) / (2.0 * sigma_blur * sigma_blur));

    // Separable blur with zero boundary.
    std::vector<double> tmp(impulses.size(), 0.0), out(impulses.size(), 0.0);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0;
            for (std::int64_t k = std::max<std::int64_t>(-radius, -x); k <= std::min(radius, w - 1 - x); ++k)
                acc += taps[static_cast<std::size_t>(k + radius)] * impulses[static_cast<std::size_t>(y * w + x + k)];
            tmp[static_cast<std::size_t>(y * w + x)] = acc;
        }
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0;
            for (std::int64_t k = std::max<std::int64_t>(-radius, -y); k <= std::min(radius, h - 1 - y); ++k)
                acc += taps[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>((y + k) * w + x)];
            out[static_cast<std::size_t>(y * w + x)] = acc;
        }
    const double peak = *std::max_element(out.begin(), out.end());
    for (auto& v : out) v /= peak;
    return Image::from_data({1, 1, h, w}, std::move(out));
}

Image fixation_mask(std::span<const Point> points, std::int64_t h, std::int64_t w) {
    std::vector<double> mask(static_cast<std::size_t>(h * w), 0.0);
    for (const auto& p : points) {
        if (p.x < 0 || p.x >= w || p.y < 0 || p.y >= h)
            throw ValueError("fixation point (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside image");
        mask[static_cast<std::size_t>(p.y * w + p.x)] = 1.0;
    }
    return Image::from_data({1, 1, h, w}, std::move(mask));
}

double scaled_blur_sigma(std::int64_t width) { return 25.0 * static_cast<double>(width) / 1360.0; }

Image pad_to(const Image& image, std::int64_t h, std::int64_t w, PadMode mode) {
    const Shape s = image.shape();
    if (h < s.h || w < s.w) throw ValueError("pad_to: target smaller than image " + s.str());
    if (h == s.h && w == s.w) return image;
    const auto src = image.data();
    std::vector<double> out(static_cast<std::size_t>(s.n * s.c * h * w), 0.0);
    for (std::int64_t p = 0; p < s.n * s.c; ++p)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                double v;
                if (y < s.h && x < s.w) {
                    v = src[static_cast<std::size_t>((p * s.h + y) * s.w + x)];
                } else if (mode == PadMode::zero) {
                    v = 0.0;
                } else {
                    v = src[static_cast<std::size_t>((p * s.h + reflect_index(y, s.h)) * s.w + reflect_index(x, s.w))];
                }
                out[static_cast<std::size_t>((p * h + y) * w + x)] = v;
            }
    return Image::from_data({s.n, s.c, h, w}, std::move(out));
}

Image pad_to_multiple(const Image& image, std::int64_t multiple, PadMode mode) {
    if (multiple < 1) throw ValueError("pad_to_multiple: multiple must be >= 1");
    const Shape s = image.shape();
    auto up = [multiple](std::int64_t v) { return (v + multiple - 1) / multiple * multiple; };
    return pad_to(image, up(s.h), up(s.w), mode);
}

Image crop(const Image& image, std::int64_t h, std::int64_t w) {
    const Shape s = image.shape();
    if (h > s.h || w > s.w || h < 1 || w < 1) throw ValueError("crop: window larger than image " + s.str());
    if (h == s.h && w == s.w) return image;
    const auto src = image.data();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(s.n * s.c * h * w));
    for (std::int64_t p = 0; p < s.n * s.c; ++p)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) out.push_back(src[static_cast<std::size_t>((p * s.h + y) * s.w + x)]);
    return Image::from_data({s.n, s.c, h, w}, std::move(out));
}

}  // namespace tsgan::imageops
