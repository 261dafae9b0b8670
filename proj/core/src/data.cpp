#include "tsgan/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tsgan/error.hpp"
#include "tsgan/image_io.hpp"
#include "tsgan/rng.hpp"

namespace tsgan::data {

namespace fs = std::filesystem;

Category parse_category(const std::string& name) {
    if (name == "textual") return Category::textual;
    if (name == "pictorial") return Category::pictorial;
    if (name == "mixed") return Category::mixed;
    if (name == "synthetic") return Category::synthetic;
    if (name == "unspecified") return Category::unspecified;
    throw ValueError("unknown category '" + name + "' (expected textual, pictorial, mixed or synthetic)");
}

std::string to_string(Category c) {
    switch (c) {
        case Category::textual: return "textual";
        case Category::pictorial: return "pictorial";
        case Category::mixed: return "mixed";
        case Category::synthetic: return "synthetic";
        case Category::unspecified: break;
    }
    return "unspecified";
}

void validate_sample(const WebpageSample& s) {
    auto fail = [&](const std::string& msg) { throw ValueError("sample '" + s.id + "': " + msg); };
    const Shape is = s.image.shape(), ss = s.saliency.shape();
    if (is.n != 1 || is.c != 3) fail("image must be (1,3,h,w), got " + is.str());
    if (ss.n != 1 || ss.c != 1 || ss.h != is.h || ss.w != is.w)
        fail("saliency " + ss.str() + " does not match image " + is.str());
    if (is.h % 16 != 0 || is.w % 16 != 0) fail("dims " + is.str() + " are not multiples of 16");
    if (s.original_h < 1 || s.original_w < 1 || s.original_h > is.h || s.original_w > is.w)
        fail("original dims exceed padded dims");
    double peak = 0;
    for (double v : s.saliency.data()) {
        if (!(v >= 0.0 && v <= 1.0)) fail("saliency value outside [0,1]");
        peak = std::max(peak, v);
    }
    if (s.fixation_mask) {
        const Shape ms = s.fixation_mask->shape();
        if (!(ms == ss)) fail("fixation mask " + ms.str() + " does not match saliency " + ss.str());
        bool any = false;
        for (double v : s.fixation_mask->data()) {
            if (v != 0.0 && v != 1.0) fail("fixation mask is not binary");
            any = any || v == 1.0;
        }
        if (any && peak != 1.0) fail("saliency max must be 1 when fixations exist");
    }
}

std::vector<imageops::Point> read_fixations(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open fixation file " + path.string());
    std::vector<imageops::Point> points;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::int64_t x = 0, y = 0;
        std::string rest;
        if (!(ls >> x >> y) || (ls >> rest))
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'x y', got '" + line + "'");
        points.push_back({x, y});
    }
    return points;
}

namespace {

std::optional<fs::path> find_image(const fs::path& dir, const std::string& id) {
    for (const char* ext : {".png", ".pgm", ".PNG", ".PGM"}) {
        fs::path p = dir / (id + ext);
        if (fs::exists(p)) return p;
    }
    return std::nullopt;
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".pgm";
}

std::map<std::string, Category> read_categories(const fs::path& path) {
    std::map<std::string, Category> out;
    if (!fs::exists(path)) return out;
    std::ifstream is(path);
    std::string id, name;
    while (is >> id >> name) out[id] = parse_category(name);
    return out;
}

Image max_normalize(const Image& map) {
    const auto d = map.data();
    const double peak = d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
    if (peak <= 0) return Image::zeros(map.shape());
    std::vector<double> out(d.begin(), d.end());
    for (auto& v : out) v = std::clamp(v / peak, 0.0, 1.0);
    return Image::from_data(map.shape(), std::move(out));
}

std::uint64_t fnv1a(std::uint64_t h, std::span<const double> values) {
    for (double v : values) {
        const auto byte = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        h ^= byte;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

std::vector<WebpageSample> load_dataset(const fs::path& root, double blur_sigma) {
    const fs::path stimuli = root / "stimuli", fixmaps = root / "fixmaps", fixations = root / "fixations";
    if (!fs::is_directory(stimuli)) throw IoError("dataset root " + root.string() + " has no stimuli/ directory");
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(stimuli))
        if (entry.is_regular_file() && is_image_file(entry.path())) ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw IoError("no PNG/PGM stimuli under " + stimuli.string());
    const auto categories = read_categories(root / "categories.txt");

    std::vector<WebpageSample> samples;
    std::vector<std::string> problems;
    for (const auto& id : ids) {
        const auto fixmap = find_image(fixmaps, id);
        const fs::path points_path = fixations / (id + ".txt");
        const bool has_points = fs::exists(points_path);
        if (!fixmap && !has_points) {
            problems.push_back(id + ": no ground truth (looked for " + (fixmaps / (id + ".png")).string() + " and " +
                               points_path.string() + ")");
            continue;
        }
        try {
            const Image image = imageops::load_image(*find_image(stimuli, id));
            const std::int64_t h = image.shape().h, w = image.shape().w;
            std::optional<Image> mask;
            std::optional<std::vector<imageops::Point>> points;
            if (has_points) {
                points = read_fixations(points_path);
                mask = imageops::fixation_mask(*points, h, w);
            }
            Image saliency;
            if (fixmap) {
                saliency = max_normalize(imageops::load_grayscale(*fixmap));
                if (saliency.shape().h != h || saliency.shape().w != w)
                    throw ShapeError("fixation map " + fixmap->string() + " is " + saliency.shape().str() +
                                     ", stimulus is " + image.shape().str());
            } else {
                const double sigma = blur_sigma > 0 ? blur_sigma : imageops::scaled_blur_sigma(w);
                saliency = imageops::fixations_to_saliency(*points, h, w, sigma);
            }
            WebpageSample s;
            s.id = id;
            s.original_h = h;
            s.original_w = w;
            s.image = imageops::pad_to_multiple(image, 16, imageops::PadMode::reflect);
            s.saliency = imageops::pad_to_multiple(saliency, 16, imageops::PadMode::zero);
            if (mask) s.fixation_mask = imageops::pad_to_multiple(*mask, 16, imageops::PadMode::zero);
            const auto cat = categories.find(id);
            s.category = cat == categories.end() ? Category::unspecified : cat->second;
            validate_sample(s);
            samples.push_back(std::move(s));
        } catch (const Error& e) {
            problems.push_back(id + ": " + e.what());
        }
    }
    if (!problems.empty()) {
        std::string msg = "dataset " + root.string() + " has " + std::to_string(problems.size()) + " bad item(s):";
        for (const auto& p : problems) msg += "\n  " + p;
        throw IoError(msg);
    }
    return samples;
}

nlohmann::json manifest(const std::vector<WebpageSample>& samples) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& s : samples) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        h = fnv1a(h, s.image.data());
        h = fnv1a(h, s.saliency.data());
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
        items.push_back({{"id", s.id},
                         {"height", s.image.shape().h},
                         {"width", s.image.shape().w},
                         {"original_height", s.original_h},
                         {"original_width", s.original_w},
                         {"category", to_string(s.category)},
                         {"has_fixations", s.fixation_mask.has_value()},
                         {"checksum", std::string("fnv1a64:") + hex}});
    }
    return {{"count", samples.size()}, {"items", items}};
}

DatasetSplit split_ids(std::vector<std::string> ids, std::size_t train_count, std::uint64_t seed) {
    if (train_count == 0 || train_count >= ids.size())
        throw ValueError("train count " + std::to_string(train_count) + " must be in [1, " +
                         std::to_string(ids.size()) + ")");
    SplitMix64 rng(seed);
    rng.shuffle(ids);
    DatasetSplit split;
    split.seed = seed;
    split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(train_count));
    split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(train_count), ids.end());
    return split;
}

DatasetSplit split_dataset(const std::vector<WebpageSample>& samples, std::size_t train_count, std::uint64_t seed) {
    std::vector<std::string> ids;
    ids.reserve(samples.size());
    for (const auto& s : samples) ids.push_back(s.id);
    return split_ids(std::move(ids), train_count, seed);
}

namespace {

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, 8> kPalette{{
    {0.85, 0.15, 0.15},
    {0.10, 0.45, 0.85},
    {0.95, 0.60, 0.05},
    {0.15, 0.65, 0.25},
    {0.60, 0.20, 0.75},
    {0.05, 0.70, 0.70},
    {0.90, 0.25, 0.55},
    {0.35, 0.35, 0.80},
}};

std::int64_t iround(double v) { return static_cast<std::int64_t>(std::lround(v)); }

void fill(std::vector<double>& rgb, std::int64_t h, std::int64_t w, const Rect& r, const Rgb& color) {
    for (std::int64_t y = std::max<std::int64_t>(0, r.y); y < std::min(h, r.y + r.h); ++y)
        for (std::int64_t x = std::max<std::int64_t>(0, r.x); x < std::min(w, r.x + r.w); ++x)
            for (int c = 0; c < 3; ++c) rgb[static_cast<std::size_t>((c * h + y) * w + x)] = color[c];
}

}  // namespace

SynthLayout synth_layout(std::uint64_t seed, std::int64_t h, std::int64_t w) {
    if (h < 64 || w < 64 || h % 16 != 0 || w % 16 != 0)
        throw ValueError("synthetic page dims must be multiples of 16 and >= 64, got " + std::to_string(h) + "x" +
                         std::to_string(w));
    SplitMix64 rng(seed);
    SynthLayout L;
    L.h = h;
    L.w = w;
    const std::int64_t margin = std::max<std::int64_t>(2, w / 32);

    const std::int64_t hh = std::max<std::int64_t>(6, iround(static_cast<double>(h) * rng.uniform(0.10, 0.14)));
    L.header = {0, 0, w, hh};
    const std::int64_t side = std::max<std::int64_t>(4, iround(static_cast<double>(hh) * 0.7));
    L.logo = {iround(static_cast<double>(w) * rng.uniform(0.02, 0.05)), (hh - side) / 2,
              iround(static_cast<double>(side) * rng.uniform(1.2, 1.8)), side};
    L.nav = {0, hh, iround(static_cast<double>(w) * rng.uniform(0.14, 0.20)), h - hh};

    const std::int64_t x0 = L.nav.w + margin, x1 = w - margin, y0 = hh + margin;
    const std::int64_t content_w = x1 - x0;
    const auto n_cards = static_cast<std::int64_t>(rng.between(1, 3));
    const std::int64_t card_h = iround(static_cast<double>(h) * rng.uniform(0.22, 0.28));
    const std::int64_t card_w = (content_w - (n_cards - 1) * margin) / n_cards;
    for (std::int64_t i = 0; i < n_cards; ++i) L.cards.push_back({x0 + i * (card_w + margin), y0, card_w, card_h});

    const std::int64_t thick = std::max<std::int64_t>(1, h / 64);
    const std::int64_t pitch = thick + std::max<std::int64_t>(2, h / 32);
    const std::int64_t y_text = y0 + card_h + margin;
    const auto first_block = static_cast<std::size_t>(rng.between(3, 4));
    std::int64_t y = y_text;
    for (std::size_t k = 0; y + thick <= h - margin; ++k) {
        if (k == first_block) y += pitch;  // paragraph break after the first block
        if (y + thick > h - margin) break;
        const std::int64_t len = iround(static_cast<double>(content_w) * rng.uniform(0.6, 1.0));
        L.stripes.push_back({x0, y, len, thick});
        y += pitch;
    }
    if (L.stripes.size() < 3) throw ValueError("page too small for three text stripes");

    Rect block = L.stripes.front();
    for (std::size_t k = 1; k < std::min(first_block, L.stripes.size()); ++k) {
        const Rect& s = L.stripes[k];
        block.w = std::max(block.w, s.w);
        block.h = s.y + s.h - block.y;
    }
    auto extent = [](const Rect& r) { return static_cast<double>(std::min(r.w, r.h)); };
    L.bumps.push_back({L.logo.cx(), L.logo.cy(), std::max(2.0, 0.6 * static_cast<double>(std::max(L.logo.w, L.logo.h))),
                       1.0});
    for (const auto& c : L.cards) L.bumps.push_back({c.cx(), c.cy(), std::max(2.0, 0.3 * extent(c)), 0.7});
    L.bumps.push_back({block.cx(), block.cy(), std::max(2.0, 0.35 * extent(block)), 0.5});
    return L;
}

double synth_density(const SynthLayout& L, double x, double y) {
    double v = 0;
    for (const auto& b : L.bumps) {
        const double dx = x - b.cx, dy = y - b.cy;
        v += b.weight * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma));
    }
    const double u = x / static_cast<double>(L.w), t = y / static_cast<double>(L.h);
    return v + L.prior_weight * std::exp(-(u * u + t * t) / (2 * L.prior_scale * L.prior_scale));
}

WebpageSample synth_webpage(std::uint64_t seed, std::int64_t h, std::int64_t w) {
    const SynthLayout L = synth_layout(seed, h, w);
    SplitMix64 rng(mix_seed(seed, 0xC0102));
    const double bg = rng.uniform(0.92, 0.98);
    std::vector<double> rgb(static_cast<std::size_t>(3 * h * w), bg);
    auto pick = [&] { return kPalette[static_cast<std::size_t>(rng.below(kPalette.size()))]; };

    Rgb header = pick();
    for (auto& c : header) c *= 0.55;
    fill(rgb, h, w, L.header, header);
    const double nav = rng.uniform(0.78, 0.86);
    fill(rgb, h, w, L.nav, {nav, nav, nav});
    Rgb logo = pick();
    while (logo == header) logo = pick();
    fill(rgb, h, w, L.logo, logo);
    for (const auto& c : L.cards) fill(rgb, h, w, c, pick());
    for (const auto& s : L.stripes) {
        const double ink = rng.uniform(0.08, 0.25);
        fill(rgb, h, w, s, {ink, ink, ink});
    }

    std::vector<double> density(static_cast<std::size_t>(h * w));
    double peak = 0;
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            const double v = synth_density(L, static_cast<double>(x), static_cast<double>(y));
            density[static_cast<std::size_t>(y * w + x)] = v;
            peak = std::max(peak, v);
        }
    for (auto& v : density) v /= peak;

    std::vector<imageops::Point> points;
    for (const auto& b : L.bumps) points.push_back({iround(b.cx), iround(b.cy)});

    WebpageSample s;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%016llx", static_cast<unsigned long long>(seed));
    s.id = id;
    s.image = Image::from_data({1, 3, h, w}, std::move(rgb));
    s.saliency = Image::from_data({1, 1, h, w}, std::move(density));
    s.fixation_mask = imageops::fixation_mask(points, h, w);
    s.category = Category::synthetic;
    s.original_h = h;
    s.original_w = w;
    validate_sample(s);
    return s;
}

std::vector<WebpageSample> synth_dataset(std::size_t count, std::uint64_t seed, std::int64_t h, std::int64_t w) {
    std::vector<WebpageSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        WebpageSample s = synth_webpage(mix_seed(seed, i), h, w);
        char id[32];
        std::snprintf(id, sizeof id, "synth_%03zu", i);
        s.id = id;
        out.push_back(std::move(s));
    }
    return out;
}

void write_dataset(const std::vector<WebpageSample>& samples, const fs::path& root) {
    for (const char* sub : {"stimuli", "fixmaps", "fixations"}) fs::create_directories(root / sub);
    std::ofstream categories(root / "categories.txt", std::ios::trunc);
    if (!categories) throw IoError("cannot write " + (root / "categories.txt").string());
    for (const auto& s : samples) {
        imageops::save_image(imageops::crop(s.image, s.original_h, s.original_w), root / "stimuli" / (s.id + ".png"));
        imageops::save_image(imageops::crop(s.saliency, s.original_h, s.original_w),
                             root / "fixmaps" / (s.id + ".png"));
        if (s.fixation_mask) {
            std::ofstream pts(root / "fixations" / (s.id + ".txt"), std::ios::trunc);
            const auto m = s.fixation_mask->data();
            for (std::int64_t y = 0; y < s.original_h; ++y)
                for (std::int64_t x = 0; x < s.original_w; ++x)
                    if (m[static_cast<std::size_t>(y * s.fixation_mask->shape().w + x)] != 0.0)
                        pts << x << ' ' << y << '\n';
        }
        categories << s.id << ' ' << to_string(s.category) << '\n';
    }
}

std::vector<std::vector<std::size_t>> batch_order(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                  std::uint64_t epoch) {
    if (count == 0) throw ValueError("cannot batch an empty split");
    if (batch_size == 0) throw ValueError("batch size must be >= 1");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    SplitMix64 rng(seed ^ epoch);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < count; i += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(count, i + batch_size)));
    return batches;
}

Batch make_batch(const std::vector<WebpageSample>& samples, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ValueError("empty batch");
    std::int64_t H = 0, W = 0;
    for (auto i : indices) {
        H = std::max(H, samples.at(i).image.shape().h);
        W = std::max(W, samples.at(i).image.shape().w);
    }
    const auto n = static_cast<std::int64_t>(indices.size());
    std::vector<double> images, saliency;
    images.reserve(static_cast<std::size_t>(n * 3 * H * W));
    saliency.reserve(static_cast<std::size_t>(n * H * W));
    for (auto i : indices) {
        const auto& s = samples[i];
        const Image im = imageops::pad_to(s.image, H, W, imageops::PadMode::reflect);
        const Image sal = imageops::pad_to(s.saliency, H, W, imageops::PadMode::zero);
        images.insert(images.end(), im.data().begin(), im.data().end());
        saliency.insert(saliency.end(), sal.data().begin(), sal.data().end());
    }
    return {Image::from_data({n, 3, H, W}, std::move(images)), Image::from_data({n, 1, H, W}, std::move(saliency)),
            indices};
}

}  // namespace tsgan::data
