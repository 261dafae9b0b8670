#include "tsgan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace tsgan::imageops {

namespace {

enum class FileKind { png, pgm };

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

FileKind sniff(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) return FileKind::png;
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return FileKind::pgm;
    throw FormatError("unsupported image format: " + path.string() + " (expected PNG or binary PGM)");
}

// Decoded pixels, interleaved, `channels` in {1, 3}, scaled to [0,1].
struct Raster {
    std::int64_t h = 0, w = 0, channels = 0;
    std::vector<double> values;
};

Raster decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path, bool want_gray) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw FormatError("corrupt PNG " + path.string() + ": " + image.message);
    image.format = want_gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("corrupt PNG " + path.string() + ": " + msg);
    }
    Raster r{image.height, image.width, want_gray ? 1 : 3, {}};
    r.values.reserve(buffer.size());
    for (png_byte b : buffer) r.values.push_back(b / 255.0);
    return r;
}

Raster decode_pgm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    std::size_t pos = 2;
    auto next_token = [&]() -> std::int64_t {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw FormatError("corrupt PGM header in " + path.string());
        std::int64_t v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            if (v > (1 << 24)) throw FormatError("corrupt PGM header in " + path.string());
        }
        return v;
    };
    const std::int64_t w = next_token(), h = next_token(), maxval = next_token();
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw FormatError("corrupt PGM header in " + path.string());
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("corrupt PGM header in " + path.string());
    ++pos;  // single whitespace before the raster
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(w * h) * bpp;
    if (bytes.size() - pos < need) throw FormatError("truncated PGM raster in " + path.string());
    Raster r{h, w, 1, {}};
    r.values.resize(static_cast<std::size_t>(w * h));
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        const unsigned v = bpp == 1 ? bytes[pos + i] : (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1];
        r.values[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
    return r;
}

Image planar(const Raster& r) {
    std::vector<double> out(r.values.size());
    const std::int64_t plane = r.h * r.w;
    for (std::int64_t i = 0; i < plane; ++i)
        for (std::int64_t c = 0; c < r.channels; ++c)
            out[static_cast<std::size_t>(c * plane + i)] = r.values[static_cast<std::size_t>(i * r.channels + c)];
    return Image::from_data({1, r.channels, r.h, r.w}, std::move(out));
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    if (sniff(bytes, path) == FileKind::png) return planar(decode_png(bytes, path, false));
    const Image gray = planar(decode_pgm(bytes, path));
    const auto g = gray.data();
    std::vector<double> rgb;
    rgb.reserve(g.size() * 3);
    for (int c = 0; c < 3; ++c) rgb.insert(rgb.end(), g.begin(), g.end());
    return Image::from_data({1, 3, gray.shape().h, gray.shape().w}, std::move(rgb));
}

Image load_grayscale(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    if (sniff(bytes, path) == FileKind::png) {
        // Decode as RGB and apply the same luma weights as the outline path.
        const Raster rgb = decode_png(bytes, path, false);
        Raster gray{rgb.h, rgb.w, 1, {}};
        gray.values.resize(static_cast<std::size_t>(rgb.h * rgb.w));
        for (std::size_t i = 0; i < gray.values.size(); ++i) {
            const double* p = rgb.values.data() + 3 * i;
            gray.values[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
        return planar(gray);
    }
    return planar(decode_pgm(bytes, path));
}

void save_image(const Image& image, const std::filesystem::path& path) {
    const Shape s = image.shape();
    if (s.n != 1 || (s.c != 1 && s.c != 3)) throw ShapeError("save_image: expected (1,1,h,w) or (1,3,h,w), got " + s.str());
    const std::string ext = lower_extension(path);
    const std::int64_t plane = s.h * s.w;
    const auto src = image.data();
    std::vector<std::uint8_t> interleaved(static_cast<std::size_t>(plane * s.c));
    for (std::int64_t i = 0; i < plane; ++i)
        for (std::int64_t c = 0; c < s.c; ++c)
            interleaved[static_cast<std::size_t>(i * s.c + c)] = quantize(src[static_cast<std::size_t>(c * plane + i)]);

    if (ext == ".pgm") {
        if (s.c != 1) throw ShapeError("save_image: PGM output needs a single-channel image");
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + path.string());
        os << "P5\n" << s.w << " " << s.h << "\n255\n";
        os.write(reinterpret_cast<const char*>(interleaved.data()), static_cast<std::streamsize>(interleaved.size()));
        if (!os) throw IoError("short write to " + path.string());
        return;
    }
    if (ext != ".png") throw FormatError("unsupported output format '" + ext + "' for " + path.string());

    png_image out;
    std::memset(&out, 0, sizeof out);
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(s.w);
    out.height = static_cast<png_uint_32>(s.h);
    out.format = s.c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&out, path.string().c_str(), 0, interleaved.data(), 0, nullptr))
        throw IoError("cannot write PNG " + path.string() + ": " + out.message);
}

Image heatmap_overlay(const Image& map, const Image& base) {
    const Shape ms = map.shape(), bs = base.shape();
    if (ms.n != 1 || ms.c != 1) throw ShapeError("heatmap: map must be (1,1,h,w), got " + ms.str());
    if (bs.n != 1 || bs.c != 3 || bs.h != ms.h || bs.w != ms.w)
        throw ShapeError("heatmap: stimulus " + bs.str() + " does not match map " + ms.str());
    const auto& table = heatmap_colormap();
    const std::int64_t plane = ms.h * ms.w;
    std::vector<double> out(static_cast<std::size_t>(3 * plane));
    for (std::int64_t i = 0; i < plane; ++i) {
        const auto& color = table[quantize(map.data()[static_cast<std::size_t>(i)])];
        for (int c = 0; c < 3; ++c) {
            const auto idx = static_cast<std::size_t>(c * plane + i);
            out[idx] = 0.5 * base.data()[idx] + 0.5 * (color[static_cast<std::size_t>(c)] / 255.0);
        }
    }
    return Image::from_data({1, 3, ms.h, ms.w}, std::move(out));
}

void save_heatmap(const Image& map, const Image& base, const std::filesystem::path& path) {
    save_image(heatmap_overlay(map, base), path);
}

}  // namespace tsgan::imageops
