#include "tsgan/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace tsgan {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'G', 'A', 'N', 'C', 'K', 'P'};

template <typename U>
void write_le(std::ostream& os, U value) {
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U read_le(const unsigned char* p) {
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(p[i]) << (8 * i);
    return value;
}

}  // namespace

void Checkpoint::put(std::string name, Shape shape, std::vector<float> values) {
    if (static_cast<std::int64_t>(values.size()) != shape.numel())
        throw ShapeError("checkpoint entry '" + name + "' has " + std::to_string(values.size()) +
                         " values for shape " + shape.str());
    if (contains(name)) throw ValueError("duplicate checkpoint entry: " + name);
    entries_.push_back({std::move(name), shape, std::move(values)});
}

void Checkpoint::put_alias(std::string name, std::string target) {
    aliases_.emplace_back(std::move(name), std::move(target));
}

bool Checkpoint::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

const Checkpoint::Entry& Checkpoint::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw FormatError("checkpoint has no entry '" + name + "'");
}

void Checkpoint::save(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["format_version"] = kFormatVersion;
    header["metadata"] = metadata;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& e : entries_) {
        header["tensors"].push_back({{"name", e.name},
                                     {"shape", {e.shape.n, e.shape.c, e.shape.h, e.shape.w}},
                                     {"offset", offset},
                                     {"count", e.values.size()}});
        offset += e.values.size() * sizeof(float);
    }
    header["aliases"] = nlohmann::json::object();
    for (const auto& [name, target] : aliases_) header["aliases"][name] = target;
    const std::string text = header.dump();

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write checkpoint " + tmp.string());
        os.write(kMagic, sizeof kMagic);
        write_le<std::uint32_t>(os, kFormatVersion);
        write_le<std::uint64_t>(os, text.size());
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& e : entries_)
            for (float v : e.values) write_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
        if (!os) throw IoError("short write to checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    constexpr std::size_t prefix = sizeof kMagic + 4 + 8;
    if (bytes.size() < prefix || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw FormatError(path.string() + " is not a checkpoint file");
    const auto version = read_le<std::uint32_t>(bytes.data() + 8);
    if (version != kFormatVersion)
        throw FormatError("unsupported checkpoint format version " + std::to_string(version));
    const auto header_len = read_le<std::uint64_t>(bytes.data() + 12);
    if (header_len > bytes.size() - prefix) throw FormatError("truncated checkpoint header in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + prefix, bytes.begin() + static_cast<std::ptrdiff_t>(prefix + header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("corrupt checkpoint header: " + std::string(e.what()));
    }
    const unsigned char* payload = bytes.data() + prefix + header_len;
    const std::size_t payload_len = bytes.size() - prefix - header_len;

    Checkpoint ck;
    ck.metadata = header.value("metadata", nlohmann::json::object());
    for (const auto& t : header.at("tensors")) {
        const auto dims = t.at("shape").get<std::vector<std::int64_t>>();
        if (dims.size() != 4) throw FormatError("checkpoint tensor shape must have 4 dims");
        const Shape shape{dims[0], dims[1], dims[2], dims[3]};
        const auto offset = t.at("offset").get<std::uint64_t>();
        const auto count = t.at("count").get<std::uint64_t>();
        if (offset + count * sizeof(float) > payload_len)
            throw FormatError("checkpoint tensor '" + t.at("name").get<std::string>() + "' exceeds payload");
        std::vector<float> values(count);
        for (std::size_t i = 0; i < count; ++i)
            values[i] = std::bit_cast<float>(read_le<std::uint32_t>(payload + offset + i * sizeof(float)));
        ck.put(t.at("name").get<std::string>(), shape, std::move(values));
    }
    const auto aliases = header.value("aliases", nlohmann::json::object());
    for (auto it = aliases.begin(); it != aliases.end(); ++it) ck.put_alias(it.key(), it.value().get<std::string>());
    return ck;
}

}  // namespace tsgan
