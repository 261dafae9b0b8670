#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsgan/tensor.hpp"

namespace tsgan {

/// Binary checkpoint container.
///
/// Layout (all integers little-endian):
///   8 bytes   magic "TSGANCKP"
///   u32       format version
///   u64       header length in bytes
///   header    UTF-8 JSON: {"format_version", "metadata", "tensors": [{name, shape, offset, count}],
///             "aliases": {name: target}}
///   payload   float32 little-endian values; tensor offsets are relative to payload start
class Checkpoint {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    struct Entry {
        std::string name;
        Shape shape;
        std::vector<float> values;
    };

    nlohmann::json metadata = nlohmann::json::object();

    void put(std::string name, Shape shape, std::vector<float> values);
    void put_alias(std::string name, std::string target);

    [[nodiscard]] bool contains(const std::string& name) const;
    [[nodiscard]] const Entry& get(const std::string& name) const;
    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& aliases() const { return aliases_; }

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

private:
    std::vector<Entry> entries_;
    std::vector<std::pair<std::string, std::string>> aliases_;
};

}  // namespace tsgan
