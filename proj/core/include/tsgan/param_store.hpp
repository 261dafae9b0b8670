#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tsgan/tensor.hpp"

namespace tsgan {

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
};

/// Insertion-ordered name -> parameter map. An alias is a second name bound
/// to the same storage as an existing entry.
template <typename T>
class ParamStore {
public:
    void add(const std::string& name, Tensor<T> tensor) {
        if (index_.count(name)) throw ValueError("duplicate parameter name: " + name);
        index_.emplace(name, entries_.size());
        entries_.push_back({name, std::move(tensor)});
        canonical_.push_back(name);
    }

    void alias(const std::string& name, const std::string& target) {
        if (index_.count(name)) throw ValueError("duplicate parameter name: " + name);
        const std::size_t t = position(target);
        index_.emplace(name, entries_.size());
        entries_.push_back({name, entries_[t].tensor});
        canonical_.push_back(canonical_[t]);
    }

    [[nodiscard]] bool contains(const std::string& name) const { return index_.count(name) != 0; }
    [[nodiscard]] const Tensor<T>& get(const std::string& name) const { return entries_[position(name)].tensor; }
    [[nodiscard]] Tensor<T>& get(const std::string& name) { return entries_[position(name)].tensor; }

    /// Name of the entry that owns the storage `name` resolves to.
    [[nodiscard]] const std::string& canonical(const std::string& name) const { return canonical_[position(name)]; }
    [[nodiscard]] bool is_alias(const std::string& name) const { return canonical(name) != name; }

    [[nodiscard]] const std::vector<NamedTensor<T>>& entries() const { return entries_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

    /// One entry per distinct storage, in insertion order, under its owning name.
    [[nodiscard]] std::vector<NamedTensor<T>> unique() const {
        std::vector<NamedTensor<T>> out;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (canonical_[i] == entries_[i].name) out.push_back(entries_[i]);
        return out;
    }

    /// Unique entries whose owning name starts with `prefix`.
    [[nodiscard]] std::vector<NamedTensor<T>> unique_with_prefix(const std::string& prefix) const {
        std::vector<NamedTensor<T>> out;
        for (auto& e : unique())
            if (e.name.rfind(prefix, 0) == 0) out.push_back(e);
        return out;
    }

    [[nodiscard]] std::int64_t parameter_count() const {
        std::int64_t total = 0;
        for (const auto& e : unique()) total += e.tensor.numel();
        return total;
    }

    void zero_grad() {
        for (auto& e : entries_) e.tensor.zero_grad();
    }

private:
    std::size_t position(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ValueError("unknown parameter: " + name);
        return it->second;
    }

    std::vector<NamedTensor<T>> entries_;
    std::vector<std::string> canonical_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tsgan
