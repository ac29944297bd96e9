#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bhv {

// Fixed, ordered collection of distinct leaf labels. The position of a label
// defines its bit index in split masks for the lifetime of the set, which in
// turn fixes the coordinate order of every vector built over these leaves.
class TaxonSet {
  public:
    explicit TaxonSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.size() < 2) throw std::invalid_argument("taxon set needs at least 2 labels");
        if (labels_.size() > 64) throw std::invalid_argument("taxon set supports at most 64 labels");
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i].empty()) throw std::invalid_argument("empty taxon label");
            if (!index_.emplace(labels_[i], i).second)
                throw std::invalid_argument("duplicate taxon label: " + labels_[i]);
        }
    }

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(std::size_t i) const { return labels_.at(i); }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("unknown taxon label: " + name);
        return it->second;
    }

    // Bitmask with one bit per leaf, all set.
    std::uint64_t full_mask() const {
        return labels_.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << labels_.size()) - 1;
    }

    bool operator==(const TaxonSet& o) const { return labels_ == o.labels_; }
    bool operator!=(const TaxonSet& o) const { return !(*this == o); }

  private:
    std::vector<std::string> labels_;
    std::map<std::string, std::size_t> index_;
};

using TaxonSetPtr = std::shared_ptr<const TaxonSet>;

inline TaxonSetPtr make_taxa(std::vector<std::string> labels) {
    return std::make_shared<const TaxonSet>(std::move(labels));
}

// True when both handles describe the same leaf set (pointer fast path).
inline bool same_taxa(const TaxonSetPtr& a, const TaxonSetPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return *a == *b;
}

}  // namespace bhv
