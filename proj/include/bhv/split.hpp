#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "taxa.hpp"

namespace bhv {

// A bipartition of the leaf set, stored canonically as the side that does not
// contain leaf 0. Two complementary subsets therefore construct equal values,
// and numeric mask order gives a fixed total order on splits (the bitstring
// read from leaf 0 upward), used for every deterministic iteration.
class Split {
  public:
    Split(std::uint64_t subset, TaxonSetPtr taxa) : taxa_(std::move(taxa)) {
        const std::uint64_t full = taxa_->full_mask();
        subset &= full;
        if (subset == 0 || subset == full)
            throw std::invalid_argument("split side must be a nonempty proper subset of the leaves");
        mask_ = (subset & 1u) ? (full & ~subset) : subset;
    }

    // Canonical side (never contains leaf 0).
    std::uint64_t side() const { return mask_; }
    std::uint64_t other_side() const { return taxa_->full_mask() & ~mask_; }

    bool contains(std::size_t leaf) const { return (mask_ >> leaf) & 1u; }

    // Interior splits cut off at least two leaves on each side; the rest are
    // pendant splits (single leaf vs everything else).
    bool interior() const {
        int k = std::popcount(mask_);
        int n = static_cast<int>(taxa_->size());
        return std::min(k, n - k) >= 2;
    }

    const TaxonSetPtr& taxa() const { return taxa_; }

    bool operator==(const Split& o) const { return mask_ == o.mask_; }
    bool operator!=(const Split& o) const { return mask_ != o.mask_; }
    bool operator<(const Split& o) const { return mask_ < o.mask_; }

    // "A,B|C,D,E": smaller side first; ties print the side without leaf 0 first.
    std::string to_string() const {
        const std::uint64_t a = mask_, b = other_side();
        const bool a_first = std::popcount(a) <= std::popcount(b);
        auto side_str = [&](std::uint64_t m) {
            std::string out;
            for (std::size_t i = 0; i < taxa_->size(); ++i)
                if ((m >> i) & 1u) {
                    if (!out.empty()) out += ',';
                    out += taxa_->label(i);
                }
            return out;
        };
        return a_first ? side_str(a) + "|" + side_str(b) : side_str(b) + "|" + side_str(a);
    }

  private:
    std::uint64_t mask_;
    TaxonSetPtr taxa_;
};

using SplitSet = std::set<Split>;

inline Split canonical_split(std::uint64_t subset, TaxonSetPtr taxa) {
    return Split(subset, std::move(taxa));
}

inline Split canonical_split(const std::vector<std::string>& names, const TaxonSetPtr& taxa) {
    std::uint64_t m = 0;
    for (const auto& name : names) m |= std::uint64_t{1} << taxa->index_of(name);
    return Split(m, taxa);
}

// Two splits can coexist in one tree exactly when some pair of their sides is
// disjoint. A split is trivially compatible with itself.
inline bool are_compatible(const Split& s, const Split& t) {
    if (!same_taxa(s.taxa(), t.taxa()))
        throw std::invalid_argument("splits over different taxon sets");
    const std::uint64_t y1 = s.side(), y2 = s.other_side();
    const std::uint64_t z1 = t.side(), z2 = t.other_side();
    return (y1 & z1) == 0 || (y1 & z2) == 0 || (y2 & z1) == 0 || (y2 & z2) == 0;
}

inline bool compatible_with_all(const Split& s, const SplitSet& set) {
    return std::all_of(set.begin(), set.end(),
                       [&](const Split& t) { return are_compatible(s, t); });
}

inline bool mutually_compatible(const SplitSet& set) {
    for (auto i = set.begin(); i != set.end(); ++i)
        for (auto j = std::next(i); j != set.end(); ++j)
            if (!are_compatible(*i, *j)) return false;
    return true;
}

// Splits of `universe` incompatible with at least one member of E.
inline SplitSet crossing_set(const SplitSet& e, const SplitSet& universe) {
    SplitSet out;
    for (const Split& s : universe)
        if (!compatible_with_all(s, e)) out.insert(s);
    return out;
}

// Splits of `universe` compatible with every member of E (complement of the
// crossing set within the universe).
inline SplitSet compatible_set(const SplitSet& e, const SplitSet& universe) {
    SplitSet out;
    for (const Split& s : universe)
        if (compatible_with_all(s, e)) out.insert(s);
    return out;
}

}  // namespace bhv
