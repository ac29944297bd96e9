#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "split.hpp"
#include "vector.hpp"

namespace bhv {

// Weights with magnitude below this are treated as absent when trees are
// built from numeric output (iterative algorithms leave near-zero residues
// on collapsed splits).
inline constexpr double kAbsentWeightTol = 1e-12;

// A point of treespace: a sparse map from mutually compatible interior splits
// to strictly positive weights, plus one nonnegative weight per pendant edge.
// Immutable after construction.
class Tree {
  public:
    Tree(TaxonSetPtr taxa, std::map<Split, double> interior_weights,
         std::vector<double> pendant_weights = {})
        : taxa_(std::move(taxa)) {
        const std::size_t n = taxa_->size();
        if (pendant_weights.empty()) pendant_weights.assign(n, 0.0);
        if (pendant_weights.size() != n)
            throw std::invalid_argument("pendant weight count does not match leaf count");
        for (double p : pendant_weights) {
            if (p < -kAbsentWeightTol) throw std::invalid_argument("negative pendant weight");
        }
        for (double& p : pendant_weights)
            if (p < kAbsentWeightTol) p = 0.0;
        pendants_ = std::move(pendant_weights);

        for (const auto& [s, w] : interior_weights) {
            if (!same_taxa(s.taxa(), taxa_))
                throw std::invalid_argument("split over a different taxon set");
            if (!s.interior())
                throw std::invalid_argument("pendant split used as interior: " + s.to_string());
            if (w < -kAbsentWeightTol)
                throw std::invalid_argument("negative weight on split " + s.to_string());
            if (w < kAbsentWeightTol) continue;  // absent
            interior_.emplace(s, w);
        }
        for (auto i = interior_.begin(); i != interior_.end(); ++i)
            for (auto j = std::next(i); j != interior_.end(); ++j)
                if (!are_compatible(i->first, j->first))
                    throw std::invalid_argument("incompatible splits in one tree: " +
                                                i->first.to_string() + " vs " +
                                                j->first.to_string());
        if (n >= 3 && interior_.size() > n - 3)
            throw std::invalid_argument("too many interior splits for the leaf count");
    }

    static Tree star(TaxonSetPtr taxa) { return Tree(std::move(taxa), {}, {}); }

    const TaxonSetPtr& taxa() const { return taxa_; }
    const std::map<Split, double>& interior_weights() const { return interior_; }
    const std::vector<double>& pendant_weights() const { return pendants_; }
    double pendant_weight(std::size_t leaf) const { return pendants_.at(leaf); }

    bool has(const Split& s) const { return interior_.count(s) != 0; }

    // |s|_T: the weight of s in this tree, 0 if absent.
    double weight(const Split& s) const {
        auto it = interior_.find(s);
        return it == interior_.end() ? 0.0 : it->second;
    }

    // E(T): the set of interior splits present.
    SplitSet split_set() const {
        SplitSet out;
        for (const auto& [s, w] : interior_) out.insert(s);
        return out;
    }

    bool is_star() const { return interior_.empty(); }

    bool same_taxa_as(const Tree& o) const { return same_taxa(taxa_, o.taxa_); }

  private:
    TaxonSetPtr taxa_;
    std::map<Split, double> interior_;
    std::vector<double> pendants_;
};

// jmath: coordinates of T in the ambient split space (interior splits only;
// pendants are carried on the tree itself).
inline AmbientVector embed(const Tree& t) {
    AmbientVector v;
    for (const auto& [s, w] : t.interior_weights()) v.set(s, w);
    return v;
}

// Orthogonal projection of T onto the orthant spanned by E: keep the weights
// of splits in E(T) ∩ E, zero everything else.
inline AmbientVector project(const Tree& t, const SplitSet& e) {
    if (!mutually_compatible(e))
        throw std::invalid_argument("projection target is not mutually compatible");
    AmbientVector v;
    for (const Split& s : e) {
        double w = t.weight(s);
        if (w != 0.0) v.set(s, w);
    }
    return v;
}

// ||E||_T = sqrt(sum of squared weights of E's splits in T).
inline double norm(const SplitSet& e, const Tree& t) {
    double s2 = 0;
    for (const Split& s : e) {
        double w = t.weight(s);
        s2 += w * w;
    }
    return std::sqrt(s2);
}

template <typename SplitRange>
inline double set_norm(const SplitRange& splits, const Tree& t) {
    double s2 = 0;
    for (const Split& s : splits) {
        double w = t.weight(s);
        s2 += w * w;
    }
    return std::sqrt(s2);
}

// Distance of T to the origin star tree in its own orthant (interior only).
inline double interior_norm(const Tree& t) {
    double s2 = 0;
    for (const auto& [s, w] : t.interior_weights()) s2 += w * w;
    return std::sqrt(s2);
}

// Re-expresses T over another taxon set holding the same labels (possibly in
// a different order), so trees parsed from separate sources can be compared.
inline Tree rebased(const Tree& t, const TaxonSetPtr& target) {
    if (t.taxa() == target) return t;
    const TaxonSetPtr& from = t.taxa();
    if (from->size() != target->size())
        throw std::invalid_argument("taxon sets differ in size");
    std::vector<std::size_t> remap(from->size());
    for (std::size_t i = 0; i < from->size(); ++i) remap[i] = target->index_of(from->label(i));
    std::map<Split, double> interior;
    for (const auto& [s, w] : t.interior_weights()) {
        std::uint64_t m = 0;
        for (std::size_t i = 0; i < from->size(); ++i)
            if (s.contains(i)) m |= std::uint64_t{1} << remap[i];
        interior.emplace(Split(m, target), w);
    }
    std::vector<double> pend(from->size());
    for (std::size_t i = 0; i < from->size(); ++i) pend[remap[i]] = t.pendant_weight(i);
    return Tree(target, std::move(interior), std::move(pend));
}

// True when both trees carry the same splits and all weights agree within tol.
inline bool trees_close(const Tree& a, const Tree& b, double tol) {
    if (!a.same_taxa_as(b)) return false;
    for (const auto& [s, w] : a.interior_weights())
        if (std::abs(w - b.weight(s)) > tol) return false;
    for (const auto& [s, w] : b.interior_weights())
        if (std::abs(w - a.weight(s)) > tol) return false;
    for (std::size_t i = 0; i < a.pendant_weights().size(); ++i)
        if (std::abs(a.pendant_weights()[i] - b.pendant_weights()[i]) > tol) return false;
    return true;
}

}  // namespace bhv
