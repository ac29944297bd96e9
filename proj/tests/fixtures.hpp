#pragma once

// Shared fixtures: the five-leaf chain of splits used throughout the suite,
// the worked families built from it, and random tree generators.
//
// Chain splits over leaves A..E (indices 0..4):
//   s1 = AB|CDE, s2 = CD|ABE, s3 = AE|BCD, s4 = BC|ADE.
// Exactly the pairs (s1,s2), (s2,s3), (s3,s4) are compatible.

#include <map>
#include <vector>

#include "bhv/newick.hpp"
#include "bhv/rng.hpp"
#include "bhv/tree.hpp"

namespace fx {

inline bhv::TaxonSetPtr taxa5() {
    static bhv::TaxonSetPtr t = bhv::make_taxa({"A", "B", "C", "D", "E"});
    return t;
}

inline bhv::Split s1() { return bhv::canonical_split({"A", "B"}, taxa5()); }
inline bhv::Split s2() { return bhv::canonical_split({"C", "D"}, taxa5()); }
inline bhv::Split s3() { return bhv::canonical_split({"A", "E"}, taxa5()); }
inline bhv::Split s4() { return bhv::canonical_split({"B", "C"}, taxa5()); }

inline bhv::Tree tree5(std::map<bhv::Split, double> weights) {
    return bhv::Tree(taxa5(), std::move(weights));
}

// Cone pair: the geodesic passes through the origin; d = 6 + 5 = 11.
inline bhv::Tree cone_t1() { return tree5({{s1(), 6.0}}); }
inline bhv::Tree cone_t2() { return tree5({{s3(), 3.0}, {s4(), 4.0}}); }

// Pair with one shared split: common {s3}, exchanged ({s2},{s4}), d = sqrt(32).
inline bhv::Tree combined_t1() { return tree5({{s2(), 3.0}}); }
inline bhv::Tree combined_t2() { return tree5({{s3(), 4.0}, {s4(), 1.0}}); }

// Three-tree family whose mean is {s2: 2/3, s3: 1/3}.
inline std::vector<bhv::Tree> chain_family() {
    return {tree5({{s1(), 3.0}}), tree5({{s2(), 3.0}}), tree5({{s3(), 4.0}, {s4(), 1.0}})};
}

// Four-tree family exhibiting a sticky mean for w in roughly (9.51, 9.82).
inline std::vector<bhv::Tree> stickiness_family(double w) {
    return {tree5({{s1(), w}, {s2(), 1.0}}),
            tree5({{s1(), 3.0}, {s2(), 1.0}}),
            tree5({{s1(), 1.0}, {s2(), 1.0}}),
            tree5({{s3(), 10.0}, {s4(), 10.0}})};
}

// ---- random generation ----

inline bhv::TaxonSetPtr random_taxa(std::size_t n) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("t" + std::to_string(i + 1));
    return bhv::make_taxa(std::move(labels));
}

// Random recursive bipartition of `mask`; emits every block with >= 2 leaves
// as a side. On a full leaf set this yields a uniform-ish binary topology.
inline void random_blocks(std::uint64_t mask, bhv::Rng& rng, std::vector<std::uint64_t>& out) {
    std::vector<int> bits;
    for (int i = 0; i < 64; ++i)
        if ((mask >> i) & 1u) bits.push_back(i);
    if (bits.size() < 2) return;
    if (bits.size() >= 2) out.push_back(mask);
    // Split into two nonempty halves at random.
    std::uint64_t left = 0;
    do {
        left = 0;
        for (int b : bits)
            if (rng.next_below(2)) left |= std::uint64_t{1} << b;
    } while (left == 0 || left == mask);
    random_blocks(left, rng, out);
    random_blocks(mask & ~left, rng, out);
}

struct RandomTreeOptions {
    double drop_prob = 0.0;       // chance to delete each interior split (multifurcation)
    double weight_lo = 0.1;
    double weight_hi = 2.0;
    double pendant_lo = 0.0;
    double pendant_hi = 1.0;
};

inline bhv::Tree random_tree(const bhv::TaxonSetPtr& taxa, bhv::Rng& rng,
                             const RandomTreeOptions& opt = {}) {
    const std::uint64_t full = taxa->full_mask();
    std::vector<std::uint64_t> blocks;
    random_blocks(full, rng, blocks);
    std::map<bhv::Split, double> weights;
    for (std::uint64_t m : blocks) {
        if (m == full) continue;
        bhv::Split s(m, taxa);
        if (!s.interior()) continue;
        if (rng.next_double() < opt.drop_prob) continue;
        weights[s] = rng.uniform(opt.weight_lo, opt.weight_hi);
    }
    std::vector<double> pend(taxa->size());
    for (double& p : pend) p = rng.uniform(opt.pendant_lo, opt.pendant_hi);
    return bhv::Tree(taxa, std::move(weights), std::move(pend));
}

// Random tree guaranteed to contain the split `forced` (side vs complement
// subtrees generated independently).
inline bhv::Tree random_tree_with_split(const bhv::TaxonSetPtr& taxa, const bhv::Split& forced,
                                        double forced_weight, bhv::Rng& rng,
                                        const RandomTreeOptions& opt = {}) {
    std::vector<std::uint64_t> blocks;
    random_blocks(forced.side(), rng, blocks);
    random_blocks(forced.other_side(), rng, blocks);
    std::map<bhv::Split, double> weights;
    for (std::uint64_t m : blocks) {
        bhv::Split s(m, taxa);
        if (!s.interior()) continue;
        if (s == forced) continue;
        if (rng.next_double() < opt.drop_prob) continue;
        weights[s] = rng.uniform(opt.weight_lo, opt.weight_hi);
    }
    weights[forced] = forced_weight;
    std::vector<double> pend(taxa->size());
    for (double& p : pend) p = rng.uniform(opt.pendant_lo, opt.pendant_hi);
    return bhv::Tree(taxa, std::move(weights), std::move(pend));
}

}  // namespace fx
