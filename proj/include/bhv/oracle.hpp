#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tree.hpp"

namespace bhv {

// Knobs for the brute-force reference implementations. These exist to be
// obviously correct, not fast; the caps guard the factorial blow-up.
struct OracleConfig {
    int max_splits_per_side = 5;
    double grid_resolution = 1e-3;
    int restarts = 3;
};

namespace oracle_detail {

// All ways to distribute `count` items into exactly `blocks` nonempty ordered
// blocks, reported as block index per item.
inline void ordered_partitions(int count, int blocks,
                               const std::function<void(const std::vector<int>&)>& emit) {
    std::vector<int> assign(static_cast<std::size_t>(count), -1);
    std::function<void(int)> rec = [&](int i) {
        if (i == count) {
            std::vector<bool> used(static_cast<std::size_t>(blocks), false);
            for (int v : assign) used[static_cast<std::size_t>(v)] = true;
            if (std::all_of(used.begin(), used.end(), [](bool b) { return b; })) emit(assign);
            return;
        }
        for (int b = 0; b < blocks; ++b) {
            assign[static_cast<std::size_t>(i)] = b;
            rec(i + 1);
        }
    };
    rec(0);
}

}  // namespace oracle_detail

// Reference geodesic length: enumerate every ordered pairing of partitions of
// the two trees' non-shared splits, keep those whose later source-groups are
// compatible with earlier target-groups and whose exchange ratios are
// nondecreasing (a decreasing ratio would order the orthant crossings
// inconsistently, so the closed form would not describe a realizable path),
// and take the minimum of the closed-form length. Independent of the
// production solver: only the split algebra is shared.
inline double brute_force_distance(const Tree& t1, const Tree& t2, const OracleConfig& cfg = {}) {
    if (!t1.same_taxa_as(t2)) throw std::invalid_argument("trees over different taxon sets");
    if (cfg.max_splits_per_side > 8)
        throw std::invalid_argument("max_splits_per_side capped at 8");

    // Shared splits: in both trees, or in one and compatible with all of the
    // other. Everything else is exchanged.
    const SplitSet e1 = t1.split_set(), e2 = t2.split_set();
    std::vector<Split> a, b;
    double common_sq = 0;
    for (const Split& s : e1) {
        if (t2.has(s) || compatible_with_all(s, e2)) {
            const double d = t1.weight(s) - t2.weight(s);
            common_sq += d * d;
        } else {
            a.push_back(s);
        }
    }
    for (const Split& s : e2) {
        if (!t1.has(s) && compatible_with_all(s, e1)) {
            const double d = t1.weight(s) - t2.weight(s);
            common_sq += d * d;
        } else if (!t1.has(s) && !compatible_with_all(s, e1)) {
            b.push_back(s);
        }
    }
    for (std::size_t i = 0; i < t1.pendant_weights().size(); ++i) {
        const double d = t1.pendant_weights()[i] - t2.pendant_weights()[i];
        common_sq += d * d;
    }
    if (a.empty()) return std::sqrt(common_sq);
    if (static_cast<int>(a.size()) > cfg.max_splits_per_side ||
        static_cast<int>(b.size()) > cfg.max_splits_per_side)
        throw std::invalid_argument("too many exchanged splits for the brute-force oracle");

    std::vector<std::vector<bool>> compat(a.size(), std::vector<bool>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) compat[i][j] = are_compatible(a[i], b[j]);

    double best_sq = std::numeric_limits<double>::infinity();
    const int kmax = static_cast<int>(std::min(a.size(), b.size()));
    for (int k = 1; k <= kmax; ++k) {
        std::vector<std::vector<int>> b_assignments;
        oracle_detail::ordered_partitions(static_cast<int>(b.size()), k,
                                          [&](const std::vector<int>& v) {
                                              b_assignments.push_back(v);
                                          });
        oracle_detail::ordered_partitions(
            static_cast<int>(a.size()), k, [&](const std::vector<int>& a_of) {
                // Per-group squared norms of the source side.
                std::vector<double> na_sq(static_cast<std::size_t>(k), 0.0);
                for (std::size_t i = 0; i < a.size(); ++i) {
                    const double w = t1.weight(a[i]);
                    na_sq[static_cast<std::size_t>(a_of[i])] += w * w;
                }
                for (const std::vector<int>& b_of : b_assignments) {
                    // Later source-groups must be compatible with earlier
                    // target-groups.
                    bool ok = true;
                    for (std::size_t i = 0; i < a.size() && ok; ++i)
                        for (std::size_t j = 0; j < b.size() && ok; ++j)
                            if (b_of[j] < a_of[i] && !compat[i][j]) ok = false;
                    if (!ok) continue;
                    std::vector<double> nb_sq(static_cast<std::size_t>(k), 0.0);
                    for (std::size_t j = 0; j < b.size(); ++j) {
                        const double w = t2.weight(b[j]);
                        nb_sq[static_cast<std::size_t>(b_of[j])] += w * w;
                    }
                    // Exchange ratios ||A_g||/||B_g|| must be nondecreasing
                    // (compared via cross-multiplied squares; ties admitted).
                    bool monotone = true;
                    for (int g = 0; g + 1 < k && monotone; ++g) {
                        const auto ga = static_cast<std::size_t>(g);
                        if (na_sq[ga] * nb_sq[ga + 1] >
                            na_sq[ga + 1] * nb_sq[ga] * (1.0 + 1e-12))
                            monotone = false;
                    }
                    if (!monotone) continue;
                    double sum = common_sq;
                    for (int g = 0; g < k; ++g) {
                        const double term = std::sqrt(na_sq[static_cast<std::size_t>(g)]) +
                                            std::sqrt(nb_sq[static_cast<std::size_t>(g)]);
                        sum += term * term;
                    }
                    best_sq = std::min(best_sq, sum);
                }
            });
    }
    return std::sqrt(best_sq);
}

// Sum of squared brute-force distances.
inline double brute_force_frechet_value(const Tree& t, const std::vector<Tree>& trees,
                                        const OracleConfig& cfg = {}) {
    double acc = 0;
    for (const Tree& ti : trees) {
        const double d = brute_force_distance(t, ti, cfg);
        acc += d * d;
    }
    return acc;
}

// Reference barycenter: multiresolution grid search of the squared-distance
// sum over each candidate orthant (dimension <= 3), pendants fixed at their
// exact per-leaf averages, distances via the brute-force length.
inline Tree grid_frechet_min(const std::vector<Tree>& trees,
                             const std::vector<SplitSet>& candidate_orthants,
                             const OracleConfig& cfg = {}) {
    if (trees.empty()) throw std::invalid_argument("no input trees");
    const TaxonSetPtr& taxa = trees.front().taxa();
    const std::size_t n = taxa->size();
    std::vector<double> pend(n, 0.0);
    for (const Tree& t : trees)
        for (std::size_t i = 0; i < n; ++i) pend[i] += t.pendant_weights()[i];
    for (double& p : pend) p /= static_cast<double>(trees.size());

    double hi = 1.0;
    for (const Tree& t : trees) {
        double total = 0;
        for (const auto& [s, w] : t.interior_weights()) total += w;
        hi = std::max(hi, total + 1.0);
    }

    auto make_tree = [&](const std::vector<Split>& splits, const std::vector<double>& x) {
        std::map<Split, double> weights;
        for (std::size_t i = 0; i < splits.size(); ++i)
            if (x[i] > kAbsentWeightTol) weights[splits[i]] = x[i];
        return Tree(taxa, std::move(weights), pend);
    };

    double best_f = std::numeric_limits<double>::infinity();
    Tree best = Tree(taxa, {}, pend);
    for (const SplitSet& orthant : candidate_orthants) {
        if (orthant.size() > 3) throw std::invalid_argument("grid search caps orthants at dimension 3");
        std::vector<Split> splits(orthant.begin(), orthant.end());
        const std::size_t d = splits.size();
        std::vector<double> lo_box(d, 0.0), hi_box(d, hi);
        std::vector<double> center(d, 0.0);
        double width = hi;
        const int points = 11;
        // Shrink the box around the best grid point until the spacing drops
        // below the requested resolution.
        while (true) {
            std::vector<std::vector<double>> axes(d);
            for (std::size_t i = 0; i < d; ++i) {
                const double lo = std::max(0.0, lo_box[i]);
                const double step = (hi_box[i] - lo) / (points - 1);
                for (int p = 0; p < points; ++p) axes[i].push_back(lo + step * p);
            }
            std::vector<std::size_t> idx(d, 0);
            std::vector<double> local_best_x(d, 0.0);
            double local_best_f = std::numeric_limits<double>::infinity();
            while (true) {
                std::vector<double> x(d);
                for (std::size_t i = 0; i < d; ++i) x[i] = axes[i][idx[i]];
                const double f = brute_force_frechet_value(make_tree(splits, x), trees, cfg);
                if (f < local_best_f) {
                    local_best_f = f;
                    local_best_x = x;
                }
                std::size_t carry = 0;
                while (carry < d && ++idx[carry] == axes[carry].size()) {
                    idx[carry] = 0;
                    ++carry;
                }
                if (carry == d) break;
                if (d == 0) break;
            }
            if (d == 0) {
                local_best_f = brute_force_frechet_value(make_tree(splits, {}), trees, cfg);
                local_best_x.clear();
            }
            center = local_best_x;
            if (local_best_f < best_f) {
                best_f = local_best_f;
                best = make_tree(splits, center);
            }
            if (d == 0 || width / (points - 1) < cfg.grid_resolution / 2) break;
            width = width * 2.0 / (points - 1);  // keep neighbors of the best point inside
            for (std::size_t i = 0; i < d; ++i) {
                lo_box[i] = std::max(0.0, center[i] - width / 2);
                hi_box[i] = center[i] + width / 2;
            }
        }
    }
    return best;
}

}  // namespace bhv
