#pragma once

// Split-membership conditions for sets of trees sharing one taxon set:
//   * split_sum (sigma): a per-split score whose positivity forces the split
//     into the Frechet mean.
//   * square_sum_difference (ssd): a per-orthant score whose positivity is
//     necessary (but not sufficient) for the mean to put weight on that
//     orthant's splits.
//   * must_include: splits certified to appear in the mean.
//   * prune_orthants: enumerates maximal candidate orthants and discards
//     those the ssd test excludes.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "split.hpp"
#include "tree.hpp"

namespace bhv {

/// Union of the interior splits of all input trees.
inline SplitSet union_splits(const std::vector<Tree>& trees) {
    SplitSet all;
    for (const Tree& t : trees) {
        const SplitSet& e = t.split_set();
        all.insert(e.begin(), e.end());
    }
    return all;
}

namespace detail {

/// Throws unless the input list is nonempty and every tree shares the
/// first tree's taxon set.
inline void check_family(const std::vector<Tree>& trees) {
    if (trees.empty())
        throw std::invalid_argument("condition scores need at least one tree");
    for (std::size_t i = 1; i < trees.size(); ++i)
        if (!trees[i].same_taxa_as(trees[0]))
            throw std::invalid_argument(
                "condition scores need a single shared taxon set");
}

/// Total weight of split `s` summed over all trees (0 for absent).
inline double total_weight(const Split& s, const std::vector<Tree>& trees) {
    double sum = 0.0;
    for (const Tree& t : trees) sum += t.weight(s);
    return sum;
}

}  // namespace detail

/// Split sum: total weight of `s` across the family minus the total weight
/// of every family split that crosses (is incompatible with) `s`.
/// Positive values certify that `s` has positive weight in the Frechet mean.
inline double split_sum(const Split& s, const std::vector<Tree>& trees) {
    detail::check_family(trees);
    if (!s.interior())
        throw std::invalid_argument("split_sum is defined for interior splits");
    double present = detail::total_weight(s, trees);
    double crossing = 0.0;
    for (const Split& x : union_splits(trees))
        if (!are_compatible(s, x)) crossing += detail::total_weight(x, trees);
    return present - crossing;
}

/// Square-sum difference for a mutually compatible split set `S`:
///   sum over s in S of (total weight of s)^2
///   minus sum over family splits x crossing S of the per-tree squared
///   weights of x.
/// Positive values are necessary for all of `S` to carry weight in the mean.
inline double square_sum_difference(const SplitSet& s_set,
                                    const std::vector<Tree>& trees) {
    detail::check_family(trees);
    if (!mutually_compatible(s_set))
        throw std::invalid_argument(
            "square_sum_difference needs a mutually compatible split set");
    double positive = 0.0;
    for (const Split& s : s_set) {
        const double tot = detail::total_weight(s, trees);
        positive += tot * tot;
    }
    double crossing = 0.0;
    for (const Split& x : union_splits(trees)) {
        bool crosses = false;
        for (const Split& s : s_set)
            if (!are_compatible(s, x)) { crosses = true; break; }
        if (!crosses) continue;
        for (const Tree& t : trees) {
            const double w = t.weight(x);
            crossing += w * w;
        }
    }
    return positive - crossing;
}

/// Splits certified to appear in the Frechet mean of the family:
/// those with positive split sum, plus those present in some tree and
/// compatible with every split of every tree that lacks them.
inline SplitSet must_include(const std::vector<Tree>& trees) {
    detail::check_family(trees);
    SplitSet forced;
    for (const Split& s : union_splits(trees)) {
        if (split_sum(s, trees) > 0.0) {
            forced.insert(s);
            continue;
        }
        bool everywhere_ok = true;
        for (const Tree& t : trees) {
            if (t.has(s)) continue;
            if (!compatible_with_all(s, t.split_set())) {
                everywhere_ok = false;
                break;
            }
        }
        if (everywhere_ok) forced.insert(s);
    }
    return forced;
}

namespace detail {

/// Maximal-clique enumeration (Bron-Kerbosch with pivoting) over an
/// adjacency matrix, with a hard cap on the number of cliques emitted.
/// `run` returns false when the cap truncated the enumeration.
class CliqueEnumerator {
  public:
    CliqueEnumerator(std::vector<std::vector<char>> adjacency,
                     std::size_t cap)
        : adj_(std::move(adjacency)), cap_(cap) {}

    bool run(const std::function<void(const std::vector<int>&)>& emit) {
        emit_ = &emit;
        emitted_ = 0;
        truncated_ = false;
        std::vector<int> r, p, x;
        p.reserve(adj_.size());
        for (int v = 0; v < static_cast<int>(adj_.size()); ++v) p.push_back(v);
        expand(r, p, x);
        return !truncated_;
    }

  private:
    void expand(std::vector<int>& r, std::vector<int> p, std::vector<int> x) {
        if (truncated_) return;
        if (p.empty() && x.empty()) {
            if (emitted_ >= cap_) {
                truncated_ = true;
                return;
            }
            ++emitted_;
            (*emit_)(r);
            return;
        }
        // Pivot on the vertex covering the most of p.
        int pivot = -1;
        std::size_t best = 0;
        for (const std::vector<int>* side : {&p, &x})
            for (int u : *side) {
                std::size_t cover = 0;
                for (int v : p)
                    if (adj_[static_cast<std::size_t>(u)]
                            [static_cast<std::size_t>(v)])
                        ++cover;
                if (pivot < 0 || cover > best) {
                    pivot = u;
                    best = cover;
                }
            }
        std::vector<int> candidates;
        for (int v : p)
            if (!adj_[static_cast<std::size_t>(pivot)]
                     [static_cast<std::size_t>(v)])
                candidates.push_back(v);
        for (int v : candidates) {
            std::vector<int> p2, x2;
            for (int u : p)
                if (adj_[static_cast<std::size_t>(v)]
                        [static_cast<std::size_t>(u)])
                    p2.push_back(u);
            for (int u : x)
                if (adj_[static_cast<std::size_t>(v)]
                        [static_cast<std::size_t>(u)])
                    x2.push_back(u);
            r.push_back(v);
            expand(r, std::move(p2), std::move(x2));
            r.pop_back();
            if (truncated_) return;
            p.erase(std::find(p.begin(), p.end(), v));
            x.push_back(v);
        }
    }

    std::vector<std::vector<char>> adj_;
    std::size_t cap_;
    const std::function<void(const std::vector<int>&)>* emit_ = nullptr;
    std::size_t emitted_ = 0;
    bool truncated_ = false;
};

}  // namespace detail

/// Enumerates maximal mutually compatible subsets of the family's split
/// union that contain every split of `required`. Throws if `required` is
/// not itself mutually compatible with the enumeration universe. Sets
/// `truncated` when the candidate cap cut the enumeration short.
inline std::vector<SplitSet> candidate_orthants(
    const std::vector<Tree>& trees, const SplitSet& required,
    bool& truncated, std::size_t cap = 1000000) {
    detail::check_family(trees);
    if (!mutually_compatible(required))
        throw std::runtime_error(
            "required splits are mutually incompatible; no orthant fits");
    truncated = false;

    // Pool: union splits outside `required` that are compatible with all
    // of `required` (others can never join a candidate).
    std::vector<Split> pool;
    for (const Split& s : union_splits(trees)) {
        if (required.count(s) != 0) continue;
        if (compatible_with_all(s, required)) pool.push_back(s);
    }

    std::vector<SplitSet> result;
    if (pool.empty()) {
        result.push_back(required);
        return result;
    }

    std::vector<std::vector<char>> adj(
        pool.size(), std::vector<char>(pool.size(), 0));
    for (std::size_t i = 0; i < pool.size(); ++i)
        for (std::size_t j = i + 1; j < pool.size(); ++j)
            if (are_compatible(pool[i], pool[j]))
                adj[i][j] = adj[j][i] = 1;

    detail::CliqueEnumerator enumerator(std::move(adj), cap);
    const bool complete = enumerator.run([&](const std::vector<int>& clique) {
        SplitSet candidate = required;
        for (int v : clique) candidate.insert(pool[static_cast<std::size_t>(v)]);
        result.push_back(std::move(candidate));
    });
    truncated = !complete;
    return result;
}

/// Everything the condition screens establish about a family of trees.
struct ConditionsReport {
    /// Split sum per union split.
    std::map<Split, double> sigma;
    /// Splits certified to appear in the mean.
    SplitSet must_include;
    /// Square-sum difference per maximal candidate orthant.
    std::map<SplitSet, double> ssd_by_candidate;
    /// Candidates that failed the screen, reported as their exclusion
    /// closure (the candidate plus every union split compatible with all
    /// of it). A failed closure certifies that the mean's split set does
    /// not contain the candidate; the mean may still use a proper subset
    /// of the candidate's splits (a face of the orthant).
    std::vector<SplitSet> excluded_closures;
    /// Candidates that passed the screen (ssd > 0).
    std::vector<SplitSet> surviving_orthants;

    /// Looser necessary inequalities implied by ssd > 0, reported per
    /// surviving orthant: r * lhs > rhs with r = number of trees.
    struct Relaxation {
        double scaled_per_tree_squares;   ///< r * sum_S sum_T |s|_T^2
        double crossing_per_tree_squares; ///< sum_X sum_T |x|_T^2
        bool holds_per_tree;
        double scaled_total_squares;      ///< r * sum_S (sum_T |s|_T)^2
        double crossing_total_squares;    ///< sum_X (sum_T |x|_T)^2
        bool holds_totals;
    };
    std::vector<Relaxation> relaxations;  ///< parallel to surviving_orthants

    /// True when the candidate cap cut the enumeration short.
    bool enumeration_truncated = false;
};

/// Runs the full condition screen: sigma for every union split, the
/// must-include set, maximal candidate orthants over the whole
/// compatibility graph, and the ssd test per candidate. Survivors are
/// exactly the candidates with ssd > 0; the report keeps the survivor
/// list independent of must_include so that a passing ssd screen on an
/// orthant that cannot hold the mean stays visible (the screen is
/// necessary, not sufficient).
inline ConditionsReport prune_orthants(const std::vector<Tree>& trees,
                                       std::size_t candidate_cap = 1000000) {
    detail::check_family(trees);
    ConditionsReport report;

    const SplitSet all = union_splits(trees);
    for (const Split& s : all) report.sigma[s] = split_sum(s, trees);
    report.must_include = must_include(trees);

    if (all.empty()) return report;  // every input is a star tree

    std::vector<SplitSet> candidates = candidate_orthants(
        trees, SplitSet{}, report.enumeration_truncated, candidate_cap);

    const double r = static_cast<double>(trees.size());
    for (const SplitSet& candidate : candidates) {
        // Exclusion closure: the candidate plus every union split
        // compatible with all of it. Maximal candidates are their own
        // closure; kept explicit so the report stays correct if the
        // enumeration ever emits non-maximal sets.
        SplitSet closure = candidate;
        for (const Split& x : all)
            if (closure.count(x) == 0 && compatible_with_all(x, candidate))
                closure.insert(x);

        const double ssd = square_sum_difference(closure, trees);
        report.ssd_by_candidate[candidate] = ssd;
        if (!(ssd > 0.0)) {
            report.excluded_closures.push_back(closure);
            continue;
        }
        report.surviving_orthants.push_back(candidate);

        ConditionsReport::Relaxation relax{};
        double per_tree_s = 0.0, totals_s = 0.0;
        for (const Split& s : candidate) {
            double tot = 0.0;
            for (const Tree& t : trees) {
                const double w = t.weight(s);
                per_tree_s += w * w;
                tot += w;
            }
            totals_s += tot * tot;
        }
        double per_tree_x = 0.0, totals_x = 0.0;
        for (const Split& x : all) {
            bool crosses = false;
            for (const Split& s : candidate)
                if (!are_compatible(s, x)) { crosses = true; break; }
            if (!crosses) continue;
            double tot = 0.0;
            for (const Tree& t : trees) {
                const double w = t.weight(x);
                per_tree_x += w * w;
                tot += w;
            }
            totals_x += tot * tot;
        }
        relax.scaled_per_tree_squares = r * per_tree_s;
        relax.crossing_per_tree_squares = per_tree_x;
        relax.holds_per_tree =
            relax.scaled_per_tree_squares > relax.crossing_per_tree_squares;
        relax.scaled_total_squares = r * totals_s;
        relax.crossing_total_squares = totals_x;
        relax.holds_totals =
            relax.scaled_total_squares > relax.crossing_total_squares;
        report.relaxations.push_back(relax);
    }
    return report;
}

}  // namespace bhv
