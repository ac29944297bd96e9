#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "tree.hpp"

namespace bhv {

// Ratio comparisons and near-tie handling share one tolerance: a candidate
// refinement whose normalized cover weight is within this of 1 describes the
// same path either way (the length difference is quadratic in the gap).
inline constexpr double kRatioTol = 1e-10;

// A split carried by both endpoint orthants, with its weight in each tree
// (0 in the tree that lacks it but is compatible with it).
struct CommonSplit {
    Split split;
    double w_source;
    double w_target;
};

// One exchanged group: the A-side splits leave (weights from the source
// tree), the B-side splits arrive (weights from the target tree).
struct SupportPair {
    std::vector<Split> a;
    std::vector<Split> b;
};

// The combinatorial description of a geodesic: the shared splits plus the
// ordered list of exchanged groups.
struct Support {
    std::vector<CommonSplit> common;
    std::vector<SupportPair> pairs;

    SplitSet common_splits() const {
        SplitSet out;
        for (const auto& c : common) out.insert(c.split);
        return out;
    }
};

struct PropertyReport {
    bool p0 = false;
    bool p1 = false;
    bool p2 = false;
    bool p3 = false;
    bool all() const { return p0 && p1 && p2 && p3; }
};

namespace detail {

// ---- minimum-weight vertex cover on the bipartite incompatibility graph ----
//
// Left vertices are the A-side splits with weights |a|^2/||A||^2, right
// vertices the B-side splits with weights |b|^2/||B||^2; edges join
// incompatible pairs. By max-flow/min-cut duality the minimum-weight cover is
// the min cut separating source->a->b->sink, and its weight drops below 1
// exactly when the pair admits a partition (C1,C2 | D1,D2) with C2 u D1
// compatible and ||C1||/||D1|| < ||C2||/||D2||.
struct CoverResult {
    double weight = 0;
    std::uint64_t cover_a = 0;  // C1: A-side cover members
    std::uint64_t cover_b = 0;  // D2: B-side cover members
};

class MaxFlow {
  public:
    explicit MaxFlow(int node_count) : head_(node_count, -1) {}

    void add_edge(int from, int to, double cap) {
        edges_.push_back({to, head_[from], cap});
        head_[from] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({from, head_[to], 0.0});
        head_[to] = static_cast<int>(edges_.size()) - 1;
    }

    double run(int source, int sink) {
        double total = 0;
        while (true) {
            // Shortest augmenting path (Edmonds-Karp).
            std::vector<int> via(head_.size(), -1);
            std::queue<int> q;
            q.push(source);
            std::vector<bool> seen(head_.size(), false);
            seen[source] = true;
            while (!q.empty() && !seen[sink]) {
                int u = q.front();
                q.pop();
                for (int e = head_[u]; e != -1; e = edges_[e].next) {
                    if (edges_[e].cap > kResidualTol && !seen[edges_[e].to]) {
                        seen[edges_[e].to] = true;
                        via[edges_[e].to] = e;
                        q.push(edges_[e].to);
                    }
                }
            }
            if (!seen[sink]) break;
            double push = std::numeric_limits<double>::infinity();
            for (int v = sink; v != source; v = edges_[via[v] ^ 1].to)
                push = std::min(push, edges_[via[v]].cap);
            for (int v = sink; v != source; v = edges_[via[v] ^ 1].to) {
                edges_[via[v]].cap -= push;
                edges_[via[v] ^ 1].cap += push;
            }
            total += push;
        }
        return total;
    }

    // Vertices still reachable from the source in the residual graph.
    std::vector<bool> reachable(int source) const {
        std::vector<bool> seen(head_.size(), false);
        seen[source] = true;
        std::queue<int> q;
        q.push(source);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int e = head_[u]; e != -1; e = edges_[e].next)
                if (edges_[e].cap > kResidualTol && !seen[edges_[e].to]) {
                    seen[edges_[e].to] = true;
                    q.push(edges_[e].to);
                }
        }
        return seen;
    }

  private:
    static constexpr double kResidualTol = 1e-14;
    struct Edge {
        int to;
        int next;
        double cap;
    };
    std::vector<Edge> edges_;
    std::vector<int> head_;
};

// incompat[i] holds a bitmask over the B-side: bit j set when a[i] and b[j]
// are incompatible.
inline std::vector<std::uint64_t> incompatibility_masks(const std::vector<Split>& a,
                                                        const std::vector<Split>& b) {
    std::vector<std::uint64_t> out(a.size(), 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            if (!are_compatible(a[i], b[j])) out[i] |= std::uint64_t{1} << j;
    return out;
}

inline CoverResult min_weight_cover(const std::vector<double>& wa, const std::vector<double>& wb,
                                    const std::vector<std::uint64_t>& incompat) {
    const int na = static_cast<int>(wa.size());
    const int nb = static_cast<int>(wb.size());
    const int source = na + nb, sink = na + nb + 1;
    MaxFlow flow(na + nb + 2);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < na; ++i) flow.add_edge(source, i, wa[i]);
    for (int j = 0; j < nb; ++j) flow.add_edge(na + j, sink, wb[j]);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j)
            if ((incompat[i] >> j) & 1u) flow.add_edge(i, na + j, inf);
    CoverResult res;
    res.weight = flow.run(source, sink);
    std::vector<bool> reach = flow.reachable(source);
    for (int i = 0; i < na; ++i)
        if (!reach[i]) res.cover_a |= std::uint64_t{1} << i;  // source edge saturated
    for (int j = 0; j < nb; ++j)
        if (reach[na + j]) res.cover_b |= std::uint64_t{1} << j;  // sink edge saturated
    return res;
}

// ---- exhaustive alternative ----
//
// Walks every nontrivial partition C1|C2 of A and D1|D2 of B with all four
// parts nonempty and C2 u D1 compatible, and reports the partition with the
// smallest normalized weight ||C1||^2/||A||^2 + ||D2||^2/||B||^2 (the same
// quantity the vertex cover minimizes). Exponential; desk scale only.
struct ExhaustiveResult {
    double weight = std::numeric_limits<double>::infinity();
    std::uint64_t c1 = 0;
    std::uint64_t d2 = 0;
};

inline ExhaustiveResult min_partition_weight_exhaustive(
    const std::vector<double>& wa, const std::vector<double>& wb,
    const std::vector<std::uint64_t>& incompat) {
    const std::size_t na = wa.size(), nb = wb.size();
    ExhaustiveResult best;
    if (na < 2 || nb < 2) return best;  // no nontrivial partition exists
    const std::uint64_t amask_full = (std::uint64_t{1} << na) - 1;
    const std::uint64_t bmask_full = (std::uint64_t{1} << nb) - 1;
    for (std::uint64_t c1 = 1; c1 < amask_full; ++c1) {
        const std::uint64_t c2 = amask_full & ~c1;
        // D1 must avoid every B-split incompatible with some member of C2.
        std::uint64_t blocked = 0;
        for (std::size_t i = 0; i < na; ++i)
            if ((c2 >> i) & 1u) blocked |= incompat[i];
        double wc1 = 0;
        for (std::size_t i = 0; i < na; ++i)
            if ((c1 >> i) & 1u) wc1 += wa[i];
        for (std::uint64_t d1 = 1; d1 < bmask_full; ++d1) {
            if (d1 & blocked) continue;  // C2 u D1 must be compatible
            const std::uint64_t d2 = bmask_full & ~d1;
            double wd2 = 0;
            for (std::size_t j = 0; j < nb; ++j)
                if ((d2 >> j) & 1u) wd2 += wb[j];
            const double w = wc1 + wd2;
            if (w < best.weight) {
                best.weight = w;
                best.c1 = c1;
                best.d2 = d2;
            }
        }
    }
    return best;
}

inline std::vector<double> normalized_square_weights(const std::vector<Split>& splits,
                                                     const Tree& t) {
    double total = 0;
    std::vector<double> out(splits.size());
    for (std::size_t i = 0; i < splits.size(); ++i) {
        double w = t.weight(splits[i]);
        out[i] = w * w;
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

// True when pair (A,B) admits a partition violating the strict ratio
// condition, with the witnessing halves. Uses the exhaustive route for small
// pairs and the vertex cover beyond that; both minimize the same quantity.
inline std::optional<std::pair<std::uint64_t, std::uint64_t>> find_ratio_violation(
    const SupportPair& pair, const Tree& source, const Tree& target, bool force_exhaustive = false,
    bool force_cover = false) {
    if (pair.a.size() < 2 || pair.b.size() < 2) return std::nullopt;
    const std::vector<double> wa = normalized_square_weights(pair.a, source);
    const std::vector<double> wb = normalized_square_weights(pair.b, target);
    const auto incompat = incompatibility_masks(pair.a, pair.b);
    const bool small = pair.a.size() + pair.b.size() <= 20;
    double weight;
    std::uint64_t c1, d2;
    if (force_exhaustive || (small && !force_cover)) {
        ExhaustiveResult r = min_partition_weight_exhaustive(wa, wb, incompat);
        weight = r.weight;
        c1 = r.c1;
        d2 = r.d2;
    } else {
        CoverResult r = min_weight_cover(wa, wb, incompat);
        weight = r.weight;
        c1 = r.cover_a;
        d2 = r.cover_b;
    }
    if (weight >= 1.0 - kRatioTol) return std::nullopt;
    const std::uint64_t amask_full = (std::uint64_t{1} << pair.a.size()) - 1;
    const std::uint64_t bmask_full = (std::uint64_t{1} << pair.b.size()) - 1;
    if (c1 == 0 || c1 == amask_full || d2 == 0 || d2 == bmask_full)
        return std::nullopt;  // degenerate; cannot split
    return std::make_pair(c1, d2);
}

}  // namespace detail

// Splits shared by the two orthants: present in both trees, or present in one
// and compatible with every split of the other. Interior splits only; pendant
// edges are shared by construction and handled in the distance terms directly.
inline std::vector<CommonSplit> common_part(const Tree& t1, const Tree& t2) {
    if (!t1.same_taxa_as(t2)) throw std::invalid_argument("trees over different taxon sets");
    const SplitSet e1 = t1.split_set(), e2 = t2.split_set();
    SplitSet shared;
    for (const Split& s : e1)
        if (t2.has(s) || compatible_with_all(s, e2)) shared.insert(s);
    for (const Split& s : e2)
        if (compatible_with_all(s, e1)) shared.insert(s);
    std::vector<CommonSplit> out;
    for (const Split& s : shared) out.push_back({s, t1.weight(s), t2.weight(s)});
    return out;
}

// The geodesic between two trees: support, length, and evaluation along it.
class GeodesicPath {
  public:
    GeodesicPath(Tree source, Tree target, Support support, double length)
        : source_(std::move(source)),
          target_(std::move(target)),
          support_(std::move(support)),
          length_(length) {}

    const Tree& source() const { return source_; }
    const Tree& target() const { return target_; }
    const Support& support() const { return support_; }
    double length() const { return length_; }

  private:
    Tree source_;
    Tree target_;
    Support support_;
    double length_;
};

namespace detail {

inline double support_length(const Support& sup, const Tree& t1, const Tree& t2) {
    double sum = 0;
    for (const SupportPair& p : sup.pairs) {
        const double term = set_norm(p.a, t1) + set_norm(p.b, t2);
        sum += term * term;
    }
    for (const CommonSplit& c : sup.common) {
        const double d = c.w_source - c.w_target;
        sum += d * d;
    }
    for (std::size_t i = 0; i < t1.pendant_weights().size(); ++i) {
        const double d = t1.pendant_weights()[i] - t2.pendant_weights()[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

inline double pair_ratio(const SupportPair& p, const Tree& t1, const Tree& t2) {
    return set_norm(p.a, t1) / set_norm(p.b, t2);
}

}  // namespace detail

// Evaluates the four support properties. P2 and P3 use the shared ratio
// tolerance; ties count as satisfied (they describe the same path).
inline PropertyReport check_properties(const Support& sup, const Tree& t1, const Tree& t2) {
    PropertyReport rep;

    // P0: the common block is exactly the shared-splits set, and the pairs
    // partition the remaining splits of each tree.
    {
        SplitSet expected;
        for (const CommonSplit& c : common_part(t1, t2)) expected.insert(c.split);
        SplitSet got = sup.common_splits();
        bool ok = expected == got;
        SplitSet a_rest, b_rest;
        for (const auto& [s, w] : t1.interior_weights())
            if (!got.count(s)) a_rest.insert(s);
        for (const auto& [s, w] : t2.interior_weights())
            if (!got.count(s)) b_rest.insert(s);
        SplitSet a_seen, b_seen;
        for (const SupportPair& p : sup.pairs) {
            for (const Split& s : p.a)
                if (!a_rest.count(s) || !a_seen.insert(s).second) ok = false;
            for (const Split& s : p.b)
                if (!b_rest.count(s) || !b_seen.insert(s).second) ok = false;
        }
        if (a_seen != a_rest || b_seen != b_rest) ok = false;
        rep.p0 = ok;
    }

    // P1: later A-groups are compatible with earlier B-groups.
    {
        bool ok = true;
        for (std::size_t i = 1; i < sup.pairs.size() && ok; ++i)
            for (std::size_t j = 0; j < i && ok; ++j)
                for (const Split& a : sup.pairs[i].a)
                    for (const Split& b : sup.pairs[j].b)
                        if (!are_compatible(a, b)) {
                            ok = false;
                            break;
                        }
        rep.p1 = ok;
    }

    // P2: the norm ratios are nondecreasing.
    {
        bool ok = true;
        for (std::size_t i = 0; i + 1 < sup.pairs.size(); ++i) {
            const double r0 = detail::pair_ratio(sup.pairs[i], t1, t2);
            const double r1 = detail::pair_ratio(sup.pairs[i + 1], t1, t2);
            if (r0 > r1 + kRatioTol * std::max(1.0, r1)) ok = false;
        }
        rep.p2 = ok;
    }

    // P3: no pair admits a nontrivial partition with C2 u D1 compatible and
    // ||C1||/||D1|| <= ||C2||/||D2||.
    {
        bool ok = true;
        for (const SupportPair& p : sup.pairs)
            if (detail::find_ratio_violation(p, t1, t2)) ok = false;
        rep.p3 = ok;
    }
    return rep;
}

namespace detail {

inline SupportPair merge_pairs(const SupportPair& x, const SupportPair& y) {
    SupportPair merged = x;
    merged.a.insert(merged.a.end(), y.a.begin(), y.a.end());
    merged.b.insert(merged.b.end(), y.b.begin(), y.b.end());
    return merged;
}

// Successive refinement: start from the single all-in pair and split any pair
// with a ratio violation along the violating partition until none remains.
// Splitting in place keeps the chain ratio-sorted (each split produces a
// lower-ratio and a higher-ratio half); should float noise ever leave an
// adjacent inversion, the repair loop merges the offenders and re-refines.
inline std::vector<SupportPair> refine_pairs(std::vector<Split> a0, std::vector<Split> b0,
                                             const Tree& t1, const Tree& t2) {
    std::vector<SupportPair> pairs;
    if (a0.empty()) return pairs;
    pairs.push_back({std::move(a0), std::move(b0)});
    for (int rounds = 0;; ++rounds) {
        if (rounds > 1000) throw std::runtime_error("support refinement did not converge");
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                auto hit = find_ratio_violation(pairs[i], t1, t2);
                if (!hit) continue;
                const auto [c1_mask, d2_mask] = *hit;
                SupportPair lo, hi;
                for (std::size_t k = 0; k < pairs[i].a.size(); ++k)
                    ((c1_mask >> k) & 1u ? lo.a : hi.a).push_back(pairs[i].a[k]);
                for (std::size_t k = 0; k < pairs[i].b.size(); ++k)
                    ((d2_mask >> k) & 1u ? hi.b : lo.b).push_back(pairs[i].b[k]);
                pairs[i] = std::move(hi);
                pairs.insert(pairs.begin() + static_cast<std::ptrdiff_t>(i), std::move(lo));
                changed = true;
                break;
            }
        }
        std::size_t inverted = pairs.size();
        for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
            const double r0 = pair_ratio(pairs[i], t1, t2);
            const double r1 = pair_ratio(pairs[i + 1], t1, t2);
            if (r0 > r1 + kRatioTol * std::max(1.0, r1)) {
                inverted = i;
                break;
            }
        }
        if (inverted == pairs.size()) break;
        pairs[inverted] = merge_pairs(pairs[inverted], pairs[inverted + 1]);
        pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(inverted) + 1);
    }
    // Merge adjacent pairs whose ratios tie, when the merged pair still has no
    // ratio violation (ties describe one path; prefer the coarser support).
    for (std::size_t i = 0; i + 1 < pairs.size();) {
        const double r0 = pair_ratio(pairs[i], t1, t2);
        const double r1 = pair_ratio(pairs[i + 1], t1, t2);
        if (std::abs(r0 - r1) <= kRatioTol * std::max(1.0, std::abs(r1))) {
            SupportPair merged = merge_pairs(pairs[i], pairs[i + 1]);
            if (!find_ratio_violation(merged, t1, t2)) {
                pairs[i] = std::move(merged);
                pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(i) + 1);
                continue;
            }
        }
        ++i;
    }
    return pairs;
}

}  // namespace detail

inline GeodesicPath geodesic(const Tree& t1, const Tree& t2) {
    if (!t1.same_taxa_as(t2)) throw std::invalid_argument("trees over different taxon sets");
    Support sup;
    sup.common = common_part(t1, t2);
    SplitSet common = sup.common_splits();
    std::vector<Split> a0, b0;
    for (const auto& [s, w] : t1.interior_weights())
        if (!common.count(s)) a0.push_back(s);
    for (const auto& [s, w] : t2.interior_weights())
        if (!common.count(s)) b0.push_back(s);
    sup.pairs = detail::refine_pairs(std::move(a0), std::move(b0), t1, t2);
    const double len = detail::support_length(sup, t1, t2);
    return GeodesicPath(t1, t2, sup, len);
}

inline double distance(const Tree& t1, const Tree& t2) { return geodesic(t1, t2).length(); }

// The tree at parameter lam along the path: exchanged groups shrink/grow by
// the three-case rule, shared splits and pendant edges interpolate linearly.
inline Tree point_along(const GeodesicPath& path, double lam) {
    if (!(lam >= 0.0 && lam <= 1.0))
        throw std::invalid_argument("path parameter must lie in [0,1]");
    const Tree& t1 = path.source();
    const Tree& t2 = path.target();
    std::map<Split, double> weights;
    for (const SupportPair& p : path.support().pairs) {
        const double na = set_norm(p.a, t1);
        const double nb = set_norm(p.b, t2);
        const double a_scale = ((1 - lam) * na - lam * nb) / na;
        if (a_scale > 0)
            for (const Split& s : p.a) weights[s] = a_scale * t1.weight(s);
        const double b_scale = (lam * nb - (1 - lam) * na) / nb;
        if (b_scale > 0)
            for (const Split& s : p.b) weights[s] = b_scale * t2.weight(s);
    }
    for (const CommonSplit& c : path.support().common) {
        const double w = (1 - lam) * c.w_source + lam * c.w_target;
        if (w > 0) weights[c.split] = w;
    }
    std::vector<double> pend(t1.pendant_weights().size());
    for (std::size_t i = 0; i < pend.size(); ++i)
        pend[i] = (1 - lam) * t1.pendant_weights()[i] + lam * t2.pendant_weights()[i];
    return Tree(t1.taxa(), std::move(weights), std::move(pend));
}

}  // namespace bhv
