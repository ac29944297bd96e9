#pragma once

// Frechet mean machinery: the Frechet objective, the iterative
// random-permutation mean, a mean-characterization verifier built on log
// maps and directional limits, common-split decomposition, and the full
// mean pipeline that ties them to the condition screens.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conditions.hpp"
#include "geodesic.hpp"
#include "rng.hpp"
#include "tangent.hpp"
#include "tree.hpp"

namespace bhv {

/// Frechet objective: the sum of squared geodesic distances from `point`
/// to every tree in the family.
inline double frechet_value(const Tree& point, const std::vector<Tree>& trees) {
    detail::check_family(trees);
    if (!point.same_taxa_as(trees.front()))
        throw std::invalid_argument("evaluation point uses a different taxon set");
    double sum = 0.0;
    for (const Tree& t : trees) {
        const double d = distance(point, t);
        sum += d * d;
    }
    return sum;
}

/// Iterative mean by the law-of-large-numbers scheme: starting from the
/// first tree of a seeded shuffle, repeatedly move 1/(k+1) of the way along
/// the geodesic to the next tree, reshuffling the visiting order every
/// epoch. Stops after `max_iter` moves or when an epoch moves the iterate
/// less than `tol`. Splits whose weight ends below 1e-9 are dropped.
/// Identical seeds give bit-identical iterate sequences.
inline Tree iterative_mean(const std::vector<Tree>& trees,
                           std::size_t max_iter = 100000,
                           std::uint64_t seed = 0, double tol = 1e-8) {
    detail::check_family(trees);
    Rng rng(seed);
    std::vector<std::size_t> order(trees.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    rng.shuffle(order);
    Tree current = trees[order.front()];
    std::size_t k = 1;  // moves performed; the next move has step 1/(k+1)
    bool first_epoch = true;
    while (k < max_iter + 1) {
        if (!first_epoch) rng.shuffle(order);
        const Tree epoch_start = current;
        for (std::size_t i = first_epoch ? 1 : 0; i < order.size(); ++i) {
            if (k >= max_iter + 1) break;
            current = point_along(geodesic(current, trees[order[i]]),
                                  1.0 / static_cast<double>(k + 1));
            ++k;
        }
        if (!first_epoch && distance(epoch_start, current) < tol) break;
        first_epoch = false;
    }

    std::map<Split, double> kept;
    for (const Split& s : current.split_set())
        if (current.weight(s) >= 1e-9) kept[s] = current.weight(s);
    return Tree(current.taxa(), std::move(kept), current.pendant_weights());
}

/// Verification verdict for a mean candidate. `pass` is only reported when
/// the direction families could be checked exhaustively (no multi-split
/// extensions exist); when multi-split extensions were merely sampled and
/// everything passed, the verdict is `inconclusive`.
enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "inconclusive";
    }
}

/// One tested direction and the inner product of the direction with the
/// summed directional limits of the inputs (nonpositive at a true mean).
struct ConditionCheck {
    Direction direction;
    double value;
};

struct MeanCertificate {
    Tree candidate;
    double condition_ii_residual;
    std::vector<ConditionCheck> condition_i_checks;
    Verdict verdict;
};

/// Checks the two mean-characterization conditions at `mu`:
///  (ii) the candidate's coordinates (split weights and pendant weights)
///       must equal the average of the log-mapped inputs' coordinates; the
///       reported residual is the norm of the difference.
///  (i)  for every direction leaving the candidate's orthant, the inner
///       product with the summed directional limits must be nonpositive.
///       Axis directions (one new split) are enumerated exhaustively over
///       the inputs' splits; multi-split extensions are sampled with
///       `direction_budget` random unit directions (fixed internal seed,
///       so certificates are reproducible).
inline MeanCertificate verify_mean(const Tree& mu, const std::vector<Tree>& trees,
                                   double tol = 1e-8,
                                   std::size_t direction_budget = 64) {
    detail::check_family(trees);
    if (!mu.same_taxa_as(trees.front()))
        throw std::invalid_argument("candidate uses a different taxon set");
    const double r = static_cast<double>(trees.size());
    const SplitSet s_set = mu.split_set();
    const std::size_t n = mu.taxa()->size();

    std::map<Split, double> coord_sum;
    std::vector<double> pendant_sum(n, 0.0);
    for (const Tree& t : trees) {
        const TangentVector v = log_map(t, mu);
        for (const Split& s : s_set) coord_sum[s] += v.interior()[s];
        for (std::size_t i = 0; i < n; ++i) pendant_sum[i] += v.pendant()[i];
    }
    double resid2 = 0.0;
    for (const Split& s : s_set) {
        const double d = mu.weight(s) - coord_sum[s] / r;
        resid2 += d * d;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double d = mu.pendant_weight(i) - pendant_sum[i] / r;
        resid2 += d * d;
    }
    const double residual = std::sqrt(resid2);
    bool any_fail = residual > tol;

    // Splits that could extend the candidate's orthant.
    std::vector<Split> pool;
    for (const Split& s : union_splits(trees))
        if (s_set.count(s) == 0 && compatible_with_all(s, s_set))
            pool.push_back(s);

    std::vector<ConditionCheck> checks;
    for (const Split& f : pool) {
        Direction dir;
        dir.coords.set(f, 1.0);
        dir.extension.insert(f);
        double sum = 0.0;
        for (const Tree& t : trees)
            sum += directional_limit(t, mu, dir).interior()[f];
        if (sum > tol) any_fail = true;
        checks.push_back({std::move(dir), sum});
    }

    bool multi = false;
    for (std::size_t i = 0; i < pool.size() && !multi; ++i)
        for (std::size_t j = i + 1; j < pool.size() && !multi; ++j)
            if (are_compatible(pool[i], pool[j])) multi = true;

    if (multi && direction_budget > 0) {
        Rng rng(0x8f1bbcdcbfa53e0bULL);
        for (std::size_t attempt = 0; attempt < direction_budget; ++attempt) {
            std::vector<Split> shuffled = pool;
            rng.shuffle(shuffled);
            const std::size_t want = 2 + rng.next_below(3);
            SplitSet f_set;
            for (const Split& c : shuffled) {
                if (f_set.size() == want) break;
                if (compatible_with_all(c, f_set)) f_set.insert(c);
            }
            if (f_set.size() < 2) continue;
            Direction dir;
            double norm2 = 0.0;
            for (const Split& f : f_set) {
                const double w = rng.uniform(0.25, 1.0);
                dir.coords.set(f, w);
                dir.extension.insert(f);
                norm2 += w * w;
            }
            dir.coords *= 1.0 / std::sqrt(norm2);
            double sum = 0.0;
            for (const Tree& t : trees) {
                const TangentVector v = directional_limit(t, mu, dir);
                for (const Split& f : f_set) sum += dir.coords[f] * v.interior()[f];
            }
            if (sum > tol) any_fail = true;
            checks.push_back({std::move(dir), sum});
        }
    }

    const Verdict verdict =
        any_fail ? Verdict::fail : (multi ? Verdict::inconclusive : Verdict::pass);
    return MeanCertificate{mu, residual, std::move(checks), verdict};
}

/// One independent piece of a decomposed mean problem: trees restricted to
/// a leaf block, with contracted regions stood in for by virtual leaves
/// (labeled "*<leaf>" after the smallest original leaf they hide).
/// `leaf_masks[i]` is the set of original leaves block leaf `i` represents.
struct Subproblem {
    TaxonSetPtr taxa;
    std::vector<std::uint64_t> leaf_masks;
    std::vector<Tree> trees;
};

struct Decomposition {
    TaxonSetPtr taxa;  ///< original taxon set
    /// Splits compatible with every input (interior and pendant alike),
    /// paired with their mean weight = the arithmetic average of their
    /// weights across all inputs (absent = 0).
    std::vector<std::pair<Split, double>> shared;
    std::vector<Subproblem> subproblems;
};

/// Splits the mean problem along every split that is compatible with all
/// inputs (in particular every split present in all of them). Such splits
/// carry an exactly-averaged weight in the mean, and the distance — hence
/// the Frechet objective — separates across them, leaving independent
/// subproblems on the leaf blocks between consecutive shared splits.
/// Subproblems whose restricted trees are all stars are omitted; their
/// content is fully described by `shared`.
inline Decomposition decompose_common(const std::vector<Tree>& trees) {
    detail::check_family(trees);
    const TaxonSetPtr taxa = trees.front().taxa();
    const std::size_t n = taxa->size();
    const double r = static_cast<double>(trees.size());

    Decomposition dec;
    dec.taxa = taxa;

    std::vector<Split> shared_interior;
    for (const Split& s : union_splits(trees)) {
        bool everywhere = true;
        for (const Tree& t : trees)
            if (!compatible_with_all(s, t.split_set())) {
                everywhere = false;
                break;
            }
        if (!everywhere) continue;
        dec.shared.emplace_back(s, detail::total_weight(s, trees) / r);
        shared_interior.push_back(s);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double avg = 0.0;
        for (const Tree& t : trees) avg += t.pendant_weight(i);
        dec.shared.emplace_back(Split(std::uint64_t{1} << i, taxa), avg / r);
    }

    // Start from the whole problem (pendants live in `shared`, so the
    // working trees carry none) and cut along each shared interior split.
    std::vector<Subproblem> work;
    {
        Subproblem whole;
        whole.taxa = taxa;
        for (std::size_t i = 0; i < n; ++i)
            whole.leaf_masks.push_back(std::uint64_t{1} << i);
        for (const Tree& t : trees) {
            std::map<Split, double> weights;
            for (const Split& s : t.split_set()) weights[s] = t.weight(s);
            whole.trees.emplace_back(taxa, std::move(weights),
                                     std::vector<double>(n, 0.0));
        }
        work.push_back(std::move(whole));
    }

    for (const Split& cut : shared_interior) {
        // Locate the unique block whose leaves separate cleanly into the
        // two sides of the cut with at least two leaves each; every other
        // block sees the cut inside one of its contracted virtual leaves.
        std::size_t block_index = work.size();
        std::vector<int> side_of;  // 0 = inside cut.side(), 1 = outside
        for (std::size_t b = 0; b < work.size() && block_index == work.size(); ++b) {
            const Subproblem& blk = work[b];
            std::vector<int> sides(blk.leaf_masks.size(), -1);
            bool clean = true;
            std::size_t in_count = 0, out_count = 0;
            for (std::size_t l = 0; l < blk.leaf_masks.size(); ++l) {
                const std::uint64_t m = blk.leaf_masks[l];
                if ((m & ~cut.side()) == 0) {
                    sides[l] = 0;
                    ++in_count;
                } else if ((m & cut.side()) == 0) {
                    sides[l] = 1;
                    ++out_count;
                } else {
                    clean = false;
                    break;
                }
            }
            if (clean && in_count >= 2 && out_count >= 2) {
                block_index = b;
                side_of = std::move(sides);
            }
        }
        if (block_index == work.size())
            throw std::logic_error("shared split fits no block of the decomposition");

        const Subproblem blk = std::move(work[block_index]);
        work.erase(work.begin() + static_cast<std::ptrdiff_t>(block_index));

        // Build the two halves: kept leaves in original order, then one
        // virtual leaf standing for everything on the far side of the cut.
        auto build_half = [&](int keep_side, std::uint64_t far_mask) {
            Subproblem half;
            std::vector<std::string> labels;
            std::vector<std::size_t> old_to_new(blk.leaf_masks.size(),
                                                std::size_t(-1));
            for (std::size_t l = 0; l < blk.leaf_masks.size(); ++l) {
                if (side_of[l] != keep_side) continue;
                old_to_new[l] = labels.size();
                labels.push_back(blk.taxa->label(l));
                half.leaf_masks.push_back(blk.leaf_masks[l]);
            }
            int far_leaf = 0;
            while (((far_mask >> far_leaf) & 1u) == 0) ++far_leaf;
            labels.push_back("*" + taxa->label(static_cast<std::size_t>(far_leaf)));
            half.leaf_masks.push_back(far_mask);
            half.taxa = make_taxa(std::move(labels));

            std::uint64_t keep_mask = 0;
            for (std::size_t l = 0; l < blk.leaf_masks.size(); ++l)
                if (side_of[l] == keep_side) keep_mask |= std::uint64_t{1} << l;

            for (const Tree& t : blk.trees) {
                std::map<Split, double> weights;
                for (const Split& x : t.split_set()) {
                    std::uint64_t m = x.side();
                    const std::uint64_t other = x.other_side();
                    if (m == keep_mask || other == keep_mask) continue;  // the cut
                    std::uint64_t inside;
                    if ((m & ~keep_mask) == 0)
                        inside = m;
                    else if ((other & ~keep_mask) == 0)
                        inside = other;
                    else
                        continue;  // belongs to the other half
                    // The far side of the split gains the virtual leaf, so
                    // the image of an interior split is again interior.
                    std::uint64_t mapped = 0;
                    for (std::size_t l = 0; l < blk.leaf_masks.size(); ++l)
                        if ((inside >> l) & 1u)
                            mapped |= std::uint64_t{1} << old_to_new[l];
                    weights[Split(mapped, half.taxa)] = t.weight(x);
                }
                half.trees.emplace_back(
                    half.taxa, std::move(weights),
                    std::vector<double>(half.taxa->size(), 0.0));
            }
            return half;
        };
        work.push_back(build_half(0, cut.other_side()));
        work.push_back(build_half(1, cut.side()));
    }

    for (Subproblem& blk : work) {
        bool informative = false;
        for (const Tree& t : blk.trees)
            if (!t.is_star()) {
                informative = true;
                break;
            }
        if (informative) dec.subproblems.push_back(std::move(blk));
    }
    return dec;
}

/// Reassembles the full mean from the decomposition's shared weights and
/// the subproblem means (one per `dec.subproblems`, over matching taxa).
/// Subproblem pendant weights are ignored: pendants are shared splits and
/// carry exact averages.
inline Tree recombine(const Decomposition& dec, const std::vector<Tree>& sub_means) {
    if (sub_means.size() != dec.subproblems.size())
        throw std::invalid_argument("one mean per subproblem required");
    const std::size_t n = dec.taxa->size();
    std::map<Split, double> weights;
    std::vector<double> pendants(n, 0.0);
    for (const auto& [s, w] : dec.shared) {
        if (s.interior()) {
            if (w > kAbsentWeightTol) weights[s] = w;
            continue;
        }
        const std::uint64_t single =
            (s.side() & (s.side() - 1)) == 0 ? s.side() : s.other_side();
        int leaf = 0;
        while (((single >> leaf) & 1u) == 0) ++leaf;
        pendants[static_cast<std::size_t>(leaf)] = w;
    }
    for (std::size_t i = 0; i < dec.subproblems.size(); ++i) {
        const Subproblem& blk = dec.subproblems[i];
        const Tree m = rebased(sub_means[i], blk.taxa);
        for (const Split& x : m.split_set()) {
            std::uint64_t original = 0;
            for (std::size_t l = 0; l < blk.leaf_masks.size(); ++l)
                if ((x.side() >> l) & 1u) original |= blk.leaf_masks[l];
            const double w = m.weight(x);
            if (w > kAbsentWeightTol) weights[Split(original, dec.taxa)] = w;
        }
    }
    return Tree(dec.taxa, std::move(weights), std::move(pendants));
}

namespace detail {

/// Average of the log-mapped inputs, restricted to the base's coordinates.
/// At the true mean this equals the base itself (the fixed-point form of
/// the characterization), so `target - base` acts as a residual.
struct CoordinateTarget {
    std::map<Split, double> weights;
    std::vector<double> pendants;
};

inline CoordinateTarget mean_coordinate_target(const std::vector<Tree>& trees,
                                               const Tree& base) {
    const SplitSet s_set = base.split_set();
    const double r = static_cast<double>(trees.size());
    CoordinateTarget out;
    out.pendants.assign(base.taxa()->size(), 0.0);
    for (const Split& s : s_set) out.weights[s] = 0.0;
    for (const Tree& t : trees) {
        const TangentVector v = log_map(t, base);
        for (const Split& s : s_set) out.weights[s] += v.interior()[s];
        for (std::size_t i = 0; i < out.pendants.size(); ++i)
            out.pendants[i] += v.pendant()[i];
    }
    for (auto& [s, w] : out.weights) w /= r;
    for (double& p : out.pendants) p /= r;
    return out;
}

inline double coordinate_residual(const Tree& base, const CoordinateTarget& tgt) {
    double r2 = 0.0;
    for (const auto& [s, w] : tgt.weights) {
        const double d = w - base.weight(s);
        r2 += d * d;
    }
    for (std::size_t i = 0; i < tgt.pendants.size(); ++i) {
        const double d = tgt.pendants[i] - base.pendant_weight(i);
        r2 += d * d;
    }
    return std::sqrt(r2);
}

/// Refines a mean candidate inside its own orthant by driving the
/// fixed-point residual of the characterization to zero. The raw iteration
/// `base <- target(base)` is unstable when the candidate is much closer to
/// the orthant boundary than the inputs (the crossing terms amplify
/// tangential error), so steps are damped and the step size backtracks
/// until the residual decreases. Coordinates driven to or below `drop_tol`
/// leave the orthant and are removed before re-iterating.
inline Tree polish_mean(const std::vector<Tree>& trees, Tree current,
                        double drop_tol = 1e-9, int cap = 500) {
    const TaxonSetPtr taxa = current.taxa();
    const std::size_t n = taxa->size();
    double step = 1.0;
    CoordinateTarget tgt = mean_coordinate_target(trees, current);
    double resid = coordinate_residual(current, tgt);
    for (int iter = 0; iter < cap; ++iter) {
        const double scale =
            1.0 + interior_norm(current) +
            std::sqrt(std::inner_product(tgt.pendants.begin(), tgt.pendants.end(),
                                         tgt.pendants.begin(), 0.0));
        if (resid <= 1e-13 * scale) break;

        step = std::min(1.0, step * 2.0);
        bool accepted = false;
        while (!accepted) {
            bool dropped = false;
            std::map<Split, double> next;
            for (const auto& [s, w] : tgt.weights) {
                const double nw =
                    current.weight(s) + step * (w - current.weight(s));
                if (nw <= drop_tol) {
                    dropped = true;
                    continue;
                }
                next[s] = nw;
            }
            std::vector<double> pend(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double cur = current.pendant_weight(i);
                pend[i] = std::max(0.0, cur + step * (tgt.pendants[i] - cur));
            }
            Tree candidate(taxa, std::move(next), std::move(pend));
            CoordinateTarget cand_tgt = mean_coordinate_target(trees, candidate);
            const double cand_resid = coordinate_residual(candidate, cand_tgt);
            if (dropped || cand_resid < resid || step < 1e-6) {
                current = std::move(candidate);
                tgt = std::move(cand_tgt);
                resid = cand_resid;
                accepted = true;
            } else {
                step *= 0.5;
            }
        }
    }
    return current;
}

}  // namespace detail

struct MeanOptions {
    std::size_t max_iter = 100000;
    std::uint64_t seed = 0;
    double tol = 1e-8;  ///< verification tolerance
    std::size_t direction_budget = 64;
    std::size_t restarts = 3;  ///< extra seeded attempts after a failed verify
    std::size_t candidate_cap = 1000000;
};

struct MeanResult {
    Tree mean;
    MeanCertificate certificate;
    ConditionsReport conditions;
};

/// Full pipeline: condition screens on the inputs, decomposition along
/// always-compatible splits, iterative mean per subproblem (coarse
/// localization) refined by the characterization fixed point, recombination,
/// and verification. A failed verification first retries with near-zero
/// coordinates projected to the orthant boundary, then restarts the
/// iteration under a fresh seed. When the certificate is not `fail`, the
/// result is checked against the screens: every positive-split-sum split
/// must be present and the split set must pass the square-sum screen.
inline MeanResult mean(const std::vector<Tree>& trees, const MeanOptions& opt = {}) {
    detail::check_family(trees);
    ConditionsReport conditions = prune_orthants(trees, opt.candidate_cap);
    const Decomposition dec = decompose_common(trees);

    std::optional<MeanCertificate> certificate;
    for (std::size_t attempt = 0; attempt <= opt.restarts; ++attempt) {
        std::vector<Tree> sub_means;
        for (const Subproblem& sub : dec.subproblems) {
            const std::size_t budget = std::min<std::size_t>(
                opt.max_iter, 4000 + 400 * sub.trees.size());
            Tree m = iterative_mean(sub.trees, budget,
                                    opt.seed + 0x9e3779b9ULL * attempt,
                                    std::max(opt.tol, 1e-4));
            sub_means.push_back(detail::polish_mean(sub.trees, std::move(m)));
        }
        Tree candidate = recombine(dec, sub_means);
        MeanCertificate cert =
            verify_mean(candidate, trees, opt.tol, opt.direction_budget);

        // Recovery moves. A strictly positive direction check means the
        // objective still decreases into the neighboring orthant spanned by
        // that direction's splits, so step into it and re-refine (rescues
        // iterates that collapsed onto a boundary too early). Otherwise
        // barely-positive coordinates suggest the candidate stalled just
        // inside a wrong orthant: project them to the boundary and
        // re-refine there.
        for (int round = 0; round < 4 && cert.verdict == Verdict::fail; ++round) {
            const ConditionCheck* worst = nullptr;
            for (const ConditionCheck& c : cert.condition_i_checks)
                if (c.value > opt.tol && (!worst || c.value > worst->value))
                    worst = &c;
            if (worst) {
                const double delta = 0.01 * (1.0 + interior_norm(candidate));
                std::map<Split, double> grown;
                for (const Split& s : candidate.split_set())
                    grown[s] = candidate.weight(s);
                for (const auto& [s, w] : worst->direction.coords.coords())
                    grown[s] = delta * w;
                candidate = Tree(candidate.taxa(), std::move(grown),
                                 candidate.pendant_weights());
            } else {
                const double scale = 1.0 + interior_norm(candidate);
                std::map<Split, double> kept;
                for (const Split& s : candidate.split_set())
                    if (candidate.weight(s) >= 1e-5 * scale)
                        kept[s] = candidate.weight(s);
                if (kept.size() == candidate.split_set().size()) break;
                candidate = Tree(candidate.taxa(), std::move(kept),
                                 candidate.pendant_weights());
            }
            candidate = detail::polish_mean(trees, std::move(candidate));
            cert = verify_mean(candidate, trees, opt.tol, opt.direction_budget);
        }
        if (cert.verdict != Verdict::fail || attempt == opt.restarts) {
            certificate = std::move(cert);
            break;
        }
    }

    MeanResult out{certificate->candidate, std::move(*certificate),
                   std::move(conditions)};
    if (out.certificate.verdict != Verdict::fail) {
        for (const auto& [s, sigma] : out.conditions.sigma)
            if (sigma > 0.0 && !out.mean.has(s))
                throw std::runtime_error(
                    "certified mean misses a split its split sum forces");
        if (!out.mean.is_star() &&
            !(square_sum_difference(out.mean.split_set(), trees) > 0.0))
            throw std::runtime_error("certified mean fails the square-sum screen");
    }
    return out;
}

}  // namespace bhv
