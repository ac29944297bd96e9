#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <vector>

#include "bhv/conditions.hpp"
#include "bhv/geodesic.hpp"
#include "bhv/rng.hpp"
#include "bhv/tree.hpp"
#include "fixtures.hpp"

using bhv::Split;
using bhv::SplitSet;
using bhv::Tree;

namespace {

SplitSet make_set(std::initializer_list<Split> splits) {
    return SplitSet(splits.begin(), splits.end());
}

bool contains_set(const std::vector<SplitSet>& sets, const SplitSet& s) {
    return std::find(sets.begin(), sets.end(), s) != sets.end();
}

// Test-side mirrors of the two ssd terms, usable on split sets that are
// not mutually compatible (the library entry point rejects those).
double positive_term(const SplitSet& s_set, const std::vector<Tree>& trees) {
    double sum = 0.0;
    for (const Split& s : s_set) {
        double tot = 0.0;
        for (const Tree& t : trees) tot += t.weight(s);
        sum += tot * tot;
    }
    return sum;
}

double crossing_term(const SplitSet& s_set, const std::vector<Tree>& trees) {
    double sum = 0.0;
    for (const Split& x : bhv::union_splits(trees)) {
        bool crosses = false;
        for (const Split& s : s_set)
            if (!bhv::are_compatible(s, x)) { crosses = true; break; }
        if (!crosses) continue;
        for (const Tree& t : trees) {
            const double w = t.weight(x);
            sum += w * w;
        }
    }
    return sum;
}

SplitSet closure_of(const SplitSet& s_set, const std::vector<Tree>& trees) {
    SplitSet closure = s_set;
    for (const Split& x : bhv::union_splits(trees))
        if (bhv::compatible_with_all(x, s_set)) closure.insert(x);
    return closure;
}

}  // namespace

TEST_CASE("split sums of the chain three-tree family are exact") {
    const auto trees = fx::chain_family();
    CHECK(bhv::split_sum(fx::s1(), trees) == -2.0);
    CHECK(bhv::split_sum(fx::s2(), trees) == 2.0);
    CHECK(bhv::split_sum(fx::s3(), trees) == 1.0);
    CHECK(bhv::split_sum(fx::s4(), trees) == -5.0);
}

TEST_CASE("split sums of the sticky four-tree family at w=10 are exact") {
    const auto trees = fx::stickiness_family(10.0);
    CHECK(bhv::split_sum(fx::s1(), trees) == -6.0);
    CHECK(bhv::split_sum(fx::s2(), trees) == -7.0);
    CHECK(bhv::split_sum(fx::s3(), trees) == -4.0);
    CHECK(bhv::split_sum(fx::s4(), trees) == -7.0);
}

TEST_CASE("split_sum rejects pendant splits and bad families") {
    const auto trees = fx::chain_family();
    const Split pendant = bhv::canonical_split({"B"}, fx::taxa5());
    REQUIRE_FALSE(pendant.interior());
    CHECK_THROWS_AS(bhv::split_sum(pendant, trees), std::invalid_argument);
    CHECK_THROWS_AS(bhv::split_sum(fx::s1(), std::vector<Tree>{}),
                    std::invalid_argument);
}

TEST_CASE("must_include certifies positive split sums") {
    CHECK(bhv::must_include(fx::chain_family()) ==
          make_set({fx::s2(), fx::s3()}));
    CHECK(bhv::must_include(fx::stickiness_family(10.0)).empty());
}

TEST_CASE("must_include certifies splits compatible with every other tree") {
    // Both inputs' splits are compatible across trees, so both are forced.
    const std::vector<Tree> trees = {fx::tree5({{fx::s2(), 5.0}}),
                                     fx::tree5({{fx::s2(), 1.0}, {fx::s3(), 2.0}})};
    CHECK(bhv::must_include(trees) == make_set({fx::s2(), fx::s3()}));
}

TEST_CASE("a forced split shows up in the midpoint of a two-tree family") {
    const std::vector<Tree> trees = {fx::tree5({{fx::s1(), 5.0}}),
                                     fx::tree5({{fx::s3(), 1.0}})};
    CHECK(bhv::must_include(trees) == make_set({fx::s1()}));
    // Midpoint of the connecting geodesic (the two-tree mean) keeps s1.
    const Tree mid = bhv::point_along(bhv::geodesic(trees[0], trees[1]), 0.5);
    CHECK(mid.weight(fx::s1()) == Catch::Approx(2.0).margin(1e-12));
    CHECK_FALSE(mid.has(fx::s3()));
}

TEST_CASE("square-sum differences of the chain family are exact") {
    const auto trees = fx::chain_family();
    CHECK(bhv::square_sum_difference(make_set({fx::s1(), fx::s2()}), trees) == 1.0);
    CHECK(bhv::square_sum_difference(make_set({fx::s2(), fx::s3()}), trees) == 15.0);
    CHECK(bhv::square_sum_difference(make_set({fx::s3(), fx::s4()}), trees) == -1.0);
    CHECK(bhv::square_sum_difference(SplitSet{}, trees) == 0.0);
    CHECK_THROWS_AS(
        bhv::square_sum_difference(make_set({fx::s1(), fx::s3()}), trees),
        std::invalid_argument);
}

TEST_CASE("square-sum differences of the sticky family at w=10 are exact") {
    const auto trees = fx::stickiness_family(10.0);
    CHECK(bhv::square_sum_difference(make_set({fx::s1(), fx::s2()}), trees) == 5.0);
    CHECK(bhv::square_sum_difference(make_set({fx::s2(), fx::s3()}), trees) == -101.0);
    CHECK(bhv::square_sum_difference(make_set({fx::s3(), fx::s4()}), trees) == 87.0);
}

TEST_CASE("orthant pruning on the chain family keeps both ssd-positive cliques") {
    const auto trees = fx::chain_family();
    const auto report = bhv::prune_orthants(trees);

    CHECK_FALSE(report.enumeration_truncated);
    CHECK(report.sigma.at(fx::s1()) == -2.0);
    CHECK(report.sigma.at(fx::s2()) == 2.0);
    CHECK(report.sigma.at(fx::s3()) == 1.0);
    CHECK(report.sigma.at(fx::s4()) == -5.0);
    CHECK(report.must_include == make_set({fx::s2(), fx::s3()}));

    const SplitSet o12 = make_set({fx::s1(), fx::s2()});
    const SplitSet o23 = make_set({fx::s2(), fx::s3()});
    const SplitSet o34 = make_set({fx::s3(), fx::s4()});
    REQUIRE(report.ssd_by_candidate.size() == 3);
    CHECK(report.ssd_by_candidate.at(o12) == 1.0);
    CHECK(report.ssd_by_candidate.at(o23) == 15.0);
    CHECK(report.ssd_by_candidate.at(o34) == -1.0);

    // The true mean orthant survives...
    REQUIRE(report.surviving_orthants.size() == 2);
    CHECK(contains_set(report.surviving_orthants, o23));
    // ...and so does an orthant that cannot hold the mean (it misses the
    // forced split s3): a passing screen is necessary, not sufficient.
    CHECK(contains_set(report.surviving_orthants, o12));
    REQUIRE(report.excluded_closures.size() == 1);
    CHECK(report.excluded_closures.front() == o34);

    // The looser scaled inequalities hold wherever ssd > 0.
    REQUIRE(report.relaxations.size() == 2);
    for (std::size_t i = 0; i < report.relaxations.size(); ++i) {
        const auto& relax = report.relaxations[i];
        CHECK(relax.holds_per_tree);
        CHECK(relax.holds_totals);
        const bool is_o23 = report.surviving_orthants[i] == o23;
        CHECK(relax.scaled_per_tree_squares == (is_o23 ? 75.0 : 54.0));
        CHECK(relax.crossing_per_tree_squares == (is_o23 ? 10.0 : 17.0));
        CHECK(relax.scaled_total_squares == (is_o23 ? 75.0 : 54.0));
        CHECK(relax.crossing_total_squares == (is_o23 ? 10.0 : 17.0));
    }
}

TEST_CASE("orthant pruning on the sticky family at w=10") {
    const auto report = bhv::prune_orthants(fx::stickiness_family(10.0));
    const SplitSet o12 = make_set({fx::s1(), fx::s2()});
    const SplitSet o23 = make_set({fx::s2(), fx::s3()});
    const SplitSet o34 = make_set({fx::s3(), fx::s4()});
    REQUIRE(report.surviving_orthants.size() == 2);
    CHECK(contains_set(report.surviving_orthants, o12));
    CHECK(contains_set(report.surviving_orthants, o34));
    REQUIRE(report.excluded_closures.size() == 1);
    CHECK(report.excluded_closures.front() == o23);
    CHECK(report.must_include.empty());
}

TEST_CASE("inputs confined to one orthant yield that orthant as sole survivor") {
    const std::vector<Tree> trees = {fx::tree5({{fx::s2(), 1.0}, {fx::s3(), 2.0}}),
                                     fx::tree5({{fx::s2(), 3.0}, {fx::s3(), 1.0}})};
    const auto report = bhv::prune_orthants(trees);
    REQUIRE(report.surviving_orthants.size() == 1);
    CHECK(report.surviving_orthants.front() == make_set({fx::s2(), fx::s3()}));
    CHECK(report.excluded_closures.empty());
    CHECK(report.ssd_by_candidate.at(make_set({fx::s2(), fx::s3()})) == 25.0);
}

TEST_CASE("star inputs produce an empty conditions report") {
    const std::vector<Tree> trees = {Tree::star(fx::taxa5()), Tree::star(fx::taxa5())};
    const auto report = bhv::prune_orthants(trees);
    CHECK(report.sigma.empty());
    CHECK(report.must_include.empty());
    CHECK(report.ssd_by_candidate.empty());
    CHECK(report.surviving_orthants.empty());
    CHECK(report.excluded_closures.empty());
    CHECK_FALSE(report.enumeration_truncated);
}

TEST_CASE("candidate enumeration honors a required core") {
    const auto trees = fx::chain_family();
    bool truncated = true;

    auto with_core = bhv::candidate_orthants(trees, make_set({fx::s2(), fx::s3()}),
                                             truncated);
    CHECK_FALSE(truncated);
    REQUIRE(with_core.size() == 1);
    CHECK(with_core.front() == make_set({fx::s2(), fx::s3()}));

    auto with_s1 = bhv::candidate_orthants(trees, make_set({fx::s1()}), truncated);
    REQUIRE(with_s1.size() == 1);
    CHECK(with_s1.front() == make_set({fx::s1(), fx::s2()}));

    CHECK_THROWS_AS(
        bhv::candidate_orthants(trees, make_set({fx::s1(), fx::s3()}), truncated),
        std::runtime_error);
}

TEST_CASE("the candidate cap trips the truncation flag") {
    const auto trees = fx::chain_family();
    bool truncated = false;
    const auto some = bhv::candidate_orthants(trees, SplitSet{}, truncated, 2);
    CHECK(truncated);
    CHECK(some.size() <= 2);

    const auto report = bhv::prune_orthants(trees, 1);
    CHECK(report.enumeration_truncated);

    bool untruncated = true;
    const auto all = bhv::candidate_orthants(trees, SplitSet{}, untruncated, 3);
    CHECK_FALSE(untruncated);
    CHECK(all.size() == 3);
}

TEST_CASE("sigma scales linearly and ssd quadratically with the weights") {
    const auto trees = fx::chain_family();
    // Power-of-two factor keeps every product exact in binary floating point.
    const double c = 4.0;
    std::vector<Tree> scaled;
    for (const Tree& t : trees) {
        std::map<Split, double> weights;
        for (const Split& s : t.split_set()) weights[s] = c * t.weight(s);
        scaled.push_back(fx::tree5(std::move(weights)));
    }
    for (const Split& s : bhv::union_splits(trees))
        CHECK(bhv::split_sum(s, scaled) == c * bhv::split_sum(s, trees));
    for (const SplitSet& orthant :
         {make_set({fx::s1(), fx::s2()}), make_set({fx::s2(), fx::s3()}),
          make_set({fx::s3(), fx::s4()})})
        CHECK(bhv::square_sum_difference(orthant, scaled) ==
              c * c * bhv::square_sum_difference(orthant, trees));
}

TEST_CASE("sigma and ssd ignore the order of the input list") {
    auto trees = fx::chain_family();
    std::vector<Tree> permuted = {trees[2], trees[0], trees[1]};
    for (const Split& s : bhv::union_splits(trees))
        CHECK(bhv::split_sum(s, permuted) == bhv::split_sum(s, trees));
    const SplitSet orthant = make_set({fx::s2(), fx::s3()});
    CHECK(bhv::square_sum_difference(orthant, permuted) ==
          bhv::square_sum_difference(orthant, trees));
}

TEST_CASE("a failed screen does not propagate to subsets of the closure") {
    // A failed maximal candidate S' certifies only that the mean's split
    // set cannot contain S'. Proper subsets must be re-screened with their
    // own closures, and those screens can pass.
    const auto trees = fx::chain_family();
    const SplitSet failed = make_set({fx::s3(), fx::s4()});
    REQUIRE(bhv::square_sum_difference(failed, trees) == -1.0);

    // s3 sits inside the failed closure, yet its own screen passes: the
    // exclusion does not propagate to subsets.
    const SplitSet sub = make_set({fx::s3()});
    const SplitSet sub_closure = closure_of(sub, trees);
    CHECK(sub_closure == make_set({fx::s2(), fx::s3(), fx::s4()}));
    CHECK(positive_term(sub_closure, trees) - crossing_term(sub_closure, trees) ==
          7.0);

    // Term-wise domination on random families: for every failed maximal
    // candidate S' and nonempty subset U, the positive term shrinks with U
    // and the crossing term grows under U's closure.
    bhv::Rng rng(20260817);
    int checked = 0;
    for (int iter = 0; iter < 40; ++iter) {
        const auto taxa = fx::random_taxa(6);
        fx::RandomTreeOptions opt;
        opt.drop_prob = 0.35;
        opt.weight_lo = 0.1;
        opt.weight_hi = 5.0;
        std::vector<Tree> family;
        for (int k = 0; k < 4; ++k) family.push_back(fx::random_tree(taxa, rng, opt));
        const auto report = bhv::prune_orthants(family);
        for (const SplitSet& sprime : report.excluded_closures) {
            std::vector<Split> members(sprime.begin(), sprime.end());
            const double pos_full = positive_term(sprime, family);
            const double cross_full = crossing_term(sprime, family);
            REQUIRE(pos_full - cross_full <= 0.0);
            for (std::uint64_t bits = 1; bits + 1 < (1ull << members.size());
                 ++bits) {
                SplitSet u;
                for (std::size_t b = 0; b < members.size(); ++b)
                    if ((bits >> b) & 1ull) u.insert(members[b]);
                const SplitSet u_closure = closure_of(u, family);
                CHECK(positive_term(u, family) <= pos_full + 1e-12);
                CHECK(std::includes(u_closure.begin(), u_closure.end(),
                                    sprime.begin(), sprime.end()));
                CHECK(crossing_term(u_closure, family) >= cross_full - 1e-12);
                ++checked;
            }
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("every candidate is a maximal mutually compatible subset") {
    bhv::Rng rng(97531);
    for (int iter = 0; iter < 30; ++iter) {
        const auto taxa = fx::random_taxa(7);
        fx::RandomTreeOptions opt;
        opt.drop_prob = 0.3;
        std::vector<Tree> family;
        for (int k = 0; k < 3; ++k) family.push_back(fx::random_tree(taxa, rng, opt));
        const SplitSet all = bhv::union_splits(family);
        bool truncated = false;
        const auto candidates =
            bhv::candidate_orthants(family, SplitSet{}, truncated);
        REQUIRE_FALSE(truncated);
        REQUIRE(!candidates.empty());
        for (const SplitSet& candidate : candidates) {
            REQUIRE(bhv::mutually_compatible(candidate));
            // Maximality: every union split outside crosses some member.
            for (const Split& x : all)
                if (candidate.count(x) == 0)
                    REQUIRE_FALSE(bhv::compatible_with_all(x, candidate));
        }
        // Every union split appears in at least one candidate.
        for (const Split& x : all) {
            bool found = false;
            for (const SplitSet& candidate : candidates)
                if (candidate.count(x)) { found = true; break; }
            REQUIRE(found);
        }
    }
}
