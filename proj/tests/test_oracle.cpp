#include <catch2/catch_amalgamated.hpp>

#include "bhv/oracle.hpp"
#include "fixtures.hpp"

using namespace bhv;

// The reference values below are worked by hand from the closed-form length:
//   d^2 = sum_i (||A_i||_T1 + ||B_i||_T2)^2 + sum_shared (w1-w2)^2
//         + sum_leaf (p1-p2)^2.

TEST_CASE("oracle: path through the origin when all splits cross") {
    // T1 = {s1:6} vs T2 = {s3:3, s4:4}: s1 crosses both, so the single
    // exchanged group gives d = 6 + sqrt(9+16) = 11.
    CHECK(brute_force_distance(fx::cone_t1(), fx::cone_t2()) == Catch::Approx(11.0).epsilon(1e-14));
}

TEST_CASE("oracle: one shared split, one exchanged group") {
    // T1 = {s2:3} vs T2 = {s3:4, s4:1}: s3 is shared (absent from T1 but
    // compatible with it), s2 and s4 cross: d^2 = (3+1)^2 + 4^2 = 32.
    CHECK(brute_force_distance(fx::combined_t1(), fx::combined_t2()) ==
          Catch::Approx(std::sqrt(32.0)).epsilon(1e-14));
}

TEST_CASE("oracle: two exchanged groups beat one") {
    // T1 = {s1:1, s2:10} vs T2 = {s3:10, s4:1}. The grouping
    // ({s1},{s3}),({s2},{s4}) is admissible (s2 compatible with s3) and gives
    // d^2 = (1+10)^2 + (10+1)^2 = 242; the single group gives
    // (sqrt(101)+sqrt(101))^2 = 404.
    Tree t1 = fx::tree5({{fx::s1(), 1.0}, {fx::s2(), 10.0}});
    Tree t2 = fx::tree5({{fx::s3(), 10.0}, {fx::s4(), 1.0}});
    CHECK(brute_force_distance(t1, t2) == Catch::Approx(std::sqrt(242.0)).epsilon(1e-14));
}

TEST_CASE("oracle: pendant differences enter the shared term") {
    Tree t1 = Tree(fx::taxa5(), {{fx::s1(), 6.0}}, {1, 0, 0, 0, 0});
    Tree t2 = Tree(fx::taxa5(), {{fx::s3(), 3.0}, {fx::s4(), 4.0}}, {0, 0, 0, 0, 2});
    CHECK(brute_force_distance(t1, t2) == Catch::Approx(std::sqrt(121.0 + 1.0 + 4.0)));
}

TEST_CASE("oracle: same orthant reduces to the Euclidean distance") {
    Tree t1 = fx::tree5({{fx::s1(), 2.0}, {fx::s2(), 7.0}});
    Tree t2 = fx::tree5({{fx::s1(), 5.0}, {fx::s2(), 3.0}});
    CHECK(brute_force_distance(t1, t2) == Catch::Approx(5.0));
    CHECK(brute_force_distance(t1, t1) == 0.0);
}

TEST_CASE("oracle: triangle inequality and symmetry on random pairs") {
    bhv::Rng rng(2024);
    auto taxa = fx::random_taxa(6);
    for (int iter = 0; iter < 25; ++iter) {
        Tree a = fx::random_tree(taxa, rng);
        Tree b = fx::random_tree(taxa, rng);
        Tree c = fx::random_tree(taxa, rng);
        const double ab = brute_force_distance(a, b);
        const double ba = brute_force_distance(b, a);
        CHECK(ab == Catch::Approx(ba).margin(1e-12));
        const double ac = brute_force_distance(a, c);
        const double cb = brute_force_distance(c, b);
        CHECK(ab <= ac + cb + 1e-9);
    }
}

TEST_CASE("oracle: squared-distance sum") {
    auto trees = std::vector<Tree>{fx::tree5({{fx::s1(), 1.0}}), fx::tree5({{fx::s1(), 2.0}}),
                                   fx::tree5({{fx::s1(), 6.0}})};
    Tree at3 = fx::tree5({{fx::s1(), 3.0}});
    CHECK(brute_force_frechet_value(at3, trees) == Catch::Approx(4.0 + 1.0 + 9.0));
}

TEST_CASE("oracle: grid search finds a one-dimensional barycenter") {
    // All inputs share one orthant; the minimizer is the coordinate average.
    auto trees = std::vector<Tree>{fx::tree5({{fx::s1(), 1.0}}), fx::tree5({{fx::s1(), 2.0}}),
                                   fx::tree5({{fx::s1(), 6.0}})};
    Tree best = grid_frechet_min(trees, {SplitSet{fx::s1()}});
    CHECK(best.weight(fx::s1()) == Catch::Approx(3.0).margin(2e-3));
}

TEST_CASE("oracle: grid search picks the right orthant") {
    // For {s1:3}, {s2:3}, {s3:4,s4:1} the squared-distance sum restricted to
    // the orthant {s2,s3} is 3u^2-4u+10 + 3v^2-2v+25, minimized at
    // (2/3, 1/3) with value 100/3; the neighboring orthant {s1,s2} bottoms
    // out at 35 - 4/3 > 100/3.
    auto trees = fx::chain_family();
    std::vector<SplitSet> candidates = {SplitSet{fx::s1(), fx::s2()}, SplitSet{fx::s2(), fx::s3()},
                                        SplitSet{fx::s3(), fx::s4()}};
    Tree best = grid_frechet_min(trees, candidates);
    CHECK(best.weight(fx::s2()) == Catch::Approx(2.0 / 3.0).margin(2e-3));
    CHECK(best.weight(fx::s3()) == Catch::Approx(1.0 / 3.0).margin(2e-3));
    CHECK(best.weight(fx::s1()) == 0.0);
    CHECK(brute_force_frechet_value(best, trees) == Catch::Approx(100.0 / 3.0).margin(1e-4));
}

TEST_CASE("oracle: grid search fixes pendants at their averages") {
    Tree t1 = Tree(fx::taxa5(), {{fx::s1(), 1.0}}, {1, 0, 0, 0, 0});
    Tree t2 = Tree(fx::taxa5(), {{fx::s1(), 3.0}}, {2, 0, 0, 0, 4});
    Tree best = grid_frechet_min({t1, t2}, {SplitSet{fx::s1()}});
    CHECK(best.pendant_weight(0) == 1.5);  // exact average, not a grid value
    CHECK(best.pendant_weight(4) == 2.0);
    CHECK(best.weight(fx::s1()) == Catch::Approx(2.0).margin(2e-3));
}

TEST_CASE("oracle: grid search converges to an exact origin") {
    // Inputs straddling the orthant make the star tree the minimizer; the
    // boxes keep zero on the grid, so the result is exactly the origin.
    auto trees = std::vector<Tree>{fx::tree5({{fx::s1(), 1.0}}), fx::tree5({{fx::s3(), 1.0}})};
    Tree best = grid_frechet_min(trees, {SplitSet{fx::s1()}, SplitSet{fx::s3()}});
    CHECK(best.is_star());
}

TEST_CASE("oracle: caps guard the factorial blow-up") {
    OracleConfig tiny;
    tiny.max_splits_per_side = 0;
    CHECK_THROWS_AS(brute_force_distance(fx::cone_t1(), fx::cone_t2(), tiny),
                    std::invalid_argument);
    OracleConfig big;
    big.max_splits_per_side = 9;  // above the hard cap
    CHECK_THROWS_AS(brute_force_distance(fx::cone_t1(), fx::cone_t2(), big),
                    std::invalid_argument);
    // Shared-splits-only pairs never enumerate, so the zero cap is harmless.
    Tree t1 = fx::tree5({{fx::s1(), 2.0}});
    Tree t2 = fx::tree5({{fx::s1(), 5.0}});
    CHECK(brute_force_distance(t1, t2, tiny) == Catch::Approx(3.0));
}
