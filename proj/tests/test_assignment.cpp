#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mo3tr/assignment.hpp"
#include "oracles.hpp"

using namespace mo3tr;

namespace {

// Exhaustive minimum over all injective row->column maps. Totals are summed
// in row order, matching the solver's reporting order, so that the comparison
// can demand bitwise equality.
double brute_force_cost(const CostMatrix& c) {
    const bool transposed = c.rows > c.cols;
    const int small = transposed ? c.cols : c.rows;
    const int large = transposed ? c.rows : c.cols;

    std::vector<int> pick(large);
    std::iota(pick.begin(), pick.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        std::vector<std::pair<int, int>> pairs; // (row, col) in the original matrix
        for (int i = 0; i < small; ++i) {
            pairs.emplace_back(transposed ? pick[i] : i, transposed ? i : pick[i]);
        }
        std::sort(pairs.begin(), pairs.end());
        double total = 0.0;
        for (auto [r, col] : pairs) total += c.at(r, col);
        best = std::min(best, total);
    } while (std::next_permutation(pick.begin(), pick.end()));
    return best;
}

CostMatrix random_matrix(int rows, int cols, Rng& rng) {
    CostMatrix c{rows, cols, {}};
    c.values.resize(static_cast<std::size_t>(rows) * cols);
    for (double& v : c.values) v = rng.uniform(-5.0, 5.0);
    return c;
}

} // namespace

TEST_CASE("giou of identical boxes is one") {
    BBox b{0.5, 0.5, 0.2, 0.3};
    CHECK(giou(b, b) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(1.0 - giou(b, b) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("giou of disjoint unit boxes two apart is minus one third") {
    BBox a = BBox::from_corner(0, 0, 1, 1);
    BBox b = BBox::from_corner(2, 0, 1, 1);
    // IoU 0, union 2, enclosing box 3x1
    CHECK(giou(a, b) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("giou rejects degenerate boxes") {
    BBox good{0.5, 0.5, 0.2, 0.2};
    BBox flat{0.5, 0.5, 0.0, 0.2};
    CHECK_THROWS_AS(giou(good, flat), Error);
}

TEST_CASE("giou never exceeds iou; equal when the enclosing box is tight") {
    Rng rng(71);
    for (int trial = 0; trial < 200; ++trial) {
        BBox a{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.4),
               rng.uniform(0.05, 0.4)};
        BBox b{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.4),
               rng.uniform(0.05, 0.4)};
        double g = giou(a, b), i = iou(a, b);
        CHECK(g <= i + 1e-12);
        CHECK(g > -1.0);
        CHECK(g <= 1.0);

        // tight enclosing box (equal union and hull area) forces equality
        double iw = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
        double ih = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
        double uni = a.area() + b.area() - iw * ih;
        double enclose = (std::max(a.right(), b.right()) - std::min(a.left(), b.left())) *
                         (std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top()));
        if (std::fabs(enclose - uni) < 1e-12) {
            CHECK(g == doctest::Approx(i).epsilon(1e-12));
        }
    }
}

TEST_CASE("bbox_cost composes the weighted terms") {
    CostWeights w; // (5, 2)
    BBox b{0.5, 0.5, 0.2, 0.3};
    CHECK(bbox_cost(b, b, w) == doctest::Approx(0.0).epsilon(1e-12));

    // L1 distance 0.1 and giou cost 0.2 by construction:
    // equal-size boxes shifted by 0.1 with width 0.9 give giou 0.8/1.0.
    BBox gt{0.45, 0.5, 0.9, 0.5};
    BBox pred{0.55, 0.5, 0.9, 0.5};
    CHECK(1.0 - giou(gt, pred) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(bbox_cost(gt, pred, w) == doctest::Approx(0.9).epsilon(1e-12));

    Rng rng(72);
    for (int trial = 0; trial < 100; ++trial) {
        BBox a{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.4),
               rng.uniform(0.05, 0.4)};
        BBox c{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.4),
               rng.uniform(0.05, 0.4)};
        double l1 = std::fabs(a.cx - c.cx) + std::fabs(a.cy - c.cy) +
                    std::fabs(a.w - c.w) + std::fabs(a.h - c.h);
        double want = w.alpha_l1 * l1 + w.alpha_giou * (1.0 - giou(a, c));
        CHECK(std::fabs(bbox_cost(a, c, w) - want) < 1e-12);
    }
}

TEST_CASE("matching_cost substitutions and monotonicity") {
    CostWeights w;
    BBox b{0.5, 0.5, 0.2, 0.3};
    CHECK(matching_cost(1.0, b, b, w) == doctest::Approx(-1.0).epsilon(1e-12));

    BBox gt{0.45, 0.5, 0.9, 0.5};
    BBox pred{0.55, 0.5, 0.9, 0.5};
    CHECK(matching_cost(0.5, gt, pred, w) == doctest::Approx(0.4).epsilon(1e-12));

    // decreasing the class probability strictly increases the cost
    CHECK(matching_cost(0.3, gt, pred, w) > matching_cost(0.5, gt, pred, w));

    // a full matrix equals scalar re-evaluation entry by entry
    Rng rng(73);
    for (int g = 0; g < 3; ++g) {
        for (int m = 0; m < 4; ++m) {
            BBox a{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.3),
                   rng.uniform(0.1, 0.3)};
            BBox c{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.3),
                   rng.uniform(0.1, 0.3)};
            double p = rng.uniform(0.0, 1.0);
            double entry = matching_cost(p, a, c, w);
            CHECK(std::fabs(entry - (-p + bbox_cost(a, c, w))) < 1e-12);
        }
    }
}

TEST_CASE("hungarian solves the trivial cases") {
    CostMatrix diag{2, 2, {1, 2, 2, 1}};
    Assignment a = hungarian(diag);
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0] == std::pair<int, int>(0, 0));
    CHECK(a.pairs[1] == std::pair<int, int>(1, 1));
    CHECK(a.total_cost == doctest::Approx(2.0));

    CostMatrix one{1, 1, {7}};
    Assignment b = hungarian(one);
    REQUIRE(b.pairs.size() == 1);
    CHECK(b.pairs[0] == std::pair<int, int>(0, 0));
    CHECK(b.total_cost == doctest::Approx(7.0));

    CostMatrix empty{0, 0, {}};
    CHECK(hungarian(empty).pairs.empty());
}

TEST_CASE("hungarian equals brute force on 500 random matrices") {
    Rng rng(74);
    for (int trial = 0; trial < 500; ++trial) {
        int rows = rng.uniform_int(1, 6);
        int cols = rng.uniform_int(1, 6);
        CostMatrix c = random_matrix(rows, cols, rng);
        Assignment got = hungarian(c);
        CHECK(static_cast<int>(got.pairs.size()) == std::min(rows, cols));
        CHECK(got.total_cost == brute_force_cost(c));

        std::vector<char> used_r(rows, 0), used_c(cols, 0);
        for (auto [r, col] : got.pairs) {
            CHECK(!used_r[r]);
            CHECK(!used_c[col]);
            used_r[r] = used_c[col] = 1;
        }
    }
}

TEST_CASE("adding a row constant leaves the chosen pairs unchanged") {
    Rng rng(75);
    for (int trial = 0; trial < 50; ++trial) {
        int n = rng.uniform_int(2, 6);
        CostMatrix c = random_matrix(n, n, rng);
        Assignment base = hungarian(c);
        CostMatrix shifted = c;
        int row = rng.uniform_int(0, n - 1);
        double delta = rng.uniform(-3.0, 3.0);
        for (int j = 0; j < n; ++j) shifted.at(row, j) += delta;
        Assignment after = hungarian(shifted);
        CHECK(after.pairs == base.pairs);
    }
}

TEST_CASE("hungarian rejects non-finite costs") {
    CostMatrix c{1, 2, {1.0, std::numeric_limits<double>::infinity()}};
    CHECK_THROWS_AS(hungarian(c), Error);
}

TEST_CASE("differentiable giou and bbox cost agree with the scalar route") {
    Rng rng(76);
    CostWeights w;
    for (int trial = 0; trial < 50; ++trial) {
        BBox a{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.3),
               rng.uniform(0.1, 0.3)};
        BBox b{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.3),
               rng.uniform(0.1, 0.3)};
        Tensor ta = Tensor::from_values(1, 4, {a.cx, a.cy, a.w, a.h});
        Tensor tb = Tensor::from_values(1, 4, {b.cx, b.cy, b.w, b.h});
        CHECK(std::fabs(giou_t(ta, tb).scalar_value() - giou(a, b)) < 1e-12);
        CHECK(std::fabs(bbox_cost_t(ta, tb, w).scalar_value() - bbox_cost(a, b, w)) < 1e-12);
    }
}

TEST_CASE("bbox cost gradients pass finite differences") {
    Rng rng(77);
    CostWeights w;
    Tensor gt = Tensor::from_values(1, 4, {0.42, 0.55, 0.21, 0.17});
    Tensor pred = Tensor::from_values(1, 4, {0.50, 0.47, 0.26, 0.22}, true);
    auto res = oracle::check_gradients({pred}, [&]() { return bbox_cost_t(gt, pred, w); });
    CHECK(res.max_rel_err < 1e-4);
}
