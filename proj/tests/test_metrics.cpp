#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "uesa/metrics.hpp"

using namespace uesa;

TEST_SUITE("metrics") {

TEST_CASE("binarize uses a greater-or-equal cutoff") {
    for (double v : oracle::values(binarize(Tensor::full({1, 2, 2}, 0.9)))) CHECK(v == 1.0);
    for (double v : oracle::values(binarize(Tensor::full({1, 2, 2}, 0.1)))) CHECK(v == 0.0);
    CHECK(binarize(Tensor({1}, {0.5})).item() == 1.0);
    CHECK(binarize(Tensor({1}, {std::nextafter(0.5, 0.0)})).item() == 0.0);
}

TEST_CASE("confusion counts") {
    Tensor gt({1, 2, 3}, {1, 0, 1, 1, 0, 0});
    auto same = confusion(gt, gt);
    CHECK(same.tp == 3);
    CHECK(same.tn == 3);
    CHECK(same.fp == 0);
    CHECK(same.fn == 0);

    Tensor complement({1, 2, 3}, {0, 1, 0, 0, 1, 1});
    auto opposite = confusion(complement, gt);
    CHECK(opposite.tp == 0);
    CHECK(opposite.tn == 0);
    CHECK(opposite.total() == 6);

    auto four = confusion(Tensor({1, 2, 2}, {1, 1, 0, 0}), Tensor({1, 2, 2}, {1, 0, 1, 0}));
    CHECK(four.tp == 1);
    CHECK(four.fp == 1);
    CHECK(four.fn == 1);
    CHECK(four.tn == 1);

    CHECK_THROWS_AS(confusion(Tensor({1}, {0.5}), Tensor({1}, {1.0})), std::invalid_argument);
    CHECK_THROWS_AS(confusion(Tensor({2}, {0, 1}), Tensor({1}, {1.0})), std::invalid_argument);
}

TEST_CASE("metric formulas on hand-derived counts") {
    const ConfusionCounts c{3, 1, 2, 4};
    CHECK(std::abs(dsc(c) - 6.0 / 9.0) < 1e-12);
    CHECK(std::abs(iou(c) - 0.5) < 1e-12);
    CHECK(std::abs(sen(c) - 0.6) < 1e-12);
    CHECK(std::abs(spec(c) - 0.8) < 1e-12);
    CHECK(std::abs(acc(c) - 0.7) < 1e-12);

    const ConfusionCounts perfect{5, 0, 0, 7};
    for (double v : metric_row("p", perfect).values) CHECK(v == 1.0);
}

TEST_CASE("empty sets score one") {
    const ConfusionCounts empty{0, 0, 0, 16};
    CHECK(dsc(empty) == 1.0);
    CHECK(iou(empty) == 1.0);
    CHECK(sen(empty) == 1.0);
    CHECK(spec(empty) == 1.0);
    const ConfusionCounts missed{0, 0, 4, 12};
    CHECK(dsc(missed) == 0.0);
    CHECK(sen(missed) == 0.0);
}

TEST_CASE("metric identities on random counts") {
    Rng rng(110);
    for (int trial = 0; trial < 1000; ++trial) {
        const ConfusionCounts c{rng.below(500), rng.below(500), rng.below(500), rng.below(500)};
        const double i = iou(c);
        CHECK(std::abs(dsc(c) - 2.0 * i / (1.0 + i)) < 1e-12);
        CHECK(dsc(c) >= i);
        for (double v : metric_row("r", c).values) CHECK((v >= 0.0 && v <= 1.0));
        // Swapping prediction and ground truth exchanges fp and fn.
        const ConfusionCounts swapped{c.tp, c.fn, c.fp, c.tn};
        CHECK(dsc(swapped) == dsc(c));
        CHECK(iou(swapped) == iou(c));
        CHECK(acc(swapped) == acc(c));
    }
}

TEST_CASE("aggregate examples") {
    auto single = aggregate({metric_row("a", {3, 1, 2, 4})});
    CHECK(single.of("iou").mean == 0.5);
    CHECK(single.of("iou").stddev == 0.0);

    MetricRow a{"a", {0.5, 0.5, 0.5, 0.5, 0.5}}, b{"b", {0.7, 0.7, 0.7, 0.7, 0.7}};
    auto two = aggregate({a, b});
    CHECK(format_summary(two.of("dsc")) == "0.6000±0.1000");
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
    CHECK_THROWS_AS(two.of("f1"), std::invalid_argument);
}

TEST_CASE("pooled aggregation evaluates the summed counts") {
    const ConfusionCounts c1{3, 1, 2, 4}, c2{1, 0, 0, 9};
    auto report = aggregate_pooled({metric_row("a", c1), metric_row("b", c2)}, {c1, c2});
    CHECK(std::abs(report.of("iou").mean - 4.0 / 7.0) < 1e-15);
    CHECK(report.of("iou").stddev == 0.0);
}

TEST_CASE("report CSV layout") {
    auto report = aggregate({metric_row("s00000", {3, 1, 2, 4}), metric_row("s00001", {5, 0, 0, 7})});
    const std::string csv = report_csv(report);
    CHECK(csv ==
          "image,dsc,iou,sen,spec,acc\n"
          "s00000,0.6667,0.5000,0.6000,0.8000,0.7000\n"
          "s00001,1.0000,1.0000,1.0000,1.0000,1.0000\n"
          "AGGREGATE,0.8333±0.1667,0.7500±0.2500,0.8000±0.2000,0.9000±0.1000,0.8500±0.1500\n");
}

}  // TEST_SUITE
