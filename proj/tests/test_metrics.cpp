#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "sml/metrics.hpp"
#include "sml/rng.hpp"

using sml::IouAccumulator;
using sml::Rng;
using sml::SegmentationMask;

namespace {

SegmentationMask make_mask(int h, int w, const std::vector<std::uint8_t>& v) {
    SegmentationMask m;
    m.h = h;
    m.w = w;
    m.v = v;
    return m;
}

SegmentationMask random_mask(int h, int w, int max_class, Rng& rng) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w);
    for (auto& px : v) px = static_cast<std::uint8_t>(rng.below(max_class + 1));
    return make_mask(h, w, v);
}

} // namespace

TEST_CASE("perfect predictions give IoU 1 everywhere") {
    Rng rng(3);
    IouAccumulator acc;
    for (int e = 0; e < 5; ++e) {
        auto gt = random_mask(6, 6, 3, rng);
        acc.accumulate(gt, gt);
    }
    auto report = acc.finalize();
    CHECK(report.mean_iou == doctest::Approx(1.0));
    CHECK(report.binary_iou == doctest::Approx(1.0));
    for (const auto& [c, iou] : report.per_class) CHECK(iou == doctest::Approx(1.0));
}

TEST_CASE("the 4-4-2 overlap fixture gives a class IoU of one third") {
    IouAccumulator acc;
    auto gt = make_mask(3, 3, {1, 1, 1, 1, 0, 0, 0, 0, 0});
    auto pred = make_mask(3, 3, {0, 0, 1, 1, 1, 1, 0, 0, 0});
    acc.accumulate(pred, gt);
    auto report = acc.finalize();
    CHECK(report.per_class.at(1) == doctest::Approx(1.0 / 3.0));
    CHECK(report.mean_iou == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("all-background predictions on nonempty ground truth give zero mean IoU") {
    IouAccumulator acc;
    auto gt = make_mask(2, 2, {1, 1, 0, 0});
    auto pred = make_mask(2, 2, {0, 0, 0, 0});
    acc.accumulate(pred, gt);
    auto report = acc.finalize();
    CHECK(report.mean_iou == doctest::Approx(0.0));
}

TEST_CASE("random masks match a brute-force pixel-loop oracle exactly") {
    Rng rng(7);
    IouAccumulator acc;
    std::map<int, std::pair<std::uint64_t, std::uint64_t>> want;
    for (int e = 0; e < 10; ++e) {
        auto gt = random_mask(5, 7, 3, rng);
        auto pred = random_mask(5, 7, 3, rng);
        acc.accumulate(pred, gt);
        for (int c = 1; c <= 3; ++c) {
            for (std::size_t p = 0; p < gt.v.size(); ++p) {
                want[c].first += pred.v[p] == c && gt.v[p] == c;
                want[c].second += pred.v[p] == c || gt.v[p] == c;
            }
        }
    }
    auto report = acc.finalize();
    for (int c = 1; c <= 3; ++c) {
        if (want[c].second == 0) {
            CHECK(report.per_class.count(c) == 0);
        } else {
            CHECK(report.per_class.at(c) ==
                  doctest::Approx(static_cast<double>(want[c].first) / want[c].second));
        }
    }
}

TEST_CASE("two-class toy stream matches hand-tallied counts") {
    IouAccumulator acc;
    // episode 1: class 1, gt 3 px, pred 2 px overlapping 2 -> I=2 U=3
    acc.accumulate(make_mask(2, 3, {1, 1, 0, 0, 0, 0}), make_mask(2, 3, {1, 1, 1, 0, 0, 0}));
    // episode 2: class 2, gt 2 px, pred 3 px overlapping 1 -> I=1 U=4
    acc.accumulate(make_mask(2, 3, {2, 2, 2, 0, 0, 0}), make_mask(2, 3, {2, 0, 0, 2, 0, 0}));
    auto report = acc.finalize();
    CHECK(report.per_class.at(1) == doctest::Approx(2.0 / 3.0));
    CHECK(report.per_class.at(2) == doctest::Approx(1.0 / 4.0));
    CHECK(report.mean_iou == doctest::Approx(0.5 * (2.0 / 3.0 + 1.0 / 4.0)));
    // binary: fg I=3 U=7; bg I=(3 and 2 -> ) episode1 bg pred {0,0,0,1,1,1} n gt {0,0,1,1,1}
    // computed by hand: ep1 bg inter 3, uni 4; ep2 bg inter 2, uni 5 -> I=5 U=9
    CHECK(report.binary_iou == doctest::Approx(0.5 * (3.0 / 7.0 + 5.0 / 9.0)));
    CHECK(report.episodes == 2);
}

TEST_CASE("accumulation order does not change the outcome") {
    Rng rng(11);
    std::vector<std::pair<SegmentationMask, SegmentationMask>> pairs;
    for (int e = 0; e < 8; ++e)
        pairs.emplace_back(random_mask(4, 4, 2, rng), random_mask(4, 4, 2, rng));

    IouAccumulator forward, backward;
    for (const auto& [pred, gt] : pairs) forward.accumulate(pred, gt);
    for (auto it = pairs.rbegin(); it != pairs.rend(); ++it)
        backward.accumulate(it->first, it->second);
    auto a = forward.finalize();
    auto b = backward.finalize();
    CHECK(a.mean_iou == doctest::Approx(b.mean_iou));
    CHECK(a.binary_iou == doctest::Approx(b.binary_iou));
}

TEST_CASE("merging shards equals sequential accumulation") {
    Rng rng(13);
    IouAccumulator all, shard1, shard2;
    for (int e = 0; e < 10; ++e) {
        auto gt = random_mask(4, 5, 3, rng);
        auto pred = random_mask(4, 5, 3, rng);
        all.accumulate(pred, gt);
        (e % 2 == 0 ? shard1 : shard2).accumulate(pred, gt);
    }
    shard1.merge(shard2);
    auto a = all.finalize();
    auto b = shard1.finalize();
    CHECK(a.mean_iou == doctest::Approx(b.mean_iou));
    CHECK(a.binary_iou == doctest::Approx(b.binary_iou));
    CHECK(a.episodes == b.episodes);
}

TEST_CASE("collapsing classes before accumulation equals the binary track") {
    Rng rng(17);
    IouAccumulator multi, collapsed;
    for (int e = 0; e < 10; ++e) {
        auto gt = random_mask(5, 5, 3, rng);
        auto pred = random_mask(5, 5, 3, rng);
        multi.accumulate(pred, gt);
        auto collapse = [](SegmentationMask m) {
            for (auto& px : m.v) px = px != 0;
            return m;
        };
        collapsed.accumulate(collapse(pred), collapse(gt));
    }
    CHECK(multi.finalize().binary_iou == doctest::Approx(collapsed.finalize().binary_iou));
}

TEST_CASE("IoU values stay in [0, 1]") {
    Rng rng(19);
    IouAccumulator acc;
    for (int e = 0; e < 20; ++e)
        acc.accumulate(random_mask(6, 6, 4, rng), random_mask(6, 6, 4, rng));
    auto report = acc.finalize();
    for (const auto& [c, iou] : report.per_class) {
        CHECK(iou >= 0.0);
        CHECK(iou <= 1.0);
    }
    CHECK(report.mean_iou >= 0.0);
    CHECK(report.mean_iou <= 1.0);
}

TEST_CASE("error contracts") {
    IouAccumulator acc;
    CHECK_THROWS_AS(acc.finalize(), sml::ContractError);
    CHECK_THROWS_AS(acc.accumulate(make_mask(2, 2, {0, 0, 0, 0}), make_mask(2, 3, {0, 0, 0, 0, 0, 0})),
                    sml::ContractError);
}

TEST_CASE("report text carries the aggregate lines and the RESULT grammar") {
    IouAccumulator acc;
    auto gt = make_mask(2, 3, {1, 1, 1, 0, 0, 0});
    acc.accumulate(gt, gt);
    auto report = acc.finalize();
    auto text = sml::format_report(report);
    CHECK(text.find("mean_iou = 1.0000") != std::string::npos);
    CHECK(text.find("binary_iou = 1.0000") != std::string::npos);
    auto line = sml::result_line(report, 1, 5, "dense");
    CHECK(line ==
          "RESULT mean_iou=1.0000 binary_iou=1.0000 episodes=1 ways=1 shots=5 annotation=dense");
}
