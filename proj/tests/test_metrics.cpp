#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "feddwa/metrics.hpp"
#include "feddwa/rng.hpp"

using namespace feddwa;

namespace {

Eigen::VectorXi random_mask(int pixels, int k, std::uint64_t seed) {
    RngStream rng(rng_key(seed, 0x20));
    Eigen::VectorXi mask(pixels);
    for (Eigen::Index p = 0; p < mask.size(); ++p) {
        mask(p) = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    }
    return mask;
}

// Naive per-pixel recount, one full scan per class.
ConfusionCounts naive_confusion(const Eigen::VectorXi& pred,
                                const Eigen::VectorXi& truth, int k) {
    ConfusionCounts counts(k);
    for (int c = 0; c < k; ++c) {
        for (Eigen::Index p = 0; p < pred.size(); ++p) {
            if (pred(p) == c && truth(p) == c) ++counts.tp[c];
            if (pred(p) == c && truth(p) != c) ++counts.fp[c];
            if (pred(p) != c && truth(p) == c) ++counts.fn[c];
        }
    }
    return counts;
}

}  // namespace

TEST_CASE("confusion equals the naive recount on random masks") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Eigen::VectorXi pred = random_mask(16, 5, 700 + seed);
        const Eigen::VectorXi truth = random_mask(16, 5, 800 + seed);
        const ConfusionCounts fast = confusion(pred, truth, 5);
        const ConfusionCounts slow = naive_confusion(pred, truth, 5);
        CHECK(fast.tp == slow.tp);
        CHECK(fast.fp == slow.fp);
        CHECK(fast.fn == slow.fn);
        const IouResult a = iou(fast);
        const IouResult b = iou(slow);
        for (int c = 0; c < 5; ++c) {
            CHECK(((std::isnan(a.per_class(c)) && std::isnan(b.per_class(c))) ||
                   a.per_class(c) == b.per_class(c)));
        }
        CHECK(a.mean == b.mean);
    }
}

TEST_CASE("perfect prediction scores 1 on every present class") {
    const Eigen::VectorXi truth = random_mask(20, 3, 5);
    const IouResult r = iou(confusion(truth, truth, 3));
    CHECK(r.mean == 1.0);
    for (int c = 0; c < 3; ++c) {
        if (!std::isnan(r.per_class(c))) CHECK(r.per_class(c) == 1.0);
    }
}

TEST_CASE("disjoint single-class prediction scores 0") {
    Eigen::VectorXi pred(4), truth(4);
    pred << 1, 1, 1, 1;
    truth << 2, 2, 2, 2;
    const IouResult r = iou(confusion(pred, truth, 3));
    CHECK(r.per_class(1) == 0.0);
    CHECK(r.per_class(2) == 0.0);
    CHECK(std::isnan(r.per_class(0)));
    CHECK(r.mean == 0.0);
}

TEST_CASE("TP=2 FP=1 FN=1 gives IoU 0.5 on a 2x2 mask") {
    Eigen::VectorXi truth(4), pred(4);
    truth << 1, 1, 1, 0;
    pred << 1, 1, 0, 1;
    const ConfusionCounts counts = confusion(pred, truth, 2);
    CHECK(counts.tp[1] == 2);
    CHECK(counts.fp[1] == 1);
    CHECK(counts.fn[1] == 1);
    CHECK(iou(counts).per_class(1) == 0.5);
}

TEST_CASE("confusion conservation over random masks") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::VectorXi pred = random_mask(64, 4, 900 + seed);
        const Eigen::VectorXi truth = random_mask(64, 4, 950 + seed);
        const ConfusionCounts counts = confusion(pred, truth, 4);
        const IouResult r = iou(counts);
        long tp_total = 0, tp_fn_total = 0;
        for (int c = 0; c < 4; ++c) {
            tp_total += counts.tp[c];
            tp_fn_total += counts.tp[c] + counts.fn[c];
            if (!std::isnan(r.per_class(c))) {
                CHECK(r.per_class(c) >= 0.0);
                CHECK(r.per_class(c) <= 1.0);
            }
        }
        CHECK(tp_total <= 64);
        CHECK(tp_fn_total == 64);
    }
}

TEST_CASE("IoU is 1 only with TP > 0 and no errors") {
    ConfusionCounts counts(2);
    counts.tp = {4, 0};
    counts.fp = {0, 0};
    counts.fn = {0, 0};
    const IouResult r = iou(counts);
    CHECK(r.per_class(0) == 1.0);
    CHECK(std::isnan(r.per_class(1)));  // empty union is excluded, not scored
    CHECK(r.mean == 1.0);
}

TEST_CASE("absent classes are excluded from the mean") {
    Eigen::VectorXi pred(4), truth(4);
    pred << 0, 0, 1, 1;
    truth << 0, 1, 1, 1;
    // classes 2.. absent from both
    const IouResult r = iou(confusion(pred, truth, 4));
    CHECK(std::isnan(r.per_class(2)));
    CHECK(std::isnan(r.per_class(3)));
    CHECK(r.mean == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("confusion validates its inputs") {
    Eigen::VectorXi a(2), b(3);
    a << 0, 1;
    b << 0, 1, 0;
    CHECK_THROWS_AS(confusion(a, b, 2), std::invalid_argument);
    Eigen::VectorXi bad(2);
    bad << 0, 7;
    CHECK_THROWS_AS(confusion(a, bad, 2), std::invalid_argument);
}

TEST_CASE("argmax breaks ties toward the lowest class index") {
    Eigen::MatrixXd logits(3, 3);
    logits << 1.0, 1.0, 0.0,
              0.0, 2.0, 2.0,
              5.0, 5.0, 5.0;
    const Eigen::VectorXi mask = argmax_mask(logits);
    CHECK(mask(0) == 0);
    CHECK(mask(1) == 1);
    CHECK(mask(2) == 0);
}

TEST_CASE("rounds_to_peak picks the earliest maximum") {
    auto series = [](std::initializer_list<double> ious) {
        std::vector<RoundReport> reports;
        int round = 1;
        for (double v : ious) {
            RoundReport r;
            r.round = round++;
            r.mean_iou = v;
            reports.push_back(r);
        }
        return reports;
    };

    const PeakIou scan = rounds_to_peak(series({0.1, 0.3, 0.2}));
    CHECK(scan.peak_iou == 0.3);
    CHECK(scan.round == 2);

    const PeakIou monotone = rounds_to_peak(series({0.1, 0.2, 0.3, 0.4}));
    CHECK(monotone.round == 4);

    const PeakIou plateau = rounds_to_peak(series({0.1, 0.2, 0.2, 0.2}));
    CHECK(plateau.peak_iou == 0.2);
    CHECK(plateau.round == 2);

    CHECK_THROWS_AS(rounds_to_peak({}), std::invalid_argument);
}
