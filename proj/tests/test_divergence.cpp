#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "feddwa/divergence.hpp"
#include "feddwa/param_ops.hpp"
#include "feddwa/rng.hpp"

using namespace feddwa;

namespace {

Eigen::MatrixXd random_logits(int pixels, int k, std::uint64_t seed,
                              double scale = 2.0) {
    RngStream rng(rng_key(seed, 0xd1));
    Eigen::MatrixXd z(pixels, k);
    for (Eigen::Index p = 0; p < z.rows(); ++p) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) z(p, c) = scale * rng.normal();
    }
    return z;
}

// High-precision direct summation in extended precision, no clamping, no
// vectorized shortcuts.
long double naive_kld(const LogProbGrid& pg, const LogProbGrid& pl,
                      KldReduction reduction) {
    long double total = 0.0L;
    for (Eigen::Index p = 0; p < pg.values.rows(); ++p) {
        for (Eigen::Index c = 0; c < pg.values.cols(); ++c) {
            const long double g = pg.values(p, c);
            long double l = pl.values(p, c);
            if (l < static_cast<long double>(kLogProbFloor)) {
                l = static_cast<long double>(kLogProbFloor);
            }
            total += expl(g) * (g - l);
        }
    }
    if (reduction == KldReduction::Mean && pg.values.rows() > 0) {
        total /= static_cast<long double>(pg.values.rows());
    }
    return total;
}

}  // namespace

TEST_CASE("log_softmax rows are normalized log probabilities") {
    const Eigen::MatrixXd z = random_logits(10, 5, 1);
    const LogProbGrid lp = log_softmax(z);
    for (Eigen::Index p = 0; p < lp.pixels(); ++p) {
        CHECK(lp.values.row(p).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(lp.values.row(p).maxCoeff() <= 0.0);
    }
}

TEST_CASE("log_softmax is shift invariant") {
    const Eigen::MatrixXd z = random_logits(6, 4, 2);
    const LogProbGrid a = log_softmax(z);
    const LogProbGrid b = log_softmax((z.array() + 123.25).matrix());
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log_softmax of [ln 1, ln 3] gives [ln 1/4, ln 3/4]") {
    Eigen::MatrixXd z(1, 2);
    z << 0.0, std::log(3.0);
    const LogProbGrid lp = log_softmax(z);
    CHECK(lp.values(0, 0) == doctest::Approx(std::log(0.25)).epsilon(1e-14));
    CHECK(lp.values(0, 1) == doctest::Approx(std::log(0.75)).epsilon(1e-14));
}

TEST_CASE("log_softmax reports non-finite logits as a numeric failure") {
    Eigen::MatrixXd z(1, 2);
    z << 0.0, std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(log_softmax(z), NumericError);
}

TEST_CASE("hand example: (0.5,0.5) vs (0.25,0.75)") {
    // 0.5*ln(0.5/0.25) + 0.5*ln(0.5/0.75) = 0.5*ln(4/3)
    LogProbGrid pg, pl;
    pg.values.resize(1, 2);
    pl.values.resize(1, 2);
    pg.values << std::log(0.5), std::log(0.5);
    pl.values << std::log(0.25), std::log(0.75);
    const double expected = 0.14384103622589045;
    CHECK(kld(pg, pl, KldReduction::Mean) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(kld(pg, pl, KldReduction::Sum) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kld matches the extended-precision oracle") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const LogProbGrid pg = log_softmax(random_logits(12, 4, 100 + seed));
        const LogProbGrid pl = log_softmax(random_logits(12, 4, 200 + seed));
        for (KldReduction red : {KldReduction::Mean, KldReduction::Sum}) {
            const double fast = kld(pg, pl, red);
            const double slow = static_cast<double>(naive_kld(pg, pl, red));
            CHECK(std::abs(fast - slow) < 1e-12);
        }
    }
}

TEST_CASE("kld is non-negative on random grid pairs") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const LogProbGrid pg = log_softmax(random_logits(8, 3, 1000 + seed));
        const LogProbGrid pl = log_softmax(random_logits(8, 3, 3000 + seed));
        CHECK(kld(pg, pl, KldReduction::Mean) >= -1e-12);
    }
}

TEST_CASE("kld of a grid against itself is exactly zero") {
    const LogProbGrid p = log_softmax(random_logits(10, 4, 77));
    CHECK(kld(p, p, KldReduction::Mean) == 0.0);
    CHECK(kld(p, p, KldReduction::Sum) == 0.0);
}

TEST_CASE("sum reduction equals mean times pixel count") {
    const LogProbGrid pg = log_softmax(random_logits(9, 3, 5));
    const LogProbGrid pl = log_softmax(random_logits(9, 3, 6));
    CHECK(kld(pg, pl, KldReduction::Sum) ==
          doctest::Approx(9.0 * kld(pg, pl, KldReduction::Mean)).epsilon(1e-13));
}

TEST_CASE("vanishing local probabilities stay finite through the floor") {
    LogProbGrid pg, pl;
    pg.values.resize(1, 2);
    pl.values.resize(1, 2);
    pg.values << std::log(0.5), std::log(0.5);
    pl.values << 0.0, -1e30;  // local model assigns ~zero mass to class 1
    const double v = kld(pg, pl, KldReduction::Mean);
    CHECK(std::isfinite(v));
    // contribution bounded by 0.5 * (log 0.5 - floor)
    CHECK(v <= 0.5 * (std::log(0.5) - kLogProbFloor) + 1.0);
    CHECK(v > 0.0);
}

TEST_CASE("kld rejects shape mismatch") {
    const LogProbGrid a = log_softmax(random_logits(3, 2, 1));
    const LogProbGrid b = log_softmax(random_logits(3, 3, 1));
    CHECK_THROWS_AS(kld(a, b, KldReduction::Mean), std::invalid_argument);
}

TEST_CASE("accumulate_kld sums per-sample divergences") {
    std::vector<LogProbGrid> gs, ls;
    double expected = 0.0;
    for (std::uint64_t i = 0; i < 4; ++i) {
        gs.push_back(log_softmax(random_logits(5, 3, 40 + i)));
        ls.push_back(log_softmax(random_logits(5, 3, 50 + i)));
        expected += kld(gs.back(), ls.back(), KldReduction::Mean);
    }
    CHECK(accumulate_kld(gs, ls, KldReduction::Mean) ==
          doctest::Approx(expected).epsilon(1e-14));
    ls.pop_back();
    CHECK_THROWS_AS(accumulate_kld(gs, ls, KldReduction::Mean),
                    std::invalid_argument);
}
