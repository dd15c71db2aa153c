#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cotgate/baselines.hpp"
#include "cotgate/errors.hpp"
#include "cotgate/gating.hpp"
#include "cotgate/record.hpp"
#include "cotgate/rng.hpp"
#include "test_support.hpp"

using namespace cotgate;
using testsupport::random_records;

TEST_CASE("random_expected endpoints equal the degenerate aggregates bit-exactly") {
    Rng rng(1);
    const RecordSet rs = random_records(rng, 500);
    CHECK(random_expected(rs, 0.0) == all_direct_aggregate(rs));
    const TradeoffPoint r1 = random_expected(rs, 1.0);
    const TradeoffPoint cot = all_cot_aggregate(rs);
    CHECK(r1.accuracy == cot.accuracy);
    CHECK(r1.avg_tokens == cot.avg_tokens);
    CHECK(r1.cot_rate == 1.0);
}

TEST_CASE("random_expected is affine in r") {
    Rng rng(2);
    const RecordSet rs = random_records(rng, 321);
    const TradeoffPoint d = all_direct_aggregate(rs);
    const TradeoffPoint c = all_cot_aggregate(rs);
    for (int i = 0; i <= 10; ++i) {
        const double r = i / 10.0;
        const TradeoffPoint tp = random_expected(rs, r);
        CHECK(std::abs(tp.accuracy - ((1 - r) * d.accuracy + r * c.accuracy)) <= 1e-12);
        CHECK(std::abs(tp.avg_tokens - ((1 - r) * d.avg_tokens + r * c.avg_tokens)) <= 1e-12);
        CHECK(tp.cot_rate == r);
    }
    // Midpoint equals the mean of the endpoints.
    const TradeoffPoint mid = random_expected(rs, 0.5);
    CHECK(std::abs(mid.accuracy - 0.5 * (d.accuracy + c.accuracy)) <= 1e-12);
}

TEST_CASE("random_expected midpoint of 54.1/79.9 accuracies is 67.0") {
    const RecordSet rs = synthesize(20000, 0.541, 0.799, 0.8, 60, 543, 51);
    const TradeoffPoint d = all_direct_aggregate(rs);
    const TradeoffPoint c = all_cot_aggregate(rs);
    const TradeoffPoint mid = random_expected(rs, 0.5);
    CHECK(mid.accuracy == 0.5 * (d.accuracy + c.accuracy)); // exact convex combination
    CHECK(mid.accuracy == doctest::Approx(0.670).epsilon(0.015));
}

TEST_CASE("random_expected rejects r outside [0,1]") {
    Rng rng(3);
    const RecordSet rs = random_records(rng, 10);
    CHECK_THROWS_AS(random_expected(rs, -0.01), InputError);
    CHECK_THROWS_AS(random_expected(rs, 1.01), InputError);
}

TEST_CASE("oracle cot_rate identity holds exactly on arbitrary sets") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const RecordSet rs = random_records(rng, 50 + rng.below(400));
        const TradeoffPoint o = oracle(rs);
        const TradeoffPoint d = all_direct_aggregate(rs);
        CHECK(o.cot_rate == 1.0 - d.accuracy);
    }
}

TEST_CASE("oracle identity reproduces published direct-accuracy pairings") {
    struct Row {
        double direct_acc;
        double oracle_cot;
    };
    // All-direct accuracy determines oracle CoT usage: 54.1 -> 45.9,
    // 67.8 -> 32.2, 57.8 -> 42.2.
    const Row rows[] = {{0.541, 0.459}, {0.678, 0.322}, {0.578, 0.422}};
    uint64_t seed = 60;
    for (const Row& row : rows) {
        const RecordSet rs = synthesize(10000, row.direct_acc, 0.85, 0.8, 60, 500, seed++);
        const TradeoffPoint o = oracle(rs);
        CHECK(o.cot_rate == 1.0 - all_direct_aggregate(rs).accuracy);
        CHECK(o.cot_rate == doctest::Approx(row.oracle_cot).epsilon(0.03));
    }
}

TEST_CASE("oracle accuracy equals 1 - P(both paths wrong)") {
    Rng rng(5);
    const RecordSet rs = random_records(rng, 500);
    const TradeoffPoint o = oracle(rs);
    long long both_wrong = 0;
    for (const auto& rec : rs) both_wrong += !rec.direct.correct && !rec.cot.correct;
    CHECK(o.accuracy ==
          1.0 - static_cast<double>(both_wrong) / static_cast<double>(rs.size()));
}

TEST_CASE("oracle accuracy dominates every gate policy") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const RecordSet rs = random_records(rng, 200);
        const TradeoffPoint o = oracle(rs);
        for (ScoreMethod m : kAllMethods) {
            const auto view = scored_view(rs, m);
            std::vector<double> oriented;
            for (const auto& sr : view) oriented.push_back(sr.oriented);
            for (double p : {0.0, 25.0, 50.0, 75.0, 100.0}) {
                const double tau = percentile_threshold(oriented, p);
                CHECK(o.accuracy >= evaluate_scored(view, tau).accuracy);
            }
        }
    }
}

TEST_CASE("oracle is perfect when CoT always fixes") {
    RecordSet rs;
    rs.provenance = "fixable";
    for (int i = 0; i < 40; ++i) {
        rs.records.push_back(
            testsupport::make_record("f" + std::to_string(i), i % 3 == 0, true, 0.5));
    }
    CHECK(oracle(rs).accuracy == 1.0);
}

TEST_CASE("oracle spends CoT tokens even on unfixable queries") {
    // The rule is unconditional on CoT correctness, so both-fail records
    // still pay the CoT path.
    RecordSet rs;
    rs.records.push_back(testsupport::make_record("a", false, false, 0.5, 10, 100));
    rs.records.push_back(testsupport::make_record("b", true, true, 0.9, 10, 100));
    const TradeoffPoint o = oracle(rs);
    CHECK(o.cot_rate == 0.5);
    CHECK(o.avg_tokens == doctest::Approx(55.0));
    CHECK(o.accuracy == doctest::Approx(0.5));
}

TEST_CASE("baseline_curve is sorted with both endpoints present") {
    Rng rng(7);
    const RecordSet rs = random_records(rng, 64);
    const std::vector<double> grid{0.7, 0.3, 0.3, 0.5};
    const BaselineCurve curve = baseline_curve(rs, grid);
    REQUIRE(curve.points.size() == 5); // 0, 0.3, 0.5, 0.7, 1
    CHECK(curve.points.front().first == 0.0);
    CHECK(curve.points.back().first == 1.0);
    for (size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].first > curve.points[i - 1].first);
    }
}
