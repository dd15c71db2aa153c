#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cotgate/baselines.hpp"
#include "cotgate/errors.hpp"
#include "cotgate/sweep.hpp"
#include "test_support.hpp"

using namespace cotgate;
using testsupport::make_record;
using testsupport::pareto_bruteforce;
using testsupport::random_records;

namespace {

TradeoffPoint pt(double acc, double tok) {
    TradeoffPoint p;
    p.accuracy = acc;
    p.avg_tokens = tok;
    p.cot_rate = 0.5;
    p.n = 1;
    return p;
}

} // namespace

TEST_CASE("sweep endpoints match the degenerate gates") {
    Rng rng(11);
    const RecordSet rs = random_records(rng, 500);
    const std::vector<double> grid{0.0, 100.0};
    const SweepCurve curve = sweep(rs, ScoreMethod::margin, grid);
    REQUIRE(curve.points.size() == 2);

    // p=0 gates at the minimum score: everything answers directly.
    CHECK(curve.points[0].point == all_direct_aggregate(rs));

    // p=100 gates at the maximum: every score strictly below it goes to CoT,
    // ties at the maximum stay direct.
    const auto view = scored_view(rs, ScoreMethod::margin);
    double max_score = -std::numeric_limits<double>::infinity();
    for (const auto& sr : view) max_score = std::max(max_score, sr.oriented);
    long long correct = 0, cot = 0, tokens = 0;
    for (size_t i = 0; i < view.size(); ++i) {
        if (view[i].oriented >= max_score) {
            correct += rs[i].direct.correct;
            tokens += rs[i].direct.tokens;
        } else {
            ++cot;
            correct += rs[i].cot.correct;
            tokens += rs[i].cot.tokens;
        }
    }
    const auto n = static_cast<double>(rs.size());
    CHECK(curve.points[1].point.accuracy == correct / n);
    CHECK(curve.points[1].point.cot_rate == cot / n);
    CHECK(curve.points[1].point.avg_tokens == tokens / n);
}

TEST_CASE("default five-step grid has 21 points with a non-decreasing budget") {
    Rng rng(12);
    const RecordSet rs = random_records(rng, 300);
    const std::vector<double> grid = percentile_grid(5.0);
    REQUIRE(grid.size() == 21);
    const SweepCurve curve = sweep(rs, ScoreMethod::p_true, grid);
    double prev = -1.0;
    for (const SweepPoint& sp : curve.points) {
        CHECK(sp.point.cot_rate >= prev);
        prev = sp.point.cot_rate;
    }
}

TEST_CASE("sweep validates its grid") {
    Rng rng(13);
    const RecordSet rs = random_records(rng, 20);
    CHECK_THROWS_AS(sweep(rs, ScoreMethod::margin, std::vector<double>{}), InputError);
    CHECK_THROWS_AS(sweep(rs, ScoreMethod::margin, std::vector<double>{10, 10}), InputError);
    CHECK_THROWS_AS(sweep(rs, ScoreMethod::margin, std::vector<double>{50, 40}), InputError);
    CHECK_THROWS_AS(sweep(rs, ScoreMethod::margin, std::vector<double>{-1, 50}), InputError);
}

TEST_CASE("an informative signal dominates the random baseline at interior budgets") {
    const RecordSet rs = synthesize(5000, 0.55, 0.82, 0.9, 50, 400, 17);
    const SweepCurve curve = sweep(rs, ScoreMethod::margin, percentile_grid(5.0));
    int strictly_better = 0;
    for (const SweepPoint& sp : curve.points) {
        if (sp.point.cot_rate < 0.05 || sp.point.cot_rate > 0.95) continue;
        const TradeoffPoint rnd = random_expected(rs, sp.point.cot_rate);
        CHECK(sp.point.accuracy >= rnd.accuracy - 1e-12);
        strictly_better += sp.point.accuracy > rnd.accuracy;
    }
    CHECK(strictly_better >= 10);
}

TEST_CASE("pareto_front drops dominated and duplicate points") {
    const std::vector<TradeoffPoint> two{pt(0.8, 100.0), pt(0.7, 120.0)};
    const auto front = pareto_front(two);
    REQUIRE(front.size() == 1);
    CHECK(front[0] == two[0]);

    const std::vector<TradeoffPoint> one{pt(0.5, 10.0)};
    CHECK(pareto_front(one) == one);

    // Equal-cost points keep only the most accurate; exact duplicates keep
    // their first occurrence.
    const std::vector<TradeoffPoint> ties{pt(0.6, 50.0), pt(0.9, 50.0), pt(0.9, 50.0),
                                          pt(0.95, 80.0)};
    const auto tf = pareto_front(ties);
    REQUIRE(tf.size() == 2);
    CHECK(tf[0].accuracy == 0.9);
    CHECK(tf[1].accuracy == 0.95);

    CHECK_THROWS_AS(pareto_front(std::vector<TradeoffPoint>{}), InputError);
}

TEST_CASE("pareto_front is strictly increasing in both axes along the front") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<TradeoffPoint> pts;
        const size_t n = 2 + rng.below(100);
        for (size_t i = 0; i < n; ++i) {
            pts.push_back(pt(rng.uniform(), std::floor(rng.uniform(0, 200))));
        }
        const auto front = pareto_front(pts);
        for (size_t i = 1; i < front.size(); ++i) {
            CHECK(front[i].avg_tokens > front[i - 1].avg_tokens);
            CHECK(front[i].accuracy > front[i - 1].accuracy);
        }
    }
}

TEST_CASE("pareto_front matches the pairwise brute force on mixed point clouds") {
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TradeoffPoint> pts;
        const size_t n = 1 + rng.below(300);
        const bool quantize = trial % 2 == 0; // every other trial forces ties
        for (size_t i = 0; i < n; ++i) {
            const double acc = quantize ? static_cast<double>(rng.below(10)) / 10.0
                                        : rng.uniform();
            const double tok =
                quantize ? static_cast<double>(rng.below(8)) * 25.0 : rng.uniform(0, 200);
            pts.push_back(pt(acc, tok));
        }
        CHECK(pareto_front(pts) == pareto_bruteforce(pts));
    }
}

TEST_CASE("select_threshold picks the cheapest point meeting the constraint") {
    const RecordSet rs = synthesize(4000, 0.55, 0.8, 0.9, 50, 400, 19);
    const SweepCurve curve = sweep(rs, ScoreMethod::margin, default_percentile_grid());
    const double acc_all_cot = all_cot_aggregate(rs).accuracy;

    const SelectedThreshold sel = select_threshold(curve, acc_all_cot, 0.01);
    CHECK(sel.constraint_met);
    CHECK(sel.point.accuracy >= acc_all_cot - 0.01);
    // No other qualifying sweep point is cheaper.
    for (const SweepPoint& sp : curve.points) {
        if (sp.point.accuracy >= acc_all_cot - 0.01) {
            CHECK(sel.point.avg_tokens <= sp.point.avg_tokens);
        }
    }
    // The selection lies on the Pareto front of the curve.
    std::vector<TradeoffPoint> pts;
    for (const auto& sp : curve.points) pts.push_back(sp.point);
    const auto front = pareto_front(pts);
    CHECK(std::find(front.begin(), front.end(), sel.point) != front.end());
}

TEST_CASE("select_threshold with a vacuous constraint returns the cheapest front point") {
    const RecordSet rs = synthesize(2000, 0.55, 0.8, 0.9, 50, 400, 23);
    const SweepCurve curve = sweep(rs, ScoreMethod::margin, default_percentile_grid());
    const SelectedThreshold sel = select_threshold(curve, all_cot_aggregate(rs).accuracy, 1.0);
    CHECK(sel.constraint_met);
    CHECK(sel.point == all_direct_aggregate(rs)); // epsilon=100%: all-direct endpoint
    CHECK(sel.percentile == 0.0);
}

TEST_CASE("select_threshold falls back to the full-budget endpoint when unmet") {
    // Every direct answer wrong, every CoT right: gating at p=100 still keeps
    // the top score direct, so no sweep point reaches all-CoT accuracy.
    RecordSet rs;
    for (int i = 0; i < 10; ++i) {
        rs.records.push_back(
            make_record("u" + std::to_string(i), false, true, 0.05 + 0.09 * i));
    }
    const SweepCurve curve = sweep(rs, ScoreMethod::margin, default_percentile_grid());
    const SelectedThreshold sel = select_threshold(curve, 1.0, 0.005);
    CHECK(!sel.constraint_met);
    CHECK(sel.percentile == 100.0);
}

TEST_CASE("monte_carlo_calibrate with one repeat has zero stds") {
    const RecordSet rs = synthesize(1000, 0.55, 0.8, 0.85, 50, 400, 29);
    const ThresholdSelection sel = monte_carlo_calibrate(rs, ScoreMethod::margin, 0.01, 0.1, 1, 9);
    CHECK(sel.repeats == 1);
    CHECK(sel.acc_std == 0.0);
    CHECK(sel.cot_rate_std == 0.0);
    CHECK(sel.tokens_saved_std == 0.0);
}

TEST_CASE("monte_carlo_calibrate is bit-reproducible per seed") {
    const RecordSet rs = synthesize(1500, 0.55, 0.8, 0.85, 50, 400, 31);
    const auto a = monte_carlo_calibrate(rs, ScoreMethod::p_true, 0.01, 0.1, 25, 12345);
    const auto b = monte_carlo_calibrate(rs, ScoreMethod::p_true, 0.01, 0.1, 25, 12345);
    CHECK(a.acc_mean == b.acc_mean);
    CHECK(a.acc_std == b.acc_std);
    CHECK(a.cot_rate_mean == b.cot_rate_mean);
    CHECK(a.tokens_saved_mean == b.tokens_saved_mean);
    CHECK(a.tau_star == b.tau_star);
    CHECK(a.percentile_star == b.percentile_star);

    const auto c = monte_carlo_calibrate(rs, ScoreMethod::p_true, 0.01, 0.1, 25, 54321);
    CHECK(a.acc_mean != c.acc_mean);
}

TEST_CASE("calibration keeps accuracy within the binomial allowance across seeds") {
    // 10:1 token-cost ratio, informative signal: mean test accuracy must stay
    // above all-CoT minus epsilon minus twice the test-split binomial std,
    // with positive token savings.
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        const RecordSet rs = synthesize(2000, 0.55, 0.80, 0.85, 40, 400, 1000 + seed);
        const double acc_all_cot = all_cot_aggregate(rs).accuracy;
        const ThresholdSelection sel =
            monte_carlo_calibrate(rs, ScoreMethod::margin, 0.01, 0.1, 20, seed);
        const double sigma = std::sqrt(acc_all_cot * (1.0 - acc_all_cot) /
                                       static_cast<double>(sel.test_size));
        CHECK(sel.acc_mean >= acc_all_cot - 0.01 - 2.0 * sigma);
        CHECK(sel.tokens_saved_mean > 0.0);
    }
}

TEST_CASE("tokens_saved is recomputable from the raw splits") {
    const RecordSet rs = synthesize(800, 0.55, 0.8, 0.85, 50, 400, 37);
    CalibrationOptions opt;
    opt.repeats = 1;
    opt.seed = 4;
    opt.calib_fraction = 0.25;
    const ThresholdSelection sel = monte_carlo_calibrate(rs, ScoreMethod::margin, opt);

    const uint64_t rep_seed = Rng::derive(opt.seed, 0);
    const auto [calib, test] = split(rs, opt.calib_fraction, rep_seed);
    const SweepCurve curve = sweep(calib, ScoreMethod::margin, default_percentile_grid());
    const SelectedThreshold st =
        select_threshold(curve, all_cot_aggregate(calib).accuracy, opt.epsilon);
    REQUIRE(st.constraint_met);
    const TradeoffPoint tp = evaluate_policy(test, ScoreMethod::margin, st.threshold);
    CHECK(sel.acc_mean == tp.accuracy);
    CHECK(sel.cot_rate_mean == tp.cot_rate);
    CHECK(sel.tokens_saved_mean ==
          doctest::Approx(all_cot_aggregate(test).avg_tokens - tp.avg_tokens).epsilon(1e-12));
}

TEST_CASE("all-fallback calibration reports the fallback count and all-CoT behavior") {
    RecordSet rs;
    for (int i = 0; i < 60; ++i) {
        rs.records.push_back(
            make_record("u" + std::to_string(i), false, true, 0.01 + 0.016 * i));
    }
    const ThresholdSelection sel =
        monte_carlo_calibrate(rs, ScoreMethod::margin, 0.001, 0.2, 10, 3);
    CHECK(sel.fallback_count == 10);
    CHECK(sel.acc_mean == 1.0);     // true all-CoT on the test side
    CHECK(sel.cot_rate_mean == 1.0);
    CHECK(sel.tokens_saved_mean == 0.0);
    CHECK(std::isinf(sel.tau_star));
}
