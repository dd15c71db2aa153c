#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cotgate/baselines.hpp"
#include "cotgate/errors.hpp"
#include "cotgate/gating.hpp"
#include "cotgate/rng.hpp"
#include "test_support.hpp"

using namespace cotgate;
using testsupport::make_record;
using testsupport::random_records;

namespace {

ConfidenceScore oriented_score(double v) {
    ConfidenceScore s;
    s.method = ScoreMethod::margin;
    s.raw = v;
    s.oriented = v;
    s.normalized = std::clamp(v, 0.0, 1.0);
    return s;
}

} // namespace

TEST_CASE("decide routes by oriented score with ties answered directly") {
    CHECK(decide(oriented_score(0.99), 0.80).choice == PathChoice::Direct);
    CHECK(decide(oriented_score(0.80), 0.80).choice == PathChoice::Direct);
    CHECK(decide(oriented_score(0.79), 0.80).choice == PathChoice::CoT);

    const GateDecision d = decide(oriented_score(0.3), 0.80);
    CHECK(d.threshold == 0.80);
    CHECK(d.score.oriented == 0.3);
}

TEST_CASE("percentile_threshold follows the nearest-rank rule") {
    const std::vector<double> scores{5, 3, 1, 4, 2}; // unsorted on purpose
    CHECK(percentile_threshold(scores, 40) == 2);    // ceil(2.0)=2 -> index 1
    CHECK(percentile_threshold(scores, 0) == 1);     // minimum
    CHECK(percentile_threshold(scores, 100) == 5);   // maximum
    CHECK(percentile_threshold(scores, 20) == 1);
    CHECK(percentile_threshold(scores, 20.0001) == 2);

    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i);
    CHECK(percentile_threshold(hundred, 90) == 90);

    CHECK(percentile_threshold(std::vector<double>{7.5}, 33) == 7.5);

    CHECK_THROWS_AS(percentile_threshold(std::vector<double>{}, 50), InputError);
    CHECK_THROWS_AS(percentile_threshold(scores, -1), InputError);
    CHECK_THROWS_AS(percentile_threshold(scores, 101), InputError);
}

TEST_CASE("gating at the percentile threshold respects the budget") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 1 + rng.below(200);
        std::vector<double> scores;
        for (size_t i = 0; i < n; ++i) scores.push_back(rng.uniform());
        const double p = rng.uniform(0.0, 100.0);
        const double tau = percentile_threshold(scores, p);
        size_t to_cot = 0;
        for (double s : scores) to_cot += s < tau;
        CHECK(static_cast<double>(to_cot) <=
              std::ceil(p / 100.0 * static_cast<double>(n)));
    }
}

TEST_CASE("percentile p=0 sends nothing to CoT") {
    Rng rng(22);
    std::vector<double> scores;
    for (int i = 0; i < 100; ++i) scores.push_back(rng.uniform());
    const double tau = percentile_threshold(scores, 0);
    for (double s : scores) CHECK(s >= tau);
}

TEST_CASE("evaluate_policy matches hand enumeration on a 5-record toy set") {
    // Scores 0.1..0.9; direct correctness F,T,T,F,T; CoT correctness
    // T,T,F,F,T; tokens 10/100. At tau=0.5 records 1-2 go CoT, 3-5 direct:
    // chosen correctness T,T,T,F,T = 4/5; cot_rate 2/5; tokens
    // (100+100+10+10+10)/5 = 46.
    RecordSet rs;
    rs.provenance = "toy";
    const bool dc[] = {false, true, true, false, true};
    const bool cc[] = {true, true, false, false, true};
    const double conf[] = {0.1, 0.3, 0.5, 0.7, 0.9};
    for (int i = 0; i < 5; ++i) {
        rs.records.push_back(make_record("t" + std::to_string(i), dc[i], cc[i], conf[i]));
    }
    const TradeoffPoint tp = evaluate_policy(rs, ScoreMethod::margin, 0.5);
    CHECK(tp.accuracy == doctest::Approx(0.8));
    CHECK(tp.cot_rate == doctest::Approx(0.4));
    CHECK(tp.avg_tokens == doctest::Approx(46.0));
    CHECK(tp.n == 5);
}

TEST_CASE("degenerate thresholds reproduce the all-direct / all-CoT aggregates") {
    Rng rng(33);
    const RecordSet rs = random_records(rng, 300);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(evaluate_policy(rs, ScoreMethod::margin, -inf) == all_direct_aggregate(rs));
    CHECK(evaluate_policy(rs, ScoreMethod::margin, inf) == all_cot_aggregate(rs));
}

TEST_CASE("cot_rate is non-decreasing in the threshold") {
    Rng rng(44);
    const RecordSet rs = random_records(rng, 400);
    const auto view = scored_view(rs, ScoreMethod::p_true);
    double prev = -1.0;
    for (double tau = 0.0; tau <= 1.0001; tau += 0.05) {
        const double q = evaluate_scored(view, tau).cot_rate;
        CHECK(q >= prev);
        prev = q;
    }
}

TEST_CASE("decisions are invariant under monotone rescaling at equal percentiles") {
    Rng rng(55);
    const RecordSet rs = random_records(rng, 257);
    const auto view = scored_view(rs, ScoreMethod::verbalised);
    std::vector<double> raw, rescaled;
    for (const auto& sr : view) {
        raw.push_back(sr.oriented);
        rescaled.push_back(std::exp(3.0 * sr.oriented) + 1.0); // strictly increasing map
    }
    for (double p : {0.0, 12.5, 40.0, 75.0, 100.0}) {
        const double tau_a = percentile_threshold(raw, p);
        const double tau_b = percentile_threshold(rescaled, p);
        for (size_t i = 0; i < raw.size(); ++i) {
            CHECK((raw[i] >= tau_a) == (rescaled[i] >= tau_b));
        }
    }
}

TEST_CASE("evaluate_policy is deterministic and self-consistent") {
    Rng rng(66);
    const RecordSet rs = random_records(rng, 150);
    const TradeoffPoint a = evaluate_policy(rs, ScoreMethod::margin, 0.42);
    const TradeoffPoint b = evaluate_policy(rs, ScoreMethod::margin, 0.42);
    CHECK(a == b);

    // Replaying decide() over the records reproduces the aggregates.
    const auto decisions = decide_all(rs, ScoreMethod::margin, 0.42);
    long long correct = 0, cot = 0, tokens = 0;
    for (size_t i = 0; i < rs.size(); ++i) {
        if (decisions[i].choice == PathChoice::CoT) {
            ++cot;
            correct += rs[i].cot.correct;
            tokens += rs[i].cot.tokens;
        } else {
            correct += rs[i].direct.correct;
            tokens += rs[i].direct.tokens;
        }
    }
    const auto n = static_cast<double>(rs.size());
    CHECK(a.accuracy == correct / n);
    CHECK(a.cot_rate == cot / n);
    CHECK(a.avg_tokens == tokens / n);
}

TEST_CASE("avg_tokens decomposes into the chosen-subset means") {
    Rng rng(77);
    const RecordSet rs = random_records(rng, 222);
    const auto view = scored_view(rs, ScoreMethod::margin);
    for (double tau : {0.1, 0.4, 0.6, 0.9}) {
        const TradeoffPoint tp = evaluate_scored(view, tau);
        double dsum = 0, csum = 0;
        long long dn = 0, cn = 0;
        for (const auto& sr : view) {
            if (sr.oriented >= tau) {
                dsum += static_cast<double>(sr.direct_tokens);
                ++dn;
            } else {
                csum += static_cast<double>(sr.cot_tokens);
                ++cn;
            }
        }
        const double q = tp.cot_rate;
        const double expected = (dn ? (1.0 - q) * (dsum / static_cast<double>(dn)) : 0.0) +
                                (cn ? q * (csum / static_cast<double>(cn)) : 0.0);
        CHECK(tp.avg_tokens == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("avg_tokens stays between the two path means when CoT is never cheaper") {
    Rng rng(88);
    const RecordSet rs = random_records(rng, 300); // generator keeps cot >= direct per record
    const TradeoffPoint lo = all_direct_aggregate(rs);
    const TradeoffPoint hi = all_cot_aggregate(rs);
    const auto view = scored_view(rs, ScoreMethod::p_true);
    for (double tau = 0.0; tau <= 1.0; tau += 0.1) {
        const TradeoffPoint tp = evaluate_scored(view, tau);
        CHECK(tp.avg_tokens >= lo.avg_tokens - 1e-9);
        CHECK(tp.avg_tokens <= hi.avg_tokens + 1e-9);
    }
}

TEST_CASE("confidence overhead passes per query") {
    CHECK(overhead_passes_per_query(ScoreMethod::perplexity) == 0);
    CHECK(overhead_passes_per_query(ScoreMethod::margin) == 0);
    CHECK(overhead_passes_per_query(ScoreMethod::p_true) == 1);
    CHECK(overhead_passes_per_query(ScoreMethod::verbalised) == 1);
}

TEST_CASE("scored_view fails fast when a record lacks the method's field") {
    Rng rng(99);
    RecordSet rs = random_records(rng, 10);
    rs.records[7].p_true.reset();
    CHECK_THROWS_AS(scored_view(rs, ScoreMethod::p_true), InputError);
    CHECK_NOTHROW(scored_view(rs, ScoreMethod::margin));
}
