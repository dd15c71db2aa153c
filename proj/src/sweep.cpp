#include "cotgate/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cotgate/errors.hpp"
#include "cotgate/rng.hpp"
#include "cotgate/util.hpp"

namespace cotgate {

std::vector<double> percentile_grid(double step) {
    if (!(step > 0.0 && step <= 100.0)) throw InputError("percentile grid: bad step");
    std::vector<double> grid;
    for (double p = 0.0; p < 100.0; p += step) grid.push_back(p);
    grid.push_back(100.0);
    return grid;
}

std::vector<double> default_percentile_grid() { return percentile_grid(1.0); }

namespace {

void check_grid(std::span<const double> percentiles) {
    if (percentiles.empty()) throw InputError("sweep: empty percentile grid");
    double prev = -1.0;
    for (double p : percentiles) {
        if (!(p >= 0.0 && p <= 100.0)) throw InputError("sweep: percentile outside [0,100]");
        if (!(p > prev)) throw InputError("sweep: percentiles must be strictly increasing");
        prev = p;
    }
}

SweepCurve sweep_scored(std::span<const ScoredRecord> view, ScoreMethod method,
                        std::span<const double> percentiles) {
    std::vector<double> sorted;
    sorted.reserve(view.size());
    for (const ScoredRecord& sr : view) sorted.push_back(sr.oriented);
    std::sort(sorted.begin(), sorted.end());

    SweepCurve curve;
    curve.method = method;
    curve.points.reserve(percentiles.size());
    for (double p : percentiles) {
        SweepPoint sp;
        sp.percentile = p;
        sp.threshold = percentile_of_sorted(sorted, p);
        sp.point = evaluate_scored(view, sp.threshold);
        curve.points.push_back(sp);
    }
    return curve;
}

} // namespace

SweepCurve sweep(const RecordSet& rs, ScoreMethod method, std::span<const double> percentiles) {
    check_grid(percentiles);
    return sweep_scored(scored_view(rs, method), method, percentiles);
}

std::vector<size_t> pareto_front_indices(std::span<const TradeoffPoint> points) {
    if (points.empty()) throw InputError("pareto_front: no points");
    std::vector<size_t> order(points.size());
    std::iota(order.begin(), order.end(), size_t{0});
    // Cheapest first; among equal costs the most accurate first, then the
    // earliest. A point survives iff it beats the best accuracy seen so far,
    // which also collapses exact duplicates onto their first occurrence.
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (points[a].avg_tokens != points[b].avg_tokens) {
            return points[a].avg_tokens < points[b].avg_tokens;
        }
        if (points[a].accuracy != points[b].accuracy) {
            return points[a].accuracy > points[b].accuracy;
        }
        return a < b;
    });
    std::vector<size_t> front;
    double best_acc = -std::numeric_limits<double>::infinity();
    for (size_t idx : order) {
        if (points[idx].accuracy > best_acc) {
            front.push_back(idx);
            best_acc = points[idx].accuracy;
        }
    }
    return front;
}

std::vector<TradeoffPoint> pareto_front(std::span<const TradeoffPoint> points) {
    std::vector<TradeoffPoint> out;
    for (size_t idx : pareto_front_indices(points)) out.push_back(points[idx]);
    return out;
}

SelectedThreshold select_threshold(const SweepCurve& curve, double acc_all_cot, double epsilon) {
    if (curve.points.empty()) throw InputError("select_threshold: empty sweep curve");
    std::vector<TradeoffPoint> pts;
    pts.reserve(curve.points.size());
    for (const SweepPoint& sp : curve.points) pts.push_back(sp.point);

    // The front is sorted by cost with accuracy increasing, so the first
    // point meeting the constraint is the minimal-token one.
    for (size_t idx : pareto_front_indices(pts)) {
        if (pts[idx].accuracy >= acc_all_cot - epsilon) {
            return {curve.points[idx].percentile, curve.points[idx].threshold, pts[idx], true};
        }
    }
    const SweepPoint& full = curve.points.back(); // p=100 under the usual grids
    return {full.percentile, full.threshold, full.point, false};
}

namespace {

struct RepeatOutcome {
    double accuracy = 0.0;
    double cot_rate = 0.0;
    double tokens_saved = 0.0;
    double tau = 0.0;
    double percentile = 100.0;
    bool met = false;
};

} // namespace

ThresholdSelection monte_carlo_calibrate(const RecordSet& rs, ScoreMethod method,
                                         const CalibrationOptions& options) {
    if (options.repeats < 1) throw InputError("calibrate: repeats must be >= 1");
    if (!(options.epsilon >= 0.0 && options.epsilon <= 1.0)) {
        throw InputError("calibrate: epsilon must lie in [0,1]");
    }
    const std::vector<double> grid =
        options.grid.empty() ? default_percentile_grid() : options.grid;
    check_grid(grid);

    const std::vector<ScoredRecord> view = scored_view(rs, method);
    const size_t n = view.size();

    std::vector<RepeatOutcome> outcomes;
    outcomes.reserve(static_cast<size_t>(options.repeats));
    size_t calib_size = 0, test_size = 0;

    for (int rep = 0; rep < options.repeats; ++rep) {
        const uint64_t rep_seed = Rng::derive(options.seed, static_cast<uint64_t>(rep));
        auto [ci, ti] = split_indices(n, options.calib_fraction, rep_seed);
        calib_size = ci.size();
        test_size = ti.size();

        std::vector<ScoredRecord> calib;
        calib.reserve(ci.size());
        for (size_t i : ci) calib.push_back(view[i]);
        std::vector<ScoredRecord> test;
        test.reserve(ti.size());
        for (size_t i : ti) test.push_back(view[i]);

        long long calib_cot_correct = 0;
        for (const ScoredRecord& sr : calib) calib_cot_correct += sr.cot_correct;
        const double calib_acc_all_cot =
            static_cast<double>(calib_cot_correct) / static_cast<double>(calib.size());

        const SweepCurve curve = sweep_scored(calib, method, grid);
        const SelectedThreshold sel = select_threshold(curve, calib_acc_all_cot, options.epsilon);

        // The calibration threshold is applied to the test split as a raw
        // value. When no sweep point met the constraint the repeat falls back
        // to all-CoT outright rather than gating at the p=100 threshold.
        const double tau_applied =
            sel.constraint_met ? sel.threshold : std::numeric_limits<double>::infinity();
        const TradeoffPoint tp = evaluate_scored(test, tau_applied);

        long long test_cot_tokens = 0;
        for (const ScoredRecord& sr : test) test_cot_tokens += sr.cot_tokens;
        const double test_all_cot_tokens =
            static_cast<double>(test_cot_tokens) / static_cast<double>(test.size());

        RepeatOutcome ro;
        ro.accuracy = tp.accuracy;
        ro.cot_rate = tp.cot_rate;
        ro.tokens_saved = test_all_cot_tokens - tp.avg_tokens;
        ro.tau = sel.threshold;
        ro.percentile = sel.constraint_met ? sel.percentile : 100.0;
        ro.met = sel.constraint_met;
        outcomes.push_back(ro);
    }

    std::vector<double> accs, cots, saved, percentiles;
    std::vector<double> taus;
    int fallbacks = 0;
    for (const RepeatOutcome& ro : outcomes) {
        accs.push_back(ro.accuracy);
        cots.push_back(ro.cot_rate);
        saved.push_back(ro.tokens_saved);
        percentiles.push_back(ro.percentile);
        if (ro.met) {
            taus.push_back(ro.tau);
        } else {
            ++fallbacks;
        }
    }

    ThresholdSelection sel;
    sel.epsilon = options.epsilon;
    sel.repeats = options.repeats;
    sel.fallback_count = fallbacks;
    sel.calib_size = calib_size;
    sel.test_size = test_size;
    sel.tau_star =
        taus.empty() ? std::numeric_limits<double>::infinity() : mean_std(taus).mean;
    sel.percentile_star = mean_std(percentiles).mean;
    const MeanStd acc = mean_std(accs);
    sel.acc_mean = acc.mean;
    sel.acc_std = acc.stddev;
    const MeanStd cot = mean_std(cots);
    sel.cot_rate_mean = cot.mean;
    sel.cot_rate_std = cot.stddev;
    const MeanStd sav = mean_std(saved);
    sel.tokens_saved_mean = sav.mean;
    sel.tokens_saved_std = sav.stddev;
    return sel;
}

ThresholdSelection monte_carlo_calibrate(const RecordSet& rs, ScoreMethod method, double epsilon,
                                         double calib_fraction, int repeats, uint64_t seed) {
    CalibrationOptions options;
    options.epsilon = epsilon;
    options.calib_fraction = calib_fraction;
    options.repeats = repeats;
    options.seed = seed;
    return monte_carlo_calibrate(rs, method, options);
}

} // namespace cotgate
