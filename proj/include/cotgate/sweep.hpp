#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cotgate/gating.hpp"
#include "cotgate/record.hpp"

namespace cotgate {

struct SweepPoint {
    double percentile = 0.0;
    double threshold = 0.0;
    TradeoffPoint point;
};

struct SweepCurve {
    ScoreMethod method = ScoreMethod::perplexity;
    std::vector<SweepPoint> points; // percentiles strictly increasing
};

// 0, 1, ..., 100.
std::vector<double> default_percentile_grid();
// 0, step, 2*step, ..., 100
std::vector<double> percentile_grid(double step);

// One TradeoffPoint per percentile; the budget (cot_rate) is non-decreasing
// along the curve.
SweepCurve sweep(const RecordSet& rs, ScoreMethod method, std::span<const double> percentiles);

// Non-dominated subset under (minimise avg_tokens, maximise accuracy), sorted
// by avg_tokens ascending; accuracy is strictly increasing along the front.
// Exact (avg_tokens, accuracy) duplicates keep their first occurrence only.
std::vector<TradeoffPoint> pareto_front(std::span<const TradeoffPoint> points);
std::vector<size_t> pareto_front_indices(std::span<const TradeoffPoint> points);

struct SelectedThreshold {
    double percentile = 100.0;
    double threshold = 0.0;
    TradeoffPoint point;
    bool constraint_met = false;
};

// Minimal-token Pareto point with accuracy >= acc_all_cot - epsilon. When no
// point qualifies, returns the curve's full-budget endpoint flagged
// constraint_met = false.
SelectedThreshold select_threshold(const SweepCurve& curve, double acc_all_cot, double epsilon);

struct CalibrationOptions {
    double epsilon = 0.01;
    double calib_fraction = 0.10;
    int repeats = 100;
    uint64_t seed = 1;
    std::vector<double> grid; // empty = default 1-percentile steps
};

// Monte Carlo cross-validated threshold selection. Means and standard
// deviations (population) are over repeats; repeat i always uses the seed
// stream Rng::derive(seed, i), so results are reproducible bit-for-bit.
struct ThresholdSelection {
    double tau_star = 0.0;         // mean raw threshold over constraint-met repeats
    double percentile_star = 0.0;  // mean selected percentile (fallbacks count as 100)
    double epsilon = 0.0;
    double acc_mean = 0.0, acc_std = 0.0;
    double cot_rate_mean = 0.0, cot_rate_std = 0.0;
    double tokens_saved_mean = 0.0, tokens_saved_std = 0.0; // vs all-CoT on the test split
    int repeats = 0;
    int fallback_count = 0; // repeats where no sweep point met the constraint
    size_t calib_size = 0, test_size = 0;
};

ThresholdSelection monte_carlo_calibrate(const RecordSet& rs, ScoreMethod method,
                                         const CalibrationOptions& options);
ThresholdSelection monte_carlo_calibrate(const RecordSet& rs, ScoreMethod method, double epsilon,
                                         double calib_fraction, int repeats, uint64_t seed);

} // namespace cotgate
