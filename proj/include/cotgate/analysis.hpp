#pragma once

#include <span>
#include <vector>

#include "cotgate/gating.hpp"
#include "cotgate/record.hpp"

namespace cotgate {

// Five-way partition of gated queries by the decision taken and both paths'
// correctness. excess_cot_degraded sub-tallies ExcessCoT cases where the CoT
// answer was wrong, which keeps the accuracy identity exact:
//   chosen-path correct = direct_ok + cot_fixed + (excess_cot - excess_cot_degraded).
struct OutcomeTally {
    long long cot_fixed = 0;   // CoT decision, direct wrong, CoT correct
    long long direct_ok = 0;   // Direct decision, direct correct
    long long excess_cot = 0;  // CoT decision although direct was already correct
    long long missed_fix = 0;  // Direct decision, direct wrong, CoT would have fixed it
    long long both_fail = 0;   // wrong whichever way the decision went
    long long total = 0;
    long long excess_cot_degraded = 0;
};

OutcomeTally classify_outcomes(const RecordSet& rs, std::span<const GateDecision> decisions);

struct ReliabilityBin {
    double lower = 0.0;
    double upper = 0.0;
    long long count = 0;
    double mean_confidence = 0.0;    // NaN when the bin is empty
    double empirical_accuracy = 0.0; // NaN when the bin is empty
};

struct ReliabilityReport {
    std::vector<ReliabilityBin> bins; // equal width, partition of [0,1]
    double ece = 0.0;                 // sum over bins of (count/n) * |conf - acc|
    double auroc = 0.0;               // NaN when labels are single-class
};

// Equal-width bins over [0,1]; the top bin is right-inclusive. Scores must be
// normalized confidences in [0,1].
ReliabilityReport reliability(std::span<const double> scores_normalized,
                              const std::vector<bool>& correct, int nbins);

// P(score of a random correct example > score of a random incorrect one),
// ties counted 1/2. Rank-based, O(n log n). Throws InputError when labels are
// single-class (the statistic is undefined there).
double auroc(std::span<const double> scores, const std::vector<bool>& correct);

} // namespace cotgate
