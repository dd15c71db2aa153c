#pragma once

#include <span>
#include <vector>

#include "cotgate/gating.hpp"
#include "cotgate/record.hpp"

namespace cotgate {

// Degenerate-gate aggregates: every query answered by one path.
TradeoffPoint all_direct_aggregate(const RecordSet& rs);
TradeoffPoint all_cot_aggregate(const RecordSet& rs);

// Expected performance of gating a uniformly random fraction r to CoT,
// computed analytically as the convex combination of the two degenerate
// aggregates. cot_rate of the result is exactly r.
TradeoffPoint random_expected(const RecordSet& rs, double r);

// Upper bound: CoT exactly when the direct answer is incorrect, regardless of
// whether CoT then succeeds. cot_rate is therefore 1 - Acc_Direct.
TradeoffPoint oracle(const RecordSet& rs);

struct BaselineCurve {
    std::vector<std::pair<double, TradeoffPoint>> points; // sorted by r; 0 and 1 included
};

// Evaluates random_expected over `rs_grid` (deduplicated, sorted, with the
// endpoints 0 and 1 added if missing).
BaselineCurve baseline_curve(const RecordSet& rs, std::span<const double> rs_grid);

} // namespace cotgate
