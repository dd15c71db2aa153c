#pragma once

#include <span>
#include <vector>

#include "cotgate/confidence.hpp"
#include "cotgate/record.hpp"

namespace cotgate {

enum class PathChoice {
    Direct,
    CoT,
};

struct GateDecision {
    PathChoice choice = PathChoice::Direct;
    ConfidenceScore score;
    double threshold = 0.0;
};

// Aggregate result of running one policy over a record set.
struct TradeoffPoint {
    double accuracy = 0.0;   // mean chosen-path correctness
    double cot_rate = 0.0;   // fraction of queries routed to CoT
    double avg_tokens = 0.0; // mean generated tokens of the chosen path
    size_t n = 0;

    bool operator==(const TradeoffPoint&) const = default;
};

// Direct iff oriented >= threshold; ties answer directly.
GateDecision decide(const ConfidenceScore& score, double threshold);

// Nearest-rank percentile: sorted ascending, element at index
// ceil(p/100 * n) - 1, clamped to index 0 for p = 0. Gating at this value
// routes at most ceil(p% * n) of the scored set to CoT.
double percentile_threshold(std::span<const double> oriented_scores, double p);
double percentile_of_sorted(std::span<const double> sorted_ascending, double p);

// Flat per-record view used by the evaluation loops: one confidence score
// plus both paths' labels and token counts.
struct ScoredRecord {
    double oriented = 0.0;
    bool direct_correct = false;
    bool cot_correct = false;
    long long direct_tokens = 0;
    long long cot_tokens = 0;
};

// Throws InputError if any record lacks the fields `method` needs.
std::vector<ScoredRecord> scored_view(const RecordSet& rs, ScoreMethod method);

TradeoffPoint evaluate_scored(std::span<const ScoredRecord> view, double threshold);
TradeoffPoint evaluate_policy(const RecordSet& rs, ScoreMethod method, double threshold);

std::vector<GateDecision> decide_all(const RecordSet& rs, ScoreMethod method, double threshold);

// Extra inference passes a method needs beyond the direct answer itself
// (P(True) and verbalised each cost one more request per query). Path token
// accounting in TradeoffPoint never includes these; they are reported
// alongside so both cost readings are available.
int overhead_passes_per_query(ScoreMethod method);

} // namespace cotgate
