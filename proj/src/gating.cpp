#include "cotgate/gating.hpp"

#include <algorithm>
#include <cmath>

#include "cotgate/errors.hpp"

namespace cotgate {

GateDecision decide(const ConfidenceScore& score, double threshold) {
    GateDecision d;
    d.score = score;
    d.threshold = threshold;
    d.choice = score.oriented >= threshold ? PathChoice::Direct : PathChoice::CoT;
    return d;
}

double percentile_of_sorted(std::span<const double> sorted_ascending, double p) {
    if (sorted_ascending.empty()) throw InputError("percentile: empty score sequence");
    if (!(p >= 0.0 && p <= 100.0)) throw InputError("percentile: p must lie in [0,100]");
    const auto n = static_cast<double>(sorted_ascending.size());
    // Nearest rank, with a tiny snap so decimal percentiles whose exact
    // product is an integer do not round up spuriously.
    const double r = p * n / 100.0;
    auto rank = static_cast<size_t>(std::ceil(r - 1e-9));
    rank = std::clamp<size_t>(rank, 1, sorted_ascending.size());
    return sorted_ascending[rank - 1];
}

double percentile_threshold(std::span<const double> oriented_scores, double p) {
    std::vector<double> sorted(oriented_scores.begin(), oriented_scores.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_of_sorted(sorted, p);
}

std::vector<ScoredRecord> scored_view(const RecordSet& rs, ScoreMethod method) {
    if (rs.empty()) throw InputError("evaluate: record set is empty");
    std::vector<ScoredRecord> view;
    view.reserve(rs.size());
    for (const QueryRecord& rec : rs) {
        ScoredRecord sr;
        sr.oriented = score(rec, method).oriented; // throws if the method is unavailable
        sr.direct_correct = rec.direct.correct;
        sr.cot_correct = rec.cot.correct;
        sr.direct_tokens = rec.direct.tokens;
        sr.cot_tokens = rec.cot.tokens;
        view.push_back(sr);
    }
    return view;
}

TradeoffPoint evaluate_scored(std::span<const ScoredRecord> view, double threshold) {
    if (view.empty()) throw InputError("evaluate: record set is empty");
    long long correct = 0, cot = 0, tokens = 0;
    for (const ScoredRecord& sr : view) {
        const bool direct = sr.oriented >= threshold;
        if (direct) {
            correct += sr.direct_correct;
            tokens += sr.direct_tokens;
        } else {
            ++cot;
            correct += sr.cot_correct;
            tokens += sr.cot_tokens;
        }
    }
    const auto n = static_cast<double>(view.size());
    TradeoffPoint tp;
    tp.accuracy = static_cast<double>(correct) / n;
    tp.cot_rate = static_cast<double>(cot) / n;
    tp.avg_tokens = static_cast<double>(tokens) / n;
    tp.n = view.size();
    return tp;
}

TradeoffPoint evaluate_policy(const RecordSet& rs, ScoreMethod method, double threshold) {
    return evaluate_scored(scored_view(rs, method), threshold);
}

std::vector<GateDecision> decide_all(const RecordSet& rs, ScoreMethod method, double threshold) {
    std::vector<GateDecision> out;
    out.reserve(rs.size());
    for (const QueryRecord& rec : rs) out.push_back(decide(score(rec, method), threshold));
    return out;
}

int overhead_passes_per_query(ScoreMethod method) {
    switch (method) {
        case ScoreMethod::p_true:
        case ScoreMethod::verbalised:
            return 1;
        case ScoreMethod::perplexity:
        case ScoreMethod::margin:
            return 0;
    }
    return 0;
}

} // namespace cotgate
