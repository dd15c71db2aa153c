#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cotgate/gating.hpp"
#include "cotgate/record.hpp"

namespace cotgate {

// Nearest-rank percentile of the scores seen so far; identical rule to
// percentile_threshold.
double dynamic_threshold(std::span<const double> history, double p);

struct OnlineStep {
    size_t t = 0;            // 1-based position in the stream
    size_t record_index = 0; // index into the original record set
    double threshold = 0.0;  // -inf during warm-up
    double oriented = 0.0;
    PathChoice choice = PathChoice::Direct;
};

struct OnlineRun {
    double target_percentile = 0.0;
    size_t warmup = 0;
    uint64_t order_seed = 0;
    std::vector<OnlineStep> trajectory; // length n; first `warmup` steps are Direct
    TradeoffPoint final_point;          // over all n queries
    TradeoffPoint post_warmup;          // excluding the warm-up queries
};

struct OnlineOptions {
    double percentile = 50.0;
    size_t warmup = 20;
    int runs = 10;
    uint64_t seed = 1;
    bool shuffle = true; // false = keep the stored record order (drift studies)
};

struct OnlineSummary {
    double acc_mean = 0.0, acc_std = 0.0;
    double cot_rate_mean = 0.0, cot_rate_std = 0.0;
    double avg_tokens_mean = 0.0, avg_tokens_std = 0.0;
    // Same statistics restricted to the post-warm-up stream.
    double post_acc_mean = 0.0, post_acc_std = 0.0;
    double post_cot_rate_mean = 0.0, post_cot_rate_std = 0.0;
    double post_avg_tokens_mean = 0.0, post_avg_tokens_std = 0.0;
    std::vector<OnlineRun> runs;
};

// Streaming gating with a dynamic percentile threshold. Each run shuffles the
// stream order with Rng::derive(seed, run), answers the first `warmup`
// queries directly, and thereafter gates each query against the percentile of
// all previously observed scores. A score enters the history only after its
// own decision.
OnlineSummary run_online(const RecordSet& rs, ScoreMethod method, const OnlineOptions& options);

} // namespace cotgate
