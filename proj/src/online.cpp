#include "cotgate/online.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "cotgate/errors.hpp"
#include "cotgate/rng.hpp"
#include "cotgate/util.hpp"

namespace cotgate {

double dynamic_threshold(std::span<const double> history, double p) {
    return percentile_threshold(history, p);
}

namespace {

struct Tally {
    long long correct = 0, cot = 0, tokens = 0, n = 0;

    void add(const ScoredRecord& sr, bool direct) {
        ++n;
        if (direct) {
            correct += sr.direct_correct;
            tokens += sr.direct_tokens;
        } else {
            ++cot;
            correct += sr.cot_correct;
            tokens += sr.cot_tokens;
        }
    }

    TradeoffPoint point() const {
        TradeoffPoint tp;
        const auto d = static_cast<double>(n);
        tp.accuracy = static_cast<double>(correct) / d;
        tp.cot_rate = static_cast<double>(cot) / d;
        tp.avg_tokens = static_cast<double>(tokens) / d;
        tp.n = static_cast<size_t>(n);
        return tp;
    }
};

} // namespace

OnlineSummary run_online(const RecordSet& rs, ScoreMethod method, const OnlineOptions& options) {
    const size_t n = rs.size();
    if (n == 0) throw InputError("online: record set is empty");
    if (options.warmup >= n) throw InputError("online: warmup must be smaller than the stream");
    if (options.runs < 1) throw InputError("online: runs must be >= 1");
    if (!(options.percentile >= 0.0 && options.percentile <= 100.0)) {
        throw InputError("online: percentile must lie in [0,100]");
    }

    const std::vector<ScoredRecord> view = scored_view(rs, method);
    OnlineSummary summary;
    summary.runs.reserve(static_cast<size_t>(options.runs));

    std::vector<double> acc, cot, tok, pacc, pcot, ptok;
    for (int run = 0; run < options.runs; ++run) {
        const uint64_t run_seed = Rng::derive(options.seed, static_cast<uint64_t>(run));
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        if (options.shuffle) {
            Rng rng(run_seed);
            rng.shuffle(order);
        }

        OnlineRun trace;
        trace.target_percentile = options.percentile;
        trace.warmup = options.warmup;
        trace.order_seed = run_seed;
        trace.trajectory.reserve(n);

        std::vector<double> history; // kept sorted; each score inserted after its own decision
        history.reserve(n);
        Tally overall, post;

        for (size_t t = 1; t <= n; ++t) {
            const ScoredRecord& sr = view[order[t - 1]];
            OnlineStep step;
            step.t = t;
            step.record_index = order[t - 1];
            step.oriented = sr.oriented;
            if (t <= options.warmup) {
                step.threshold = -std::numeric_limits<double>::infinity();
                step.choice = PathChoice::Direct;
            } else {
                step.threshold = percentile_of_sorted(history, options.percentile);
                step.choice =
                    sr.oriented >= step.threshold ? PathChoice::Direct : PathChoice::CoT;
            }
            const bool direct = step.choice == PathChoice::Direct;
            overall.add(sr, direct);
            if (t > options.warmup) post.add(sr, direct);
            history.insert(std::upper_bound(history.begin(), history.end(), sr.oriented),
                           sr.oriented);
            trace.trajectory.push_back(step);
        }

        trace.final_point = overall.point();
        trace.post_warmup = post.point();
        acc.push_back(trace.final_point.accuracy);
        cot.push_back(trace.final_point.cot_rate);
        tok.push_back(trace.final_point.avg_tokens);
        pacc.push_back(trace.post_warmup.accuracy);
        pcot.push_back(trace.post_warmup.cot_rate);
        ptok.push_back(trace.post_warmup.avg_tokens);
        summary.runs.push_back(std::move(trace));
    }

    const auto fill = [](std::span<const double> xs, double& mean, double& sd) {
        const MeanStd ms = mean_std(xs);
        mean = ms.mean;
        sd = ms.stddev;
    };
    fill(acc, summary.acc_mean, summary.acc_std);
    fill(cot, summary.cot_rate_mean, summary.cot_rate_std);
    fill(tok, summary.avg_tokens_mean, summary.avg_tokens_std);
    fill(pacc, summary.post_acc_mean, summary.post_acc_std);
    fill(pcot, summary.post_cot_rate_mean, summary.post_cot_rate_std);
    fill(ptok, summary.post_avg_tokens_mean, summary.post_avg_tokens_std);
    return summary;
}

} // namespace cotgate
