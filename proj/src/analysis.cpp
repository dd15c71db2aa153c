#include "cotgate/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cotgate/errors.hpp"

namespace cotgate {

OutcomeTally classify_outcomes(const RecordSet& rs, std::span<const GateDecision> decisions) {
    if (decisions.size() != rs.size()) {
        throw InputError("classify_outcomes: one decision per record required");
    }
    OutcomeTally tally;
    for (size_t i = 0; i < rs.size(); ++i) {
        const QueryRecord& rec = rs[i];
        const bool chose_cot = decisions[i].choice == PathChoice::CoT;
        const bool dc = rec.direct.correct;
        const bool cc = rec.cot.correct;
        if (chose_cot) {
            if (dc) {
                ++tally.excess_cot;
                if (!cc) ++tally.excess_cot_degraded;
            } else if (cc) {
                ++tally.cot_fixed;
            } else {
                ++tally.both_fail;
            }
        } else {
            if (dc) {
                ++tally.direct_ok;
            } else if (cc) {
                ++tally.missed_fix;
            } else {
                ++tally.both_fail;
            }
        }
        ++tally.total;
    }
    return tally;
}

double auroc(std::span<const double> scores, const std::vector<bool>& correct) {
    if (scores.size() != correct.size()) throw InputError("auroc: length mismatch");
    const size_t n = scores.size();
    size_t npos = 0;
    for (bool c : correct) npos += c;
    const size_t nneg = n - npos;
    if (npos == 0 || nneg == 0) {
        throw InputError("auroc: undefined for single-class labels");
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Mann-Whitney U via average ranks; tied groups share their mean rank,
    // which is exactly the ties-count-half convention.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k) {
            if (correct[order[k]]) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double u = rank_sum_pos -
                     static_cast<double>(npos) * (static_cast<double>(npos) + 1.0) / 2.0;
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

ReliabilityReport reliability(std::span<const double> scores_normalized,
                              const std::vector<bool>& correct, int nbins) {
    if (scores_normalized.size() != correct.size()) {
        throw InputError("reliability: length mismatch");
    }
    if (scores_normalized.empty()) throw InputError("reliability: no samples");
    if (nbins < 1) throw InputError("reliability: nbins must be >= 1");
    for (double s : scores_normalized) {
        if (!(s >= 0.0 && s <= 1.0)) throw InputError("reliability: score outside [0,1]");
    }

    const size_t n = scores_normalized.size();
    std::vector<long long> count(static_cast<size_t>(nbins), 0);
    std::vector<double> conf_sum(static_cast<size_t>(nbins), 0.0);
    std::vector<long long> correct_sum(static_cast<size_t>(nbins), 0);
    for (size_t i = 0; i < n; ++i) {
        // Equal-width bins, right-inclusive top bin.
        auto b = static_cast<size_t>(scores_normalized[i] * nbins);
        b = std::min(b, static_cast<size_t>(nbins - 1));
        ++count[b];
        conf_sum[b] += scores_normalized[i];
        correct_sum[b] += correct[i];
    }

    ReliabilityReport report;
    report.bins.reserve(static_cast<size_t>(nbins));
    double ece = 0.0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int b = 0; b < nbins; ++b) {
        ReliabilityBin bin;
        bin.lower = static_cast<double>(b) / nbins;
        bin.upper = static_cast<double>(b + 1) / nbins;
        bin.count = count[static_cast<size_t>(b)];
        if (bin.count > 0) {
            const auto c = static_cast<double>(bin.count);
            bin.mean_confidence = conf_sum[static_cast<size_t>(b)] / c;
            bin.empirical_accuracy = static_cast<double>(correct_sum[static_cast<size_t>(b)]) / c;
            ece += c / static_cast<double>(n) *
                   std::abs(bin.mean_confidence - bin.empirical_accuracy);
        } else {
            bin.mean_confidence = nan;
            bin.empirical_accuracy = nan;
        }
        report.bins.push_back(bin);
    }
    report.ece = ece;

    size_t npos = 0;
    for (bool c : correct) npos += c;
    report.auroc = (npos == 0 || npos == n) ? nan : auroc(scores_normalized, correct);
    return report;
}

} // namespace cotgate
