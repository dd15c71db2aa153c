#pragma once

// Shared builders and brute-force reference implementations for the test
// suites. The reference oracles here are deliberately naive O(n^2) code and
// must stay independent of the library's fast paths.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cotgate/gating.hpp"
#include "cotgate/record.hpp"
#include "cotgate/rng.hpp"

namespace testsupport {

using namespace cotgate;

// One record whose four confidence fields all encode the same confidence
// level `conf` in (0,1): margin = conf, p_true = conf, verbalised = conf,
// perplexity = 1/conf.
inline QueryRecord make_record(std::string id, bool direct_correct, bool cot_correct, double conf,
                               long long direct_tokens = 10, long long cot_tokens = 100) {
    QueryRecord rec;
    rec.id = std::move(id);
    rec.dataset = "test";
    rec.question = "q";
    rec.direct.answer = "A";
    rec.direct.correct = direct_correct;
    rec.direct.tokens = direct_tokens;
    rec.direct.token_logprobs = {std::log(conf)};
    rec.direct.top2 = std::make_pair(0.5 + conf / 2.0, 0.5 - conf / 2.0);
    rec.cot.answer = "B";
    rec.cot.correct = cot_correct;
    rec.cot.tokens = cot_tokens;
    rec.p_true = conf;
    rec.verbalised_prob = conf;
    return rec;
}

// Random record sets with informative (correlated) confidence and per-record
// cot_tokens >= direct_tokens. quantize creates heavy score ties.
inline RecordSet random_records(Rng& rng, size_t n, bool quantize = false) {
    RecordSet rs;
    rs.provenance = "test";
    rs.records.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        double conf = quantize ? (1.0 + static_cast<double>(rng.below(9))) / 10.0
                               : std::clamp(rng.uniform(), 0.01, 0.99);
        const bool dc = rng.bernoulli(0.25 + 0.5 * conf);
        const bool cc = rng.bernoulli(0.75);
        const long long dtok = 5 + static_cast<long long>(rng.below(20));
        const long long ctok = 50 + static_cast<long long>(rng.below(200));
        rs.records.push_back(make_record("r" + std::to_string(i), dc, cc, conf, dtok, ctok));
    }
    return rs;
}

inline double auroc_bruteforce(std::span<const double> scores, const std::vector<bool>& correct) {
    double num = 0.0;
    size_t npos = 0, nneg = 0;
    for (size_t i = 0; i < scores.size(); ++i) (correct[i] ? npos : nneg) += 1;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!correct[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (correct[j]) continue;
            if (scores[i] > scores[j]) {
                num += 1.0;
            } else if (scores[i] == scores[j]) {
                num += 0.5;
            }
        }
    }
    return num / (static_cast<double>(npos) * static_cast<double>(nneg));
}

inline std::vector<TradeoffPoint> pareto_bruteforce(std::span<const TradeoffPoint> pts) {
    std::vector<TradeoffPoint> out;
    for (size_t i = 0; i < pts.size(); ++i) {
        bool excluded = false;
        for (size_t j = 0; j < pts.size() && !excluded; ++j) {
            if (j == i) continue;
            const bool dominates = pts[j].avg_tokens <= pts[i].avg_tokens &&
                                   pts[j].accuracy >= pts[i].accuracy &&
                                   (pts[j].avg_tokens < pts[i].avg_tokens ||
                                    pts[j].accuracy > pts[i].accuracy);
            const bool duplicate_earlier = j < i && pts[j].avg_tokens == pts[i].avg_tokens &&
                                           pts[j].accuracy == pts[i].accuracy;
            excluded = dominates || duplicate_earlier;
        }
        if (!excluded) out.push_back(pts[i]);
    }
    std::sort(out.begin(), out.end(),
              [](const TradeoffPoint& a, const TradeoffPoint& b) {
                  return a.avg_tokens < b.avg_tokens;
              });
    return out;
}

} // namespace testsupport
