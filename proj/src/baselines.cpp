#include "cotgate/baselines.hpp"

#include <algorithm>

#include "cotgate/errors.hpp"

namespace cotgate {

namespace {

TradeoffPoint path_aggregate(const RecordSet& rs, bool use_cot) {
    if (rs.empty()) throw InputError("baseline: record set is empty");
    long long correct = 0, tokens = 0;
    for (const QueryRecord& rec : rs) {
        const PathOutcome& p = use_cot ? rec.cot : rec.direct;
        correct += p.correct;
        tokens += p.tokens;
    }
    const auto n = static_cast<double>(rs.size());
    TradeoffPoint tp;
    tp.accuracy = static_cast<double>(correct) / n;
    tp.cot_rate = use_cot ? 1.0 : 0.0;
    tp.avg_tokens = static_cast<double>(tokens) / n;
    tp.n = rs.size();
    return tp;
}

} // namespace

TradeoffPoint all_direct_aggregate(const RecordSet& rs) { return path_aggregate(rs, false); }

TradeoffPoint all_cot_aggregate(const RecordSet& rs) { return path_aggregate(rs, true); }

TradeoffPoint random_expected(const RecordSet& rs, double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw InputError("random_expected: r must lie in [0,1]");
    const TradeoffPoint d = all_direct_aggregate(rs);
    const TradeoffPoint c = all_cot_aggregate(rs);
    TradeoffPoint tp;
    tp.accuracy = (1.0 - r) * d.accuracy + r * c.accuracy;
    tp.cot_rate = r;
    tp.avg_tokens = (1.0 - r) * d.avg_tokens + r * c.avg_tokens;
    tp.n = rs.size();
    return tp;
}

TradeoffPoint oracle(const RecordSet& rs) {
    if (rs.empty()) throw InputError("oracle: record set is empty");
    long long correct = 0, direct_correct = 0, tokens = 0;
    for (const QueryRecord& rec : rs) {
        if (rec.direct.correct) {
            ++correct;
            ++direct_correct;
            tokens += rec.direct.tokens;
        } else {
            correct += rec.cot.correct;
            tokens += rec.cot.tokens;
        }
    }
    const auto n = static_cast<double>(rs.size());
    TradeoffPoint tp;
    tp.accuracy = static_cast<double>(correct) / n;
    // Expressed through Acc_Direct so the identity cot_rate = 1 - Acc_Direct
    // holds bit-for-bit, not merely up to rounding.
    tp.cot_rate = 1.0 - static_cast<double>(direct_correct) / n;
    tp.avg_tokens = static_cast<double>(tokens) / n;
    tp.n = rs.size();
    return tp;
}

BaselineCurve baseline_curve(const RecordSet& rs, std::span<const double> rs_grid) {
    std::vector<double> grid(rs_grid.begin(), rs_grid.end());
    grid.push_back(0.0);
    grid.push_back(1.0);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    BaselineCurve curve;
    curve.points.reserve(grid.size());
    for (double r : grid) curve.points.emplace_back(r, random_expected(rs, r));
    return curve;
}

} // namespace cotgate
