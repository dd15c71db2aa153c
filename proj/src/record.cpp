#include "cotgate/record.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "cotgate/errors.hpp"
#include "cotgate/rng.hpp"

namespace cotgate {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
    throw InputError(where + ": " + msg);
}

const json& require_field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) fail(where, std::string("missing field '") + key + "'");
    return *it;
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
    const json& v = require_field(obj, key, where);
    if (!v.is_string()) fail(where, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

double get_number(const json& v, const char* key, const std::string& where) {
    if (!v.is_number()) fail(where, std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

PathOutcome parse_path(const json& obj, const char* key, bool expect_logprobs,
                       const std::string& where) {
    const json& p = require_field(obj, key, where);
    if (!p.is_object()) fail(where, std::string("field '") + key + "' must be an object");
    const std::string prefix = std::string(key) + ".";

    PathOutcome out;
    out.answer = get_string(p, "answer", where);
    const json& corr = require_field(p, "correct", where);
    if (!corr.is_boolean()) fail(where, "field '" + prefix + "correct' must be a boolean");
    out.correct = corr.get<bool>();
    const json& tok = require_field(p, "tokens", where);
    if (!tok.is_number_integer() || tok.get<long long>() < 0) {
        fail(where, "field '" + prefix + "tokens' must be a non-negative integer");
    }
    out.tokens = tok.get<long long>();

    if (auto it = p.find("token_logprobs"); it != p.end() && !it->is_null()) {
        if (!it->is_array()) fail(where, "field '" + prefix + "token_logprobs' must be an array");
        out.token_logprobs.reserve(it->size());
        for (const json& lp : *it) {
            out.token_logprobs.push_back(get_number(lp, "token_logprobs[]", where));
        }
    }
    if (auto it = p.find("top2"); it != p.end() && !it->is_null()) {
        if (!it->is_array() || it->size() != 2) {
            fail(where, "field '" + prefix + "top2' must be an array of two probabilities");
        }
        out.top2 = std::make_pair(get_number((*it)[0], "top2[0]", where),
                                  get_number((*it)[1], "top2[1]", where));
    }
    (void)expect_logprobs;
    return out;
}

std::optional<double> parse_optional_prob(const json& obj, const char* key,
                                          const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return get_number(*it, key, where);
}

void validate_path(const PathOutcome& p, const char* key, const std::string& where) {
    const std::string prefix = std::string(key) + ".";
    if (!p.answer.empty() && p.tokens < 1) {
        fail(where, "field '" + prefix + "tokens' must be >= 1 when the answer is non-empty");
    }
    for (double lp : p.token_logprobs) {
        if (!(lp <= 0.0)) {
            fail(where, "field '" + prefix + "token_logprobs' has a positive log-probability");
        }
    }
    if (p.top2) {
        const auto [p1, p2] = *p.top2;
        if (!(p1 >= 0.0 && p2 >= 0.0 && p1 <= 1.0 && p2 <= 1.0)) {
            fail(where, "field '" + prefix + "top2' probabilities must lie in [0,1]");
        }
        if (p1 < p2) fail(where, "field '" + prefix + "top2' must be ordered p1 >= p2");
        if (p1 + p2 > 1.0) fail(where, "field '" + prefix + "top2' must satisfy p1 + p2 <= 1");
    }
}

} // namespace

void validate_record(const QueryRecord& rec, const std::string& where) {
    if (rec.id.empty()) fail(where, "field 'id' must be non-empty");
    validate_path(rec.direct, "direct", where);
    validate_path(rec.cot, "cot", where);
    if (rec.p_true && !(*rec.p_true >= 0.0 && *rec.p_true <= 1.0)) {
        fail(where, "field 'p_true' must lie in [0,1]");
    }
    if (rec.verbalised_prob && !(*rec.verbalised_prob >= 0.0 && *rec.verbalised_prob <= 1.0)) {
        fail(where, "field 'verbalised_prob' must lie in [0,1]");
    }
}

QueryRecord record_from_json_line(const std::string& line, const std::string& where) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        fail(where, std::string("malformed record: ") + e.what());
    }
    if (!obj.is_object()) fail(where, "record must be a JSON object");

    QueryRecord rec;
    rec.id = get_string(obj, "id", where);
    rec.dataset = get_string(obj, "dataset", where);
    rec.question = get_string(obj, "question", where);
    rec.direct = parse_path(obj, "direct", true, where);
    rec.cot = parse_path(obj, "cot", false, where);
    rec.p_true = parse_optional_prob(obj, "p_true", where);
    rec.verbalised_prob = parse_optional_prob(obj, "verbalised_prob", where);
    validate_record(rec, where);
    return rec;
}

RecordSet parse_records(std::istream& in, const std::string& provenance) {
    RecordSet rs;
    rs.provenance = provenance;
    std::unordered_set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const std::string where = provenance + ":" + std::to_string(lineno);
        QueryRecord rec = record_from_json_line(line, where);
        if (!seen.insert(rec.id).second) fail(where, "duplicate id '" + rec.id + "'");
        rs.records.push_back(std::move(rec));
    }
    return rs;
}

RecordSet ingest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open record file");
    return parse_records(in, path);
}

namespace {

json path_to_json(const PathOutcome& p) {
    json out;
    out["answer"] = p.answer;
    out["correct"] = p.correct;
    out["tokens"] = p.tokens;
    if (!p.token_logprobs.empty()) out["token_logprobs"] = p.token_logprobs;
    if (p.top2) out["top2"] = {p.top2->first, p.top2->second};
    return out;
}

} // namespace

std::string to_json_line(const QueryRecord& rec) {
    json out;
    out["id"] = rec.id;
    out["dataset"] = rec.dataset;
    out["question"] = rec.question;
    out["direct"] = path_to_json(rec.direct);
    out["cot"] = path_to_json(rec.cot);
    if (rec.p_true) out["p_true"] = *rec.p_true;
    if (rec.verbalised_prob) out["verbalised_prob"] = *rec.verbalised_prob;
    return out.dump();
}

void write_records(const RecordSet& rs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError(path + ": cannot open for writing");
    for (const QueryRecord& rec : rs.records) out << to_json_line(rec) << '\n';
    if (!out) throw InputError(path + ": write failed");
}

std::pair<std::vector<size_t>, std::vector<size_t>> split_indices(size_t n, double fraction,
                                                                  uint64_t seed) {
    if (n == 0) throw InputError("split: record set is empty");
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw InputError("split: calibration fraction must lie in (0,1)");
    }
    const auto k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
    if (k < 1 || k >= n) {
        throw InputError("split: fraction " + std::to_string(fraction) +
                         " leaves an empty side for n=" + std::to_string(n));
    }
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    std::vector<size_t> calib(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
    // Keep the original relative order inside each side.
    std::sort(calib.begin(), calib.end());
    std::sort(test.begin(), test.end());
    return {std::move(calib), std::move(test)};
}

std::pair<RecordSet, RecordSet> split(const RecordSet& rs, double calibration_fraction,
                                      uint64_t seed) {
    auto [ci, ti] = split_indices(rs.size(), calibration_fraction, seed);
    RecordSet calib, test;
    calib.provenance = rs.provenance + "#calibration(seed=" + std::to_string(seed) + ")";
    test.provenance = rs.provenance + "#test(seed=" + std::to_string(seed) + ")";
    calib.records.reserve(ci.size());
    test.records.reserve(ti.size());
    for (size_t i : ci) calib.records.push_back(rs.records[i]);
    for (size_t i : ti) test.records.push_back(rs.records[i]);
    return {std::move(calib), std::move(test)};
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

RecordSet synthesize(const SynthesisSpec& spec) {
    if (spec.n < 1) throw InputError("synthesize: n must be >= 1");
    if (!(spec.direct_acc >= 0.0 && spec.direct_acc <= 1.0) ||
        !(spec.cot_acc >= 0.0 && spec.cot_acc <= 1.0)) {
        throw InputError("synthesize: accuracies must lie in [0,1]");
    }
    if (!(spec.auroc >= 0.5 && spec.auroc <= 1.0)) {
        throw InputError("synthesize: auroc must lie in [0.5,1]");
    }
    if (!(spec.direct_tokens_mean > 0.0 && spec.cot_tokens_mean > 0.0)) {
        throw InputError("synthesize: token means must be positive");
    }

    // Binormal signal model: the latent confidence of direct-correct records
    // is shifted by d = sqrt(2) * probit(auroc), which makes the population
    // AUROC of any strictly monotone transform of the latent equal `auroc`.
    const double capped = std::min(spec.auroc, 0.9999);
    const double d = capped <= 0.5 ? 0.0 : std::numbers::sqrt2 * inverse_normal_cdf(capped);
    const double pi = std::clamp(spec.direct_acc, 1e-9, 1.0 - 1e-9);
    const double logit_pi = std::log(pi / (1.0 - pi));

    RecordSet rs;
    rs.provenance = "synthesize(n=" + std::to_string(spec.n) +
                    ",seed=" + std::to_string(spec.seed) + ")";
    rs.records.reserve(spec.n);
    Rng rng(spec.seed);
    char idbuf[32];

    for (size_t i = 0; i < spec.n; ++i) {
        const bool direct_correct = rng.bernoulli(spec.direct_acc);
        const bool cot_correct = rng.bernoulli(spec.cot_acc);
        const double latent = rng.normal() + (direct_correct ? d : 0.0);
        const double centered = latent - 0.5 * d;

        QueryRecord rec;
        std::snprintf(idbuf, sizeof(idbuf), "syn-%06zu", i);
        rec.id = idbuf;
        rec.dataset = "synthetic";
        rec.question = "synthetic task " + std::to_string(i);

        // P(True) is the exact posterior P(correct | latent), so it is a
        // calibrated probability; the others are deliberately mis-scaled
        // monotone transforms of the same latent.
        rec.p_true = logistic(d * latent - 0.5 * d * d + logit_pi);
        rec.verbalised_prob = logistic(0.9 * centered);
        const double m = logistic(0.8 * centered);
        rec.direct.top2 = std::make_pair(0.5 * (1.0 + m), 0.5 * (1.0 - m));

        const double tok_p = 0.02 + 0.96 * logistic(0.7 * centered);
        const double base_lp = std::log(tok_p);

        const double dt = rng.normal() * 0.15 * spec.direct_tokens_mean + spec.direct_tokens_mean;
        const double ct = rng.normal() * 0.20 * spec.cot_tokens_mean + spec.cot_tokens_mean;
        rec.direct.tokens = std::max(1ll, std::llround(dt));
        rec.cot.tokens = std::max(1ll, std::llround(ct));

        // Zero-sum jitter keeps the mean log-probability (hence the record's
        // perplexity) an exact monotone transform of the latent.
        const size_t t_count = static_cast<size_t>(rec.direct.tokens);
        std::vector<double> jitter(t_count);
        const double jscale = std::min(0.25, 0.49 * -base_lp);
        double jsum = 0.0;
        for (double& j : jitter) {
            j = rng.uniform(-jscale, jscale);
            jsum += j;
        }
        const double jmean = jsum / static_cast<double>(t_count);
        rec.direct.token_logprobs.reserve(t_count);
        for (double j : jitter) rec.direct.token_logprobs.push_back(base_lp + (j - jmean));

        rec.direct.answer = "A";
        rec.direct.correct = direct_correct;
        rec.cot.answer = "A";
        rec.cot.correct = cot_correct;

        rs.records.push_back(std::move(rec));
    }
    return rs;
}

RecordSet synthesize(size_t n, double direct_acc, double cot_acc, double auroc,
                     double direct_tokens_mean, double cot_tokens_mean, uint64_t seed) {
    SynthesisSpec spec;
    spec.n = n;
    spec.direct_acc = direct_acc;
    spec.cot_acc = cot_acc;
    spec.auroc = auroc;
    spec.direct_tokens_mean = direct_tokens_mean;
    spec.cot_tokens_mean = cot_tokens_mean;
    spec.seed = seed;
    return synthesize(spec);
}

} // namespace cotgate
