#include "cotgate/confidence.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "cotgate/errors.hpp"
#include "cotgate/util.hpp"

namespace cotgate {

std::string_view method_name(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::perplexity: return "perplexity";
        case ScoreMethod::p_true: return "p_true";
        case ScoreMethod::margin: return "margin";
        case ScoreMethod::verbalised: return "verbalised";
    }
    return "unknown";
}

std::optional<ScoreMethod> method_from_name(std::string_view name) {
    for (ScoreMethod m : kAllMethods) {
        if (method_name(m) == name) return m;
    }
    return std::nullopt;
}

double perplexity(std::span<const double> token_logprobs) {
    if (token_logprobs.empty()) throw InputError("perplexity: empty log-probability sequence");
    double sum = 0.0;
    for (double lp : token_logprobs) {
        if (!(lp <= 0.0)) throw InputError("perplexity: positive log-probability");
        sum += lp;
    }
    return std::exp(-sum / static_cast<double>(token_logprobs.size()));
}

double margin(double p1, double p2) {
    if (!(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0)) {
        throw InputError("margin: probabilities must lie in [0,1]");
    }
    if (p1 < p2) throw InputError("margin: top-2 probabilities must be ordered p1 >= p2");
    return p1 - p2;
}

double margin(const std::pair<double, double>& top2) { return margin(top2.first, top2.second); }

double p_true_score(const QueryRecord& rec) {
    if (!rec.p_true) {
        throw InputError("record '" + rec.id + "': method unavailable: p_true field absent");
    }
    return *rec.p_true;
}

namespace {

// Last case-insensitive occurrence of `label` in `text`, npos if none.
size_t rfind_label(std::string_view text, std::string_view label) {
    const std::string hay = lowercase(text);
    return hay.rfind(lowercase(label));
}

std::string strip_trailing_punct(std::string_view s) {
    s = trim(s);
    while (!s.empty()) {
        const char c = s.back();
        if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == ')') {
            s.remove_suffix(1);
        } else {
            break;
        }
    }
    return std::string(trim(s));
}

} // namespace

VerbalisedAnswer parse_verbalised(std::string_view completion) {
    constexpr std::string_view kProbLabel = "probability:";
    constexpr std::string_view kAnswerLabel = "answer:";

    const size_t prob_at = rfind_label(completion, kProbLabel);
    if (prob_at == std::string_view::npos) {
        throw InputError("parse_verbalised: no 'Probability:' label in completion");
    }
    std::string_view tail = trim(completion.substr(prob_at + kProbLabel.size()));
    if (tail.empty()) throw InputError("parse_verbalised: no numeric after 'Probability:'");
    const std::string num(tail);
    char* end = nullptr;
    const double prob = std::strtod(num.c_str(), &end);
    if (end == num.c_str()) throw InputError("parse_verbalised: no parseable probability");
    if (!(prob >= 0.0 && prob <= 1.0)) {
        throw InputError("parse_verbalised: probability outside [0,1]");
    }

    VerbalisedAnswer out;
    out.probability = prob;
    const size_t ans_at = rfind_label(completion.substr(0, prob_at), kAnswerLabel);
    if (ans_at != std::string_view::npos) {
        std::string_view span = completion.substr(ans_at + kAnswerLabel.size(),
                                                  prob_at - (ans_at + kAnswerLabel.size()));
        if (const size_t nl = span.find('\n'); nl != std::string_view::npos) {
            span = span.substr(0, nl);
        }
        out.answer = strip_trailing_punct(span);
    }
    return out;
}

bool method_available(const QueryRecord& rec, ScoreMethod method) {
    switch (method) {
        case ScoreMethod::perplexity: return !rec.direct.token_logprobs.empty();
        case ScoreMethod::p_true: return rec.p_true.has_value();
        case ScoreMethod::margin: return rec.direct.top2.has_value();
        case ScoreMethod::verbalised: return rec.verbalised_prob.has_value();
    }
    return false;
}

ConfidenceScore score(const QueryRecord& rec, ScoreMethod method) {
    ConfidenceScore out;
    out.method = method;
    switch (method) {
        case ScoreMethod::perplexity: {
            if (rec.direct.token_logprobs.empty()) {
                throw InputError("record '" + rec.id +
                                 "': method unavailable: no direct token log-probabilities");
            }
            out.raw = perplexity(rec.direct.token_logprobs);
            out.oriented = -out.raw;     // lower perplexity = more confident
            out.normalized = 1.0 / out.raw; // maps [1,inf) into (0,1]
            return out;
        }
        case ScoreMethod::p_true:
            out.raw = p_true_score(rec);
            break;
        case ScoreMethod::margin: {
            if (!rec.direct.top2) {
                throw InputError("record '" + rec.id +
                                 "': method unavailable: no top-2 probabilities");
            }
            out.raw = margin(*rec.direct.top2);
            break;
        }
        case ScoreMethod::verbalised: {
            if (!rec.verbalised_prob) {
                throw InputError("record '" + rec.id +
                                 "': method unavailable: verbalised_prob field absent");
            }
            out.raw = *rec.verbalised_prob;
            break;
        }
    }
    out.oriented = out.raw;
    out.normalized = out.raw;
    return out;
}

} // namespace cotgate
