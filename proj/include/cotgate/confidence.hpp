#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "cotgate/record.hpp"

namespace cotgate {

// The four training-free confidence signals. Perplexity is the only one where
// a lower raw value means more confidence; orientation normalises that away.
enum class ScoreMethod {
    perplexity,
    p_true,
    margin,
    verbalised,
};

constexpr std::array<ScoreMethod, 4> kAllMethods = {
    ScoreMethod::perplexity,
    ScoreMethod::p_true,
    ScoreMethod::margin,
    ScoreMethod::verbalised,
};

std::string_view method_name(ScoreMethod m);
std::optional<ScoreMethod> method_from_name(std::string_view name);

struct ConfidenceScore {
    ScoreMethod method = ScoreMethod::perplexity;
    double raw = 0.0;        // the signal on its native scale
    double oriented = 0.0;   // monotone transform: larger always = more confident
    double normalized = 0.0; // in [0,1], for reliability analysis only

    bool operator==(const ConfidenceScore&) const = default;
};

// exp(-mean(logprobs)); >= 1, and exactly 1 iff every token had probability 1.
double perplexity(std::span<const double> token_logprobs);

// p1 - p2 for the top-two probabilities at the answer-determining token.
double margin(double p1, double p2);
double margin(const std::pair<double, double>& top2);

// Pass-through of the stored second-pass probability; extraction happens at
// collection time.
double p_true_score(const QueryRecord& rec);

struct VerbalisedAnswer {
    std::string answer;
    double probability = 0.0;
};

// Extracts the last "Answer:"-labelled span and the last "Probability:"-
// labelled numeric from a completion. Tolerant of casing, surrounding
// whitespace, and trailing punctuation. Throws InputError when no probability
// in [0,1] can be parsed; a missing answer label yields an empty answer.
VerbalisedAnswer parse_verbalised(std::string_view completion);

bool method_available(const QueryRecord& rec, ScoreMethod method);

// Scores one record. oriented = raw except perplexity where oriented = -raw;
// normalized = raw for the probability-like methods and 1/raw for perplexity.
ConfidenceScore score(const QueryRecord& rec, ScoreMethod method);

} // namespace cotgate
