#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cotgate {

// One answer path (direct or chain-of-thought) for a single query.
struct PathOutcome {
    std::string answer;
    bool correct = false;
    long long tokens = 0; // generated tokens for this path
    // Per-token natural-log probabilities of the emitted answer tokens.
    // Populated for the direct path; usually empty for the CoT path.
    std::vector<double> token_logprobs;
    // (p1, p2) at the answer-determining token, p1 >= p2, p1 + p2 <= 1.
    std::optional<std::pair<double, double>> top2;

    bool operator==(const PathOutcome&) const = default;
};

// One benchmark question with both paths' outcomes and the optional
// second-pass confidence fields.
struct QueryRecord {
    std::string id;
    std::string dataset;
    std::string question;
    PathOutcome direct;
    PathOutcome cot;
    std::optional<double> p_true;          // probability the model deems its direct answer true
    std::optional<double> verbalised_prob; // self-reported probability in [0,1]

    bool operator==(const QueryRecord&) const = default;
};

// Immutable once built; evaluation code treats it as read-only and it is safe
// to share across threads.
struct RecordSet {
    std::vector<QueryRecord> records;
    std::string provenance;

    size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    const QueryRecord& operator[](size_t i) const { return records[i]; }
    auto begin() const { return records.begin(); }
    auto end() const { return records.end(); }
};

// Throws InputError naming the offending field when an invariant is violated.
// `where` prefixes the message (e.g. "records.jsonl:17").
void validate_record(const QueryRecord& rec, const std::string& where);

// Reads one-record-per-line JSON from `path`, validating every record and
// reporting the line number of the first problem. Blank lines are skipped.
RecordSet ingest(const std::string& path);
RecordSet parse_records(std::istream& in, const std::string& provenance);

std::string to_json_line(const QueryRecord& rec);
QueryRecord record_from_json_line(const std::string& line, const std::string& where);
void write_records(const RecordSet& rs, const std::string& path);

// Seed-deterministic random partition. The calibration side gets
// round(fraction * n) records; both sides keep the original relative order.
std::pair<RecordSet, RecordSet> split(const RecordSet& rs, double calibration_fraction,
                                      uint64_t seed);
std::pair<std::vector<size_t>, std::vector<size_t>> split_indices(size_t n, double fraction,
                                                                  uint64_t seed);

// Deterministic synthetic-record generator. Correctness labels are drawn at
// the requested path accuracies, and all four confidence fields are monotone
// transforms of one latent signal whose discrimination of direct-answer
// correctness converges to `auroc` as n grows.
struct SynthesisSpec {
    size_t n = 1000;
    double direct_acc = 0.55;
    double cot_acc = 0.80;
    double auroc = 0.85; // in [0.5, 1)
    double direct_tokens_mean = 60.0;
    double cot_tokens_mean = 480.0;
    uint64_t seed = 1;
};

RecordSet synthesize(const SynthesisSpec& spec);
RecordSet synthesize(size_t n, double direct_acc, double cot_acc, double auroc,
                     double direct_tokens_mean, double cot_tokens_mean, uint64_t seed);

} // namespace cotgate
