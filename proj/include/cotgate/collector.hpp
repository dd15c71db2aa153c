#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cotgate/confidence.hpp"
#include "cotgate/record.hpp"

namespace cotgate {

// Connection and sampling settings for an OpenAI-compatible chat-completions
// endpoint. The API key is read from the environment variable named by
// api_key_env; requests go out without an Authorization header when it is
// unset (local servers).
struct EndpointConfig {
    std::string base_url = "http://localhost:8000";
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.6;
    double top_p = 0.95;
    int max_thinking_tokens = 7000; // CoT cap; on overflow the answer is forced
    int max_answer_tokens = 256;
    double request_timeout_s = 120.0;
    int max_parallel = 4;
    int max_retries = 3;
    int retry_backoff_ms = 500; // doubled per attempt, capped at 8s
    int top_logprobs = 8;

    // Prompt assembly. The verbalised and P(True) prompt texts are fixed; the
    // pieces below cover endpoint-specific mode switches.
    std::string direct_suffix = "\nAnswer:";
    std::string cot_instruction =
        "Think step by step about the question before giving the final answer.";
    std::string answer_force_text =
        "Given the reasoning above, state the final answer now.";
    // Raw JSON objects merged into the request body per pass, e.g.
    // {"chat_template_kwargs":{"enable_thinking":false}} for the direct pass
    // on Qwen-style servers or {"reasoning_effort":"high"} for the CoT pass.
    std::string direct_extra_body;
    std::string cot_extra_body;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
    std::vector<std::pair<std::string, double>> top; // alternatives at this position
};

struct ChatResponse {
    std::string content;
    std::string finish_reason;
    long long completion_tokens = 0;
    std::vector<TokenLogprob> logprobs;
};

struct RequestOptions {
    int max_tokens = 256;
    bool want_logprobs = false;
    int top_logprobs = 0;
    std::string extra_body; // raw JSON object merged into the request
};

// Thin client with bounded retries and exponential backoff on transport
// errors, 429 and 5xx. Not thread safe; collect_records gives each worker its
// own instance.
class EndpointClient {
public:
    explicit EndpointClient(const EndpointConfig& cfg);

    ChatResponse chat(const std::vector<ChatMessage>& messages, const RequestOptions& options);

    // One throwaway request verifying the endpoint returns per-token
    // logprobs with alternatives. Throws EndpointError if it does not.
    void preflight_logprobs();

    const EndpointConfig& config() const { return cfg_; }

private:
    EndpointConfig cfg_;
    std::string api_key_;
};

// Fixed prompt texts for the two extra confidence passes.
std::string verbalised_prompt();
std::string p_true_user_message(const std::string& question, const std::string& proposed_answer);
inline constexpr const char* kPTrueAssistantPrefix = "The answer is:";

// Single-record passes. Each establishes its own client; batch collection
// reuses clients internally.
PathOutcome collect_direct(const EndpointConfig& cfg, const std::string& question);
PathOutcome collect_cot(const EndpointConfig& cfg, const std::string& question);
// Probability mass of the "(A) True" option token, summed over the surface
// variants "A", " A" and "(A" present in the returned top-k. Absent variants
// yield 0 with a flag at batch level.
double collect_p_true(const EndpointConfig& cfg, const std::string& question,
                      const std::string& proposed_answer);
VerbalisedAnswer collect_verbalised(const EndpointConfig& cfg, const std::string& question);

struct CollectionInput {
    std::string id;
    std::string dataset;
    std::string question;
};

std::vector<CollectionInput> read_collection_inputs(const std::string& path);

struct CollectOptions {
    bool pass_direct = true;
    bool pass_cot = true;
    bool pass_p_true = true;
    bool pass_verbalised = true;
    bool resume = true; // skip passes already present in the output file
};

struct CollectFlag {
    std::string id;
    std::string pass;
    std::string note;
};

struct CollectReport {
    size_t collected = 0; // records with at least one new pass this run
    size_t skipped = 0;   // records already complete in the output file
    size_t failed = 0;    // records dropped after retries
    std::vector<CollectFlag> flags;
};

// Runs the requested passes for every input (up to max_parallel in flight),
// merges with any existing output when resuming, and rewrites the output file
// in input order. Correctness labels are NOT produced here: records are
// written with correct=false placeholders for a downstream labelling step.
CollectReport collect_records(const EndpointConfig& cfg, const std::vector<CollectionInput>& inputs,
                              const CollectOptions& options, const std::string& out_path);

} // namespace cotgate
