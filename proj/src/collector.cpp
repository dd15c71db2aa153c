#include "cotgate/collector.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "cotgate/errors.hpp"
#include "cotgate/util.hpp"

namespace cotgate {

using json = nlohmann::json;

std::string verbalised_prompt() {
    return "Please directly provide your best guess of the answer to the question and give "
           "the probability that you think it is correct (0.0 to 1.0). Take your uncertainty "
           "in the prompt, the task difficulty, your knowledge availability, and other "
           "sources of uncertainty into account.\n\n"
           "Give only the guess and probability, with no other words or explanation.\n\n"
           "Format your final response as:\n"
           "Answer: <your_best_guess>.\n"
           "Probability: <score between 0.0 and 1.0>";
}

std::string p_true_user_message(const std::string& question, const std::string& proposed_answer) {
    return "Question: " + question + "\nProposed Answer: " + proposed_answer +
           "\nIs this answer:\n(A) True\n(B) False";
}

EndpointClient::EndpointClient(const EndpointConfig& cfg) : cfg_(cfg) {
    if (!cfg_.api_key_env.empty()) {
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
    }
}

namespace {

bool retriable_status(int status) { return status == 429 || status >= 500; }

json build_body(const EndpointConfig& cfg, const std::vector<ChatMessage>& messages,
                const RequestOptions& options) {
    json body;
    body["model"] = cfg.model;
    body["temperature"] = cfg.temperature;
    body["top_p"] = cfg.top_p;
    body["max_tokens"] = options.max_tokens;
    json msgs = json::array();
    for (const ChatMessage& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = std::move(msgs);
    if (options.want_logprobs) {
        body["logprobs"] = true;
        if (options.top_logprobs > 0) body["top_logprobs"] = options.top_logprobs;
    }
    if (!options.extra_body.empty()) {
        json extra;
        try {
            extra = json::parse(options.extra_body);
        } catch (const json::parse_error& e) {
            throw InputError(std::string("extra request body is not valid JSON: ") + e.what());
        }
        if (!extra.is_object()) throw InputError("extra request body must be a JSON object");
        for (auto& [k, v] : extra.items()) body[k] = v;
    }
    return body;
}

ChatResponse parse_response(const json& resp) {
    ChatResponse out;
    if (!resp.contains("choices") || !resp["choices"].is_array() || resp["choices"].empty()) {
        throw EndpointError("endpoint response has no choices");
    }
    const json& choice = resp["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
        out.content = choice["message"]["content"].get<std::string>();
    }
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
        out.finish_reason = choice["finish_reason"].get<std::string>();
    }
    if (resp.contains("usage") && resp["usage"].contains("completion_tokens")) {
        out.completion_tokens = resp["usage"]["completion_tokens"].get<long long>();
    }
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
        for (const json& tok : choice["logprobs"]["content"]) {
            TokenLogprob tl;
            tl.token = tok.value("token", std::string());
            tl.logprob = tok.value("logprob", 0.0);
            if (tok.contains("top_logprobs") && tok["top_logprobs"].is_array()) {
                for (const json& alt : tok["top_logprobs"]) {
                    tl.top.emplace_back(alt.value("token", std::string()),
                                        alt.value("logprob", 0.0));
                }
            }
            out.logprobs.push_back(std::move(tl));
        }
    }
    if (out.completion_tokens == 0 && !out.logprobs.empty()) {
        out.completion_tokens = static_cast<long long>(out.logprobs.size());
    }
    return out;
}

} // namespace

ChatResponse EndpointClient::chat(const std::vector<ChatMessage>& messages,
                                  const RequestOptions& options) {
    const json body = build_body(cfg_, messages, options);
    const std::string payload = body.dump();

    std::string last_error;
    int backoff_ms = cfg_.retry_backoff_ms;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms = std::min(backoff_ms * 2, 8000);
        }
        httplib::Client client(cfg_.base_url);
        const auto timeout = std::chrono::milliseconds(
            static_cast<long long>(cfg_.request_timeout_s * 1000.0));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            try {
                return parse_response(json::parse(res->body));
            } catch (const json::parse_error& e) {
                throw EndpointError(std::string("endpoint returned invalid JSON: ") + e.what());
            }
        }
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
        if (!retriable_status(res->status)) throw EndpointError(last_error);
    }
    throw EndpointError("request failed after " + std::to_string(cfg_.max_retries + 1) +
                        " attempts; last: " + last_error);
}

void EndpointClient::preflight_logprobs() {
    RequestOptions options;
    options.max_tokens = 1;
    options.want_logprobs = true;
    options.top_logprobs = std::max(2, cfg_.top_logprobs);
    const ChatResponse resp = chat({{"user", "Reply with the single word OK."}}, options);
    if (resp.logprobs.empty() || resp.logprobs.front().top.size() < 2) {
        throw EndpointError(
            "endpoint does not return per-token log-probabilities with top-k alternatives; "
            "direct and P(True) collection need them");
    }
}

namespace {

// First token carrying visible text; the answer-determining position for
// top-2 extraction.
size_t first_content_token(const std::vector<TokenLogprob>& logprobs) {
    for (size_t i = 0; i < logprobs.size(); ++i) {
        if (!trim(logprobs[i].token).empty()) return i;
    }
    return logprobs.empty() ? std::string::npos : 0;
}

std::optional<std::pair<double, double>> top2_at(const TokenLogprob& tl) {
    if (tl.top.size() < 2) return std::nullopt;
    std::vector<double> probs;
    probs.reserve(tl.top.size());
    for (const auto& [tok, lp] : tl.top) probs.push_back(std::exp(lp));
    std::sort(probs.begin(), probs.end(), std::greater<>());
    double p1 = std::min(probs[0], 1.0);
    double p2 = std::min(probs[1], 1.0 - p1); // guard float spill over p1+p2 <= 1
    return std::make_pair(p1, p2);
}

std::string extract_final_answer(const std::string& content) {
    // Reasoning traces wrapped in <think>...</think> keep only the tail.
    const std::string close_tag = "</think>";
    if (const size_t at = content.rfind(close_tag); at != std::string::npos) {
        return std::string(trim(content.substr(at + close_tag.size())));
    }
    return std::string(trim(content));
}

PathOutcome direct_outcome_from(const ChatResponse& resp) {
    PathOutcome out;
    out.answer = std::string(trim(resp.content));
    out.tokens = std::max<long long>(resp.completion_tokens, 1);
    out.token_logprobs.reserve(resp.logprobs.size());
    for (const TokenLogprob& tl : resp.logprobs) {
        out.token_logprobs.push_back(std::min(tl.logprob, 0.0));
    }
    if (const size_t at = first_content_token(resp.logprobs); at != std::string::npos) {
        out.top2 = top2_at(resp.logprobs[at]);
    }
    return out;
}

} // namespace

PathOutcome collect_direct(const EndpointConfig& cfg, const std::string& question) {
    EndpointClient client(cfg);
    RequestOptions options;
    options.max_tokens = cfg.max_answer_tokens;
    options.want_logprobs = true;
    options.top_logprobs = cfg.top_logprobs;
    options.extra_body = cfg.direct_extra_body;
    const ChatResponse resp = client.chat({{"user", question + cfg.direct_suffix}}, options);
    if (resp.logprobs.empty()) {
        throw EndpointError("direct pass: endpoint returned no token log-probabilities");
    }
    return direct_outcome_from(resp);
}

PathOutcome collect_cot(const EndpointConfig& cfg, const std::string& question) {
    EndpointClient client(cfg);
    RequestOptions options;
    options.max_tokens = cfg.max_thinking_tokens;
    options.extra_body = cfg.cot_extra_body;
    std::vector<ChatMessage> messages{{"system", cfg.cot_instruction}, {"user", question}};
    ChatResponse resp = client.chat(messages, options);

    PathOutcome out;
    out.tokens = resp.completion_tokens;
    if (resp.finish_reason == "length") {
        // Thinking budget exhausted: force the answer in a short second turn.
        messages.push_back({"assistant", resp.content});
        messages.push_back({"user", cfg.answer_force_text});
        RequestOptions force;
        force.max_tokens = cfg.max_answer_tokens;
        force.extra_body = cfg.cot_extra_body;
        const ChatResponse forced = client.chat(messages, force);
        out.tokens += forced.completion_tokens;
        out.answer = extract_final_answer(forced.content);
    } else {
        out.answer = extract_final_answer(resp.content);
    }
    out.tokens = std::max<long long>(out.tokens, 1);
    return out;
}

double collect_p_true(const EndpointConfig& cfg, const std::string& question,
                      const std::string& proposed_answer) {
    EndpointClient client(cfg);
    RequestOptions options;
    options.max_tokens = 4;
    options.want_logprobs = true;
    options.top_logprobs = cfg.top_logprobs;
    const std::vector<ChatMessage> messages{
        {"user", p_true_user_message(question, proposed_answer)},
        {"assistant", kPTrueAssistantPrefix},
    };
    const ChatResponse resp = client.chat(messages, options);
    const size_t at = first_content_token(resp.logprobs);
    if (at == std::string::npos) return 0.0;

    double mass = 0.0;
    for (const auto& [tok, lp] : resp.logprobs[at].top) {
        if (tok == "A" || tok == " A" || tok == "(A") mass += std::exp(lp);
    }
    return std::min(mass, 1.0);
}

VerbalisedAnswer collect_verbalised(const EndpointConfig& cfg, const std::string& question) {
    EndpointClient client(cfg);
    RequestOptions options;
    options.max_tokens = cfg.max_answer_tokens;
    const std::vector<ChatMessage> messages{
        {"user", verbalised_prompt() + "\n\nQuestion: " + question}};
    // One retry on unparseable output, then the caller flags the record.
    for (int attempt = 0; attempt < 2; ++attempt) {
        const ChatResponse resp = client.chat(messages, options);
        try {
            return parse_verbalised(resp.content);
        } catch (const InputError&) {
            if (attempt == 1) throw;
        }
    }
    throw InputError("verbalised pass: unreachable");
}

std::vector<CollectionInput> read_collection_inputs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open question file");
    std::vector<CollectionInput> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError(where + ": malformed question record: " + e.what());
        }
        CollectionInput ci;
        if (!obj.contains("id") || !obj["id"].is_string() || obj["id"].get<std::string>().empty()) {
            throw InputError(where + ": missing field 'id'");
        }
        ci.id = obj["id"].get<std::string>();
        ci.dataset = obj.value("dataset", std::string("default"));
        if (!obj.contains("question") || !obj["question"].is_string()) {
            throw InputError(where + ": missing field 'question'");
        }
        ci.question = obj["question"].get<std::string>();
        out.push_back(std::move(ci));
    }
    return out;
}

namespace {

struct PendingRecord {
    QueryRecord record;
    bool have_direct = false;
    bool have_cot = false;
    bool failed = false;
};

bool needs_pass(const PendingRecord& pr, const CollectOptions& opt, const char* pass) {
    const std::string p = pass;
    if (p == "direct") return opt.pass_direct && !pr.have_direct;
    if (p == "cot") return opt.pass_cot && !pr.have_cot;
    if (p == "p_true") return opt.pass_p_true && !pr.record.p_true.has_value();
    if (p == "verbalised") return opt.pass_verbalised && !pr.record.verbalised_prob.has_value();
    return false;
}

} // namespace

CollectReport collect_records(const EndpointConfig& cfg, const std::vector<CollectionInput>& inputs,
                              const CollectOptions& options, const std::string& out_path) {
    CollectReport report;

    // Resume: previously written records are reused pass by pass, keyed on id.
    std::unordered_map<std::string, QueryRecord> existing;
    if (options.resume && std::filesystem::exists(out_path)) {
        const RecordSet prior = ingest(out_path);
        for (const QueryRecord& rec : prior.records) existing.emplace(rec.id, rec);
    }

    std::vector<PendingRecord> pending(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i) {
        PendingRecord& pr = pending[i];
        if (auto it = existing.find(inputs[i].id); it != existing.end()) {
            pr.record = it->second;
            // An answer on file means the pass already ran.
            pr.have_direct = !pr.record.direct.answer.empty();
            pr.have_cot = !pr.record.cot.answer.empty();
        } else {
            pr.record.id = inputs[i].id;
            pr.record.dataset = inputs[i].dataset;
            pr.record.question = inputs[i].question;
        }
    }

    if ((options.pass_direct || options.pass_p_true)) {
        bool any = false;
        for (size_t i = 0; i < inputs.size(); ++i) {
            if (needs_pass(pending[i], options, "direct") ||
                needs_pass(pending[i], options, "p_true")) {
                any = true;
                break;
            }
        }
        if (any) EndpointClient(cfg).preflight_logprobs();
    }

    std::mutex flags_mutex;
    const auto flag = [&](const std::string& id, const char* pass, const std::string& note) {
        std::lock_guard<std::mutex> lock(flags_mutex);
        report.flags.push_back({id, pass, note});
    };

    std::atomic<size_t> next{0};
    const auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= inputs.size()) return;
            PendingRecord& pr = pending[i];
            const std::string& question = pr.record.question;
            try {
                if (needs_pass(pr, options, "direct")) {
                    pr.record.direct = collect_direct(cfg, question);
                    pr.have_direct = true;
                    if (!pr.record.direct.top2) {
                        flag(pr.record.id, "direct", "no top-2 alternatives at answer token");
                    }
                }
                if (needs_pass(pr, options, "cot")) {
                    PathOutcome cot = collect_cot(cfg, question);
                    if (cot.tokens >= cfg.max_thinking_tokens) {
                        flag(pr.record.id, "cot", "thinking budget reached; answer was forced");
                    }
                    pr.record.cot = std::move(cot);
                    pr.have_cot = true;
                }
                if (needs_pass(pr, options, "p_true")) {
                    const double p = collect_p_true(cfg, question, pr.record.direct.answer);
                    if (p == 0.0) {
                        flag(pr.record.id, "p_true", "no A-variant token in top-k; stored 0");
                    }
                    pr.record.p_true = p;
                }
                if (needs_pass(pr, options, "verbalised")) {
                    try {
                        const VerbalisedAnswer v = collect_verbalised(cfg, question);
                        pr.record.verbalised_prob = v.probability;
                    } catch (const InputError& e) {
                        flag(pr.record.id, "verbalised",
                             std::string("unparseable after retry: ") + e.what());
                    }
                }
            } catch (const EndpointError& e) {
                pr.failed = true;
                flag(pr.record.id, "transport", e.what());
            }
        }
    };

    const int nthreads = std::clamp(cfg.max_parallel, 1, 64);
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();

    // Output is rewritten in input order regardless of completion order.
    // Records that failed a pass keep whatever they already have, so a later
    // resume only re-runs the missing passes.
    RecordSet out;
    out.provenance = out_path;
    for (size_t i = 0; i < inputs.size(); ++i) {
        PendingRecord& pr = pending[i];
        if (pr.failed) {
            ++report.failed;
        } else {
            const auto it = existing.find(pr.record.id);
            const bool fresh = it == existing.end() || !(it->second == pr.record);
            fresh ? ++report.collected : ++report.skipped;
        }
        out.records.push_back(std::move(pr.record));
    }
    const std::string tmp = out_path + ".tmp";
    write_records(out, tmp);
    std::filesystem::rename(tmp, out_path);

    if (!report.flags.empty()) {
        std::ofstream flags_out(out_path + ".flags.jsonl");
        for (const CollectFlag& f : report.flags) {
            json line{{"id", f.id}, {"pass", f.pass}, {"note", f.note}};
            flags_out << line.dump() << '\n';
        }
    }
    return report;
}

} // namespace cotgate
