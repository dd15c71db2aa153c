// cotgate: evaluation harness for confidence-gated chain-of-thought routing.
//
// Subcommands cover record validation, confidence scoring, offline percentile
// sweeps, Monte Carlo threshold calibration, online dynamic-percentile
// streaming, outcome/reliability analysis, live collection against an
// OpenAI-compatible endpoint, and synthetic record generation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cotgate/analysis.hpp"
#include "cotgate/baselines.hpp"
#include "cotgate/collector.hpp"
#include "cotgate/confidence.hpp"
#include "cotgate/errors.hpp"
#include "cotgate/gating.hpp"
#include "cotgate/online.hpp"
#include "cotgate/record.hpp"
#include "cotgate/rng.hpp"
#include "cotgate/sweep.hpp"
#include "cotgate/util.hpp"

namespace {

using namespace cotgate;

constexpr const char* kVersion = "cotgate 0.1.0";

constexpr int kExitInput = 2;
constexpr int kExitEndpoint = 3;
constexpr int kExitConstraintUnmet = 4;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string fmt1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

std::string hex64(uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

// Accumulates one command's emitted artifacts so the run manifest can be
// written beside them; identical manifests imply byte-identical outputs.
struct ArtifactSink {
    std::string command;
    std::map<std::string, std::string> arguments;
    std::map<std::string, std::string> inputs;
    std::vector<std::string> outputs;

    void arg(const std::string& key, const std::string& value) { arguments[key] = value; }
    void arg(const std::string& key, double value) { arguments[key] = fmt(value); }
    void arg(const std::string& key, long long value) { arguments[key] = std::to_string(value); }

    void input(const std::string& path) { inputs[path] = hash_file(path); }

    // Empty path = stdout (no manifest entry).
    void emit(const std::string& path, const std::string& content) {
        if (path.empty()) {
            std::cout << content;
            return;
        }
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InputError(path + ": cannot open for writing");
        out << content;
        if (!out) throw InputError(path + ": write failed");
        outputs.push_back(path);
    }

    void write_manifest() {
        if (outputs.empty()) return;
        nlohmann::ordered_json m;
        m["tool"] = kVersion;
        m["command"] = command;
        m["arguments"] = arguments;
        m["inputs"] = inputs;
        m["outputs"] = outputs;
        const std::string path = outputs.front() + ".manifest.json";
        std::ofstream out(path, std::ios::binary);
        out << m.dump(2) << '\n';
    }
};

RecordSet load_records(const std::string& path, ArtifactSink& sink) {
    sink.input(path);
    RecordSet rs = ingest(path);
    if (rs.empty()) throw InputError(path + ": no records");
    return rs;
}

std::vector<ScoreMethod> parse_methods(const std::string& csv) {
    std::vector<ScoreMethod> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string name(trim(item));
        if (name.empty()) continue;
        const auto m = method_from_name(name);
        if (!m) throw InputError("unknown method '" + name + "'");
        out.push_back(*m);
    }
    if (out.empty()) throw InputError("no methods requested");
    return out;
}

std::string display_name(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::perplexity: return "Perplexity";
        case ScoreMethod::p_true: return "P(True)";
        case ScoreMethod::margin: return "Margin";
        case ScoreMethod::verbalised: return "Verbalised";
    }
    return "?";
}

// ---------------------------------------------------------------- validate

int cmd_validate(const std::string& records_path) {
    const RecordSet rs = ingest(records_path);
    if (rs.empty()) throw InputError(records_path + ": no records");
    std::map<std::string, size_t> datasets;
    for (const QueryRecord& rec : rs) ++datasets[rec.dataset];
    std::cout << "OK: " << rs.size() << " records, " << datasets.size() << " dataset(s)\n";
    return 0;
}

// ------------------------------------------------------------------- score

int cmd_score(const std::string& records_path, const std::string& methods_csv,
              const std::string& out_path) {
    ArtifactSink sink;
    sink.command = "score";
    sink.arg("records", records_path);
    sink.arg("methods", methods_csv);
    const RecordSet rs = load_records(records_path, sink);
    const auto methods = parse_methods(methods_csv);

    std::ostringstream csv;
    csv << "id,method,raw,oriented,normalized\n";
    for (const QueryRecord& rec : rs) {
        for (ScoreMethod m : methods) {
            const ConfidenceScore s = score(rec, m);
            csv << rec.id << ',' << method_name(m) << ',' << fmt(s.raw) << ',' << fmt(s.oriented)
                << ',' << fmt(s.normalized) << '\n';
        }
    }
    sink.emit(out_path, csv.str());
    sink.write_manifest();
    return 0;
}

// ---------------------------------------------------------------- gate eval

int cmd_gate_eval(const std::string& records_path, const std::string& method_name_arg,
                  double percentile, const std::string& out_path) {
    ArtifactSink sink;
    sink.command = "gate eval";
    sink.arg("records", records_path);
    sink.arg("method", method_name_arg);
    sink.arg("percentile", percentile);
    const RecordSet rs = load_records(records_path, sink);
    const auto m = method_from_name(method_name_arg);
    if (!m) throw InputError("unknown method '" + method_name_arg + "'");

    const auto view = scored_view(rs, *m);
    std::vector<double> oriented;
    oriented.reserve(view.size());
    for (const auto& sr : view) oriented.push_back(sr.oriented);
    const double tau = percentile_threshold(oriented, percentile);
    const TradeoffPoint tp = evaluate_scored(view, tau);

    std::ostringstream csv;
    csv << "method,percentile,threshold,accuracy,cot_rate,avg_tokens,n,"
           "overhead_passes_per_query\n";
    csv << method_name(*m) << ',' << fmt(percentile) << ',' << fmt(tau) << ',' << fmt(tp.accuracy)
        << ',' << fmt(tp.cot_rate) << ',' << fmt(tp.avg_tokens) << ',' << tp.n << ','
        << overhead_passes_per_query(*m) << '\n';
    sink.emit(out_path, csv.str());
    sink.write_manifest();
    return 0;
}

// ------------------------------------------------------------------- sweep

int cmd_sweep(const std::string& records_path, const std::string& methods_csv, double grid_step,
              bool online, size_t warmup, int runs, uint64_t seed, const std::string& out_prefix) {
    ArtifactSink sink;
    sink.command = "sweep";
    sink.arg("records", records_path);
    sink.arg("methods", methods_csv);
    sink.arg("grid_step", grid_step);
    sink.arg("online", online ? "true" : "false");
    if (online) {
        sink.arg("warmup", static_cast<long long>(warmup));
        sink.arg("runs", static_cast<long long>(runs));
        sink.arg("seed", static_cast<long long>(seed));
    }
    const RecordSet rs = load_records(records_path, sink);
    const auto methods = parse_methods(methods_csv);
    const std::vector<double> grid = percentile_grid(grid_step);
    const TradeoffPoint oracle_point = oracle(rs);

    for (ScoreMethod m : methods) {
        std::ostringstream csv;
        csv << "kind,method,percentile,threshold,accuracy,cot_rate,avg_tokens";
        if (online) csv << ",acc_std,cot_rate_std,avg_tokens_std";
        csv << ",overhead_passes_per_query\n";

        const auto row = [&](const char* kind, const std::string& name, double p,
                             const std::string& tau, double acc, double cot, double tok,
                             double acc_sd, double cot_sd, double tok_sd, int overhead) {
            csv << kind << ',' << name << ',' << fmt(p) << ',' << tau << ',' << fmt(acc) << ','
                << fmt(cot) << ',' << fmt(tok);
            if (online) csv << ',' << fmt(acc_sd) << ',' << fmt(cot_sd) << ',' << fmt(tok_sd);
            csv << ',' << overhead << '\n';
        };

        const int overhead = overhead_passes_per_query(m);
        if (online) {
            for (double p : grid) {
                OnlineOptions opt;
                opt.percentile = p;
                opt.warmup = warmup;
                opt.runs = runs;
                opt.seed = seed;
                const OnlineSummary s = run_online(rs, m, opt);
                row("sweep", std::string(method_name(m)), p, "", s.acc_mean, s.cot_rate_mean,
                    s.avg_tokens_mean, s.acc_std, s.cot_rate_std, s.avg_tokens_std, overhead);
            }
        } else {
            const SweepCurve curve = sweep(rs, m, grid);
            for (const SweepPoint& sp : curve.points) {
                row("sweep", std::string(method_name(m)), sp.percentile, fmt(sp.threshold),
                    sp.point.accuracy, sp.point.cot_rate, sp.point.avg_tokens, 0, 0, 0, overhead);
            }
        }
        for (double p : grid) {
            const TradeoffPoint tp = random_expected(rs, p / 100.0);
            row("random", "random", p, "", tp.accuracy, tp.cot_rate, tp.avg_tokens, 0, 0, 0, 0);
        }
        row("oracle", "oracle", 100.0 * oracle_point.cot_rate, "", oracle_point.accuracy,
            oracle_point.cot_rate, oracle_point.avg_tokens, 0, 0, 0, 0);

        const std::string path =
            out_prefix.empty() ? "" : out_prefix + std::string(method_name(m)) + ".csv";
        sink.emit(path, csv.str());
    }
    sink.write_manifest();
    return 0;
}

// --------------------------------------------------------------- calibrate

int cmd_calibrate(const std::string& records_path, const std::string& methods_csv, double epsilon,
                  double calib_fraction, int repeats, uint64_t seed, double grid_step,
                  const std::string& format, const std::string& out_path) {
    ArtifactSink sink;
    sink.command = "calibrate";
    sink.arg("records", records_path);
    sink.arg("methods", methods_csv);
    sink.arg("epsilon", epsilon);
    sink.arg("calib_fraction", calib_fraction);
    sink.arg("repeats", static_cast<long long>(repeats));
    sink.arg("seed", static_cast<long long>(seed));
    sink.arg("grid_step", grid_step);
    const RecordSet rs = load_records(records_path, sink);
    const auto methods = parse_methods(methods_csv);

    const TradeoffPoint all_cot = all_cot_aggregate(rs);
    const TradeoffPoint all_direct = all_direct_aggregate(rs);
    const TradeoffPoint oracle_point = oracle(rs);

    CalibrationOptions opt;
    opt.epsilon = epsilon;
    opt.calib_fraction = calib_fraction;
    opt.repeats = repeats;
    opt.seed = seed;
    opt.grid = percentile_grid(grid_step);

    std::vector<std::pair<ScoreMethod, ThresholdSelection>> results;
    for (ScoreMethod m : methods) results.emplace_back(m, monte_carlo_calibrate(rs, m, opt));

    std::ostringstream out;
    if (format == "csv") {
        out << "row,acc,acc_std,delta_acc,cot_pct,cot_pct_std,tokens_saved,tokens_saved_std,"
               "fallback_rate\n";
        const auto row = [&](const std::string& name, double acc, double acc_sd, double cot_pct,
                             double cot_sd, double saved, double saved_sd, double fallback) {
            out << name << ',' << fmt(acc * 100.0) << ',' << fmt(acc_sd * 100.0) << ','
                << fmt((acc - all_cot.accuracy) * 100.0) << ',' << fmt(cot_pct) << ','
                << fmt(cot_sd) << ',' << fmt(saved) << ',' << fmt(saved_sd) << ','
                << fmt(fallback) << '\n';
        };
        row("all_cot", all_cot.accuracy, 0, 100.0, 0, 0.0, 0, 0);
        row("all_direct", all_direct.accuracy, 0, 0.0, 0,
            all_cot.avg_tokens - all_direct.avg_tokens, 0, 0);
        for (const auto& [m, sel] : results) {
            row(std::string(method_name(m)), sel.acc_mean, sel.acc_std, sel.cot_rate_mean * 100.0,
                sel.cot_rate_std * 100.0, sel.tokens_saved_mean, sel.tokens_saved_std,
                static_cast<double>(sel.fallback_count) / sel.repeats);
        }
        row("oracle", oracle_point.accuracy, 0, oracle_point.cot_rate * 100.0, 0,
            all_cot.avg_tokens - oracle_point.avg_tokens, 0, 0);
    } else {
        const auto pm = [](double v, double sd) { return fmt1(v) + " ± " + fmt1(sd); };
        out << "| Method | Acc. | ΔAcc | CoT (%) | Avg. Tok. saved |\n";
        out << "|---|---|---|---|---|\n";
        out << "| All CoT | " << fmt1(all_cot.accuracy * 100.0) << " | 0.0 | 100.0 | 0.0 |\n";
        out << "| All Direct | " << fmt1(all_direct.accuracy * 100.0) << " | "
            << fmt1((all_direct.accuracy - all_cot.accuracy) * 100.0) << " | 0.0 | "
            << fmt1(all_cot.avg_tokens - all_direct.avg_tokens) << " |\n";
        for (const auto& [m, sel] : results) {
            out << "| " << display_name(m) << " | "
                << pm(sel.acc_mean * 100.0, sel.acc_std * 100.0) << " | "
                << fmt1((sel.acc_mean - all_cot.accuracy) * 100.0) << " | "
                << pm(sel.cot_rate_mean * 100.0, sel.cot_rate_std * 100.0) << " | "
                << pm(sel.tokens_saved_mean, sel.tokens_saved_std) << " |\n";
        }
        out << "| Oracle | " << fmt1(oracle_point.accuracy * 100.0) << " | "
            << fmt1((oracle_point.accuracy - all_cot.accuracy) * 100.0) << " | "
            << fmt1(oracle_point.cot_rate * 100.0) << " | "
            << fmt1(all_cot.avg_tokens - oracle_point.avg_tokens) << " |\n";
        out << "\nSplit: " << fmt(calib_fraction * 100.0) << "% calibration, epsilon "
            << fmt(epsilon * 100.0) << "%, " << repeats << " repeats, seed " << seed << ".\n";
        for (const auto& [m, sel] : results) {
            if (sel.fallback_count > 0) {
                out << "Note: " << display_name(m) << " fell back to all-CoT on "
                    << sel.fallback_count << "/" << sel.repeats << " repeats.\n";
            }
            if (overhead_passes_per_query(m) > 0) {
                out << "Note: " << display_name(m)
                    << " costs 1 extra inference pass per query (not counted in path tokens).\n";
            }
        }
    }

    bool all_fallback = false;
    for (const auto& [m, sel] : results) {
        if (sel.fallback_count == sel.repeats) all_fallback = true;
    }

    sink.emit(out_path, out.str());
    sink.write_manifest();
    // Distinct exit when calibration could not meet the constraint at all.
    return all_fallback ? kExitConstraintUnmet : 0;
}

// ---------------------------------------------------------------- outcomes

int cmd_outcomes(const std::string& records_path, const std::string& policy,
                 const std::string& method_name_arg, double percentile,
                 const std::string& out_path) {
    ArtifactSink sink;
    sink.command = "outcomes";
    sink.arg("records", records_path);
    sink.arg("policy", policy);
    const RecordSet rs = load_records(records_path, sink);

    std::vector<GateDecision> decisions;
    if (policy == "gate") {
        sink.arg("method", method_name_arg);
        sink.arg("percentile", percentile);
        const auto m = method_from_name(method_name_arg);
        if (!m) throw InputError("unknown method '" + method_name_arg + "'");
        const auto view = scored_view(rs, *m);
        std::vector<double> oriented;
        for (const auto& sr : view) oriented.push_back(sr.oriented);
        const double tau = percentile_threshold(oriented, percentile);
        decisions = decide_all(rs, *m, tau);
    } else if (policy == "oracle" || policy == "all-direct" || policy == "all-cot") {
        decisions.reserve(rs.size());
        for (const QueryRecord& rec : rs) {
            GateDecision d;
            if (policy == "oracle") {
                d.choice = rec.direct.correct ? PathChoice::Direct : PathChoice::CoT;
            } else {
                d.choice = policy == "all-cot" ? PathChoice::CoT : PathChoice::Direct;
            }
            decisions.push_back(d);
        }
    } else {
        throw InputError("unknown policy '" + policy + "' (gate, oracle, all-direct, all-cot)");
    }

    const OutcomeTally tally = classify_outcomes(rs, decisions);
    std::ostringstream csv;
    csv << "category,count,share\n";
    const auto row = [&](const char* name, long long c) {
        csv << name << ',' << c << ','
            << fmt(static_cast<double>(c) / static_cast<double>(tally.total)) << '\n';
    };
    row("cot_fixed", tally.cot_fixed);
    row("direct", tally.direct_ok);
    row("excess_cot", tally.excess_cot);
    row("missed_fix", tally.missed_fix);
    row("both_fail", tally.both_fail);
    row("excess_cot_degraded", tally.excess_cot_degraded);
    csv << "total," << tally.total << ",1\n";
    sink.emit(out_path, csv.str());
    sink.write_manifest();
    return 0;
}

// Outcome-category shares averaged over calibration repeats, one column per
// method: the realistic-deployment view of the taxonomy.
int cmd_outcomes_mc(const std::string& records_path, const std::string& methods_csv,
                    double epsilon, double calib_fraction, int repeats, uint64_t seed,
                    double grid_step, const std::string& out_path) {
    ArtifactSink sink;
    sink.command = "outcomes-mc";
    sink.arg("records", records_path);
    sink.arg("methods", methods_csv);
    sink.arg("epsilon", epsilon);
    sink.arg("calib_fraction", calib_fraction);
    sink.arg("repeats", static_cast<long long>(repeats));
    sink.arg("seed", static_cast<long long>(seed));
    const RecordSet rs = load_records(records_path, sink);
    const auto methods = parse_methods(methods_csv);
    const std::vector<double> grid = percentile_grid(grid_step);

    struct Shares {
        std::vector<double> cot_fixed, direct_ok, excess, missed, both;
    };
    std::vector<Shares> per_method(methods.size());

    for (size_t mi = 0; mi < methods.size(); ++mi) {
        for (int rep = 0; rep < repeats; ++rep) {
            const uint64_t rep_seed = Rng::derive(seed, static_cast<uint64_t>(rep));
            const auto [calib, test] = split(rs, calib_fraction, rep_seed);
            const SweepCurve curve = sweep(calib, methods[mi], grid);
            const double acc_all_cot = all_cot_aggregate(calib).accuracy;
            const SelectedThreshold sel = select_threshold(curve, acc_all_cot, epsilon);
            const double tau =
                sel.constraint_met ? sel.threshold : std::numeric_limits<double>::infinity();
            const auto decisions = decide_all(test, methods[mi], tau);
            const OutcomeTally tally = classify_outcomes(test, decisions);
            const auto share = [&](long long c) {
                return static_cast<double>(c) / static_cast<double>(tally.total);
            };
            per_method[mi].cot_fixed.push_back(share(tally.cot_fixed));
            per_method[mi].direct_ok.push_back(share(tally.direct_ok));
            per_method[mi].excess.push_back(share(tally.excess_cot));
            per_method[mi].missed.push_back(share(tally.missed_fix));
            per_method[mi].both.push_back(share(tally.both_fail));
        }
    }

    std::ostringstream out;
    out << "| Category |";
    for (ScoreMethod m : methods) out << ' ' << display_name(m) << " |";
    out << "\n|---|";
    for (size_t i = 0; i < methods.size(); ++i) out << "---|";
    out << '\n';
    const auto line = [&](const char* name, auto member) {
        out << "| " << name << " |";
        for (size_t mi = 0; mi < methods.size(); ++mi) {
            const MeanStd ms = mean_std(per_method[mi].*member);
            out << ' ' << fmt1(ms.mean * 100.0) << "% ± " << fmt1(ms.stddev * 100.0) << " |";
        }
        out << '\n';
    };
    line("CoT Fixed", &Shares::cot_fixed);
    line("Direct", &Shares::direct_ok);
    line("Excess CoT", &Shares::excess);
    line("Missed Fix", &Shares::missed);
    line("Both fail", &Shares::both);
    sink.emit(out_path, out.str());
    sink.write_manifest();
    return 0;
}

// -------------------------------------------------------------- reliability

int cmd_reliability(const std::string& records_path, const std::string& method_name_arg, int bins,
                    const std::string& out_path) {
    ArtifactSink sink;
    sink.command = "reliability";
    sink.arg("records", records_path);
    sink.arg("method", method_name_arg);
    sink.arg("bins", static_cast<long long>(bins));
    const RecordSet rs = load_records(records_path, sink);
    const auto m = method_from_name(method_name_arg);
    if (!m) throw InputError("unknown method '" + method_name_arg + "'");

    std::vector<double> confidences;
    std::vector<bool> correct;
    confidences.reserve(rs.size());
    correct.reserve(rs.size());
    for (const QueryRecord& rec : rs) {
        confidences.push_back(score(rec, *m).normalized);
        correct.push_back(rec.direct.correct);
    }
    const ReliabilityReport report = reliability(confidences, correct, bins);

    std::ostringstream csv;
    csv << "lower,upper,count,mean_confidence,empirical_accuracy\n";
    for (const ReliabilityBin& b : report.bins) {
        csv << fmt(b.lower) << ',' << fmt(b.upper) << ',' << b.count << ','
            << fmt(b.mean_confidence) << ',' << fmt(b.empirical_accuracy) << '\n';
    }
    sink.emit(out_path, csv.str());
    sink.write_manifest();
    std::cout << "n=" << rs.size() << " bins=" << bins << " ece=" << fmt(report.ece)
              << " auroc=" << fmt(report.auroc) << '\n';
    return 0;
}

// ------------------------------------------------------------------ online

int cmd_online(const std::string& records_path, const std::string& method_name_arg,
               double percentile, size_t warmup, int runs, uint64_t seed, bool no_shuffle,
               const std::string& out_path, const std::string& trajectories_path) {
    ArtifactSink sink;
    sink.command = "online";
    sink.arg("records", records_path);
    sink.arg("method", method_name_arg);
    sink.arg("percentile", percentile);
    sink.arg("warmup", static_cast<long long>(warmup));
    sink.arg("runs", static_cast<long long>(runs));
    sink.arg("seed", static_cast<long long>(seed));
    sink.arg("shuffle", no_shuffle ? "false" : "true");
    const RecordSet rs = load_records(records_path, sink);
    const auto m = method_from_name(method_name_arg);
    if (!m) throw InputError("unknown method '" + method_name_arg + "'");

    OnlineOptions opt;
    opt.percentile = percentile;
    opt.warmup = warmup;
    opt.runs = runs;
    opt.seed = seed;
    opt.shuffle = !no_shuffle;
    const OnlineSummary summary = run_online(rs, *m, opt);

    std::ostringstream csv;
    csv << "scope,acc_mean,acc_std,cot_rate_mean,cot_rate_std,avg_tokens_mean,avg_tokens_std\n";
    csv << "all," << fmt(summary.acc_mean) << ',' << fmt(summary.acc_std) << ','
        << fmt(summary.cot_rate_mean) << ',' << fmt(summary.cot_rate_std) << ','
        << fmt(summary.avg_tokens_mean) << ',' << fmt(summary.avg_tokens_std) << '\n';
    csv << "post_warmup," << fmt(summary.post_acc_mean) << ',' << fmt(summary.post_acc_std) << ','
        << fmt(summary.post_cot_rate_mean) << ',' << fmt(summary.post_cot_rate_std) << ','
        << fmt(summary.post_avg_tokens_mean) << ',' << fmt(summary.post_avg_tokens_std) << '\n';
    sink.emit(out_path, csv.str());

    if (!trajectories_path.empty()) {
        std::ostringstream traj;
        traj << "run,t,record_id,threshold,oriented,choice\n";
        for (size_t r = 0; r < summary.runs.size(); ++r) {
            for (const OnlineStep& step : summary.runs[r].trajectory) {
                traj << r << ',' << step.t << ',' << rs[step.record_index].id << ','
                     << fmt(step.threshold) << ',' << fmt(step.oriented) << ','
                     << (step.choice == PathChoice::Direct ? "direct" : "cot") << '\n';
            }
        }
        sink.emit(trajectories_path, traj.str());
    }
    sink.write_manifest();
    return 0;
}

// ------------------------------------------------------------------- synth

int cmd_synth(const SynthesisSpec& spec, const std::string& out_path) {
    ArtifactSink sink;
    sink.command = "synth";
    sink.arg("n", static_cast<long long>(spec.n));
    sink.arg("direct_acc", spec.direct_acc);
    sink.arg("cot_acc", spec.cot_acc);
    sink.arg("auroc", spec.auroc);
    sink.arg("direct_tokens_mean", spec.direct_tokens_mean);
    sink.arg("cot_tokens_mean", spec.cot_tokens_mean);
    sink.arg("seed", static_cast<long long>(spec.seed));
    const RecordSet rs = synthesize(spec);
    std::ostringstream out;
    for (const QueryRecord& rec : rs.records) out << to_json_line(rec) << '\n';
    sink.emit(out_path, out.str());
    sink.write_manifest();
    if (!out_path.empty()) {
        std::cout << "wrote " << rs.size() << " synthetic records to " << out_path << '\n';
    }
    return 0;
}

// ------------------------------------------------------------------- stats

int cmd_stats(const std::string& records_path, const std::string& out_path) {
    ArtifactSink sink;
    sink.command = "stats";
    sink.arg("records", records_path);
    const RecordSet rs = load_records(records_path, sink);

    std::map<std::string, RecordSet> by_dataset;
    for (const QueryRecord& rec : rs) by_dataset[rec.dataset].records.push_back(rec);

    std::ostringstream csv;
    csv << "dataset,n,direct_acc,cot_acc,direct_tokens,cot_tokens\n";
    const auto row = [&](const std::string& name, const RecordSet& sub) {
        const TradeoffPoint d = all_direct_aggregate(sub);
        const TradeoffPoint c = all_cot_aggregate(sub);
        csv << name << ',' << sub.size() << ',' << fmt(d.accuracy) << ',' << fmt(c.accuracy)
            << ',' << fmt(d.avg_tokens) << ',' << fmt(c.avg_tokens) << '\n';
    };
    double macro_d = 0.0, macro_c = 0.0;
    for (const auto& [name, sub] : by_dataset) {
        row(name, sub);
        macro_d += all_direct_aggregate(sub).accuracy;
        macro_c += all_cot_aggregate(sub).accuracy;
    }
    // Micro weights every record equally; macro weights every dataset equally.
    // Both are reported; the other commands use micro.
    row("__micro__", rs);
    const auto k = static_cast<double>(by_dataset.size());
    csv << "__macro__," << rs.size() << ',' << fmt(macro_d / k) << ',' << fmt(macro_c / k)
        << ",,\n";
    sink.emit(out_path, csv.str());
    sink.write_manifest();
    return 0;
}

// ----------------------------------------------------------------- collect

int cmd_collect(const EndpointConfig& cfg, const std::string& questions_path,
                const std::string& passes_csv, bool no_resume, const std::string& out_path) {
    const auto inputs = read_collection_inputs(questions_path);
    CollectOptions opt;
    opt.resume = !no_resume;
    opt.pass_direct = opt.pass_cot = opt.pass_p_true = opt.pass_verbalised = false;
    std::stringstream ss(passes_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string p(trim(item));
        if (p == "direct") opt.pass_direct = true;
        else if (p == "cot") opt.pass_cot = true;
        else if (p == "p_true") opt.pass_p_true = true;
        else if (p == "verbalised") opt.pass_verbalised = true;
        else if (!p.empty()) throw InputError("unknown pass '" + p + "'");
    }
    if (!opt.pass_direct && !opt.pass_cot && !opt.pass_p_true && !opt.pass_verbalised) {
        throw InputError("no passes requested");
    }

    const CollectReport report = collect_records(cfg, inputs, opt, out_path);
    std::cout << "collected=" << report.collected << " skipped=" << report.skipped
              << " failed=" << report.failed << " flags=" << report.flags.size() << '\n';
    std::cout << "note: records carry correct=false placeholders; label answers before "
                 "evaluation\n";
    return report.failed > 0 ? kExitEndpoint : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Confidence-gated chain-of-thought evaluation harness"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string records, out, methods = "perplexity,p_true,margin,verbalised";
    std::string method = "margin";
    double epsilon = 0.01, calib_fraction = 0.10, percentile = 50.0, grid_step = 1.0;
    int repeats = 100, runs = 10, bins = 10;
    size_t warmup = 20;
    uint64_t seed = 1;

    auto* validate = app.add_subcommand("validate", "Check a record file against the schema");
    validate->add_option("records", records, "record file (one JSON record per line)")
        ->required();

    auto* score_cmd = app.add_subcommand("score", "Dump confidence scores as CSV");
    score_cmd->add_option("--records", records)->required();
    score_cmd->add_option("--methods,--method", methods, "comma-separated subset of the four methods");
    score_cmd->add_option("--out", out, "output CSV (stdout if omitted)");

    auto* gate = app.add_subcommand("gate", "Gating utilities");
    gate->require_subcommand(1);
    auto* gate_eval = gate->add_subcommand("eval", "Evaluate one percentile operating point");
    gate_eval->add_option("--records", records)->required();
    gate_eval->add_option("--method", method)->required();
    gate_eval->add_option("--percentile", percentile, "CoT budget percentile in [0,100]");
    gate_eval->add_option("--out", out);

    bool online_sweep = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "Percentile budget sweep with baselines");
    sweep_cmd->add_option("--records", records)->required();
    sweep_cmd->add_option("--methods,--method", methods);
    sweep_cmd->add_option("--grid-step", grid_step, "percentile step (default 1)");
    sweep_cmd->add_flag("--online", online_sweep, "dynamic-percentile streaming sweep");
    sweep_cmd->add_option("--warmup", warmup, "online warm-up length (default 20)");
    sweep_cmd->add_option("--runs", runs, "online shuffled runs (default 10)");
    sweep_cmd->add_option("--seed", seed);
    sweep_cmd->add_option("--out", out, "output prefix; writes <prefix><method>.csv");

    std::string format = "md";
    auto* calibrate = app.add_subcommand(
        "calibrate", "Monte Carlo cross-validated threshold selection (table report)");
    calibrate->add_option("--records", records)->required();
    calibrate->add_option("--methods,--method", methods);
    calibrate->add_option("--epsilon", epsilon, "accuracy tolerance vs all-CoT (default 0.01)");
    calibrate->add_option("--calib-frac", calib_fraction, "calibration fraction (default 0.10)");
    calibrate->add_option("--repeats", repeats, "Monte Carlo repeats (default 100)");
    calibrate->add_option("--seed", seed);
    calibrate->add_option("--grid-step", grid_step);
    calibrate->add_option("--format", format, "md or csv");
    calibrate->add_option("--out", out);

    std::string policy = "gate";
    auto* outcomes = app.add_subcommand("outcomes", "Outcome-category tally for one policy");
    outcomes->add_option("--records", records)->required();
    outcomes->add_option("--policy", policy, "gate, oracle, all-direct or all-cot");
    outcomes->add_option("--method", method);
    outcomes->add_option("--percentile", percentile);
    outcomes->add_option("--out", out);

    auto* outcomes_mc =
        app.add_subcommand("outcomes-mc", "Outcome shares averaged over calibration repeats");
    outcomes_mc->add_option("--records", records)->required();
    outcomes_mc->add_option("--methods,--method", methods);
    outcomes_mc->add_option("--epsilon", epsilon);
    outcomes_mc->add_option("--calib-frac", calib_fraction);
    outcomes_mc->add_option("--repeats", repeats);
    outcomes_mc->add_option("--seed", seed);
    outcomes_mc->add_option("--grid-step", grid_step);
    outcomes_mc->add_option("--out", out);

    auto* reliability_cmd = app.add_subcommand("reliability", "Reliability bins, ECE and AUROC");
    reliability_cmd->add_option("--records", records)->required();
    reliability_cmd->add_option("--method", method)->required();
    reliability_cmd->add_option("--bins", bins, "equal-width bins (default 10)");
    reliability_cmd->add_option("--out", out);

    bool no_shuffle = false;
    std::string trajectories;
    auto* online_cmd = app.add_subcommand("online", "Streaming dynamic-percentile gating");
    online_cmd->add_option("--records", records)->required();
    online_cmd->add_option("--method", method)->required();
    online_cmd->add_option("--percentile", percentile);
    online_cmd->add_option("--warmup", warmup);
    online_cmd->add_option("--runs", runs);
    online_cmd->add_option("--seed", seed);
    online_cmd->add_flag("--no-shuffle", no_shuffle, "keep the stored record order");
    online_cmd->add_option("--trajectories", trajectories, "per-step trajectory CSV");
    online_cmd->add_option("--out", out);

    SynthesisSpec synth_spec;
    auto* synth = app.add_subcommand("synth", "Generate deterministic synthetic records");
    synth->add_option("--n", synth_spec.n);
    synth->add_option("--direct-acc", synth_spec.direct_acc);
    synth->add_option("--cot-acc", synth_spec.cot_acc);
    synth->add_option("--auroc", synth_spec.auroc, "signal discrimination in [0.5,1]");
    synth->add_option("--direct-tokens", synth_spec.direct_tokens_mean);
    synth->add_option("--cot-tokens", synth_spec.cot_tokens_mean);
    synth->add_option("--seed", synth_spec.seed);
    synth->add_option("--out", out);

    auto* stats = app.add_subcommand("stats", "Per-dataset aggregates, micro and macro averages");
    stats->add_option("--records", records)->required();
    stats->add_option("--out", out);

    EndpointConfig cfg;
    std::string questions, passes = "direct,cot,p_true,verbalised";
    bool no_resume = false;
    auto* collect = app.add_subcommand("collect", "Drive an OpenAI-compatible endpoint");
    collect->add_option("--questions", questions, "JSONL with id/dataset/question")->required();
    collect->add_option("--out", out, "record output file")->required();
    collect->add_option("--base-url", cfg.base_url);
    collect->add_option("--model", cfg.model)->required();
    collect->add_option("--api-key-env", cfg.api_key_env);
    collect->add_option("--temperature", cfg.temperature);
    collect->add_option("--top-p", cfg.top_p);
    collect->add_option("--max-thinking-tokens", cfg.max_thinking_tokens,
                        "CoT budget; the answer is forced past it (default 7000)");
    collect->add_option("--max-answer-tokens", cfg.max_answer_tokens);
    collect->add_option("--timeout", cfg.request_timeout_s);
    collect->add_option("--parallel", cfg.max_parallel);
    collect->add_option("--retries", cfg.max_retries);
    collect->add_option("--top-logprobs", cfg.top_logprobs);
    collect->add_option("--direct-extra-body", cfg.direct_extra_body,
                        "JSON merged into direct-pass requests");
    collect->add_option("--cot-extra-body", cfg.cot_extra_body,
                        "JSON merged into CoT requests, e.g. {\"reasoning_effort\":\"high\"}");
    collect->add_option("--passes", passes, "subset of direct,cot,p_true,verbalised");
    collect->add_flag("--no-resume", no_resume, "re-query ids already in the output file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return cmd_validate(records);
        if (*score_cmd) return cmd_score(records, methods, out);
        if (*gate_eval) return cmd_gate_eval(records, method, percentile, out);
        if (*sweep_cmd) {
            return cmd_sweep(records, methods, grid_step, online_sweep, warmup, runs, seed, out);
        }
        if (*calibrate) {
            return cmd_calibrate(records, methods, epsilon, calib_fraction, repeats, seed,
                                 grid_step, format, out);
        }
        if (*outcomes) return cmd_outcomes(records, policy, method, percentile, out);
        if (*outcomes_mc) {
            return cmd_outcomes_mc(records, methods, epsilon, calib_fraction, repeats, seed,
                                   grid_step, out);
        }
        if (*reliability_cmd) return cmd_reliability(records, method, bins, out);
        if (*online_cmd) {
            return cmd_online(records, method, percentile, warmup, runs, seed, no_shuffle, out,
                              trajectories);
        }
        if (*synth) return cmd_synth(synth_spec, out);
        if (*stats) return cmd_stats(records, out);
        if (*collect) return cmd_collect(cfg, questions, passes, no_resume, out);
    } catch (const EndpointError& e) {
        std::cerr << "endpoint error: " << e.what() << '\n';
        return kExitEndpoint;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
