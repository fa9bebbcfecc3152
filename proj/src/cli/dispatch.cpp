#include "tutoreval/cli/dispatch.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tutoreval/autotune/autotune.hpp"
#include "tutoreval/cli/analysis.hpp"
#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"
#include "tutoreval/discourse/validate.hpp"
#include "tutoreval/harness/run.hpp"
#include "tutoreval/metrics/metrics.hpp"

namespace tutoreval::cli {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

std::string join(const std::vector<std::string>& items, const char* sep = ",") {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
    return out;
}

/// Options shared by every command. Precedence: flag, then environment, then YAML.
struct Common {
    std::string config;
    std::string data_dir;
    std::size_t workers = 0;
    std::string judge;
    mutable std::string resolved_config;

    harness::ExperimentConfig load() const {
        const auto path = !config.empty() ? config : env("TUTOREVAL_CONFIG").value_or("config/harness.yaml");
        resolved_config = path;
        auto cfg = harness::ExperimentConfig::load(path);
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        else if (auto d = env("TUTOREVAL_DATA_DIR")) cfg.data_dir = *d;
        if (workers > 0) cfg.workers = workers;
        else if (auto w = env("TUTOREVAL_WORKERS")) {
            try {
                cfg.workers = std::stoul(*w);
            } catch (const std::exception&) {
                throw ConfigError("TUTOREVAL_WORKERS must be a positive integer");
            }
        }
        if (cfg.workers == 0) throw ConfigError("workers must be positive");
        return cfg;
    }

    std::optional<std::string> judge_override() const {
        if (!judge.empty()) return judge;
        return env("TUTOREVAL_JUDGE");
    }

    /// Flags that reproduce the resolved configuration.
    std::string echo(const harness::ExperimentConfig& cfg) const {
        std::ostringstream out;
        out << " --config " << resolved_config << " --data-dir " << cfg.data_dir.string()
            << " --workers " << cfg.workers;
        return out.str();
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Harness YAML (default $TUTOREVAL_CONFIG or config/harness.yaml)");
    cmd->add_option("--data-dir", c.data_dir, "Directory holding evaluations.db and logs/");
    cmd->add_option("--workers", c.workers, "Parallel dialogue or scoring workers");
}

std::vector<std::string> split_csv(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::stringstream ss(item);
        for (std::string part; std::getline(ss, part, ',');) {
            if (!trim(part).empty()) out.push_back(trim(part));
        }
    }
    return out;
}

std::string current_epoch(const harness::ExperimentConfig& cfg) { return cfg.rubrics.tutor.resolve().version; }

dialogue::BoundProvider bind_spec(const harness::ExperimentConfig& cfg, const std::string& spec, backend::RoleTag role) {
    const auto slash = spec.find('/');
    const auto provider = spec.substr(0, slash);
    const auto model = slash == std::string::npos ? std::string() : spec.substr(slash + 1);
    return {cfg.providers.get(provider), model, backend::default_temperature(role)};
}

void write_tables(const std::vector<Table>& tables, const std::string& out_dir, std::ostream& out, bool csv) {
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (const auto& t : tables) {
            write_file_atomic(fs::path(out_dir) / (t.name + ".csv"), t.to_csv());
            out << "wrote " << (fs::path(out_dir) / (t.name + ".csv")).string() << "\n";
        }
        return;
    }
    for (const auto& t : tables) {
        if (csv) out << "# " << t.name << "\n" << t.to_csv() << "\n";
        else out << t.to_text() << "\n";
    }
}

struct LedgerArgs {
    std::string ledger_config;
    std::vector<std::string> ledgers;
};

void add_ledger_flags(CLI::App* cmd, LedgerArgs& a) {
    cmd->add_option("--ledger-config", a.ledger_config, "Ledger configuration YAML");
    cmd->add_option("--ledger", a.ledgers, "Claim files (override the configured list)");
}

discourse::LedgerConfig resolve_ledger_config(const LedgerArgs& a, const harness::ExperimentConfig* cfg) {
    discourse::LedgerConfig lc;
    if (!a.ledger_config.empty()) lc = discourse::LedgerConfig::load(a.ledger_config);
    else if (cfg && cfg->ledger_config) lc = discourse::LedgerConfig::load(*cfg->ledger_config);
    else if (a.ledgers.empty()) throw ConfigError("no ledger configured; pass --ledger-config or --ledger");
    if (!a.ledgers.empty()) {
        lc.ledgers.clear();
        for (const auto& p : a.ledgers) lc.ledgers.emplace_back(p);
    }
    return lc;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tutoring dialogue evaluation harness", "tutoreval"};
    app.require_subcommand(1);
    app.fallthrough(false);

    Common common;

    // run
    auto* run = app.add_subcommand("run", "Generate dialogues for cells x scenarios x replications");
    add_common(run, common);
    std::vector<std::string> profiles, scenarios;
    int runs = 1;
    std::optional<int> max_tokens;
    std::optional<std::string> ego_model, superego_model;
    run->add_option("--profiles", profiles, "Cell ids (comma separated or repeated)")->required();
    run->add_option("--scenarios", scenarios, "Scenario ids or scenario-set aliases")->required();
    run->add_option("--runs", runs, "Replications per cell and scenario")->check(CLI::PositiveNumber);
    run->add_option("--max-tokens", max_tokens, "Override every cell's max_tokens")->check(CLI::PositiveNumber);
    run->add_option("--ego-model", ego_model, "Override the tutor ego model");
    run->add_option("--superego-model", superego_model, "Override the tutor superego model");

    // resume
    auto* resume = app.add_subcommand("resume", "Finish the missing jobs of a run");
    add_common(resume, common);
    std::string run_id;
    resume->add_option("run_id", run_id)->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score a run's dialogues");
    add_common(evaluate, common);
    evaluate->add_option("run_id", run_id)->required();
    evaluate->add_option("--judge", common.judge, "Judge as <provider>[/<model>]");

    // rejudge
    auto* rejudge = app.add_subcommand("rejudge", "Re-score a run's rows under a new judge");
    add_common(rejudge, common);
    std::string epoch;
    rejudge->add_option("run_id", run_id)->required();
    rejudge->add_option("--judge", common.judge, "Judge as <provider>[/<model>]")->required();
    rejudge->add_option("--epoch", epoch, "Rubric version of the rows to re-score (default: current)");

    // report
    auto* report = app.add_subcommand("report", "Run status and per-cell means");
    add_common(report, common);
    std::string out_dir;
    bool csv = false;
    report->add_option("run_id", run_id)->required();
    report->add_option("--epoch", epoch, "Rubric version (default: current)");
    report->add_option("--out", out_dir, "Write CSV tables to this directory");
    report->add_flag("--csv", csv, "Print CSV instead of aligned text");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Factorial statistics for a run");
    add_common(analyze, common);
    std::optional<std::string> by;
    analyze->add_option("run_id", run_id)->required();
    analyze->add_option("--epoch", epoch, "Rubric version")->required();
    analyze->add_option("--by", by, "Split every table by this column (e.g. judge_model)");
    analyze->add_option("--out", out_dir, "Write CSV tables to this directory");

    // extract-critiques
    auto* extract = app.add_subcommand("extract-critiques", "Superego critiques of a run as JSONL");
    add_common(extract, common);
    std::string out_file, lexicon_path;
    std::vector<std::string> cells;
    extract->add_option("--run", run_id, "Run id")->required();
    extract->add_option("--out", out_file, "Output JSONL")->required();
    extract->add_option("--cells", cells, "Restrict to these cell ids");
    extract->add_option("--lexicon", lexicon_path, "Keyword lexicon YAML");

    // classify-critiques
    auto* classify = app.add_subcommand("classify-critiques", "Label critiques with the LLM classifier");
    add_common(classify, common);
    std::string in_file, classifier;
    classify->add_option("--in", in_file, "Input JSONL from extract-critiques")->required();
    classify->add_option("--out", out_file, "Output JSONL")->required();
    classify->add_option("--classifier", classifier, "Classifier as <provider>[/<model>] (default: the judge)");

    // validate
    auto* validate = app.add_subcommand("validate", "Validate the claim ledger against the data");
    add_common(validate, common);
    LedgerArgs ledger_args;
    bool accept = false, json_out = false;
    std::string graph_out;
    add_ledger_flags(validate, ledger_args);
    validate->add_flag("--accept", accept, "Store current fingerprints as the accepted snapshot");
    validate->add_option("--graph", graph_out, "Also write the claim DAG as DOT");
    validate->add_flag("--json", json_out, "Print the report as JSON");

    // graph
    auto* graph = app.add_subcommand("graph", "Print the claim DAG as DOT");
    add_common(graph, common);
    add_ledger_flags(graph, ledger_args);
    graph->add_option("--out", out_file, "Write to a file instead of stdout");

    // autotune
    auto* autotune = app.add_subcommand("autotune", "Hill-climb a cell's prompts on one scenario");
    add_common(autotune, common);
    std::string cell_id, scenario_id, recommender;
    std::vector<std::string> target_dims;
    int iterations = 5, replications = 1;
    std::optional<std::string> guidance;
    autotune->add_option("--cell", cell_id)->required();
    autotune->add_option("--scenario", scenario_id)->required();
    autotune->add_option("--target-dims", target_dims, "Restrict the objective to these tutor dimensions");
    autotune->add_option("--iterations", iterations)->check(CLI::NonNegativeNumber);
    autotune->add_option("--replications", replications, "Dialogues per benchmark")->check(CLI::PositiveNumber);
    autotune->add_option("--guidance", guidance, "Operator guidance passed to the recommender");
    autotune->add_option("--recommender", recommender, "Recommender as <provider>[/<model>]");
    autotune->add_option("--judge", common.judge, "Judge as <provider>[/<model>]");

    std::vector<const char*> argv{"tutoreval"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (run->parsed()) {
            const auto cfg = common.load();
            harness::RunOverrides overrides{ego_model, superego_model, max_tokens};
            const auto profile_ids = split_csv(profiles);
            const auto scenario_ids = split_csv(scenarios);
            std::ostringstream echo;
            echo << "echo: tutoreval run" << common.echo(cfg) << " --profiles " << join(profile_ids) << " --scenarios "
                 << join(scenario_ids) << " --runs " << runs;
            if (max_tokens) echo << " --max-tokens " << *max_tokens;
            if (ego_model) echo << " --ego-model " << *ego_model;
            if (superego_model) echo << " --superego-model " << *superego_model;
            out << echo.str() << "\n";
            const auto manifest = harness::plan_run(cfg, profile_ids, scenario_ids, runs, overrides);
            out << "run_id: " << manifest.run_id << "\n" << std::flush;
            harness::ResultStore store(cfg.store_path());
            const harness::LogTree logs(cfg.log_root());
            const auto s = harness::execute_run(cfg, manifest, store, logs);
            out << "dialogues: " << s.executed << " executed, " << s.skipped << " skipped, " << s.failed << " failed\n";
            return kExitOk;
        }
        if (resume->parsed()) {
            const auto cfg = common.load();
            out << "echo: tutoreval resume" << common.echo(cfg) << " " << run_id << "\n";
            harness::ResultStore store(cfg.store_path());
            const auto s = harness::resume_run(cfg, run_id, store, harness::LogTree(cfg.log_root()));
            out << "run_id: " << s.run_id << "\n";
            out << "dialogues: " << s.executed << " executed, " << s.skipped << " skipped, " << s.failed << " failed\n";
            return kExitOk;
        }
        if (evaluate->parsed() || rejudge->parsed()) {
            const auto cfg = common.load();
            const auto judge = cfg.judge_binding(common.judge_override());
            harness::ResultStore store(cfg.store_path());
            const harness::LogTree logs(cfg.log_root());
            harness::EvaluateSummary s;
            if (evaluate->parsed()) {
                out << "echo: tutoreval evaluate" << common.echo(cfg) << " " << run_id << " --judge " << judge.key()
                    << "\n";
                s = harness::evaluate_run(run_id, judge, cfg.rubrics, store, logs, cfg.workers);
            } else {
                const auto source_epoch = epoch.empty() ? current_epoch(cfg) : epoch;
                out << "echo: tutoreval rejudge" << common.echo(cfg) << " " << run_id << " --judge " << judge.key()
                    << " --epoch " << source_epoch << "\n";
                s = harness::rejudge_run(run_id, source_epoch, judge, cfg.rubrics, store, logs, cfg.workers);
            }
            out << "run_id: " << s.run_id << "\njudge_model: " << s.judge_model << "\n";
            out << "rows: " << s.scored << " scored, " << s.skipped << " skipped, " << s.failed << " failed\n";
            return kExitOk;
        }
        if (report->parsed()) {
            const auto cfg = common.load();
            harness::ResultStore store(cfg.store_path());
            write_tables(report_run(store, run_id, epoch.empty() ? current_epoch(cfg) : epoch), out_dir, out, csv);
            return kExitOk;
        }
        if (analyze->parsed()) {
            const auto cfg = common.load();
            harness::ResultStore store(cfg.store_path());
            write_tables(analyze_run(store, run_id, epoch, by), out_dir, out, true);
            return kExitOk;
        }
        if (extract->parsed()) {
            const auto cfg = common.load();
            const auto lexicon = !lexicon_path.empty() ? metrics::KeywordLexicon::load(lexicon_path)
                                 : cfg.lexicon        ? metrics::KeywordLexicon::load(*cfg.lexicon)
                                                      : metrics::KeywordLexicon::defaults();
            metrics::CritiqueFilter filter;
            filter.dialogue_prefix = run_id + "-";
            for (const auto& c : split_csv(cells)) filter.cell_ids.insert(c);
            const auto records =
                metrics::extract_critiques(harness::LogTree(cfg.log_root()).dir(), filter, lexicon);
            metrics::write_jsonl(out_file, records);
            const auto summary = metrics::summarize_critiques(records);
            out << "run_id: " << run_id << "\n";
            out << "critiques: " << records.size() << " written to " << out_file << "\n";
            out << "approval_rate: " << format_number(summary.approval_rate * 100.0, 1) << "%\n";
            return kExitOk;
        }
        if (classify->parsed()) {
            const auto cfg = common.load();
            const auto binding = !classifier.empty() ? bind_spec(cfg, classifier, backend::RoleTag::judge)
                                                     : cfg.judge_binding(common.judge_override()).provider;
            const auto records = metrics::read_jsonl(in_file);
            std::map<std::string, std::size_t> counts;
            std::string lines;
            for (const auto& r : records) {
                const auto label = metrics::classify_llm(r, binding);
                ++counts[label.label];
                auto j = r.to_json();
                j["llm_label"] = label.label;
                j["llm_confidence"] = label.confidence;
                lines += j.dump() + "\n";
            }
            write_file_atomic(out_file, lines);
            out << "classified: " << records.size() << " written to " << out_file << "\n";
            for (const auto& [label, n] : counts) out << "  " << label << ": " << n << "\n";
            return kExitOk;
        }
        if (validate->parsed() || graph->parsed()) {
            std::optional<harness::ExperimentConfig> cfg;
            // The harness config is optional for ledgers that touch no stored data.
            const auto config_path = !common.config.empty() ? common.config : env("TUTOREVAL_CONFIG").value_or("config/harness.yaml");
            if (fs::exists(config_path)) {
                Common c = common;
                c.config = config_path;
                cfg = c.load();
            }
            const auto lc = resolve_ledger_config(ledger_args, cfg ? &*cfg : nullptr);
            const auto ledger = discourse::load_ledger(lc.ledgers);
            if (graph->parsed()) {
                const auto dot = discourse::export_graph(ledger);
                if (out_file.empty()) out << dot;
                else write_file_atomic(out_file, dot);
                return kExitOk;
            }
            discourse::DataSources sources;
            std::optional<harness::ResultStore> store;
            if (cfg && fs::exists(cfg->store_path())) {
                store.emplace(cfg->store_path());
                sources.store = &*store;
            }
            if (cfg) sources.logs.emplace(cfg->log_root());
            sources.manifest = lc.manifest;
            sources.source_roots = lc.source_roots;
            sources.critiques = lc.critiques;
            sources.epoch = lc.epoch;
            sources.paper_text = lc.read_paper_text();
            discourse::SnapshotStore snapshots(lc.snapshot);
            discourse::ValidateOptions options;
            options.accept = accept;
            options.workers = cfg ? cfg->workers : 1;
            const auto rep = discourse::validate_all(ledger, sources, snapshots, options);
            if (!graph_out.empty()) write_file_atomic(graph_out, discourse::export_graph(ledger));
            if (json_out) {
                auto j = rep.to_json();
                j["symmetry"] = nlohmann::json::array();
                for (const auto& v : discourse::check_symmetry(ledger, rep.results, lc.symmetry, sources.paper_text)) {
                    j["symmetry"].push_back({{"rule", v.rule}, {"claim_id", v.claim_id}, {"message", v.message}});
                }
                out << j.dump(2) << "\n";
            } else {
                for (const auto& r : rep.results) {
                    out << discourse::to_string(r.status) << "  " << r.claim_id;
                    if (!r.extracted_value.is_null()) out << "  value=" << r.extracted_value.dump();
                    if (r.blocked_by) out << "  blocked_by=" << *r.blocked_by;
                    if (r.stale) out << "  [stale]";
                    if (r.orphaned) out << "  [orphaned]";
                    if (!r.message.empty() && r.status != discourse::ClaimStatus::pass) out << "  (" << r.message << ")";
                    out << "\n";
                }
                for (const auto& v : discourse::check_symmetry(ledger, rep.results, lc.symmetry, sources.paper_text)) {
                    out << "symmetry  " << v.rule << "  " << (v.claim_id.empty() ? "-" : v.claim_id) << "  "
                        << v.message << "\n";
                }
                if (accept) out << "snapshot: " << lc.snapshot.string() << " updated\n";
                out << rep.summary_line() << "\n";
            }
            return rep.ok() ? kExitOk : kExitFailure;
        }
        if (autotune->parsed()) {
            const auto cfg = common.load();
            autotune::TuneConfig tc;
            tc.bench.cell = cfg.cell(cell_id);
            tc.bench.scenario = cfg.scenario(scenario_id);
            tc.bench.agents = harness::bind_agents(tc.bench.cell, cfg.providers, {});
            tc.bench.judge = cfg.judge_binding(common.judge_override());
            tc.bench.rubrics = cfg.rubrics;
            tc.bench.templates = cfg.templates;
            tc.bench.target_dims = split_csv(target_dims);
            tc.bench.workers = cfg.workers;
            for (const auto& [role, file] : tc.bench.cell.prompt_bindings) {
                tc.prompts[role] = read_file(resolve_path(cfg.config_dir, file));
            }
            tc.replications = replications;
            tc.guidance = guidance;
            tc.session_dir = cfg.data_dir / "autotune";
            std::string spec = !recommender.empty() ? recommender
                                                    : env("TUTOREVAL_RECOMMENDER").value_or(cfg.recommender.value_or(""));
            if (spec.empty()) throw ConfigError("no recommender configured; pass --recommender");
            const auto rec = bind_spec(cfg, spec, backend::RoleTag::recommender);
            out << "echo: tutoreval autotune" << common.echo(cfg) << " --cell " << cell_id << " --scenario "
                << scenario_id << " --iterations " << iterations << " --replications " << replications
                << " --recommender " << spec << " --judge " << tc.bench.judge.key();
            if (!tc.bench.target_dims.empty()) out << " --target-dims " << join(tc.bench.target_dims);
            out << "\n";
            const auto outcome = autotune::tune(tc, rec, iterations);
            const auto& s = outcome.session;
            out << "session_id: " << s.session_id << "\n";
            out << "baseline: " << format_number(s.baseline_score, 2) << "\n";
            for (const auto& it : s.iterations) {
                out << "iteration " << it.index << ": "
                    << (it.benchmark_score ? format_number(*it.benchmark_score, 2) : std::string("NA")) << " "
                    << (it.accepted ? "accepted" : "reverted") << " (" << it.reason << ")\n";
            }
            out << "best: " << format_number(s.best_score, 2) << " snapshot " << s.best_hash << "\n";
            out << "journal: " << (tc.session_dir / (s.session_id + ".json")).string() << "\n";
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: category=" << e.category() << " message=" << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: category=Internal message=" << e.what() << "\n";
        return kExitFailure;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace tutoreval::cli
