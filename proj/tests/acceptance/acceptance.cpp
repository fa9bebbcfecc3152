// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Each criterion also has a wall-clock budget that counts toward its verdict.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "oracles/dag_oracle.hpp"
#include "oracles/scoring_oracle.hpp"
#include "oracles/stats_oracle.hpp"
#include "support/autotune_fixture.hpp"
#include "support/fixtures.hpp"
#include "support/ledger_fixture.hpp"
#include "support/support.hpp"
#include "support/workspace.hpp"
#include "tutoreval/autotune/autotune.hpp"
#include "tutoreval/cli/analysis.hpp"
#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"
#include "tutoreval/discourse/validate.hpp"
#include "tutoreval/harness/run.hpp"
#include "tutoreval/metrics/metrics.hpp"
#include "tutoreval/scoring/judge.hpp"
#include "tutoreval/stats/stats.hpp"

using namespace tutoreval;
using namespace tutoreval::testing;
namespace fs = std::filesystem;

namespace {

/// Collects expectations for one criterion; keeps the first few failures.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        ++count_;
        if (ok) return;
        ++failed_;
        if (messages_.size() < 3) messages_.push_back(what);
    }
    void near(double actual, double expected, double tol, const std::string& what) {
        std::ostringstream s;
        s << what << ": got " << std::setprecision(12) << actual << ", want " << expected << " +/- " << tol;
        expect(std::fabs(actual - expected) <= tol, s.str());
    }
    void rel(double actual, double expected, double tol, const std::string& what) {
        std::ostringstream s;
        s << what << ": got " << std::setprecision(15) << actual << ", oracle " << expected;
        expect(oracle::close_rel(actual, expected, tol), s.str());
    }

    std::size_t count() const { return count_; }
    std::size_t failed() const { return failed_; }
    const std::vector<std::string>& messages() const { return messages_; }

private:
    std::size_t count_ = 0;
    std::size_t failed_ = 0;
    std::vector<std::string> messages_;
};

struct Criterion {
    int number;
    std::string name;
    double budget_seconds;
    std::function<void(Checks&)> body;
};

std::vector<scoring::DimensionScore> uniform(const scoring::Rubric& rubric, int score) {
    std::vector<scoring::DimensionScore> out;
    for (const auto& d : rubric.dimensions) out.push_back({d.name, score, ""});
    return out;
}

std::vector<double> draw(std::mt19937& rng, std::size_t n, double mu, double sigma) {
    std::normal_distribution<double> dist(mu, sigma);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

// 1 ------------------------------------------------------------------------

void scoring_formula(Checks& c) {
    using namespace scoring;
    for (const auto& rubric : {tutor_rubric_v22(), learner_rubric_v22(), holistic_rubric_v22(),
                               deliberation_rubric_v22(), tutor_rubric_v10()}) {
        c.expect(overall_score(uniform(rubric, 3), rubric) == 50.0, rubric.version + " all-3s is not exactly 50");
        c.expect(overall_score(uniform(rubric, 5), rubric) == 100.0, rubric.version + " all-5s is not exactly 100");
        c.expect(overall_score(uniform(rubric, 1), rubric) == 0.0, rubric.version + " all-1s is not exactly 0");
    }
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> weight(0.05, 40.0), scale(1e-3, 1e3);
    std::uniform_int_distribution<int> score(1, 5);
    const auto base = tutor_rubric_v22();
    for (int trial = 0; trial < 100; ++trial) {
        Rubric rubric = base, scaled = base;
        const double k = scale(rng);
        std::vector<int> raw;
        std::vector<double> weights;
        std::vector<DimensionScore> scores;
        for (std::size_t i = 0; i < base.dimensions.size(); ++i) {
            const double w = weight(rng);
            rubric.dimensions[i].weight = w;
            scaled.dimensions[i].weight = w * k;
            raw.push_back(score(rng));
            weights.push_back(w);
            scores.push_back({base.dimensions[i].name, raw.back(), ""});
        }
        const double got = overall_score(scores, rubric);
        c.rel(got, oracle::overall(raw, weights), 1e-12, "weighted score vs definition");
        c.rel(overall_score(scores, scaled), got, 1e-12, "weight scaling changed the score");
        for (int s = 1; s <= 5; ++s) {
            c.near(overall_score(uniform(rubric, s), rubric), (s - 1) * 25.0, 1e-9, "anchor under random weights");
        }
    }
}

// 2 ------------------------------------------------------------------------

void interaction_arithmetic(Checks& c) {
    struct Case {
        const char* model;
        stats::CellMeans means;
        double interaction;
        double deficit_pct;
    };
    const Case cases[] = {
        {"DeepSeek", {22.0, 31.0, 50.0, 50.2}, -8.8, 15.0},
        {"Haiku", {52.9, 67.9, 80.2, 79.5}, -15.7, 16.0},
        {"Gemini", {22.4, 49.3, 57.7, 70.0}, -14.6, 17.0},
    };
    for (const auto& k : cases) {
        const auto d = stats::interaction_decompose(k.means);
        c.near(d.interaction, k.interaction, 0.05, std::string(k.model) + " interaction");
        c.near(d.additivity_deficit, -k.interaction, 0.05, std::string(k.model) + " additivity deficit");
        // Reference percentages are whole numbers.
        c.expect(std::round(d.deficit_pct) == k.deficit_pct,
                 std::string(k.model) + " deficit " + std::to_string(d.deficit_pct) + "% does not round to " +
                     std::to_string(static_cast<int>(k.deficit_pct)) + "%");
    }
}

// 3 ------------------------------------------------------------------------

void approval_rate(Checks& c) {
    std::vector<metrics::CritiqueRecord> records;
    for (const auto& log : approval_fixture(360, 48)) {
        const auto part = metrics::extract_critiques(log, metrics::KeywordLexicon::defaults());
        records.insert(records.end(), part.begin(), part.end());
    }
    const auto summary = metrics::summarize_critiques(records);
    c.expect(summary.total == 360, "fixture should hold 360 reviews, found " + std::to_string(summary.total));
    c.expect(summary.approved == 48, "fixture should hold 48 approvals, found " + std::to_string(summary.approved));
    c.near(summary.approval_rate * 100.0, 13.3, 0.1, "approval rate (%)");
}

// 4 ------------------------------------------------------------------------

void statistics_oracles(Checks& c) {
    std::mt19937 rng(4);
    constexpr double kTol = 1e-8;
    for (int i = 0; i < 100; ++i) {
        const auto a = draw(rng, 4 + i % 20, 1.0, 2.0);
        const auto b = draw(rng, 3 + i % 13, 0.0, 1.0 + i % 3);
        c.rel(stats::cohens_d(a, b).d, oracle::cohens_d(a, b), kTol, "cohens_d");
        const auto t = stats::welch_t(a, b);
        const auto o = oracle::welch(a, b);
        c.rel(t.t, o.t, kTol, "welch t");
        c.rel(t.df, o.df, kTol, "welch df");
        c.rel(t.p, o.p, kTol, "welch p");
    }
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 4 + i % 30;
        const auto x = draw(rng, n, 0.0, 1.0);
        const auto e = draw(rng, n, 0.0, 0.7);
        std::vector<double> y(n);
        std::vector<std::pair<double, double>> points;
        for (std::size_t k = 0; k < n; ++k) {
            y[k] = 0.4 * x[k] + e[k];
            points.emplace_back(x[k], y[k]);
        }
        c.rel(stats::pearson_r(x, y).r, oracle::pearson(x, y), kTol, "pearson_r");
        const auto fit = stats::ols_slope(points);
        const auto line = oracle::ols(x, y);
        c.rel(fit.slope, line.slope, kTol, "ols slope");
        c.rel(fit.intercept, line.intercept, kTol, "ols intercept");
    }
    const std::vector<std::string> effects{"A", "B", "C", "A:B", "A:C", "B:C", "A:B:C"};
    for (int trial = 0; trial < 100; ++trial) {
        std::array<std::array<std::array<std::vector<double>, 2>, 2>, 2> cells;
        std::vector<stats::AnovaObservation> rows;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int cc = 0; cc < 2; ++cc) {
                    cells[a][b][cc] = draw(rng, 5, 50.0 + 7.0 * a + 2.0 * a * b + (trial % 4) * cc, 5.0);
                    for (double y : cells[a][b][cc]) rows.push_back({{a, b, cc}, y});
                }
        const auto got = stats::anova_factorial(rows, {"A", "B", "C"});
        const auto o = oracle::anova_balanced(cells);
        c.rel(got.ss_residual, o.ss_residual, kTol, "anova residual SS");
        for (std::size_t k = 0; k < effects.size(); ++k) {
            const auto& e = got.effect(effects[k]);
            c.rel(e.ss, o.ss[k], kTol, "anova SS " + effects[k]);
            c.rel(e.f, o.f[k], kTol, "anova F " + effects[k]);
            c.rel(e.p, o.p[k], kTol, "anova p " + effects[k]);
        }
    }
    std::uniform_int_distribution<int> count(1, 80);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::vector<double>> table(2 + i % 3, std::vector<double>(2 + i % 4));
        for (auto& row : table)
            for (auto& v : row) v = count(rng);
        const auto got = stats::chi_square(table);
        const auto o = oracle::chi_square(table);
        c.rel(got.chi2, o.chi2, kTol, "chi-square statistic");
        c.rel(got.p, o.p, kTol, "chi-square p");
    }
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 12 + i % 50;
        const auto x = draw(rng, n, 0.0, 1.0);
        const auto e1 = draw(rng, n, 0.0, 1.0);
        const auto e2 = draw(rng, n, 0.0, 1.0);
        std::vector<double> m(n), y(n);
        for (std::size_t k = 0; k < n; ++k) {
            m[k] = 0.5 * x[k] + e1[k];
            y[k] = 0.3 * x[k] + 0.6 * m[k] + e2[k];
        }
        const auto got = stats::mediation(x, m, y);
        const auto o = oracle::mediation(x, m, y);
        c.rel(got.c.estimate, o.c, kTol, "mediation c");
        c.rel(got.a.estimate, o.a, kTol, "mediation a");
        c.rel(got.b.estimate, o.b, kTol, "mediation b");
        c.rel(got.c_prime.estimate, o.c_prime, kTol, "mediation c'");
        c.rel(got.b.se, o.b_se, kTol, "mediation b se");
        c.near(got.c.estimate, got.c_prime.estimate + got.a.estimate * got.b.estimate, 1e-9, "c = c' + a*b");
    }
}

// 5 ------------------------------------------------------------------------

const char* kRejectingSuperego = R"(
rules:
  - role: tutor_superego
    text: '{"verdict": "rejected", "confidence": 0.6, "feedback": "Ask, do not tell.", "intervention": "revise"}'
tutor_ego:*:*: Here is the answer.
default: x
)";

void trace_shape(Checks& c) {
    using harness::LearnerArch;
    using harness::Recognition;
    using harness::TutorArch;
    std::vector<harness::CellConfig> single_cells;
    for (auto r : {Recognition::base, Recognition::recog}) {
        for (auto l : {LearnerArch::unified, LearnerArch::ego_superego}) {
            single_cells.push_back(make_cell(r, TutorArch::single, l));
        }
    }
    std::size_t superego_entries = 0, dialogues = 0;
    for (int i = 0; i < 200; ++i) {
        const auto& cell = single_cells[static_cast<std::size_t>(i) % single_cells.size()];
        const auto log = scripted_dialogue(cell, 1 + i % 4, "single-" + std::to_string(i), kRejectingSuperego);
        c.expect(!log.failed, "single-agent dialogue failed: " + log.error);
        ++dialogues;
        for (const auto& e : log.trace) {
            if (e.agent == dialogue::Agent::superego || e.from_agent == dialogue::Agent::superego ||
                e.to_agent == dialogue::Agent::superego) {
                ++superego_entries;
            }
        }
    }
    c.expect(dialogues == 200, "expected 200 dialogues");
    c.expect(superego_entries == 0, std::to_string(superego_entries) + " superego entries in single-agent traces");

    const auto cell = make_cell(Recognition::base, TutorArch::multi, LearnerArch::unified, 2);
    const auto log = scripted_dialogue(cell, 1, "multi", kRejectingSuperego);
    std::size_t calls = 0, reviews = 0, revisions = 0;
    for (const auto& e : log.trace) {
        if (e.turn != 0 || !e.metrics) continue;
        if (e.agent == dialogue::Agent::ego || e.agent == dialogue::Agent::superego) ++calls;
        if (e.action == dialogue::Action::review) ++reviews;
        if (e.action == dialogue::Action::respond) ++revisions;
    }
    c.expect(calls == 5, "two rejections took " + std::to_string(calls) + " generative calls, want 5");
    c.expect(reviews == 2 && revisions == 2, "want 2 reviews and 2 revisions");
}

// 6 ------------------------------------------------------------------------

void learner_privacy(Checks& c) {
    std::size_t audited = 0;
    int index = 0;
    for (const auto& base_cell : harness::factorial_cells("tutor", "learner")) {
        for (int turns : {2, 4}) {
            auto cell = base_cell;
            auto tutor = std::make_shared<RecordingProvider>(scripted("tutor", kTutorPlaybook));
            auto judge = std::make_shared<RecordingProvider>(scripted("judge", constant_judge_playbook(3)));
            const auto learner = scripted("learner", kLearnerPlaybook);
            dialogue::DialogueSettings settings;
            settings.prompts = prompts_for(cell);
            const auto log = dialogue::run_dialogue(cell, make_scenario("s", turns), bind_agents(cell, tutor, learner),
                                                    settings, "priv-" + std::to_string(index++));
            c.expect(!log.failed, "privacy corpus dialogue failed");
            const auto scored = scoring::score_row(log, judge_binding(judge), scoring::RubricSet{});
            c.expect(!scored.failed, "privacy corpus scoring failed: " + scored.error);
            // The corpus must actually contain internal strings for the audit to mean anything.
            const bool has_internal = log.to_json().dump().find("secret-") != std::string::npos;
            c.expect(has_internal, cell.cell_id + " trace holds no marked internal strings");
            // Only the learner deliberation channel is meant to read learner internals.
            const int learner_deliberation = scoring::channel_index(scoring::JudgeKind::learner_deliberation);
            for (const auto* source : {tutor.get(), judge.get()}) {
                for (const auto& request : source->requests()) {
                    if (source == judge.get() && request.round_index == learner_deliberation) continue;
                    ++audited;
                    c.expect(request.full_text().find("secret-") == std::string::npos,
                             cell.cell_id + ": internal text reached a " + source->id() + " request");
                }
            }
            for (const auto& turn : log.turns) {
                c.expect(turn.learner_public.find("secret-") == std::string::npos, "internal text in public turn");
            }
        }
    }
    c.expect(audited > 100, "audited only " + std::to_string(audited) + " requests");
}

// 7 ------------------------------------------------------------------------

void provable_discourse(Checks& c) {
    using namespace discourse;
    std::mt19937 rng(7);
    // (a) blocking matches brute-force reachability.
    for (int trial = 0; trial < 50; ++trial) {
        auto f = random_ledger(rng, 20, 0.15);
        const auto root = claim_id(std::uniform_int_distribution<int>(0, 19)(rng));
        make_unsatisfiable(f, root);
        SnapshotStore snapshots;
        ValidateOptions options;
        options.workers = 1 + trial % 4;
        const auto report = validate_all(f.ledger, f.sources(), snapshots, options);
        std::set<std::string> blocked;
        for (const auto& r : report.results) {
            if (r.status == ClaimStatus::blocked) blocked.insert(r.claim_id);
        }
        c.expect(blocked == oracle::transitive_dependents(f.deps, root),
                 "trial " + std::to_string(trial) + ": blocked set differs from reachability oracle");
        c.expect(report.result(root).status == ClaimStatus::fail, "failing root not reported as fail");
    }
    // (b) and (c) on one 20-claim fixture.
    TempDir dir;
    auto f = random_ledger(rng, 20, 0.15);
    ValidateOptions accept;
    accept.accept = true;
    {
        SnapshotStore snapshots(dir / "snap.json");
        validate_all(f.ledger, f.sources(), snapshots, accept);
    }
    {
        SnapshotStore snapshots(dir / "snap.json");
        const auto rerun = validate_all(f.ledger, f.sources(), snapshots);
        c.expect(rerun.stale == 0, "unchanged re-run reported " + std::to_string(rerun.stale) + " stale claims");
    }
    for (int group = 0; group < f.groups; ++group) {
        f.add_row(group);
        SnapshotStore snapshots(dir / "snap.json");
        const auto report = validate_all(f.ledger, f.sources(), snapshots, accept);
        std::set<std::string> stale;
        for (const auto& r : report.results) {
            if (r.stale) stale.insert(r.claim_id);
        }
        c.expect(stale == f.claims_reading(group), "group " + std::to_string(group) + ": stale set is wrong");
        SnapshotStore after(dir / "snap.json");
        c.expect(validate_all(f.ledger, f.sources(), after).stale == 0, "stale flags survive an accepted re-run");
    }
    // (d) an injected 3-cycle.
    auto cyclic = f.ledger;
    for (auto& claim : cyclic) {
        if (claim.id == "c00") claim.depends_on.push_back("c02");
        if (claim.id == "c01") claim.depends_on = {"c00"};
        if (claim.id == "c02") claim.depends_on = {"c01"};
    }
    try {
        topological_layers(cyclic);
        c.expect(false, "3-cycle not detected");
    } catch (const CycleError& e) {
        const std::string message = e.what();
        c.expect(message.find("c00") != std::string::npos && message.find("c01") != std::string::npos &&
                     message.find("c02") != std::string::npos,
                 "cycle message does not name the cycle: " + message);
    }
}

// 8 ------------------------------------------------------------------------

void provenance(Checks& c) {
    Workspace ws;
    const auto config = ws.load();
    harness::ResultStore store(config.store_path());
    const harness::LogTree logs(config.log_root());
    const auto manifest = harness::plan_run(
        config, {"cell_80_base_single_unified", "cell_82_base_multi_unified"}, {"fractions"}, 25, {});
    const auto summary = harness::execute_run(config, manifest, store, logs);
    c.expect(summary.executed == 50 && summary.failed == 0,
             "run executed " + std::to_string(summary.executed) + " dialogues, " + std::to_string(summary.failed) +
                 " failed");
    auto report = harness::provenance_audit(store, logs, manifest.run_id);
    c.expect(report.checked == 50, "audit checked " + std::to_string(report.checked) + " rows");
    c.near(report.match_rate, 1.0, 0.0, "pristine match rate");

    const auto refs = store.dialogues(manifest.run_id);
    fs::remove(logs.content_path(refs.at(5).dialogue_content_hash));
    report = harness::provenance_audit(store, logs, manifest.run_id);
    c.near(report.match_rate, 0.98, 1e-12, "match rate after deleting one log");

    const auto victim = logs.content_path(refs.at(17).dialogue_content_hash);
    auto bytes = read_file(victim);
    bytes[bytes.size() / 2] ^= 0x01;
    std::ofstream(victim, std::ios::binary | std::ios::trunc) << bytes;
    report = harness::provenance_audit(store, logs, manifest.run_id);
    c.near(report.match_rate, 0.96, 1e-12, "match rate after tampering with one byte");
    bool flagged = false;
    for (const auto& m : report.mismatches) flagged = flagged || m.dialogue_id == refs.at(17).dialogue_id;
    c.expect(flagged, "tampered log not reported");
    bool rejected = false;
    try {
        logs.read_verified(refs.at(17).dialogue_content_hash);
    } catch (const ProvenanceError&) {
        rejected = true;
    }
    c.expect(rejected, "tampered log still reads as verified");
}

// 9 ------------------------------------------------------------------------

/// Recognition d implied by the scripted judge: each round-0 rule's scores
/// through the rubric weights, recognition phrasing against its absence.
double constructed_recognition_d(const Workspace& ws) {
    const auto rubric = scoring::load_rubric(ws.config_dir() / "rubrics" / "tutor.yaml");
    const auto playbook = YAML::LoadFile((ws.config_dir() / "playbooks" / "judge.yaml").string());
    std::vector<double> recog, base;
    for (const auto& rule : playbook["rules"]) {
        if (rule["round"].as<int>() != 0) continue;
        const auto scores = nlohmann::json::parse(rule["text"].as<std::string>());
        std::vector<int> raw;
        std::vector<double> weights;
        for (const auto& d : rubric.dimensions) {
            raw.push_back(scores.at(d.name).get<int>());
            weights.push_back(d.weight);
        }
        bool recognition = false;
        for (const auto& needle : rule["contains"]) recognition = recognition || needle.as<std::string>() == "what you are noticing";
        // Four cells per recognition level see each scenario once.
        for (int k = 0; k < 4; ++k) (recognition ? recog : base).push_back(oracle::overall(raw, weights));
    }
    return oracle::cohens_d(recog, base);
}

void end_to_end(Checks& c) {
    Workspace ws;
    const auto config = ws.load();
    harness::ResultStore store(config.store_path());
    const harness::LogTree logs(config.log_root());
    std::vector<std::string> cell_ids;
    for (const auto& cell : config.cells) cell_ids.push_back(cell.cell_id);
    c.expect(cell_ids.size() == 8, "config should define 8 cells");
    const auto manifest = harness::plan_run(config, cell_ids, {"core"}, 1, {});
    const auto run = harness::execute_run(config, manifest, store, logs);
    c.expect(run.executed == 16 && run.failed == 0, "run should execute 16 dialogues cleanly");
    const auto eval = harness::evaluate_run(manifest.run_id, config.judge_binding(), config.rubrics, store, logs,
                                            config.workers);
    c.expect(eval.scored == 16 && eval.failed == 0, "evaluate should score 16 rows");

    const double constructed = constructed_recognition_d(ws);
    c.expect(constructed > 0.0, "constructed recognition effect is not positive");
    const auto tables = cli::analyze_run(store, manifest.run_id, "2.2");
    for (const auto& t : tables) {
        if (t.name != "effect_sizes") continue;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (t.at(r, "factor") != "recognition") continue;
            const double d = std::stod(t.at(r, "d"));
            c.expect(d > 0.0, "analyzed recognition d is not positive");
            c.near(d, constructed, 0.1, "recognition d vs constructed");
        }
    }

    const auto lc = discourse::LedgerConfig::load(ws.config_dir() / "ledger" / "ledger.yaml");
    const auto ledger = discourse::load_ledger(lc.ledgers);
    discourse::DataSources sources;
    sources.store = &store;
    sources.logs.emplace(config.log_root());
    sources.manifest = lc.manifest;
    sources.source_roots = lc.source_roots;
    sources.critiques = lc.critiques;
    sources.epoch = lc.epoch;
    sources.paper_text = lc.read_paper_text();
    discourse::SnapshotStore snapshots(lc.snapshot);
    const auto report = discourse::validate_all(ledger, sources, snapshots);
    for (const auto& r : report.results) {
        c.expect(r.status == discourse::ClaimStatus::pass,
                 "ledger claim " + r.claim_id + " is " + std::string(discourse::to_string(r.status)) + ": " + r.message);
    }
    c.expect(report.pass == ledger.size() && report.ok(), "ledger summary: " + report.summary_line());
}

// 10 -----------------------------------------------------------------------

void autotune_monotonicity(Checks& c) {
    TempDir dir;
    auto config = level_tune_config(dir.path(), 2);
    // Odd bytes make any normalisation on the revert path visible.
    config.prompts[backend::RoleTag::tutor_ego] = "  Tutor\r\n\tlevel-2 \xC3\xA9t\xC3\xA9\n\n";
    const std::vector<std::string> replies{level_edit(3), level_edit(1), "not json", level_edit(3), level_edit(4),
                                           R"({"files": {}})", level_edit(2), level_edit(5), level_edit(5),
                                           level_edit(1)};
    const auto outcome = autotune::tune(config, scripted_recommender(replies), 10);
    const auto& session = outcome.session;
    c.expect(session.iterations.size() == 10, "session should record 10 iterations");
    const auto best = session.best_so_far();
    c.expect(std::is_sorted(best.begin(), best.end()), "best-so-far objective decreased");

    const autotune::SnapshotArchive archive(dir / "snapshots");
    // Replay: after each iteration the kept prompts are the last accepted snapshot, byte for byte.
    auto kept = config.prompts;
    std::size_t reverts = 0;
    for (int k = 1; k <= 10; ++k) {
        const auto& it = session.iterations[static_cast<std::size_t>(k - 1)];
        if (it.accepted) {
            kept = archive.get(it.snapshot_hash);
            continue;
        }
        ++reverts;
        TempDir replay_dir;
        auto replay = config;
        replay.session_dir = replay_dir.path();
        const auto prefix = autotune::tune(replay, scripted_recommender(replies), k);
        c.expect(prefix.best_prompts == kept, "iteration " + std::to_string(k) + " did not restore the kept prompts");
        c.expect(autotune::SnapshotArchive::hash_of(prefix.best_prompts) == autotune::SnapshotArchive::hash_of(kept),
                 "iteration " + std::to_string(k) + " revert is not byte-identical");
    }
    c.expect(reverts >= 5, "fixture should exercise several reverts");
    c.expect(outcome.best_prompts == archive.get(session.best_hash), "best snapshot not recoverable by hash");
    c.near(session.best_score, level_objective(5), 1e-9, "final best objective");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "scoring formula anchors and weight invariance", 1.0, scoring_formula},
        {2, "interaction decomposition from reference cell means", 1.0, interaction_arithmetic},
        {3, "approval rate on a 360-review fixture", 1.0, approval_rate},
        {4, "statistics against direct oracles", 30.0, statistics_oracles},
        {5, "trace shape invariants", 10.0, trace_shape},
        {6, "learner privacy audit", 10.0, learner_privacy},
        {7, "claim DAG blocking, staleness and cycles", 10.0, provable_discourse},
        {8, "provenance audit on a 50-dialogue run", 10.0, provenance},
        {9, "end-to-end pipeline smoke", 60.0, end_to_end},
        {10, "autotune monotonicity and byte-identical reverts", 10.0, autotune_monotonicity},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (!only.empty() && !only.count(criterion.number)) continue;
        Checks checks;
        std::string crash;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.body(checks);
        } catch (const std::exception& e) {
            crash = e.what();
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool over_budget = seconds > criterion.budget_seconds;
        const bool ok = crash.empty() && checks.failed() == 0 && checks.count() > 0 && !over_budget;
        failures += ok ? 0 : 1;
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << criterion.number << " " << criterion.name << " ("
                  << std::fixed << std::setprecision(2) << seconds << "s, " << checks.count() << " checks)\n";
        if (!crash.empty()) std::cout << "       threw: " << crash << "\n";
        if (over_budget) std::cout << "       over budget of " << criterion.budget_seconds << "s\n";
        for (const auto& m : checks.messages()) std::cout << "       " << m << "\n";
        if (checks.failed() > checks.messages().size()) {
            std::cout << "       ... " << checks.failed() - checks.messages().size() << " more failures\n";
        }
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
    return failures == 0 ? 0 : 1;
}
