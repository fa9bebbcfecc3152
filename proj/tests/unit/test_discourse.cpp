#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "oracles/dag_oracle.hpp"
#include "oracles/stats_oracle.hpp"
#include "support/ledger_fixture.hpp"
#include "support/support.hpp"
#include "support/workspace.hpp"
#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"
#include "tutoreval/discourse/validate.hpp"

using namespace tutoreval;
using namespace tutoreval::discourse;
using namespace tutoreval::testing;
namespace fs = std::filesystem;

namespace {

Claim claim_from(const std::string& yaml) { return Claim::from_yaml(YAML::Load(yaml)); }

Ledger ledger_from(const std::string& yaml) { return parse_ledger(YAML::Load(yaml)); }

const ClaimResult* find(const ValidationReport& report, const std::string& id) {
    for (const auto& r : report.results) {
        if (r.claim_id == id) return &r;
    }
    return nullptr;
}

std::vector<double> per_response_sds(const std::vector<std::vector<double>>& responses) {
    std::vector<double> out;
    for (const auto& r : responses) out.push_back(std::sqrt(oracle::var(r)));
    return out;
}

}  // namespace

TEST_CASE("ledger loading") {
    TempDir dir;
    write_file_atomic(dir / "a.yaml", R"(
claims:
  - id: one
    evidence: { type: db_count }
    assertion: { op: eq, expected: 1 }
)");
    write_file_atomic(dir / "b.yaml", R"(
- id: one
  evidence: { type: manifest_total }
  assertion: { op: exists }
)");
    CHECK(load_ledger({dir / "a.yaml"}).size() == 1);
    CHECK_THROWS_AS(load_ledger({dir / "a.yaml", dir / "b.yaml"}), LedgerError);

    const auto worked = claim_from(R"(
id: calibration-narrowing
statement: { pattern: 'dimension scores? (?:are|were) more uniform', flags: i, min_occurrences: 0 }
evidence: { type: dimension_variance, group_by: recognition }
assertion: { op: lte, expected: -0.3 }
remediation: [Re-run the variance analysis.]
)");
    CHECK(worked.assertion.op == AssertOp::lte);
    CHECK(worked.assertion.expected.get<double>() == -0.3);
    CHECK(worked.statement->min_occurrences == 0);
    CHECK(worked.evidence_type == "dimension_variance");

    CHECK_THROWS_AS(claim_from("{id: x, evidence: {type: horoscope}, assertion: {op: exists}}"), LedgerError);
    CHECK_THROWS_AS(claim_from("{id: x, evidence: {type: db_count}, assertion: {op: approx, expected: 1}}"),
                    LedgerError);
    CHECK(adapter_types().size() == 18);
}

TEST_CASE("statement location") {
    const std::string text = "The effect was large. The effect held.";
    auto claim = claim_from("{id: x, statement: {pattern: 'absent phrase', min_occurrences: 0}, "
                            "evidence: {type: db_count}, assertion: {op: exists}}");
    CHECK_FALSE(locate_statement(claim, text).orphaned);
    claim.statement->min_occurrences = 1;
    CHECK(locate_statement(claim, text).orphaned);
    claim.statement->pattern = "the EFFECT";
    claim.statement->flags = "i";
    const auto m = locate_statement(claim, text);
    CHECK(m.occurrences == 2);
    CHECK_FALSE(m.orphaned);
}

TEST_CASE("assertions") {
    Assertion a{AssertOp::approx, 1.0, 0.05};
    CHECK(apply_assertion(a, 1.04));
    CHECK_FALSE(apply_assertion(a, 1.06));
    CHECK(apply_assertion({AssertOp::lte, -0.3, {}}, -0.52));
    CHECK_FALSE(apply_assertion({AssertOp::lte, -0.3, {}}, -0.1));
    CHECK(apply_assertion({AssertOp::gte, 2, {}}, 2));
    CHECK(apply_assertion({AssertOp::eq, "yes", {}}, "yes"));
    CHECK_FALSE(apply_assertion({AssertOp::exists, nullptr, {}}, nullptr));
    CHECK(apply_assertion({AssertOp::exists, nullptr, {}}, 0));
    CHECK_FALSE(apply_assertion({AssertOp::gte, 1, {}}, "text"));
}

TEST_CASE("count and code-path adapters") {
    std::mt19937 rng(1);
    auto f = random_ledger(rng, 1);
    for (int i = 0; i < 5; ++i) f.add_row(9);
    const auto counted = evaluate_adapter(count_claim("n", 9, {}), f.sources(), f.ledger);
    CHECK(counted.value == 5);
    CHECK(counted.fingerprint.size() == 64);

    TempDir dir;
    fs::create_directories(dir / "src" / "deep");
    write_file_atomic(dir / "src" / "a.cpp", "overall_score(); overall_score();\n");
    write_file_atomic(dir / "src" / "deep" / "b.cpp", "overall_score overall_score overall_score\n");
    write_file_atomic(dir / "src" / "deep" / "c.hpp", "overall_score overall_score\n");
    write_file_atomic(dir / "src" / "notes.txt", "overall_score\n");
    DataSources sources;
    sources.source_roots = {dir / "src"};
    const auto claim = claim_from(R"({id: code, evidence: {type: code_path, pattern: overall_score,
                                     extensions: [.cpp, .hpp]}, assertion: {op: eq, expected: 7}})");
    CHECK(evaluate_adapter(claim, sources, {}).value == 7);
    sources.source_roots = {dir / "missing"};
    CHECK_THROWS_AS(evaluate_adapter(claim, sources, {}), ConfigError);
}

TEST_CASE("calibration fixture through the dimension variance adapter") {
    // Recognition responses spread less across dimensions than base responses.
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> tight(3, 4), wide(1, 5);
    std::vector<std::vector<double>> recog, base;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> r, b;
        for (int d = 0; d < 8; ++d) {
            r.push_back(tight(rng));
            b.push_back(wide(rng));
        }
        recog.push_back(r);
        base.push_back(b);
    }
    auto f = random_ledger(rng, 1);
    auto add = [&](const std::string& id, const std::string& recognition, const std::vector<double>& scores) {
        harness::ResultRow row;
        row.run_id = "run";
        row.dialogue_id = id;
        row.profile_name = "cell";
        row.scenario_id = "calibration";
        row.recognition = recognition;
        row.judge_model = "judge";
        row.tutor_rubric_version = "2.2";
        row.dialogue_content_hash = std::string(64, 'f');
        row.config_hash = std::string(64, '0');
        nlohmann::json turn = nlohmann::json::object();
        for (std::size_t d = 0; d < scores.size(); ++d) turn["dim" + std::to_string(d)] = {{"score", scores[d]}};
        row.scores_with_reasoning = {{"tutor_turns", nlohmann::json::array({turn})}};
        row.tutor_scores = {50.0};
        f.store->upsert_result(row);
    };
    for (std::size_t i = 0; i < recog.size(); ++i) {
        add("r" + std::to_string(i), "recog", recog[i]);
        add("b" + std::to_string(i), "base", base[i]);
    }
    const auto claim = claim_from(R"({id: cal, evidence: {type: dimension_variance, group_by: recognition,
                                     filters: {eq: {scenario_id: calibration}}},
                                     assertion: {op: lte, expected: -0.3}})");
    const auto out = evaluate_adapter(claim, f.sources(), {});
    const double expected = oracle::cohens_d(per_response_sds(recog), per_response_sds(base));
    CHECK(out.value.get<double>() == doctest::Approx(expected).epsilon(1e-10));
    CHECK(expected <= -0.3);
    CHECK(apply_assertion(claim.assertion, out.value));
}

TEST_CASE("a failing dependency blocks its dependents without evaluating them") {
    std::mt19937 rng(2);
    auto f = random_ledger(rng, 0);
    f.add_row(0);
    f.ledger = {count_claim("A", 0, {"B"}), count_claim("B", 0, {}, false), count_claim("C", 0, {"A"}),
                count_claim("D", 0, {})};
    std::vector<std::string> evaluated;
    ValidateOptions options;
    options.on_evaluate = [&](const std::string& id) { evaluated.push_back(id); };
    SnapshotStore snapshots;
    const auto report = validate_all(f.ledger, f.sources(), snapshots, options);
    CHECK(find(report, "B")->status == ClaimStatus::fail);
    CHECK(find(report, "A")->status == ClaimStatus::blocked);
    CHECK(find(report, "A")->blocked_by == "B");
    CHECK(find(report, "C")->status == ClaimStatus::blocked);
    CHECK(find(report, "C")->blocked_by == "A");
    CHECK(find(report, "A")->fingerprint.empty());
    CHECK(std::find(evaluated.begin(), evaluated.end(), "A") == evaluated.end());
    CHECK(report.summary_line() == "1 pass, 2 warn, 1 fail");
    CHECK_FALSE(report.ok());
}

TEST_CASE("cascade matches brute-force reachability on random DAGs") {
    std::mt19937 rng(20);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5 + trial % 46;
        auto f = random_ledger(rng, n, 3.0 / n);
        const auto root = claim_id(std::uniform_int_distribution<int>(0, n - 1)(rng));
        make_unsatisfiable(f, root);

        std::vector<std::string> order;
        ValidateOptions options;
        options.workers = 1 + trial % 3;
        options.on_evaluate = [&](const std::string& id) { order.push_back(id); };
        SnapshotStore snapshots;
        const auto report = validate_all(f.ledger, f.sources(), snapshots, options);

        std::set<std::string> blocked;
        for (const auto& r : report.results) {
            if (r.status == ClaimStatus::blocked) blocked.insert(r.claim_id);
        }
        CHECK(blocked == oracle::transitive_dependents(f.deps, root));
        CHECK(find(report, root)->status == ClaimStatus::fail);
        CHECK(report.pass + report.fail + report.blocked + report.error == f.ledger.size());

        // Every evaluated claim comes after all of its dependencies.
        std::map<std::string, std::size_t> position;
        for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
        for (const auto& [claim, deps] : f.deps) {
            if (!position.count(claim)) continue;
            for (const auto& d : deps) {
                REQUIRE(position.count(d));
                CHECK(position[d] < position[claim]);
            }
        }
    }
}

TEST_CASE("stale flags follow the data") {
    std::mt19937 rng(8);
    auto f = random_ledger(rng, 20, 0.15);
    TempDir dir;
    SnapshotStore first(dir / "snap.json");
    ValidateOptions accept;
    accept.accept = true;
    auto report = validate_all(f.ledger, f.sources(), first, accept);
    CHECK(report.stale == 0);
    CHECK(report.ok());
    CHECK(fs::exists(dir / "snap.json"));

    SnapshotStore reloaded(dir / "snap.json");
    CHECK(reloaded.entries().size() == 20);
    report = validate_all(f.ledger, f.sources(), reloaded);
    CHECK(report.stale == 0);

    for (int group = 0; group < f.groups; ++group) {
        f.add_row(group);
        SnapshotStore snapshots(dir / "snap.json");
        report = validate_all(f.ledger, f.sources(), snapshots);
        std::set<std::string> stale;
        for (const auto& r : report.results) {
            if (r.stale) stale.insert(r.claim_id);
            CHECK(r.status == ClaimStatus::pass);
        }
        CHECK(stale == f.claims_reading(group));
        // Without --accept the sidecar keeps the old fingerprints.
        CHECK(SnapshotStore(dir / "snap.json").entries() == reloaded.entries());
        // Accept, so the next group is compared against current data.
        validate_all(f.ledger, f.sources(), snapshots, accept);
        reloaded = SnapshotStore(dir / "snap.json");
    }
}

TEST_CASE("cycles are reported") {
    CHECK_THROWS_AS(topological_layers({count_claim("self", 0, {"self"})}), CycleError);
    const Ledger three{count_claim("a", 0, {"c"}), count_claim("b", 0, {"a"}), count_claim("c", 0, {"b"}),
                       count_claim("d", 0, {})};
    try {
        topological_layers(three);
        FAIL("expected a cycle");
    } catch (const CycleError& e) {
        const std::string message = e.what();
        for (const char* id : {"a", "b", "c"}) CHECK(message.find(id) != std::string::npos);
    }
    // An implicit cross_reference edge closes a cycle too.
    const auto ledger = ledger_from(R"(
- { id: x, evidence: { type: cross_reference, claim: y }, assertion: { op: eq, expected: true } }
- { id: y, evidence: { type: db_count }, assertion: { op: exists }, depends_on: [x] }
)");
    CHECK_THROWS_AS(topological_layers(ledger), CycleError);
}

TEST_CASE("cross references and theoretical claims") {
    std::mt19937 rng(4);
    auto f = random_ledger(rng, 0);  // seeds one row in group g0
    auto ledger = ledger_from(R"(
- { id: base-a, evidence: { type: db_count, filters: { eq: { scenario_id: g0 } } }, assertion: { op: eq, expected: 1 } }
- { id: base-b, evidence: { type: cross_reference, claim: base-a, output: value }, assertion: { op: eq, expected: 1 } }
- { id: ref, evidence: { type: cross_reference, claim: base-a }, assertion: { op: eq, expected: true } }
- { id: theory, evidence: { type: theoretical, related_prefix: base- }, assertion: { op: gte, expected: 2 } }
)");
    SnapshotStore snapshots;
    const auto report = validate_all(ledger, f.sources(), snapshots);
    for (const auto& r : report.results) {
        INFO(r.claim_id, ": ", r.message);
        CHECK(r.status == ClaimStatus::pass);
    }
    CHECK(find(report, "base-b")->extracted_value == 1);
    CHECK(find(report, "theory")->extracted_value == 2);
}

TEST_CASE("symmetry rules") {
    std::vector<ClaimResult> results;
    auto result = [&](const std::string& id, double v) {
        ClaimResult r;
        r.claim_id = id;
        r.status = ClaimStatus::pass;
        r.extracted_value = v;
        results.push_back(r);
    };
    SymmetryConfig config;
    config.min_gap = 0.5;
    config.magnitude_threshold = 0.2;

    const auto unpaired = ledger_from(R"(
- { id: tutor-d, evidence: { type: db_count }, assertion: { op: exists }, metadata: { side: tutor } })");
    auto v = check_symmetry(unpaired, results, config, "");
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == "paired_presence");

    result("tutor-d", 0.9);
    result("learner-d", 0.8);
    const auto narrow = ledger_from(R"(
- { id: tutor-d, evidence: { type: db_count }, assertion: { op: exists },
    metadata: { side: tutor, pair: learner-d, asymmetry: true } }
- { id: learner-d, evidence: { type: db_count }, assertion: { op: exists }, metadata: { side: learner, pair: tutor-d } })");
    v = check_symmetry(narrow, results, config, "");
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == "material_gap");

    const auto paired = ledger_from(R"(
- id: tutor-d
  statement: { pattern: 'tutor d = 0\.9' }
  evidence: { type: db_count }
  assertion: { op: exists }
  metadata: { side: tutor, pair: learner-d }
- id: learner-d
  statement: { pattern: 'learner d = 0\.8' }
  evidence: { type: db_count }
  assertion: { op: exists }
  metadata: { side: learner, pair: tutor-d }
- { id: mech, evidence: { type: db_count }, assertion: { op: exists },
    metadata: { kind: mechanism, mechanism: calibration, tested_models: [m1] } }
- { id: anti, evidence: { type: db_count }, assertion: { op: exists },
    metadata: { kind: anti_pattern, mechanism: calibration } })");
    config.inventory_patterns = {R"(d\s*=\s*-?[0-9.]+)"};
    CHECK(check_symmetry(paired, results, config, "We found tutor d = 0.9 and learner d = 0.8.").empty());
    v = check_symmetry(paired, results, config, "We found tutor d = 0.9 and also d = 0.4.");
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == "inventory_coverage");

    const auto lonely = ledger_from(R"(
- { id: mech, evidence: { type: db_count }, assertion: { op: exists }, metadata: { kind: mechanism, mechanism: m } })");
    v = check_symmetry(lonely, {}, config, "");
    std::set<std::string> rules;
    for (const auto& x : v) rules.insert(x.rule);
    CHECK(rules == std::set<std::string>{"mechanism_consistency", "model_qualification"});

    const auto near_zero = ledger_from(R"(
- { id: p, evidence: { type: db_count }, assertion: { op: exists }, metadata: { pair: q, near_zero: true } }
- { id: q, evidence: { type: db_count }, assertion: { op: exists }, metadata: { pair: p } })");
    results.clear();
    result("p", 0.1);
    result("q", 0.5);
    v = check_symmetry(near_zero, results, config, "");
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == "magnitude_bounds");
}

TEST_CASE("graph export") {
    CHECK(export_graph({}) == export_graph({}));
    CHECK(export_graph({}).find("->") == std::string::npos);
    const Ledger two{count_claim("b", 0, {"a"}), count_claim("a", 0, {})};
    const auto dot = export_graph(two);
    CHECK(dot.find("\"a\" -> \"b\"") != std::string::npos);
    std::size_t edges = 0;
    for (auto pos = dot.find("->"); pos != std::string::npos; pos = dot.find("->", pos + 1)) ++edges;
    CHECK(edges == 1);
    const Ledger swapped{two[1], two[0]};
    CHECK(export_graph(swapped) == dot);
    const auto implicit = ledger_from(R"(
- { id: x, evidence: { type: cross_reference, claim: y }, assertion: { op: eq, expected: true } }
- { id: y, evidence: { type: db_count }, assertion: { op: exists } })");
    CHECK(export_graph(implicit).find("dashed") != std::string::npos);
}

TEST_CASE("shipped ledger configuration loads") {
    Workspace ws;
    const auto config = LedgerConfig::load(ws.config_dir() / "ledger" / "ledger.yaml");
    const auto ledger = load_ledger(config.ledgers);
    CHECK(ledger.size() == 13);
    CHECK_NOTHROW(topological_layers(ledger));
    CHECK_FALSE(config.read_paper_text().empty());
    CHECK(config.snapshot.filename() == "ledger.snapshot.json");
    CHECK(config.epoch == "2.2");
}
