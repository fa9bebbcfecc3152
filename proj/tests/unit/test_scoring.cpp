#include <doctest.h>

#include <random>

#include "oracles/scoring_oracle.hpp"
#include "support/support.hpp"
#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"
#include "tutoreval/scoring/judge.hpp"

using namespace tutoreval;
using namespace tutoreval::scoring;
using tutoreval::testing::TempDir;

namespace {

std::vector<DimensionScore> uniform(const Rubric& rubric, int score) {
    std::vector<DimensionScore> out;
    for (const auto& d : rubric.dimensions) out.push_back({d.name, score, ""});
    return out;
}

}  // namespace

TEST_CASE("overall score anchors") {
    for (const auto& rubric : {tutor_rubric_v22(), learner_rubric_v22(), holistic_rubric_v22(),
                               deliberation_rubric_v22(), tutor_rubric_v10()}) {
        CHECK(overall_score(uniform(rubric, 3), rubric) == 50.0);
        CHECK(overall_score(uniform(rubric, 5), rubric) == 100.0);
        CHECK(overall_score(uniform(rubric, 1), rubric) == 0.0);
    }
}

TEST_CASE("overall score matches the definition and ignores weight scale") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> weight(0.1, 30.0);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    std::uniform_int_distribution<int> score(1, 5);
    for (int trial = 0; trial < 100; ++trial) {
        Rubric rubric{"t", RubricKind::tutor_turn, {}};
        Rubric scaled = rubric;
        const double k = scale(rng);
        std::vector<int> raw;
        std::vector<double> weights;
        std::vector<DimensionScore> scores;
        const int dims = 2 + trial % 12;
        for (int i = 0; i < dims; ++i) {
            const auto name = "d" + std::to_string(i);
            const double w = weight(rng);
            rubric.dimensions.push_back({name, w, {}});
            scaled.dimensions.push_back({name, w * k, {}});
            raw.push_back(score(rng));
            weights.push_back(w);
            scores.push_back({name, raw.back(), ""});
        }
        const double got = overall_score(scores, rubric);
        CHECK(got == doctest::Approx(oracle::overall(raw, weights)).epsilon(1e-12));
        CHECK(overall_score(scores, scaled) == doctest::Approx(got).epsilon(1e-12));
        CHECK(got >= 0.0);
        CHECK(got <= 100.0);
    }
}

TEST_CASE("overall score rejects incomplete or invalid score sets") {
    const auto rubric = tutor_rubric_v22();
    auto scores = uniform(rubric, 3);
    scores.pop_back();
    CHECK_THROWS_AS(overall_score(scores, rubric), ScoreError);
    scores = uniform(rubric, 3);
    scores.push_back(scores.front());
    CHECK_THROWS_AS(overall_score(scores, rubric), ScoreError);
    scores = uniform(rubric, 3);
    scores[0].score = 6;
    CHECK_THROWS_AS(overall_score(scores, rubric), ScoreError);
    scores = uniform(rubric, 3);
    scores[0].name = "unknown";
    CHECK_THROWS_AS(overall_score(scores, rubric), ScoreError);
}

TEST_CASE("built-in rubrics") {
    const auto tutor = tutor_rubric_v22();
    CHECK(tutor.version == "2.2");
    CHECK(tutor.dimensions.size() == 8);
    CHECK(tutor.total_weight() == doctest::Approx(100.0));
    CHECK(learner_rubric_v22().dimensions.size() == 5);
    CHECK(holistic_rubric_v22().dimensions.size() == 3);
    CHECK(deliberation_rubric_v22().dimensions.size() == 6);
    const auto legacy = tutor_rubric_v10();
    CHECK(legacy.dimensions.size() == 14);
    CHECK(legacy.total_weight() == doctest::Approx(120.9));
    for (const auto& r : {tutor, legacy}) CHECK_NOTHROW(r.validate());
}

TEST_CASE("rubric validation") {
    Rubric r{"1", RubricKind::tutor_turn, {{"a", 1.0, {{2, "bad level"}}}}};
    CHECK_THROWS_AS(r.validate(), ConfigError);
    r.dimensions = {{"a", 0.0, {}}};
    CHECK_THROWS_AS(r.validate(), ConfigError);
    r.dimensions = {{"a", 1.0, {}}, {"a", 2.0, {}}};
    CHECK_THROWS_AS(r.validate(), ConfigError);
    r.dimensions.clear();
    CHECK_THROWS_AS(r.validate(), ConfigError);
}

TEST_CASE("rubric files are re-read on every resolve") {
    TempDir dir;
    const auto path = dir / "rubric.yaml";
    write_file_atomic(path, "version: '2.2'\nkind: tutor\ndimensions:\n  - {name: a, weight: 10}\n");
    RubricSource source(path);
    CHECK(source.resolve().version == "2.2");
    CHECK(resolve_rubric_version(path) == "2.2");
    write_file_atomic(path, "version: '2.3'\nkind: tutor\ndimensions:\n  - {name: a, weight: 10}\n");
    CHECK(source.resolve().version == "2.3");
    write_file_atomic(path, "kind: tutor\ndimensions: []\n");
    CHECK_THROWS_AS(resolve_rubric_version(path), ConfigError);
}

TEST_CASE("config rubric files mirror the built-in rubrics") {
    const auto dir = tutoreval::testing::config_dir() / "rubrics";
    CHECK(load_rubric(dir / "tutor.yaml").to_json() == tutor_rubric_v22().to_json());
    CHECK(load_rubric(dir / "learner.yaml").to_json() == learner_rubric_v22().to_json());
    CHECK(load_rubric(dir / "holistic.yaml").to_json() == holistic_rubric_v22().to_json());
    CHECK(load_rubric(dir / "deliberation.yaml").to_json() == deliberation_rubric_v22().to_json());
}

TEST_CASE("judge output parsing") {
    Rubric r{"x", RubricKind::tutor_turn, {{"a", 1, {}}, {"b", 1, {}}}};
    auto scores = parse_judge_output(R"(Here: {"a": {"score": 4, "reasoning": "ok"}, "b": 2} done)", r);
    REQUIRE(scores.size() == 2);
    CHECK(scores[0].score == 4);
    CHECK(scores[0].reasoning == "ok");
    CHECK(scores[1].score == 2);
    CHECK_THROWS_AS(parse_judge_output("no json", r), ParseError);
    CHECK_THROWS_AS(parse_judge_output(R"({"a": 4})", r), ParseError);
    CHECK_THROWS_AS(parse_judge_output(R"({"a": 4, "b": 3.5})", r), ParseError);
    CHECK_THROWS_AS(parse_judge_output(R"({"a": 0, "b": 3})", r), ParseError);
    CHECK_THROWS_AS(parse_judge_output(R"({"a": "4", "b": 3})", r), ParseError);
    CHECK_THROWS_AS(parse_judge_output(R"({"a": {"reasoning": "x"}, "b": 3})", r), ParseError);
}

TEST_CASE("judge inputs carry public text only") {
    using namespace tutoreval::testing;
    const auto cell = make_cell(harness::Recognition::base, harness::TutorArch::multi, harness::LearnerArch::ego_superego);
    const auto log = scripted_dialogue(cell, 3);
    REQUIRE(log.turns.size() == 3);
    for (auto kind : {JudgeKind::tutor_turn, JudgeKind::learner_turn, JudgeKind::tutor_holistic}) {
        for (int t = 0; t < 3; ++t) {
            const auto input = build_judge_input(log, t, kind, tutor_rubric_v22());
            const auto text = input.render();
            CHECK(text.find("secret-") == std::string::npos);
            CHECK(text.find("Opening") != std::string::npos);
        }
    }
    const auto second = build_judge_input(log, 1, JudgeKind::learner_turn, learner_rubric_v22());
    CHECK(second.transcript.size() == 1);
    CHECK(second.prompt_message == log.turns[1].tutor_public);
    CHECK(second.target == log.turns[1].learner_public);
    const auto holistic = build_judge_input(log, 0, JudgeKind::tutor_holistic, holistic_rubric_v22());
    CHECK(holistic.target.find("--- Turn 3 ---") != std::string::npos);
    const auto delib = build_judge_input(log, 0, JudgeKind::learner_deliberation, deliberation_rubric_v22());
    CHECK(delib.target.find("secret-superego-critique") != std::string::npos);
    CHECK_THROWS_AS(build_judge_input(log, 3, JudgeKind::tutor_turn, tutor_rubric_v22()), ScoreError);
    CHECK(channel_index(JudgeKind::tutor_turn) == 0);
    CHECK(channel_index(JudgeKind::learner_deliberation) == 4);
}

TEST_CASE("deliberation inputs need the matching architecture") {
    using namespace tutoreval::testing;
    const auto cell = make_cell(harness::Recognition::recog, harness::TutorArch::single, harness::LearnerArch::unified);
    const auto log = scripted_dialogue(cell, 1);
    CHECK_THROWS_AS(build_judge_input(log, 0, JudgeKind::tutor_deliberation, deliberation_rubric_v22()), NotApplicable);
    CHECK_THROWS_AS(build_judge_input(log, 0, JudgeKind::learner_deliberation, deliberation_rubric_v22()),
                    NotApplicable);
}

TEST_CASE("score_row makes one judge call per turn and channel") {
    using namespace tutoreval::testing;
    const auto cell = make_cell(harness::Recognition::base, harness::TutorArch::multi, harness::LearnerArch::ego_superego);
    const auto log = scripted_dialogue(cell, 3);
    auto recorder = std::make_shared<RecordingProvider>(scripted("judge", constant_judge_playbook(4)));
    const auto fragments = score_row(log, judge_binding(recorder), RubricSet{});
    CHECK_FALSE(fragments.failed);
    // 3 tutor turns + 3 learner turns + holistic + two deliberation channels.
    CHECK(recorder->count() == 9);
    REQUIRE(fragments.tutor_scores.size() == 3);
    CHECK(fragments.tutor_scores[0] == doctest::Approx(75.0));
    CHECK(fragments.tutor_development.value() == doctest::Approx(0.0));
    CHECK(fragments.tutor_holistic_score.value() == doctest::Approx(75.0));
    CHECK(fragments.tutor_deliberation_score.has_value());
    CHECK(fragments.learner_deliberation_score.has_value());
    CHECK(fragments.judge_model == "judge/judge-model");
    CHECK(fragments.tutor_rubric_version == "2.2");
    CHECK(dimension_scores(fragments.scores_with_reasoning, "tutor_turns", 0).size() == 8);
    CHECK(dimension_scores(fragments.scores_with_reasoning, "holistic").size() == 3);
    CHECK(dimension_scores(fragments.scores_with_reasoning, "tutor_turns", 7).empty());
    for (const auto& request : recorder->requests()) {
        CHECK(request.role == backend::RoleTag::judge);
        CHECK(request.full_text().find("secret-unified") == std::string::npos);
    }
}

TEST_CASE("single-agent rows have no deliberation scores") {
    using namespace tutoreval::testing;
    const auto cell = make_cell(harness::Recognition::base, harness::TutorArch::single, harness::LearnerArch::unified);
    const auto log = scripted_dialogue(cell, 2);
    auto recorder = std::make_shared<RecordingProvider>(scripted("judge", constant_judge_playbook(3)));
    const auto fragments = score_row(log, judge_binding(recorder), RubricSet{});
    CHECK(recorder->count() == 5);
    CHECK_FALSE(fragments.tutor_deliberation_score.has_value());
    CHECK_FALSE(fragments.learner_deliberation_score.has_value());
}

TEST_CASE("malformed judge output fails the whole row") {
    using namespace tutoreval::testing;
    const auto cell = make_cell(harness::Recognition::base, harness::TutorArch::single, harness::LearnerArch::unified);
    const auto log = scripted_dialogue(cell, 2);
    auto playbook = constant_judge_playbook(4);
    playbook.insert(playbook.find("rules:\n") + 7, "  - role: judge\n    round: 1\n    turn: 1\n    text: 'not json'\n");
    const auto fragments = score_row(log, judge_binding(scripted("judge", playbook)), RubricSet{});
    CHECK(fragments.failed);
    CHECK(fragments.tutor_scores.empty());
    CHECK(fragments.learner_scores.empty());
    CHECK_FALSE(fragments.tutor_holistic_score.has_value());
    CHECK(fragments.scores_with_reasoning.at("raw") == "not json");
    CHECK(fragments.scores_with_reasoning.at("channel") == "learner_turn");
    CHECK(fragments.tutor_rubric_version == "2.2");
}

TEST_CASE("judge key defaults to provider and model") {
    using namespace tutoreval::testing;
    auto judge = judge_binding(scripted("p", "default: x"), "m");
    CHECK(judge.key() == "p/m");
    judge.judge_model = "override";
    CHECK(judge.key() == "override");
}
