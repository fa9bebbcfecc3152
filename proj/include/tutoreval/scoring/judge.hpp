#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutoreval/dialogue/dialogue.hpp"
#include "tutoreval/dialogue/trace.hpp"
#include "tutoreval/scoring/rubric.hpp"

namespace tutoreval::scoring {

enum class JudgeKind { tutor_turn, learner_turn, tutor_holistic, tutor_deliberation, learner_deliberation };

std::string_view to_string(JudgeKind kind);

/// Round index placed on judge requests so scripted judges can key on the channel.
int channel_index(JudgeKind kind);

/// What the judge sees. Public text and scenario framing only.
struct JudgeInput {
    JudgeKind kind = JudgeKind::tutor_turn;
    int turn_index = 0;
    std::string scenario_context;
    std::vector<dialogue::PublicTurn> transcript;  // turns before the target
    std::string prompt_message;                     // tutor message a learner turn answers
    std::string target;
    Rubric rubric;

    /// Rendered user message for the judge call.
    std::string render() const;
    nlohmann::json to_json() const;
};

/// Per-turn kinds target one public message; holistic targets the whole
/// public transcript with turn separators; deliberation kinds target the
/// relevant trace slice. Throws NotApplicable for deliberation kinds on cells
/// without that deliberation, and ScoreError for an out-of-range turn.
JudgeInput build_judge_input(const dialogue::DialogueLog& log, int turn_index, JudgeKind kind, Rubric rubric);

/// Parses {dimension: {score, reasoning}} (or {dimension: score}). Every rubric
/// dimension must be present with an integer score in 1..5, else ParseError.
std::vector<DimensionScore> parse_judge_output(std::string_view raw, const Rubric& rubric);

struct JudgeBinding {
    dialogue::BoundProvider provider;
    std::string judge_model;  // row key; defaults to provider id + "/" + model
    std::string system_prompt =
        "You are a blind evaluator of tutoring dialogues. Score the target against every rubric dimension on a "
        "1-5 scale and answer only with JSON of the form {\"dimension\": {\"score\": n, \"reasoning\": \"...\"}}.";

    std::string key() const;
};

/// Everything score_row contributes to a result row.
struct ScoreFragments {
    std::string judge_model;
    std::vector<double> tutor_scores;
    std::vector<double> learner_scores;
    std::optional<double> tutor_first, tutor_last, tutor_development;
    std::optional<double> learner_first, learner_last, learner_development;
    std::optional<double> tutor_holistic_score;
    std::optional<double> tutor_deliberation_score;
    std::optional<double> learner_deliberation_score;
    std::string tutor_rubric_version;
    std::string learner_rubric_version;
    std::string dialogue_rubric_version;
    std::string deliberation_rubric_version;
    nlohmann::json scores_with_reasoning = nlohmann::json::object();
    bool failed = false;
    std::string error;
};

/// One judge call per (turn, kind) for per-turn kinds and one per dialogue for
/// holistic and deliberation kinds. Rubric versions are resolved once at the
/// start of the call. Any malformed judge output fails the whole row: no
/// scores are kept and the raw payload is stored under "raw".
ScoreFragments score_row(const dialogue::DialogueLog& log, const JudgeBinding& judge, const RubricSet& rubrics);

/// Dimension scores for one channel of a scored row, e.g. first-turn tutor
/// dimensions. Empty when absent.
std::vector<DimensionScore> dimension_scores(const nlohmann::json& scores_with_reasoning, const std::string& channel,
                                             std::optional<std::size_t> turn = std::nullopt);

}  // namespace tutoreval::scoring
