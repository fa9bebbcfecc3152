#include "tutoreval/scoring/judge.hpp"

#include <cmath>
#include <sstream>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::scoring {

using dialogue::Agent;
using dialogue::DialogueLog;

std::string_view to_string(JudgeKind kind) {
    switch (kind) {
        case JudgeKind::tutor_turn: return "tutor_turn";
        case JudgeKind::learner_turn: return "learner_turn";
        case JudgeKind::tutor_holistic: return "tutor_holistic";
        case JudgeKind::tutor_deliberation: return "tutor_deliberation";
        case JudgeKind::learner_deliberation: return "learner_deliberation";
    }
    return "unknown";
}

int channel_index(JudgeKind kind) { return static_cast<int>(kind); }

namespace {

void render_turns(std::ostringstream& out, const std::vector<dialogue::PublicTurn>& turns, std::size_t offset = 0) {
    for (std::size_t i = 0; i < turns.size(); ++i) {
        out << "--- Turn " << (offset + i + 1) << " ---\n";
        out << "Tutor: " << turns[i].tutor_public << "\n";
        out << "Learner: " << turns[i].learner_public << "\n";
    }
}

bool in_channel(Agent agent, JudgeKind kind) {
    if (kind == JudgeKind::tutor_deliberation) {
        return agent == Agent::ego || agent == Agent::superego;
    }
    return agent == Agent::learner_ego_initial || agent == Agent::learner_superego ||
           agent == Agent::learner_ego_revision;
}

std::string render_trace_slice(const DialogueLog& log, JudgeKind kind) {
    std::ostringstream out;
    int current_turn = -1;
    for (const auto& e : log.trace) {
        if (!in_channel(e.agent, kind)) continue;
        if (e.turn != current_turn) {
            current_turn = e.turn;
            out << "--- Turn " << (current_turn + 1) << " ---\n";
        }
        out << dialogue::to_string(e.agent) << "/" << dialogue::to_string(e.action);
        if (e.round) out << " (round " << *e.round << ")";
        out << ":\n" << e.suggestions << "\n";
    }
    return out.str();
}

int as_score(const nlohmann::json& value, const std::string& name) {
    if (!value.is_number()) {
        throw ParseError("dimension '" + name + "' score is not a number");
    }
    const double raw = value.get<double>();
    if (raw != std::floor(raw) || raw < 1 || raw > 5) {
        throw ParseError("dimension '" + name + "' score is not an integer in 1..5");
    }
    return static_cast<int>(raw);
}

nlohmann::json scores_to_json(const std::vector<DimensionScore>& scores) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& s : scores) out[s.name] = {{"score", s.score}, {"reasoning", s.reasoning}};
    return out;
}

}  // namespace

std::string JudgeInput::render() const {
    std::ostringstream out;
    out << "Scenario:\n" << scenario_context << "\n\n";
    if (!transcript.empty()) {
        out << "Conversation so far:\n";
        render_turns(out, transcript);
        out << "\n";
    }
    if (!prompt_message.empty()) {
        out << "Tutor message being answered:\n" << prompt_message << "\n\n";
    }
    out << "Target (" << to_string(kind);
    if (kind == JudgeKind::tutor_turn || kind == JudgeKind::learner_turn) out << ", turn " << (turn_index + 1);
    out << "):\n" << target << "\n\n";
    out << "Rubric " << rubric.version << ":\n";
    for (const auto& d : rubric.dimensions) {
        out << "- " << d.name << " (weight " << d.weight << ")";
        for (const auto& [level, text] : d.anchors) out << "\n    " << level << ": " << text;
        out << "\n";
    }
    return out.str();
}

nlohmann::json JudgeInput::to_json() const {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : transcript) turns.push_back({{"tutor", t.tutor_public}, {"learner", t.learner_public}});
    return {{"kind", std::string(to_string(kind))},
            {"turn_index", turn_index},
            {"scenario_context", scenario_context},
            {"transcript", turns},
            {"prompt_message", prompt_message},
            {"target", target},
            {"rubric", rubric.to_json()}};
}

JudgeInput build_judge_input(const DialogueLog& log, int turn_index, JudgeKind kind, Rubric rubric) {
    JudgeInput input;
    input.kind = kind;
    input.scenario_context = log.scenario_context;
    input.rubric = std::move(rubric);
    const int turns = static_cast<int>(log.turns.size());

    switch (kind) {
        case JudgeKind::tutor_turn:
        case JudgeKind::learner_turn: {
            if (turn_index < 0 || turn_index >= turns) {
                throw ScoreError("turn " + std::to_string(turn_index) + " out of range for dialogue " +
                                 log.dialogue_id + " with " + std::to_string(turns) + " turns");
            }
            input.turn_index = turn_index;
            input.transcript.assign(log.turns.begin(), log.turns.begin() + turn_index);
            const auto& turn = log.turns[static_cast<std::size_t>(turn_index)];
            if (kind == JudgeKind::tutor_turn) {
                input.target = turn.tutor_public;
            } else {
                input.prompt_message = turn.tutor_public;
                input.target = turn.learner_public;
            }
            break;
        }
        case JudgeKind::tutor_holistic: {
            std::ostringstream out;
            render_turns(out, log.turns);
            input.target = out.str();
            break;
        }
        case JudgeKind::tutor_deliberation:
            if (log.tutor_arch != "multi") {
                throw NotApplicable("tutor deliberation scoring needs a multi-agent tutor; " + log.dialogue_id +
                                    " is " + log.tutor_arch);
            }
            input.target = render_trace_slice(log, kind);
            break;
        case JudgeKind::learner_deliberation:
            if (log.learner_arch != "ego_superego") {
                throw NotApplicable("learner deliberation scoring needs an ego_superego learner; " +
                                    log.dialogue_id + " is " + log.learner_arch);
            }
            input.target = render_trace_slice(log, kind);
            break;
    }
    return input;
}

std::vector<DimensionScore> parse_judge_output(std::string_view raw, const Rubric& rubric) {
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        throw ParseError("judge output contains no JSON object");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw.substr(open, close - open + 1));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("judge output is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ParseError("judge output is not a JSON object");
    }
    std::vector<DimensionScore> scores;
    for (const auto& d : rubric.dimensions) {
        auto it = j.find(d.name);
        if (it == j.end()) {
            throw ParseError("judge output is missing dimension '" + d.name + "'");
        }
        DimensionScore s;
        s.name = d.name;
        if (it->is_object()) {
            if (!it->contains("score")) throw ParseError("dimension '" + d.name + "' has no score");
            s.score = as_score(it->at("score"), d.name);
            if (it->contains("reasoning") && it->at("reasoning").is_string()) {
                s.reasoning = it->at("reasoning").get<std::string>();
            }
        } else {
            s.score = as_score(*it, d.name);
        }
        scores.push_back(std::move(s));
    }
    return scores;
}

std::string JudgeBinding::key() const {
    if (!judge_model.empty()) return judge_model;
    const std::string id = provider.provider ? provider.provider->id() : std::string("unbound");
    return provider.model.empty() ? id : id + "/" + provider.model;
}

namespace {

struct JudgeFailure {
    std::string channel;
    int turn;
    std::string raw;
    std::string message;
};

class RowScorer {
public:
    RowScorer(const DialogueLog& log, const JudgeBinding& judge) : log_(log), judge_(judge) {}

    std::vector<DimensionScore> score(JudgeKind kind, int turn, const Rubric& rubric) {
        auto input = build_judge_input(log_, turn, kind, rubric);
        backend::ChatRequest request;
        request.role = backend::RoleTag::judge;
        request.system_prompt = judge_.system_prompt;
        request.messages = {{backend::Speaker::user, input.render()}};
        request.temperature = judge_.provider.temperature;
        request.model = judge_.provider.model;
        request.turn_index = (kind == JudgeKind::tutor_turn || kind == JudgeKind::learner_turn) ? turn : 0;
        request.round_index = channel_index(kind);
        if (!judge_.provider.provider) {
            throw ConfigError("judge has no provider bound");
        }
        auto response = backend::complete(request, *judge_.provider.provider);
        try {
            return parse_judge_output(response.text, rubric);
        } catch (const ParseError& e) {
            throw Failure{{std::string(to_string(kind)), turn, response.text, e.what()}};
        }
    }

    struct Failure {
        JudgeFailure detail;
    };

private:
    const DialogueLog& log_;
    const JudgeBinding& judge_;
};

void first_last(const std::vector<double>& series, std::optional<double>& first, std::optional<double>& last,
                std::optional<double>& development) {
    if (series.empty()) return;
    first = series.front();
    last = series.back();
    development = *last - *first;
}

/// Keeps identity and rubric stamps, drops every score.
ScoreFragments failed_fragments(const ScoreFragments& partial, std::string error, nlohmann::json detail) {
    ScoreFragments failed;
    failed.judge_model = partial.judge_model;
    failed.tutor_rubric_version = partial.tutor_rubric_version;
    failed.learner_rubric_version = partial.learner_rubric_version;
    failed.dialogue_rubric_version = partial.dialogue_rubric_version;
    failed.deliberation_rubric_version = partial.deliberation_rubric_version;
    failed.failed = true;
    failed.error = std::move(error);
    failed.scores_with_reasoning = std::move(detail);
    return failed;
}

}  // namespace

ScoreFragments score_row(const DialogueLog& log, const JudgeBinding& judge, const RubricSet& rubrics) {
    const Rubric tutor = rubrics.tutor.resolve();
    const Rubric learner = rubrics.learner.resolve();
    const Rubric holistic = rubrics.holistic.resolve();
    const Rubric deliberation = rubrics.deliberation.resolve();

    ScoreFragments out;
    out.judge_model = judge.key();
    out.tutor_rubric_version = tutor.version;
    out.learner_rubric_version = learner.version;
    out.dialogue_rubric_version = holistic.version;
    out.deliberation_rubric_version = deliberation.version;

    if (log.failed) {
        const auto error = "dialogue failed: " + log.error;
        return failed_fragments(out, error, {{"error", error}});
    }

    RowScorer scorer(log, judge);
    nlohmann::json detail = nlohmann::json::object();
    try {
        detail["tutor_turns"] = nlohmann::json::array();
        detail["learner_turns"] = nlohmann::json::array();
        for (int t = 0; t < static_cast<int>(log.turns.size()); ++t) {
            auto tutor_scores = scorer.score(JudgeKind::tutor_turn, t, tutor);
            out.tutor_scores.push_back(overall_score(tutor_scores, tutor));
            detail["tutor_turns"].push_back(scores_to_json(tutor_scores));

            auto learner_scores = scorer.score(JudgeKind::learner_turn, t, learner);
            out.learner_scores.push_back(overall_score(learner_scores, learner));
            detail["learner_turns"].push_back(scores_to_json(learner_scores));
        }
        if (!log.turns.empty()) {
            auto holistic_scores = scorer.score(JudgeKind::tutor_holistic, 0, holistic);
            out.tutor_holistic_score = overall_score(holistic_scores, holistic);
            detail["holistic"] = scores_to_json(holistic_scores);
        }
        if (log.tutor_arch == "multi" && !log.turns.empty()) {
            auto s = scorer.score(JudgeKind::tutor_deliberation, 0, deliberation);
            out.tutor_deliberation_score = overall_score(s, deliberation);
            detail["tutor_deliberation"] = scores_to_json(s);
        }
        if (log.learner_arch == "ego_superego" && !log.turns.empty()) {
            auto s = scorer.score(JudgeKind::learner_deliberation, 0, deliberation);
            out.learner_deliberation_score = overall_score(s, deliberation);
            detail["learner_deliberation"] = scores_to_json(s);
        }
    } catch (const RowScorer::Failure& failure) {
        const auto error = "malformed judge output (" + failure.detail.channel + "): " + failure.detail.message;
        return failed_fragments(out, error,
                                {{"error", error},
                                 {"channel", failure.detail.channel},
                                 {"turn", failure.detail.turn},
                                 {"raw", failure.detail.raw}});
    } catch (const RunError& e) {
        const auto error = std::string("judge call failed: ") + e.what();
        return failed_fragments(out, error, {{"error", error}});
    }

    first_last(out.tutor_scores, out.tutor_first, out.tutor_last, out.tutor_development);
    first_last(out.learner_scores, out.learner_first, out.learner_last, out.learner_development);
    out.scores_with_reasoning = std::move(detail);
    return out;
}

std::vector<DimensionScore> dimension_scores(const nlohmann::json& scores_with_reasoning, const std::string& channel,
                                             std::optional<std::size_t> turn) {
    std::vector<DimensionScore> out;
    if (!scores_with_reasoning.is_object() || !scores_with_reasoning.contains(channel)) return out;
    const nlohmann::json* node = &scores_with_reasoning.at(channel);
    if (turn) {
        if (!node->is_array() || *turn >= node->size()) return out;
        node = &node->at(*turn);
    }
    if (!node->is_object()) return out;
    for (const auto& [name, value] : node->items()) {
        DimensionScore s;
        s.name = name;
        s.score = value.value("score", 0);
        s.reasoning = value.value("reasoning", "");
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace tutoreval::scoring
