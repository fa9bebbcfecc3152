#include "tutoreval/scoring/rubric.hpp"

#include <cmath>
#include <set>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::scoring {

std::string_view to_string(RubricKind kind) {
    switch (kind) {
        case RubricKind::tutor_turn: return "tutor_turn";
        case RubricKind::learner_turn: return "learner_turn";
        case RubricKind::tutor_holistic: return "tutor_holistic";
        case RubricKind::deliberation: return "deliberation";
    }
    return "unknown";
}

RubricKind parse_rubric_kind(std::string_view text) {
    if (text == "tutor_turn" || text == "tutor") return RubricKind::tutor_turn;
    if (text == "learner_turn" || text == "learner") return RubricKind::learner_turn;
    if (text == "tutor_holistic" || text == "holistic" || text == "dialogue") return RubricKind::tutor_holistic;
    if (text == "deliberation") return RubricKind::deliberation;
    throw ConfigError("unknown rubric kind '" + std::string(text) + "'");
}

void Rubric::validate() const {
    if (version.empty()) {
        throw ConfigError("rubric has no version");
    }
    if (dimensions.empty()) {
        throw ConfigError("rubric " + version + " has no dimensions");
    }
    std::set<std::string> seen;
    for (const auto& d : dimensions) {
        if (!seen.insert(d.name).second) {
            throw ConfigError("rubric " + version + ": duplicate dimension '" + d.name + "'");
        }
        if (!(d.weight > 0.0) || !std::isfinite(d.weight)) {
            throw ConfigError("rubric " + version + ": dimension '" + d.name + "' needs a positive weight");
        }
        for (const auto& [level, text] : d.anchors) {
            if (level != 1 && level != 3 && level != 5) {
                throw ConfigError("rubric " + version + ": anchors are only described at levels 1, 3 and 5");
            }
        }
    }
}

const RubricDimension* Rubric::find(std::string_view name) const {
    for (const auto& d : dimensions) {
        if (d.name == name) return &d;
    }
    return nullptr;
}

double Rubric::total_weight() const {
    double total = 0.0;
    for (const auto& d : dimensions) total += d.weight;
    return total;
}

nlohmann::json Rubric::to_json() const {
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : dimensions) {
        nlohmann::json anchors = nlohmann::json::object();
        for (const auto& [level, text] : d.anchors) anchors[std::to_string(level)] = text;
        dims.push_back({{"name", d.name}, {"weight", d.weight}, {"anchors", anchors}});
    }
    return {{"version", version}, {"kind", std::string(to_string(kind))}, {"dimensions", dims}};
}

std::string resolve_rubric_version(const YAML::Node& node) {
    if (!node.IsMap() || !node["version"] || node["version"].IsNull()) {
        throw ConfigError("rubric document has no version field");
    }
    auto version = trim(node["version"].as<std::string>());
    if (version.empty()) {
        throw ConfigError("rubric document has an empty version field");
    }
    return version;
}

std::string resolve_rubric_version(const std::filesystem::path& path) {
    try {
        return resolve_rubric_version(load_yaml_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Rubric Rubric::from_yaml(const YAML::Node& node) {
    Rubric rubric;
    rubric.version = resolve_rubric_version(node);
    if (!node["kind"]) {
        throw ConfigError("rubric " + rubric.version + " has no kind");
    }
    rubric.kind = parse_rubric_kind(node["kind"].as<std::string>());
    if (!node["dimensions"] || !node["dimensions"].IsSequence()) {
        throw ConfigError("rubric " + rubric.version + " has no dimensions list");
    }
    try {
        for (const auto& item : node["dimensions"]) {
            RubricDimension d;
            d.name = item["name"].as<std::string>();
            d.weight = item["weight"].as<double>();
            if (const auto anchors = item["anchors"]) {
                for (const auto& kv : anchors) {
                    d.anchors[kv.first.as<int>()] = kv.second.as<std::string>();
                }
            }
            rubric.dimensions.push_back(std::move(d));
        }
    } catch (const YAML::Exception& e) {
        throw ConfigError("rubric " + rubric.version + ": " + e.what());
    }
    rubric.validate();
    return rubric;
}

Rubric load_rubric(const std::filesystem::path& path) {
    try {
        return Rubric::from_yaml(load_yaml_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Rubric RubricSource::resolve() const {
    if (path_) return load_rubric(*path_);
    return *builtin_;
}

double overall_score(const std::vector<DimensionScore>& scores, const Rubric& rubric) {
    std::map<std::string, int> by_name;
    for (const auto& s : scores) {
        if (rubric.find(s.name) == nullptr) {
            throw ScoreError("dimension '" + s.name + "' is not in rubric " + rubric.version);
        }
        if (!by_name.emplace(s.name, s.score).second) {
            throw ScoreError("dimension '" + s.name + "' scored twice");
        }
        if (s.score < 1 || s.score > 5) {
            throw ScoreError("dimension '" + s.name + "' score " + std::to_string(s.score) + " outside 1..5");
        }
    }
    // Weight is pooled per score level so that a uniform score set yields its
    // level exactly, whatever the weights.
    std::map<int, double> level_weight;
    for (const auto& d : rubric.dimensions) {
        auto it = by_name.find(d.name);
        if (it == by_name.end()) {
            throw ScoreError("dimension '" + d.name + "' missing from scores");
        }
        level_weight[it->second] += d.weight;
    }
    double total = 0.0;
    for (const auto& [level, weight] : level_weight) total += weight;
    double weighted_mean = 0.0;
    for (const auto& [level, weight] : level_weight) weighted_mean += level * (weight / total);
    return (weighted_mean - 1.0) / 4.0 * 100.0;
}

namespace {

RubricDimension dim(std::string name, double weight, std::string low, std::string mid, std::string high) {
    return {std::move(name), weight, {{1, std::move(low)}, {3, std::move(mid)}, {5, std::move(high)}}};
}

}  // namespace

Rubric tutor_rubric_v22() {
    return {"2.2",
            RubricKind::tutor_turn,
            {
                dim("perception_quality", 15, "Ignores what the learner actually said.",
                    "Registers the learner's words but misses the state behind them.",
                    "Reads both content and state and names what the learner is doing."),
                dim("content_accuracy", 10, "Contains factual errors.", "Accurate but thin.",
                    "Accurate, precise and appropriately qualified."),
                dim("pedagogical_craft", 15, "Lectures or dumps information.",
                    "Uses a recognizable teaching move with uneven execution.",
                    "Chooses and executes a move suited to this learner at this point."),
                dim("elicitation_quality", 15, "Asks nothing or asks rhetorical questions.",
                    "Asks questions that check recall.",
                    "Asks questions that draw out the learner's own reasoning."),
                dim("adaptive_responsiveness", 10, "Could have been written without reading the learner.",
                    "Adjusts surface details to the learner.",
                    "Changes approach in response to the learner's last move."),
                dim("productive_difficulty", 10, "Removes all struggle or leaves the learner stranded.",
                    "Keeps some challenge but resolves it too early.",
                    "Holds the learner in useful difficulty with enough support."),
                dim("epistemic_integrity", 10, "Agrees with errors to please the learner.",
                    "Corrects errors but flattens genuine uncertainty.",
                    "Is honest about what is known, contested and unknown."),
                dim("recognition_quality", 15, "Treats the learner as a container for answers.",
                    "Acknowledges the learner's view before moving on.",
                    "Engages the learner's view as a contribution that shapes the exchange."),
            }};
}

Rubric learner_rubric_v22() {
    return {"2.2",
            RubricKind::learner_turn,
            {
                dim("engagement_quality", 25, "Disengaged or one-word replies.", "Responds on topic without initiative.",
                    "Actively works with the material and the tutor."),
                dim("conceptual_progression", 25, "No movement in understanding.", "Some restatement of new ideas.",
                    "Builds visibly on earlier turns toward a better model."),
                dim("revision_signals", 20, "Never revises a stated belief.", "Revises when told to.",
                    "Revises own thinking unprompted and says why."),
                dim("metacognitive_awareness", 15, "No reflection on own understanding.",
                    "Occasional statements of confusion.", "Tracks and articulates what they do and do not get."),
                dim("learner_authenticity", 15, "Reads as a scripted stand-in.", "Plausible but generic.",
                    "Voice and confusions are consistent with the persona."),
            }};
}

Rubric holistic_rubric_v22() {
    return {"2.2",
            RubricKind::tutor_holistic,
            {
                dim("pedagogical_arc", 1, "Turns are disconnected.", "Some progression across turns.",
                    "The dialogue has a clear developmental arc."),
                dim("adaptive_trajectory", 1, "The tutor's approach never changes.",
                    "The approach shifts occasionally.", "The approach evolves with the learner across the dialogue."),
                dim("pedagogical_closure", 1, "Ends abruptly or unresolved.", "Ends with a summary.",
                    "Ends with the learner consolidating what they built."),
            }};
}

Rubric deliberation_rubric_v22() {
    return {"2.2",
            RubricKind::deliberation,
            {
                dim("critique_substance", 1, "Critiques are empty or generic.", "Critiques name real issues vaguely.",
                    "Critiques identify specific, consequential problems."),
                dim("revision_impact", 1, "Revisions ignore the critique.", "Revisions address the critique partly.",
                    "Revisions materially improve the draft."),
                dim("deliberation_depth", 1, "Rubber-stamp exchange.", "One substantive exchange.",
                    "Sustained reasoning across rounds."),
                dim("insight_generation", 1, "No new ideas emerge.", "Minor refinements emerge.",
                    "The exchange produces an idea neither draft had."),
                dim("process_coherence", 1, "Steps contradict each other.", "Steps mostly follow.",
                    "Each step clearly builds on the last."),
                dim("cross_turn_evolution", 1, "Same critiques repeat every turn.", "Some change over turns.",
                    "Critique focus shifts as the dialogue develops."),
            }};
}

Rubric tutor_rubric_v10() {
    const char* low = "Absent or counterproductive.";
    const char* mid = "Present but uneven.";
    const char* high = "Consistently strong.";
    Rubric rubric{"1.0", RubricKind::tutor_turn, {}};
    const std::pair<const char*, double> weights[] = {
        {"relevance", 15},
        {"specificity", 15},
        {"pedagogical_soundness", 15},
        {"personalization", 10},
        {"actionability", 8},
        {"tone", 8},
        {"productive_struggle", 5},
        {"epistemic_honesty", 5},
        {"mutual_recognition", 8.3},
        {"dialectical_responsiveness", 8.3},
        {"transformative_potential", 8.3},
        {"memory_integration", 5},
        {"tutor_adaptation", 5},
        {"learner_growth", 5},
    };
    for (const auto& [name, weight] : weights) {
        rubric.dimensions.push_back(dim(name, weight, low, mid, high));
    }
    return rubric;
}

}  // namespace tutoreval::scoring
