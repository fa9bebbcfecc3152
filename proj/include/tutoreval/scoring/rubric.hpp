#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace tutoreval::scoring {

enum class RubricKind { tutor_turn, learner_turn, tutor_holistic, deliberation };

std::string_view to_string(RubricKind kind);
RubricKind parse_rubric_kind(std::string_view text);

struct RubricDimension {
    std::string name;
    double weight = 0.0;                // percent; renormalized at use
    std::map<int, std::string> anchors;  // only levels 1, 3 and 5 are described
};

struct Rubric {
    std::string version;
    RubricKind kind = RubricKind::tutor_turn;
    std::vector<RubricDimension> dimensions;

    /// Non-empty, unique names, positive weights, anchors only at 1/3/5.
    void validate() const;
    const RubricDimension* find(std::string_view name) const;
    double total_weight() const;

    nlohmann::json to_json() const;
    static Rubric from_yaml(const YAML::Node& node);  // throws ConfigError
};

struct DimensionScore {
    std::string name;
    int score = 0;  // 1..5
    std::string reasoning;
};

/// ((sum(s*w)/sum(w) - 1) / 4) * 100. Every rubric dimension must appear
/// exactly once with a score in 1..5, otherwise ScoreError.
double overall_score(const std::vector<DimensionScore>& scores, const Rubric& rubric);

Rubric tutor_rubric_v22();
Rubric learner_rubric_v22();
Rubric holistic_rubric_v22();
Rubric deliberation_rubric_v22();
/// Fourteen-dimension tutor rubric whose raw weights total 120.9.
Rubric tutor_rubric_v10();

/// Reads the file fresh on every call so edits between writes are picked up.
Rubric load_rubric(const std::filesystem::path& path);

/// The `version` field of a rubric document. ConfigError when absent.
std::string resolve_rubric_version(const YAML::Node& node);
std::string resolve_rubric_version(const std::filesystem::path& path);

/// A rubric that is either built in or re-read from disk at each use.
class RubricSource {
public:
    explicit RubricSource(Rubric builtin) : builtin_(std::move(builtin)) {}
    explicit RubricSource(std::filesystem::path path) : path_(std::move(path)) {}

    Rubric resolve() const;
    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    std::optional<Rubric> builtin_;
    std::optional<std::filesystem::path> path_;
};

struct RubricSet {
    RubricSource tutor{tutor_rubric_v22()};
    RubricSource learner{learner_rubric_v22()};
    RubricSource holistic{holistic_rubric_v22()};
    RubricSource deliberation{deliberation_rubric_v22()};
};

}  // namespace tutoreval::scoring
