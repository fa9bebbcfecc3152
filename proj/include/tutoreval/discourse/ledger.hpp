#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace tutoreval::discourse {

/// Evidence adapter types, grouped by what they read.
inline const std::vector<std::string>& adapter_types() {
    static const std::vector<std::string> types = {
        // data integrity
        "manifest_total", "manifest_section_total", "db_count", "provenance_check", "log_trace_coverage",
        // effect estimation
        "effect_size", "profile_group_effect_size", "anova_2x2", "judge_pair_correlation",
        // mechanism
        "dimension_variance", "dimension_cluster_effect", "jsonl_critique_stats", "trajectory_slope",
        "conditional_delta", "rubric_version_comparison",
        // structural
        "code_path", "cross_reference",
        // theoretical
        "theoretical",
    };
    return types;
}

struct Statement {
    std::string pattern;
    std::string flags;  // "i" for case-insensitive
    int min_occurrences = 1;
};

enum class AssertOp { eq, approx, lte, gte, exists };

std::string_view to_string(AssertOp op);
AssertOp parse_assert_op(std::string_view text);

struct Assertion {
    AssertOp op = AssertOp::exists;
    nlohmann::json expected;
    std::optional<double> tolerance;
};

struct Claim {
    std::string id;
    std::string description;
    std::optional<Statement> statement;
    std::string evidence_type;
    nlohmann::json evidence = nlohmann::json::object();  // full evidence block, params included
    Assertion assertion;
    std::vector<std::string> depends_on;
    std::vector<std::string> remediation;
    nlohmann::json metadata = nlohmann::json::object();  // used by symmetry rules
    std::string source_file;

    /// Claim referenced by cross_reference evidence, if any.
    std::optional<std::string> cross_reference_target() const;
    /// Explicit dependencies followed by the implicit cross_reference edge.
    std::vector<std::string> all_dependencies() const;

    static Claim from_yaml(const YAML::Node& node, const std::string& source_file = {});
};

using Ledger = std::vector<Claim>;

/// Merges claim files (a top-level list or a `claims:` list). Duplicate ids
/// and unknown adapter types are LedgerError.
Ledger load_ledger(const std::vector<std::filesystem::path>& paths);
Ledger parse_ledger(const YAML::Node& root, const std::string& source_file = {});

struct StatementMatch {
    std::size_t occurrences = 0;
    bool orphaned = false;
};

/// Regex occurrence count in the paper text; orphaned iff below min_occurrences.
StatementMatch locate_statement(const Claim& claim, const std::string& paper_text);

/// Pass/fail for a value under an assertion. A non-numeric value under a
/// numeric op is a failure, not an error.
bool apply_assertion(const Assertion& assertion, const nlohmann::json& value);

}  // namespace tutoreval::discourse
