#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutoreval/dialogue/dialogue.hpp"
#include "tutoreval/harness/cell.hpp"
#include "tutoreval/scoring/judge.hpp"

namespace tutoreval::autotune {

struct BenchmarkResult {
    double objective = 0.0;                      // 0-100
    std::map<std::string, double> per_dimension;  // mean raw 1-5 tutor score
    std::size_t dialogues = 0;
    std::size_t failed = 0;
};

struct BenchmarkSpec {
    harness::CellConfig cell;
    harness::Scenario scenario;
    dialogue::AgentBindings agents;
    scoring::JudgeBinding judge;
    scoring::RubricSet rubrics;
    dialogue::DialogueTemplates templates;
    std::vector<std::string> target_dims;  // empty: the full tutor rubric
    std::size_t workers = 1;
};

/// Runs n dialogues with the given prompts and scores every tutor turn. The
/// objective is the mean tutor score, or with target_dims the weighted score
/// restricted to those dimensions, both on the 0-100 scale. BenchmarkError
/// when every dialogue fails.
BenchmarkResult benchmark_prompt(const dialogue::PromptSet& prompts, const BenchmarkSpec& spec, int n,
                                 const std::string& id_prefix = "bench");

/// Content-addressed prompt snapshots: <dir>/<sha256>.json holding role -> text.
class SnapshotArchive {
public:
    explicit SnapshotArchive(std::filesystem::path dir);

    std::string put(const dialogue::PromptSet& prompts) const;
    dialogue::PromptSet get(const std::string& hash) const;
    static std::string hash_of(const dialogue::PromptSet& prompts);

private:
    std::filesystem::path dir_;
};

struct TuneIteration {
    int index = 0;
    std::string snapshot_hash;  // candidate prompts; empty when the edit was unusable
    std::string edit_description;
    std::optional<double> benchmark_score;
    bool accepted = false;
    std::string reason;
    std::map<std::string, double> per_dimension;

    nlohmann::json to_json() const;
    static TuneIteration from_json(const nlohmann::json& j);
};

struct TuneSession {
    std::string session_id;
    std::string cell_id;
    std::string scenario_id;
    std::vector<std::string> target_dims;
    int replications_per_iter = 1;
    std::optional<std::string> guidance;
    std::string created_at;
    std::string baseline_hash;
    double baseline_score = 0.0;
    std::string best_hash;
    double best_score = 0.0;
    std::vector<TuneIteration> iterations;

    /// Best accepted objective after the baseline and after each iteration.
    std::vector<double> best_so_far() const;

    nlohmann::json to_json() const;
    static TuneSession from_json(const nlohmann::json& j);
};

struct RecommenderEdit {
    std::string edit_description;
    std::map<std::string, std::string> files;  // role tag or prompt file name -> full replacement text
};

/// Parses {"edit_description": ..., "files": {...}}; ParseError otherwise.
RecommenderEdit parse_recommendation(std::string_view raw);

struct TuneConfig {
    BenchmarkSpec bench;
    dialogue::PromptSet prompts;  // starting point
    int replications = 1;
    std::optional<std::string> guidance;
    std::filesystem::path session_dir;  // journal and snapshots/ live here
    std::string recommender_system_prompt =
        "You improve tutor prompts. Study the per-dimension scores, then propose one targeted edit. Answer only "
        "with JSON: {\"edit_description\": \"...\", \"files\": {\"<role>\": \"<complete replacement text>\"}}.";
};

struct TuneOutcome {
    TuneSession session;
    dialogue::PromptSet best_prompts;
};

/// Hill climbing: baseline, then k rounds of recommend, apply, benchmark, and
/// keep only on strict improvement. The journal is rewritten after each round.
TuneOutcome tune(const TuneConfig& config, const dialogue::BoundProvider& recommender, int iterations);

std::string new_session_id();

}  // namespace tutoreval::autotune
