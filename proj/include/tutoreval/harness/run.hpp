#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutoreval/backend/provider_registry.hpp"
#include "tutoreval/dialogue/dialogue.hpp"
#include "tutoreval/harness/cell.hpp"
#include "tutoreval/harness/store.hpp"
#include "tutoreval/scoring/judge.hpp"

namespace tutoreval::harness {

/// SHA-256 hex of the exact bytes given.
std::string compute_content_hash(std::string_view bytes);

/// Canonical bytes of a dialogue log: the form written to disk and hashed.
std::string canonical_log_bytes(const dialogue::DialogueLog& log);

struct WrittenLog {
    std::string content_hash;
    std::filesystem::path content_path;
    std::filesystem::path id_path;
};

/// logs/tutor-dialogues/<sha256>.json and logs/tutor-dialogues/<dialogue_id>.json
class LogTree {
public:
    explicit LogTree(std::filesystem::path root);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path content_path(const std::string& content_hash) const;
    std::filesystem::path id_path(const std::string& dialogue_id) const;

    /// Writes both copies atomically.
    WrittenLog write(const dialogue::DialogueLog& log) const;
    /// Reads the content-addressed copy and verifies its digest (ProvenanceError on mismatch).
    dialogue::DialogueLog read_verified(const std::string& content_hash) const;
    dialogue::DialogueLog read_by_id(const std::string& dialogue_id) const;

private:
    std::filesystem::path dir_;
};

struct DialogueJob {
    std::size_t index = 0;
    std::string cell_id;
    std::string scenario_id;
    int replication = 0;
    std::string dialogue_id;
};

/// Cell-major cartesian expansion: |cells| x |scenarios| x replications jobs.
std::vector<DialogueJob> expand_run_plan(const std::vector<CellConfig>& cells, const std::vector<Scenario>& scenarios,
                                         int replications, const std::string& run_id = {});

/// Looks ids up in the catalogs first; unknown ids are ConfigError.
std::vector<DialogueJob> expand_run_plan(const std::vector<std::string>& cell_ids,
                                         const std::vector<std::string>& scenario_ids, int replications,
                                         const std::vector<CellConfig>& cell_catalog,
                                         const std::vector<Scenario>& scenario_catalog, const std::string& run_id = {});

struct RunOverrides {
    std::optional<std::string> ego_model;
    std::optional<std::string> superego_model;
    std::optional<int> max_tokens;

    nlohmann::json to_json() const;
    static RunOverrides from_json(const nlohmann::json& j);
};

/// A run's identity plus everything needed to reproduce it exactly.
struct RunManifest {
    std::string run_id;
    std::vector<CellConfig> cells;
    std::vector<Scenario> scenarios;
    int replications = 1;
    std::string config_hash;
    std::string git_commit;
    std::string created_at;
    RunOverrides overrides;
    std::map<std::string, std::map<std::string, std::string>> prompts;  // cell -> role -> text
    nlohmann::json templates = nlohmann::json::object();

    std::vector<DialogueJob> jobs() const;
    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

/// SHA-256 over the canonical {cells, scenarios} JSON.
std::string compute_config_hash(const std::vector<CellConfig>& cells, const std::vector<Scenario>& scenarios);
std::string compute_cell_hash(const CellConfig& cell);

/// "eval-YYYY-MM-DD-<8 hex>".
std::string new_run_id();

/// Verifies the content-addressed log matches row.dialogue_content_hash, then upserts.
std::int64_t persist_result(const ResultRow& row, ResultStore& store, const LogTree& logs);

struct ProvenanceMismatch {
    std::int64_t row_id = 0;
    std::string dialogue_id;
    std::string reason;
};

struct ProvenanceReport {
    double match_rate = 0.0;  // 0 for an empty store
    std::size_t checked = 0;
    std::vector<ProvenanceMismatch> mismatches;
};

ProvenanceReport provenance_audit(const ResultStore& store, const LogTree& logs,
                                  const std::optional<std::string>& run_id = std::nullopt);

struct JudgeSettings {
    std::string provider;
    std::string model;
    double temperature = 0.2;
    std::string system_prompt;
};

/// Everything loaded from config/harness.yaml. Relative paths resolve against
/// the directory holding that file.
struct ExperimentConfig {
    std::filesystem::path config_dir;
    std::filesystem::path data_dir;
    std::vector<CellConfig> cells;
    std::vector<Scenario> scenarios;
    std::map<std::string, std::vector<std::string>> scenario_sets;  // alias -> scenario ids
    backend::ProviderRegistry providers;
    dialogue::DialogueTemplates templates;
    scoring::RubricSet rubrics;
    JudgeSettings judge;
    std::optional<std::string> recommender;  // "<provider>[/<model>]" for autotune
    std::optional<std::filesystem::path> lexicon;
    std::vector<std::filesystem::path> ledgers;
    std::optional<std::filesystem::path> ledger_config;
    std::size_t workers = 4;

    static ExperimentConfig load(const std::filesystem::path& harness_yaml);

    std::filesystem::path store_path() const { return data_dir / "evaluations.db"; }
    std::filesystem::path log_root() const { return data_dir; }
    const CellConfig& cell(const std::string& id) const;
    const Scenario& scenario(const std::string& id) const;
    /// Expands scenario-set aliases; plain ids pass through.
    std::vector<std::string> expand_scenarios(const std::vector<std::string>& ids) const;
    scoring::JudgeBinding judge_binding(const std::optional<std::string>& judge_override = std::nullopt) const;
};

/// Best-effort commit id: $TUTOREVAL_GIT_COMMIT, else .git/HEAD above `start`, else "unknown".
std::string detect_git_commit(const std::filesystem::path& start);

struct RunSummary {
    std::string run_id;
    std::size_t jobs = 0;
    std::size_t executed = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
};

/// Builds the manifest (resolving prompt texts from disk) without executing anything.
RunManifest plan_run(const ExperimentConfig& config, const std::vector<std::string>& cell_ids,
                     const std::vector<std::string>& scenario_ids, int replications, const RunOverrides& overrides);

/// Registers the run if new and executes every job without a stored row.
RunSummary execute_run(const ExperimentConfig& config, const RunManifest& manifest, ResultStore& store,
                       const LogTree& logs);

/// Re-reads the manifest (including overrides) from the store and finishes missing jobs.
RunSummary resume_run(const ExperimentConfig& config, const std::string& run_id, ResultStore& store,
                      const LogTree& logs);

/// Agent bindings for one cell after applying run overrides.
dialogue::AgentBindings bind_agents(const CellConfig& cell, const backend::ProviderRegistry& providers,
                                    const RunOverrides& overrides);

struct EvaluateSummary {
    std::string run_id;
    std::string judge_model;
    std::size_t scored = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
};

/// Scores every dialogue of the run that has no row for this judge in the
/// current tutor rubric epoch. Placeholder rows are converted in place.
EvaluateSummary evaluate_run(const std::string& run_id, const scoring::JudgeBinding& judge,
                             const scoring::RubricSet& rubrics, ResultStore& store, const LogTree& logs,
                             std::size_t workers = 4);

/// Re-scores rows of `epoch` under a new judge; original rows are kept.
EvaluateSummary rejudge_run(const std::string& run_id, const std::string& epoch, const scoring::JudgeBinding& judge,
                            const scoring::RubricSet& rubrics, ResultStore& store, const LogTree& logs,
                            std::size_t workers = 4);

}  // namespace tutoreval::harness
