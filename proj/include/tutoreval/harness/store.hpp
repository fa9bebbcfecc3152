#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutoreval/scoring/judge.hpp"

struct sqlite3;

namespace tutoreval::harness {

/// One judged (or not yet judged) dialogue. Rows written by `run` carry an
/// empty judge_model and rubric versions until `evaluate` scores them.
struct ResultRow {
    std::int64_t row_id = 0;
    std::string run_id;
    std::string dialogue_id;
    std::string profile_name;  // cell id
    std::string scenario_id;
    int replication = 0;
    std::string recognition;
    std::string tutor_arch;
    std::string learner_arch;
    std::string judge_model;
    std::vector<double> tutor_scores;
    std::vector<double> learner_scores;
    std::optional<double> tutor_first_turn_score;
    std::optional<double> tutor_last_turn_score;
    std::optional<double> tutor_development;
    std::optional<double> learner_first_turn_score;
    std::optional<double> learner_last_turn_score;
    std::optional<double> learner_development;
    std::optional<double> tutor_holistic_score;
    std::optional<double> tutor_deliberation_score;
    std::optional<double> learner_deliberation_score;
    std::string tutor_rubric_version;
    std::string learner_rubric_version;
    std::string dialogue_rubric_version;
    std::string deliberation_rubric_version;
    std::string dialogue_content_hash;
    std::string config_hash;
    nlohmann::json scores_with_reasoning = nlohmann::json::object();
    bool failed = false;
    std::string created_at;

    bool is_placeholder() const { return judge_model.empty(); }
    /// Mean of the per-turn tutor scores; absent when none.
    std::optional<double> tutor_mean() const;
    void apply(const scoring::ScoreFragments& fragments);
};

struct RunRecord {
    std::string run_id;
    std::string created_at;
    std::string config_hash;
    std::string git_commit;
    nlohmann::json manifest;
    std::string status;
};

/// Every analysis query is scoped to one tutor rubric version (the epoch).
struct ResultQuery {
    explicit ResultQuery(std::string epoch_version);

    std::string epoch;
    std::optional<std::string> run_id;
    std::optional<std::string> judge_model;
    std::map<std::string, std::string> equals;  // column -> value
    std::vector<std::string> not_null;          // columns
    std::map<std::string, std::string> like;    // column -> substring
    bool include_failed = false;
};

/// Distinct dialogues known for a run, independent of scoring epoch.
struct DialogueRef {
    std::string dialogue_id;
    std::string profile_name;
    std::string scenario_id;
    int replication = 0;
    std::string dialogue_content_hash;
    std::string config_hash;
};

/// Single-file SQLite store. All statements are serialized through one mutex,
/// so a store may be shared across worker threads.
class ResultStore {
public:
    explicit ResultStore(const std::filesystem::path& path);  // ":memory:" allowed
    ~ResultStore();
    ResultStore(const ResultStore&) = delete;
    ResultStore& operator=(const ResultStore&) = delete;

    void insert_run(const RunRecord& run);
    void set_run_status(const std::string& run_id, const std::string& status);
    std::optional<RunRecord> get_run(const std::string& run_id) const;
    std::vector<std::string> run_ids() const;

    /// Insert or update on (dialogue_id, judge_model, tutor_rubric_version). Returns row_id.
    std::int64_t upsert_result(const ResultRow& row);
    /// Upserts `scored` and deletes the placeholder row for the same dialogue in one transaction.
    std::int64_t replace_placeholder(const ResultRow& scored);

    std::vector<ResultRow> query(const ResultQuery& q) const;
    std::size_t count(const ResultQuery& q) const;

    std::vector<ResultRow> placeholders(const std::string& run_id) const;
    std::vector<DialogueRef> dialogues(const std::string& run_id) const;
    bool has_row(const std::string& dialogue_id, const std::string& judge_model, const std::string& epoch) const;

    /// (row_id, dialogue_id, dialogue_content_hash) for every row, optionally one run.
    std::vector<std::tuple<std::int64_t, std::string, std::string>> content_hashes(
        const std::optional<std::string>& run_id = std::nullopt) const;

    std::size_t row_count() const;

private:
    sqlite3* db_ = nullptr;
    mutable std::mutex mutex_;
};

/// Filter columns accepted by ResultQuery.
const std::vector<std::string>& queryable_columns();

}  // namespace tutoreval::harness
