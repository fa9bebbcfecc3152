#include "tutoreval/harness/store.hpp"

#include <algorithm>
#include <numeric>

#include <sqlite3.h>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::harness {

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS evaluation_runs (
    run_id TEXT PRIMARY KEY,
    created_at TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    git_commit TEXT NOT NULL,
    manifest TEXT NOT NULL,
    status TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS evaluation_results (
    row_id INTEGER PRIMARY KEY AUTOINCREMENT,
    run_id TEXT NOT NULL REFERENCES evaluation_runs(run_id),
    dialogue_id TEXT NOT NULL,
    profile_name TEXT NOT NULL,
    scenario_id TEXT NOT NULL,
    replication INTEGER NOT NULL,
    recognition TEXT NOT NULL,
    tutor_arch TEXT NOT NULL,
    learner_arch TEXT NOT NULL,
    judge_model TEXT NOT NULL DEFAULT '',
    tutor_scores TEXT NOT NULL,
    learner_scores TEXT NOT NULL,
    tutor_first_turn_score REAL,
    tutor_last_turn_score REAL,
    tutor_development REAL,
    learner_first_turn_score REAL,
    learner_last_turn_score REAL,
    learner_development REAL,
    tutor_holistic_score REAL,
    tutor_deliberation_score REAL,
    learner_deliberation_score REAL,
    tutor_rubric_version TEXT NOT NULL DEFAULT '',
    learner_rubric_version TEXT NOT NULL DEFAULT '',
    dialogue_rubric_version TEXT NOT NULL DEFAULT '',
    deliberation_rubric_version TEXT NOT NULL DEFAULT '',
    dialogue_content_hash TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    scores_with_reasoning TEXT NOT NULL,
    failed INTEGER NOT NULL DEFAULT 0,
    created_at TEXT NOT NULL,
    UNIQUE(dialogue_id, judge_model, tutor_rubric_version)
);
CREATE INDEX IF NOT EXISTS idx_results_run ON evaluation_results(run_id);
CREATE INDEX IF NOT EXISTS idx_results_epoch ON evaluation_results(tutor_rubric_version);
)sql";

constexpr const char* kResultColumns =
    "row_id, run_id, dialogue_id, profile_name, scenario_id, replication, recognition, tutor_arch, learner_arch, "
    "judge_model, tutor_scores, learner_scores, tutor_first_turn_score, tutor_last_turn_score, tutor_development, "
    "learner_first_turn_score, learner_last_turn_score, learner_development, tutor_holistic_score, "
    "tutor_deliberation_score, learner_deliberation_score, tutor_rubric_version, learner_rubric_version, "
    "dialogue_rubric_version, deliberation_rubric_version, dialogue_content_hash, config_hash, "
    "scores_with_reasoning, failed, created_at";

/// Prepared statement with positional binding helpers.
class Statement {
public:
    Statement(sqlite3* db, const std::string& sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK) {
            throw StoreError(std::string("prepare failed: ") + sqlite3_errmsg(db) + " in: " + sql);
        }
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(const std::string& value) {
        check(sqlite3_bind_text(stmt_, ++index_, value.c_str(), static_cast<int>(value.size()), SQLITE_TRANSIENT));
        return *this;
    }
    Statement& bind(std::int64_t value) {
        check(sqlite3_bind_int64(stmt_, ++index_, value));
        return *this;
    }
    Statement& bind(int value) { return bind(static_cast<std::int64_t>(value)); }
    Statement& bind(bool value) { return bind(static_cast<std::int64_t>(value ? 1 : 0)); }
    Statement& bind(const std::optional<double>& value) {
        check(value ? sqlite3_bind_double(stmt_, ++index_, *value) : sqlite3_bind_null(stmt_, ++index_));
        return *this;
    }

    bool step() {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw StoreError(std::string("statement failed: ") + sqlite3_errmsg(db_));
    }

    std::string text(int col) const {
        const auto* p = sqlite3_column_text(stmt_, col);
        return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
                 : std::string();
    }
    std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
    std::optional<double> real(int col) const {
        if (sqlite3_column_type(stmt_, col) == SQLITE_NULL) return std::nullopt;
        return sqlite3_column_double(stmt_, col);
    }

private:
    void check(int rc) const {
        if (rc != SQLITE_OK) throw StoreError(std::string("bind failed: ") + sqlite3_errmsg(db_));
    }

    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
    int index_ = 0;
};

void exec(sqlite3* db, const char* sql) {
    char* message = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &message) != SQLITE_OK) {
        std::string text = message ? message : "unknown error";
        sqlite3_free(message);
        throw StoreError("exec failed: " + text);
    }
}

/// Commits on success, rolls back when unwinding.
class Transaction {
public:
    explicit Transaction(sqlite3* db) : db_(db) { exec(db_, "BEGIN IMMEDIATE"); }
    ~Transaction() {
        if (!committed_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    }
    void commit() {
        exec(db_, "COMMIT");
        committed_ = true;
    }

private:
    sqlite3* db_;
    bool committed_ = false;
};

nlohmann::json parse_json_column(const std::string& text, const char* column) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw StoreError(std::string("corrupt JSON in column ") + column + ": " + e.what());
    }
}

ResultRow read_row(const Statement& s) {
    ResultRow r;
    int c = 0;
    r.row_id = s.integer(c++);
    r.run_id = s.text(c++);
    r.dialogue_id = s.text(c++);
    r.profile_name = s.text(c++);
    r.scenario_id = s.text(c++);
    r.replication = static_cast<int>(s.integer(c++));
    r.recognition = s.text(c++);
    r.tutor_arch = s.text(c++);
    r.learner_arch = s.text(c++);
    r.judge_model = s.text(c++);
    r.tutor_scores = parse_json_column(s.text(c++), "tutor_scores").get<std::vector<double>>();
    r.learner_scores = parse_json_column(s.text(c++), "learner_scores").get<std::vector<double>>();
    r.tutor_first_turn_score = s.real(c++);
    r.tutor_last_turn_score = s.real(c++);
    r.tutor_development = s.real(c++);
    r.learner_first_turn_score = s.real(c++);
    r.learner_last_turn_score = s.real(c++);
    r.learner_development = s.real(c++);
    r.tutor_holistic_score = s.real(c++);
    r.tutor_deliberation_score = s.real(c++);
    r.learner_deliberation_score = s.real(c++);
    r.tutor_rubric_version = s.text(c++);
    r.learner_rubric_version = s.text(c++);
    r.dialogue_rubric_version = s.text(c++);
    r.deliberation_rubric_version = s.text(c++);
    r.dialogue_content_hash = s.text(c++);
    r.config_hash = s.text(c++);
    r.scores_with_reasoning = parse_json_column(s.text(c++), "scores_with_reasoning");
    r.failed = s.integer(c++) != 0;
    r.created_at = s.text(c++);
    return r;
}

std::int64_t upsert_locked(sqlite3* db, const ResultRow& row) {
    Statement s(db,
                "INSERT INTO evaluation_results (run_id, dialogue_id, profile_name, scenario_id, replication, "
                "recognition, tutor_arch, learner_arch, judge_model, tutor_scores, learner_scores, "
                "tutor_first_turn_score, tutor_last_turn_score, tutor_development, learner_first_turn_score, "
                "learner_last_turn_score, learner_development, tutor_holistic_score, tutor_deliberation_score, "
                "learner_deliberation_score, tutor_rubric_version, learner_rubric_version, dialogue_rubric_version, "
                "deliberation_rubric_version, dialogue_content_hash, config_hash, scores_with_reasoning, failed, "
                "created_at) VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?) "
                "ON CONFLICT(dialogue_id, judge_model, tutor_rubric_version) DO UPDATE SET "
                "run_id=excluded.run_id, profile_name=excluded.profile_name, scenario_id=excluded.scenario_id, "
                "replication=excluded.replication, recognition=excluded.recognition, "
                "tutor_arch=excluded.tutor_arch, learner_arch=excluded.learner_arch, "
                "tutor_scores=excluded.tutor_scores, learner_scores=excluded.learner_scores, "
                "tutor_first_turn_score=excluded.tutor_first_turn_score, "
                "tutor_last_turn_score=excluded.tutor_last_turn_score, tutor_development=excluded.tutor_development, "
                "learner_first_turn_score=excluded.learner_first_turn_score, "
                "learner_last_turn_score=excluded.learner_last_turn_score, "
                "learner_development=excluded.learner_development, "
                "tutor_holistic_score=excluded.tutor_holistic_score, "
                "tutor_deliberation_score=excluded.tutor_deliberation_score, "
                "learner_deliberation_score=excluded.learner_deliberation_score, "
                "learner_rubric_version=excluded.learner_rubric_version, "
                "dialogue_rubric_version=excluded.dialogue_rubric_version, "
                "deliberation_rubric_version=excluded.deliberation_rubric_version, "
                "dialogue_content_hash=excluded.dialogue_content_hash, config_hash=excluded.config_hash, "
                "scores_with_reasoning=excluded.scores_with_reasoning, failed=excluded.failed, "
                "created_at=excluded.created_at");
    s.bind(row.run_id)
        .bind(row.dialogue_id)
        .bind(row.profile_name)
        .bind(row.scenario_id)
        .bind(row.replication)
        .bind(row.recognition)
        .bind(row.tutor_arch)
        .bind(row.learner_arch)
        .bind(row.judge_model)
        .bind(nlohmann::json(row.tutor_scores).dump())
        .bind(nlohmann::json(row.learner_scores).dump())
        .bind(row.tutor_first_turn_score)
        .bind(row.tutor_last_turn_score)
        .bind(row.tutor_development)
        .bind(row.learner_first_turn_score)
        .bind(row.learner_last_turn_score)
        .bind(row.learner_development)
        .bind(row.tutor_holistic_score)
        .bind(row.tutor_deliberation_score)
        .bind(row.learner_deliberation_score)
        .bind(row.tutor_rubric_version)
        .bind(row.learner_rubric_version)
        .bind(row.dialogue_rubric_version)
        .bind(row.deliberation_rubric_version)
        .bind(row.dialogue_content_hash)
        .bind(row.config_hash)
        .bind(row.scores_with_reasoning.dump())
        .bind(row.failed)
        .bind(row.created_at.empty() ? utc_timestamp() : row.created_at);
    s.step();
    Statement id(db, "SELECT row_id FROM evaluation_results WHERE dialogue_id=? AND judge_model=? AND "
                     "tutor_rubric_version=?");
    id.bind(row.dialogue_id).bind(row.judge_model).bind(row.tutor_rubric_version);
    if (!id.step()) throw StoreError("upserted row not found for " + row.dialogue_id);
    return id.integer(0);
}

struct WhereClause {
    std::string sql;
    std::vector<std::string> params;
};

WhereClause build_where(const ResultQuery& q) {
    const auto& allowed = queryable_columns();
    auto check = [&](const std::string& column) {
        if (std::find(allowed.begin(), allowed.end(), column) == allowed.end()) {
            throw ConfigError("column '" + column + "' cannot be used as a filter");
        }
    };
    WhereClause w;
    w.sql = " WHERE tutor_rubric_version = ?";
    w.params.push_back(q.epoch);
    if (q.run_id) {
        w.sql += " AND run_id = ?";
        w.params.push_back(*q.run_id);
    }
    if (q.judge_model) {
        w.sql += " AND judge_model = ?";
        w.params.push_back(*q.judge_model);
    }
    if (!q.include_failed) w.sql += " AND failed = 0";
    for (const auto& [column, value] : q.equals) {
        check(column);
        w.sql += " AND " + column + " = ?";
        w.params.push_back(value);
    }
    for (const auto& column : q.not_null) {
        check(column);
        w.sql += " AND " + column + " IS NOT NULL";
    }
    for (const auto& [column, value] : q.like) {
        check(column);
        w.sql += " AND instr(" + column + ", ?) > 0";
        w.params.push_back(value);
    }
    return w;
}

}  // namespace

const std::vector<std::string>& queryable_columns() {
    static const std::vector<std::string> columns = {
        "run_id", "dialogue_id", "profile_name", "scenario_id", "replication", "recognition", "tutor_arch",
        "learner_arch", "judge_model", "tutor_first_turn_score", "tutor_last_turn_score", "tutor_development",
        "learner_first_turn_score", "learner_last_turn_score", "learner_development", "tutor_holistic_score",
        "tutor_deliberation_score", "learner_deliberation_score", "learner_rubric_version",
        "dialogue_rubric_version", "deliberation_rubric_version", "config_hash", "failed",
    };
    return columns;
}

std::optional<double> ResultRow::tutor_mean() const {
    if (tutor_scores.empty()) return std::nullopt;
    return std::accumulate(tutor_scores.begin(), tutor_scores.end(), 0.0) / static_cast<double>(tutor_scores.size());
}

void ResultRow::apply(const scoring::ScoreFragments& f) {
    judge_model = f.judge_model;
    tutor_scores = f.tutor_scores;
    learner_scores = f.learner_scores;
    tutor_first_turn_score = f.tutor_first;
    tutor_last_turn_score = f.tutor_last;
    tutor_development = f.tutor_development;
    learner_first_turn_score = f.learner_first;
    learner_last_turn_score = f.learner_last;
    learner_development = f.learner_development;
    tutor_holistic_score = f.tutor_holistic_score;
    tutor_deliberation_score = f.tutor_deliberation_score;
    learner_deliberation_score = f.learner_deliberation_score;
    tutor_rubric_version = f.tutor_rubric_version;
    learner_rubric_version = f.learner_rubric_version;
    dialogue_rubric_version = f.dialogue_rubric_version;
    deliberation_rubric_version = f.deliberation_rubric_version;
    scores_with_reasoning = f.scores_with_reasoning;
    failed = f.failed;
    created_at.clear();
}

ResultQuery::ResultQuery(std::string epoch_version) : epoch(std::move(epoch_version)) {
    if (epoch.empty()) {
        throw ConfigError("result queries require a rubric version (epoch)");
    }
}

ResultStore::ResultStore(const std::filesystem::path& path) {
    if (path != ":memory:" && path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
    if (sqlite3_open_v2(path.string().c_str(), &db_, flags, nullptr) != SQLITE_OK) {
        std::string message = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        db_ = nullptr;
        throw StoreError("cannot open store " + path.string() + ": " + message);
    }
    sqlite3_busy_timeout(db_, 5000);
    exec(db_, "PRAGMA foreign_keys = ON");
    exec(db_, kSchema);
}

ResultStore::~ResultStore() { sqlite3_close(db_); }

void ResultStore::insert_run(const RunRecord& run) {
    std::lock_guard lock(mutex_);
    Statement s(db_, "INSERT INTO evaluation_runs (run_id, created_at, config_hash, git_commit, manifest, status) "
                     "VALUES (?,?,?,?,?,?)");
    s.bind(run.run_id).bind(run.created_at).bind(run.config_hash).bind(run.git_commit).bind(run.manifest.dump()).bind(
        run.status);
    try {
        s.step();
    } catch (const StoreError& e) {
        throw StoreError("cannot insert run " + run.run_id + ": " + e.what());
    }
}

void ResultStore::set_run_status(const std::string& run_id, const std::string& status) {
    std::lock_guard lock(mutex_);
    Statement s(db_, "UPDATE evaluation_runs SET status = ? WHERE run_id = ?");
    s.bind(status).bind(run_id);
    s.step();
}

std::optional<RunRecord> ResultStore::get_run(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT run_id, created_at, config_hash, git_commit, manifest, status FROM evaluation_runs "
                     "WHERE run_id = ?");
    s.bind(run_id);
    if (!s.step()) return std::nullopt;
    return RunRecord{s.text(0), s.text(1), s.text(2), s.text(3), parse_json_column(s.text(4), "manifest"), s.text(5)};
}

std::vector<std::string> ResultStore::run_ids() const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT run_id FROM evaluation_runs ORDER BY created_at, run_id");
    std::vector<std::string> out;
    while (s.step()) out.push_back(s.text(0));
    return out;
}

std::int64_t ResultStore::upsert_result(const ResultRow& row) {
    std::lock_guard lock(mutex_);
    Transaction tx(db_);
    const auto id = upsert_locked(db_, row);
    tx.commit();
    return id;
}

std::int64_t ResultStore::replace_placeholder(const ResultRow& scored) {
    std::lock_guard lock(mutex_);
    Transaction tx(db_);
    const auto id = upsert_locked(db_, scored);
    Statement del(db_, "DELETE FROM evaluation_results WHERE dialogue_id = ? AND judge_model = '' AND row_id != ?");
    del.bind(scored.dialogue_id).bind(id);
    del.step();
    tx.commit();
    return id;
}

std::vector<ResultRow> ResultStore::query(const ResultQuery& q) const {
    const auto where = build_where(q);
    std::lock_guard lock(mutex_);
    Statement s(db_, std::string("SELECT ") + kResultColumns + " FROM evaluation_results" + where.sql +
                         " ORDER BY dialogue_id, judge_model");
    for (const auto& p : where.params) s.bind(p);
    std::vector<ResultRow> out;
    while (s.step()) out.push_back(read_row(s));
    return out;
}

std::size_t ResultStore::count(const ResultQuery& q) const {
    const auto where = build_where(q);
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT COUNT(*) FROM evaluation_results" + where.sql);
    for (const auto& p : where.params) s.bind(p);
    s.step();
    return static_cast<std::size_t>(s.integer(0));
}

std::vector<ResultRow> ResultStore::placeholders(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, std::string("SELECT ") + kResultColumns +
                         " FROM evaluation_results WHERE run_id = ? AND judge_model = '' ORDER BY dialogue_id");
    s.bind(run_id);
    std::vector<ResultRow> out;
    while (s.step()) out.push_back(read_row(s));
    return out;
}

std::vector<DialogueRef> ResultStore::dialogues(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT dialogue_id, MIN(profile_name), MIN(scenario_id), MIN(replication), "
                     "MIN(dialogue_content_hash), MIN(config_hash) FROM evaluation_results WHERE run_id = ? GROUP BY dialogue_id "
                     "ORDER BY dialogue_id");
    s.bind(run_id);
    std::vector<DialogueRef> out;
    while (s.step()) {
        out.push_back({s.text(0), s.text(1), s.text(2), static_cast<int>(s.integer(3)), s.text(4), s.text(5)});
    }
    return out;
}

bool ResultStore::has_row(const std::string& dialogue_id, const std::string& judge_model,
                          const std::string& epoch) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT 1 FROM evaluation_results WHERE dialogue_id = ? AND judge_model = ? AND "
                     "tutor_rubric_version = ?");
    s.bind(dialogue_id).bind(judge_model).bind(epoch);
    return s.step();
}

std::vector<std::tuple<std::int64_t, std::string, std::string>> ResultStore::content_hashes(
    const std::optional<std::string>& run_id) const {
    std::lock_guard lock(mutex_);
    std::string sql = "SELECT row_id, dialogue_id, dialogue_content_hash FROM evaluation_results";
    if (run_id) sql += " WHERE run_id = ?";
    sql += " ORDER BY row_id";
    Statement s(db_, sql);
    if (run_id) s.bind(*run_id);
    std::vector<std::tuple<std::int64_t, std::string, std::string>> out;
    while (s.step()) out.emplace_back(s.integer(0), s.text(1), s.text(2));
    return out;
}

std::size_t ResultStore::row_count() const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT COUNT(*) FROM evaluation_results");
    s.step();
    return static_cast<std::size_t>(s.integer(0));
}

}  // namespace tutoreval::harness
