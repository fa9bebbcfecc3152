#include "tutoreval/harness/run.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/parallel.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::harness {

namespace fs = std::filesystem;
using dialogue::DialogueLog;

std::string compute_content_hash(std::string_view bytes) { return sha256_hex(bytes); }

std::string canonical_log_bytes(const DialogueLog& log) { return canonical_dump(log.to_json()); }

LogTree::LogTree(fs::path root) : dir_(std::move(root) / "logs" / "tutor-dialogues") {}

fs::path LogTree::content_path(const std::string& content_hash) const { return dir_ / (content_hash + ".json"); }

fs::path LogTree::id_path(const std::string& dialogue_id) const { return dir_ / (dialogue_id + ".json"); }

WrittenLog LogTree::write(const DialogueLog& log) const {
    if (log.dialogue_id.empty()) {
        throw ConfigError("cannot write a dialogue log without an id");
    }
    const auto bytes = canonical_log_bytes(log);
    WrittenLog out;
    out.content_hash = compute_content_hash(bytes);
    out.content_path = content_path(out.content_hash);
    out.id_path = id_path(log.dialogue_id);
    write_file_atomic(out.content_path, bytes);
    write_file_atomic(out.id_path, bytes);
    return out;
}

namespace {

DialogueLog parse_log(const std::string& bytes, const fs::path& path) {
    try {
        return DialogueLog::from_json(nlohmann::json::parse(bytes));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace

DialogueLog LogTree::read_verified(const std::string& content_hash) const {
    const auto path = content_path(content_hash);
    if (!fs::exists(path)) {
        throw ProvenanceError("content-addressed log " + path.string() + " is missing");
    }
    const auto bytes = read_file(path);
    if (compute_content_hash(bytes) != content_hash) {
        throw ProvenanceError("content-addressed log " + path.string() + " does not match its hash");
    }
    return parse_log(bytes, path);
}

DialogueLog LogTree::read_by_id(const std::string& dialogue_id) const {
    const auto path = id_path(dialogue_id);
    return parse_log(read_file(path), path);
}

std::vector<DialogueJob> expand_run_plan(const std::vector<CellConfig>& cells, const std::vector<Scenario>& scenarios,
                                         int replications, const std::string& run_id) {
    if (cells.empty() || scenarios.empty()) {
        throw ConfigError("run plan needs at least one cell and one scenario");
    }
    if (replications < 1) {
        throw ConfigError("replications must be positive");
    }
    std::vector<DialogueJob> jobs;
    for (const auto& cell : cells) {
        for (const auto& scenario : scenarios) {
            for (int rep = 0; rep < replications; ++rep) {
                DialogueJob job;
                job.index = jobs.size();
                job.cell_id = cell.cell_id;
                job.scenario_id = scenario.scenario_id;
                job.replication = rep;
                std::ostringstream id;
                id << (run_id.empty() ? "job" : run_id) << "-" << std::setw(4) << std::setfill('0') << job.index;
                job.dialogue_id = id.str();
                jobs.push_back(std::move(job));
            }
        }
    }
    return jobs;
}

namespace {

template <typename T, typename IdOf>
std::vector<T> pick(const std::vector<std::string>& ids, const std::vector<T>& catalog, IdOf id_of, const char* what) {
    std::vector<T> out;
    for (const auto& id : ids) {
        auto it = std::find_if(catalog.begin(), catalog.end(), [&](const T& item) { return id_of(item) == id; });
        if (it == catalog.end()) {
            throw ConfigError(std::string("unknown ") + what + " id '" + id + "'");
        }
        out.push_back(*it);
    }
    return out;
}

}  // namespace

std::vector<DialogueJob> expand_run_plan(const std::vector<std::string>& cell_ids,
                                         const std::vector<std::string>& scenario_ids, int replications,
                                         const std::vector<CellConfig>& cell_catalog,
                                         const std::vector<Scenario>& scenario_catalog, const std::string& run_id) {
    return expand_run_plan(pick(cell_ids, cell_catalog, [](const CellConfig& c) { return c.cell_id; }, "cell"),
                           pick(scenario_ids, scenario_catalog, [](const Scenario& s) { return s.scenario_id; },
                                "scenario"),
                           replications, run_id);
}

nlohmann::json RunOverrides::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (ego_model) j["ego_model"] = *ego_model;
    if (superego_model) j["superego_model"] = *superego_model;
    if (max_tokens) j["max_tokens"] = *max_tokens;
    return j;
}

RunOverrides RunOverrides::from_json(const nlohmann::json& j) {
    RunOverrides o;
    if (j.contains("ego_model")) o.ego_model = j["ego_model"].get<std::string>();
    if (j.contains("superego_model")) o.superego_model = j["superego_model"].get<std::string>();
    if (j.contains("max_tokens")) o.max_tokens = j["max_tokens"].get<int>();
    return o;
}

std::vector<DialogueJob> RunManifest::jobs() const { return expand_run_plan(cells, scenarios, replications, run_id); }

nlohmann::json RunManifest::to_json() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& c : cells) cells_json.push_back(c.to_json());
    nlohmann::json scenarios_json = nlohmann::json::array();
    for (const auto& s : scenarios) scenarios_json.push_back(s.to_json());
    nlohmann::json prompt_hashes = nlohmann::json::object();
    for (const auto& [cell, roles] : prompts) {
        for (const auto& [role, text] : roles) prompt_hashes[cell][role] = sha256_hex(text);
    }
    return {
        {"run_id", run_id},
        {"cells", cells_json},
        {"scenarios", scenarios_json},
        {"replications", replications},
        {"config_hash", config_hash},
        {"git_commit", git_commit},
        {"created_at", created_at},
        {"overrides", overrides.to_json()},
        {"prompts", prompts},
        {"prompt_hashes", prompt_hashes},
        {"templates", templates},
    };
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        for (const auto& c : j.at("cells")) m.cells.push_back(CellConfig::from_json(c));
        for (const auto& s : j.at("scenarios")) m.scenarios.push_back(Scenario::from_json(s));
        m.replications = j.at("replications").get<int>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.git_commit = j.value("git_commit", "unknown");
        m.created_at = j.value("created_at", "");
        m.overrides = RunOverrides::from_json(j.value("overrides", nlohmann::json::object()));
        m.prompts = j.value("prompts", nlohmann::json::object())
                        .get<std::map<std::string, std::map<std::string, std::string>>>();
        m.templates = j.value("templates", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed run manifest: ") + e.what());
    }
    return m;
}

std::string compute_config_hash(const std::vector<CellConfig>& cells, const std::vector<Scenario>& scenarios) {
    nlohmann::json doc = {{"cells", nlohmann::json::array()}, {"scenarios", nlohmann::json::array()}};
    for (const auto& c : cells) doc["cells"].push_back(c.to_json());
    for (const auto& s : scenarios) doc["scenarios"].push_back(s.to_json());
    return sha256_hex(canonical_dump(doc));
}

std::string compute_cell_hash(const CellConfig& cell) { return sha256_hex(canonical_dump(cell.to_json())); }

std::string new_run_id() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::uint32_t value = 0;
    {
        std::lock_guard lock(mutex);
        value = static_cast<std::uint32_t>(rng());
    }
    std::ostringstream out;
    out << "eval-" << utc_date() << "-" << std::hex << std::setw(8) << std::setfill('0') << value;
    return out.str();
}

std::int64_t persist_result(const ResultRow& row, ResultStore& store, const LogTree& logs) {
    const auto path = logs.content_path(row.dialogue_content_hash);
    if (!fs::exists(path)) {
        throw ProvenanceError("dialogue " + row.dialogue_id + ": log " + path.string() + " is missing");
    }
    if (compute_content_hash(read_file(path)) != row.dialogue_content_hash) {
        throw ProvenanceError("dialogue " + row.dialogue_id + ": log file digest differs from the row's content hash");
    }
    return store.upsert_result(row);
}

ProvenanceReport provenance_audit(const ResultStore& store, const LogTree& logs,
                                  const std::optional<std::string>& run_id) {
    ProvenanceReport report;
    std::size_t matched = 0;
    for (const auto& [row_id, dialogue_id, hash] : store.content_hashes(run_id)) {
        ++report.checked;
        const auto path = logs.content_path(hash);
        if (!fs::exists(path)) {
            report.mismatches.push_back({row_id, dialogue_id, "missing log file"});
            continue;
        }
        if (compute_content_hash(read_file(path)) != hash) {
            report.mismatches.push_back({row_id, dialogue_id, "digest mismatch"});
            continue;
        }
        ++matched;
    }
    if (report.checked > 0) {
        report.match_rate = static_cast<double>(matched) / static_cast<double>(report.checked);
    }
    return report;
}

ExperimentConfig ExperimentConfig::load(const fs::path& harness_yaml) {
    const auto root = load_yaml_file(harness_yaml);
    ExperimentConfig config;
    config.config_dir = harness_yaml.has_parent_path() ? harness_yaml.parent_path() : fs::path(".");
    auto path_of = [&](const char* key) -> std::optional<fs::path> {
        if (!root[key]) return std::nullopt;
        return resolve_path(config.config_dir, root[key].as<std::string>());
    };
    auto required = [&](const char* key) {
        auto p = path_of(key);
        if (!p) throw ConfigError(harness_yaml.string() + ": missing '" + key + "'");
        return *p;
    };
    try {
        config.data_dir = path_of("data_dir").value_or(config.config_dir / "data");
        config.cells = load_cells(required("cells"));
        config.scenarios = load_scenarios(required("scenarios"));
        config.providers = backend::ProviderRegistry::load(required("providers"));
        if (const auto sets = root["scenario_sets"]) {
            for (const auto& kv : sets) {
                auto& ids = config.scenario_sets[kv.first.as<std::string>()];
                for (const auto& id : kv.second) ids.push_back(id.as<std::string>());
            }
        }
        if (const auto templates = root["templates"]) {
            config.templates = dialogue::DialogueTemplates::from_json(yaml_to_json(templates));
        }
        if (const auto rubrics = root["rubrics"]) {
            auto source = [&](const char* key, scoring::RubricSource& target) {
                if (rubrics[key]) target = scoring::RubricSource(resolve_path(config.config_dir, rubrics[key].as<std::string>()));
            };
            source("tutor", config.rubrics.tutor);
            source("learner", config.rubrics.learner);
            source("holistic", config.rubrics.holistic);
            source("deliberation", config.rubrics.deliberation);
        }
        if (const auto judge = root["judge"]) {
            config.judge.provider = judge["provider"].as<std::string>();
            config.judge.model = judge["model"] ? judge["model"].as<std::string>() : std::string();
            config.judge.temperature =
                judge["temperature"] ? judge["temperature"].as<double>() : backend::default_temperature(backend::RoleTag::judge);
            if (judge["system_prompt"]) config.judge.system_prompt = judge["system_prompt"].as<std::string>();
        }
        if (root["recommender"]) config.recommender = root["recommender"].as<std::string>();
        config.lexicon = path_of("lexicon");
        config.ledger_config = path_of("ledger");
        if (const auto ledgers = root["ledgers"]) {
            for (const auto& item : ledgers) config.ledgers.push_back(resolve_path(config.config_dir, item.as<std::string>()));
        }
        if (root["workers"]) config.workers = root["workers"].as<std::size_t>();
    } catch (const YAML::Exception& e) {
        throw ConfigError(harness_yaml.string() + ": " + e.what());
    }
    for (const auto& cell : config.cells) {
        for (const auto& [role, binding] : cell.model_bindings) {
            if (!config.providers.contains(binding.provider)) {
                throw ConfigError("cell " + cell.cell_id + " binds role " + std::string(backend::to_string(role)) +
                                  " to unknown provider '" + binding.provider + "'");
            }
        }
    }
    return config;
}

const CellConfig& ExperimentConfig::cell(const std::string& id) const {
    for (const auto& c : cells) {
        if (c.cell_id == id) return c;
    }
    throw ConfigError("unknown cell id '" + id + "'");
}

const Scenario& ExperimentConfig::scenario(const std::string& id) const {
    for (const auto& s : scenarios) {
        if (s.scenario_id == id) return s;
    }
    throw ConfigError("unknown scenario id '" + id + "'");
}

std::vector<std::string> ExperimentConfig::expand_scenarios(const std::vector<std::string>& ids) const {
    std::vector<std::string> out;
    for (const auto& id : ids) {
        if (auto it = scenario_sets.find(id); it != scenario_sets.end()) {
            out.insert(out.end(), it->second.begin(), it->second.end());
        } else {
            out.push_back(id);
        }
    }
    return out;
}

scoring::JudgeBinding ExperimentConfig::judge_binding(const std::optional<std::string>& judge_override) const {
    std::string provider = judge.provider;
    std::string model = judge.model;
    if (judge_override) {
        // "<provider>/<model>" or a bare provider name.
        const auto slash = judge_override->find('/');
        provider = judge_override->substr(0, slash);
        model = slash == std::string::npos ? std::string() : judge_override->substr(slash + 1);
    }
    if (provider.empty()) {
        throw ConfigError("no judge provider configured");
    }
    scoring::JudgeBinding binding;
    binding.provider = {providers.get(provider), model, judge.temperature};
    binding.judge_model = model.empty() ? provider : provider + "/" + model;
    if (!judge.system_prompt.empty()) binding.system_prompt = judge.system_prompt;
    return binding;
}

std::string detect_git_commit(const fs::path& start) {
    if (const char* env = std::getenv("TUTOREVAL_GIT_COMMIT"); env && *env) {
        return env;
    }
    std::error_code ec;
    fs::path dir = fs::absolute(start, ec);
    while (!dir.empty()) {
        const auto git = dir / ".git";
        if (fs::is_directory(git)) {
            try {
                auto head = trim(read_file(git / "HEAD"));
                if (head.rfind("ref: ", 0) != 0) return head;
                const auto ref = head.substr(5);
                if (fs::exists(git / ref)) return trim(read_file(git / ref));
                std::istringstream packed(fs::exists(git / "packed-refs") ? read_file(git / "packed-refs") : "");
                for (std::string line; std::getline(packed, line);) {
                    if (line.size() > 41 && line.substr(41) == ref) return line.substr(0, 40);
                }
            } catch (const Error&) {
            }
            return "unknown";
        }
        if (dir == dir.root_path()) break;
        dir = dir.parent_path();
    }
    return "unknown";
}

RunManifest plan_run(const ExperimentConfig& config, const std::vector<std::string>& cell_ids,
                     const std::vector<std::string>& scenario_ids, int replications, const RunOverrides& overrides) {
    RunManifest m;
    m.run_id = new_run_id();
    for (const auto& id : cell_ids) {
        auto cell = config.cell(id);
        if (overrides.max_tokens) cell.max_tokens = *overrides.max_tokens;
        m.cells.push_back(std::move(cell));
    }
    for (const auto& id : config.expand_scenarios(scenario_ids)) m.scenarios.push_back(config.scenario(id));
    if (m.cells.empty() || m.scenarios.empty()) {
        throw ConfigError("run needs at least one cell and one scenario");
    }
    if (replications < 1) {
        throw ConfigError("replications must be positive");
    }
    m.replications = replications;
    m.config_hash = compute_config_hash(m.cells, m.scenarios);
    m.git_commit = detect_git_commit(config.config_dir);
    m.created_at = utc_timestamp();
    m.overrides = overrides;
    m.templates = config.templates.to_json();
    for (const auto& cell : m.cells) {
        auto& texts = m.prompts[cell.cell_id];
        for (const auto& [role, file] : cell.prompt_bindings) {
            texts[std::string(backend::to_string(role))] = read_file(resolve_path(config.config_dir, file));
        }
    }
    return m;
}

dialogue::AgentBindings bind_agents(const CellConfig& cell, const backend::ProviderRegistry& providers,
                                    const RunOverrides& overrides) {
    dialogue::AgentBindings bindings;
    for (const auto& [role, binding] : cell.model_bindings) {
        dialogue::BoundProvider bound{providers.get(binding.provider), binding.model, binding.temperature_for(role)};
        if (role == backend::RoleTag::tutor_ego && overrides.ego_model) bound.model = *overrides.ego_model;
        if (role == backend::RoleTag::tutor_superego && overrides.superego_model) bound.model = *overrides.superego_model;
        bindings[role] = std::move(bound);
    }
    return bindings;
}

RunSummary execute_run(const ExperimentConfig& config, const RunManifest& manifest, ResultStore& store,
                       const LogTree& logs) {
    if (!store.get_run(manifest.run_id)) {
        store.insert_run({manifest.run_id, manifest.created_at, manifest.config_hash, manifest.git_commit,
                          manifest.to_json(), "running"});
    } else {
        store.set_run_status(manifest.run_id, "running");
    }
    const auto jobs = manifest.jobs();
    std::set<std::string> done;
    for (const auto& ref : store.dialogues(manifest.run_id)) done.insert(ref.dialogue_id);

    std::map<std::string, const CellConfig*> cells;
    std::map<std::string, std::string> cell_hashes;
    std::map<std::string, dialogue::DialogueSettings> settings;
    std::map<std::string, dialogue::AgentBindings> bindings;
    const auto templates = dialogue::DialogueTemplates::from_json(manifest.templates);
    for (const auto& cell : manifest.cells) {
        cells[cell.cell_id] = &cell;
        cell_hashes[cell.cell_id] = compute_cell_hash(cell);
        auto& s = settings[cell.cell_id];
        s.templates = templates;
        if (auto it = manifest.prompts.find(cell.cell_id); it != manifest.prompts.end()) {
            for (const auto& [role, text] : it->second) s.prompts[backend::parse_role_tag(role)] = text;
        }
        bindings[cell.cell_id] = bind_agents(cell, config.providers, manifest.overrides);
    }
    std::map<std::string, const Scenario*> scenarios;
    for (const auto& s : manifest.scenarios) scenarios[s.scenario_id] = &s;

    std::vector<const DialogueJob*> pending;
    for (const auto& job : jobs) {
        if (!done.count(job.dialogue_id)) pending.push_back(&job);
    }

    RunSummary summary;
    summary.run_id = manifest.run_id;
    summary.jobs = jobs.size();
    summary.skipped = jobs.size() - pending.size();
    std::atomic<std::size_t> failed{0};
    parallel_for(pending.size(), config.workers, [&](std::size_t i) {
        const auto& job = *pending[i];
        const auto& cell = *cells.at(job.cell_id);
        auto log = dialogue::run_dialogue(cell, *scenarios.at(job.scenario_id), bindings.at(job.cell_id),
                                          settings.at(job.cell_id), job.dialogue_id);
        const auto written = logs.write(log);
        ResultRow row;
        row.run_id = manifest.run_id;
        row.dialogue_id = job.dialogue_id;
        row.profile_name = job.cell_id;
        row.scenario_id = job.scenario_id;
        row.replication = job.replication;
        row.recognition = log.recognition;
        row.tutor_arch = log.tutor_arch;
        row.learner_arch = log.learner_arch;
        row.dialogue_content_hash = written.content_hash;
        row.config_hash = cell_hashes.at(job.cell_id);
        row.failed = log.failed;
        if (log.failed) {
            row.scores_with_reasoning = {{"error", log.error}};
            ++failed;
        }
        persist_result(row, store, logs);
    });
    summary.executed = pending.size();
    summary.failed = failed;
    store.set_run_status(manifest.run_id, summary.failed ? "complete_with_failures" : "complete");
    return summary;
}

RunSummary resume_run(const ExperimentConfig& config, const std::string& run_id, ResultStore& store,
                      const LogTree& logs) {
    const auto run = store.get_run(run_id);
    if (!run) {
        throw ConfigError("unknown run id '" + run_id + "'");
    }
    return execute_run(config, RunManifest::from_json(run->manifest), store, logs);
}

namespace {

struct ScoreJob {
    DialogueRef ref;
    std::string run_id;
    bool has_placeholder = false;
};

EvaluateSummary score_jobs(const std::vector<ScoreJob>& jobs, const scoring::JudgeBinding& judge,
                           const scoring::RubricSet& rubrics, ResultStore& store, const LogTree& logs,
                           std::size_t workers, EvaluateSummary summary) {
    std::atomic<std::size_t> failed{0};
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto log = logs.read_verified(job.ref.dialogue_content_hash);
        ResultRow row;
        row.run_id = job.run_id;
        row.dialogue_id = job.ref.dialogue_id;
        row.profile_name = job.ref.profile_name;
        row.scenario_id = job.ref.scenario_id;
        row.replication = job.ref.replication;
        row.recognition = log.recognition;
        row.tutor_arch = log.tutor_arch;
        row.learner_arch = log.learner_arch;
        row.dialogue_content_hash = job.ref.dialogue_content_hash;
        row.config_hash = job.ref.config_hash;
        row.apply(scoring::score_row(log, judge, rubrics));
        if (row.failed) ++failed;
        if (job.has_placeholder) {
            store.replace_placeholder(row);
        } else {
            persist_result(row, store, logs);
        }
    });
    summary.scored = jobs.size();
    summary.failed = failed;
    return summary;
}

}  // namespace

EvaluateSummary evaluate_run(const std::string& run_id, const scoring::JudgeBinding& judge,
                             const scoring::RubricSet& rubrics, ResultStore& store, const LogTree& logs,
                             std::size_t workers) {
    if (!store.get_run(run_id)) {
        throw ConfigError("unknown run id '" + run_id + "'");
    }
    const auto epoch = rubrics.tutor.resolve().version;
    std::set<std::string> placeholder_ids;
    for (const auto& row : store.placeholders(run_id)) placeholder_ids.insert(row.dialogue_id);

    EvaluateSummary summary;
    summary.run_id = run_id;
    summary.judge_model = judge.key();
    std::vector<ScoreJob> jobs;
    for (const auto& ref : store.dialogues(run_id)) {
        if (store.has_row(ref.dialogue_id, summary.judge_model, epoch)) {
            ++summary.skipped;
            continue;
        }
        jobs.push_back({ref, run_id, placeholder_ids.count(ref.dialogue_id) > 0});
    }
    return score_jobs(jobs, judge, rubrics, store, logs, workers, summary);
}

EvaluateSummary rejudge_run(const std::string& run_id, const std::string& epoch, const scoring::JudgeBinding& judge,
                            const scoring::RubricSet& rubrics, ResultStore& store, const LogTree& logs,
                            std::size_t workers) {
    ResultQuery q(epoch);
    q.run_id = run_id;
    q.include_failed = true;
    const auto current_epoch = rubrics.tutor.resolve().version;

    EvaluateSummary summary;
    summary.run_id = run_id;
    summary.judge_model = judge.key();
    std::set<std::string> seen;
    std::vector<ScoreJob> jobs;
    for (const auto& row : store.query(q)) {
        if (!seen.insert(row.dialogue_id).second) continue;
        if (store.has_row(row.dialogue_id, summary.judge_model, current_epoch)) {
            ++summary.skipped;
            continue;
        }
        DialogueRef ref{row.dialogue_id, row.profile_name, row.scenario_id, row.replication,
                        row.dialogue_content_hash, row.config_hash};
        jobs.push_back({ref, run_id, false});
    }
    if (jobs.empty() && seen.empty()) {
        throw ConfigError("run " + run_id + " has no rows scored under rubric version " + epoch);
    }
    return score_jobs(jobs, judge, rubrics, store, logs, workers, summary);
}

}  // namespace tutoreval::harness
