#include "tutoreval/autotune/autotune.hpp"

#include <cmath>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/parallel.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::autotune {

namespace fs = std::filesystem;
using nlohmann::json;
using backend::RoleTag;

namespace {

scoring::Rubric restrict_rubric(const scoring::Rubric& rubric, const std::vector<std::string>& dims) {
    scoring::Rubric out = rubric;
    out.dimensions.clear();
    for (const auto& name : dims) {
        const auto* dim = rubric.find(name);
        if (!dim) throw ConfigError("target dimension '" + name + "' is not in tutor rubric " + rubric.version);
        out.dimensions.push_back(*dim);
    }
    return out;
}

}  // namespace

BenchmarkResult benchmark_prompt(const dialogue::PromptSet& prompts, const BenchmarkSpec& spec, int n,
                                 const std::string& id_prefix) {
    if (n < 1) throw ConfigError("benchmark needs at least one dialogue");
    const auto tutor_rubric = spec.rubrics.tutor.resolve();
    const auto objective_rubric = spec.target_dims.empty() ? tutor_rubric : restrict_rubric(tutor_rubric, spec.target_dims);

    dialogue::DialogueSettings settings{prompts, spec.templates};
    struct Outcome {
        bool ok = false;
        std::vector<double> turn_objectives;
        std::vector<scoring::DimensionScore> dims;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(n));
    parallel_for(outcomes.size(), spec.workers, [&](std::size_t i) {
        const auto log = dialogue::run_dialogue(spec.cell, spec.scenario, spec.agents, settings,
                                                id_prefix + "-" + std::to_string(i));
        if (log.failed) return;
        const auto fragments = scoring::score_row(log, spec.judge, spec.rubrics);
        if (fragments.failed) return;
        auto& out = outcomes[i];
        for (std::size_t t = 0; t < log.turns.size(); ++t) {
            const auto turn_dims = scoring::dimension_scores(fragments.scores_with_reasoning, "tutor_turns", t);
            std::vector<scoring::DimensionScore> picked;
            for (const auto& d : turn_dims) {
                if (objective_rubric.find(d.name)) picked.push_back(d);
            }
            out.turn_objectives.push_back(scoring::overall_score(picked, objective_rubric));
            out.dims.insert(out.dims.end(), turn_dims.begin(), turn_dims.end());
        }
        out.ok = !out.turn_objectives.empty();
    });

    BenchmarkResult result;
    std::map<std::string, std::pair<double, std::size_t>> dim_sums;
    double total = 0.0;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++result.failed;
            continue;
        }
        ++result.dialogues;
        double sum = 0.0;
        for (double v : o.turn_objectives) sum += v;
        total += sum / static_cast<double>(o.turn_objectives.size());
        for (const auto& d : o.dims) {
            auto& [s, c] = dim_sums[d.name];
            s += d.score;
            ++c;
        }
    }
    if (result.dialogues == 0) {
        throw BenchmarkError("all " + std::to_string(n) + " benchmark dialogues failed");
    }
    result.objective = total / static_cast<double>(result.dialogues);
    for (const auto& [name, sc] : dim_sums) result.per_dimension[name] = sc.first / static_cast<double>(sc.second);
    return result;
}

namespace {

json prompts_json(const dialogue::PromptSet& prompts) {
    json j = json::object();
    for (const auto& [role, text] : prompts) j[std::string(backend::to_string(role))] = text;
    return j;
}

}  // namespace

SnapshotArchive::SnapshotArchive(fs::path dir) : dir_(std::move(dir)) {}

std::string SnapshotArchive::hash_of(const dialogue::PromptSet& prompts) {
    return sha256_hex(canonical_dump(prompts_json(prompts)));
}

std::string SnapshotArchive::put(const dialogue::PromptSet& prompts) const {
    const auto bytes = canonical_dump(prompts_json(prompts));
    const auto hash = sha256_hex(bytes);
    const auto path = dir_ / (hash + ".json");
    if (!fs::exists(path)) write_file_atomic(path, bytes);
    return hash;
}

dialogue::PromptSet SnapshotArchive::get(const std::string& hash) const {
    const auto path = dir_ / (hash + ".json");
    if (!fs::exists(path)) throw ProvenanceError("prompt snapshot " + hash + " is missing");
    const auto bytes = read_file(path);
    if (sha256_hex(bytes) != hash) throw ProvenanceError("prompt snapshot " + hash + " does not match its hash");
    const auto doc = json::parse(bytes);
    dialogue::PromptSet out;
    for (const auto& [role, text] : doc.items()) {
        out[backend::parse_role_tag(role)] = text.get<std::string>();
    }
    return out;
}

json TuneIteration::to_json() const {
    return {
        {"index", index},
        {"snapshot_hash", snapshot_hash},
        {"edit_description", edit_description},
        {"benchmark_score", benchmark_score ? json(*benchmark_score) : json(nullptr)},
        {"accepted", accepted},
        {"reason", reason},
        {"per_dimension", per_dimension},
    };
}

TuneIteration TuneIteration::from_json(const json& j) {
    TuneIteration it;
    it.index = j.at("index").get<int>();
    it.snapshot_hash = j.value("snapshot_hash", "");
    it.edit_description = j.value("edit_description", "");
    if (j.contains("benchmark_score") && !j["benchmark_score"].is_null()) {
        it.benchmark_score = j["benchmark_score"].get<double>();
    }
    it.accepted = j.value("accepted", false);
    it.reason = j.value("reason", "");
    it.per_dimension = j.value("per_dimension", json::object()).get<std::map<std::string, double>>();
    return it;
}

std::vector<double> TuneSession::best_so_far() const {
    std::vector<double> out{baseline_score};
    double best = baseline_score;
    for (const auto& it : iterations) {
        if (it.accepted && it.benchmark_score) best = *it.benchmark_score;
        out.push_back(best);
    }
    return out;
}

json TuneSession::to_json() const {
    json items = json::array();
    for (const auto& it : iterations) items.push_back(it.to_json());
    return {
        {"session_id", session_id},
        {"cell_id", cell_id},
        {"scenario_id", scenario_id},
        {"target_dims", target_dims},
        {"replications_per_iter", replications_per_iter},
        {"guidance", guidance ? json(*guidance) : json(nullptr)},
        {"created_at", created_at},
        {"baseline_hash", baseline_hash},
        {"baseline_score", baseline_score},
        {"best_hash", best_hash},
        {"best_score", best_score},
        {"iterations", items},
    };
}

TuneSession TuneSession::from_json(const json& j) {
    TuneSession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.cell_id = j.at("cell_id").get<std::string>();
    s.scenario_id = j.at("scenario_id").get<std::string>();
    s.target_dims = j.value("target_dims", std::vector<std::string>{});
    s.replications_per_iter = j.value("replications_per_iter", 1);
    if (j.contains("guidance") && !j["guidance"].is_null()) s.guidance = j["guidance"].get<std::string>();
    s.created_at = j.value("created_at", "");
    s.baseline_hash = j.value("baseline_hash", "");
    s.baseline_score = j.value("baseline_score", 0.0);
    s.best_hash = j.value("best_hash", "");
    s.best_score = j.value("best_score", 0.0);
    for (const auto& it : j.value("iterations", json::array())) s.iterations.push_back(TuneIteration::from_json(it));
    return s;
}

RecommenderEdit parse_recommendation(std::string_view raw) {
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        throw ParseError("recommender output has no JSON object");
    }
    json j;
    try {
        j = json::parse(raw.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw ParseError(std::string("recommender output is not valid JSON: ") + e.what());
    }
    if (!j.contains("files") || !j["files"].is_object() || j["files"].empty()) {
        throw ParseError("recommender output has no 'files' object");
    }
    RecommenderEdit edit;
    edit.edit_description = j.contains("edit_description") && j["edit_description"].is_string()
                                ? j["edit_description"].get<std::string>()
                                : "";
    for (const auto& [name, text] : j["files"].items()) {
        if (!text.is_string() || trim(text.get<std::string>()).empty()) {
            throw ParseError("recommender file '" + name + "' has no replacement text");
        }
        edit.files[name] = text.get<std::string>();
    }
    return edit;
}

namespace {

/// Resolves an edit's file key to the role it replaces: a role tag, or the
/// file name bound to a role in the cell.
RoleTag target_role(const std::string& key, const harness::CellConfig& cell, const dialogue::PromptSet& prompts) {
    for (const auto& [role, file] : cell.prompt_bindings) {
        if (fs::path(file).filename().string() == fs::path(key).filename().string()) return role;
    }
    RoleTag role;
    try {
        role = backend::parse_role_tag(key);
    } catch (const ConfigError&) {
        throw ParseError("recommender edited unknown prompt '" + key + "'");
    }
    if (!prompts.count(role)) throw ParseError("recommender edited prompt '" + key + "', which this cell does not use");
    return role;
}

std::string recommender_context(const dialogue::PromptSet& prompts, const BenchmarkResult& best,
                                const TuneConfig& config) {
    std::vector<std::pair<std::string, double>> dims(best.per_dimension.begin(), best.per_dimension.end());
    std::sort(dims.begin(), dims.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "Current objective: " << best.objective << "\n";
    if (!config.bench.target_dims.empty()) {
        out << "Target dimensions:";
        for (const auto& d : config.bench.target_dims) out << " " << d;
        out << "\n";
    }
    out << "Per-dimension mean scores (1-5), weakest first:\n";
    for (const auto& [name, v] : dims) out << "- " << name << ": " << v << "\n";
    for (const auto& [role, text] : prompts) {
        out << "\n=== " << backend::to_string(role) << " ===\n" << text << "\n";
    }
    if (config.guidance) out << "\nOperator guidance:\n" << *config.guidance << "\n";
    return out.str();
}

void write_journal(const fs::path& dir, const TuneSession& session) {
    write_file_atomic(dir / (session.session_id + ".json"), session.to_json().dump(2) + "\n");
}

}  // namespace

std::string new_session_id() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::uint32_t value = 0;
    {
        std::lock_guard lock(mutex);
        value = static_cast<std::uint32_t>(rng());
    }
    std::ostringstream out;
    out << "tune-" << utc_date() << "-" << std::hex << std::setw(8) << std::setfill('0') << value;
    return out.str();
}

TuneOutcome tune(const TuneConfig& config, const dialogue::BoundProvider& recommender, int iterations) {
    if (iterations < 0) throw ConfigError("iterations must be non-negative");
    if (config.replications < 1) throw ConfigError("replications per iteration must be positive");
    const SnapshotArchive archive(config.session_dir / "snapshots");

    TuneOutcome outcome;
    auto& session = outcome.session;
    session.session_id = new_session_id();
    session.cell_id = config.bench.cell.cell_id;
    session.scenario_id = config.bench.scenario.scenario_id;
    session.target_dims = config.bench.target_dims;
    session.replications_per_iter = config.replications;
    session.guidance = config.guidance;
    session.created_at = utc_timestamp();

    outcome.best_prompts = config.prompts;
    auto best = benchmark_prompt(outcome.best_prompts, config.bench, config.replications, session.session_id + "-base");
    session.baseline_hash = archive.put(outcome.best_prompts);
    session.baseline_score = best.objective;
    session.best_hash = session.baseline_hash;
    session.best_score = best.objective;
    write_journal(config.session_dir, session);

    for (int k = 1; k <= iterations; ++k) {
        TuneIteration it;
        it.index = k;
        backend::ChatRequest request;
        request.role = RoleTag::recommender;
        request.system_prompt = config.recommender_system_prompt;
        request.messages = {{backend::Speaker::user, recommender_context(outcome.best_prompts, best, config)}};
        request.temperature = recommender.temperature;
        request.model = recommender.model;
        request.turn_index = k;

        try {
            const auto response = backend::complete(request, *recommender.provider);
            const auto edit = parse_recommendation(response.text);
            it.edit_description = edit.edit_description;
            auto candidate = outcome.best_prompts;
            for (const auto& [key, text] : edit.files) {
                candidate[target_role(key, config.bench.cell, candidate)] = text;
            }
            it.snapshot_hash = archive.put(candidate);
            const auto result =
                benchmark_prompt(candidate, config.bench, config.replications, session.session_id + "-" + std::to_string(k));
            it.benchmark_score = result.objective;
            it.per_dimension = result.per_dimension;
            if (result.objective > session.best_score) {
                it.accepted = true;
                it.reason = "improved";
                outcome.best_prompts = std::move(candidate);
                best = result;
                session.best_hash = it.snapshot_hash;
                session.best_score = result.objective;
            } else {
                it.reason = "no improvement";
            }
        } catch (const ParseError& e) {
            it.reason = std::string("unusable recommendation: ") + e.what();
        } catch (const BenchmarkError& e) {
            it.reason = std::string("benchmark failed: ") + e.what();
        }
        session.iterations.push_back(std::move(it));
        write_journal(config.session_dir, session);
    }
    return outcome;
}

}  // namespace tutoreval::autotune
