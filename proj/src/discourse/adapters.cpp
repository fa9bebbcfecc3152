#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"
#include "tutoreval/discourse/validate.hpp"
#include "tutoreval/metrics/metrics.hpp"
#include "tutoreval/scoring/judge.hpp"
#include "tutoreval/stats/stats.hpp"

namespace tutoreval::discourse {

namespace fs = std::filesystem;
using harness::ResultRow;
using nlohmann::json;

namespace {

std::string param(const json& ev, const char* key, const std::string& fallback) {
    return ev.contains(key) && ev[key].is_string() ? ev[key].get<std::string>() : fallback;
}

std::vector<std::string> string_list(const json& ev, const char* key) {
    std::vector<std::string> out;
    if (!ev.contains(key)) return out;
    if (ev[key].is_string()) return {ev[key].get<std::string>()};
    for (const auto& v : ev[key]) out.push_back(v.get<std::string>());
    return out;
}

std::string scalar_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

const harness::ResultStore& need_store(const Claim& claim, const DataSources& sources) {
    if (!sources.store) throw ConfigError("claim " + claim.id + " needs the result store, which is not configured");
    return *sources.store;
}

const harness::LogTree& need_logs(const Claim& claim, const DataSources& sources) {
    if (!sources.logs) throw ConfigError("claim " + claim.id + " needs the dialogue log tree, which is not configured");
    return *sources.logs;
}

/// Evidence filter grammar: equality, not-null and substring-like. SQL-style
/// '%' wildcards in like patterns are stripped.
harness::ResultQuery build_query(const json& ev, const DataSources& sources, const std::string& epoch_override = {}) {
    harness::ResultQuery q(epoch_override.empty() ? param(ev, "epoch", sources.epoch) : epoch_override);
    if (ev.contains("run_id")) q.run_id = ev["run_id"].get<std::string>();
    if (ev.contains("judge_model")) q.judge_model = ev["judge_model"].get<std::string>();
    q.include_failed = ev.value("include_failed", false);
    if (!ev.contains("filters")) return q;
    const auto& f = ev["filters"];
    if (f.contains("not_null")) {
        for (const auto& c : f["not_null"]) q.not_null.push_back(c.get<std::string>());
    }
    if (f.contains("like")) {
        for (const auto& [column, pattern] : f["like"].items()) {
            auto text = pattern.get<std::string>();
            text.erase(std::remove(text.begin(), text.end(), '%'), text.end());
            q.like[column] = text;
        }
    }
    if (f.contains("eq")) {
        for (const auto& [column, value] : f["eq"].items()) q.equals[column] = scalar_text(value);
    }
    return q;
}

std::vector<ResultRow> query_rows(const Claim& claim, const DataSources& sources, const std::string& epoch = {}) {
    auto rows = need_store(claim, sources).query(build_query(claim.evidence, sources, epoch));
    // Placeholder rows carry no scores; they never count as evidence.
    rows.erase(std::remove_if(rows.begin(), rows.end(), [](const ResultRow& r) { return r.is_placeholder(); }),
               rows.end());
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.dialogue_id, a.judge_model) < std::tie(b.dialogue_id, b.judge_model);
    });
    return rows;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Everything a row contributes to a fingerprint; row ids and timestamps are
/// excluded so that re-inserting identical data keeps fingerprints stable.
json row_digest(const ResultRow& r) {
    return {
        {"dialogue_id", r.dialogue_id},
        {"judge_model", r.judge_model},
        {"profile_name", r.profile_name},
        {"recognition", r.recognition},
        {"tutor_arch", r.tutor_arch},
        {"learner_arch", r.learner_arch},
        {"tutor_scores", r.tutor_scores},
        {"learner_scores", r.learner_scores},
        {"tutor_holistic_score", optional_json(r.tutor_holistic_score)},
        {"tutor_rubric_version", r.tutor_rubric_version},
        {"dialogue_content_hash", r.dialogue_content_hash},
        {"scores_with_reasoning", r.scores_with_reasoning},
        {"failed", r.failed},
    };
}

json digest_all(const std::vector<ResultRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) out.push_back(row_digest(r));
    return out;
}

std::string column_text(const ResultRow& r, const std::string& column) {
    if (column == "recognition") return r.recognition;
    if (column == "tutor_arch") return r.tutor_arch;
    if (column == "learner_arch") return r.learner_arch;
    if (column == "profile_name") return r.profile_name;
    if (column == "scenario_id") return r.scenario_id;
    if (column == "judge_model") return r.judge_model;
    if (column == "run_id") return r.run_id;
    throw ConfigError("cannot group by column '" + column + "'");
}

std::optional<double> list_mean(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    return stats::mean(xs);
}

std::optional<double> metric_value(const ResultRow& r, const std::string& metric) {
    if (metric == "tutor_mean") return r.tutor_mean();
    if (metric == "learner_mean") return list_mean(r.learner_scores);
    if (metric == "tutor_first_turn_score") return r.tutor_first_turn_score;
    if (metric == "tutor_last_turn_score") return r.tutor_last_turn_score;
    if (metric == "tutor_development") return r.tutor_development;
    if (metric == "learner_first_turn_score") return r.learner_first_turn_score;
    if (metric == "learner_last_turn_score") return r.learner_last_turn_score;
    if (metric == "learner_development") return r.learner_development;
    if (metric == "tutor_holistic_score") return r.tutor_holistic_score;
    if (metric == "tutor_deliberation_score") return r.tutor_deliberation_score;
    if (metric == "learner_deliberation_score") return r.learner_deliberation_score;
    throw ConfigError("unknown metric '" + metric + "'");
}

std::string default_treatment(const std::string& column) {
    if (column == "recognition") return "recog";
    if (column == "tutor_arch") return "multi";
    if (column == "learner_arch") return "ego_superego";
    return "";
}

std::string default_control(const std::string& column) {
    if (column == "recognition") return "base";
    if (column == "tutor_arch") return "single";
    if (column == "learner_arch") return "unified";
    return "";
}

struct GroupSpec {
    std::string column;
    std::string treatment;
    std::string control;
};

GroupSpec group_spec(const json& ev) {
    GroupSpec g;
    g.column = param(ev, "group_by", "recognition");
    g.treatment = ev.contains("treatment") ? scalar_text(ev["treatment"]) : default_treatment(g.column);
    g.control = ev.contains("control") ? scalar_text(ev["control"]) : default_control(g.column);
    if (g.treatment.empty() || g.control.empty()) {
        throw ConfigError("group_by '" + g.column + "' needs explicit treatment and control values");
    }
    return g;
}

json effect_output(const stats::EffectSize& e, const std::vector<double>& treatment, const std::vector<double>& control,
                   const std::string& output) {
    if (output == "cohens_d") return e.d;
    if (output == "mean_difference") return stats::mean(treatment) - stats::mean(control);
    if (output == "treatment_mean") return stats::mean(treatment);
    if (output == "control_mean") return stats::mean(control);
    throw ConfigError("unknown effect output '" + output + "'");
}

AdapterOutput finish(json value, json result_set) {
    AdapterOutput out;
    out.value = std::move(value);
    out.result_set = std::move(result_set);
    out.fingerprint = sha256_hex(canonical_dump(out.result_set));
    return out;
}

json read_manifest(const Claim& claim, const DataSources& sources) {
    const auto path = claim.evidence.contains("manifest")
                          ? fs::path(claim.evidence["manifest"].get<std::string>())
                          : sources.manifest.value_or(fs::path());
    if (path.empty() || !fs::exists(path)) {
        throw ConfigError("claim " + claim.id + ": paper manifest is not available");
    }
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

AdapterOutput manifest_total(const Claim& claim, const DataSources& sources) {
    const auto manifest = read_manifest(claim, sources);
    if (!manifest.contains("total")) throw ParseError("paper manifest has no 'total'");
    return finish(manifest["total"], {{"total", manifest["total"]}});
}

AdapterOutput manifest_section_total(const Claim& claim, const DataSources& sources) {
    const auto manifest = read_manifest(claim, sources);
    const auto section = claim.evidence.at("section").get<std::string>();
    json value = nullptr;
    if (manifest.contains("sections") && manifest["sections"].contains(section)) value = manifest["sections"][section];
    return finish(value, {{"section", section}, {"value", value}});
}

AdapterOutput db_count(const Claim& claim, const DataSources& sources) {
    const auto rows = query_rows(claim, sources);
    return finish(static_cast<std::int64_t>(rows.size()), digest_all(rows));
}

AdapterOutput provenance_check(const Claim& claim, const DataSources& sources) {
    std::optional<std::string> run_id;
    if (claim.evidence.contains("run_id")) run_id = claim.evidence["run_id"].get<std::string>();
    const auto report = harness::provenance_audit(need_store(claim, sources), need_logs(claim, sources), run_id);
    json mismatches = json::array();
    for (const auto& m : report.mismatches) mismatches.push_back({{"dialogue_id", m.dialogue_id}, {"reason", m.reason}});
    json hashes = json::array();
    for (const auto& [row_id, dialogue_id, hash] : need_store(claim, sources).content_hashes(run_id)) {
        hashes.push_back({dialogue_id, hash});
    }
    std::sort(hashes.begin(), hashes.end());
    return finish(report.match_rate, {{"checked", report.checked}, {"mismatches", mismatches}, {"hashes", hashes}});
}

AdapterOutput log_trace_coverage(const Claim& claim, const DataSources& sources) {
    const auto rows = query_rows(claim, sources);
    const auto& logs = need_logs(claim, sources);
    json set = json::array();
    std::size_t covered = 0;
    for (const auto& r : rows) {
        const bool present = fs::exists(logs.content_path(r.dialogue_content_hash));
        covered += present ? 1 : 0;
        set.push_back({r.dialogue_id, r.dialogue_content_hash, present});
    }
    const json value = rows.empty() ? json(0.0) : json(static_cast<double>(covered) / static_cast<double>(rows.size()));
    return finish(value, set);
}

AdapterOutput effect_size(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    const auto g = group_spec(ev);
    const auto metric = param(ev, "metric", "tutor_mean");
    std::vector<double> treatment, control;
    json set = json::array();
    for (const auto& r : query_rows(claim, sources)) {
        const auto v = metric_value(r, metric);
        if (!v) continue;
        const auto group = column_text(r, g.column);
        if (group == g.treatment) treatment.push_back(*v);
        else if (group == g.control) control.push_back(*v);
        else continue;
        set.push_back({r.dialogue_id, r.judge_model, group, *v});
    }
    const auto e = stats::cohens_d(treatment, control);
    return finish(effect_output(e, treatment, control, param(ev, "output", "cohens_d")), set);
}

AdapterOutput profile_group_effect_size(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    const auto treatment_profiles = string_list(ev, "treatment_profiles");
    const auto control_profiles = string_list(ev, "control_profiles");
    if (treatment_profiles.empty() || control_profiles.empty()) {
        throw ConfigError("claim " + claim.id + ": treatment_profiles and control_profiles are required");
    }
    auto in = [](const std::vector<std::string>& list, const std::string& v) {
        return std::find(list.begin(), list.end(), v) != list.end();
    };
    const auto metric = param(ev, "metric", "tutor_mean");
    std::vector<double> treatment, control;
    json set = json::array();
    for (const auto& r : query_rows(claim, sources)) {
        const auto v = metric_value(r, metric);
        if (!v) continue;
        if (in(treatment_profiles, r.profile_name)) treatment.push_back(*v);
        else if (in(control_profiles, r.profile_name)) control.push_back(*v);
        else continue;
        set.push_back({r.dialogue_id, r.judge_model, r.profile_name, *v});
    }
    const auto e = stats::cohens_d(treatment, control);
    return finish(effect_output(e, treatment, control, param(ev, "output", "cohens_d")), set);
}

AdapterOutput anova_2x2(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    auto factors = string_list(ev, "factors");
    if (factors.empty()) factors = {"recognition", "tutor_arch"};
    if (factors.size() != 2) throw ConfigError("claim " + claim.id + ": anova_2x2 takes exactly two factors");
    std::vector<std::string> high;
    for (const auto& f : factors) {
        const bool given = ev.contains("high") && ev["high"].contains(f);
        high.push_back(given ? scalar_text(ev["high"][f]) : default_treatment(f));
        if (high.back().empty()) throw ConfigError("claim " + claim.id + ": factor '" + f + "' needs a high level");
    }
    const auto metric = param(ev, "metric", "tutor_mean");
    std::vector<stats::AnovaObservation> obs;
    json set = json::array();
    for (const auto& r : query_rows(claim, sources)) {
        const auto v = metric_value(r, metric);
        if (!v) continue;
        stats::AnovaObservation o;
        for (std::size_t i = 0; i < factors.size(); ++i) o.levels.push_back(column_text(r, factors[i]) == high[i]);
        o.value = *v;
        set.push_back({r.dialogue_id, r.judge_model, o.levels, o.value});
        obs.push_back(std::move(o));
    }
    const auto result = stats::anova_factorial(obs, factors);
    const auto& effect = result.effect(param(ev, "effect", factors[0] + ":" + factors[1]));
    const auto output = param(ev, "output", "f");
    json value;
    if (output == "f") value = effect.f;
    else if (output == "p") value = effect.p;
    else if (output == "eta_squared") value = effect.eta_squared;
    else if (output == "partial_eta_squared") value = effect.partial_eta_squared;
    else throw ConfigError("unknown anova output '" + output + "'");
    return finish(value, set);
}

/// Pairs two row sets on dialogue id and correlates a metric across them.
AdapterOutput paired_correlation(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b,
                                 const std::string& metric) {
    std::map<std::string, double> left;
    for (const auto& r : a) {
        if (auto v = metric_value(r, metric)) left.emplace(r.dialogue_id, *v);
    }
    std::vector<double> xs, ys;
    json set = json::array();
    std::set<std::string> used;
    for (const auto& r : b) {
        const auto v = metric_value(r, metric);
        auto it = left.find(r.dialogue_id);
        if (!v || it == left.end() || !used.insert(r.dialogue_id).second) continue;
        xs.push_back(it->second);
        ys.push_back(*v);
        set.push_back({r.dialogue_id, it->second, *v});
    }
    return finish(stats::pearson_r(xs, ys).r, set);
}

AdapterOutput judge_pair_correlation(const Claim& claim, const DataSources& sources) {
    const auto judges = string_list(claim.evidence, "judges");
    if (judges.size() != 2) throw ConfigError("claim " + claim.id + ": judge_pair_correlation needs two judges");
    const auto rows = query_rows(claim, sources);
    std::vector<ResultRow> a, b;
    for (const auto& r : rows) {
        if (r.judge_model.find(judges[0]) != std::string::npos) a.push_back(r);
        else if (r.judge_model.find(judges[1]) != std::string::npos) b.push_back(r);
    }
    return paired_correlation(a, b, param(claim.evidence, "metric", "tutor_mean"));
}

AdapterOutput rubric_version_comparison(const Claim& claim, const DataSources& sources) {
    const auto epochs = string_list(claim.evidence, "epochs");
    if (epochs.size() != 2) throw ConfigError("claim " + claim.id + ": rubric_version_comparison needs two epochs");
    return paired_correlation(query_rows(claim, sources, epochs[0]), query_rows(claim, sources, epochs[1]),
                              param(claim.evidence, "metric", "tutor_mean"));
}

AdapterOutput dimension_variance(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    const auto g = group_spec(ev);
    std::vector<stats::ResponseDimensions> responses;
    json set = json::array();
    for (const auto& r : query_rows(claim, sources)) {
        const auto group = column_text(r, g.column);
        if (group != g.treatment && group != g.control) continue;
        stats::ResponseDimensions resp;
        resp.group = group;
        for (const auto& d : scoring::dimension_scores(r.scores_with_reasoning, "tutor_turns", 0)) {
            resp.scores.push_back(d.score);
        }
        if (resp.scores.size() < 2) continue;
        set.push_back({r.dialogue_id, r.judge_model, group, resp.scores});
        responses.push_back(std::move(resp));
    }
    const auto result = stats::within_response_sd(responses, g.treatment, g.control);
    const auto output = param(ev, "output", "cohens_d");
    json value;
    if (output == "cohens_d") {
        if (!result.effect) throw DegenerateError("dimension_variance needs both groups");
        value = result.effect->d;
    } else if (output == "treatment_mean_sd" || output == "control_mean_sd") {
        const auto& key = output == "treatment_mean_sd" ? g.treatment : g.control;
        auto it = result.groups.find(key);
        value = it == result.groups.end() ? json(nullptr) : json(it->second.mean_sd);
    } else {
        throw ConfigError("unknown dimension_variance output '" + output + "'");
    }
    return finish(value, set);
}

AdapterOutput dimension_cluster_effect(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    const auto g = group_spec(ev);
    const auto dims = string_list(ev, "dimensions");
    if (dims.empty()) throw ConfigError("claim " + claim.id + ": dimension_cluster_effect needs dimensions");
    std::vector<double> treatment, control;
    json set = json::array();
    for (const auto& r : query_rows(claim, sources)) {
        const auto group = column_text(r, g.column);
        if (group != g.treatment && group != g.control) continue;
        std::vector<double> picked;
        const auto& turns = r.scores_with_reasoning.value("tutor_turns", json::array());
        for (std::size_t t = 0; t < turns.size(); ++t) {
            for (const auto& d : scoring::dimension_scores(r.scores_with_reasoning, "tutor_turns", t)) {
                if (std::find(dims.begin(), dims.end(), d.name) != dims.end()) picked.push_back(d.score);
            }
        }
        if (picked.empty()) continue;
        const double v = stats::mean(picked);
        (group == g.treatment ? treatment : control).push_back(v);
        set.push_back({r.dialogue_id, r.judge_model, group, v});
    }
    const auto e = stats::cohens_d(treatment, control);
    return finish(effect_output(e, treatment, control, param(ev, "output", "cohens_d")), set);
}

AdapterOutput jsonl_critique_stats(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    const auto path = ev.contains("path") ? fs::path(ev["path"].get<std::string>()) : sources.critiques.value_or(fs::path());
    if (path.empty() || !fs::exists(path)) {
        throw ConfigError("claim " + claim.id + ": critique corpus is not available");
    }
    const auto recognition = param(ev, "recognition", "");
    const auto category = param(ev, "category", "");
    const auto label_field = param(ev, "label_field", "categories");
    const auto output = param(ev, "output", category.empty() ? "approval_rate" : "category_pct");

    std::ifstream in(path);
    std::size_t reviews = 0, approved = 0, rejected = 0, labelled = 0;
    json set = json::array();
    for (std::string line; std::getline(in, line);) {
        if (trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
        if (!recognition.empty() && rec.value("recognition", "") != recognition) continue;
        set.push_back(rec);
        if (rec.value("parse_failed", false)) continue;
        ++reviews;
        if (rec.value("verdict", "") == "approved") {
            ++approved;
            continue;
        }
        ++rejected;
        if (category.empty()) continue;
        const auto& labels = rec.contains(label_field) ? rec[label_field] : json(nullptr);
        const bool hit = labels.is_array() ? std::find(labels.begin(), labels.end(), category) != labels.end()
                                           : labels.is_string() && labels.get<std::string>() == category;
        labelled += hit ? 1 : 0;
    }
    json value;
    if (output == "approval_rate") value = reviews ? json(100.0 * approved / reviews) : json(nullptr);
    else if (output == "category_pct") value = rejected ? json(100.0 * labelled / rejected) : json(nullptr);
    else if (output == "category_count") value = labelled;
    else if (output == "count") value = reviews;
    else throw ConfigError("unknown jsonl_critique_stats output '" + output + "'");
    return finish(value, set);
}

std::vector<double> channel_scores(const ResultRow& r, const std::string& channel) {
    if (channel == "tutor") return r.tutor_scores;
    if (channel == "learner") return r.learner_scores;
    throw ConfigError("unknown score channel '" + channel + "'");
}

AdapterOutput trajectory_slope(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    const auto channel = param(ev, "channel", "tutor");
    const auto output = param(ev, "output", "mean_slope");
    std::vector<double> slopes, treatment, control;
    std::optional<GroupSpec> g;
    if (output == "cohens_d") g = group_spec(ev);
    json set = json::array();
    for (const auto& r : query_rows(claim, sources)) {
        const auto scores = channel_scores(r, channel);
        if (scores.size() < 2) continue;
        std::vector<std::pair<double, double>> points;
        for (std::size_t t = 0; t < scores.size(); ++t) points.emplace_back(static_cast<double>(t), scores[t]);
        const double slope = stats::ols_slope(points).slope;
        slopes.push_back(slope);
        if (g) {
            const auto group = column_text(r, g->column);
            if (group == g->treatment) treatment.push_back(slope);
            else if (group == g->control) control.push_back(slope);
        }
        set.push_back({r.dialogue_id, r.judge_model, slope});
    }
    if (output == "mean_slope") return finish(slopes.empty() ? json(nullptr) : json(stats::mean(slopes)), set);
    if (output == "cohens_d") return finish(stats::cohens_d(treatment, control).d, set);
    throw ConfigError("unknown trajectory_slope output '" + output + "'");
}

AdapterOutput conditional_delta(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    const auto event = param(ev, "event", "");
    if (event.empty()) throw ConfigError("claim " + claim.id + ": conditional_delta needs an event pattern");
    const std::regex re(event, std::regex::ECMAScript | std::regex::icase);
    const auto channel = param(ev, "channel", "tutor");
    const auto& logs = need_logs(claim, sources);
    std::vector<double> deltas;
    json set = json::array();
    for (const auto& r : query_rows(claim, sources)) {
        const auto scores = channel_scores(r, channel);
        const auto log = logs.read_verified(r.dialogue_content_hash);
        for (std::size_t t = 0; t + 1 < scores.size() && t < log.turns.size(); ++t) {
            if (!std::regex_search(log.turns[t].learner_public, re)) continue;
            const double delta = scores[t + 1] - scores[t];
            deltas.push_back(delta);
            set.push_back({r.dialogue_id, r.judge_model, t, delta});
        }
    }
    return finish(deltas.empty() ? json(nullptr) : json(stats::mean(deltas)), set);
}

AdapterOutput code_path(const Claim& claim, const DataSources& sources) {
    const auto& ev = claim.evidence;
    const std::regex re(ev.at("pattern").get<std::string>(), std::regex::ECMAScript);
    std::vector<fs::path> roots;
    for (const auto& p : string_list(ev, "paths")) roots.emplace_back(p);
    if (roots.empty()) roots = sources.source_roots;
    if (roots.empty()) throw ConfigError("claim " + claim.id + ": no source roots configured");
    const auto extensions = string_list(ev, "extensions");

    std::vector<fs::path> files;
    for (const auto& root : roots) {
        if (!fs::exists(root)) throw ConfigError("claim " + claim.id + ": source root " + root.string() + " is missing");
        if (fs::is_regular_file(root)) {
            files.push_back(root);
            continue;
        }
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (!entry.is_regular_file()) continue;
            const auto ext = entry.path().extension().string();
            if (!extensions.empty() && std::find(extensions.begin(), extensions.end(), ext) == extensions.end()) {
                continue;
            }
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::int64_t total = 0;
    json set = json::array();
    for (const auto& file : files) {
        const auto text = read_file(file);
        const auto n = std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator());
        if (n == 0) continue;
        total += n;
        set.push_back({file.filename().string(), n});
    }
    return finish(total, set);
}

AdapterOutput cross_reference(const Claim& claim, const Ledger& ledger, const std::map<std::string, ClaimResult>& prior) {
    const auto target = *claim.cross_reference_target();
    const bool exists =
        std::any_of(ledger.begin(), ledger.end(), [&](const Claim& c) { return c.id == target; });
    if (param(claim.evidence, "output", "exists") == "value") {
        auto it = prior.find(target);
        const json value = it == prior.end() ? json(nullptr) : it->second.extracted_value;
        return finish(value, {{"claim", target}, {"value", value}});
    }
    return finish(exists, {{"claim", target}, {"exists", exists}});
}

AdapterOutput theoretical(const Claim& claim, const Ledger& ledger) {
    const auto related = string_list(claim.evidence, "related");
    const auto prefix = param(claim.evidence, "related_prefix", "");
    std::vector<std::string> found;
    for (const auto& c : ledger) {
        if (c.id == claim.id || c.evidence_type == "theoretical") continue;
        const bool listed = std::find(related.begin(), related.end(), c.id) != related.end();
        const bool prefixed = !prefix.empty() && c.id.rfind(prefix, 0) == 0;
        if (listed || prefixed) found.push_back(c.id);
    }
    std::sort(found.begin(), found.end());
    return finish(static_cast<std::int64_t>(found.size()), found);
}

}  // namespace

AdapterOutput evaluate_adapter(const Claim& claim, const DataSources& sources, const Ledger& ledger,
                               const std::map<std::string, ClaimResult>& prior) {
    const auto& type = claim.evidence_type;
    try {
        if (type == "manifest_total") return manifest_total(claim, sources);
        if (type == "manifest_section_total") return manifest_section_total(claim, sources);
        if (type == "db_count") return db_count(claim, sources);
        if (type == "provenance_check") return provenance_check(claim, sources);
        if (type == "log_trace_coverage") return log_trace_coverage(claim, sources);
        if (type == "effect_size") return effect_size(claim, sources);
        if (type == "profile_group_effect_size") return profile_group_effect_size(claim, sources);
        if (type == "anova_2x2") return anova_2x2(claim, sources);
        if (type == "judge_pair_correlation") return judge_pair_correlation(claim, sources);
        if (type == "dimension_variance") return dimension_variance(claim, sources);
        if (type == "dimension_cluster_effect") return dimension_cluster_effect(claim, sources);
        if (type == "jsonl_critique_stats") return jsonl_critique_stats(claim, sources);
        if (type == "trajectory_slope") return trajectory_slope(claim, sources);
        if (type == "conditional_delta") return conditional_delta(claim, sources);
        if (type == "rubric_version_comparison") return rubric_version_comparison(claim, sources);
        if (type == "code_path") return code_path(claim, sources);
        if (type == "cross_reference") return cross_reference(claim, ledger, prior);
        if (type == "theoretical") return theoretical(claim, ledger);
    } catch (const json::exception& e) {
        throw ConfigError("claim " + claim.id + ": bad evidence parameters: " + e.what());
    } catch (const std::regex_error& e) {
        throw ConfigError("claim " + claim.id + ": bad pattern: " + e.what());
    }
    throw LedgerError("claim " + claim.id + ": unknown evidence type '" + type + "'");
}

}  // namespace tutoreval::discourse
