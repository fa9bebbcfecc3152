#include "tutoreval/cli/analysis.hpp"

#include <algorithm>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/scoring/judge.hpp"
#include "tutoreval/stats/stats.hpp"

namespace tutoreval::cli {

using harness::ResultRow;

namespace {

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char ch : cell) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

constexpr const char* kNA = "NA";

}  // namespace

std::string format_number(double value, int precision) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(precision) << value;
    return out.str();
}

std::string Table::to_csv() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
        out << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
}

std::string Table::to_text() const {
    std::vector<std::size_t> widths(header.size(), 0);
    for (std::size_t i = 0; i < header.size(); ++i) widths[i] = header[i].size();
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size() && i < widths.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
    }
    std::ostringstream out;
    out << "== " << name << " ==\n";
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << (i ? "  " : "") << std::left << std::setw(static_cast<int>(widths[i])) << cells[i];
        }
        out << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
}

const std::string& Table::at(std::size_t row, const std::string& column) const {
    auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end() || row >= rows.size()) {
        throw ConfigError("table " + name + " has no cell (" + std::to_string(row) + ", " + column + ")");
    }
    return rows[row][static_cast<std::size_t>(it - header.begin())];
}

namespace {

std::string group_value(const ResultRow& r, const std::string& column) {
    if (column == "judge_model") return r.judge_model;
    if (column == "scenario_id") return r.scenario_id;
    if (column == "profile_name") return r.profile_name;
    if (column == "learner_arch") return r.learner_arch;
    if (column == "recognition") return r.recognition;
    if (column == "tutor_arch") return r.tutor_arch;
    throw ConfigError("cannot split analysis by '" + column + "'");
}

std::string factor_value(const ResultRow& r, const std::string& factor) { return group_value(r, factor); }

struct FactorSpec {
    const char* name;
    const char* treatment;
    const char* control;
};

constexpr FactorSpec kFactors[] = {
    {"recognition", "recog", "base"},
    {"tutor_arch", "multi", "single"},
    {"learner_arch", "ego_superego", "unified"},
};

std::vector<std::string> with_prefix(const std::optional<std::string>& prefix, std::vector<std::string> cells) {
    if (prefix) cells.insert(cells.begin(), *prefix);
    return cells;
}

void factorial_means(const std::vector<ResultRow>& rows, const std::optional<std::string>& key, Table& t) {
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> cells;
    for (const auto& r : rows) {
        if (auto v = r.tutor_mean()) cells[{r.recognition, r.tutor_arch, r.learner_arch}].push_back(*v);
    }
    for (const auto& [cell, values] : cells) {
        const auto& [recognition, tutor_arch, learner_arch] = cell;
        t.rows.push_back(with_prefix(key, {recognition, tutor_arch, learner_arch, std::to_string(values.size()),
                                           format_number(stats::mean(values)),
                                           values.size() > 1 ? format_number(stats::sample_sd(values)) : kNA}));
    }
}

void effect_sizes(const std::vector<ResultRow>& rows, const std::optional<std::string>& key, Table& t) {
    for (const auto& f : kFactors) {
        std::vector<double> treatment, control;
        for (const auto& r : rows) {
            const auto v = r.tutor_mean();
            if (!v) continue;
            const auto level = factor_value(r, f.name);
            if (level == f.treatment) treatment.push_back(*v);
            else if (level == f.control) control.push_back(*v);
        }
        std::vector<std::string> cells = {f.name, f.treatment, f.control, std::to_string(treatment.size()),
                                          std::to_string(control.size())};
        try {
            const auto d = stats::cohens_d(treatment, control);
            const auto w = stats::welch_t(treatment, control);
            cells.insert(cells.end(), {format_number(d.d), format_number(d.ci_low), format_number(d.ci_high),
                                       std::string(stats::to_string(stats::classify_effect(d.d))), format_number(w.t),
                                       format_number(w.df, 2), format_number(w.p, 6)});
        } catch (const Error&) {
            cells.insert(cells.end(), 7, kNA);
        }
        t.rows.push_back(with_prefix(key, cells));
    }
}

void anova(const std::vector<ResultRow>& rows, const std::optional<std::string>& key, Table& t) {
    std::vector<stats::AnovaObservation> obs;
    for (const auto& r : rows) {
        const auto v = r.tutor_mean();
        if (!v) continue;
        stats::AnovaObservation o;
        for (const auto& f : kFactors) o.levels.push_back(factor_value(r, f.name) == f.treatment ? 1 : 0);
        o.value = *v;
        obs.push_back(std::move(o));
    }
    try {
        const auto result = stats::anova_factorial(obs, {"recognition", "tutor_arch", "learner_arch"});
        for (const auto& e : result.effects) {
            t.rows.push_back(with_prefix(key, {e.name, format_number(e.ss), format_number(e.df, 0), format_number(e.f),
                                               format_number(e.p, 6), format_number(e.eta_squared),
                                               format_number(e.partial_eta_squared)}));
        }
    } catch (const Error&) {
        // Unfilled design cells or no residual df: the table stays empty for this group.
    }
}

void slopes(const std::vector<ResultRow>& rows, const std::optional<std::string>& key, Table& t) {
    struct Acc {
        std::vector<double> tutor_slopes, learner_slopes, tutor_dev, dips;
    };
    std::map<std::pair<std::string, std::string>, Acc> groups;
    auto slope_of = [](const std::vector<double>& scores) -> std::optional<double> {
        if (scores.size() < 2) return std::nullopt;
        return stats::trajectory_metrics(scores).slope;
    };
    for (const auto& r : rows) {
        auto& acc = groups[{r.recognition, r.tutor_arch}];
        if (auto s = slope_of(r.tutor_scores)) {
            acc.tutor_slopes.push_back(*s);
            const auto m = stats::trajectory_metrics(r.tutor_scores);
            acc.tutor_dev.push_back(m.development);
            acc.dips.push_back(m.dip);
        }
        if (auto s = slope_of(r.learner_scores)) acc.learner_slopes.push_back(*s);
    }
    auto mean_or_na = [](const std::vector<double>& xs) { return xs.empty() ? std::string(kNA) : format_number(stats::mean(xs)); };
    for (const auto& [g, acc] : groups) {
        t.rows.push_back(with_prefix(key, {g.first, g.second, std::to_string(acc.tutor_slopes.size()),
                                           mean_or_na(acc.tutor_slopes), mean_or_na(acc.tutor_dev),
                                           mean_or_na(acc.dips), mean_or_na(acc.learner_slopes)}));
    }
}

void calibration(const std::vector<ResultRow>& rows, const std::optional<std::string>& key, Table& t) {
    std::vector<stats::ResponseDimensions> responses;
    for (const auto& r : rows) {
        stats::ResponseDimensions resp;
        resp.group = r.recognition;
        for (const auto& d : scoring::dimension_scores(r.scores_with_reasoning, "tutor_turns", 0)) {
            resp.scores.push_back(d.score);
        }
        if (resp.scores.size() >= 2) responses.push_back(std::move(resp));
    }
    if (responses.empty()) return;
    const auto result = stats::within_response_sd(responses, "recog", "base");
    const std::string d = result.effect ? format_number(result.effect->d) : kNA;
    for (const auto& [group, spread] : result.groups) {
        t.rows.push_back(with_prefix(key, {group, std::to_string(spread.n), format_number(spread.mean_sd), d}));
    }
}

void interaction(const std::vector<ResultRow>& rows, const std::optional<std::string>& key, Table& t) {
    auto emit = [&](const std::string& scope, const std::function<bool(const ResultRow&)>& keep) {
        std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
        for (const auto& r : rows) {
            if (!keep(r)) continue;
            if (auto v = r.tutor_mean()) cells[{r.recognition, r.tutor_arch}].push_back(*v);
        }
        auto m = [&](const char* rec, const char* arch) -> std::optional<double> {
            auto it = cells.find({rec, arch});
            if (it == cells.end() || it->second.empty()) return std::nullopt;
            return stats::mean(it->second);
        };
        const auto bs = m("base", "single"), bm = m("base", "multi"), rs = m("recog", "single"),
                   rm = m("recog", "multi");
        if (!bs || !bm || !rs || !rm) return;
        const auto d = stats::interaction_decompose({*bs, *bm, *rs, *rm});
        t.rows.push_back(with_prefix(
            key, {scope, format_number(*bs), format_number(*bm), format_number(*rs), format_number(*rm),
                  format_number(d.recog_single_delta), format_number(d.recog_multi_delta),
                  format_number(d.multi_base_delta), format_number(d.multi_recog_delta), format_number(d.interaction),
                  format_number(d.expected_additive), format_number(d.additivity_deficit),
                  format_number(d.deficit_pct, 2)}));
    };
    emit("all", [](const ResultRow&) { return true; });
    emit("unified", [](const ResultRow& r) { return r.learner_arch == "unified"; });
    emit("ego_superego", [](const ResultRow& r) { return r.learner_arch == "ego_superego"; });
}

std::vector<std::string> header(const std::optional<std::string>& by, std::vector<std::string> columns) {
    return with_prefix(by, std::move(columns));
}

}  // namespace

std::vector<Table> analyze_run(const harness::ResultStore& store, const std::string& run_id, const std::string& epoch,
                               const std::optional<std::string>& by) {
    harness::ResultQuery q(epoch);
    q.run_id = run_id;
    auto rows = store.query(q);
    if (rows.empty()) {
        throw ConfigError("run " + run_id + " has no scored rows under rubric version " + epoch);
    }
    std::map<std::string, std::vector<ResultRow>> groups;
    for (auto& r : rows) groups[by ? group_value(r, *by) : std::string()].push_back(std::move(r));

    std::vector<Table> tables = {
        {"factorial_means", header(by, {"recognition", "tutor_arch", "learner_arch", "n", "mean", "sd"}), {}},
        {"effect_sizes",
         header(by, {"factor", "treatment", "control", "n_treatment", "n_control", "d", "ci_low", "ci_high", "class",
                     "welch_t", "df", "p"}),
         {}},
        {"anova", header(by, {"effect", "ss", "df", "f", "p", "eta_squared", "partial_eta_squared"}), {}},
        {"slopes",
         header(by, {"recognition", "tutor_arch", "n", "tutor_slope", "tutor_development", "tutor_dip",
                     "learner_slope"}),
         {}},
        {"calibration", header(by, {"recognition", "n", "mean_dimension_sd", "d"}), {}},
        {"interaction",
         header(by, {"scope", "base_single", "base_multi", "recog_single", "recog_multi", "recog_single_delta",
                     "recog_multi_delta", "multi_base_delta", "multi_recog_delta", "interaction",
                     "expected_additive", "additivity_deficit", "deficit_pct"}),
         {}},
    };
    for (const auto& [value, group] : groups) {
        const std::optional<std::string> key = by ? std::optional<std::string>(value) : std::nullopt;
        factorial_means(group, key, tables[0]);
        effect_sizes(group, key, tables[1]);
        anova(group, key, tables[2]);
        slopes(group, key, tables[3]);
        calibration(group, key, tables[4]);
        interaction(group, key, tables[5]);
    }
    return tables;
}

std::vector<Table> report_run(const harness::ResultStore& store, const std::string& run_id, const std::string& epoch) {
    const auto run = store.get_run(run_id);
    if (!run) throw ConfigError("unknown run id '" + run_id + "'");

    Table summary{"run", {"run_id", "status", "created_at", "git_commit", "config_hash", "dialogues", "placeholders"}, {}};
    const auto dialogues = store.dialogues(run_id);
    summary.rows.push_back({run->run_id, run->status, run->created_at, run->git_commit, run->config_hash.substr(0, 12),
                            std::to_string(dialogues.size()), std::to_string(store.placeholders(run_id).size())});

    harness::ResultQuery q(epoch);
    q.run_id = run_id;
    q.include_failed = true;
    struct Acc {
        std::size_t rows = 0, failed = 0;
        std::vector<double> tutor, learner, holistic;
    };
    std::map<std::pair<std::string, std::string>, Acc> cells;
    for (const auto& r : store.query(q)) {
        auto& acc = cells[{r.profile_name, r.judge_model}];
        ++acc.rows;
        if (r.failed) {
            ++acc.failed;
            continue;
        }
        if (auto v = r.tutor_mean()) acc.tutor.push_back(*v);
        if (!r.learner_scores.empty()) acc.learner.push_back(stats::mean(r.learner_scores));
        if (r.tutor_holistic_score) acc.holistic.push_back(*r.tutor_holistic_score);
    }
    Table per_cell{"cells", {"cell", "judge_model", "rows", "failed", "tutor_mean", "learner_mean", "holistic_mean"}, {}};
    auto mean_or_na = [](const std::vector<double>& xs) { return xs.empty() ? std::string(kNA) : format_number(stats::mean(xs), 2); };
    for (const auto& [key, acc] : cells) {
        per_cell.rows.push_back({key.first, key.second, std::to_string(acc.rows), std::to_string(acc.failed),
                                 mean_or_na(acc.tutor), mean_or_na(acc.learner), mean_or_na(acc.holistic)});
    }
    return {summary, per_cell};
}

}  // namespace tutoreval::cli
