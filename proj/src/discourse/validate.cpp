#include "tutoreval/discourse/validate.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/parallel.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::discourse {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ClaimStatus status) {
    switch (status) {
        case ClaimStatus::pass: return "pass";
        case ClaimStatus::fail: return "fail";
        case ClaimStatus::blocked: return "blocked";
        case ClaimStatus::error: return "error";
    }
    return "error";
}

json ClaimResult::to_json() const {
    json j = {
        {"claim_id", claim_id},
        {"status", to_string(status)},
        {"orphaned", orphaned},
        {"occurrences", occurrences},
        {"stale", stale},
        {"extracted_value", extracted_value},
        {"fingerprint", fingerprint},
    };
    if (blocked_by) j["blocked_by"] = *blocked_by;
    if (!message.empty()) j["message"] = message;
    return j;
}

SnapshotStore::SnapshotStore(fs::path path) : path_(std::move(path)) {
    if (!fs::exists(*path_)) return;
    try {
        entries_ = json::parse(read_file(*path_)).get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(path_->string() + ": " + e.what());
    }
}

std::optional<std::string> SnapshotStore::get(const std::string& claim_id) const {
    auto it = entries_.find(claim_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void SnapshotStore::set(const std::string& claim_id, const std::string& fingerprint) {
    entries_[claim_id] = fingerprint;
}

void SnapshotStore::save() const {
    if (!path_) return;
    write_file_atomic(*path_, json(entries_).dump(2) + "\n");
}

const ClaimResult& ValidationReport::result(const std::string& claim_id) const {
    for (const auto& r : results) {
        if (r.claim_id == claim_id) return r;
    }
    throw LedgerError("no result for claim '" + claim_id + "'");
}

std::string ValidationReport::summary_line() const {
    std::ostringstream out;
    out << pass << " pass, " << blocked << " warn, " << (fail + error) << " fail";
    return out.str();
}

json ValidationReport::to_json() const {
    json items = json::array();
    for (const auto& r : results) items.push_back(r.to_json());
    return {{"summary", summary_line()},
            {"pass", pass},
            {"fail", fail},
            {"blocked", blocked},
            {"error", error},
            {"stale", stale},
            {"orphaned", orphaned},
            {"results", items}};
}

namespace {

std::string describe_cycle(const std::map<std::string, std::vector<std::string>>& deps,
                           const std::set<std::string>& remaining) {
    // Every remaining node has an unresolved dependency inside `remaining`,
    // so walking dependencies from any of them must revisit a node.
    std::vector<std::string> path;
    std::map<std::string, std::size_t> position;
    std::string node = *remaining.begin();
    while (!position.count(node)) {
        position[node] = path.size();
        path.push_back(node);
        for (const auto& d : deps.at(node)) {
            if (remaining.count(d)) {
                node = d;
                break;
            }
        }
    }
    std::string out;
    for (std::size_t i = position[node]; i < path.size(); ++i) out += path[i] + " -> ";
    return out + node;
}

}  // namespace

std::vector<std::vector<std::string>> topological_layers(const Ledger& ledger) {
    std::map<std::string, std::vector<std::string>> deps;
    for (const auto& c : ledger) deps[c.id];
    for (const auto& c : ledger) {
        auto& list = deps[c.id];
        for (const auto& d : c.depends_on) {
            if (!deps.count(d)) throw LedgerError("claim " + c.id + " depends on unknown claim '" + d + "'");
            list.push_back(d);
        }
        // A cross_reference to a missing claim is an evidence failure, not a graph error.
        if (auto target = c.cross_reference_target(); target && deps.count(*target) &&
                                                      std::find(list.begin(), list.end(), *target) == list.end()) {
            list.push_back(*target);
        }
    }
    std::map<std::string, std::size_t> indegree;
    std::map<std::string, std::vector<std::string>> dependents;
    for (const auto& [id, list] : deps) {
        indegree[id] = list.size();
        for (const auto& d : list) dependents[d].push_back(id);
    }
    std::vector<std::vector<std::string>> layers;
    std::vector<std::string> frontier;
    for (const auto& [id, n] : indegree) {
        if (n == 0) frontier.push_back(id);
    }
    std::size_t placed = 0;
    while (!frontier.empty()) {
        std::sort(frontier.begin(), frontier.end());
        std::vector<std::string> next;
        for (const auto& id : frontier) {
            for (const auto& dep : dependents[id]) {
                if (--indegree[dep] == 0) next.push_back(dep);
            }
        }
        placed += frontier.size();
        layers.push_back(std::move(frontier));
        frontier = std::move(next);
    }
    if (placed != deps.size()) {
        std::set<std::string> remaining;
        for (const auto& [id, n] : indegree) {
            if (n > 0) remaining.insert(id);
        }
        throw CycleError("dependency cycle: " + describe_cycle(deps, remaining));
    }
    return layers;
}

ValidationReport validate_all(const Ledger& ledger, const DataSources& sources, SnapshotStore& snapshots,
                              const ValidateOptions& options) {
    const auto layers = topological_layers(ledger);
    std::map<std::string, const Claim*> by_id;
    for (const auto& c : ledger) by_id[c.id] = &c;

    std::map<std::string, ClaimResult> done;
    ValidationReport report;
    std::mutex callback_mutex;
    for (const auto& layer : layers) {
        std::vector<ClaimResult> results(layer.size());
        std::vector<std::size_t> to_evaluate;
        for (std::size_t i = 0; i < layer.size(); ++i) {
            const auto& claim = *by_id.at(layer[i]);
            auto& r = results[i];
            r.claim_id = claim.id;
            for (const auto& dep : claim.all_dependencies()) {
                auto it = done.find(dep);
                if (it != done.end() && it->second.status != ClaimStatus::pass) {
                    r.status = ClaimStatus::blocked;
                    r.blocked_by = dep;
                    r.message = "dependency " + dep + " is " + std::string(to_string(it->second.status));
                    break;
                }
            }
            if (!r.blocked_by) to_evaluate.push_back(i);
        }
        parallel_for(to_evaluate.size(), options.workers, [&](std::size_t k) {
            auto& r = results[to_evaluate[k]];
            const auto& claim = *by_id.at(r.claim_id);
            if (options.on_evaluate) {
                std::lock_guard lock(callback_mutex);
                options.on_evaluate(claim.id);
            }
            try {
                const auto located = locate_statement(claim, sources.paper_text);
                r.occurrences = located.occurrences;
                r.orphaned = located.orphaned;
                const auto out = evaluate_adapter(claim, sources, ledger, done);
                r.extracted_value = out.value;
                r.fingerprint = out.fingerprint;
                r.status = apply_assertion(claim.assertion, out.value) ? ClaimStatus::pass : ClaimStatus::fail;
                if (r.status == ClaimStatus::fail) {
                    r.message = "expected " + std::string(to_string(claim.assertion.op)) + " " +
                                claim.assertion.expected.dump() + ", got " + out.value.dump();
                }
            } catch (const Error& e) {
                r.status = ClaimStatus::error;
                r.message = std::string(e.category()) + ": " + e.what();
            }
        });
        for (auto& r : results) {
            if (!r.fingerprint.empty()) {
                const auto previous = snapshots.get(r.claim_id);
                r.stale = previous && *previous != r.fingerprint;
                if (options.accept) snapshots.set(r.claim_id, r.fingerprint);
            }
            done[r.claim_id] = r;
            report.results.push_back(std::move(r));
        }
    }
    for (const auto& r : report.results) {
        switch (r.status) {
            case ClaimStatus::pass: ++report.pass; break;
            case ClaimStatus::fail: ++report.fail; break;
            case ClaimStatus::blocked: ++report.blocked; break;
            case ClaimStatus::error: ++report.error; break;
        }
        report.stale += r.stale ? 1 : 0;
        report.orphaned += r.orphaned ? 1 : 0;
    }
    if (options.accept) snapshots.save();
    return report;
}

SymmetryConfig SymmetryConfig::from_yaml(const YAML::Node& node) {
    SymmetryConfig c;
    if (!node) return c;
    if (node["magnitude_threshold"]) c.magnitude_threshold = node["magnitude_threshold"].as<double>();
    if (node["min_gap"]) c.min_gap = node["min_gap"].as<double>();
    if (const auto patterns = node["inventory_patterns"]) {
        for (const auto& p : patterns) c.inventory_patterns.push_back(p.as<std::string>());
    }
    return c;
}

namespace {

std::string meta_text(const Claim& c, const char* key) {
    return c.metadata.contains(key) && c.metadata[key].is_string() ? c.metadata[key].get<std::string>() : "";
}

bool meta_flag(const Claim& c, const char* key) { return c.metadata.value(key, false); }

std::optional<double> numeric_value(const std::map<std::string, const ClaimResult*>& results, const std::string& id) {
    auto it = results.find(id);
    if (it == results.end() || !it->second->extracted_value.is_number()) return std::nullopt;
    return it->second->extracted_value.get<double>();
}

std::regex statement_regex(const Statement& s) {
    auto flags = std::regex::ECMAScript;
    if (s.flags.find('i') != std::string::npos) flags |= std::regex::icase;
    return std::regex(s.pattern, flags);
}

}  // namespace

std::vector<SymmetryViolation> check_symmetry(const Ledger& ledger, const std::vector<ClaimResult>& results,
                                              const SymmetryConfig& config, const std::string& paper_text) {
    std::vector<SymmetryViolation> out;
    std::map<std::string, const Claim*> by_id;
    for (const auto& c : ledger) by_id[c.id] = &c;
    std::map<std::string, const ClaimResult*> result_by_id;
    for (const auto& r : results) result_by_id[r.claim_id] = &r;

    for (const auto& c : ledger) {
        const auto side = meta_text(c, "side");
        const auto pair = meta_text(c, "pair");
        const Claim* partner = nullptr;
        if (!pair.empty()) {
            auto it = by_id.find(pair);
            if (it != by_id.end()) partner = it->second;
        }

        // Paired presence: a tutor-side claim names a learner-side partner or justifies its absence.
        if (side == "tutor" && meta_text(c, "pair_omitted").empty()) {
            if (!partner) {
                out.push_back({"paired_presence", c.id, "tutor-side claim has no learner-side pair"});
            } else if (meta_text(*partner, "side") != "learner") {
                out.push_back({"paired_presence", c.id, "pair " + pair + " is not a learner-side claim"});
            }
        }

        // Magnitude bounds and material gap are checked once per pair, from the tutor side
        // (or from either side when no sides are declared).
        const bool owns_pair = side == "tutor" || (side.empty() && c.id < pair);
        if (partner && owns_pair) {
            const auto a = numeric_value(result_by_id, c.id);
            const auto b = numeric_value(result_by_id, pair);
            if (meta_flag(c, "near_zero") || meta_flag(*partner, "near_zero")) {
                if (!a || !b) {
                    out.push_back({"magnitude_bounds", c.id, "paired values are not available"});
                } else if (std::abs(*a) > config.magnitude_threshold || std::abs(*b) > config.magnitude_threshold) {
                    out.push_back({"magnitude_bounds", c.id,
                                   "paired magnitudes exceed " + std::to_string(config.magnitude_threshold)});
                }
            }
            if (meta_flag(c, "asymmetry") || meta_flag(*partner, "asymmetry")) {
                if (!a || !b) {
                    out.push_back({"material_gap", c.id, "paired values are not available"});
                } else if (std::abs(*a - *b) < config.min_gap) {
                    out.push_back({"material_gap", c.id,
                                   "gap " + std::to_string(std::abs(*a - *b)) + " is below " +
                                       std::to_string(config.min_gap)});
                }
            }
        }

        if (meta_text(c, "kind") == "mechanism") {
            const auto mechanism = meta_text(c, "mechanism");
            const bool has_anti = std::any_of(ledger.begin(), ledger.end(), [&](const Claim& other) {
                return meta_text(other, "kind") == "anti_pattern" && meta_text(other, "mechanism") == mechanism;
            });
            if (!has_anti) {
                out.push_back({"mechanism_consistency", c.id, "no anti-pattern claim for mechanism '" + mechanism + "'"});
            }
            const auto& models = c.metadata.contains("tested_models") ? c.metadata["tested_models"] : json();
            if (!models.is_array() || models.empty()) {
                out.push_back({"model_qualification", c.id, "mechanism claim lists no tested models"});
            }
        }
    }

    // Inventory coverage: every configured quantitative pattern in the paper
    // text must overlap a span matched by some claim's statement.
    std::vector<std::pair<std::size_t, std::size_t>> covered;
    for (const auto& c : ledger) {
        if (!c.statement) continue;
        const auto re = statement_regex(*c.statement);
        for (auto it = std::sregex_iterator(paper_text.begin(), paper_text.end(), re); it != std::sregex_iterator();
             ++it) {
            covered.emplace_back(it->position(), it->position() + it->length());
        }
    }
    for (const auto& pattern : config.inventory_patterns) {
        const std::regex re(pattern, std::regex::ECMAScript);
        for (auto it = std::sregex_iterator(paper_text.begin(), paper_text.end(), re); it != std::sregex_iterator();
             ++it) {
            const std::size_t begin = it->position();
            const std::size_t end = begin + it->length();
            const bool hit = std::any_of(covered.begin(), covered.end(),
                                         [&](const auto& span) { return span.first < end && begin < span.second; });
            if (!hit) out.push_back({"inventory_coverage", "", "unmapped statement '" + it->str() + "'"});
        }
    }
    return out;
}

namespace {

std::string quoted(const std::string& id) {
    std::string out = "\"";
    for (char ch : id) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string export_graph(const Ledger& ledger) {
    std::vector<std::string> ids;
    std::set<std::string> known;
    for (const auto& c : ledger) {
        ids.push_back(c.id);
        known.insert(c.id);
    }
    std::sort(ids.begin(), ids.end());
    std::set<std::tuple<std::string, std::string, bool>> edges;
    for (const auto& c : ledger) {
        for (const auto& d : c.depends_on) edges.emplace(d, c.id, false);
        if (auto target = c.cross_reference_target(); target && known.count(*target) &&
                                                      !edges.count({*target, c.id, false})) {
            edges.emplace(*target, c.id, true);
        }
    }
    std::ostringstream out;
    out << "digraph claims {\n";
    for (const auto& id : ids) out << "  " << quoted(id) << ";\n";
    for (const auto& [from, to, implicit] : edges) {
        out << "  " << quoted(from) << " -> " << quoted(to) << (implicit ? " [style=dashed]" : "") << ";\n";
    }
    out << "}\n";
    return out.str();
}

LedgerConfig LedgerConfig::load(const fs::path& path) {
    const auto root = load_yaml_file(path);
    const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    LedgerConfig c;
    auto paths = [&](const char* key) {
        std::vector<fs::path> out;
        const auto node = root[key];
        if (!node) return out;
        if (node.IsScalar()) return std::vector<fs::path>{resolve_path(base, node.as<std::string>())};
        for (const auto& item : node) out.push_back(resolve_path(base, item.as<std::string>()));
        return out;
    };
    try {
        c.ledgers = paths("ledgers");
        c.paper_text = paths("paper_text");
        c.source_roots = paths("source_roots");
        if (root["manifest"]) c.manifest = resolve_path(base, root["manifest"].as<std::string>());
        if (root["critiques"]) c.critiques = resolve_path(base, root["critiques"].as<std::string>());
        c.snapshot = root["snapshot"] ? resolve_path(base, root["snapshot"].as<std::string>())
                                      : base / (path.stem().string() + ".snapshot.json");
        if (root["epoch"]) c.epoch = root["epoch"].as<std::string>();
        c.symmetry = SymmetryConfig::from_yaml(root["symmetry"]);
    } catch (const YAML::Exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return c;
}

std::string LedgerConfig::read_paper_text() const {
    std::string text;
    for (const auto& p : paper_text) {
        if (!text.empty()) text += "\n";
        text += read_file(p);
    }
    return text;
}

}  // namespace tutoreval::discourse
