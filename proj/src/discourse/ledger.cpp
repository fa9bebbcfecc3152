#include "tutoreval/discourse/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::discourse {

std::string_view to_string(AssertOp op) {
    switch (op) {
        case AssertOp::eq: return "eq";
        case AssertOp::approx: return "approx";
        case AssertOp::lte: return "lte";
        case AssertOp::gte: return "gte";
        case AssertOp::exists: return "exists";
    }
    return "exists";
}

AssertOp parse_assert_op(std::string_view text) {
    const auto lowered = to_lower(trim(text));
    for (auto op : {AssertOp::eq, AssertOp::approx, AssertOp::lte, AssertOp::gte, AssertOp::exists}) {
        if (to_string(op) == lowered) return op;
    }
    throw LedgerError("unknown assertion op '" + std::string(text) + "'");
}

std::optional<std::string> Claim::cross_reference_target() const {
    if (evidence_type != "cross_reference") return std::nullopt;
    return evidence.at("claim").get<std::string>();
}

std::vector<std::string> Claim::all_dependencies() const {
    auto deps = depends_on;
    if (auto target = cross_reference_target();
        target && std::find(deps.begin(), deps.end(), *target) == deps.end()) {
        deps.push_back(*target);
    }
    return deps;
}

Claim Claim::from_yaml(const YAML::Node& node, const std::string& source_file) {
    Claim c;
    c.source_file = source_file;
    if (!node.IsMap() || !node["id"]) {
        throw LedgerError(source_file + ": claim without an id");
    }
    c.id = trim(node["id"].as<std::string>());
    const auto where = source_file + ": claim " + c.id;
    try {
        c.description = node["description"] ? node["description"].as<std::string>() : "";
        if (const auto st = node["statement"]) {
            Statement s;
            s.pattern = st["pattern"].as<std::string>();
            s.flags = st["flags"] ? st["flags"].as<std::string>() : "";
            s.min_occurrences = st["min_occurrences"] ? st["min_occurrences"].as<int>() : 1;
            if (s.min_occurrences < 0) throw LedgerError(where + ": min_occurrences must be non-negative");
            c.statement = s;
        }
        const auto ev = node["evidence"];
        if (!ev || !ev["type"]) throw LedgerError(where + ": evidence.type is required");
        c.evidence = yaml_to_json(ev);
        c.evidence_type = c.evidence.at("type").get<std::string>();
        const auto& types = adapter_types();
        if (std::find(types.begin(), types.end(), c.evidence_type) == types.end()) {
            throw LedgerError(where + ": unknown evidence type '" + c.evidence_type + "'");
        }
        if (c.evidence_type == "cross_reference" && !c.evidence.contains("claim")) {
            throw LedgerError(where + ": cross_reference evidence needs a 'claim'");
        }
        const auto as = node["assertion"];
        if (!as || !as["op"]) throw LedgerError(where + ": assertion.op is required");
        c.assertion.op = parse_assert_op(as["op"].as<std::string>());
        if (as["expected"]) c.assertion.expected = yaml_to_json(as["expected"]);
        if (as["tolerance"]) c.assertion.tolerance = as["tolerance"].as<double>();
        if (c.assertion.op == AssertOp::approx && !c.assertion.tolerance) {
            throw LedgerError(where + ": approx assertion needs a tolerance");
        }
        if (c.assertion.op != AssertOp::exists && c.assertion.expected.is_null()) {
            throw LedgerError(where + ": assertion needs an expected value");
        }
        if (const auto deps = node["depends_on"]) {
            for (const auto& d : deps) c.depends_on.push_back(d.as<std::string>());
        }
        if (const auto rem = node["remediation"]) {
            for (const auto& r : rem) c.remediation.push_back(r.as<std::string>());
        }
        if (const auto meta = node["metadata"]) c.metadata = yaml_to_json(meta);
    } catch (const YAML::Exception& e) {
        throw LedgerError(where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw LedgerError(where + ": " + e.what());
    }
    return c;
}

Ledger parse_ledger(const YAML::Node& root, const std::string& source_file) {
    Ledger out;
    if (!root || root.IsNull()) return out;
    const YAML::Node list = root.IsMap() ? root["claims"] : root;
    if (!list) return out;
    if (!list.IsSequence()) throw LedgerError(source_file + ": claims must be a list");
    for (const auto& node : list) out.push_back(Claim::from_yaml(node, source_file));
    return out;
}

Ledger load_ledger(const std::vector<std::filesystem::path>& paths) {
    Ledger ledger;
    std::map<std::string, std::string> seen;
    for (const auto& path : paths) {
        YAML::Node root;
        try {
            root = YAML::LoadFile(path.string());
        } catch (const YAML::Exception& e) {
            throw LedgerError(path.string() + ": " + e.what());
        }
        for (auto& claim : parse_ledger(root, path.string())) {
            auto [it, inserted] = seen.emplace(claim.id, path.string());
            if (!inserted) {
                throw LedgerError("duplicate claim id '" + claim.id + "' in " + path.string() + " (first in " +
                                  it->second + ")");
            }
            ledger.push_back(std::move(claim));
        }
    }
    return ledger;
}

StatementMatch locate_statement(const Claim& claim, const std::string& paper_text) {
    StatementMatch m;
    if (!claim.statement) return m;
    auto flags = std::regex::ECMAScript;
    if (claim.statement->flags.find('i') != std::string::npos) flags |= std::regex::icase;
    std::regex re;
    try {
        re = std::regex(claim.statement->pattern, flags);
    } catch (const std::regex_error& e) {
        throw LedgerError("claim " + claim.id + ": bad statement pattern: " + e.what());
    }
    m.occurrences = static_cast<std::size_t>(
        std::distance(std::sregex_iterator(paper_text.begin(), paper_text.end(), re), std::sregex_iterator()));
    m.orphaned = m.occurrences < static_cast<std::size_t>(claim.statement->min_occurrences);
    return m;
}

bool apply_assertion(const Assertion& assertion, const nlohmann::json& value) {
    if (assertion.op == AssertOp::exists) return !value.is_null();
    if (value.is_null()) return false;
    if (assertion.op == AssertOp::eq) {
        if (value.is_number() && assertion.expected.is_number()) {
            return value.get<double>() == assertion.expected.get<double>();
        }
        return value == assertion.expected;
    }
    if (!value.is_number() || !assertion.expected.is_number()) return false;
    const double v = value.get<double>();
    const double e = assertion.expected.get<double>();
    if (std::isnan(v)) return false;
    switch (assertion.op) {
        case AssertOp::approx: return std::abs(v - e) <= assertion.tolerance.value_or(0.0);
        case AssertOp::lte: return v <= e;
        case AssertOp::gte: return v >= e;
        default: return false;
    }
}

}  // namespace tutoreval::discourse
