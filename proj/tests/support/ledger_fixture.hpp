#pragma once

// Random claim DAGs over an in-memory store. Each claim counts the rows of one
// scenario group, so mutating a group touches exactly the claims that read it.

#include <memory>
#include <random>
#include <set>
#include <string>

#include <yaml-cpp/yaml.h>

#include "oracles/dag_oracle.hpp"
#include "tutoreval/discourse/validate.hpp"
#include "tutoreval/harness/store.hpp"

namespace tutoreval::testing {

struct LedgerFixture {
    discourse::Ledger ledger;
    oracle::DependencyMap deps;
    std::map<std::string, int> group_of;  // claim -> scenario group
    std::unique_ptr<harness::ResultStore> store;
    int groups = 0;
    int next_row = 0;

    discourse::DataSources sources() const {
        discourse::DataSources s;
        s.store = store.get();
        return s;
    }

    void add_row(int group) {
        harness::ResultRow row;
        row.run_id = "run";
        row.dialogue_id = "row-" + std::to_string(next_row++);
        row.profile_name = "cell";
        row.scenario_id = "g" + std::to_string(group);
        row.judge_model = "judge";
        row.tutor_rubric_version = row.learner_rubric_version = "2.2";
        row.dialogue_rubric_version = row.deliberation_rubric_version = "2.2";
        row.dialogue_content_hash = std::string(64, 'f');
        row.config_hash = std::string(64, '0');
        row.tutor_scores = {50.0};
        store->upsert_result(row);
    }

    std::set<std::string> claims_reading(int group) const {
        std::set<std::string> out;
        for (const auto& [id, g] : group_of) {
            if (g == group) out.insert(id);
        }
        return out;
    }
};

inline std::string claim_id(int i) { return (i < 10 ? "c0" : "c") + std::to_string(i); }

inline discourse::Claim count_claim(const std::string& id, int group, const std::vector<std::string>& depends_on,
                                    bool satisfiable = true) {
    YAML::Node node;
    node["id"] = id;
    node["evidence"]["type"] = "db_count";
    node["evidence"]["filters"]["eq"]["scenario_id"] = "g" + std::to_string(group);
    node["assertion"]["op"] = satisfiable ? "gte" : "lte";
    node["assertion"]["expected"] = satisfiable ? 0 : -1;
    for (const auto& d : depends_on) node["depends_on"].push_back(d);
    return discourse::Claim::from_yaml(node);
}

/// `n` claims where claim i may depend on any j < i with probability `edge_p`.
inline LedgerFixture random_ledger(std::mt19937& rng, int n, double edge_p = 0.2, int groups = 5) {
    LedgerFixture f;
    f.groups = groups;
    f.store = std::make_unique<harness::ResultStore>(":memory:");
    f.store->insert_run({"run", "2026-01-01T00:00:00Z", std::string(64, '0'), "unknown", nlohmann::json::object(),
                         "complete"});
    std::bernoulli_distribution edge(edge_p);
    std::uniform_int_distribution<int> group(0, groups - 1);
    for (int i = 0; i < n; ++i) {
        std::vector<std::string> deps;
        for (int j = 0; j < i; ++j) {
            if (edge(rng)) deps.push_back(claim_id(j));
        }
        const int g = group(rng);
        f.ledger.push_back(count_claim(claim_id(i), g, deps));
        f.deps[claim_id(i)] = deps;
        f.group_of[claim_id(i)] = g;
    }
    // Shuffle so that file order carries no topological information.
    std::shuffle(f.ledger.begin(), f.ledger.end(), rng);
    for (int g = 0; g < groups; ++g) {
        for (int k = 0; k <= g; ++k) f.add_row(g);
    }
    return f;
}

/// Replaces claim `id` with one whose assertion cannot hold.
inline void make_unsatisfiable(LedgerFixture& f, const std::string& id) {
    for (auto& c : f.ledger) {
        if (c.id == id) c = count_claim(id, f.group_of.at(id), c.depends_on, false);
    }
}

}  // namespace tutoreval::testing
