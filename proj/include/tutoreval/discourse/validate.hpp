#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutoreval/discourse/ledger.hpp"
#include "tutoreval/harness/run.hpp"
#include "tutoreval/harness/store.hpp"

namespace tutoreval::discourse {

enum class ClaimStatus { pass, fail, blocked, error };
std::string_view to_string(ClaimStatus status);

struct ClaimResult {
    std::string claim_id;
    ClaimStatus status = ClaimStatus::error;
    bool orphaned = false;
    std::size_t occurrences = 0;
    bool stale = false;
    nlohmann::json extracted_value;
    std::optional<std::string> blocked_by;
    std::string fingerprint;  // empty when not evaluated
    std::string message;

    nlohmann::json to_json() const;
};

/// Where adapters read from. Any source may be absent; an adapter that needs
/// a missing source reports status error.
struct DataSources {
    const harness::ResultStore* store = nullptr;
    std::optional<harness::LogTree> logs;
    std::optional<std::filesystem::path> manifest;
    std::vector<std::filesystem::path> source_roots;
    std::optional<std::filesystem::path> critiques;
    std::string epoch = "2.2";
    std::string paper_text;
};

struct AdapterOutput {
    nlohmann::json value;
    nlohmann::json result_set;  // what the fingerprint covers
    std::string fingerprint;
};

/// Runs one claim's evidence adapter. `ledger` and `prior` serve the
/// cross_reference and theoretical adapters. Throws on unreachable sources.
AdapterOutput evaluate_adapter(const Claim& claim, const DataSources& sources, const Ledger& ledger,
                               const std::map<std::string, ClaimResult>& prior = {});

/// Sidecar JSON mapping claim id to accepted fingerprint.
class SnapshotStore {
public:
    SnapshotStore() = default;
    explicit SnapshotStore(std::filesystem::path path);

    std::optional<std::string> get(const std::string& claim_id) const;
    void set(const std::string& claim_id, const std::string& fingerprint);
    void save() const;  // no-op without a path
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::optional<std::filesystem::path> path_;
    std::map<std::string, std::string> entries_;
};

struct ValidateOptions {
    bool accept = false;
    std::size_t workers = 1;
    /// Called before each claim's adapter runs; used to observe evaluation order.
    std::function<void(const std::string&)> on_evaluate;
};

struct ValidationReport {
    std::vector<ClaimResult> results;  // topological order
    std::size_t pass = 0;
    std::size_t fail = 0;
    std::size_t blocked = 0;
    std::size_t error = 0;
    std::size_t stale = 0;
    std::size_t orphaned = 0;

    const ClaimResult& result(const std::string& claim_id) const;
    /// "N pass, W warn, F fail"; blocked claims are warnings and errors count as failures.
    std::string summary_line() const;
    bool ok() const { return fail == 0 && error == 0; }
    nlohmann::json to_json() const;
};

/// Kahn order over explicit and cross_reference edges; CycleError names a cycle.
std::vector<std::vector<std::string>> topological_layers(const Ledger& ledger);

ValidationReport validate_all(const Ledger& ledger, const DataSources& sources, SnapshotStore& snapshots,
                              const ValidateOptions& options = {});

struct SymmetryConfig {
    double magnitude_threshold = 0.2;
    double min_gap = 0.5;
    std::vector<std::string> inventory_patterns;

    static SymmetryConfig from_yaml(const YAML::Node& node);
};

struct SymmetryViolation {
    std::string rule;
    std::string claim_id;
    std::string message;
};

/// Claim metadata keys read here: side (tutor|learner), pair, pair_omitted,
/// near_zero, asymmetry, kind (mechanism|anti_pattern), mechanism, tested_models.
std::vector<SymmetryViolation> check_symmetry(const Ledger& ledger, const std::vector<ClaimResult>& results,
                                              const SymmetryConfig& config, const std::string& paper_text);

/// Graphviz DOT, sorted by id; implicit cross_reference edges are dashed.
std::string export_graph(const Ledger& ledger);

/// A ledger configuration file: claim files, paper text, manifest, snapshot
/// sidecar, source roots, critique corpus, and symmetry settings.
struct LedgerConfig {
    std::vector<std::filesystem::path> ledgers;
    std::vector<std::filesystem::path> paper_text;
    std::optional<std::filesystem::path> manifest;
    std::filesystem::path snapshot;
    std::vector<std::filesystem::path> source_roots;
    std::optional<std::filesystem::path> critiques;
    std::string epoch = "2.2";
    SymmetryConfig symmetry;

    static LedgerConfig load(const std::filesystem::path& path);
    std::string read_paper_text() const;
};

}  // namespace tutoreval::discourse
