#pragma once

// A throwaway copy of the shipped config tree with its own data directory.

#include <filesystem>

#include "support/support.hpp"
#include "tutoreval/harness/run.hpp"
#include "tutoreval/harness/store.hpp"

namespace tutoreval::testing {

class Workspace {
public:
    Workspace() {
        namespace fs = std::filesystem;
        fs::copy(testing::config_dir(), root_ / "config", fs::copy_options::recursive);
        // The ledger's code_path claims scan ../../src relative to config/ledger.
        fs::create_directory_symlink(source_dir() / "src", root_ / "src");
        fs::remove(root_ / "config" / "ledger" / "ledger.snapshot.json");
    }

    std::filesystem::path root() const { return root_.path(); }
    std::filesystem::path config_dir() const { return root_ / "config"; }
    std::filesystem::path harness_yaml() const { return config_dir() / "harness.yaml"; }
    std::filesystem::path data_dir() const { return root_ / "data"; }

    harness::ExperimentConfig load() const { return harness::ExperimentConfig::load(harness_yaml()); }

private:
    TempDir root_;
};

}  // namespace tutoreval::testing
