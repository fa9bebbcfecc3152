#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tutoreval/harness/store.hpp"

namespace tutoreval::cli {

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_csv() const;
    std::string to_text() const;  // aligned columns
    /// Cell value by row index and column name.
    const std::string& at(std::size_t row, const std::string& column) const;
};

std::string format_number(double value, int precision = 4);

/// Factorial means, effect sizes, ANOVA, slopes, calibration SDs and the
/// 2x2 interaction decomposition for one run and rubric epoch. With `by`,
/// every table gains a leading column and is computed per distinct value.
std::vector<Table> analyze_run(const harness::ResultStore& store, const std::string& run_id, const std::string& epoch,
                               const std::optional<std::string>& by = std::nullopt);

/// Run status plus per-cell completion and mean scores.
std::vector<Table> report_run(const harness::ResultStore& store, const std::string& run_id, const std::string& epoch);

}  // namespace tutoreval::cli
