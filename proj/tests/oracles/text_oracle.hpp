#pragma once

// Edit distance from the recursive definition with memoization, kept apart
// from the rolling-row implementation under test.

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

inline std::vector<std::string> words(const std::string& text) {
    std::string lowered = text;
    for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::istringstream in(lowered);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

inline std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
    std::function<long(std::size_t, std::size_t)> lev = [&](std::size_t i, std::size_t j) -> long {
        if (i == 0) return static_cast<long>(j);
        if (j == 0) return static_cast<long>(i);
        auto& slot = memo[i][j];
        if (slot >= 0) return slot;
        const long cost = a[i - 1] == b[j - 1] ? 0 : 1;
        slot = std::min({lev(i - 1, j) + 1, lev(i, j - 1) + 1, lev(i - 1, j - 1) + cost});
        return slot;
    };
    return static_cast<std::size_t>(lev(a.size(), b.size()));
}

inline double norm_edit(const std::string& a, const std::string& b) {
    const auto wa = words(a), wb = words(b);
    const auto n = std::max(wa.size(), wb.size());
    return n == 0 ? 0.0 : static_cast<double>(levenshtein(wa, wb)) / static_cast<double>(n);
}

inline double jaccard(const std::string& a, const std::string& b) {
    const auto wa = words(a), wb = words(b);
    const std::set<std::string> sa(wa.begin(), wa.end()), sb(wb.begin(), wb.end());
    std::set<std::string> both, either;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(both, both.end()));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(either, either.end()));
    return either.empty() ? 1.0 : static_cast<double>(both.size()) / static_cast<double>(either.size());
}

}  // namespace oracle
