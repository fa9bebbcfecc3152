#pragma once

// Weighted rubric score recomputed from its definition: weights are
// renormalized to sum to one, then the 1-5 mean maps linearly onto 0-100.

#include <vector>

namespace oracle {

inline double overall(const std::vector<int>& scores, const std::vector<double>& weights) {
    double weighted = 0.0, total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        weighted += scores[i] * weights[i];
        total += weights[i];
    }
    return (weighted / total - 1.0) / 4.0 * 100.0;
}

}  // namespace oracle
