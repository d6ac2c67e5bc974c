#pragma once

// Kuhn-Munkres (Hungarian) solver for square assignment problems, O(n^3),
// shortest augmenting path with row/column potentials.

#include "pici/core.hpp"

#include <limits>
#include <type_traits>
#include <vector>

namespace pici {

/// Minimum-cost perfect matching on an n x n cost matrix.
/// Returns row_to_col with row_to_col[i] = column assigned to row i.
template <typename T>
std::vector<int> hungarian_min(const std::vector<std::vector<T>>& cost) {
    static_assert(std::is_arithmetic_v<T>);
    const int n = static_cast<int>(cost.size());
    for (const auto& row : cost)
        if (static_cast<int>(row.size()) != n) throw InputError("hungarian: cost matrix must be square");
    if (n == 0) return {};

    const T inf = std::numeric_limits<T>::has_infinity ? std::numeric_limits<T>::infinity()
                                                       : std::numeric_limits<T>::max() / 4;
    // 1-based internally; column 0 is the virtual root.
    std::vector<T> u(n + 1, T{}), v(n + 1, T{});
    std::vector<int> col_owner(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        col_owner[0] = i;
        int j0 = 0;
        std::vector<T> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = col_owner[j0];
            T delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const T cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (col_owner[j0] != 0);
        do {
            const int j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(col_owner[j] - 1)] = j - 1;
    return row_to_col;
}

/// Maximum-weight perfect matching (negated costs).
template <typename T>
std::vector<int> hungarian_max(const std::vector<std::vector<T>>& weight) {
    std::vector<std::vector<T>> cost = weight;
    for (auto& row : cost)
        for (T& x : row) x = -x;
    return hungarian_min(cost);
}

}  // namespace pici
