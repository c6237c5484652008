#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "fmr/common.hpp"

namespace fmr {

// Exact linear assignment for a square cost matrix (Jonker-Volgenant style
// shortest augmenting paths with dual potentials, O(n^3)). Returns, for each
// column j, the row assigned to it, plus the optimal total cost.
inline std::pair<std::vector<int>, double> solve_assignment(const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols())
        throw ValidationError("solve_assignment: cost matrix must be square");
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();

    // 1-based internals; p[j] = row currently matched to column j.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_of_column(n);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        row_of_column[j - 1] = p[j] - 1;
        total += cost(p[j] - 1, j - 1);
    }
    return {row_of_column, total};
}

} // namespace fmr
