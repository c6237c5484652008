#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "fmr/common.hpp"

namespace fmr {

namespace detail {

// Shared by the tree and the brute-force scan so both paths produce
// bit-identical distances.
inline double column_sqdist(const Eigen::MatrixXd& pts, int col,
                            const Eigen::Ref<const Eigen::VectorXd>& q) {
    double d = 0.0;
    for (int r = 0; r < pts.rows(); ++r) {
        double diff = pts(r, col) - q[r];
        d += diff * diff;
    }
    return d;
}

} // namespace detail

// Exact nearest-neighbor search over the columns of a d x n matrix. Ties are
// broken by lowest column index; subtrees at exactly the pruning distance are
// still visited so the tie rule matches a linear scan.
class ColumnKdTree {
public:
    explicit ColumnKdTree(const Eigen::MatrixXd& points) : points_(points) {
        const int n = static_cast<int>(points.cols());
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        nodes_.reserve(n);
        root_ = build(order, 0, n, 0);
    }

    int nearest(const Eigen::Ref<const Eigen::VectorXd>& query) const {
        int best_idx = -1;
        double best = std::numeric_limits<double>::infinity();
        search(root_, query, best, best_idx);
        return best_idx;
    }

private:
    struct Node {
        int point;
        int dim;
        int left = -1, right = -1;
    };

    int build(std::vector<int>& order, int lo, int hi, int depth) {
        if (lo >= hi) return -1;
        int dim = depth % static_cast<int>(points_.rows());
        int mid = (lo + hi) / 2;
        std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                         [&](int a, int b) {
                             double pa = points_(dim, a), pb = points_(dim, b);
                             return pa < pb || (pa == pb && a < b);
                         });
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{order[mid], dim});
        nodes_[id].left = build(order, lo, mid, depth + 1);
        nodes_[id].right = build(order, mid + 1, hi, depth + 1);
        return id;
    }

    void search(int id, const Eigen::Ref<const Eigen::VectorXd>& q, double& best,
                int& best_idx) const {
        if (id < 0) return;
        const Node& node = nodes_[id];
        double d = detail::column_sqdist(points_, node.point, q);
        if (d < best || (d == best && node.point < best_idx)) {
            best = d;
            best_idx = node.point;
        }
        double diff = q[node.dim] - points_(node.dim, node.point);
        int near = diff < 0 ? node.left : node.right;
        int far = diff < 0 ? node.right : node.left;
        search(near, q, best, best_idx);
        if (diff * diff <= best) search(far, q, best, best_idx);
    }

    const Eigen::MatrixXd& points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// Nearest target column per query column. Space-partitioning tree for
// dimension <= 32, linear scan otherwise; results are identical.
inline std::vector<int> nearest_columns(const Eigen::MatrixXd& targets,
                                        const Eigen::MatrixXd& queries) {
    if (targets.rows() != queries.rows())
        throw ValidationError("nearest_columns: dimension mismatch");
    const int nq = static_cast<int>(queries.cols());
    const int nt = static_cast<int>(targets.cols());
    std::vector<int> result(nq);
    if (targets.rows() <= 32) {
        ColumnKdTree tree(targets);
        for (int j = 0; j < nq; ++j) result[j] = tree.nearest(queries.col(j));
    } else {
        for (int j = 0; j < nq; ++j) {
            int best_idx = 0;
            double best = detail::column_sqdist(targets, 0, queries.col(j));
            for (int i = 1; i < nt; ++i) {
                double d = detail::column_sqdist(targets, i, queries.col(j));
                if (d < best) {
                    best = d;
                    best_idx = i;
                }
            }
            result[j] = best_idx;
        }
    }
    return result;
}

// Brute-force variant, exposed for cross-checking the tree path in tests.
inline std::vector<int> nearest_columns_bruteforce(const Eigen::MatrixXd& targets,
                                                   const Eigen::MatrixXd& queries) {
    const int nq = static_cast<int>(queries.cols());
    const int nt = static_cast<int>(targets.cols());
    std::vector<int> result(nq);
    for (int j = 0; j < nq; ++j) {
        int best_idx = 0;
        double best = detail::column_sqdist(targets, 0, queries.col(j));
        for (int i = 1; i < nt; ++i) {
            double d = detail::column_sqdist(targets, i, queries.col(j));
            if (d < best) {
                best = d;
                best_idx = i;
            }
        }
        result[j] = best_idx;
    }
    return result;
}

} // namespace fmr
