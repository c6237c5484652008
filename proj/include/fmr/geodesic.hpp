#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "fmr/mesh.hpp"

namespace fmr {

// Single-source distances over the edge graph with Euclidean edge lengths.
// Normalization is the square root of total surface area; evaluation code
// reports geodesic errors in these normalized units.
struct GeodesicField {
    int source = 0;
    Eigen::VectorXd distances;
    double normalization = 1.0;
};

// Undirected edge graph of a mesh; reusable across many Dijkstra runs.
struct EdgeGraph {
    std::vector<std::vector<std::pair<int, double>>> adjacency;

    explicit EdgeGraph(const TriangleMesh& mesh) : adjacency(mesh.n()) {
        std::map<std::pair<int, int>, double> edges;
        for (const auto& f : mesh.faces) {
            for (int c = 0; c < 3; ++c) {
                int a = f[c], b = f[(c + 1) % 3];
                if (a > b) std::swap(a, b);
                edges.emplace(std::make_pair(a, b),
                              (mesh.vertices[a] - mesh.vertices[b]).norm());
            }
        }
        for (const auto& [e, len] : edges) {
            adjacency[e.first].emplace_back(e.second, len);
            adjacency[e.second].emplace_back(e.first, len);
        }
    }

    int n() const { return static_cast<int>(adjacency.size()); }

    Eigen::VectorXd dijkstra(int source) const {
        const double inf = std::numeric_limits<double>::infinity();
        Eigen::VectorXd dist = Eigen::VectorXd::Constant(n(), inf);
        using Entry = std::pair<double, int>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
        dist[source] = 0.0;
        queue.emplace(0.0, source);
        while (!queue.empty()) {
            auto [d, v] = queue.top();
            queue.pop();
            if (d > dist[v]) continue;
            for (auto [w, len] : adjacency[v]) {
                double nd = d + len;
                if (nd < dist[w]) {
                    dist[w] = nd;
                    queue.emplace(nd, w);
                }
            }
        }
        return dist;
    }
};

inline GeodesicField geodesic_distances(const EdgeGraph& graph, int source,
                                        double normalization) {
    if (source < 0 || source >= graph.n())
        throw ValidationError("geodesic source " + std::to_string(source) + " out of range");
    return GeodesicField{source, graph.dijkstra(source), normalization};
}

inline GeodesicField geodesic_distances(const TriangleMesh& mesh, int source) {
    return geodesic_distances(EdgeGraph(mesh), source, std::sqrt(total_area(mesh)));
}

// Greedy farthest-point sampling under the graph geodesic metric. Each prefix
// of the result equals the result for the smaller count.
inline std::vector<int> farthest_point_sample(const TriangleMesh& mesh, int count, int seed) {
    const int n = mesh.n();
    if (count < 1 || count > n)
        throw ValidationError("farthest_point_sample: count " + std::to_string(count) +
                              " outside [1, " + std::to_string(n) + "]");
    if (seed < 0 || seed >= n)
        throw ValidationError("farthest_point_sample: seed vertex out of range");

    EdgeGraph graph(mesh);
    std::vector<int> samples{seed};
    Eigen::VectorXd min_dist = graph.dijkstra(seed);
    while (static_cast<int>(samples.size()) < count) {
        int best = 0;
        for (int v = 1; v < n; ++v)
            if (min_dist[v] > min_dist[best]) best = v;
        samples.push_back(best);
        min_dist = min_dist.cwiseMin(graph.dijkstra(best));
    }
    return samples;
}

} // namespace fmr
