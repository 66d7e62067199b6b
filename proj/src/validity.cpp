#include "itm/cluster.hpp"
#include "itm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace itm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_labels(const RowMatrixXd& points, const ClusterAssignment& a) {
    if (static_cast<Eigen::Index>(a.labels.size()) != points.rows())
        fail(ErrorCode::DimensionMismatch, "assignment length differs from point count");
}

}  // namespace

double silhouette(const RowMatrixXd& points, const ClusterAssignment& a) {
    check_labels(points, a);
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < a.labels.size(); ++i)
        if (a.labels[i] >= 0) idx.push_back(static_cast<Eigen::Index>(i));

    std::vector<int> present;
    for (auto i : idx) present.push_back(a.labels[i]);
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    if (present.size() < 2) fail(ErrorCode::SingleCluster, "silhouette needs at least two clusters");

    RowMatrixXd unit(static_cast<Eigen::Index>(idx.size()), points.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double norm = points.row(idx[r]).norm();
        if (norm == 0.0) fail(ErrorCode::ZeroNormEmbedding, "cosine silhouette on a zero vector");
        unit.row(static_cast<Eigen::Index>(r)) = points.row(idx[r]) / norm;
    }
    const RowMatrixXd dist = (RowMatrixXd::Ones(unit.rows(), unit.rows()) - unit * unit.transpose());

    const int k = *std::max_element(present.begin(), present.end()) + 1;
    std::vector<double> count(static_cast<std::size_t>(k), 0.0);
    for (auto i : idx) count[a.labels[i]] += 1.0;

    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t c = 0; c < idx.size(); ++c)
            if (c != r) sums[a.labels[idx[c]]] += std::max(0.0, dist(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        const int own = a.labels[idx[r]];
        if (count[own] <= 1.0) continue;  // singleton: s = 0
        const double intra = sums[own] / (count[own] - 1.0);
        double inter = kInf;
        for (int c = 0; c < k; ++c)
            if (c != own && count[c] > 0.0) inter = std::min(inter, sums[c] / count[c]);
        const double denom = std::max(intra, inter);
        if (denom > 0.0) total += (inter - intra) / denom;
    }
    return total / static_cast<double>(idx.size());
}

namespace {

// Core distance from every other member of the cluster, weighted by inverse
// distance to the power of the dimensionality. Coincident points are skipped in
// the sum but still counted.
std::vector<double> all_points_core_distances(const RowMatrixXd& m, double d) {
    const Eigen::Index n = m.rows();
    std::vector<double> core(static_cast<std::size_t>(n), 0.0);
    double grand = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dist = (m.row(i) - m.row(j)).norm();
            if (dist != 0.0) s += std::pow(1.0 / dist, d);
        }
        core[i] = s / static_cast<double>(n - 1);
        grand += core[i];
    }
    if (grand == 0.0) return std::vector<double>(static_cast<std::size_t>(n), 0.0);
    for (auto& c : core) c = std::pow(c, -1.0 / d);
    return core;
}

struct ClusterMst {
    std::vector<Eigen::Index> internal_nodes;  // local indices
    double sparseness = 0.0;
};

ClusterMst internal_mst(const RowMatrixXd& m, const std::vector<double>& core) {
    const Eigen::Index n = m.rows();
    auto reach = [&](Eigen::Index i, Eigen::Index j) {
        return std::max({(m.row(i) - m.row(j)).norm(), core[i], core[j]});
    };
    // Prim, starting from node 0.
    std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
    std::vector<double> best(static_cast<std::size_t>(n), kInf);
    std::vector<Eigen::Index> from(static_cast<std::size_t>(n), 0);
    std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> edges;
    Eigen::Index current = 0;
    in_tree[0] = 1;
    for (Eigen::Index step = 1; step < n; ++step) {
        Eigen::Index next = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            const double r = reach(current, j);
            if (r < best[j]) {
                best[j] = r;
                from[j] = current;
            }
            if (next < 0 || best[j] < best[next]) next = j;
        }
        edges.emplace_back(from[next], next, best[next]);
        in_tree[next] = 1;
        current = next;
    }

    // Re-derive each edge's tree-side endpoint as the lowest-index node already
    // in the tree whose reachability matches the edge weight. Under ties this
    // picks a different (equally minimal) tree than Prim's own bookkeeping, and
    // it is the tree the reference validity index scores.
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (std::size_t k = 0; k < edges.size(); ++k) {
        auto& [a, b, w] = edges[k];
        if (k > 0) {
            for (Eigen::Index v = 0; v < n; ++v) {
                if (!seen[v] || v == b) continue;
                if (std::abs(reach(b, v) - w) <= 1e-8 + 1e-5 * std::abs(w)) {
                    a = v;
                    break;
                }
            }
        }
        seen[a] = seen[b] = 1;
    }

    std::vector<int> degree(static_cast<std::size_t>(n), 0);
    for (const auto& [a, b, w] : edges) {
        ++degree[a];
        ++degree[b];
    }
    ClusterMst out;
    for (Eigen::Index i = 0; i < n; ++i)
        if (degree[i] > 1) out.internal_nodes.push_back(i);
    if (out.internal_nodes.empty()) out.internal_nodes.push_back(0);

    std::vector<char> internal(static_cast<std::size_t>(n), 0);
    for (auto i : out.internal_nodes) internal[i] = 1;
    bool any_internal_edge = false;
    double sparse = 0.0;
    for (const auto& [a, b, w] : edges) {
        if (internal[a] && internal[b]) {
            sparse = any_internal_edge ? std::max(sparse, w) : w;
            any_internal_edge = true;
        }
    }
    if (!any_internal_edge)
        for (const auto& [a, b, w] : edges) sparse = std::max(sparse, w);
    out.sparseness = sparse;
    return out;
}

}  // namespace

double dbcv(const RowMatrixXd& points, const ClusterAssignment& a) {
    check_labels(points, a);
    if (a.n_clusters < 1) fail(ErrorCode::TooFewPoints, "dbcv needs at least one cluster");
    const double d = static_cast<double>(points.cols());

    struct Part {
        RowMatrixXd members;
        std::vector<double> core;
        ClusterMst mst;
        std::size_t size = 0;
    };
    std::vector<Part> parts(static_cast<std::size_t>(a.n_clusters));
    for (int c = 0; c < a.n_clusters; ++c) {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < a.labels.size(); ++i)
            if (a.labels[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
        if (rows.size() < 2) fail(ErrorCode::TooFewPoints, "dbcv needs at least two members in every cluster");
        auto& p = parts[c];
        p.size = rows.size();
        p.members.resize(static_cast<Eigen::Index>(rows.size()), points.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) p.members.row(static_cast<Eigen::Index>(r)) = points.row(rows[r]);
        p.core = all_points_core_distances(p.members, d);
        p.mst = internal_mst(p.members, p.core);
    }

    double result = 0.0;
    const double n_total = static_cast<double>(points.rows());
    for (int i = 0; i < a.n_clusters; ++i) {
        double separation = kInf;
        for (int j = 0; j < a.n_clusters; ++j) {
            if (j == i) continue;
            const auto& pi = parts[i];
            const auto& pj = parts[j];
            for (auto u : pi.mst.internal_nodes)
                for (auto v : pj.mst.internal_nodes) {
                    const double r = std::max({(pi.members.row(u) - pj.members.row(v)).norm(), pi.core[u], pj.core[v]});
                    separation = std::min(separation, r);
                }
        }
        const double sparse = parts[i].mst.sparseness;
        // A lone cluster is infinitely separated: its validity tends to 1.
        double validity = 1.0;
        if (!std::isinf(separation)) {
            const double denom = std::max(separation, sparse);
            validity = denom > 0.0 ? (separation - sparse) / denom : 0.0;
        }
        result += static_cast<double>(parts[i].size) / n_total * validity;
    }
    return result;
}

}  // namespace itm
