#include "itm/cluster.hpp"
#include "itm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace itm {

std::size_t ClusterAssignment::outliers() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
}

std::vector<std::size_t> ClusterAssignment::sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(n_clusters), 0);
    for (int l : labels)
        if (l >= 0) ++out[static_cast<std::size_t>(l)];
    return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double euclid(const RowMatrixXd& p, Eigen::Index a, Eigen::Index b) { return (p.row(a) - p.row(b)).norm(); }

// Distance to the k-th nearest neighbour, the point itself counting as the first.
std::vector<double> core_distances(const RowMatrixXd& p, int k) {
    const Eigen::Index n = p.rows();
    std::vector<double> core(static_cast<std::size_t>(n));
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) row[j] = i == j ? 0.0 : euclid(p, i, j);
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        core[i] = row[k - 1];
    }
    return core;
}

struct MstEdge {
    Eigen::Index from;
    Eigen::Index to;
    double weight;
};

// Prim's algorithm over the mutual-reachability graph, grown from point 0.
std::vector<MstEdge> mutual_reachability_mst(const RowMatrixXd& p, const std::vector<double>& core) {
    const Eigen::Index n = p.rows();
    std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
    std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::max());
    std::vector<Eigen::Index> source(static_cast<std::size_t>(n), 0);
    std::vector<MstEdge> mst;
    mst.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));

    Eigen::Index current = 0;
    for (Eigen::Index step = 1; step < n; ++step) {
        in_tree[current] = 1;
        double new_weight = std::numeric_limits<double>::max();
        Eigen::Index new_from = 0, new_to = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            const double reach = std::max({euclid(p, current, j), core[current], core[j]});
            if (reach < best[j]) {
                best[j] = reach;
                source[j] = current;
                if (reach < new_weight) {
                    new_weight = reach;
                    new_from = current;
                    new_to = j;
                }
            } else if (best[j] < new_weight) {
                new_weight = best[j];
                new_from = source[j];
                new_to = j;
            }
        }
        mst.push_back({new_from, new_to, new_weight});
        current = new_to;
    }
    return mst;
}

struct LinkageRow {
    int left;
    int right;
    double distance;
    int size;
};

// Single-linkage dendrogram; leaves are 0..n-1, merge i creates node n+i.
std::vector<LinkageRow> single_linkage(std::vector<MstEdge> mst, int n) {
    std::stable_sort(mst.begin(), mst.end(), [](const MstEdge& a, const MstEdge& b) { return a.weight < b.weight; });
    std::vector<int> parent(static_cast<std::size_t>(2 * n - 1), -1);
    std::vector<int> size(static_cast<std::size_t>(2 * n - 1), 1);
    auto find = [&](int x) {
        int root = x;
        while (parent[root] != -1) root = parent[root];
        while (parent[x] != -1 && parent[x] != root) {
            const int next = parent[x];
            parent[x] = root;
            x = next;
        }
        return root;
    };
    std::vector<LinkageRow> rows;
    rows.reserve(mst.size());
    int next_label = n;
    for (const auto& e : mst) {
        const int a = find(static_cast<int>(e.from));
        const int b = find(static_cast<int>(e.to));
        rows.push_back({a, b, e.weight, size[a] + size[b]});
        parent[a] = parent[b] = next_label;
        size[next_label] = size[a] + size[b];
        ++next_label;
    }
    return rows;
}

// Breadth-first node listing of the dendrogram below `root`.
std::vector<int> bfs_linkage(const std::vector<LinkageRow>& tree, int root, int n) {
    std::vector<int> out;
    std::vector<int> frontier{root};
    while (!frontier.empty()) {
        out.insert(out.end(), frontier.begin(), frontier.end());
        std::vector<int> next;
        for (int x : frontier) {
            if (x >= n) {
                next.push_back(tree[x - n].left);
                next.push_back(tree[x - n].right);
            }
        }
        frontier = std::move(next);
    }
    return out;
}

std::vector<CondensedEdge> condense(const std::vector<LinkageRow>& tree, int n, int min_cluster_size) {
    const int root = 2 * (n - 1);
    std::vector<int> relabel(static_cast<std::size_t>(root + 1), 0);
    std::vector<char> ignore(static_cast<std::size_t>(root + 1), 0);
    std::vector<CondensedEdge> out;
    int next_label = n + 1;
    relabel[root] = n;

    auto node_size = [&](int node) { return node >= n ? tree[node - n].size : 1; };
    auto drop_points = [&](int subtree, int parent_label, double lambda) {
        for (int sub : bfs_linkage(tree, subtree, n)) {
            if (sub < n) out.push_back({parent_label, sub, lambda, 1});
            ignore[sub] = 1;
        }
    };

    for (int node : bfs_linkage(tree, root, n)) {
        if (ignore[node] || node < n) continue;
        const auto& row = tree[node - n];
        const double lambda = row.distance > 0.0 ? 1.0 / row.distance : kInf;
        const int lc = node_size(row.left);
        const int rc = node_size(row.right);
        if (lc >= min_cluster_size && rc >= min_cluster_size) {
            relabel[row.left] = next_label++;
            out.push_back({relabel[node], relabel[row.left], lambda, lc});
            relabel[row.right] = next_label++;
            out.push_back({relabel[node], relabel[row.right], lambda, rc});
        } else if (lc < min_cluster_size && rc < min_cluster_size) {
            drop_points(row.left, relabel[node], lambda);
            drop_points(row.right, relabel[node], lambda);
        } else if (lc < min_cluster_size) {
            relabel[row.right] = relabel[node];
            drop_points(row.left, relabel[node], lambda);
        } else {
            relabel[row.left] = relabel[node];
            drop_points(row.right, relabel[node], lambda);
        }
    }
    return out;
}

// Excess-of-mass stability per cluster id.
std::map<int, double> stabilities(const std::vector<CondensedEdge>& tree, int root) {
    std::map<int, double> birth{{root, 0.0}};
    for (const auto& e : tree)
        if (e.child_size > 1) birth[e.child] = e.lambda;
    std::map<int, double> stability;
    for (const auto& e : tree) {
        const double b = birth[e.parent];
        // Points born and dying at the same infinite density contribute nothing.
        const double span = (std::isinf(e.lambda) && std::isinf(b)) ? 0.0 : e.lambda - b;
        stability[e.parent] += span * e.child_size;
    }
    for (const auto& [c, _] : birth) stability.try_emplace(c, 0.0);
    return stability;
}

std::vector<int> cluster_children(const std::vector<CondensedEdge>& tree, int parent) {
    std::vector<int> out;
    for (const auto& e : tree)
        if (e.parent == parent && e.child_size > 1) out.push_back(e.child);
    return out;
}

}  // namespace

HdbscanResult hdbscan_detailed(const RowMatrixXd& points, const ClusterConfig& cfg) {
    if (cfg.min_cluster_size < 2) fail(ErrorCode::InvalidConfig, "min_cluster_size must be >= 2");
    const int n = static_cast<int>(points.rows());
    const int k = cfg.effective_min_samples();
    if (n < cfg.min_cluster_size || n < k) {
        fail(ErrorCode::TooFewPoints, "hdbscan needs at least " + std::to_string(std::max(cfg.min_cluster_size, k)) +
                                          " points, got " + std::to_string(n));
    }
    if (!points.allFinite()) fail(ErrorCode::NonFiniteValue, "hdbscan input has non-finite values");

    HdbscanResult result;
    result.core_distances = core_distances(points, k);
    const auto linkage = single_linkage(mutual_reachability_mst(points, result.core_distances), n);
    result.condensed_tree = condense(linkage, n, cfg.min_cluster_size);
    const auto& tree = result.condensed_tree;

    const int root = n;
    auto stability = stabilities(tree, root);

    // Excess of mass, visiting clusters from the leaves (largest id) upwards; root excluded.
    std::map<int, bool> selected;
    for (auto it = stability.rbegin(); it != stability.rend(); ++it) {
        const int node = it->first;
        if (node == root) continue;
        selected[node] = true;
    }
    for (auto it = stability.rbegin(); it != stability.rend(); ++it) {
        const int node = it->first;
        if (node == root) continue;
        double subtree = 0.0;
        for (int child : cluster_children(tree, node)) subtree += stability[child];
        if (subtree > stability[node]) {
            selected[node] = false;
            stability[node] = subtree;
        } else {
            std::vector<int> stack = cluster_children(tree, node);
            while (!stack.empty()) {
                const int c = stack.back();
                stack.pop_back();
                selected[c] = false;
                for (int g : cluster_children(tree, c)) stack.push_back(g);
            }
        }
    }

    std::vector<int> chosen;
    for (const auto& [c, is] : selected)
        if (is) chosen.push_back(c);  // ascending id

    // Parent cluster of every cluster and every point.
    std::map<int, int> cluster_parent;
    std::vector<int> point_parent(static_cast<std::size_t>(n), root);
    std::vector<double> point_lambda(static_cast<std::size_t>(n), 0.0);
    for (const auto& e : tree) {
        if (e.child_size > 1) {
            cluster_parent[e.child] = e.parent;
        } else {
            point_parent[e.child] = e.parent;
            point_lambda[e.child] = e.lambda;
        }
    }

    auto& a = result.assignment;
    a.labels.assign(static_cast<std::size_t>(n), -1);
    if (!chosen.empty()) {
        std::map<int, int> label_of;
        for (std::size_t i = 0; i < chosen.size(); ++i) label_of[chosen[i]] = static_cast<int>(i);
        for (int p = 0; p < n; ++p) {
            int c = point_parent[p];
            while (true) {
                if (auto it = label_of.find(c); it != label_of.end()) {
                    a.labels[p] = it->second;
                    break;
                }
                auto up = cluster_parent.find(c);
                if (up == cluster_parent.end()) break;
                c = up->second;
            }
        }
        a.n_clusters = static_cast<int>(chosen.size());
    } else if (cfg.single_cluster_fallback) {
        double max_lambda = 0.0;
        for (const auto& e : tree)
            if (e.parent == root) max_lambda = std::max(max_lambda, e.lambda);
        int members = 0;
        for (int p = 0; p < n; ++p) {
            if (point_parent[p] == root && point_lambda[p] >= max_lambda) {
                a.labels[p] = 0;
                ++members;
            }
        }
        if (members >= cfg.min_cluster_size) {
            a.n_clusters = 1;
        } else {
            std::fill(a.labels.begin(), a.labels.end(), -1);
        }
    }
    return result;
}

}  // namespace itm
