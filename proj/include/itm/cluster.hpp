#pragma once

#include "itm/bundle.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace itm {

struct ClusterConfig {
    int min_cluster_size = 30;  // c_min
    int min_samples = 0;        // 0 means "same as min_cluster_size"
    // When excess-of-mass selects nothing, keep the root as one cluster
    // (labelling as in HDBSCAN's allow_single_cluster mode).
    bool single_cluster_fallback = true;

    int effective_min_samples() const { return min_samples > 0 ? min_samples : min_cluster_size; }
};

struct ClusterAssignment {
    std::vector<int> labels;  // -1 = outlier
    int n_clusters = 0;

    std::size_t outliers() const;
    std::vector<std::size_t> sizes() const;
};

/// One row of the condensed cluster tree.
struct CondensedEdge {
    int parent;
    int child;  // point index when child_size == 1, cluster id otherwise
    double lambda;
    int child_size;
};

struct HdbscanResult {
    ClusterAssignment assignment;
    std::vector<CondensedEdge> condensed_tree;
    std::vector<double> core_distances;
};

/// HDBSCAN* with euclidean distance and excess-of-mass selection.
HdbscanResult hdbscan_detailed(const RowMatrixXd& points, const ClusterConfig& cfg);

template <typename Derived>
ClusterAssignment hdbscan(const Eigen::MatrixBase<Derived>& points, const ClusterConfig& cfg) {
    return hdbscan_detailed(points.template cast<double>(), cfg).assignment;
}

/// Mean silhouette over non-outlier points with cosine distance.
double silhouette(const RowMatrixXd& points, const ClusterAssignment& assignment);

/// Density-based cluster validity index (euclidean), outliers counted in the
/// size weighting.
double dbcv(const RowMatrixXd& points, const ClusterAssignment& assignment);

struct Cluster {
    int id = 0;
    std::vector<std::string> member_ids;
    Vector<double> centroid;  // unit norm, original joint space
    std::optional<double> privacy_score;  // percent; null when no member is labeled
    int labeled_members = 0;
    int private_members = 0;
    std::string name;
};

/// Percentage of labeled members annotated private.
double privacy_score(int private_members, int labeled_members);

/// Turns an assignment over `rows` of the bundle into clusters with joint-space
/// centroids and privacy scores. `rows[i]` is the bundle row of assignment entry i.
std::vector<Cluster> make_clusters(const ClusterAssignment& assignment, const Bundle& bundle,
                                   std::span<const Eigen::Index> rows);

}  // namespace itm
