#include "itm/cluster.hpp"
#include "itm/error.hpp"

namespace itm {

double privacy_score(int private_members, int labeled_members) {
    if (labeled_members <= 0) fail(ErrorCode::InvalidConfig, "privacy score needs labeled members");
    return 100.0 * static_cast<double>(private_members) / static_cast<double>(labeled_members);
}

std::vector<Cluster> make_clusters(const ClusterAssignment& assignment, const Bundle& bundle,
                                   std::span<const Eigen::Index> rows) {
    if (assignment.labels.size() != rows.size())
        fail(ErrorCode::DimensionMismatch, "assignment covers " + std::to_string(assignment.labels.size()) +
                                               " points but " + std::to_string(rows.size()) + " rows were given");
    std::vector<Cluster> clusters(static_cast<std::size_t>(assignment.n_clusters));
    std::vector<Vector<double>> sums(clusters.size(), Vector<double>::Zero(bundle.dim()));
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        clusters[c].id = static_cast<int>(c);
        clusters[c].name = "cluster-" + std::to_string(c);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int l = assignment.labels[i];
        if (l < 0) continue;
        auto& c = clusters[static_cast<std::size_t>(l)];
        const auto& rec = bundle.records[static_cast<std::size_t>(rows[i])];
        c.member_ids.push_back(rec.id);
        sums[static_cast<std::size_t>(l)] += bundle.image_embeddings.data.row(rows[i]).transpose();
        if (rec.label) {
            ++c.labeled_members;
            if (*rec.label == Label::Private) ++c.private_members;
        }
    }
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        auto& cl = clusters[c];
        const double norm = sums[c].norm();
        if (norm == 0.0) fail(ErrorCode::ZeroNormEmbedding, "centroid of " + cl.name + " has zero norm");
        cl.centroid = sums[c] / norm;
        if (cl.labeled_members > 0) cl.privacy_score = privacy_score(cl.private_members, cl.labeled_members);
    }
    return clusters;
}

}  // namespace itm
