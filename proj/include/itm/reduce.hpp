#pragma once

#include "itm/bundle.hpp"
#include "itm/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace itm {

enum class ReduceMethod { pca, precomputed };

struct ReducerConfig {
    ReduceMethod method = ReduceMethod::pca;
    int target_dim = 5;
};

std::string_view to_string(ReduceMethod m) noexcept;
ReduceMethod parse_reduce_method(std::string_view text);

/// Principal axes of a point cloud: `mean` and one unit `components` column per
/// kept axis, ordered by descending variance (ties by axis index). Each
/// column's largest-magnitude loading is positive.
template <typename Scalar>
struct PcaBasis {
    Vector<Scalar> mean;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> components;
    Vector<Scalar> variances;

    template <typename Derived>
    RowMatrix<Scalar> project(const Eigen::MatrixBase<Derived>& points) const {
        return (points.rowwise() - mean.transpose()) * components;
    }
};

template <typename Derived>
PcaBasis<typename Derived::Scalar> fit_pca(const Eigen::MatrixBase<Derived>& points, int target_dim) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();
    if (target_dim < 1 || target_dim >= d)
        fail(ErrorCode::InvalidConfig, "pca target_dim must lie in [1, " + std::to_string(d - 1) + "]");
    if (n <= target_dim)
        fail(ErrorCode::RankDeficient, "pca needs more than " + std::to_string(target_dim) + " points, got " +
                                           std::to_string(n));

    PcaBasis<Scalar> basis;
    basis.mean = points.colwise().mean().transpose();
    const Matrix centered = points.rowwise() - basis.mean.transpose();
    const Matrix cov = (centered.transpose() * centered) / Scalar(n - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    const auto& values = solver.eigenvalues();
    const auto& vectors = solver.eigenvectors();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });

    basis.components.resize(d, target_dim);
    basis.variances.resize(target_dim);
    for (int k = 0; k < target_dim; ++k) {
        Vector<Scalar> axis = vectors.col(order[k]);
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < d; ++i)
            if (std::abs(axis[i]) > std::abs(axis[arg])) arg = i;
        if (axis[arg] < Scalar(0)) axis = -axis;
        basis.components.col(k) = axis;
        basis.variances[k] = std::max(values[order[k]], Scalar(0));
    }
    return basis;
}

/// Centered PCA projection onto the top `target_dim` axes; row order preserved.
template <typename Derived>
RowMatrix<typename Derived::Scalar> pca_reduce(const Eigen::MatrixBase<Derived>& points, int target_dim) {
    return fit_pca(points, target_dim).project(points);
}

/// Reduction of the image embeddings per `cfg`. `seed` is accepted for
/// reducer-interface parity; PCA itself is deterministic.
EmbeddingMatrix fit_reduce(const EmbeddingMatrix& embeddings, const ReducerConfig& cfg, std::uint64_t seed,
                           const std::optional<EmbeddingMatrix>& precomputed = std::nullopt);

/// Convenience for bundles: precomputed reads `bundle.reduced`.
EmbeddingMatrix fit_reduce(const Bundle& bundle, const ReducerConfig& cfg, std::uint64_t seed);

}  // namespace itm
