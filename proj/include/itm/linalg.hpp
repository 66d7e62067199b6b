#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace itm {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrixXd = RowMatrix<double>;

/// Cosine similarity of two vectors. Zero-norm input yields NaN; callers that
/// can see zero vectors must check first.
template <typename A, typename B>
typename A::Scalar cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    using Scalar = typename A::Scalar;
    const Scalar denom = a.norm() * b.norm();
    if (denom == Scalar(0)) return std::numeric_limits<Scalar>::quiet_NaN();
    return a.dot(b) / denom;
}

/// Row-wise L2 normalization. Rows with zero norm are left as zeros.
template <typename Derived>
RowMatrix<typename Derived::Scalar> normalized_rows(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    RowMatrix<Scalar> out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const Scalar n = out.row(i).norm();
        if (n > Scalar(0)) out.row(i) /= n;
    }
    return out;
}

/// Pairwise cosine similarity between the rows of `a` and the rows of `b`.
template <typename A, typename B>
RowMatrix<typename A::Scalar> cosine_similarity_matrix(const Eigen::MatrixBase<A>& a,
                                                       const Eigen::MatrixBase<B>& b) {
    return normalized_rows(a) * normalized_rows(b).transpose();
}

/// L2-normalized arithmetic mean of the rows of `m`.
template <typename Derived>
Vector<typename Derived::Scalar> normalized_mean(const Eigen::MatrixBase<Derived>& m) {
    Vector<typename Derived::Scalar> mean = m.colwise().mean().transpose();
    const auto n = mean.norm();
    if (n > 0) mean /= n;
    return mean;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

}  // namespace itm
