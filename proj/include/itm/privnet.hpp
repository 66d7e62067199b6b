#pragma once

#include "itm/bundle.hpp"
#include "itm/descriptors.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace itm {

/// Image x descriptor cosine scores; row i belongs to image_ids[i].
struct AssociationMatrix {
    RowMatrixXd scores;
    std::vector<std::string> image_ids;
    std::vector<std::string> descriptor_ids;
};

/// Scores for the bundle rows `rows` (original joint-space embeddings).
AssociationMatrix association_matrix(const Bundle& bundle, const std::vector<Descriptor>& descriptors,
                                     std::span<const Eigen::Index> rows);

/// Labels of the given bundle rows as class indices; throws UnlabeledRow.
std::vector<int> labels_of(const Bundle& bundle, std::span<const Eigen::Index> rows);

struct TrainConfig {
    int epochs = 100;
    double learning_rate = 0.01;
    int batch_size = 8;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainMeta {
    int epochs = 0;
    double learning_rate = 0.0;
    int batch_size = 0;
    std::uint64_t seed = 0;
    double final_train_loss = 0.0;
    std::optional<double> final_val_loss;
};

/// Bias-free linear layer over descriptor scores: logits = W v.
struct LinearModel {
    Eigen::MatrixXd weights;  // classes x descriptors
    std::vector<std::string> class_names{"public", "private"};
    std::vector<Descriptor> descriptors;
    TrainMeta meta;

    Eigen::Index num_classes() const { return weights.rows(); }
    Eigen::Index num_descriptors() const { return weights.cols(); }
};

// Mean softmax cross-entropy of logits W s_i over the rows of `scores`.
template <typename DW, typename DS>
double cross_entropy_loss(const Eigen::MatrixBase<DW>& weights, const Eigen::MatrixBase<DS>& scores,
                          std::span<const int> labels) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const Eigen::VectorXd z = weights * scores.row(i).transpose();
        const double m = z.maxCoeff();
        const double lse = m + std::log((z.array() - m).exp().sum());
        total += lse - z[labels[static_cast<std::size_t>(i)]];
    }
    return total / static_cast<double>(scores.rows());
}

// Analytic gradient of cross_entropy_loss with respect to W.
template <typename DW, typename DS>
Eigen::MatrixXd cross_entropy_gradient(const Eigen::MatrixBase<DW>& weights, const Eigen::MatrixBase<DS>& scores,
                                       std::span<const int> labels) {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const Eigen::VectorXd z = weights * scores.row(i).transpose();
        Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
        p /= p.sum();
        p[labels[static_cast<std::size_t>(i)]] -= 1.0;
        grad.noalias() += p * scores.row(i);
    }
    return grad / static_cast<double>(scores.rows());
}

/// Mini-batch Adam on the training rows only. `val` (optional) is used for the
/// reported validation loss, never for updates.
LinearModel train(const AssociationMatrix& train_scores, std::span<const int> labels, const TrainConfig& cfg,
                  std::vector<Descriptor> descriptors = {}, const AssociationMatrix* val_scores = nullptr,
                  std::span<const int> val_labels = {});

struct Prediction {
    int label = 0;
    Eigen::VectorXd logits;
};

Prediction predict(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& v);

struct ClassMetrics {
    double precision = 0.0;  // percent
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
    bool precision_undefined = false;
    bool recall_undefined = false;
};

struct Metrics {
    std::vector<ClassMetrics> per_class;
    double u_ba = 0.0;  // percent
    double u_f1 = 0.0;  // percent
    std::size_t total = 0;
    std::size_t correct = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
    bool warning = false;
};

/// Confusion-matrix metrics for already made predictions.
Metrics metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted, int num_classes);

Metrics evaluate(const LinearModel& model, const AssociationMatrix& test_scores, std::span<const int> labels);

inline constexpr int kModelSchemaVersion = 1;

void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace itm
