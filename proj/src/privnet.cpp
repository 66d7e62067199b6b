#include "itm/privnet.hpp"

#include "itm/error.hpp"
#include "itm/random.hpp"
#include "itm/serialize.hpp"

#include <cmath>
#include <numeric>

namespace itm {

AssociationMatrix association_matrix(const Bundle& bundle, const std::vector<Descriptor>& descriptors,
                                     std::span<const Eigen::Index> rows) {
    if (descriptors.empty()) fail(ErrorCode::InvalidConfig, "association matrix needs at least one descriptor");
    const Eigen::Index n = static_cast<Eigen::Index>(descriptors.size());
    RowMatrixXd desc(n, bundle.dim());
    AssociationMatrix out;
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& d = descriptors[static_cast<std::size_t>(j)];
        if (d.embedding.size() != bundle.dim())
            fail(ErrorCode::DimensionMismatch, "descriptor " + d.name + " embedding has the wrong dimension");
        const double norm = d.embedding.norm();
        if (norm == 0.0) fail(ErrorCode::ZeroNormEmbedding, "descriptor " + d.name + " has a zero embedding");
        desc.row(j) = d.embedding.transpose() / norm;
        out.descriptor_ids.push_back(d.name);
    }
    RowMatrixXd images(static_cast<Eigen::Index>(rows.size()), bundle.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto x = bundle.image_embeddings.data.row(rows[i]);
        const double norm = x.norm();
        if (norm == 0.0) fail(ErrorCode::ZeroNormEmbedding, "image row " + std::to_string(rows[i]) + " has zero norm");
        images.row(static_cast<Eigen::Index>(i)) = x / norm;
        out.image_ids.push_back(bundle.records[static_cast<std::size_t>(rows[i])].id);
    }
    out.scores = images * desc.transpose();
    out.scores = out.scores.cwiseMax(-1.0).cwiseMin(1.0);
    return out;
}

std::vector<int> labels_of(const Bundle& bundle, std::span<const Eigen::Index> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) {
        const auto& rec = bundle.records[static_cast<std::size_t>(r)];
        if (!rec.label) fail(ErrorCode::UnlabeledRow, "record '" + rec.id + "' has no label");
        out.push_back(static_cast<int>(*rec.label));
    }
    return out;
}

LinearModel train(const AssociationMatrix& s, std::span<const int> labels, const TrainConfig& cfg,
                  std::vector<Descriptor> descriptors, const AssociationMatrix* val, std::span<const int> val_labels) {
    const Eigen::Index n = s.scores.rows();
    const Eigen::Index dims = s.scores.cols();
    if (dims < 1) fail(ErrorCode::DimensionMismatch, "training needs at least one descriptor column");
    if (n < 1) fail(ErrorCode::EmptyTestSet, "training set is empty");
    if (static_cast<Eigen::Index>(labels.size()) != n)
        fail(ErrorCode::UnlabeledRow, "every training row needs a label");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
        fail(ErrorCode::InvalidConfig, "epochs, batch size and learning rate must be positive");
    if (!descriptors.empty() && static_cast<Eigen::Index>(descriptors.size()) != dims)
        fail(ErrorCode::DimensionMismatch, "descriptor list does not match the score columns");

    int classes = kNumClasses;
    for (int y : labels) {
        if (y < 0) fail(ErrorCode::UnlabeledRow, "negative class label");
        classes = std::max(classes, y + 1);
    }

    Rng rng(cfg.seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims));
    Eigen::MatrixXd w(classes, dims);
    for (Eigen::Index c = 0; c < classes; ++c)
        for (Eigen::Index j = 0; j < dims; ++j) w(c, j) = rng.uniform(-bound, bound);

    Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(classes, dims);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(classes, dims);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::uint64_t step = 0;

    RowMatrixXd batch;
    std::vector<int> batch_labels;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.resize(static_cast<Eigen::Index>(end - start), dims);
            batch_labels.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch.row(static_cast<Eigen::Index>(k - start)) = s.scores.row(order[k]);
                batch_labels.push_back(labels[static_cast<std::size_t>(order[k])]);
            }
            const Eigen::MatrixXd g = cross_entropy_gradient(w, batch, batch_labels);
            ++step;
            m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
            m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseProduct(g);
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            w.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
        }
        if (!w.allFinite()) fail(ErrorCode::NonFiniteLoss, "weights diverged in epoch " + std::to_string(epoch));
    }

    LinearModel model;
    model.weights = std::move(w);
    if (classes != kNumClasses) {
        model.class_names.clear();
        for (int c = 0; c < classes; ++c) model.class_names.push_back("class-" + std::to_string(c));
    }
    model.descriptors = std::move(descriptors);
    model.meta.epochs = cfg.epochs;
    model.meta.learning_rate = cfg.learning_rate;
    model.meta.batch_size = cfg.batch_size;
    model.meta.seed = cfg.seed;
    model.meta.final_train_loss = cross_entropy_loss(model.weights, s.scores, labels);
    if (!std::isfinite(model.meta.final_train_loss)) fail(ErrorCode::NonFiniteLoss, "final training loss is not finite");
    if (val && val->scores.rows() > 0) model.meta.final_val_loss = cross_entropy_loss(model.weights, val->scores, val_labels);
    return model;
}

Prediction predict(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() != model.num_descriptors()) {
        fail(ErrorCode::DimensionMismatch, "association vector has " + std::to_string(v.size()) + " entries, model expects " +
                                               std::to_string(model.num_descriptors()));
    }
    Prediction p;
    p.logits = model.weights * v;
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < p.logits.size(); ++c)
        if (p.logits[c] > p.logits[best]) best = c;
    p.label = static_cast<int>(best);
    return p;
}

Metrics metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
    if (truth.empty()) fail(ErrorCode::EmptyTestSet, "no test rows to evaluate");
    if (truth.size() != predicted.size()) fail(ErrorCode::DimensionMismatch, "truth and prediction lengths differ");
    Metrics m;
    m.total = truth.size();
    m.confusion.assign(static_cast<std::size_t>(num_classes), std::vector<std::size_t>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
        if (truth[i] == predicted[i]) ++m.correct;
    }
    double f1_sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        ClassMetrics cm;
        const auto uc = static_cast<std::size_t>(c);
        cm.tp = m.confusion[uc][uc];
        for (int o = 0; o < num_classes; ++o) {
            if (o == c) continue;
            cm.fp += m.confusion[static_cast<std::size_t>(o)][uc];
            cm.fn += m.confusion[uc][static_cast<std::size_t>(o)];
        }
        if (cm.tp + cm.fp == 0) {
            cm.precision_undefined = true;
            m.warning = true;
        } else {
            cm.precision = 100.0 * static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
        }
        if (cm.tp + cm.fn == 0) {
            cm.recall_undefined = true;
            m.warning = true;
        } else {
            cm.recall = 100.0 * static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
        }
        cm.f1 = (cm.precision + cm.recall) > 0.0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
        f1_sum += cm.f1;
        m.per_class.push_back(cm);
    }
    m.u_ba = 100.0 * static_cast<double>(m.correct) / static_cast<double>(m.total);
    m.u_f1 = f1_sum / static_cast<double>(num_classes);
    return m;
}

Metrics evaluate(const LinearModel& model, const AssociationMatrix& test, std::span<const int> labels) {
    if (test.scores.rows() == 0) fail(ErrorCode::EmptyTestSet, "no test rows to evaluate");
    if (static_cast<Eigen::Index>(labels.size()) != test.scores.rows())
        fail(ErrorCode::UnlabeledRow, "every test row needs a label");
    std::vector<int> predicted;
    predicted.reserve(labels.size());
    for (Eigen::Index i = 0; i < test.scores.rows(); ++i)
        predicted.push_back(predict(model, test.scores.row(i).transpose()).label);
    return metrics_from_predictions(labels, predicted, static_cast<int>(model.num_classes()));
}

void save_model(const LinearModel& model, const std::filesystem::path& path) { write_json(path, to_json(model)); }

LinearModel load_model(const std::filesystem::path& path) {
    Json j;
    try {
        j = read_json(path);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedRecord)
            fail(ErrorCode::SchemaVersionMismatch, std::string("model file is not a valid model: ") + e.what());
        throw;
    }
    return model_from_json(j);
}

}  // namespace itm
