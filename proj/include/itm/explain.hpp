#pragma once

#include "itm/privnet.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace itm {

struct GlobalEdge {
    std::string descriptor;
    std::string class_name;
    double weight = 0.0;
    std::optional<double> privacy_score;
};

/// Every (descriptor, class) weight of the model, read straight off W.
struct GlobalExplanation {
    std::vector<GlobalEdge> edges;

    /// "source,target,value" rows for Sankey renderers.
    std::string sankey_csv() const;
};

/// Display names for the model's descriptors, made unique by suffixing the
/// cluster id when two descriptors share a name.
std::vector<std::string> descriptor_names(const LinearModel& model);

GlobalExplanation global_explanation(const LinearModel& model);

struct Contribution {
    int descriptor = 0;  // column of W
    std::string name;
    std::string words;
    int class_index = 0;
    double score = 0.0;   // s_ij
    double weight = 0.0;  // W[class][j]
    double value = 0.0;   // score * weight
    std::optional<double> privacy_score;
};

struct LocalExplanation {
    std::string image_id;
    int predicted = 0;
    std::optional<int> truth;
    Eigen::VectorXd logits;
    std::vector<Contribution> contributions;  // sorted by |value|, then descriptor, then class
    std::vector<Contribution> top_positive;   // predicted class, largest positive first
    std::vector<Contribution> top_negative;   // predicted class, most negative first
};

/// Per-descriptor contributions to the predicted class (all classes when
/// `all_classes`); they sum to the class logit.
LocalExplanation local_explanation(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& v, int top_k = 5,
                                   std::string image_id = {}, std::optional<int> truth = std::nullopt,
                                   bool all_classes = false);

/// Writes `json_path` and a plain-text table next to it (same stem, .txt).
void render_report(const std::vector<LocalExplanation>& explanations, const LinearModel& model,
                   const std::filesystem::path& json_path);

}  // namespace itm
