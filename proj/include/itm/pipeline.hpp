#pragma once

#include "itm/bundle.hpp"
#include "itm/cluster.hpp"
#include "itm/descriptors.hpp"
#include "itm/explain.hpp"
#include "itm/privnet.hpp"
#include "itm/reduce.hpp"
#include "itm/serialize.hpp"
#include "itm/topics.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace itm {

struct PipelineConfig {
    std::filesystem::path bundle;
    std::filesystem::path output;  // empty: nothing is written
    ReducerConfig reducer;
    ClusterConfig cluster;
    TopicConfig topics;
    TrainConfig train;
    std::uint64_t seed = 0;
    int top_k = 5;
    std::map<int, std::string> names;  // descriptor display-name overrides by cluster id
};

/// Reads a config JSON; absent keys keep the values already in `cfg`.
void apply_config_json(PipelineConfig& cfg, const Json& j);
Json config_json(const PipelineConfig& cfg);

/// Pipeline warnings; the CLI prints them to stderr, the manifest records them.
using Warnings = std::vector<std::string>;

/// Train + val rows (train only, with a warning, when the bundle has no val split).
std::vector<Eigen::Index> clustering_rows(const Bundle& bundle, Warnings& warnings);

struct ClusterStage {
    std::vector<Eigen::Index> rows;
    ClusterAssignment assignment;
    std::vector<Cluster> clusters;
    std::optional<double> silhouette;
    std::optional<double> dbcv;
};

ClusterStage cluster_stage(const Bundle& bundle, const EmbeddingMatrix& reduced, const ClusterConfig& cfg,
                           Warnings& warnings);
Json to_json(const ClusterStage& stage, const Bundle& bundle, const ClusterConfig& cfg);
std::vector<Cluster> clusters_from_artifact(const Json& j);

struct ClusterTopics {
    int cluster_id = 0;
    std::vector<Topic> topics;
    TopicDiscoveryInfo info;
    std::optional<std::string> skipped;  // reason when no topics could be formed
};

struct TopicStage {
    TopicScope scope = TopicScope::per_cluster;
    std::vector<ClusterTopics> per_cluster;
    std::vector<Topic> global;
    TopicDiscoveryInfo global_info;
};

/// ITM: topics within each image cluster. TM: topics over the tag documents of
/// all clustering rows, no image grouping.
TopicStage topic_stage(const Bundle& bundle, const std::vector<Cluster>& clusters,
                       std::span<const Eigen::Index> rows, const TopicConfig& cfg, Warnings& warnings);
Json to_json(const TopicStage& stage, const TopicConfig& cfg);
TopicStage topics_from_artifact(const Json& j);

struct DescriptorStage {
    std::vector<Descriptor> descriptors;
    std::vector<std::pair<int, std::string>> skipped;
};

DescriptorStage descriptor_stage(const Bundle& bundle, const std::vector<Cluster>& clusters, const TopicStage& topics,
                                 const std::map<int, std::string>& names, Warnings& warnings);
Json to_json(const DescriptorStage& stage, TopicScope scope);
std::vector<Descriptor> descriptors_from_artifact(const Json& j);

/// Fits the classifier on the train split only; val rows feed the reported loss.
LinearModel train_stage(const Bundle& bundle, std::vector<Descriptor> descriptors, const TrainConfig& cfg);

/// Test-split metrics; predictions for unlabeled test rows are skipped.
Metrics eval_stage(const Bundle& bundle, const LinearModel& model);

struct Explanations {
    GlobalExplanation global;
    std::vector<LocalExplanation> local;
};

Explanations explain_stage(const Bundle& bundle, const LinearModel& model, int top_k,
                           std::span<const Eigen::Index> rows);
Json to_json(const Explanations& e, const LinearModel& model);

struct PipelineResult {
    EmbeddingMatrix reduced;
    ClusterStage clusters;
    TopicStage topics;
    DescriptorStage descriptors;
    LinearModel model;
    Metrics metrics;
    Explanations explanations;
    Warnings warnings;
    Json manifest;
};

/// Artifact file names written by run_pipeline, in stage order.
const std::vector<std::string>& pipeline_artifacts();

/// reduce -> cluster -> topics -> descriptors -> train -> eval -> explain.
/// Stage failures are rethrown as StageError tagged with the stage name.
PipelineResult run_pipeline(const PipelineConfig& cfg);
PipelineResult run_pipeline(const PipelineConfig& cfg, const Bundle& bundle);

std::uint64_t fnv1a64(std::string_view bytes);
std::string checksum_file(const std::filesystem::path& path);

enum class AblationMethod { tm, itm };
std::string_view to_string(AblationMethod m) noexcept;
AblationMethod parse_ablation_method(std::string_view text);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population
};

/// Mean and population standard deviation.
MeanStd mean_std(std::span<const double> values);

struct AblationRow {
    AblationMethod method = AblationMethod::itm;
    int size = 0;
    std::size_t runs = 0;
    std::size_t descriptors = 0;
    MeanStd f1_public, f1_private, u_ba, u_f1;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    std::string csv() const;
    std::string table() const;
    const AblationRow* find(AblationMethod m, int size) const;
};

struct AblationConfig {
    PipelineConfig base;
    std::vector<AblationMethod> methods{AblationMethod::tm, AblationMethod::itm};
    std::vector<int> sizes{10, 20, 30};
    std::vector<std::uint64_t> seeds;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// TM vs ITM over minimum cluster/topic sizes and seeds.
AblationReport run_ablation(const AblationConfig& cfg, const Bundle& bundle);

}  // namespace itm
