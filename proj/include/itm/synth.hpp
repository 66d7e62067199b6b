#pragma once

#include "itm/bundle.hpp"

#include <cstdint>
#include <vector>

namespace itm {

/// Planted-structure bundle generator used by tests, the acceptance suite and
/// `itm synth`.
struct SynthSpec {
    int groups = 4;                 // k content groups
    int per_group = 50;             // images per group
    int dim = 16;                   // joint-space dimension
    int vocab_per_group = 12;       // distinct words owned by each group
    int tags_per_image = 8;
    double sigma = 0.05;            // per-coordinate Gaussian spread around a group center
    double word_sigma = -1.0;       // spread of word embeddings; negative means "same as sigma"
    double noise = 0.0;             // probability a tag slot is drawn from a foreign group
    // Consecutive groups sharing one tag pool. Above 1, groups in a pool are
    // visually distinct but their tag documents look alike.
    int tag_pool = 1;
    std::vector<double> private_bias;  // per-group P(private); empty means alternating 0.9 / 0.1
    // Fraction of images per split; the test split takes the remainder.
    double train_fraction = 0.6;
    double val_fraction = 0.2;
};

/// Ground truth kept alongside a synthetic bundle.
struct SynthTruth {
    std::vector<int> group_of_record;            // planted group per record
    std::vector<int> group_of_word;              // owning group per vocabulary word
    std::vector<std::vector<bool>> tag_foreign;  // per record, per tag: drawn from a foreign group
    RowMatrixXd centers;                         // groups x dim
};

Bundle synth_bundle(const SynthSpec& spec, std::uint64_t seed, SynthTruth* truth = nullptr);

/// Name of word `index` owned by `group` ("g2w07").
std::string synth_word(int group, int index);

}  // namespace itm
