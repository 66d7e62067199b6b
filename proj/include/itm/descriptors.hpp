#pragma once

#include "itm/bundle.hpp"
#include "itm/cluster.hpp"
#include "itm/topics.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace itm {

enum class EmbeddingSource { mean_of_words, phrase };

std::string_view to_string(EmbeddingSource s) noexcept;

/// A content descriptor: the words that summarize one image cluster (or one
/// global topic), used as a bottleneck concept.
struct Descriptor {
    int cluster_id = 0;
    std::string name;
    std::vector<std::string> words;
    std::map<std::string, double> word_alignments;  // r per word; empty for topic-only descriptors
    Vector<double> embedding;
    EmbeddingSource embedding_source = EmbeddingSource::mean_of_words;
    std::optional<double> privacy_score;

    /// Text used to key phrase embeddings: words joined by ", ".
    std::string text() const;
};

inline constexpr int kDescriptorWords = 10;

/// Cosine between the cluster centroid and each candidate word's embedding.
std::map<std::string, double> alignment_scores(const Cluster& cluster, const std::set<std::string>& candidate_words,
                                               const Vocabulary& vocab);

/// Image-guided descriptor: pool every topic representation, drop duplicates,
/// keep the words best aligned with the cluster centroid.
Descriptor build_descriptor(const Cluster& cluster, const std::vector<Topic>& topics, const Vocabulary& vocab,
                            const PhraseTable* phrases = nullptr);

/// Topic-only descriptor (no image guidance): the topic representation as is.
Descriptor topic_descriptor(const Topic& topic, const Vocabulary& vocab, std::optional<double> privacy_score,
                            const PhraseTable* phrases = nullptr);

/// Descriptor embedding: the phrase embedding for `text` when present, else the
/// normalized mean of the word embeddings.
Vector<double> descriptor_embedding(const std::vector<std::string>& words, const Vocabulary& vocab,
                                    const PhraseTable* phrases, EmbeddingSource* source = nullptr);

}  // namespace itm
