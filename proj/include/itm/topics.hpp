#pragma once

#include "itm/bundle.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace itm {

enum class TopicScope { per_cluster, global };

std::string_view to_string(TopicScope s) noexcept;
TopicScope parse_topic_scope(std::string_view text);

struct TopicConfig {
    int min_topic_size = 10;  // t_min
    TopicScope scope = TopicScope::per_cluster;
    int representation_size = 10;
    int reduce_above = 200;   // documents; below this, topic clustering uses the full joint space
    int reduced_dim = 5;
};

/// Tag list of one image with its text embedding (normalized mean of word embeddings).
struct TagDocument {
    std::string image_id;
    std::vector<std::string> words;
    Vector<double> embedding;
};

using WordCounts = std::map<std::string, std::uint64_t>;

struct Topic {
    int id = 0;
    std::vector<std::string> member_docs;
    std::map<std::string, double> word_scores;  // h per word, only words present in the topic
    std::vector<std::string> representation;    // top words by h, ties lexicographic
};

/// Class-based TF-IDF. Entry t of the result maps each word present in topic t
/// to its importance; words absent from a topic score 0.
std::vector<std::map<std::string, double>> ctfidf(const std::vector<WordCounts>& topic_word_counts);

/// Score lookup that returns 0 for absent words.
double score_of(const std::map<std::string, double>& scores, const std::string& word);

/// Top `k` words by score (descending, ties lexicographic), scores > 0 only.
std::vector<std::string> top_words(const std::map<std::string, double>& scores, int k);

/// Tag-noise hygiene: drops words shorter than two characters and purely numeric tokens.
bool keep_word(const std::string& word);

/// Documents for the given bundle rows; records with no usable tags are skipped.
std::vector<TagDocument> make_documents(const Bundle& bundle, std::span<const Eigen::Index> rows);

struct TopicDiscoveryInfo {
    bool reduced = false;     // documents were PCA-reduced before clustering
    bool fallback = false;    // every document was an outlier, one topic covers all
    std::size_t outlier_documents = 0;
};

std::vector<Topic> discover_topics(const std::vector<TagDocument>& docs, const TopicConfig& cfg,
                                   TopicDiscoveryInfo* info = nullptr);

}  // namespace itm
