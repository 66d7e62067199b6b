#include "itm/topics.hpp"

#include "itm/cluster.hpp"
#include "itm/error.hpp"
#include "itm/reduce.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace itm {

std::string_view to_string(TopicScope s) noexcept { return s == TopicScope::per_cluster ? "per_cluster" : "global"; }

TopicScope parse_topic_scope(std::string_view text) {
    if (text == "per_cluster") return TopicScope::per_cluster;
    if (text == "global") return TopicScope::global;
    fail(ErrorCode::InvalidConfig, "unknown topic scope '" + std::string(text) + "'");
}

std::vector<std::map<std::string, double>> ctfidf(const std::vector<WordCounts>& topics) {
    if (topics.empty()) fail(ErrorCode::EmptyTopic, "c-TF-IDF needs at least one topic");
    std::vector<std::uint64_t> topic_total(topics.size(), 0);
    std::map<std::string, std::uint64_t> corpus;
    std::uint64_t total = 0;
    for (std::size_t t = 0; t < topics.size(); ++t) {
        for (const auto& [w, c] : topics[t]) {
            topic_total[t] += c;
            corpus[w] += c;
        }
        if (topic_total[t] == 0) fail(ErrorCode::EmptyTopic, "topic " + std::to_string(t) + " has no words");
        total += topic_total[t];
    }
    const auto n_topics = static_cast<std::uint64_t>(topics.size());

    std::vector<std::map<std::string, double>> out(topics.size());
    for (std::size_t t = 0; t < topics.size(); ++t) {
        for (const auto& [w, c] : topics[t]) {
            if (c == 0) continue;
            // a / f_w = (total / n_topics) / f_w, formed from integers so that
            // uniformly scaling all counts leaves every score bit-identical.
            const double tf = static_cast<double>(c) / static_cast<double>(topic_total[t]);
            const double ratio = static_cast<double>(total) / static_cast<double>(n_topics * corpus[w]);
            out[t][w] = tf * std::log1p(ratio);
        }
    }
    return out;
}

double score_of(const std::map<std::string, double>& scores, const std::string& word) {
    const auto it = scores.find(word);
    return it == scores.end() ? 0.0 : it->second;
}

std::vector<std::string> top_words(const std::map<std::string, double>& scores, int k) {
    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& [w, h] : scores)
        if (h > 0.0) ranked.emplace_back(w, h);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < k; ++i) out.push_back(ranked[i].first);
    return out;
}

bool keep_word(const std::string& word) {
    if (word.size() < 2) return false;
    return !std::all_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::vector<TagDocument> make_documents(const Bundle& bundle, std::span<const Eigen::Index> rows) {
    std::vector<TagDocument> docs;
    for (auto row : rows) {
        const auto& rec = bundle.records[static_cast<std::size_t>(row)];
        TagDocument doc;
        doc.image_id = rec.id;
        Vector<double> sum = Vector<double>::Zero(bundle.dim());
        for (const auto& t : rec.tags) {
            if (!keep_word(t)) continue;
            doc.words.push_back(t);
            sum += bundle.vocabulary.embedding(t);
        }
        if (doc.words.empty() || sum.norm() == 0.0) continue;
        doc.embedding = sum.normalized();
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Topic> discover_topics(const std::vector<TagDocument>& docs, const TopicConfig& cfg,
                                   TopicDiscoveryInfo* info) {
    if (cfg.min_topic_size < 2) fail(ErrorCode::InvalidConfig, "min_topic_size must be >= 2");
    if (static_cast<int>(docs.size()) < cfg.min_topic_size) {
        fail(ErrorCode::TooFewDocuments, std::to_string(docs.size()) + " documents cannot form a topic of at least " +
                                             std::to_string(cfg.min_topic_size));
    }
    TopicDiscoveryInfo local;
    const Eigen::Index dim = docs.front().embedding.size();
    RowMatrixXd points(static_cast<Eigen::Index>(docs.size()), dim);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i].words.empty()) fail(ErrorCode::EmptyTopic, "document " + docs[i].image_id + " has no words");
        points.row(static_cast<Eigen::Index>(i)) = docs[i].embedding.transpose();
    }
    if (static_cast<int>(docs.size()) >= cfg.reduce_above && cfg.reduced_dim < dim) {
        points = pca_reduce(points, cfg.reduced_dim);
        local.reduced = true;
    }

    ClusterConfig cc;
    cc.min_cluster_size = cfg.min_topic_size;
    cc.single_cluster_fallback = false;
    const auto assignment = hdbscan(points, cc);

    std::vector<std::vector<std::size_t>> groups;
    if (assignment.n_clusters == 0) {
        local.fallback = true;
        groups.emplace_back(docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) groups[0][i] = i;
    } else {
        groups.resize(static_cast<std::size_t>(assignment.n_clusters));
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (assignment.labels[i] >= 0)
                groups[static_cast<std::size_t>(assignment.labels[i])].push_back(i);
            else
                ++local.outlier_documents;
        }
    }

    std::vector<WordCounts> counts(groups.size());
    for (std::size_t t = 0; t < groups.size(); ++t)
        for (auto i : groups[t])
            for (const auto& w : docs[i].words) ++counts[t][w];

    const auto scores = ctfidf(counts);
    std::vector<Topic> topics(groups.size());
    for (std::size_t t = 0; t < groups.size(); ++t) {
        auto& topic = topics[t];
        topic.id = static_cast<int>(t);
        for (auto i : groups[t]) topic.member_docs.push_back(docs[i].image_id);
        topic.word_scores = scores[t];
        topic.representation = top_words(topic.word_scores, cfg.representation_size);
    }
    if (info) *info = local;
    return topics;
}

}  // namespace itm
