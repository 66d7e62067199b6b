#include "itm/descriptors.hpp"

#include "itm/error.hpp"

#include <algorithm>

namespace itm {

std::string_view to_string(EmbeddingSource s) noexcept {
    return s == EmbeddingSource::phrase ? "phrase" : "mean_of_words";
}

std::string Descriptor::text() const {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ", ";
        out += words[i];
    }
    return out;
}

std::map<std::string, double> alignment_scores(const Cluster& cluster, const std::set<std::string>& candidates,
                                               const Vocabulary& vocab) {
    std::map<std::string, double> r;
    for (const auto& w : candidates) {
        const Vector<double> e = vocab.embedding(w);
        const double score = cosine(cluster.centroid, e);
        if (std::isnan(score)) fail(ErrorCode::ZeroNormEmbedding, "zero-norm embedding for word '" + w + "'");
        r[w] = score;
    }
    return r;
}

Vector<double> descriptor_embedding(const std::vector<std::string>& words, const Vocabulary& vocab,
                                    const PhraseTable* phrases, EmbeddingSource* source) {
    if (phrases) {
        Descriptor probe;
        probe.words = words;
        if (auto hit = phrases->find(probe.text())) {
            if (source) *source = EmbeddingSource::phrase;
            return hit->normalized();
        }
    }
    Vector<double> sum = Vector<double>::Zero(vocab.embeddings.dim());
    for (const auto& w : words) sum += vocab.embedding(w);
    if (sum.norm() == 0.0) fail(ErrorCode::ZeroNormEmbedding, "descriptor word embeddings cancel out");
    if (source) *source = EmbeddingSource::mean_of_words;
    return sum.normalized();
}

Descriptor build_descriptor(const Cluster& cluster, const std::vector<Topic>& topics, const Vocabulary& vocab,
                            const PhraseTable* phrases) {
    std::set<std::string> pool;
    for (const auto& t : topics) pool.insert(t.representation.begin(), t.representation.end());
    if (pool.empty()) fail(ErrorCode::EmptyCandidatePool, cluster.name + " has no topic words to describe it");

    Descriptor d;
    d.cluster_id = cluster.id;
    const auto r = alignment_scores(cluster, pool, vocab);
    std::vector<std::pair<std::string, double>> ranked(r.begin(), r.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > static_cast<std::size_t>(kDescriptorWords)) ranked.resize(kDescriptorWords);
    for (const auto& [w, score] : ranked) {
        d.words.push_back(w);
        d.word_alignments[w] = score;
    }
    d.name = d.words.front();
    d.embedding = descriptor_embedding(d.words, vocab, phrases, &d.embedding_source);
    d.privacy_score = cluster.privacy_score;
    return d;
}

Descriptor topic_descriptor(const Topic& topic, const Vocabulary& vocab, std::optional<double> privacy_score,
                            const PhraseTable* phrases) {
    if (topic.representation.empty())
        fail(ErrorCode::EmptyCandidatePool, "topic " + std::to_string(topic.id) + " has an empty representation");
    Descriptor d;
    d.cluster_id = topic.id;
    d.words = topic.representation;
    d.name = d.words.front();
    d.embedding = descriptor_embedding(d.words, vocab, phrases, &d.embedding_source);
    d.privacy_score = privacy_score;
    return d;
}

}  // namespace itm
