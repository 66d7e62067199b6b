#pragma once

#include "itm/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace itm {

enum class Split { train, val, test };
enum class Label : int { Public = 0, Private = 1 };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

inline constexpr int kNumClasses = 2;

struct ImageRecord {
    std::string id;
    Split split = Split::train;
    std::optional<Label> label;
    std::vector<std::string> tags;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Dense row-major matrix of joint-space (or reduced) vectors with one id per row.
/// Storage on disk is f32; in memory the scalar type is a template parameter.
template <typename Scalar>
struct BasicEmbeddings {
    RowMatrix<Scalar> data;
    std::vector<std::string> row_ids;

    Eigen::Index count() const { return data.rows(); }
    Eigen::Index dim() const { return data.cols(); }

    friend bool operator==(const BasicEmbeddings& a, const BasicEmbeddings& b) {
        return a.row_ids == b.row_ids && a.data.rows() == b.data.rows() && a.data.cols() == b.data.cols() &&
               a.data == b.data;
    }
};

using EmbeddingMatrix = BasicEmbeddings<double>;

struct Vocabulary {
    std::vector<std::string> words;
    EmbeddingMatrix embeddings;

    /// Row index of `word`, or -1.
    Eigen::Index find(const std::string& word) const;
    bool contains(const std::string& word) const { return find(word) >= 0; }
    /// Embedding row of `word`; throws WordNotInVocabulary.
    Vector<double> embedding(const std::string& word) const;

    void reindex();

private:
    std::unordered_map<std::string, Eigen::Index> index_;
};

/// Optional precomputed phrase embeddings keyed by descriptor text.
struct PhraseTable {
    EmbeddingMatrix embeddings;  // row_ids hold the phrase texts

    std::optional<Vector<double>> find(const std::string& text) const;
};

struct Bundle {
    std::vector<ImageRecord> records;
    EmbeddingMatrix image_embeddings;
    Vocabulary vocabulary;
    std::optional<EmbeddingMatrix> reduced;
    std::optional<PhraseTable> phrases;

    Eigen::Index dim() const { return image_embeddings.dim(); }
    /// Row indices of the records whose split is in `splits`, in record order.
    std::vector<Eigen::Index> rows_in(std::initializer_list<Split> splits) const;
    /// Row index of record `id`, or -1.
    Eigen::Index find_record(const std::string& id) const;
};

// ITMB: "ITMB" magic, u32 LE count, u32 LE dim, u32 reserved (0), then count*dim f32 LE row-major.
inline constexpr std::size_t kItmbHeaderBytes = 16;

void write_itmb(const std::filesystem::path& path, const RowMatrixXd& data);
RowMatrixXd read_itmb(const std::filesystem::path& path);

/// Checks every bundle invariant; throws the matching Error on the first violation.
void validate(const Bundle& bundle);

Bundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const Bundle& bundle, const std::filesystem::path& dir);

namespace files {
inline constexpr const char* images = "images.jsonl";
inline constexpr const char* embeddings = "embeddings.bin";
inline constexpr const char* vocab = "vocab.jsonl";
inline constexpr const char* vocab_embeddings = "vocab_embeddings.bin";
inline constexpr const char* reduced = "reduced.bin";
inline constexpr const char* phrases = "phrases.bin";
inline constexpr const char* phrase_keys = "phrases.jsonl";
}  // namespace files

}  // namespace itm
