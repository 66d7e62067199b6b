#include "itm/bundle.hpp"

#include "itm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace itm {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::MagicMismatch: return "MagicMismatch";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::UnknownTag: return "UnknownTag";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::EmptyBundle: return "EmptyBundle";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::ZeroNormEmbedding: return "ZeroNormEmbedding";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::MissingPrecomputed: return "MissingPrecomputed";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::SingleCluster: return "SingleCluster";
        case ErrorCode::EmptyTopic: return "EmptyTopic";
        case ErrorCode::TooFewDocuments: return "TooFewDocuments";
        case ErrorCode::WordNotInVocabulary: return "WordNotInVocabulary";
        case ErrorCode::EmptyCandidatePool: return "EmptyCandidatePool";
        case ErrorCode::UnlabeledRow: return "UnlabeledRow";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyTestSet: return "EmptyTestSet";
        case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    }
    return "Unknown";
}

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    fail(ErrorCode::MalformedRecord, "unknown split '" + std::string(text) + "'");
}

Eigen::Index Vocabulary::find(const std::string& word) const {
    if (index_.size() != words.size()) {
        // Vocabulary built field-by-field without reindex(); fall back to a scan.
        const auto it = std::find(words.begin(), words.end(), word);
        return it == words.end() ? -1 : static_cast<Eigen::Index>(it - words.begin());
    }
    const auto it = index_.find(word);
    return it == index_.end() ? -1 : it->second;
}

Vector<double> Vocabulary::embedding(const std::string& word) const {
    const Eigen::Index row = find(word);
    if (row < 0) fail(ErrorCode::WordNotInVocabulary, "word '" + word + "' is not in the vocabulary");
    return embeddings.data.row(row).transpose();
}

void Vocabulary::reindex() {
    index_.clear();
    index_.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) index_.emplace(words[i], static_cast<Eigen::Index>(i));
}

std::optional<Vector<double>> PhraseTable::find(const std::string& text) const {
    const auto& ids = embeddings.row_ids;
    const auto it = std::find(ids.begin(), ids.end(), text);
    if (it == ids.end()) return std::nullopt;
    return Vector<double>(embeddings.data.row(it - ids.begin()).transpose());
}

std::vector<Eigen::Index> Bundle::rows_in(std::initializer_list<Split> splits) const {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (std::find(splits.begin(), splits.end(), records[i].split) != splits.end())
            rows.push_back(static_cast<Eigen::Index>(i));
    }
    return rows;
}

Eigen::Index Bundle::find_record(const std::string& id) const {
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].id == id) return static_cast<Eigen::Index>(i);
    return -1;
}

// ---------------------------------------------------------------------------
// ITMB binary format

namespace {

constexpr char kMagic[4] = {'I', 'T', 'M', 'B'};

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void put_u32(std::string& out, std::uint32_t v) {
    v = to_le(v);
    char bytes[4];
    std::memcpy(bytes, &v, 4);
    out.append(bytes, 4);
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return to_le(v);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

void write_itmb(const fs::path& path, const RowMatrixXd& data) {
    std::string out;
    out.reserve(kItmbHeaderBytes + static_cast<std::size_t>(data.size()) * 4);
    out.append(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(data.rows()));
    put_u32(out, static_cast<std::uint32_t>(data.cols()));
    put_u32(out, 0);  // reserved, pads the header to 16 bytes
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const float f = static_cast<float>(data.data()[i]);
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    write_file(path, out);
}

RowMatrixXd read_itmb(const fs::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < kItmbHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0)
        fail(ErrorCode::MagicMismatch, path.filename().string() + ": missing ITMB magic");
    const std::uint64_t count = get_u32(bytes.data() + 4);
    const std::uint64_t dim = get_u32(bytes.data() + 8);
    if (dim == 0) fail(ErrorCode::DimMismatch, path.filename().string() + ": dim must be positive");
    const std::uint64_t expected = kItmbHeaderBytes + count * dim * 4;
    if (bytes.size() != expected) {
        fail(ErrorCode::DimMismatch, path.filename().string() + ": header declares " + std::to_string(count) + "x" +
                                         std::to_string(dim) + " but payload holds " +
                                         std::to_string(bytes.size()) + " bytes");
    }
    RowMatrixXd data(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    const char* p = bytes.data() + kItmbHeaderBytes;
    for (Eigen::Index i = 0; i < data.size(); ++i, p += 4)
        data.data()[i] = static_cast<double>(std::bit_cast<float>(get_u32(p)));
    return data;
}

// ---------------------------------------------------------------------------
// JSONL metadata

namespace {

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            fail(ErrorCode::MalformedRecord,
                 path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

ImageRecord parse_record(const json& j, std::size_t lineno) {
    const auto where = "images.jsonl:" + std::to_string(lineno) + ": ";
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("split") ||
        !j["split"].is_string())
        fail(ErrorCode::MalformedRecord, where + "record needs string fields id and split");
    ImageRecord rec;
    rec.id = j["id"].get<std::string>();
    rec.split = parse_split(j["split"].get<std::string>());
    if (j.contains("label") && !j["label"].is_null()) {
        const auto& l = j["label"];
        if (l.is_number_integer() && (l.get<int>() == 0 || l.get<int>() == 1))
            rec.label = static_cast<Label>(l.get<int>());
        else if (l == "public")
            rec.label = Label::Public;
        else if (l == "private")
            rec.label = Label::Private;
        else
            fail(ErrorCode::MalformedRecord, where + "label must be 0, 1, \"public\" or \"private\"");
    }
    if (j.contains("tags")) {
        if (!j["tags"].is_array()) fail(ErrorCode::MalformedRecord, where + "tags must be an array");
        for (const auto& t : j["tags"]) {
            if (!t.is_string()) fail(ErrorCode::MalformedRecord, where + "tags must be strings");
            rec.tags.push_back(t.get<std::string>());
        }
    }
    return rec;
}

EmbeddingMatrix load_embeddings(const fs::path& path, std::vector<std::string> ids, const char* what) {
    RowMatrixXd data = read_itmb(path);
    if (data.rows() != static_cast<Eigen::Index>(ids.size())) {
        fail(ErrorCode::DimMismatch, std::string(what) + " holds " + std::to_string(data.rows()) +
                                         " rows but metadata lists " + std::to_string(ids.size()));
    }
    return EmbeddingMatrix{std::move(data), std::move(ids)};
}

void check_rows(const EmbeddingMatrix& m, const char* what) {
    for (Eigen::Index i = 0; i < m.count(); ++i) {
        const auto row = m.data.row(i);
        if (!row.allFinite())
            fail(ErrorCode::NonFiniteValue, std::string(what) + " row " + std::to_string(i) + " is not finite");
        if (row.squaredNorm() == 0.0)
            fail(ErrorCode::ZeroNormEmbedding, std::string(what) + " row " + std::to_string(i) + " has zero norm");
    }
}

bool is_lowercase(const std::string& s) {
    return std::none_of(s.begin(), s.end(), [](unsigned char c) { return std::isupper(c); });
}

}  // namespace

void validate(const Bundle& b) {
    if (b.records.empty()) fail(ErrorCode::EmptyBundle, "bundle has no image records");
    if (b.image_embeddings.count() != static_cast<Eigen::Index>(b.records.size())) {
        fail(ErrorCode::DimMismatch, "embeddings.bin holds " + std::to_string(b.image_embeddings.count()) +
                                         " rows but images.jsonl has " + std::to_string(b.records.size()));
    }
    std::set<std::string> ids;
    for (const auto& r : b.records) {
        if (!ids.insert(r.id).second) fail(ErrorCode::DuplicateId, "duplicate image id '" + r.id + "'");
        if (r.tags.empty() && r.split != Split::test)
            fail(ErrorCode::MalformedRecord, "record '" + r.id + "' has no tags");
    }
    check_rows(b.image_embeddings, "embeddings.bin");

    const auto& v = b.vocabulary;
    if (v.embeddings.count() != static_cast<Eigen::Index>(v.words.size())) {
        fail(ErrorCode::DimMismatch, "vocab_embeddings.bin holds " + std::to_string(v.embeddings.count()) +
                                         " rows but vocab.jsonl has " + std::to_string(v.words.size()));
    }
    if (v.embeddings.count() > 0 && v.embeddings.dim() != b.dim())
        fail(ErrorCode::DimMismatch, "vocabulary embeddings do not share the image embedding dimension");
    std::set<std::string> words;
    for (const auto& w : v.words)
        if (!words.insert(w).second) fail(ErrorCode::DuplicateId, "duplicate vocabulary word '" + w + "'");
    check_rows(v.embeddings, "vocab_embeddings.bin");

    for (const auto& r : b.records) {
        for (const auto& t : r.tags) {
            if (!is_lowercase(t)) fail(ErrorCode::MalformedRecord, "tag '" + t + "' is not lowercase");
            if (!words.count(t))
                fail(ErrorCode::UnknownTag, "tag '" + t + "' of record '" + r.id + "' is not in the vocabulary");
        }
    }

    if (b.reduced) {
        if (b.reduced->count() != b.image_embeddings.count())
            fail(ErrorCode::DimMismatch, "reduced.bin row count differs from embeddings.bin");
        if (!b.reduced->data.allFinite()) fail(ErrorCode::NonFiniteValue, "reduced.bin has non-finite values");
    }
    if (b.phrases) {
        const auto& p = b.phrases->embeddings;
        if (p.count() > 0 && p.dim() != b.dim())
            fail(ErrorCode::DimMismatch, "phrase embeddings do not share the image embedding dimension");
        check_rows(p, "phrases.bin");
    }
}

Bundle load_bundle(const fs::path& dir) {
    for (const char* name : {files::images, files::embeddings, files::vocab, files::vocab_embeddings}) {
        if (!fs::exists(dir / name)) fail(ErrorCode::MissingFile, "bundle is missing " + std::string(name));
    }

    Bundle b;
    const auto rows = read_jsonl(dir / files::images);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        b.records.push_back(parse_record(rows[i], i + 1));
        ids.push_back(b.records.back().id);
    }
    if (b.records.empty()) fail(ErrorCode::EmptyBundle, "images.jsonl has no records");
    b.image_embeddings = load_embeddings(dir / files::embeddings, ids, files::embeddings);

    for (const auto& j : read_jsonl(dir / files::vocab)) {
        if (!j.is_object() || !j.contains("word") || !j["word"].is_string())
            fail(ErrorCode::MalformedRecord, "vocab.jsonl rows need a string field word");
        b.vocabulary.words.push_back(j["word"].get<std::string>());
    }
    b.vocabulary.embeddings = load_embeddings(dir / files::vocab_embeddings, b.vocabulary.words, files::vocab_embeddings);
    b.vocabulary.reindex();

    if (fs::exists(dir / files::reduced)) b.reduced = load_embeddings(dir / files::reduced, ids, files::reduced);

    if (fs::exists(dir / files::phrases)) {
        std::vector<std::string> texts;
        if (fs::exists(dir / files::phrase_keys)) {
            for (const auto& j : read_jsonl(dir / files::phrase_keys)) {
                if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
                    fail(ErrorCode::MalformedRecord, "phrases.jsonl rows need a string field text");
                texts.push_back(j["text"].get<std::string>());
            }
        }
        b.phrases = PhraseTable{load_embeddings(dir / files::phrases, std::move(texts), files::phrases)};
    }

    validate(b);
    return b;
}

void save_bundle(const Bundle& b, const fs::path& dir) {
    validate(b);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

    std::string images;
    for (const auto& r : b.records) {
        ordered_json j;
        j["id"] = r.id;
        j["split"] = to_string(r.split);
        j["label"] = r.label ? ordered_json(static_cast<int>(*r.label)) : ordered_json(nullptr);
        j["tags"] = r.tags;
        images += j.dump() + "\n";
    }
    write_file(dir / files::images, images);
    write_itmb(dir / files::embeddings, b.image_embeddings.data);

    std::string vocab;
    for (const auto& w : b.vocabulary.words) vocab += ordered_json{{"word", w}}.dump() + "\n";
    write_file(dir / files::vocab, vocab);
    write_itmb(dir / files::vocab_embeddings, b.vocabulary.embeddings.data);

    if (b.reduced) write_itmb(dir / files::reduced, b.reduced->data);
    if (b.phrases) {
        std::string keys;
        for (const auto& t : b.phrases->embeddings.row_ids) keys += ordered_json{{"text", t}}.dump() + "\n";
        write_file(dir / files::phrase_keys, keys);
        write_itmb(dir / files::phrases, b.phrases->embeddings.data);
    }
}

}  // namespace itm
