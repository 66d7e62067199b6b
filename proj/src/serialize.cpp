#include "itm/serialize.hpp"

#include "itm/error.hpp"

#include <fstream>
#include <sstream>

namespace itm {

namespace {

Json vector_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vector<double> vector_from(const Json& j) {
    Vector<double> v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

}  // namespace

Json to_json(const Cluster& c) {
    Json j;
    j["id"] = c.id;
    j["name"] = c.name;
    j["size"] = c.member_ids.size();
    j["privacy_score"] = optional_json(c.privacy_score);
    j["labeled_members"] = c.labeled_members;
    j["private_members"] = c.private_members;
    j["members"] = c.member_ids;
    j["centroid"] = vector_json(c.centroid);
    return j;
}

Cluster cluster_from_json(const Json& j) {
    Cluster c;
    c.id = j.at("id").get<int>();
    c.name = j.at("name").get<std::string>();
    c.privacy_score = optional_from(j, "privacy_score");
    c.labeled_members = j.at("labeled_members").get<int>();
    c.private_members = j.at("private_members").get<int>();
    c.member_ids = j.at("members").get<std::vector<std::string>>();
    c.centroid = vector_from(j.at("centroid"));
    return c;
}

Json to_json(const Topic& t) {
    Json j;
    j["id"] = t.id;
    j["representation"] = t.representation;
    Json scores = Json::object();
    for (const auto& [w, h] : t.word_scores) scores[w] = h;
    j["word_scores"] = scores;
    j["members"] = t.member_docs;
    return j;
}

Topic topic_from_json(const Json& j) {
    Topic t;
    t.id = j.at("id").get<int>();
    t.representation = j.at("representation").get<std::vector<std::string>>();
    for (const auto& [w, h] : j.at("word_scores").items()) t.word_scores[w] = h.get<double>();
    t.member_docs = j.at("members").get<std::vector<std::string>>();
    return t;
}

Json to_json(const Descriptor& d) {
    Json j;
    j["cluster_id"] = d.cluster_id;
    j["name"] = d.name;
    j["words"] = d.words;
    Json r = Json::object();
    for (const auto& w : d.words)
        if (auto it = d.word_alignments.find(w); it != d.word_alignments.end()) r[w] = it->second;
    j["r"] = r;
    j["P_j"] = optional_json(d.privacy_score);
    j["embedding_source"] = to_string(d.embedding_source);
    j["embedding"] = vector_json(d.embedding);
    return j;
}

Descriptor descriptor_from_json(const Json& j) {
    Descriptor d;
    d.cluster_id = j.at("cluster_id").get<int>();
    d.name = j.at("name").get<std::string>();
    d.words = j.at("words").get<std::vector<std::string>>();
    if (j.contains("r"))
        for (const auto& [w, r] : j["r"].items()) d.word_alignments[w] = r.get<double>();
    d.privacy_score = optional_from(j, "P_j");
    d.embedding_source = j.value("embedding_source", std::string("mean_of_words")) == "phrase"
                             ? EmbeddingSource::phrase
                             : EmbeddingSource::mean_of_words;
    d.embedding = vector_from(j.at("embedding"));
    return d;
}

Json to_json(const Metrics& m, const std::vector<std::string>& class_names) {
    Json j;
    Json per = Json::object();
    for (std::size_t c = 0; c < m.per_class.size(); ++c) {
        const auto& cm = m.per_class[c];
        Json e;
        e["precision"] = cm.precision;
        e["recall"] = cm.recall;
        e["f1"] = cm.f1;
        e["tp"] = cm.tp;
        e["fp"] = cm.fp;
        e["fn"] = cm.fn;
        if (cm.precision_undefined) e["precision_undefined"] = true;
        if (cm.recall_undefined) e["recall_undefined"] = true;
        per[c < class_names.size() ? class_names[c] : std::to_string(c)] = e;
    }
    j["per_class"] = per;
    j["u_ba"] = m.u_ba;
    j["u_f1"] = m.u_f1;
    j["total"] = m.total;
    j["correct"] = m.correct;
    j["confusion"] = m.confusion;
    j["warning"] = m.warning;
    return j;
}

Json to_json(const LinearModel& m) {
    Json j;
    j["schema_version"] = kModelSchemaVersion;
    j["class_names"] = m.class_names;
    Json w = Json::array();
    for (Eigen::Index c = 0; c < m.weights.rows(); ++c) w.push_back(vector_json(m.weights.row(c).transpose()));
    j["weights"] = w;
    Json d = Json::array();
    for (const auto& desc : m.descriptors) d.push_back(to_json(desc));
    j["descriptors"] = d;
    Json meta;
    meta["epochs"] = m.meta.epochs;
    meta["lr"] = m.meta.learning_rate;
    meta["batch"] = m.meta.batch_size;
    meta["seed"] = m.meta.seed;
    meta["final_train_loss"] = m.meta.final_train_loss;
    meta["final_val_loss"] = optional_json(m.meta.final_val_loss);
    j["train_meta"] = meta;
    return j;
}

LinearModel model_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("schema_version") || j["schema_version"] != kModelSchemaVersion)
        fail(ErrorCode::SchemaVersionMismatch, "model schema_version must be " + std::to_string(kModelSchemaVersion));
    try {
        LinearModel m;
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        const auto& w = j.at("weights");
        const auto rows = static_cast<Eigen::Index>(w.size());
        const auto cols = rows > 0 ? static_cast<Eigen::Index>(w[0].size()) : 0;
        m.weights.resize(rows, cols);
        for (Eigen::Index c = 0; c < rows; ++c) {
            if (static_cast<Eigen::Index>(w[c].size()) != cols)
                fail(ErrorCode::SchemaVersionMismatch, "ragged weight matrix");
            for (Eigen::Index k = 0; k < cols; ++k) m.weights(c, k) = w[c][k].get<double>();
        }
        for (const auto& d : j.at("descriptors")) m.descriptors.push_back(descriptor_from_json(d));
        if (!m.descriptors.empty() && static_cast<Eigen::Index>(m.descriptors.size()) != cols)
            fail(ErrorCode::SchemaVersionMismatch, "descriptor count differs from weight columns");
        const auto& meta = j.at("train_meta");
        m.meta.epochs = meta.at("epochs").get<int>();
        m.meta.learning_rate = meta.at("lr").get<double>();
        m.meta.batch_size = meta.at("batch").get<int>();
        m.meta.seed = meta.at("seed").get<std::uint64_t>();
        m.meta.final_train_loss = meta.at("final_train_loss").get<double>();
        m.meta.final_val_loss = optional_from(meta, "final_val_loss");
        if (!m.weights.allFinite()) fail(ErrorCode::SchemaVersionMismatch, "weights are not finite");
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaVersionMismatch, std::string("model file does not match the schema: ") + e.what());
    }
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::MalformedRecord, path.filename().string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string format_number(double v) { return Json(v).dump(); }

}  // namespace itm
