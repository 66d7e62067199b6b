#include "itm/pipeline.hpp"

#include "itm/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace itm {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

void apply_config_json(PipelineConfig& cfg, const Json& j) {
    try {
        if (j.contains("bundle")) cfg.bundle = j["bundle"].get<std::string>();
        if (j.contains("output")) cfg.output = j["output"].get<std::string>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("top_k")) cfg.top_k = j["top_k"].get<int>();
        if (j.contains("reducer")) {
            const auto& r = j["reducer"];
            if (r.contains("method")) cfg.reducer.method = parse_reduce_method(r["method"].get<std::string>());
            if (r.contains("target_dim")) cfg.reducer.target_dim = r["target_dim"].get<int>();
        }
        if (j.contains("cluster")) {
            const auto& c = j["cluster"];
            if (c.contains("min_cluster_size")) cfg.cluster.min_cluster_size = c["min_cluster_size"].get<int>();
            if (c.contains("min_samples")) cfg.cluster.min_samples = c["min_samples"].get<int>();
        }
        if (j.contains("topics")) {
            const auto& t = j["topics"];
            if (t.contains("min_topic_size")) cfg.topics.min_topic_size = t["min_topic_size"].get<int>();
            if (t.contains("scope")) cfg.topics.scope = parse_topic_scope(t["scope"].get<std::string>());
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
            if (t.contains("lr")) cfg.train.learning_rate = t["lr"].get<double>();
            if (t.contains("batch")) cfg.train.batch_size = t["batch"].get<int>();
        }
        if (j.contains("names"))
            for (const auto& [k, v] : j["names"].items()) cfg.names[std::stoi(k)] = v.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
    } catch (const std::invalid_argument&) {
        fail(ErrorCode::InvalidConfig, "config: names keys must be cluster ids");
    }
}

Json config_json(const PipelineConfig& cfg) {
    Json j;
    j["bundle"] = cfg.bundle.string();
    j["seed"] = cfg.seed;
    j["top_k"] = cfg.top_k;
    j["reducer"] = {{"method", to_string(cfg.reducer.method)}, {"target_dim", cfg.reducer.target_dim}};
    j["cluster"] = {{"min_cluster_size", cfg.cluster.min_cluster_size},
                    {"min_samples", cfg.cluster.effective_min_samples()},
                    {"metric", "euclidean"},
                    {"selection", "eom"}};
    j["topics"] = {{"min_topic_size", cfg.topics.min_topic_size},
                   {"scope", to_string(cfg.topics.scope)},
                   {"representation_size", cfg.topics.representation_size},
                   {"reduce_above", cfg.topics.reduce_above},
                   {"reduced_dim", cfg.topics.reduced_dim}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"lr", cfg.train.learning_rate},
                  {"batch", cfg.train.batch_size},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"epsilon", cfg.train.epsilon}};
    Json names = Json::object();
    for (const auto& [id, n] : cfg.names) names[std::to_string(id)] = n;
    j["names"] = names;
    return j;
}

// ---------------------------------------------------------------------------
// Stages

std::vector<Eigen::Index> clustering_rows(const Bundle& bundle, Warnings& warnings) {
    if (bundle.rows_in({Split::val}).empty())
        warnings.push_back("bundle has no val split; clustering uses the train split only");
    return bundle.rows_in({Split::train, Split::val});
}

namespace {

std::unordered_map<std::string, Eigen::Index> row_index(const Bundle& bundle) {
    std::unordered_map<std::string, Eigen::Index> m;
    for (std::size_t i = 0; i < bundle.records.size(); ++i) m.emplace(bundle.records[i].id, static_cast<Eigen::Index>(i));
    return m;
}

std::vector<Eigen::Index> rows_of(const std::unordered_map<std::string, Eigen::Index>& index,
                                  const std::vector<std::string>& ids) {
    std::vector<Eigen::Index> rows;
    for (const auto& id : ids) {
        const auto it = index.find(id);
        if (it == index.end()) fail(ErrorCode::MalformedRecord, "artifact refers to unknown image '" + id + "'");
        rows.push_back(it->second);
    }
    return rows;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json info_json(const TopicDiscoveryInfo& info) {
    return {{"reduced", info.reduced}, {"fallback", info.fallback}, {"outlier_documents", info.outlier_documents}};
}

TopicDiscoveryInfo info_from(const Json& j) {
    TopicDiscoveryInfo info;
    info.reduced = j.value("reduced", false);
    info.fallback = j.value("fallback", false);
    info.outlier_documents = j.value("outlier_documents", std::size_t{0});
    return info;
}

}  // namespace

ClusterStage cluster_stage(const Bundle& bundle, const EmbeddingMatrix& reduced, const ClusterConfig& cfg,
                           Warnings& warnings) {
    ClusterStage s;
    s.rows = clustering_rows(bundle, warnings);
    RowMatrixXd points(static_cast<Eigen::Index>(s.rows.size()), reduced.dim());
    for (std::size_t i = 0; i < s.rows.size(); ++i) points.row(static_cast<Eigen::Index>(i)) = reduced.data.row(s.rows[i]);

    s.assignment = hdbscan(points, cfg);
    s.clusters = make_clusters(s.assignment, bundle, s.rows);
    if (s.assignment.n_clusters == 0) warnings.push_back("clustering found no clusters; every image is an outlier");

    if (s.assignment.n_clusters >= 2) {
        s.silhouette = silhouette(points, s.assignment);
    } else {
        warnings.push_back("silhouette undefined with fewer than two clusters");
    }
    const auto sizes = s.assignment.sizes();
    if (s.assignment.n_clusters >= 1 && std::all_of(sizes.begin(), sizes.end(), [](std::size_t n) { return n >= 2; }))
        s.dbcv = dbcv(points, s.assignment);
    for (const auto& c : s.clusters)
        if (!c.privacy_score) warnings.push_back(c.name + " has no labeled members; privacy score is null");
    return s;
}

Json to_json(const ClusterStage& s, const Bundle& bundle, const ClusterConfig& cfg) {
    Json j;
    j["config"] = {{"min_cluster_size", cfg.min_cluster_size},
                   {"min_samples", cfg.effective_min_samples()},
                   {"metric", "euclidean"},
                   {"selection", "eom"}};
    j["n_points"] = s.rows.size();
    j["n_clusters"] = s.assignment.n_clusters;
    j["outliers"] = s.assignment.outliers();
    j["silhouette"] = optional_json(s.silhouette);
    j["dbcv"] = optional_json(s.dbcv);
    Json ids = Json::array();
    for (auto r : s.rows) ids.push_back(bundle.records[static_cast<std::size_t>(r)].id);
    j["point_ids"] = ids;
    j["labels"] = s.assignment.labels;
    Json clusters = Json::array();
    for (const auto& c : s.clusters) clusters.push_back(to_json(c));
    j["clusters"] = clusters;
    return j;
}

std::vector<Cluster> clusters_from_artifact(const Json& j) {
    try {
        std::vector<Cluster> out;
        for (const auto& c : j.at("clusters")) out.push_back(cluster_from_json(c));
        return out;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedRecord, std::string("clusters.json: ") + e.what());
    }
}

TopicStage topic_stage(const Bundle& bundle, const std::vector<Cluster>& clusters, std::span<const Eigen::Index> rows,
                       const TopicConfig& cfg, Warnings& warnings) {
    TopicStage s;
    s.scope = cfg.scope;
    if (cfg.scope == TopicScope::global) {
        const auto docs = make_documents(bundle, rows);
        s.global = discover_topics(docs, cfg, &s.global_info);
        return s;
    }
    const auto index = row_index(bundle);
    for (const auto& c : clusters) {
        ClusterTopics ct;
        ct.cluster_id = c.id;
        const auto member_rows = rows_of(index, c.member_ids);
        const auto docs = make_documents(bundle, member_rows);
        if (docs.size() < 2) {
            ct.skipped = "fewer than two tagged members";
            warnings.push_back(c.name + ": " + *ct.skipped + "; no topics");
        } else {
            TopicConfig local = cfg;
            local.min_topic_size = std::min(cfg.min_topic_size, static_cast<int>(docs.size()));
            ct.topics = discover_topics(docs, local, &ct.info);
        }
        s.per_cluster.push_back(std::move(ct));
    }
    return s;
}

Json to_json(const TopicStage& s, const TopicConfig& cfg) {
    Json j;
    j["scope"] = to_string(s.scope);
    j["config"] = {{"min_topic_size", cfg.min_topic_size},
                   {"representation_size", cfg.representation_size},
                   {"reduce_above", cfg.reduce_above},
                   {"reduced_dim", cfg.reduced_dim},
                   {"document_clustering", "hdbscan euclidean eom, min_cluster_size = min_topic_size"},
                   {"log", "natural"}};
    auto topics_json = [](const std::vector<Topic>& topics) {
        Json a = Json::array();
        for (const auto& t : topics) a.push_back(to_json(t));
        return a;
    };
    if (s.scope == TopicScope::global) {
        j["info"] = info_json(s.global_info);
        j["topics"] = topics_json(s.global);
    } else {
        Json a = Json::array();
        for (const auto& ct : s.per_cluster) {
            Json e;
            e["cluster_id"] = ct.cluster_id;
            e["info"] = info_json(ct.info);
            e["skipped"] = ct.skipped ? Json(*ct.skipped) : Json(nullptr);
            e["topics"] = topics_json(ct.topics);
            a.push_back(e);
        }
        j["clusters"] = a;
    }
    return j;
}

TopicStage topics_from_artifact(const Json& j) {
    try {
        TopicStage s;
        s.scope = parse_topic_scope(j.at("scope").get<std::string>());
        if (s.scope == TopicScope::global) {
            s.global_info = info_from(j.at("info"));
            for (const auto& t : j.at("topics")) s.global.push_back(topic_from_json(t));
        } else {
            for (const auto& e : j.at("clusters")) {
                ClusterTopics ct;
                ct.cluster_id = e.at("cluster_id").get<int>();
                ct.info = info_from(e.at("info"));
                if (!e.at("skipped").is_null()) ct.skipped = e["skipped"].get<std::string>();
                for (const auto& t : e.at("topics")) ct.topics.push_back(topic_from_json(t));
                s.per_cluster.push_back(std::move(ct));
            }
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedRecord, std::string("topics.json: ") + e.what());
    }
}

DescriptorStage descriptor_stage(const Bundle& bundle, const std::vector<Cluster>& clusters, const TopicStage& topics,
                                 const std::map<int, std::string>& names, Warnings& warnings) {
    DescriptorStage s;
    const PhraseTable* phrases = bundle.phrases ? &*bundle.phrases : nullptr;
    auto rename = [&](Descriptor& d) {
        if (auto it = names.find(d.cluster_id); it != names.end()) d.name = it->second;
    };

    if (topics.scope == TopicScope::global) {
        const auto index = row_index(bundle);
        for (const auto& t : topics.global) {
            int labeled = 0, priv = 0;
            for (auto r : rows_of(index, t.member_docs)) {
                const auto& rec = bundle.records[static_cast<std::size_t>(r)];
                if (!rec.label) continue;
                ++labeled;
                priv += *rec.label == Label::Private;
            }
            std::optional<double> p;
            if (labeled > 0) p = privacy_score(priv, labeled);
            try {
                Descriptor d = topic_descriptor(t, bundle.vocabulary, p, phrases);
                rename(d);
                s.descriptors.push_back(std::move(d));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptyCandidatePool) throw;
                s.skipped.emplace_back(t.id, e.what());
                warnings.push_back(e.what());
            }
        }
        return s;
    }

    for (const auto& ct : topics.per_cluster) {
        const auto it = std::find_if(clusters.begin(), clusters.end(), [&](const Cluster& c) { return c.id == ct.cluster_id; });
        if (it == clusters.end()) fail(ErrorCode::MalformedRecord, "topics refer to unknown cluster " + std::to_string(ct.cluster_id));
        try {
            Descriptor d = build_descriptor(*it, ct.topics, bundle.vocabulary, phrases);
            rename(d);
            s.descriptors.push_back(std::move(d));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyCandidatePool) throw;
            s.skipped.emplace_back(ct.cluster_id, e.what());
            warnings.push_back(std::string(e.what()) + "; cluster contributes no descriptor");
        }
    }
    return s;
}

Json to_json(const DescriptorStage& s, TopicScope scope) {
    Json j;
    j["scope"] = to_string(scope);
    Json a = Json::array();
    for (const auto& d : s.descriptors) a.push_back(to_json(d));
    j["descriptors"] = a;
    Json skipped = Json::array();
    for (const auto& [id, why] : s.skipped) skipped.push_back({{"cluster_id", id}, {"reason", why}});
    j["skipped"] = skipped;
    return j;
}

std::vector<Descriptor> descriptors_from_artifact(const Json& j) {
    try {
        std::vector<Descriptor> out;
        for (const auto& d : j.at("descriptors")) out.push_back(descriptor_from_json(d));
        return out;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedRecord, std::string("descriptors.json: ") + e.what());
    }
}

LinearModel train_stage(const Bundle& bundle, std::vector<Descriptor> descriptors, const TrainConfig& cfg) {
    if (descriptors.empty()) fail(ErrorCode::EmptyCandidatePool, "no descriptors to train on");
    const auto train_rows = bundle.rows_in({Split::train});
    const auto s_train = association_matrix(bundle, descriptors, train_rows);
    const auto y_train = labels_of(bundle, train_rows);

    std::vector<Eigen::Index> val_rows;
    for (auto r : bundle.rows_in({Split::val}))
        if (bundle.records[static_cast<std::size_t>(r)].label) val_rows.push_back(r);
    std::optional<AssociationMatrix> s_val;
    std::vector<int> y_val;
    if (!val_rows.empty()) {
        s_val = association_matrix(bundle, descriptors, val_rows);
        y_val = labels_of(bundle, val_rows);
    }
    return train(s_train, y_train, cfg, std::move(descriptors), s_val ? &*s_val : nullptr, y_val);
}

namespace {

std::vector<Eigen::Index> labeled_test_rows(const Bundle& bundle) {
    std::vector<Eigen::Index> rows;
    for (auto r : bundle.rows_in({Split::test}))
        if (bundle.records[static_cast<std::size_t>(r)].label) rows.push_back(r);
    return rows;
}

}  // namespace

Metrics eval_stage(const Bundle& bundle, const LinearModel& model) {
    const auto rows = labeled_test_rows(bundle);
    if (rows.empty()) fail(ErrorCode::EmptyTestSet, "bundle has no labeled test rows");
    const auto s = association_matrix(bundle, model.descriptors, rows);
    return evaluate(model, s, labels_of(bundle, rows));
}

Explanations explain_stage(const Bundle& bundle, const LinearModel& model, int top_k, std::span<const Eigen::Index> rows) {
    Explanations e;
    e.global = global_explanation(model);
    if (rows.empty()) return e;
    const auto s = association_matrix(bundle, model.descriptors, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& rec = bundle.records[static_cast<std::size_t>(rows[i])];
        std::optional<int> truth;
        if (rec.label) truth = static_cast<int>(*rec.label);
        e.local.push_back(local_explanation(model, s.scores.row(static_cast<Eigen::Index>(i)).transpose(), top_k, rec.id, truth));
    }
    return e;
}

Json to_json(const Explanations& e, const LinearModel& model) {
    Json j;
    Json edges = Json::array();
    for (const auto& g : e.global.edges)
        edges.push_back({{"descriptor", g.descriptor}, {"class", g.class_name}, {"weight", g.weight}, {"P_j", optional_json(g.privacy_score)}});
    j["global"] = {{"edges", edges}};
    Json local = Json::array();
    auto contrib = [&](const Contribution& k) {
        return Json{{"descriptor", k.name},
                    {"class", model.class_names[static_cast<std::size_t>(k.class_index)]},
                    {"score", k.score},
                    {"weight", k.weight},
                    {"contribution", k.value},
                    {"P_j", optional_json(k.privacy_score)}};
    };
    for (const auto& l : e.local) {
        Json x;
        x["image_id"] = l.image_id;
        x["predicted"] = model.class_names[static_cast<std::size_t>(l.predicted)];
        x["truth"] = l.truth ? Json(model.class_names[static_cast<std::size_t>(*l.truth)]) : Json(nullptr);
        Json logits = Json::array();
        for (Eigen::Index c = 0; c < l.logits.size(); ++c) logits.push_back(l.logits[c]);
        x["logits"] = logits;
        Json pos = Json::array(), neg = Json::array();
        for (const auto& k : l.top_positive) pos.push_back(contrib(k));
        for (const auto& k : l.top_negative) neg.push_back(contrib(k));
        x["top_positive"] = pos;
        x["top_negative"] = neg;
        local.push_back(x);
    }
    j["local"] = local;
    return j;
}

// ---------------------------------------------------------------------------
// Full pipeline

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string checksum_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
    return buf;
}

const std::vector<std::string>& pipeline_artifacts() {
    static const std::vector<std::string> names{"reduced.bin",  "clusters.json", "topics.json",      "descriptors.json",
                                                "model.json",   "metrics.json",  "explanations.json"};
    return names;
}

namespace {

template <typename F>
auto run_stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    }
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    const Bundle bundle = run_stage("load", [&] { return load_bundle(cfg.bundle); });
    return run_pipeline(cfg, bundle);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const Bundle& bundle) {
    PipelineResult r;
    const bool write = !cfg.output.empty();
    if (write) {
        std::error_code ec;
        fs::create_directories(cfg.output, ec);
        if (ec) throw StageError("setup", Error(ErrorCode::IoError, "cannot create " + cfg.output.string()));
    }
    Json stages = Json::array();
    auto record = [&](const char* stage, const std::string& file) {
        stages.push_back({{"stage", stage}, {"artifact", file}, {"fnv1a64", checksum_file(cfg.output / file)}});
    };

    run_stage("reduce", [&] {
        r.reduced = fit_reduce(bundle, cfg.reducer, cfg.seed);
        // Continue from exactly what reduced.bin holds so stage-by-stage runs agree.
        r.reduced.data = r.reduced.data.cast<float>().cast<double>();
        if (write) {
            write_itmb(cfg.output / "reduced.bin", r.reduced.data);
            record("reduce", "reduced.bin");
        }
    });
    run_stage("cluster", [&] {
        r.clusters = cluster_stage(bundle, r.reduced, cfg.cluster, r.warnings);
        if (write) {
            write_json(cfg.output / "clusters.json", to_json(r.clusters, bundle, cfg.cluster));
            record("cluster", "clusters.json");
        }
    });
    run_stage("topics", [&] {
        r.topics = topic_stage(bundle, r.clusters.clusters, r.clusters.rows, cfg.topics, r.warnings);
        if (write) {
            write_json(cfg.output / "topics.json", to_json(r.topics, cfg.topics));
            record("topics", "topics.json");
        }
    });
    run_stage("descriptors", [&] {
        r.descriptors = descriptor_stage(bundle, r.clusters.clusters, r.topics, cfg.names, r.warnings);
        if (write) {
            write_json(cfg.output / "descriptors.json", to_json(r.descriptors, cfg.topics.scope));
            record("descriptors", "descriptors.json");
        }
    });
    run_stage("train", [&] {
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seed;
        r.model = train_stage(bundle, r.descriptors.descriptors, tc);
        if (write) {
            save_model(r.model, cfg.output / "model.json");
            record("train", "model.json");
        }
    });
    run_stage("eval", [&] {
        r.metrics = eval_stage(bundle, r.model);
        if (r.metrics.warning) r.warnings.push_back("a class has undefined precision or recall; reported as 0");
        if (write) {
            write_json(cfg.output / "metrics.json", to_json(r.metrics, r.model.class_names));
            record("eval", "metrics.json");
        }
    });
    run_stage("explain", [&] {
        const auto rows = labeled_test_rows(bundle);
        r.explanations = explain_stage(bundle, r.model, cfg.top_k, rows);
        if (write) {
            write_json(cfg.output / "explanations.json", to_json(r.explanations, r.model));
            record("explain", "explanations.json");
        }
    });

    r.manifest["tool"] = "itm";
    r.manifest["config"] = config_json(cfg);
    r.manifest["seed"] = cfg.seed;
    r.manifest["stages"] = stages;
    r.manifest["warnings"] = r.warnings;
    if (write) write_json(cfg.output / "manifest.json", r.manifest);
    return r;
}

// ---------------------------------------------------------------------------
// Ablation

std::string_view to_string(AblationMethod m) noexcept { return m == AblationMethod::tm ? "tm" : "itm"; }

AblationMethod parse_ablation_method(std::string_view text) {
    if (text == "tm") return AblationMethod::tm;
    if (text == "itm") return AblationMethod::itm;
    fail(ErrorCode::InvalidConfig, "unknown method '" + std::string(text) + "' (expected tm or itm)");
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd r;
    if (values.empty()) return r;
    for (double v : values) r.mean += v;
    r.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size()));
    return r;
}

const AblationRow* AblationReport::find(AblationMethod m, int size) const {
    for (const auto& r : rows)
        if (r.method == m && r.size == size) return &r;
    return nullptr;
}

std::string AblationReport::csv() const {
    std::string out =
        "method,size,runs,descriptors,f1_public_mean,f1_public_std_pop,f1_private_mean,f1_private_std_pop,"
        "u_ba_mean,u_ba_std_pop,u_f1_mean,u_f1_std_pop\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.method)) + "," + std::to_string(r.size) + "," + std::to_string(r.runs) + "," +
               std::to_string(r.descriptors);
        for (const auto* m : {&r.f1_public, &r.f1_private, &r.u_ba, &r.u_f1})
            out += "," + format_number(m->mean) + "," + format_number(m->std);
        out += "\n";
    }
    return out;
}

std::string AblationReport::table() const {
    std::string out = "mean (population std) over seeds\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-5s %-6s %-5s %-16s %-16s %-16s %-16s\n", "size", "model", "desc", "F1-public",
                  "F1-private", "U-BA", "U-F1");
    out += buf;
    auto cell = [](const MeanStd& m) {
        char c[32];
        std::snprintf(c, sizeof c, "%.2f (%.2f)", m.mean, m.std);
        return std::string(c);
    };
    for (const auto& r : rows) {
        const std::string model = r.method == AblationMethod::tm ? "TM" : "ITM";
        std::snprintf(buf, sizeof buf, "%-5d %-6s %-5zu %-16s %-16s %-16s %-16s\n", r.size, model.c_str(),
                      r.descriptors, cell(r.f1_public).c_str(), cell(r.f1_private).c_str(), cell(r.u_ba).c_str(),
                      cell(r.u_f1).c_str());
        out += buf;
    }
    return out;
}

AblationReport run_ablation(const AblationConfig& cfg, const Bundle& bundle) {
    if (cfg.seeds.size() < 2) fail(ErrorCode::InvalidConfig, "ablation needs at least two seeds");
    if (cfg.sizes.empty() || cfg.methods.empty()) fail(ErrorCode::InvalidConfig, "ablation needs sizes and methods");

    Warnings warnings;
    const auto rows = clustering_rows(bundle, warnings);
    std::optional<EmbeddingMatrix> reduced;

    AblationReport report;
    for (int size : cfg.sizes) {
        for (auto method : cfg.methods) {
            DescriptorStage ds;
            if (method == AblationMethod::itm) {
                if (!reduced) {
                    reduced = run_stage("reduce", [&] { return fit_reduce(bundle, cfg.base.reducer, cfg.base.seed); });
                    reduced->data = reduced->data.cast<float>().cast<double>();
                }
                ClusterConfig cc = cfg.base.cluster;
                cc.min_cluster_size = size;
                const auto cs = run_stage("cluster", [&] { return cluster_stage(bundle, *reduced, cc, warnings); });
                const auto ts = run_stage("topics", [&] {
                    TopicConfig tc = cfg.base.topics;
                    tc.scope = TopicScope::per_cluster;
                    return topic_stage(bundle, cs.clusters, cs.rows, tc, warnings);
                });
                ds = run_stage("descriptors", [&] { return descriptor_stage(bundle, cs.clusters, ts, {}, warnings); });
            } else {
                const auto ts = run_stage("topics", [&] {
                    TopicConfig tc = cfg.base.topics;
                    tc.scope = TopicScope::global;
                    tc.min_topic_size = size;
                    return topic_stage(bundle, {}, rows, tc, warnings);
                });
                ds = run_stage("descriptors", [&] { return descriptor_stage(bundle, {}, ts, {}, warnings); });
            }

            std::vector<Metrics> runs(cfg.seeds.size());
            std::vector<std::exception_ptr> errors(cfg.seeds.size());
            unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
            threads = std::min<unsigned>(threads, static_cast<unsigned>(cfg.seeds.size()));
            auto work = [&](unsigned t) {
                for (std::size_t i = t; i < cfg.seeds.size(); i += threads) {
                    try {
                        TrainConfig tc = cfg.base.train;
                        tc.seed = cfg.seeds[i];
                        const auto model = run_stage("train", [&] { return train_stage(bundle, ds.descriptors, tc); });
                        runs[i] = run_stage("eval", [&] { return eval_stage(bundle, model); });
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            };
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
            for (auto& th : pool) th.join();
            for (const auto& e : errors)
                if (e) std::rethrow_exception(e);

            AblationRow row;
            row.method = method;
            row.size = size;
            row.runs = runs.size();
            row.descriptors = ds.descriptors.size();
            std::vector<double> fpub, fpriv, ba, f1;
            for (const auto& m : runs) {
                fpub.push_back(m.per_class[static_cast<std::size_t>(Label::Public)].f1);
                fpriv.push_back(m.per_class[static_cast<std::size_t>(Label::Private)].f1);
                ba.push_back(m.u_ba);
                f1.push_back(m.u_f1);
            }
            row.f1_public = mean_std(fpub);
            row.f1_private = mean_std(fpriv);
            row.u_ba = mean_std(ba);
            row.u_f1 = mean_std(f1);
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace itm
