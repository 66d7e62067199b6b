#include "itm/error.hpp"
#include "itm/pipeline.hpp"
#include "itm/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>

namespace fs = std::filesystem;
using namespace itm;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

void report(const Error& e, const std::string& stage = {}) {
    Json j;
    j["error"] = std::string(to_string(e.code()));
    j["message"] = e.what();
    if (!stage.empty()) j["stage"] = stage;
    std::cerr << j.dump() << "\n";
}

void print_warnings(const Warnings& warnings) {
    for (const auto& w : warnings) std::cerr << Json{{"warning", w}}.dump() << "\n";
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    }
}

std::map<int, std::string> read_names(const std::string& path) {
    std::map<int, std::string> names;
    if (path.empty()) return names;
    const Json j = read_json(path);
    if (!j.is_object()) fail(ErrorCode::InvalidConfig, path + ": expected an object of cluster id -> name");
    for (const auto& [k, v] : j.items()) {
        try {
            names[std::stoi(k)] = v.get<std::string>();
        } catch (const std::exception&) {
            fail(ErrorCode::InvalidConfig, path + ": bad entry '" + k + "'");
        }
    }
    return names;
}

struct Paths {
    std::string dir;
    std::string out;

    fs::path artifacts() const { return out.empty() ? fs::path(dir) : fs::path(out); }
    void ensure() const {
        std::error_code ec;
        fs::create_directories(artifacts(), ec);
        if (ec) fail(ErrorCode::IoError, "cannot create " + artifacts().string());
    }
};

void add_paths(CLI::App* cmd, Paths& p) {
    cmd->add_option("dir", p.dir, "Bundle directory")->required();
    cmd->add_option("--out", p.out, "Artifact directory (default: the bundle directory)");
}

Bundle load(const Paths& p) {
    Bundle b = load_bundle(p.dir);
    const auto reduced = p.artifacts() / files::reduced;
    if (!p.out.empty() && fs::exists(reduced)) {
        EmbeddingMatrix r;
        r.data = read_itmb(reduced);
        if (r.count() != b.image_embeddings.count())
            fail(ErrorCode::DimMismatch, "reduced.bin row count differs from the bundle");
        b.reduced = std::move(r);
    }
    return b;
}

fs::path model_path(const Paths& p, const std::string& model) {
    return model.empty() ? p.artifacts() / "model.json" : fs::path(model);
}

std::vector<Eigen::Index> labeled_test_rows(const Bundle& b) {
    std::vector<Eigen::Index> rows;
    for (auto r : b.rows_in({Split::test}))
        if (b.records[static_cast<std::size_t>(r)].label) rows.push_back(r);
    return rows;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Image-guided topic modeling for interpretable privacy classification"};
    app.require_subcommand(1);
    std::function<void()> action;

    // validate
    std::string validate_dir;
    auto* validate_cmd = app.add_subcommand("validate", "Check a bundle directory");
    validate_cmd->add_option("dir", validate_dir)->required();
    validate_cmd->callback([&] {
        action = [&] {
            const Bundle b = load_bundle(validate_dir);
            Json j{{"ok", true},
                   {"images", b.records.size()},
                   {"dim", b.dim()},
                   {"vocabulary", b.vocabulary.words.size()},
                   {"train", b.rows_in({Split::train}).size()},
                   {"val", b.rows_in({Split::val}).size()},
                   {"test", b.rows_in({Split::test}).size()},
                   {"reduced", b.reduced.has_value()},
                   {"phrases", b.phrases.has_value()}};
            std::cout << j.dump() << "\n";
        };
    });

    // synth
    SynthSpec spec;
    std::string synth_out;
    std::uint64_t synth_seed = 0;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic bundle with planted groups");
    synth_cmd->add_option("out", synth_out)->required();
    synth_cmd->add_option("--groups", spec.groups)->capture_default_str();
    synth_cmd->add_option("--per-group", spec.per_group)->capture_default_str();
    synth_cmd->add_option("--dim", spec.dim)->capture_default_str();
    synth_cmd->add_option("--vocab-per-group", spec.vocab_per_group)->capture_default_str();
    synth_cmd->add_option("--tags", spec.tags_per_image)->capture_default_str();
    synth_cmd->add_option("--sigma", spec.sigma)->capture_default_str();
    synth_cmd->add_option("--word-sigma", spec.word_sigma);
    synth_cmd->add_option("--noise", spec.noise)->capture_default_str();
    synth_cmd->add_option("--tag-pool", spec.tag_pool, "Consecutive groups sharing one tag pool")->capture_default_str();
    synth_cmd->add_option("--private-bias", spec.private_bias, "Per-group P(private)")->delimiter(',');
    synth_cmd->add_option("--seed", synth_seed)->capture_default_str();
    synth_cmd->callback([&] {
        action = [&] {
            const Bundle b = synth_bundle(spec, synth_seed);
            save_bundle(b, synth_out);
            std::cout << Json{{"written", synth_out}, {"images", b.records.size()}}.dump() << "\n";
        };
    });

    // reduce
    Paths reduce_paths;
    std::string reduce_method = "pca";
    int reduce_dim = 5;
    std::uint64_t reduce_seed = 0;
    auto* reduce_cmd = app.add_subcommand("reduce", "Reduce image embeddings; writes reduced.bin");
    add_paths(reduce_cmd, reduce_paths);
    reduce_cmd->add_option("--method", reduce_method)->check(CLI::IsMember({"pca", "precomputed"}));
    reduce_cmd->add_option("--dim", reduce_dim)->capture_default_str();
    reduce_cmd->add_option("--seed", reduce_seed);
    reduce_cmd->callback([&] {
        action = [&] {
            const Bundle b = load_bundle(reduce_paths.dir);
            reduce_paths.ensure();
            stage("reduce", [&] {
                ReducerConfig cfg{parse_reduce_method(reduce_method), reduce_dim};
                const auto r = fit_reduce(b, cfg, reduce_seed);
                write_itmb(reduce_paths.artifacts() / files::reduced, r.data);
            });
        };
    });

    // cluster
    Paths cluster_paths;
    ClusterConfig cluster_cfg;
    auto* cluster_cmd = app.add_subcommand("cluster", "Cluster reduced embeddings; writes clusters.json");
    add_paths(cluster_cmd, cluster_paths);
    cluster_cmd->add_option("--min-cluster-size", cluster_cfg.min_cluster_size)->capture_default_str();
    cluster_cmd->add_option("--min-samples", cluster_cfg.min_samples, "Default: min cluster size");
    cluster_cmd->callback([&] {
        action = [&] {
            const Bundle b = load(cluster_paths);
            cluster_paths.ensure();
            stage("cluster", [&] {
                if (!b.reduced) fail(ErrorCode::MissingPrecomputed, "reduced.bin not found; run `itm reduce` first");
                Warnings w;
                const auto s = cluster_stage(b, *b.reduced, cluster_cfg, w);
                print_warnings(w);
                write_json(cluster_paths.artifacts() / "clusters.json", to_json(s, b, cluster_cfg));
            });
        };
    });

    // topics
    Paths topic_paths;
    TopicConfig topic_cfg;
    std::string topic_scope = "per_cluster";
    auto* topics_cmd = app.add_subcommand("topics", "Discover tag topics; writes topics.json");
    add_paths(topics_cmd, topic_paths);
    topics_cmd->add_option("--min-topic-size", topic_cfg.min_topic_size)->capture_default_str();
    topics_cmd->add_option("--scope", topic_scope)->check(CLI::IsMember({"per_cluster", "global"}));
    topics_cmd->callback([&] {
        action = [&] {
            const Bundle b = load(topic_paths);
            topic_paths.ensure();
            topic_cfg.scope = parse_topic_scope(topic_scope);
            stage("topics", [&] {
                Warnings w;
                std::vector<Cluster> clusters;
                if (topic_cfg.scope == TopicScope::per_cluster)
                    clusters = clusters_from_artifact(read_json(topic_paths.artifacts() / "clusters.json"));
                const auto rows = clustering_rows(b, w);
                const auto s = topic_stage(b, clusters, rows, topic_cfg, w);
                print_warnings(w);
                write_json(topic_paths.artifacts() / "topics.json", to_json(s, topic_cfg));
            });
        };
    });

    // descriptors
    Paths desc_paths;
    std::string desc_names;
    auto* desc_cmd = app.add_subcommand("descriptors", "Build content descriptors; writes descriptors.json");
    add_paths(desc_cmd, desc_paths);
    desc_cmd->add_option("--names", desc_names, "JSON object of cluster id -> display name");
    desc_cmd->callback([&] {
        action = [&] {
            const Bundle b = load(desc_paths);
            desc_paths.ensure();
            const auto names = read_names(desc_names);
            stage("descriptors", [&] {
                const auto topics = topics_from_artifact(read_json(desc_paths.artifacts() / "topics.json"));
                std::vector<Cluster> clusters;
                if (topics.scope == TopicScope::per_cluster)
                    clusters = clusters_from_artifact(read_json(desc_paths.artifacts() / "clusters.json"));
                Warnings w;
                const auto s = descriptor_stage(b, clusters, topics, names, w);
                print_warnings(w);
                write_json(desc_paths.artifacts() / "descriptors.json", to_json(s, topics.scope));
            });
        };
    });

    // train
    Paths train_paths;
    TrainConfig train_cfg;
    std::string train_model;
    auto* train_cmd = app.add_subcommand("train", "Train the descriptor classifier; writes model.json");
    add_paths(train_cmd, train_paths);
    train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
    train_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
    train_cmd->add_option("--batch", train_cfg.batch_size)->capture_default_str();
    train_cmd->add_option("--seed", train_cfg.seed);
    train_cmd->add_option("--model", train_model, "Output model path (default: <out>/model.json)");
    train_cmd->callback([&] {
        action = [&] {
            const Bundle b = load(train_paths);
            train_paths.ensure();
            stage("train", [&] {
                auto d = descriptors_from_artifact(read_json(train_paths.artifacts() / "descriptors.json"));
                const auto model = train_stage(b, std::move(d), train_cfg);
                save_model(model, model_path(train_paths, train_model));
            });
        };
    });

    // eval
    Paths eval_paths;
    std::string eval_model;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate on the test split; writes metrics.json");
    add_paths(eval_cmd, eval_paths);
    eval_cmd->add_option("--model", eval_model);
    eval_cmd->callback([&] {
        action = [&] {
            const Bundle b = load(eval_paths);
            eval_paths.ensure();
            stage("eval", [&] {
                const auto model = load_model(model_path(eval_paths, eval_model));
                const auto m = eval_stage(b, model);
                if (m.warning) print_warnings({"a class has undefined precision or recall; reported as 0"});
                const auto j = to_json(m, model.class_names);
                write_json(eval_paths.artifacts() / "metrics.json", j);
                std::cout << j.dump() << "\n";
            });
        };
    });

    // explain
    Paths explain_paths;
    std::string explain_model, explain_names;
    std::vector<std::string> explain_images;
    int explain_top_k = 5;
    bool explain_global = false;
    auto* explain_cmd = app.add_subcommand("explain", "Global and per-image explanations");
    add_paths(explain_cmd, explain_paths);
    explain_cmd->add_option("--model", explain_model);
    explain_cmd->add_option("--image", explain_images, "Image id (repeatable); default: every labeled test image");
    explain_cmd->add_option("--top-k", explain_top_k)->capture_default_str()->check(CLI::PositiveNumber);
    explain_cmd->add_flag("--global", explain_global, "Write sankey.csv and global.json");
    explain_cmd->add_option("--names", explain_names, "JSON object of cluster id -> display name");
    explain_cmd->callback([&] {
        action = [&] {
            const Bundle b = load(explain_paths);
            explain_paths.ensure();
            const auto names = read_names(explain_names);
            stage("explain", [&] {
                auto model = load_model(model_path(explain_paths, explain_model));
                for (auto& d : model.descriptors)
                    if (auto it = names.find(d.cluster_id); it != names.end()) d.name = it->second;
                const auto out = explain_paths.artifacts();
                if (explain_global) {
                    const auto g = global_explanation(model);
                    write_text(out / "sankey.csv", g.sankey_csv());
                    Explanations e{g, {}};
                    write_json(out / "global.json", to_json(e, model)["global"]);
                    if (explain_images.empty()) return;
                }
                std::vector<Eigen::Index> rows;
                if (explain_images.empty()) {
                    rows = labeled_test_rows(b);
                } else {
                    for (const auto& id : explain_images) {
                        const auto row = b.find_record(id);
                        if (row < 0) fail(ErrorCode::MalformedRecord, "unknown image id '" + id + "'");
                        rows.push_back(row);
                    }
                }
                const auto e = explain_stage(b, model, explain_top_k, rows);
                render_report(e.local, model, out / "report.json");
                std::FILE* txt = std::fopen((out / "report.txt").c_str(), "rb");
                if (txt) {
                    char buf[4096];
                    std::size_t n;
                    while ((n = std::fread(buf, 1, sizeof buf, txt)) > 0) std::fwrite(buf, 1, n, stdout);
                    std::fclose(txt);
                }
            });
        };
    });

    // run
    PipelineConfig run_cfg;
    std::string run_config, run_bundle, run_out, run_method, run_scope;
    std::uint64_t run_seed = 0;
    int run_dim = 0, run_cmin = 0, run_tmin = 0, run_epochs = 0, run_batch = 0, run_top_k = 0;
    double run_lr = 0.0;
    auto* run_cmd = app.add_subcommand("run", "Run every stage; writes all artifacts and manifest.json");
    run_cmd->add_option("dir", run_bundle, "Bundle directory (overrides the config)");
    run_cmd->add_option("--config", run_config, "Pipeline config JSON");
    run_cmd->add_option("--out", run_out);
    run_cmd->add_option("--seed", run_seed);
    run_cmd->add_option("--method", run_method)->check(CLI::IsMember({"pca", "precomputed"}));
    run_cmd->add_option("--dim", run_dim);
    run_cmd->add_option("--min-cluster-size", run_cmin);
    run_cmd->add_option("--min-topic-size", run_tmin);
    run_cmd->add_option("--scope", run_scope)->check(CLI::IsMember({"per_cluster", "global"}));
    run_cmd->add_option("--epochs", run_epochs);
    run_cmd->add_option("--lr", run_lr);
    run_cmd->add_option("--batch", run_batch);
    run_cmd->add_option("--top-k", run_top_k);
    run_cmd->callback([&] {
        action = [&] {
            if (!run_config.empty()) apply_config_json(run_cfg, read_json(run_config));
            auto given = [&](const char* name) { return run_cmd->count(name) > 0; };
            if (given("dir")) run_cfg.bundle = run_bundle;
            if (given("--out")) run_cfg.output = run_out;
            if (given("--seed")) run_cfg.seed = run_seed;
            if (given("--method")) run_cfg.reducer.method = parse_reduce_method(run_method);
            if (given("--dim")) run_cfg.reducer.target_dim = run_dim;
            if (given("--min-cluster-size")) run_cfg.cluster.min_cluster_size = run_cmin;
            if (given("--min-topic-size")) run_cfg.topics.min_topic_size = run_tmin;
            if (given("--scope")) run_cfg.topics.scope = parse_topic_scope(run_scope);
            if (given("--epochs")) run_cfg.train.epochs = run_epochs;
            if (given("--lr")) run_cfg.train.learning_rate = run_lr;
            if (given("--batch")) run_cfg.train.batch_size = run_batch;
            if (given("--top-k")) run_cfg.top_k = run_top_k;
            if (run_cfg.bundle.empty()) fail(ErrorCode::InvalidConfig, "no bundle given");
            if (run_cfg.output.empty()) run_cfg.output = run_cfg.bundle / "out";
            const Bundle b = load_bundle(run_cfg.bundle);
            const auto r = run_pipeline(run_cfg, b);
            print_warnings(r.warnings);
            std::cout << to_json(r.metrics, r.model.class_names).dump() << "\n";
        };
    });

    // ablate
    AblationConfig abl;
    std::string abl_dir, abl_out, abl_config;
    std::vector<std::string> abl_methods{"tm", "itm"};
    int abl_runs = 5;
    std::uint64_t abl_seed = 0;
    auto* ablate_cmd = app.add_subcommand("ablate", "TM vs ITM across minimum sizes and seeds");
    ablate_cmd->add_option("dir", abl_dir)->required();
    ablate_cmd->add_option("--config", abl_config, "Pipeline config JSON for the shared settings");
    ablate_cmd->add_option("--out", abl_out, "Directory for ablation.csv and ablation.txt");
    ablate_cmd->add_option("--methods", abl_methods)->delimiter(',')->check(CLI::IsMember({"tm", "itm"}));
    ablate_cmd->add_option("--sizes", abl.sizes)->delimiter(',')->capture_default_str();
    ablate_cmd->add_option("--runs", abl_runs, "Number of seeds")->capture_default_str()->check(CLI::Range(2, 100000));
    ablate_cmd->add_option("--seed", abl_seed, "First seed; runs use seed, seed+1, ...");
    ablate_cmd->add_option("--threads", abl.threads, "0: hardware concurrency");
    ablate_cmd->callback([&] {
        action = [&] {
            if (!abl_config.empty()) apply_config_json(abl.base, read_json(abl_config));
            abl.base.bundle = abl_dir;
            abl.base.seed = abl_seed;
            abl.methods.clear();
            for (const auto& m : abl_methods) abl.methods.push_back(parse_ablation_method(m));
            abl.seeds.resize(static_cast<std::size_t>(abl_runs));
            std::iota(abl.seeds.begin(), abl.seeds.end(), abl_seed);
            const Bundle b = load_bundle(abl_dir);
            const auto report = run_ablation(abl, b);
            const fs::path out = abl_out.empty() ? fs::path(abl_dir) : fs::path(abl_out);
            std::error_code ec;
            fs::create_directories(out, ec);
            write_text(out / "ablation.csv", report.csv());
            write_text(out / "ablation.txt", report.table());
            std::cout << report.table();
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << Json{{"error", "InvalidArguments"}, {"message", e.what()}}.dump() << "\n";
        return kExitValidation;
    }

    try {
        if (action) action();
    } catch (const StageError& e) {
        report(e, e.stage());
        return kExitStage;
    } catch (const Error& e) {
        report(e);
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << Json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
        return kExitStage;
    }
    return 0;
}
