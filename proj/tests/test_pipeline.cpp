#include "itm/pipeline.hpp"
#include "itm/synth.hpp"

#include "support.hpp"

#include <cmath>

using namespace itm;
using namespace itm::test;

namespace {

SynthSpec small_spec() {
    SynthSpec s;
    s.per_group = 40;
    s.noise = 0.1;
    s.private_bias = {1.0, 0.0, 1.0, 0.0};
    return s;
}

PipelineConfig small_config(const std::filesystem::path& out) {
    PipelineConfig cfg;
    cfg.output = out;
    cfg.cluster.min_cluster_size = 20;
    cfg.seed = 3;
    return cfg;
}

bool has_warning(const Warnings& w, const std::string& needle) {
    for (const auto& s : w)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("full run writes every artifact and is deterministic") {
    const Bundle b = synth_bundle(small_spec(), 1);
    TempDir one("run1"), two("run2");
    const auto r1 = run_pipeline(small_config(one.path()), b);
    const auto r2 = run_pipeline(small_config(two.path()), b);
    for (const auto& name : pipeline_artifacts()) CHECK(std::filesystem::exists(one / name));
    CHECK(std::filesystem::exists(one / "manifest.json"));
    CHECK(pipeline_artifacts().size() == 7);

    const auto& stages = r1.manifest["stages"];
    REQUIRE(stages.size() == 7);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        CHECK(stages[i]["fnv1a64"] == r2.manifest["stages"][i]["fnv1a64"]);
        CHECK(stages[i]["fnv1a64"] == checksum_file(one / stages[i]["artifact"].get<std::string>()));
    }
    CHECK(r1.clusters.clusters.size() == 4);
    CHECK(r1.descriptors.descriptors.size() == 4);
    CHECK(r1.metrics.u_ba >= 95.0);
    CHECK(r1.model.meta.final_val_loss.has_value());
}

TEST_CASE("no validation split falls back to train rows with a warning") {
    auto spec = small_spec();
    spec.val_fraction = 0.0;
    const Bundle b = synth_bundle(spec, 2);
    Warnings w;
    const auto rows = clustering_rows(b, w);
    CHECK(has_warning(w, "val"));
    for (auto r : rows) CHECK(b.records[static_cast<std::size_t>(r)].split == Split::train);
}

TEST_CASE("stage failures name the stage") {
    const Bundle b = synth_bundle(small_spec(), 1);
    auto cfg = small_config({});
    cfg.cluster.min_cluster_size = 1000;
    try {
        run_pipeline(cfg, b);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "cluster");
    }
    cfg = small_config({});
    cfg.train.epochs = 0;
    try {
        run_pipeline(cfg, b);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "train");
        CHECK(e.code() == ErrorCode::InvalidConfig);
    }
}

TEST_CASE("config json round trip") {
    PipelineConfig cfg;
    cfg.bundle = "some/dir";
    cfg.seed = 17;
    cfg.cluster.min_cluster_size = 12;
    cfg.topics.scope = TopicScope::global;
    cfg.train.learning_rate = 0.05;
    cfg.names = {{2, "kitchen"}};
    PipelineConfig back;
    apply_config_json(back, config_json(cfg));
    CHECK(config_json(back) == config_json(cfg));
    CHECK(back.names.at(2) == "kitchen");

    PipelineConfig partial;
    apply_config_json(partial, Json::parse(R"({"train": {"epochs": 7}})"));
    CHECK(partial.train.epochs == 7);
    CHECK(partial.cluster.min_cluster_size == 30);
}

TEST_CASE("mean and population std") {
    const std::vector<double> v{80, 82, 84};
    const auto m = mean_std(v);
    CHECK(m.mean == doctest::Approx(82.0));
    CHECK(std::abs(m.std - 1.632993) < 1e-6);
    const std::vector<double> same{5, 5, 5};
    CHECK(mean_std(same).std == 0.0);
}

TEST_CASE("global topics carry label-derived privacy scores") {
    Bundle b = tiny_bundle();
    TopicStage ts;
    ts.scope = TopicScope::global;
    Topic t;
    t.id = 0;
    t.representation = {"cat", "sofa"};
    t.member_docs = {"a", "b", "c"};
    ts.global.push_back(t);
    b.records[2].label.reset();
    Warnings w;
    const auto ds = descriptor_stage(b, {}, ts, {{0, "living room"}}, w);
    REQUIRE(ds.descriptors.size() == 1);
    CHECK(ds.descriptors[0].privacy_score == 50.0);
    CHECK(ds.descriptors[0].name == "living room");
    CHECK(ds.descriptors[0].words == t.representation);
}

TEST_CASE("ablation produces one row per method and size") {
    const Bundle b = synth_bundle(small_spec(), 4);
    AblationConfig cfg;
    cfg.base = small_config({});
    cfg.base.train.epochs = 20;
    cfg.methods = {AblationMethod::tm, AblationMethod::itm};
    cfg.sizes = {20};
    cfg.seeds = {1, 2, 3};
    const auto report = run_ablation(cfg, b);
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) {
        CHECK(row.runs == 3);
        CHECK(row.size == 20);
        CHECK(row.u_ba.std >= 0.0);
    }
    REQUIRE(report.find(AblationMethod::itm, 20) != nullptr);
    CHECK(report.find(AblationMethod::itm, 30) == nullptr);
    CHECK(report.csv().rfind("method,size,runs,descriptors,", 0) == 0);
    CHECK(report.table().find("ITM") != std::string::npos);

    cfg.seeds = {1};
    CHECK(error_code_of([&] { run_ablation(cfg, b); }) == ErrorCode::InvalidConfig);
    CHECK(parse_ablation_method("tm") == AblationMethod::tm);
    CHECK(error_code_of([] { parse_ablation_method("xx"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
