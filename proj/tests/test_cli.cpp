#include "itm/serialize.hpp"

#include "support.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace itm;
using namespace itm::test;

namespace {

struct Outcome {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome itm_cli(const TempDir& scratch, const std::string& args) {
    const auto out = scratch / "stdout.txt";
    const auto err = scratch / "stderr.txt";
    const std::string cmd = std::string("'") + ITM_CLI_PATH + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = slurp(out);
    o.err = slurp(err);
    return o;
}

}  // namespace

TEST_CASE("validate reports a summary or a JSON error") {
    TempDir dir("cli-validate");
    save_bundle(tiny_bundle(), dir / "bundle");
    auto ok = itm_cli(dir, "validate " + (dir / "bundle").string());
    CHECK(ok.exit_code == 0);
    const auto summary = Json::parse(ok.out);
    CHECK(summary["images"] == 3);
    CHECK(summary["dim"] == 4);

    auto missing = itm_cli(dir, "validate " + (dir / "nope").string());
    CHECK(missing.exit_code == 2);
    CHECK(Json::parse(missing.err).contains("error"));

    auto bad_flag = itm_cli(dir, "validate --frobnicate x");
    CHECK(bad_flag.exit_code == 2);
    CHECK(Json::parse(bad_flag.err)["error"] == "InvalidArguments");
}

TEST_CASE("run honours config files with flag overrides") {
    TempDir dir("cli-run");
    const auto bundle = dir / "bundle";
    REQUIRE(itm_cli(dir, "synth " + bundle.string() + " --per-group 40 --noise 0.1 --private-bias 1,0,1,0 --seed 2").exit_code == 0);
    write_json(dir / "cfg.json", Json::parse(R"({"seed": 4, "cluster": {"min_cluster_size": 20}, "train": {"epochs": 30}})"));

    const auto out = dir / "out";
    auto r = itm_cli(dir, "run " + bundle.string() + " --config " + (dir / "cfg.json").string() + " --epochs 40 --out " +
                              out.string());
    REQUIRE(r.exit_code == 0);
    const auto manifest = read_json(out / "manifest.json");
    CHECK(manifest["config"]["train"]["epochs"] == 40);
    CHECK(manifest["config"]["cluster"]["min_cluster_size"] == 20);
    CHECK(manifest["seed"] == 4);
    CHECK(Json::parse(r.out).contains("u_ba"));

    auto g = itm_cli(dir, "explain " + bundle.string() + " --out " + out.string() + " --global");
    CHECK(g.exit_code == 0);
    CHECK(slurp(out / "sankey.csv").rfind("source,target,value\n", 0) == 0);
    CHECK(std::filesystem::exists(out / "global.json"));

    auto local = itm_cli(dir, "explain " + bundle.string() + " --out " + out.string() + " --top-k 2");
    CHECK(local.exit_code == 0);
    CHECK(local.out.rfind("image\tpredicted", 0) == 0);
    CHECK(std::filesystem::exists(out / "report.json"));
}

TEST_CASE("stage failures exit with code 3 and name the stage") {
    TempDir dir("cli-fail");
    const auto bundle = dir / "bundle";
    REQUIRE(itm_cli(dir, "synth " + bundle.string() + " --per-group 20 --seed 1").exit_code == 0);
    auto r = itm_cli(dir, "run " + bundle.string() + " --min-cluster-size 5000 --out " + (dir / "out").string());
    CHECK(r.exit_code == 3);
    const auto err = Json::parse(r.err.substr(r.err.rfind("{\"error\"")));
    CHECK(err["stage"] == "cluster");
}
