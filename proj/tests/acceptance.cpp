// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "itm/cluster.hpp"
#include "itm/pipeline.hpp"
#include "itm/random.hpp"
#include "itm/synth.hpp"
#include "itm/topics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <unistd.h>

using namespace itm;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void criterion(const char* name, double budget_seconds, const std::function<Verdict()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = budget_seconds <= 0 || secs < budget_seconds;
    const bool pass = v.pass && in_time;
    if (!pass) ++failures;
    const std::string budget = budget_seconds > 0 ? fmt(" < %.0fs", budget_seconds) : std::string();
    std::printf("%s  %-22s %s [%.2fs%s%s]\n", pass ? "PASS" : "FAIL", name, v.detail.c_str(), secs, budget.c_str(),
                in_time ? "" : " exceeded");
    std::fflush(stdout);
}

const Json& oracles() {
    static const Json j = read_json(std::filesystem::path(ITM_FIXTURES_DIR) / "oracles.json");
    return j;
}

RowMatrixXd matrix_of(const Json& rows) {
    RowMatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
    return m;
}

ClusterAssignment assignment_of(const Json& labels) {
    ClusterAssignment a;
    a.labels = labels.get<std::vector<int>>();
    a.n_clusters = 1 + *std::max_element(a.labels.begin(), a.labels.end());
    return a;
}

std::filesystem::path scratch(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("itm-accept-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

Verdict ctfidf_oracle() {
    const auto& o = oracles()["ctfidf"];
    std::vector<WordCounts> counts;
    for (const auto& t : o["counts"]) {
        WordCounts c;
        for (const auto& [w, n] : t.items()) c[w] = n.get<std::uint64_t>();
        counts.push_back(c);
    }
    const auto h = ctfidf(counts);
    double worst = 0.0;
    for (std::size_t t = 0; t < counts.size(); ++t)
        for (const auto& [w, v] : o["scores"][t].items()) worst = std::max(worst, std::abs(h[t].at(w) - v.get<double>()));

    Rng rng(99);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<WordCounts> random(1 + rng.below(6));
        for (auto& t : random)
            for (std::uint64_t k = 0, n = 1 + rng.below(10); k < n; ++k) t["w" + std::to_string(rng.below(15))] += 1 + rng.below(50);
        auto scaled = random;
        const std::uint64_t s = 2 + rng.below(10000);
        for (auto& t : scaled)
            for (auto& [w, c] : t) c *= s;
        mismatches += ctfidf(random) != ctfidf(scaled);
    }
    return {worst < 1e-9 && mismatches == 0,
            fmt("h(cat,t1)=%.12f max|err|=%.1e, scaling mismatches %d/200", h[0].at("cat"), worst, mismatches)};
}

Verdict privacy_oracle() {
    const double p = privacy_score(56, 69);
    return {std::abs(p - 81.16) <= 0.005, fmt("P_j(56/69)=%.4f, expected 81.16 +- 0.005", p)};
}

Verdict gradient_check() {
    Rng rng(2024);
    RowMatrixXd s(5, 3);
    for (Eigen::Index i = 0; i < 5; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) s(i, j) = rng.uniform(-1.0, 1.0);
    const std::vector<int> y{0, 1, 1, 0, 1};
    Eigen::MatrixXd w(2, 3);
    for (Eigen::Index c = 0; c < 2; ++c)
        for (Eigen::Index j = 0; j < 3; ++j) w(c, j) = rng.uniform(-1.0, 1.0);
    const Eigen::MatrixXd g = cross_entropy_gradient(w, s, y);
    double worst = 0.0;
    const double h = 1e-5;
    for (Eigen::Index c = 0; c < 2; ++c)
        for (Eigen::Index j = 0; j < 3; ++j) {
            Eigen::MatrixXd up = w, down = w;
            up(c, j) += h;
            down(c, j) -= h;
            const double numeric = (cross_entropy_loss(up, s, y) - cross_entropy_loss(down, s, y)) / (2 * h);
            const double scale = std::max({std::abs(numeric), std::abs(g(c, j)), 1e-12});
            worst = std::max(worst, std::abs(numeric - g(c, j)) / scale);
        }
    return {worst < 1e-4, fmt("max relative error %.2e on 5x3 (< 1e-4)", worst)};
}

Verdict no_bias_identity() {
    Rng rng(5);
    LinearModel m;
    m.weights.resize(2, 8);
    for (Eigen::Index c = 0; c < 2; ++c)
        for (Eigen::Index j = 0; j < 8; ++j) m.weights(c, j) = rng.uniform(-3.0, 3.0);
    const auto zero = predict(m, Eigen::VectorXd::Zero(8));
    const bool exact_zero = zero.logits[0] == 0.0 && zero.logits[1] == 0.0;
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        Eigen::VectorXd v(8);
        for (Eigen::Index j = 0; j < 8; ++j) v[j] = rng.uniform(-1.0, 1.0);
        const auto p = predict(m, v);
        for (int c = 0; c < 2; ++c) {
            double sum = 0.0;
            for (Eigen::Index j = 0; j < 8; ++j) sum += v[j] * m.weights(c, j);
            worst = std::max(worst, std::abs(sum - p.logits[c]));
        }
    }
    return {exact_zero && worst <= 1e-12,
            fmt("v=0 logits exactly zero: %s, max decomposition error %.1e over 1000 v", exact_zero ? "yes" : "no", worst)};
}

// Mislabeled non-outlier points after mapping each found cluster to its
// majority planted blob; a blob split over two clusters also counts.
int mislabeled(const ClusterAssignment& a, const std::vector<int>& truth, int blobs) {
    if (a.n_clusters != blobs) return static_cast<int>(truth.size());
    std::vector<std::map<int, int>> votes(static_cast<std::size_t>(a.n_clusters));
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (a.labels[i] >= 0) ++votes[static_cast<std::size_t>(a.labels[i])][truth[i]];
    std::vector<int> owner;
    for (const auto& v : votes)
        owner.push_back(std::max_element(v.begin(), v.end(), [](auto& x, auto& y) { return x.second < y.second; })->first);
    if (std::set<int>(owner.begin(), owner.end()).size() != owner.size()) return static_cast<int>(truth.size());
    int bad = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (a.labels[i] >= 0 && owner[static_cast<std::size_t>(a.labels[i])] != truth[i]) ++bad;
    return bad;
}

double brute_silhouette(const RowMatrixXd& x, const std::vector<int>& labels) {
    auto dist = [&](Eigen::Index i, Eigen::Index j) { return 1.0 - x.row(i).dot(x.row(j)) / (x.row(i).norm() * x.row(j).norm()); };
    const int k = 1 + *std::max_element(labels.begin(), labels.end());
    double total = 0.0;
    int counted = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (labels[i] < 0) continue;
        std::vector<double> sum(k, 0.0);
        std::vector<int> cnt(k, 0);
        for (Eigen::Index j = 0; j < x.rows(); ++j)
            if (j != i && labels[j] >= 0) {
                sum[labels[j]] += dist(i, j);
                ++cnt[labels[j]];
            }
        ++counted;
        if (cnt[labels[i]] == 0) continue;
        const double a = sum[labels[i]] / cnt[labels[i]];
        double b = INFINITY;
        for (int c = 0; c < k; ++c)
            if (c != labels[i] && cnt[c] > 0) b = std::min(b, sum[c] / cnt[c]);
        total += (b - a) / std::max(a, b);
    }
    return total / counted;
}

Verdict clustering_recovery() {
    const double sigma = 0.05;
    Rng rng(17);
    auto recover = [&](RowMatrixXd centers, int per) {
        const Eigen::Index d = centers.cols();
        RowMatrixXd x(centers.rows() * per, d);
        std::vector<int> truth;
        for (Eigen::Index c = 0; c < centers.rows(); ++c)
            for (int i = 0; i < per; ++i) {
                for (Eigen::Index k = 0; k < d; ++k) x(c * per + i, k) = centers(c, k) + sigma / std::sqrt(double(d)) * rng.normal();
                truth.push_back(static_cast<int>(c));
            }
        ClusterConfig cfg;
        cfg.min_cluster_size = 10;
        return mislabeled(hdbscan(x, cfg), truth, static_cast<int>(centers.rows()));
    };
    RowMatrixXd two(2, 2);
    two << 0, 0, 6 * sigma, 0;
    RowMatrixXd four(4, 3);
    four << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
    four *= 6 * sigma / std::sqrt(8.0);
    int bad2 = 0, bad4 = 0;
    for (int rep = 0; rep < 5; ++rep) {
        bad2 += recover(two, 30);
        bad4 += recover(four, 30);
    }

    const auto& so = oracles()["silhouette"];
    const RowMatrixXd sx = matrix_of(so["points"]);
    const auto sa = assignment_of(so["labels"]);
    const double sil_err = std::abs(silhouette(sx, sa) - brute_silhouette(sx, sa.labels));

    const auto& d = oracles()["dbcv"];
    const double sep = dbcv(matrix_of(d["separated"]["points"]), assignment_of(d["separated"]["labels"]));
    const double ovl = dbcv(matrix_of(d["overlapped"]["points"]), assignment_of(d["overlapped"]["labels"]));
    return {bad2 == 0 && bad4 == 0 && sil_err < 1e-9 && sep > ovl,
            fmt("mislabeled 2-blob %d, 4-blob %d (5 draws each); silhouette |err| %.1e on %d pts; DBCV %.4f > %.4f", bad2,
                bad4, sil_err, static_cast<int>(sx.rows()), sep, ovl)};
}

Verdict end_to_end() {
    SynthSpec spec;
    spec.groups = 4;
    spec.per_group = 50;
    spec.dim = 16;
    spec.sigma = 0.05;
    spec.noise = 0.1;
    spec.private_bias = {1.0, 0.0, 1.0, 0.0};
    SynthTruth truth;
    const Bundle b = synth_bundle(spec, 7, &truth);

    PipelineConfig cfg;
    cfg.seed = 7;
    const auto r = run_pipeline(cfg, b);
    const int clusters = static_cast<int>(r.clusters.clusters.size());

    double worst_share = 1.0;
    bool weights_ok = true;
    int biased = 0;
    for (std::size_t j = 0; j < r.model.descriptors.size(); ++j) {
        const auto& d = r.model.descriptors[j];
        const auto& c = *std::find_if(r.clusters.clusters.begin(), r.clusters.clusters.end(),
                                      [&](const Cluster& x) { return x.id == d.cluster_id; });
        std::map<int, int> votes;
        for (const auto& id : c.member_ids) ++votes[truth.group_of_record[static_cast<std::size_t>(b.find_record(id))]];
        const int group = std::max_element(votes.begin(), votes.end(), [](auto& x, auto& y) { return x.second < y.second; })->first;
        int own = 0;
        for (const auto& w : d.words) own += truth.group_of_word[static_cast<std::size_t>(b.vocabulary.find(w))] == group;
        worst_share = std::min(worst_share, static_cast<double>(own) / static_cast<double>(d.words.size()));
        if (spec.private_bias[static_cast<std::size_t>(group)] >= 0.8) {
            ++biased;
            weights_ok = weights_ok && r.model.weights(1, static_cast<Eigen::Index>(j)) > r.model.weights(0, static_cast<Eigen::Index>(j));
        }
    }
    const bool pass = clusters == 4 && r.model.descriptors.size() == 4 && worst_share >= 0.8 && r.metrics.u_ba >= 95.0 &&
                      biased == 2 && weights_ok;
    return {pass, fmt("%d clusters, min planted-vocabulary share %.0f%%, test U-BA %.2f%%, private>public weight on %s of %d "
                      "private-biased descriptors",
                      clusters, 100.0 * worst_share, r.metrics.u_ba, weights_ok ? "all" : "NOT all", biased)};
}

Verdict ablation() {
    SynthSpec spec;
    spec.noise = 0.3;
    spec.tag_pool = 2;
    const Bundle b = synth_bundle(spec, 7);
    AblationConfig cfg;
    cfg.sizes = {20, 30};
    cfg.seeds = {1, 2, 3, 4, 5};
    const auto report = run_ablation(cfg, b);
    bool direction = true;
    std::string detail;
    for (int size : cfg.sizes) {
        const auto* tm = report.find(AblationMethod::tm, size);
        const auto* itm = report.find(AblationMethod::itm, size);
        direction = direction && itm->u_ba.mean >= tm->u_ba.mean;
        detail += fmt("size %d: ITM %.2f (%.2f) vs TM %.2f (%.2f); ", size, itm->u_ba.mean, itm->u_ba.std, tm->u_ba.mean,
                      tm->u_ba.std);
    }
    const auto* tm30 = report.find(AblationMethod::tm, 30);
    const auto* itm30 = report.find(AblationMethod::itm, 30);
    const bool std_reduced = itm30->u_ba.std < tm30->u_ba.std;
    detail += fmt("direction %s, std_ITM < std_TM at 30: %s", direction ? "holds" : "violated", std_reduced ? "holds" : "violated");
    return {direction && std_reduced, detail};
}

Verdict determinism() {
    SynthSpec spec;
    spec.noise = 0.1;
    const Bundle b = synth_bundle(spec, 11);
    const auto d1 = scratch("det1"), d2 = scratch("det2");
    PipelineConfig cfg;
    cfg.seed = 42;
    cfg.output = d1;
    const auto r1 = run_pipeline(cfg, b);
    cfg.output = d2;
    const auto r2 = run_pipeline(cfg, b);
    const bool same = r1.manifest["stages"] == r2.manifest["stages"];
    const std::size_t n = r1.manifest["stages"].size();
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
    return {same && n == 7, fmt("%zu stage checksums %s across two runs", n, same ? "identical" : "DIFFER")};
}

Verdict metric_arithmetic() {
    const std::vector<int> truth{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    const std::vector<int> pred{1, 1, 1, 0, 1, 0, 0, 0, 0, 0};
    const auto m = metrics_from_predictions(truth, pred, 2);
    const bool pass = std::abs(m.u_ba - 80.0) < 1e-9 && std::abs(m.per_class[1].f1 - 75.0) < 1e-9;
    return {pass, fmt("hand confusion fixture: U-BA %.4f (80), private F1 %.4f (75)", m.u_ba, m.per_class[1].f1)};
}

}  // namespace

int main() {
    criterion("ctfidf-oracle", 1, ctfidf_oracle);
    criterion("privacy-score-oracle", 1, privacy_oracle);
    criterion("gradient-check", 1, gradient_check);
    criterion("no-bias-identity", 0, no_bias_identity);
    criterion("clustering-recovery", 10, clustering_recovery);
    criterion("end-to-end-synthetic", 60, end_to_end);
    criterion("ablation", 600, ablation);
    criterion("determinism", 0, determinism);
    criterion("metric-arithmetic", 0, metric_arithmetic);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
