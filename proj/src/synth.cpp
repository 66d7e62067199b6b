#include "itm/synth.hpp"

#include "itm/error.hpp"
#include "itm/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace itm {

std::string synth_word(int group, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "g%dw%02d", group, index);
    return buf;
}

namespace {

void check_spec(const SynthSpec& s) {
    auto bad = [](const std::string& what) { fail(ErrorCode::InvalidSpec, "synth spec: " + what); };
    if (s.groups < 1) bad("groups must be >= 1");
    if (s.per_group < 1) bad("per_group must be >= 1");
    if (s.dim < 2) bad("dim must be >= 2");
    if (s.vocab_per_group < 1) bad("vocab_per_group must be >= 1");
    if (s.tags_per_image < 1) bad("tags_per_image must be >= 1");
    if (s.tag_pool < 1) bad("tag_pool must be >= 1");
    if (!(s.sigma > 0.0)) bad("sigma must be > 0");
    if (!(s.noise >= 0.0 && s.noise <= 1.0)) bad("noise rate must lie in [0, 1]");
    if (!s.private_bias.empty()) {
        if (static_cast<int>(s.private_bias.size()) != s.groups) bad("private_bias needs one entry per group");
        for (double p : s.private_bias)
            if (!(p >= 0.0 && p <= 1.0)) bad("private_bias entries must lie in [0, 1]");
    }
    if (!(s.train_fraction > 0.0 && s.val_fraction >= 0.0 && s.train_fraction + s.val_fraction <= 1.0))
        bad("split fractions must be positive and sum to at most 1");
}

double f32(double x) { return static_cast<double>(static_cast<float>(x)); }

Vector<double> gaussian(Rng& rng, int dim, double sigma) {
    Vector<double> v(dim);
    for (int i = 0; i < dim; ++i) v[i] = sigma * rng.normal();
    return v;
}

RowMatrixXd draw_centers(const SynthSpec& s, Rng& rng) {
    const double min_gap = 6.0 * s.sigma;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        RowMatrixXd c(s.groups, s.dim);
        for (int g = 0; g < s.groups; ++g) {
            Vector<double> v = gaussian(rng, s.dim, 1.0);
            c.row(g) = v.normalized().transpose();
        }
        bool ok = true;
        for (int a = 0; a < s.groups && ok; ++a)
            for (int b = a + 1; b < s.groups && ok; ++b) ok = (c.row(a) - c.row(b)).norm() >= min_gap;
        if (ok) return c;
    }
    fail(ErrorCode::InvalidSpec, "synth spec: cannot place group centers 6 sigma apart on the unit sphere");
}

// Zipf-like word popularity within a group so topics have a clear head.
double word_weight(int index) { return 1.0 / (1.0 + 0.15 * index); }

// Weighted sampling of `m` distinct indices out of `n` (Efraimidis-Spirakis).
// Index i has popularity word_weight(i % period).
std::vector<int> sample_words(Rng& rng, int n, int m, int period) {
    std::vector<std::pair<double, int>> keys(n);
    for (int i = 0; i < n; ++i) {
        double u = 0.0;
        while (u <= 0.0) u = rng.uniform();
        keys[i] = {std::log(u) / word_weight(i % period), i};
    }
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> out;
    for (int i = 0; i < std::min(n, m); ++i) out.push_back(keys[i].second);
    return out;
}

}  // namespace

Bundle synth_bundle(const SynthSpec& s, std::uint64_t seed, SynthTruth* truth) {
    check_spec(s);
    Rng rng(seed);
    const double word_sigma = s.word_sigma < 0.0 ? s.sigma : s.word_sigma;

    SynthTruth t;
    t.centers = draw_centers(s, rng);

    Bundle b;
    const int n_words = s.groups * s.vocab_per_group;
    b.vocabulary.embeddings.data.resize(n_words, s.dim);
    for (int g = 0; g < s.groups; ++g) {
        for (int i = 0; i < s.vocab_per_group; ++i) {
            const int row = g * s.vocab_per_group + i;
            b.vocabulary.words.push_back(synth_word(g, i));
            Vector<double> v = t.centers.row(g).transpose() + gaussian(rng, s.dim, word_sigma);
            b.vocabulary.embeddings.data.row(row) = v.unaryExpr(&f32).transpose();
            t.group_of_word.push_back(g);
        }
    }
    b.vocabulary.embeddings.row_ids = b.vocabulary.words;
    b.vocabulary.reindex();

    const int n_train = static_cast<int>(std::floor(s.train_fraction * s.per_group));
    const int n_val = static_cast<int>(std::floor(s.val_fraction * s.per_group));
    const int total = s.groups * s.per_group;
    b.image_embeddings.data.resize(total, s.dim);

    for (int g = 0; g < s.groups; ++g) {
        const int pool_first = g / s.tag_pool * s.tag_pool;
        const int pool_size = std::min(s.tag_pool, s.groups - pool_first);
        const double bias = s.private_bias.empty() ? (g % 2 == 0 ? 0.9 : 0.1) : s.private_bias[g];
        for (int i = 0; i < s.per_group; ++i) {
            const int row = g * s.per_group + i;
            ImageRecord rec;
            char id[32];
            std::snprintf(id, sizeof id, "img-g%d-%03d", g, i);
            rec.id = id;
            rec.split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);

            Vector<double> x = t.centers.row(g).transpose() + gaussian(rng, s.dim, s.sigma);
            b.image_embeddings.data.row(row) = x.unaryExpr(&f32).transpose();

            std::vector<bool> foreign(s.tags_per_image, false);
            int n_foreign = 0;
            if (s.groups > pool_size) {
                for (int k = 0; k < s.tags_per_image; ++k) {
                    foreign[k] = rng.bernoulli(s.noise);
                    n_foreign += foreign[k];
                }
            }
            const auto own = sample_words(rng, pool_size * s.vocab_per_group, s.tags_per_image - n_foreign,
                                          s.vocab_per_group);
            std::size_t next_own = 0;
            std::vector<bool> kept_foreign;
            for (int k = 0; k < s.tags_per_image; ++k) {
                std::string word;
                if (foreign[k]) {
                    auto other = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.groups - pool_size)));
                    if (other >= pool_first) other += pool_size;
                    word = synth_word(other, static_cast<int>(rng.below(static_cast<std::uint64_t>(s.vocab_per_group))));
                } else {
                    if (next_own >= own.size()) continue;  // group vocabulary smaller than tag count
                    const int w = own[next_own++];
                    word = synth_word(pool_first + w / s.vocab_per_group, w % s.vocab_per_group);
                }
                if (std::find(rec.tags.begin(), rec.tags.end(), word) != rec.tags.end()) continue;
                rec.tags.push_back(std::move(word));
                kept_foreign.push_back(foreign[k]);
            }
            rec.label = rng.bernoulli(bias) ? Label::Private : Label::Public;

            b.image_embeddings.row_ids.push_back(rec.id);
            b.records.push_back(std::move(rec));
            t.group_of_record.push_back(g);
            t.tag_foreign.push_back(std::move(kept_foreign));
        }
    }

    if (truth) *truth = std::move(t);
    return b;
}

}  // namespace itm
