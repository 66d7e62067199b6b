#include "itm/bundle.hpp"
#include "itm/synth.hpp"

#include "support.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

using namespace itm;
using namespace itm::test;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

}  // namespace

TEST_CASE("one image of dim 4 is a 32 byte embeddings file") {
    Bundle b;
    b.records = {{"only", Split::train, Label::Public, {"cat"}}};
    b.image_embeddings.data = RowMatrixXd::Ones(1, 4);
    b.image_embeddings.row_ids = {"only"};
    b.vocabulary.words = {"cat"};
    b.vocabulary.embeddings.data = RowMatrixXd::Ones(1, 4);
    b.vocabulary.embeddings.row_ids = {"cat"};
    b.vocabulary.reindex();

    TempDir dir("one");
    save_bundle(b, dir.path());
    CHECK(fs::file_size(dir / files::embeddings) == 32);
    const auto bytes = slurp(dir / files::embeddings);
    CHECK(bytes.substr(0, 4) == "ITMB");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[8]) == 4);
}

TEST_CASE("itmb round trip is bit exact for f32 values") {
    Rng rng(5);
    TempDir dir("itmb");
    for (int trial = 0; trial < 20; ++trial) {
        const auto rows = 1 + static_cast<Eigen::Index>(rng.below(9));
        const auto cols = 1 + static_cast<Eigen::Index>(rng.below(7));
        RowMatrixXd m = random_matrix(rng, rows, cols, 100.0).cast<float>().cast<double>();
        write_itmb(dir / "m.bin", m);
        const RowMatrixXd back = read_itmb(dir / "m.bin");
        REQUIRE(back.rows() == rows);
        REQUIRE(back.cols() == cols);
        CHECK(std::memcmp(back.data(), m.data(), sizeof(double) * static_cast<std::size_t>(m.size())) == 0);
    }
}

TEST_CASE("itmb header problems") {
    TempDir dir("hdr");
    write_itmb(dir / "m.bin", RowMatrixXd::Ones(2, 3));
    auto bytes = slurp(dir / "m.bin");

    spit(dir / "bad_magic.bin", "ITMX" + bytes.substr(4));
    CHECK(error_code_of([&] { read_itmb(dir / "bad_magic.bin"); }) == ErrorCode::MagicMismatch);

    spit(dir / "short.bin", bytes.substr(0, bytes.size() - 4));
    CHECK(error_code_of([&] { read_itmb(dir / "short.bin"); }) == ErrorCode::DimMismatch);

    spit(dir / "tiny.bin", "IT");
    CHECK(error_code_of([&] { read_itmb(dir / "tiny.bin"); }) == ErrorCode::MagicMismatch);

    CHECK(error_code_of([&] { read_itmb(dir / "absent.bin"); }) == ErrorCode::MissingFile);
}

TEST_CASE("save and load round trip") {
    const Bundle b = synth_bundle(SynthSpec{}, 3);
    TempDir dir("rt");
    save_bundle(b, dir.path());
    const Bundle back = load_bundle(dir.path());
    CHECK(back.records == b.records);
    CHECK(back.image_embeddings == b.image_embeddings);
    CHECK(back.vocabulary.words == b.vocabulary.words);
    CHECK(back.vocabulary.embeddings == b.vocabulary.embeddings);
    CHECK_FALSE(back.reduced.has_value());
    CHECK_FALSE(back.phrases.has_value());
}

TEST_CASE("labels may be written as names") {
    TempDir dir("names");
    save_bundle(tiny_bundle(), dir.path());
    spit(dir / files::images,
         "{\"id\":\"a\",\"split\":\"train\",\"label\":\"private\",\"tags\":[\"cat\",\"sofa\"]}\n"
         "{\"id\":\"b\",\"split\":\"train\",\"label\":\"public\",\"tags\":[\"dog\"]}\n"
         "\n"
         "{\"id\":\"c\",\"split\":\"test\",\"label\":null,\"tags\":[]}\n");
    const Bundle b = load_bundle(dir.path());
    CHECK(b.records[0].label == Label::Private);
    CHECK(b.records[1].label == Label::Public);
    CHECK_FALSE(b.records[2].label.has_value());
}

TEST_CASE("validation errors") {
    SUBCASE("empty bundle") {
        Bundle b;
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::EmptyBundle);
    }
    SUBCASE("duplicate id") {
        Bundle b = tiny_bundle();
        b.records[1].id = "a";
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::DuplicateId);
    }
    SUBCASE("duplicate word") {
        Bundle b = tiny_bundle();
        b.vocabulary.words[2] = "cat";
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::DuplicateId);
    }
    SUBCASE("unknown tag") {
        Bundle b = tiny_bundle();
        b.records[0].tags.push_back("unicorn");
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::UnknownTag);
    }
    SUBCASE("uppercase tag") {
        Bundle b = tiny_bundle();
        b.records[0].tags[0] = "Cat";
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::MalformedRecord);
    }
    SUBCASE("train record without tags") {
        Bundle b = tiny_bundle();
        b.records[1].tags.clear();
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::MalformedRecord);
    }
    SUBCASE("test record without tags is fine") {
        Bundle b = tiny_bundle();
        b.records[2].tags.clear();
        CHECK_NOTHROW(validate(b));
    }
    SUBCASE("non-finite embedding") {
        Bundle b = tiny_bundle();
        b.image_embeddings.data(1, 2) = std::numeric_limits<double>::quiet_NaN();
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::NonFiniteValue);
    }
    SUBCASE("zero norm embedding") {
        Bundle b = tiny_bundle();
        b.image_embeddings.data.row(1).setZero();
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::ZeroNormEmbedding);
    }
    SUBCASE("vocabulary dimension differs") {
        Bundle b = tiny_bundle();
        b.vocabulary.embeddings.data = RowMatrixXd::Ones(3, 5);
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::DimMismatch);
    }
    SUBCASE("row count differs") {
        Bundle b = tiny_bundle();
        b.records.pop_back();
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::DimMismatch);
    }
    SUBCASE("reduced rows differ") {
        Bundle b = tiny_bundle();
        EmbeddingMatrix r;
        r.data = RowMatrixXd::Ones(2, 2);
        b.reduced = r;
        CHECK(error_code_of([&] { validate(b); }) == ErrorCode::DimMismatch);
    }
}

TEST_CASE("malformed files on load") {
    TempDir dir("bad");
    save_bundle(tiny_bundle(), dir.path());
    SUBCASE("broken json line") {
        spit(dir / files::images, "{\"id\":\"a\",\n");
        CHECK(error_code_of([&] { load_bundle(dir.path()); }) == ErrorCode::MalformedRecord);
    }
    SUBCASE("bad label") {
        spit(dir / files::images, "{\"id\":\"a\",\"split\":\"train\",\"label\":7,\"tags\":[\"cat\"]}\n");
        CHECK(error_code_of([&] { load_bundle(dir.path()); }) == ErrorCode::MalformedRecord);
    }
    SUBCASE("bad split") {
        spit(dir / files::images, "{\"id\":\"a\",\"split\":\"holdout\",\"label\":1,\"tags\":[\"cat\"]}\n");
        CHECK(error_code_of([&] { load_bundle(dir.path()); }) == ErrorCode::MalformedRecord);
    }
    SUBCASE("missing vocabulary") {
        fs::remove(dir / files::vocab);
        CHECK(error_code_of([&] { load_bundle(dir.path()); }) == ErrorCode::MissingFile);
    }
    SUBCASE("missing directory") {
        CHECK(error_code_of([&] { load_bundle(dir / "nope"); }) == ErrorCode::MissingFile);
    }
}

TEST_CASE("vocabulary lookup") {
    const Bundle b = tiny_bundle();
    CHECK(b.vocabulary.contains("dog"));
    CHECK_FALSE(b.vocabulary.contains("emu"));
    CHECK(b.vocabulary.embedding("sofa")[1] == doctest::Approx(0.8));
    CHECK(error_code_of([&] { b.vocabulary.embedding("emu"); }) == ErrorCode::WordNotInVocabulary);
    CHECK(b.find_record("c") == 2);
    CHECK(b.find_record("zz") == -1);
    CHECK(b.rows_in({Split::train}) == std::vector<Eigen::Index>{0, 1});
}

TEST_CASE("synthetic bundles") {
    SUBCASE("valid and deterministic") {
        const SynthSpec spec;
        const Bundle a = synth_bundle(spec, 11);
        const Bundle b = synth_bundle(spec, 11);
        const Bundle c = synth_bundle(spec, 12);
        CHECK_NOTHROW(validate(a));
        CHECK(a.records == b.records);
        CHECK(a.image_embeddings == b.image_embeddings);
        CHECK_FALSE(a.image_embeddings == c.image_embeddings);
        CHECK(a.records.size() == 200);
        CHECK(a.rows_in({Split::train}).size() == 120);
        CHECK(a.rows_in({Split::val}).size() == 40);
        CHECK(a.rows_in({Split::test}).size() == 40);
    }
    SUBCASE("noise rate sets the share of foreign tags") {
        SynthSpec spec;
        spec.noise = 0.2;
        SynthTruth truth;
        synth_bundle(spec, 4, &truth);
        std::size_t foreign = 0, total = 0;
        for (const auto& row : truth.tag_foreign) {
            for (bool f : row) foreign += f;
            total += row.size();
        }
        const double share = static_cast<double>(foreign) / static_cast<double>(total);
        CHECK(std::abs(share - 0.2) <= 0.05);
    }
    SUBCASE("own tags come from the group vocabulary") {
        SynthSpec spec;
        SynthTruth truth;
        const Bundle b = synth_bundle(spec, 9, &truth);
        for (std::size_t i = 0; i < b.records.size(); ++i)
            for (const auto& t : b.records[i].tags)
                CHECK(t.substr(0, 2) == "g" + std::to_string(truth.group_of_record[i]));
    }
    SUBCASE("shared tag pools mix the vocabulary of paired groups") {
        SynthSpec spec;
        spec.tag_pool = 2;
        SynthTruth truth;
        const Bundle b = synth_bundle(spec, 9, &truth);
        std::set<std::string> seen_in_group0;
        for (std::size_t i = 0; i < b.records.size(); ++i) {
            const int g = truth.group_of_record[i];
            for (const auto& t : b.records[i].tags) {
                const int owner = t[1] - '0';
                CHECK(owner / 2 == g / 2);
                if (g == 0) seen_in_group0.insert(t.substr(0, 2));
            }
        }
        CHECK(seen_in_group0 == std::set<std::string>{"g0", "g1"});
    }
    SUBCASE("bad specs") {
        SynthSpec spec;
        spec.noise = 1.5;
        CHECK(error_code_of([&] { synth_bundle(spec, 1); }) == ErrorCode::InvalidSpec);
        spec = SynthSpec{};
        spec.private_bias = {0.5};
        CHECK(error_code_of([&] { synth_bundle(spec, 1); }) == ErrorCode::InvalidSpec);
        spec = SynthSpec{};
        spec.tag_pool = 0;
        CHECK(error_code_of([&] { synth_bundle(spec, 1); }) == ErrorCode::InvalidSpec);
    }
}

TEST_CASE("rng helpers") {
    Rng rng(1);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    rng.shuffle(w);
    CHECK(w != v);
    std::sort(w.begin(), w.end());
    CHECK(w == v);
    for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
}
