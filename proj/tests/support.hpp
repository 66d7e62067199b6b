#pragma once

#include "itm/bundle.hpp"
#include "itm/error.hpp"
#include "itm/random.hpp"
#include "itm/serialize.hpp"

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace itm::test {

inline const Json& oracles() {
    static const Json j = read_json(std::filesystem::path(ITM_FIXTURES_DIR) / "oracles.json");
    return j;
}

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(ITM_FIXTURES_DIR) / name; }

inline RowMatrixXd matrix_of(const Json& rows) {
    RowMatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.at(0).size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    return m;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("itm-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline RowMatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    RowMatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

// Same partition of points into clusters, ignoring label names; outliers must match exactly.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] < 0) != (b[i] < 0)) return false;
        if (a[i] < 0) continue;
        if (auto [it, fresh] = ab.emplace(a[i], b[i]); !fresh && it->second != b[i]) return false;
        if (auto [it, fresh] = ba.emplace(b[i], a[i]); !fresh && it->second != a[i]) return false;
    }
    return true;
}

// Hand-built bundle: three images in dim 4, two labeled train rows and one test row.
inline Bundle tiny_bundle() {
    Bundle b;
    b.records = {
        {"a", Split::train, Label::Private, {"cat", "sofa"}},
        {"b", Split::train, Label::Public, {"dog"}},
        {"c", Split::test, Label::Public, {"cat", "dog"}},
    };
    b.image_embeddings.data.resize(3, 4);
    b.image_embeddings.data << 1, 0, 0, 0,  //
        0, 1, 0, 0,                          //
        0.5, 0.5, 0.5, 0.5;
    b.image_embeddings.row_ids = {"a", "b", "c"};
    b.vocabulary.words = {"cat", "dog", "sofa"};
    b.vocabulary.embeddings.data.resize(3, 4);
    b.vocabulary.embeddings.data << 1, 0, 0, 0,  //
        0, 1, 0, 0,                               //
        0.6, 0.8, 0, 0;
    b.vocabulary.embeddings.row_ids = b.vocabulary.words;
    b.vocabulary.reindex();
    return b;
}

template <typename F>
ErrorCode error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an itm::Error");
    return ErrorCode::IoError;
}

}  // namespace itm::test
