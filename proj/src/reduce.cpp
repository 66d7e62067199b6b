#include "itm/reduce.hpp"

namespace itm {

std::string_view to_string(ReduceMethod m) noexcept {
    return m == ReduceMethod::pca ? "pca" : "precomputed";
}

ReduceMethod parse_reduce_method(std::string_view text) {
    if (text == "pca") return ReduceMethod::pca;
    if (text == "precomputed") return ReduceMethod::precomputed;
    fail(ErrorCode::InvalidConfig, "unknown reducer '" + std::string(text) + "'");
}

EmbeddingMatrix fit_reduce(const EmbeddingMatrix& embeddings, const ReducerConfig& cfg, std::uint64_t /*seed*/,
                           const std::optional<EmbeddingMatrix>& precomputed) {
    if (cfg.target_dim < 1) fail(ErrorCode::InvalidConfig, "target_dim must be positive");
    if (cfg.method == ReduceMethod::precomputed) {
        if (!precomputed) fail(ErrorCode::MissingPrecomputed, "method=precomputed but reduced.bin is absent");
        if (precomputed->count() != embeddings.count())
            fail(ErrorCode::DimMismatch, "reduced.bin row count differs from the embeddings");
        return *precomputed;
    }
    EmbeddingMatrix out;
    out.data = pca_reduce(embeddings.data, cfg.target_dim);
    out.row_ids = embeddings.row_ids;
    return out;
}

EmbeddingMatrix fit_reduce(const Bundle& bundle, const ReducerConfig& cfg, std::uint64_t seed) {
    return fit_reduce(bundle.image_embeddings, cfg, seed, bundle.reduced);
}

}  // namespace itm
