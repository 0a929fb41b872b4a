#include "sarlv/language_model.hpp"

#include <stdexcept>

namespace sarlv {

LanguageModel::LanguageModel(LanguageModelConfig cfg, RngState& rng, const std::string& prefix)
    : cfg_(cfg), prefix_(prefix) {
    if (cfg_.heads < 1 || cfg_.d_model % cfg_.heads != 0) {
        throw std::invalid_argument("LanguageModel: d_model must be divisible by heads");
    }
    tok_emb_ = params_.add(prefix + ".tok_emb",
                           Tensor::randn({cfg_.vocab_size, cfg_.d_model}, rng, 0.0, 0.02));
    pos_emb_ = params_.add(prefix + ".pos_emb",
                           Tensor::randn({cfg_.context_length, cfg_.d_model}, rng, 0.0, 0.02));
    for (int i = 0; i < cfg_.depth; ++i) {
        blocks_.push_back(make_block(params_, prefix + ".blocks." + std::to_string(i),
                                     cfg_.d_model, cfg_.heads, rng));
    }
    final_ln_ = make_layer_norm(params_, prefix + ".final_ln", cfg_.d_model);
    // Small head init keeps the initial next-token distribution near uniform.
    head_ = make_linear(params_, prefix + ".head", cfg_.d_model, cfg_.vocab_size, rng, 0.02);
}

Tensor LanguageModel::embed(const std::vector<std::int64_t>& ids) const {
    return embedding_lookup(tok_emb_, ids);
}

Tensor LanguageModel::hidden_embedded(const Tensor& embedded, const ForwardCtx& ctx) const {
    std::int64_t n = embedded.dim(0);
    if (n > cfg_.context_length) {
        throw std::invalid_argument("LanguageModel: sequence length " + std::to_string(n) +
                                    " exceeds context length " +
                                    std::to_string(cfg_.context_length));
    }
    Tensor x = add(embedded, slice(pos_emb_, 0, 0, n));
    for (const auto& block : blocks_) x = block.forward(x, /*causal=*/true, ctx);
    return final_ln_.forward(x);
}

Tensor LanguageModel::forward_embedded(
    const Tensor& embedded, const ForwardCtx& ctx,
    std::optional<std::pair<std::int64_t, std::int64_t>> logit_rows) const {
    Tensor h = hidden_embedded(embedded, ctx);
    if (logit_rows) {
        h = slice(h, 0, logit_rows->first, logit_rows->second);
    }
    return head_.forward(h, ctx);
}

Tensor LanguageModel::forward(const std::vector<std::int64_t>& ids,
                              const Tensor& prefix_embeddings, const ForwardCtx& ctx,
                              std::optional<std::pair<std::int64_t, std::int64_t>> logit_rows) const {
    Tensor tok = embed(ids);
    Tensor seq = prefix_embeddings.defined() ? concat({prefix_embeddings, tok}, 0) : tok;
    return forward_embedded(seq, ctx, logit_rows);
}

Tensor LanguageModel::forward(const std::vector<std::int64_t>& ids, const ForwardCtx& ctx) const {
    return forward(ids, Tensor(), ctx);
}

}  // namespace sarlv
