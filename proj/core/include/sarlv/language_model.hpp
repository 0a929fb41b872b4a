#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sarlv/nn.hpp"

namespace sarlv {

struct LanguageModelConfig {
    std::int64_t vocab_size = 4101;
    std::int64_t d_model = 128;
    int depth = 4;
    int heads = 4;
    std::int64_t context_length = 512;
};

/// Decoder-only causal transformer. Logits at position i depend only on
/// positions <= i.
class LanguageModel {
public:
    LanguageModel(LanguageModelConfig cfg, RngState& rng, const std::string& prefix = "lm");

    /// Token embeddings only (no positions); [n, d_model].
    Tensor embed(const std::vector<std::int64_t>& ids) const;

    /// Run the stack over a pre-built embedding sequence. When logit_rows is
    /// given, the vocabulary projection is applied only to that [start, stop)
    /// row range, which is all training and greedy decoding ever need.
    Tensor forward_embedded(const Tensor& embedded, const ForwardCtx& ctx,
                            std::optional<std::pair<std::int64_t, std::int64_t>> logit_rows =
                                std::nullopt) const;

    /// Final hidden states (post final layer norm), [n, d_model].
    Tensor hidden_embedded(const Tensor& embedded, const ForwardCtx& ctx) const;

    /// Optional prefix embeddings occupy the leading positions.
    Tensor forward(const std::vector<std::int64_t>& ids, const Tensor& prefix_embeddings,
                   const ForwardCtx& ctx,
                   std::optional<std::pair<std::int64_t, std::int64_t>> logit_rows =
                       std::nullopt) const;
    Tensor forward(const std::vector<std::int64_t>& ids, const ForwardCtx& ctx) const;

    const LanguageModelConfig& config() const { return cfg_; }
    ParamRegistry& params() { return params_; }
    const ParamRegistry& params() const { return params_; }
    std::vector<TransformerBlock>& blocks() { return blocks_; }
    const std::string& prefix() const { return prefix_; }

private:
    LanguageModelConfig cfg_;
    std::string prefix_;
    ParamRegistry params_;
    Tensor tok_emb_;
    Tensor pos_emb_;
    std::vector<TransformerBlock> blocks_;
    LayerNormParams final_ln_;
    Linear head_;
};

}  // namespace sarlv
