#pragma once

#include <optional>
#include <string>

#include "sarlv/bpe.hpp"
#include "sarlv/language_model.hpp"
#include "sarlv/vision.hpp"

namespace sarlv {

// Special-token strings every prompt relies on.
inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";
inline constexpr const char* kInstOpenToken = "[INST]";
inline constexpr const char* kInstCloseToken = "[/INST]";
inline constexpr const char* kImageToken = "<image>";

struct PromptTokens {
    std::vector<std::int64_t> ids;  // contains exactly one image placeholder id
    std::vector<int> loss_mask;     // 1 only on answer tokens and the closing EOS
    std::int64_t image_index = -1;  // placeholder position within ids
    // [begin, end) of the mask==1 region; -1/-1 when no answer was given
    std::int64_t answer_begin = -1;
    std::int64_t answer_end = -1;
};

/// Token layout: BOS, [INST], template text around one <image> placeholder
/// with {question} substituted (appended when the template has no slot),
/// [/INST], then answer tokens and EOS when an answer is supplied.
PromptTokens build_prompt(const std::string& tmpl, const std::string& question,
                          const std::optional<std::string>& answer, const Vocabulary& vocab);

/// Vision encoder + linear projector + causal LM. The forward pass replaces
/// the prompt's image placeholder with the projected patch sequence.
class LlvmModel {
public:
    LlvmModel(VisionEncoder vision, Tensor proj_w, Tensor proj_b, LanguageModel lm,
              std::string prompt_template);

    /// Patch count the placeholder expands to for an image of this size.
    std::int64_t patch_count(const GrayImage& image) const;
    /// Position of token index `pos` after placeholder expansion.
    std::int64_t expanded_pos(const PromptTokens& prompt, std::int64_t n_patches,
                              std::int64_t pos) const;
    std::int64_t expanded_length(const PromptTokens& prompt, std::int64_t n_patches) const {
        return static_cast<std::int64_t>(prompt.ids.size()) - 1 + n_patches;
    }

    /// Embedding sequence with projected patches spliced in at the placeholder.
    Tensor embed_multimodal(const GrayImage& image, const PromptTokens& prompt,
                            const ForwardCtx& ctx) const;

    /// Logits over [start, stop) rows of the expanded sequence (all rows when
    /// absent).
    Tensor forward(const GrayImage& image, const PromptTokens& prompt, const ForwardCtx& ctx,
                   std::optional<std::pair<std::int64_t, std::int64_t>> logit_rows =
                       std::nullopt) const;

    VisionEncoder& vision() { return vision_; }
    const VisionEncoder& vision() const { return vision_; }
    LanguageModel& lm() { return lm_; }
    const LanguageModel& lm() const { return lm_; }
    const Tensor& projector_weight() const { return proj_w_; }
    const Tensor& projector_bias() const { return proj_b_; }
    const std::string& prompt_template() const { return prompt_template_; }

    /// All named parameters: vision, projector, then language model.
    ParamRegistry& params() { return params_; }
    const ParamRegistry& params() const { return params_; }

private:
    VisionEncoder vision_;
    Tensor proj_w_;  // [d_vision, d_model]
    Tensor proj_b_;  // [d_model]
    LanguageModel lm_;
    std::string prompt_template_;
    ParamRegistry params_;
};

/// Validates that the projector bridges d_vision to d_model and composes the
/// parts. Projector tensors are registered as projector.weight/projector.bias.
LlvmModel assemble_llvm(VisionEncoder vision, Tensor proj_w, Tensor proj_b, LanguageModel lm,
                        std::string prompt_template = "<image> {question}");

/// Convenience: Gaussian-initialized projector.
LlvmModel assemble_llvm(VisionEncoder vision, LanguageModel lm, RngState& rng,
                        std::string prompt_template = "<image> {question}");

}  // namespace sarlv
