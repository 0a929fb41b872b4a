#include "sarlv/llvm_model.hpp"

#include <cmath>
#include <stdexcept>

namespace sarlv {

namespace {

std::int64_t require_special(const Vocabulary& vocab, const char* text) {
    auto id = vocab.special_id(text);
    if (!id) {
        throw std::invalid_argument(std::string("build_prompt: vocabulary lacks special token ") +
                                    text);
    }
    return *id;
}

std::string substitute_question(const std::string& segment, const std::string& question) {
    auto pos = segment.find("{question}");
    if (pos == std::string::npos) return segment;
    return segment.substr(0, pos) + question + segment.substr(pos + 10);
}

}  // namespace

PromptTokens build_prompt(const std::string& tmpl, const std::string& question,
                          const std::optional<std::string>& answer, const Vocabulary& vocab) {
    auto bos = require_special(vocab, kBosToken);
    auto eos = require_special(vocab, kEosToken);
    auto inst_open = require_special(vocab, kInstOpenToken);
    auto inst_close = require_special(vocab, kInstCloseToken);
    auto image = require_special(vocab, kImageToken);

    auto img_pos = tmpl.find(kImageToken);
    if (img_pos == std::string::npos) {
        throw std::invalid_argument("build_prompt: template has no <image> placeholder: \"" +
                                    tmpl + "\"");
    }
    if (tmpl.find(kImageToken, img_pos + 7) != std::string::npos) {
        throw std::invalid_argument("build_prompt: template has more than one <image> placeholder");
    }
    std::string before = tmpl.substr(0, img_pos);
    std::string after = tmpl.substr(img_pos + 7);
    bool has_slot = tmpl.find("{question}") != std::string::npos;
    before = substitute_question(before, question);
    after = substitute_question(after, question);
    if (!has_slot && !question.empty()) after += " " + question;

    PromptTokens out;
    out.ids.push_back(bos);
    out.ids.push_back(inst_open);
    for (auto id : encode(before, vocab).ids) out.ids.push_back(id);
    out.image_index = static_cast<std::int64_t>(out.ids.size());
    out.ids.push_back(image);
    for (auto id : encode(after, vocab).ids) out.ids.push_back(id);
    out.ids.push_back(inst_close);
    out.loss_mask.assign(out.ids.size(), 0);
    if (answer) {
        out.answer_begin = static_cast<std::int64_t>(out.ids.size());
        for (auto id : encode(*answer, vocab).ids) {
            out.ids.push_back(id);
            out.loss_mask.push_back(1);
        }
        out.ids.push_back(eos);
        out.loss_mask.push_back(1);
        out.answer_end = static_cast<std::int64_t>(out.ids.size());
    }
    return out;
}

LlvmModel::LlvmModel(VisionEncoder vision, Tensor proj_w, Tensor proj_b, LanguageModel lm,
                     std::string prompt_template)
    : vision_(std::move(vision)),
      proj_w_(std::move(proj_w)),
      proj_b_(std::move(proj_b)),
      lm_(std::move(lm)),
      prompt_template_(std::move(prompt_template)) {
    params_.append(vision_.params());
    ParamRegistry proj;
    proj_w_ = proj.add("projector.weight", proj_w_);
    proj_b_ = proj.add("projector.bias", proj_b_);
    params_.append(proj);
    params_.append(lm_.params());
}

std::int64_t LlvmModel::patch_count(const GrayImage& image) const {
    std::int64_t p = vision_.config().patch_size;
    std::int64_t h = image.height, w = image.width;
    if (vision_.config().resize_to_native && vision_.config().native_resolution) {
        h = w = *vision_.config().native_resolution;
    }
    return ((h + p - 1) / p) * ((w + p - 1) / p);
}

std::int64_t LlvmModel::expanded_pos(const PromptTokens& prompt, std::int64_t n_patches,
                                     std::int64_t pos) const {
    if (pos < prompt.image_index) return pos;
    if (pos == prompt.image_index) {
        throw std::invalid_argument("expanded_pos: the placeholder itself has no single position");
    }
    return pos - 1 + n_patches;
}

Tensor LlvmModel::embed_multimodal(const GrayImage& image, const PromptTokens& prompt,
                                   const ForwardCtx& ctx) const {
    if (prompt.image_index < 0) {
        throw std::invalid_argument("embed_multimodal: prompt has no image placeholder");
    }
    std::vector<std::int64_t> before(prompt.ids.begin(),
                                     prompt.ids.begin() + prompt.image_index);
    std::vector<std::int64_t> after(prompt.ids.begin() + prompt.image_index + 1,
                                    prompt.ids.end());
    ImageEmbedding vis = vision_.encode(image, ctx);
    Tensor projected = add(matmul(vis.patches, proj_w_), proj_b_);
    std::vector<Tensor> parts;
    if (!before.empty()) parts.push_back(lm_.embed(before));
    parts.push_back(projected);
    if (!after.empty()) parts.push_back(lm_.embed(after));
    return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

Tensor LlvmModel::forward(const GrayImage& image, const PromptTokens& prompt,
                          const ForwardCtx& ctx,
                          std::optional<std::pair<std::int64_t, std::int64_t>> logit_rows) const {
    Tensor seq = embed_multimodal(image, prompt, ctx);
    return lm_.forward_embedded(seq, ctx, logit_rows);
}

LlvmModel assemble_llvm(VisionEncoder vision, Tensor proj_w, Tensor proj_b, LanguageModel lm,
                        std::string prompt_template) {
    std::int64_t dv = vision.config().d_vision;
    std::int64_t dm = lm.config().d_model;
    if (proj_w.rank() != 2 || proj_w.dim(0) != dv || proj_w.dim(1) != dm || proj_b.rank() != 1 ||
        proj_b.dim(0) != dm) {
        throw std::invalid_argument("assemble_llvm: projector " + shape_str(proj_w.shape()) + "/" +
                                    shape_str(proj_b.shape()) + " does not bridge d_vision " +
                                    std::to_string(dv) + " to d_model " + std::to_string(dm));
    }
    return LlvmModel(std::move(vision), std::move(proj_w), std::move(proj_b), std::move(lm),
                     std::move(prompt_template));
}

LlvmModel assemble_llvm(VisionEncoder vision, LanguageModel lm, RngState& rng,
                        std::string prompt_template) {
    std::int64_t dv = vision.config().d_vision;
    std::int64_t dm = lm.config().d_model;
    auto w = Tensor::randn({dv, dm}, rng, 0.0, 1.0 / std::sqrt(static_cast<double>(dv)));
    auto b = Tensor::zeros({dm});
    return assemble_llvm(std::move(vision), std::move(w), std::move(b), std::move(lm),
                         std::move(prompt_template));
}

}  // namespace sarlv
