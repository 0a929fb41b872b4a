#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "sarlv/lora.hpp"
#include "sarlv/nf4.hpp"

using namespace sarlv;

namespace {

Vocabulary peft_vocab() {
    auto base = Vocabulary::train_bpe("short corpus with words words and more words", 280);
    auto [vocab, rows] = add_special_tokens(
        base, {kBosToken, kEosToken, kInstOpenToken, kInstCloseToken, kImageToken});
    (void)rows;
    return vocab;
}

LlvmModel peft_model(const Vocabulary& vocab, std::uint64_t seed = 17, int lm_depth = 2,
                     std::int64_t d_model = 32) {
    RngState rng(seed);
    VisionEncoderConfig vc;
    vc.patch_size = 7;
    vc.d_vision = 8;
    vc.depth = 1;
    vc.heads = 2;
    vc.max_image_hw = 28;
    VisionEncoder vision(vc, rng);
    LanguageModelConfig lc;
    lc.vocab_size = vocab.extended_size();
    lc.d_model = d_model;
    lc.depth = lm_depth;
    lc.heads = 2;
    lc.context_length = 96;
    LanguageModel lm(lc, rng);
    return assemble_llvm(std::move(vision), std::move(lm), rng);
}

GrayImage image_for(std::uint64_t seed) {
    RngState rng(seed);
    auto img = make_image(21, 21);
    for (auto& p : img.pixels) p = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("LoRA injection is an exact no-op at initialization") {
    auto vocab = peft_vocab();
    auto model = peft_model(vocab);
    auto prompt = build_prompt(model.prompt_template(), "what is it?", std::nullopt, vocab);
    ForwardCtx ctx;  // eval mode

    std::vector<Tensor> before;
    for (std::uint64_t i = 0; i < 100; ++i) {
        before.push_back(model.forward(image_for(i), prompt, ctx));
    }
    LoraConfig cfg;
    RngState rng(5);
    inject_lora(model, cfg, rng);
    double max_abs_diff = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        auto after = model.forward(image_for(i), prompt, ctx);
        for (std::size_t e = 0; e < after.data().size(); ++e) {
            max_abs_diff = std::max(max_abs_diff,
                                    std::fabs(after.data()[e] - before[i].data()[e]));
        }
    }
    CHECK(max_abs_diff == 0.0);
}

TEST_CASE("toy LoRA trainable count matches the shape-enumeration oracle") {
    auto vocab = peft_vocab();
    auto model = peft_model(vocab, 17, /*lm_depth=*/2, /*d_model=*/32);
    LoraConfig cfg;
    cfg.train_projector = false;  // adapters only
    RngState rng(5);
    auto base_census = count_params(model);
    inject_lora(model, cfg, rng);
    auto census = count_params(model);
    // 2 layers x {q, v} x rank 8 x (d_in 32 + d_out 32)
    std::int64_t expected = 2 * 2 * 8 * (32 + 32);
    CHECK(expected == 2048);
    CHECK(census.trainable == expected);
    CHECK(census.total == base_census.total + expected);
    CHECK(census.fraction == doctest::Approx(static_cast<double>(expected) /
                                             static_cast<double>(census.total))
                                 .epsilon(1e-12));
}

TEST_CASE("all-frozen model counts zero trainable") {
    auto vocab = peft_vocab();
    auto model = peft_model(vocab);
    model.params().set_all_trainable(false);
    auto census = count_params(model);
    CHECK(census.trainable == 0);
    CHECK(census.fraction == 0.0);
}

TEST_CASE("census matches an independent shape enumeration on the toy config") {
    auto vocab = peft_vocab();
    auto model = peft_model(vocab, 23);
    auto census = count_params(model);

    const std::int64_t dv = 8, pp = 7 * 7, max_patches = (28 / 7) * (28 / 7);
    const std::int64_t dm = 32, V = vocab.extended_size(), ctx_len = 96;
    auto block_params = [](std::int64_t d) {
        std::int64_t attn = 4 * (d * d + d);
        std::int64_t mlp = d * 4 * d + 4 * d + 4 * d * d + d;
        std::int64_t lns = 2 * (2 * d);
        return attn + mlp + lns;
    };
    std::int64_t vision_total = (pp * dv + dv) + max_patches * dv + 1 * block_params(dv) + 2 * dv;
    std::int64_t lm_total = V * dm + ctx_len * dm + 2 * block_params(dm) + 2 * dm + (dm * V + V);
    std::int64_t projector = dv * dm + dm;
    CHECK(census.total == vision_total + projector + lm_total);
    CHECK(census.trainable == census.total);
}

TEST_CASE("inject_lora validates target names and emptiness") {
    auto vocab = peft_vocab();
    auto model = peft_model(vocab);
    RngState rng(3);
    LoraConfig empty;
    empty.targets = {};
    CHECK_THROWS_AS(inject_lora(model, empty, rng), std::invalid_argument);
    LoraConfig bogus;
    bogus.targets = {"q", "attention_out"};
    CHECK_THROWS_WITH_AS(inject_lora(model, bogus, rng), doctest::Contains("mlp_out"),
                         std::invalid_argument);
}

TEST_CASE("gradients flow only to adapters and the projector after injection") {
    auto vocab = peft_vocab();
    auto model = peft_model(vocab);
    LoraConfig cfg;
    RngState rng(7);
    inject_lora(model, cfg, rng);
    for (const auto& p : model.params().items()) {
        bool lora_param = p->name.find("lora_") != std::string::npos;
        bool projector = p->name.rfind("projector.", 0) == 0;
        CHECK(p->trainable == (lora_param || projector));
        CHECK(p->value.requires_grad() == p->trainable);
    }
}

TEST_CASE("NF4 codebook properties and all-zero/absmax reconstruction") {
    const auto& levels = nf4_levels();
    REQUIRE(levels.size() == 16);
    CHECK(levels.front() == -1.0);
    CHECK(levels.back() == 1.0);
    CHECK(levels[7] == 0.0);
    for (std::size_t i = 1; i < 16; ++i) CHECK(levels[i] > levels[i - 1]);

    auto zeros = Tensor::zeros({130});
    auto qz = quantize_nf4(zeros);
    auto dz = dequantize(qz);
    for (double v : dz.data()) CHECK(v == 0.0);
    for (float a : qz.absmax) CHECK(a == 1.0f);  // all-zero block convention

    RngState rng(9);
    auto x = Tensor::randn({64}, rng, 0.0, 2.0, Precision::f32);
    auto q = quantize_nf4(x);
    auto d = dequantize(q);
    // the absmax element reconstructs exactly to +-absmax
    std::size_t arg = 0;
    for (std::size_t i = 1; i < 64; ++i) {
        if (std::fabs(x.data()[i]) > std::fabs(x.data()[arg])) arg = i;
    }
    CHECK(std::fabs(d.data()[arg]) == static_cast<double>(q.absmax[0]));
    CHECK(d.data()[arg] == x.data()[arg]);
}

TEST_CASE("NF4 round-trip error respects the codebook gap bound") {
    const auto& levels = nf4_levels();
    double widest_gap = 0.0;
    for (std::size_t i = 1; i < 16; ++i) widest_gap = std::max(widest_gap, levels[i] - levels[i - 1]);
    RngState rng(31);
    for (int block = 0; block < 200; ++block) {
        auto x = Tensor::randn({64}, rng, 0.0, 1.0, Precision::f32);
        auto q = quantize_nf4(x);
        auto d = dequantize(q);
        double bound = static_cast<double>(q.absmax[0]) * widest_gap / 2.0;
        for (std::size_t i = 0; i < 64; ++i) {
            CHECK(std::fabs(d.data()[i] - x.data()[i]) <= bound);
        }
    }
}

TEST_CASE("NF4 footprint: byte bound and 8x ratio on the code payload") {
    RngState rng(12);
    for (std::int64_t n : {64, 100, 4096, 33333}) {
        auto x = Tensor::randn({n}, rng, 0.0, 1.0, Precision::f32);
        auto q = quantize_nf4(x);
        CHECK(static_cast<double>(q.byte_size()) <=
              0.5 * static_cast<double>(n) + 4.0 * std::ceil(static_cast<double>(n) / 64.0) + 16.0);
        double ratio = 4.0 * static_cast<double>(n) / static_cast<double>(q.codes.size());
        CHECK(ratio > 8.0 * 0.98);
        CHECK(ratio < 8.0 * 1.02);
    }
}

TEST_CASE("quantized_linear_forward equals the two-step reference path") {
    RngState rng(14);
    auto w = Tensor::randn({24, 16}, rng, 0.0, 0.5, Precision::f32);
    auto x = Tensor::randn({16, 5}, rng, 0.0, 1.0, Precision::f32);
    auto q = quantize_nf4(w);
    auto fused = quantized_linear_forward(q, x);
    auto reference = matmul(bf16_round(dequantize(q)), x);
    REQUIRE(fused.shape() == reference.shape());
    for (std::size_t i = 0; i < fused.data().size(); ++i) {
        double denom = std::max(1.0, std::fabs(reference.data()[i]));
        CHECK(std::fabs(fused.data()[i] - reference.data()[i]) / denom < 1e-6);
    }
    auto bad = Tensor::zeros({7, 3});
    CHECK_THROWS_AS(quantized_linear_forward(q, bad), std::invalid_argument);
}

TEST_CASE("quantized blobs serialize with fixed field order and round-trip") {
    RngState rng(15);
    auto w = Tensor::randn({10, 9}, rng, 0.0, 1.0, Precision::f32);
    auto q = quantize_nf4(w);
    auto dir = std::filesystem::temp_directory_path() / "sarlv_nf4_test";
    std::filesystem::create_directories(dir);
    auto file = dir / "w.nf4";
    save_quantized(file, q);
    auto loaded = load_quantized(file);
    CHECK(loaded.shape == q.shape);
    CHECK(loaded.block_size == q.block_size);
    CHECK(loaded.absmax == q.absmax);
    CHECK(loaded.codes == q.codes);
}

TEST_CASE("nf4_base model still matches adapters-at-zero within quantization error") {
    auto vocab = peft_vocab();
    auto model = peft_model(vocab, 41);
    auto prompt = build_prompt(model.prompt_template(), "what?", std::nullopt, vocab);
    ForwardCtx ctx;
    auto img = image_for(3);
    auto before = model.forward(img, prompt, ctx);
    LoraConfig cfg;
    cfg.nf4_base = true;
    RngState rng(6);
    inject_lora(model, cfg, rng);
    auto after = model.forward(img, prompt, ctx);
    // quantization perturbs the weights, so outputs move but stay finite and close
    double max_diff = 0.0;
    for (std::size_t i = 0; i < after.data().size(); ++i) {
        CHECK(std::isfinite(after.data()[i]));
        max_diff = std::max(max_diff, std::fabs(after.data()[i] - before.data()[i]));
    }
    CHECK(max_diff > 0.0);
    CHECK(max_diff < 10.0);
}
