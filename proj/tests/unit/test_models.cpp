#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "sarlv/checkpoint.hpp"
#include "sarlv/llvm_model.hpp"

using namespace sarlv;

namespace {

Vocabulary toy_vocab() {
    auto base = Vocabulary::train_bpe(
        "what vehicle is this? a tank, a truck, a target. describe the image.", 300);
    auto [vocab, rows] = add_special_tokens(
        base, {kBosToken, kEosToken, kInstOpenToken, kInstCloseToken, kImageToken});
    (void)rows;
    return vocab;
}

GrayImage random_image(RngState& rng, std::int64_t hw = 28) {
    auto img = make_image(hw, hw);
    for (auto& p : img.pixels) p = rng.uniform();
    return img;
}

LlvmModel toy_model(const Vocabulary& vocab, std::uint64_t seed = 7,
                    std::int64_t patch = 7, std::int64_t d_vision = 8,
                    std::int64_t d_model = 16) {
    RngState rng(seed);
    VisionEncoderConfig vc;
    vc.patch_size = patch;
    vc.d_vision = d_vision;
    vc.depth = 1;
    vc.heads = 2;
    vc.max_image_hw = 70;
    VisionEncoder vision(vc, rng);
    LanguageModelConfig lc;
    lc.vocab_size = vocab.extended_size();
    lc.d_model = d_model;
    lc.depth = 2;
    lc.heads = 2;
    lc.context_length = 128;
    LanguageModel lm(lc, rng);
    return assemble_llvm(std::move(vision), std::move(lm), rng);
}

}  // namespace

TEST_CASE("patchify counts: 128x128/14 -> 100, 14x14 -> 1, 336x336 -> 576") {
    auto a = patchify(make_image(128, 128), 14);
    CHECK(a.shape() == Shape{100, 196});
    auto b = patchify(make_image(14, 14), 14);
    CHECK(b.shape() == Shape{1, 196});
    auto c = patchify(make_image(336, 336), 14);
    CHECK(c.shape() == Shape{576, 196});
    CHECK_THROWS_AS(patchify(make_image(8, 8), 0), std::invalid_argument);
    CHECK_THROWS_AS(patchify(make_image(8, 8), -3), std::invalid_argument);
}

TEST_CASE("patchify zero-pads bottom/right and splits row-major") {
    auto img = make_image(3, 5);
    for (std::int64_t y = 0; y < 3; ++y)
        for (std::int64_t x = 0; x < 5; ++x) img.at(y, x) = static_cast<double>(10 * y + x);
    auto t = patchify(img, 2);  // ceil(3/2)*ceil(5/2) = 2*3 = 6 patches of 4
    REQUIRE(t.shape() == Shape{6, 4});
    // first patch: rows 0-1, cols 0-1
    CHECK(t.data()[0] == 0.0);
    CHECK(t.data()[1] == 1.0);
    CHECK(t.data()[2] == 10.0);
    CHECK(t.data()[3] == 11.0);
    // patch (0,2): cols 4 + padded col
    CHECK(t.data()[2 * 4 + 0] == 4.0);
    CHECK(t.data()[2 * 4 + 1] == 0.0);  // right padding
    // patch (1,0): row 2 + padded row
    CHECK(t.data()[3 * 4 + 0] == 20.0);
    CHECK(t.data()[3 * 4 + 2] == 0.0);  // bottom padding
}

TEST_CASE("encode_image is deterministic in eval mode with the right shape") {
    RngState rng(3);
    VisionEncoderConfig vc;
    vc.patch_size = 7;
    vc.d_vision = 8;
    vc.depth = 2;
    vc.heads = 2;
    vc.max_image_hw = 70;
    RngState init(11);
    VisionEncoder enc(vc, init);
    auto img = random_image(rng);
    ForwardCtx ctx;
    auto e1 = enc.encode(img, ctx);
    auto e2 = enc.encode(img, ctx);
    CHECK(e1.patches.shape() == Shape{16, 8});
    CHECK(e1.pooled.shape() == Shape{8});
    for (std::size_t i = 0; i < e1.patches.data().size(); ++i)
        CHECK(e1.patches.data()[i] == e2.patches.data()[i]);

    auto big = make_image(100, 100);
    CHECK_THROWS_AS(enc.encode(big, ctx), std::invalid_argument);
}

TEST_CASE("encode_image with zeroed position embeddings is permutation-equivariant") {
    VisionEncoderConfig vc;
    vc.patch_size = 4;
    vc.d_vision = 8;
    vc.depth = 1;
    vc.heads = 2;
    vc.max_image_hw = 16;
    RngState init(5);
    VisionEncoder enc(vc, init);
    enc.params().find("vision.pos_emb")->value.data().assign(
        enc.params().find("vision.pos_emb")->value.data().size(), 0.0);

    RngState rng(9);
    auto img = random_image(rng, 8);  // 2x2 grid of 4x4 patches
    ForwardCtx ctx;
    auto base = enc.encode(img, ctx);

    // swap the two top patches in pixel space
    auto swapped = img;
    for (std::int64_t y = 0; y < 4; ++y) {
        for (std::int64_t x = 0; x < 4; ++x) {
            std::swap(swapped.at(y, x), swapped.at(y, x + 4));
        }
    }
    auto perm = enc.encode(swapped, ctx);
    // patch sequence 0,1 swapped; 2,3 unchanged
    for (std::int64_t d = 0; d < 8; ++d) {
        CHECK(perm.patches.data()[static_cast<std::size_t>(d)] ==
              doctest::Approx(base.patches.data()[static_cast<std::size_t>(8 + d)]).epsilon(1e-12));
        CHECK(perm.patches.data()[static_cast<std::size_t>(8 + d)] ==
              doctest::Approx(base.patches.data()[static_cast<std::size_t>(d)]).epsilon(1e-12));
        CHECK(perm.patches.data()[static_cast<std::size_t>(16 + d)] ==
              doctest::Approx(base.patches.data()[static_cast<std::size_t>(16 + d)]).epsilon(1e-12));
    }
}

TEST_CASE("lm_forward causality: later tokens never affect earlier logits") {
    RngState init(13);
    LanguageModelConfig lc;
    lc.vocab_size = 300;
    lc.d_model = 16;
    lc.depth = 3;
    lc.heads = 4;
    lc.context_length = 32;
    LanguageModel lm(lc, init);
    ForwardCtx ctx;
    std::vector<std::int64_t> ids = {5, 17, 100, 216, 8, 33};
    auto logits = lm.forward(ids, ctx);
    CHECK(logits.shape() == Shape{6, 300});
    for (std::size_t j = 1; j < ids.size(); ++j) {
        auto mutated = ids;
        mutated[j] = (mutated[j] + 41) % 300;
        auto logits2 = lm.forward(mutated, ctx);
        for (std::size_t r = 0; r < j; ++r) {
            for (std::int64_t vcol = 0; vcol < 300; ++vcol) {
                REQUIRE(logits2.data()[r * 300 + static_cast<std::size_t>(vcol)] ==
                        logits.data()[r * 300 + static_cast<std::size_t>(vcol)]);
            }
        }
    }
}

TEST_CASE("context overflow is rejected naming the lengths") {
    RngState init(1);
    LanguageModelConfig lc;
    lc.vocab_size = 280;
    lc.d_model = 8;
    lc.depth = 1;
    lc.heads = 2;
    lc.context_length = 4;
    LanguageModel lm(lc, init);
    ForwardCtx ctx;
    std::vector<std::int64_t> ids = {1, 2, 3, 4, 5};
    CHECK_THROWS_WITH_AS(lm.forward(ids, ctx), doctest::Contains("4"), std::invalid_argument);
}

TEST_CASE("single-layer toy LM matches a hand-rolled attention oracle") {
    LanguageModelConfig lc;
    lc.vocab_size = 7;
    lc.d_model = 4;
    lc.depth = 1;
    lc.heads = 1;
    lc.context_length = 8;
    RngState init(21);
    LanguageModel lm(lc, init);
    lm.params().set_precision(Precision::f64);

    std::vector<std::int64_t> ids = {3, 0, 6, 2};
    ForwardCtx ctx;
    auto logits = lm.forward(ids, ctx);

    // Independent reimplementation with flat loops.
    auto P = [&](const char* name) { return lm.params().find(name)->value.data(); };
    auto vec = [&](const std::vector<double>& m, std::int64_t cols, std::int64_t r,
                   std::int64_t c) { return m[static_cast<std::size_t>(r * cols + c)]; };
    const std::int64_t n = 4, d = 4, V = 7;
    auto tok = P("lm.tok_emb");
    auto pos = P("lm.pos_emb");
    std::vector<double> x(static_cast<std::size_t>(n * d));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j)
            x[static_cast<std::size_t>(i * d + j)] = vec(tok, d, ids[static_cast<std::size_t>(i)], j) + vec(pos, d, i, j);

    auto layer_norm_row = [&](std::vector<double>& m, const std::vector<double>& g,
                              const std::vector<double>& b) {
        for (std::int64_t i = 0; i < n; ++i) {
            double mu = 0, var = 0;
            for (std::int64_t j = 0; j < d; ++j) mu += m[static_cast<std::size_t>(i * d + j)];
            mu /= static_cast<double>(d);
            for (std::int64_t j = 0; j < d; ++j) {
                double dv = m[static_cast<std::size_t>(i * d + j)] - mu;
                var += dv * dv;
            }
            var /= static_cast<double>(d);
            double inv = 1.0 / std::sqrt(var + 1e-5);
            for (std::int64_t j = 0; j < d; ++j) {
                auto& ref = m[static_cast<std::size_t>(i * d + j)];
                ref = (ref - mu) * inv * g[static_cast<std::size_t>(j)] + b[static_cast<std::size_t>(j)];
            }
        }
    };
    auto linear = [&](const std::vector<double>& in, std::int64_t rows, std::int64_t din,
                      std::int64_t dout, const std::vector<double>& w,
                      const std::vector<double>& b) {
        std::vector<double> out(static_cast<std::size_t>(rows * dout), 0.0);
        for (std::int64_t i = 0; i < rows; ++i)
            for (std::int64_t k = 0; k < din; ++k)
                for (std::int64_t j = 0; j < dout; ++j)
                    out[static_cast<std::size_t>(i * dout + j)] +=
                        in[static_cast<std::size_t>(i * din + k)] * vec(w, dout, k, j);
        for (std::int64_t i = 0; i < rows; ++i)
            for (std::int64_t j = 0; j < dout; ++j)
                out[static_cast<std::size_t>(i * dout + j)] += b[static_cast<std::size_t>(j)];
        return out;
    };

    // attention sublayer
    auto h = x;
    layer_norm_row(h, P("lm.blocks.0.ln1.gamma"), P("lm.blocks.0.ln1.beta"));
    auto Q = linear(h, n, d, d, P("lm.blocks.0.attn.q.weight"), P("lm.blocks.0.attn.q.bias"));
    auto K = linear(h, n, d, d, P("lm.blocks.0.attn.k.weight"), P("lm.blocks.0.attn.k.bias"));
    auto Vv = linear(h, n, d, d, P("lm.blocks.0.attn.v.weight"), P("lm.blocks.0.attn.v.bias"));
    std::vector<double> attn_out(static_cast<std::size_t>(n * d), 0.0);
    double scale_f = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::int64_t i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<std::size_t>(i + 1));
        double mx = -1e300;
        for (std::int64_t j = 0; j <= i; ++j) {
            double s = 0;
            for (std::int64_t kdim = 0; kdim < d; ++kdim)
                s += vec(Q, d, i, kdim) * vec(K, d, j, kdim);
            row[static_cast<std::size_t>(j)] = s * scale_f;
            mx = std::max(mx, row[static_cast<std::size_t>(j)]);
        }
        double denom = 0;
        for (std::int64_t j = 0; j <= i; ++j) denom += std::exp(row[static_cast<std::size_t>(j)] - mx);
        for (std::int64_t j = 0; j <= i; ++j) {
            double a = std::exp(row[static_cast<std::size_t>(j)] - mx) / denom;
            for (std::int64_t kdim = 0; kdim < d; ++kdim)
                attn_out[static_cast<std::size_t>(i * d + kdim)] += a * vec(Vv, d, j, kdim);
        }
    }
    auto proj = linear(attn_out, n, d, d, P("lm.blocks.0.attn.o.weight"), P("lm.blocks.0.attn.o.bias"));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

    // mlp sublayer
    auto h2 = x;
    layer_norm_row(h2, P("lm.blocks.0.ln2.gamma"), P("lm.blocks.0.ln2.beta"));
    auto up = linear(h2, n, d, 4 * d, P("lm.blocks.0.mlp_in.weight"), P("lm.blocks.0.mlp_in.bias"));
    for (auto& v : up) v = 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244));
    auto down = linear(up, n, 4 * d, d, P("lm.blocks.0.mlp_out.weight"), P("lm.blocks.0.mlp_out.bias"));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += down[i];

    layer_norm_row(x, P("lm.final_ln.gamma"), P("lm.final_ln.beta"));
    auto expected = linear(x, n, d, V, P("lm.head.weight"), P("lm.head.bias"));

    REQUIRE(logits.shape() == Shape{n, V});
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(std::fabs(logits.data()[i] - expected[i]) < 1e-10);
    }
}

TEST_CASE("causal mask does not leak through the attention softmax") {
    // with causal masking, the first row of the mask admits only position 0
    auto m = causal_mask(3);
    CHECK(m.data()[0] == 0.0);
    CHECK(m.data()[1] == -1e30);
    auto s = softmax(add(Tensor::zeros({3, 3}, Precision::f64), m), -1);
    CHECK(s.data()[0] == 1.0);
    CHECK(s.data()[1] == 0.0);
    CHECK(s.data()[2] == 0.0);
}

TEST_CASE("build_prompt layout, mask, and round-trip") {
    auto vocab = toy_vocab();
    auto prompt = build_prompt("<image> {question}", "What vehicle is this?", "a tank", vocab);

    CHECK(prompt.ids[0] == *vocab.special_id(kBosToken));
    CHECK(prompt.ids[1] == *vocab.special_id(kInstOpenToken));
    CHECK(prompt.image_index == 2);
    CHECK(prompt.ids[2] == *vocab.special_id(kImageToken));
    CHECK(prompt.ids.back() == *vocab.special_id(kEosToken));

    // mask covers answer tokens plus EOS
    std::int64_t mask_sum = 0;
    for (int m : prompt.loss_mask) mask_sum += m;
    std::int64_t answer_tokens = static_cast<std::int64_t>(encode("a tank", vocab).ids.size());
    CHECK(mask_sum == answer_tokens + 1);

    // decoding the unmasked answer span reproduces the answer text
    std::vector<std::int64_t> answer_ids(prompt.ids.begin() + prompt.answer_begin,
                                         prompt.ids.begin() + prompt.answer_end - 1);
    CHECK(decode(answer_ids, vocab) == "a tank");

    // [/INST] immediately precedes the answer
    CHECK(prompt.ids[static_cast<std::size_t>(prompt.answer_begin - 1)] ==
          *vocab.special_id(kInstCloseToken));
}

TEST_CASE("build_prompt without an answer yields an all-zero mask ending at [/INST]") {
    auto vocab = toy_vocab();
    auto prompt = build_prompt("<image> {question}", "Describe the image.", std::nullopt, vocab);
    for (int m : prompt.loss_mask) CHECK(m == 0);
    CHECK(prompt.ids.back() == *vocab.special_id(kInstCloseToken));
    CHECK(prompt.answer_begin == -1);
}

TEST_CASE("build_prompt rejects templates without exactly one placeholder") {
    auto vocab = toy_vocab();
    CHECK_THROWS_AS(build_prompt("{question}", "q", std::nullopt, vocab), std::invalid_argument);
    CHECK_THROWS_AS(build_prompt("<image> <image> {question}", "q", std::nullopt, vocab),
                    std::invalid_argument);
}

TEST_CASE("assembly: parameter count is additive over components") {
    auto vocab = toy_vocab();
    RngState rng(31);
    VisionEncoderConfig vc;
    vc.patch_size = 7;
    vc.d_vision = 8;
    vc.depth = 1;
    vc.heads = 2;
    vc.max_image_hw = 28;
    VisionEncoder vision(vc, rng);
    LanguageModelConfig lc;
    lc.vocab_size = vocab.extended_size();
    lc.d_model = 16;
    lc.depth = 2;
    lc.heads = 2;
    lc.context_length = 64;
    LanguageModel lm(lc, rng);
    std::int64_t vision_count = 0, lm_count = 0;
    for (const auto& p : vision.params().items()) vision_count += p->value.size();
    for (const auto& p : lm.params().items()) lm_count += p->value.size();
    auto model = assemble_llvm(std::move(vision), std::move(lm), rng);
    std::int64_t total = 0;
    for (const auto& p : model.params().items()) total += p->value.size();
    CHECK(total == vision_count + lm_count + (8 * 16 + 16));
}

TEST_CASE("assembly rejects a projector that does not bridge the dimensions") {
    auto vocab = toy_vocab();
    RngState rng(33);
    VisionEncoderConfig vc;
    vc.patch_size = 7;
    vc.d_vision = 8;
    vc.depth = 1;
    vc.heads = 1;
    VisionEncoder vision(vc, rng);
    LanguageModelConfig lc;
    lc.vocab_size = vocab.extended_size();
    lc.d_model = 16;
    lc.depth = 1;
    lc.heads = 1;
    LanguageModel lm(lc, rng);
    CHECK_THROWS_AS(
        assemble_llvm(std::move(vision), Tensor::zeros({8, 12}), Tensor::zeros({12}),
                      std::move(lm), "<image>"),
        std::invalid_argument);
}

TEST_CASE("zero projector makes logits independent of image content") {
    auto vocab = toy_vocab();
    RngState rng(35);
    VisionEncoderConfig vc;
    vc.patch_size = 7;
    vc.d_vision = 8;
    vc.depth = 1;
    vc.heads = 2;
    vc.max_image_hw = 28;
    VisionEncoder vision(vc, rng);
    LanguageModelConfig lc;
    lc.vocab_size = vocab.extended_size();
    lc.d_model = 16;
    lc.depth = 1;
    lc.heads = 2;
    lc.context_length = 64;
    LanguageModel lm(lc, rng);
    auto model = assemble_llvm(std::move(vision), Tensor::zeros({8, 16}), Tensor::zeros({16}),
                               std::move(lm), "<image> {question}");
    auto prompt = build_prompt(model.prompt_template(), "what is this?", std::nullopt, vocab);
    ForwardCtx ctx;
    RngState ir(1);
    auto img1 = random_image(ir, 14);
    auto img2 = random_image(ir, 14);
    auto l1 = model.forward(img1, prompt, ctx);
    auto l2 = model.forward(img2, prompt, ctx);
    REQUIRE(l1.size() == l2.size());
    for (std::size_t i = 0; i < l1.data().size(); ++i) CHECK(l1.data()[i] == l2.data()[i]);
}

TEST_CASE("checkpoint save/load restores identical forward outputs") {
    auto vocab = toy_vocab();
    auto model = toy_model(vocab);
    auto dir = std::filesystem::temp_directory_path() / "sarlv_ckpt_test";
    std::filesystem::remove_all(dir);
    save_checkpoint(dir, model, vocab, std::nullopt);

    auto loaded = load_checkpoint(dir);
    CHECK(loaded.vocab.extended_size() == vocab.extended_size());

    RngState ir(2);
    auto img = random_image(ir);
    auto prompt = build_prompt(model.prompt_template(), "what vehicle is this?", std::nullopt,
                               vocab);
    ForwardCtx ctx;
    auto a = model.forward(img, prompt, ctx);
    auto b = loaded.model.forward(img, prompt, ctx);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("checkpoint manifest detects tampering") {
    auto vocab = toy_vocab();
    auto model = toy_model(vocab, 11);
    auto dir = std::filesystem::temp_directory_path() / "sarlv_ckpt_tamper";
    std::filesystem::remove_all(dir);
    save_checkpoint(dir, model, vocab, std::nullopt);
    // flip one payload byte
    auto victim = dir / "params" / "projector.bias.bin";
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    REQUIRE(f.good());
    char c;
    f.read(&c, 1);
    f.seekp(0);
    c = static_cast<char>(c ^ 0x40);
    f.write(&c, 1);
    f.close();
    CHECK_THROWS_AS(load_checkpoint(dir), std::runtime_error);
}
