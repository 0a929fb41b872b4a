#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "sarlv/bpe.hpp"
#include "sarlv/rng.hpp"

using namespace sarlv;

TEST_CASE("training on 'aaaa' with target 257 learns the 'aa' merge") {
    auto vocab = Vocabulary::train_bpe("aaaa", 257);
    REQUIRE(vocab.merges().size() == 1);
    CHECK(vocab.token_bytes(256) == "aa");
    CHECK(vocab.base_size() == 257);
    // frequency-count oracle: (a,a) is the only repeating pair
    auto enc = encode("aaaa", vocab);
    CHECK(enc.ids == std::vector<std::int64_t>{256, 256});
}

TEST_CASE("target 256 is rejected; training is deterministic") {
    CHECK_THROWS_AS(Vocabulary::train_bpe("abc", 256), std::invalid_argument);
    CHECK_THROWS_AS(Vocabulary::train_bpe("", 300), std::invalid_argument);

    std::string corpus = "the quick brown fox jumps over the lazy dog the end";
    auto a = Vocabulary::train_bpe(corpus, 280);
    auto b = Vocabulary::train_bpe(corpus, 280);
    CHECK(a.merges() == b.merges());
}

TEST_CASE("unreachable target size returns a smaller vocabulary with the warning flag") {
    auto vocab = Vocabulary::train_bpe("abcdef", 400);  // nothing repeats
    CHECK(vocab.truncated());
    CHECK(vocab.base_size() == 256);
    auto grown = Vocabulary::train_bpe("ab ab ab", 400);  // few repeats, then dry
    CHECK(grown.truncated());
    CHECK(grown.base_size() < 400);
    CHECK(grown.base_size() > 256);
}

TEST_CASE("decode(encode(s)) round-trips 1000 random byte strings") {
    auto vocab = Vocabulary::train_bpe("hello world, this is a small training corpus. hello again!",
                                       300);
    RngState rng(4242);
    for (int trial = 0; trial < 1000; ++trial) {
        std::string s;
        auto len = rng.uniform_index(40);
        for (std::uint64_t i = 0; i < len; ++i) {
            s.push_back(static_cast<char>(rng.uniform_index(256)));
        }
        auto enc = encode(s, vocab);
        CHECK(decode(enc.ids, vocab) == s);
    }
}

TEST_CASE("round-trip holds for vehicle-style names with dashes and digits") {
    auto vocab = Vocabulary::train_bpe("some corpus text with words and 23 numbers 23 in it", 300);
    for (std::string s : {"ZSU-23-4", "BMP-2", "T-72 at 17\xc2\xb0 depression", "BTR-60/70"}) {
        auto enc = encode(s, vocab);
        CHECK(decode(enc.ids, vocab) == s);
    }
}

TEST_CASE("encode of empty text is empty") {
    auto vocab = Vocabulary::train_bpe("abab", 258);
    CHECK(encode("", vocab).ids.empty());
}

TEST_CASE("offsets are contiguous, non-overlapping, and cover the source") {
    auto vocab = Vocabulary::train_bpe("the cat sat on the mat; the cat sat again", 290);
    std::string text = "the cat sat on the mat";
    auto enc = encode(text, vocab);
    REQUIRE(!enc.offsets.empty());
    CHECK(enc.offsets.front().first == 0);
    CHECK(enc.offsets.back().second == text.size());
    for (std::size_t i = 1; i < enc.offsets.size(); ++i) {
        CHECK(enc.offsets[i].first == enc.offsets[i - 1].second);
    }
}

TEST_CASE("special tokens match greedily, never split, never absorb neighbors") {
    auto base = Vocabulary::train_bpe("plain text corpus for testing special tokens", 300);
    auto [vocab, rows] = add_special_tokens(base, {"<s>", "</s>", "[INST]"});
    CHECK(rows == vocab.extended_size());
    CHECK(vocab.extended_size() == vocab.base_size() + 3);

    auto enc = encode("<s>[INST] hi [INST]x</s>", vocab);
    CHECK(decode(enc.ids, vocab) == "<s>[INST] hi [INST]x</s>");
    int specials_seen = 0;
    for (auto id : enc.ids) specials_seen += id >= vocab.base_size();
    CHECK(specials_seen == 4);

    // neighbors stay ordinary tokens
    auto enc2 = encode("a[INST]b", vocab);
    REQUIRE(enc2.ids.size() == 3);
    CHECK(enc2.ids[0] == static_cast<std::int64_t>('a'));
    CHECK(enc2.ids[1] == *vocab.special_id("[INST]"));
    CHECK(enc2.ids[2] == static_cast<std::int64_t>('b'));
}

TEST_CASE("a name missing from the vocabulary splits until added as a special") {
    // toy vocabulary trained on text that never contains SLICY
    auto base = Vocabulary::train_bpe("the target in the scene is a static object on the ground",
                                      320);
    auto before = encode("SLICY", base);
    CHECK(before.ids.size() >= 2);
    auto [vocab, rows] = add_special_tokens(base, {"SLICY"});
    auto after = encode("SLICY", vocab);
    CHECK(after.ids.size() == 1);
    CHECK(after.ids[0] == *vocab.special_id("SLICY"));
    CHECK(rows == vocab.base_size() + 1);
}

TEST_CASE("add_special_tokens validates its inputs") {
    auto base = Vocabulary::train_bpe("aa bb aa bb", 300);
    CHECK_THROWS_AS(add_special_tokens(base, {}), std::invalid_argument);
    auto [vocab, rows] = add_special_tokens(base, {"ZSU-23-4"});
    (void)rows;
    CHECK_THROWS_AS(add_special_tokens(vocab, {"ZSU-23-4"}), std::invalid_argument);
    CHECK(encode("ZSU-23-4", vocab).ids.size() == 1);
}

TEST_CASE("adding the 11 class names grows the extended size by exactly 11") {
    auto base = Vocabulary::train_bpe("generic corpus without vehicle names", 300);
    std::vector<std::string> names = {"2S1",   "BMP-2", "BRDM-2", "BTR-60",   "BTR-70", "D7",
                                      "SLICY", "T-62",  "T-72",   "ZIL-131", "ZSU-23-4"};
    auto [vocab, rows] = add_special_tokens(base, names);
    CHECK(vocab.extended_size() == base.extended_size() + 11);
    CHECK(rows == vocab.extended_size());
}

TEST_CASE("tokenization_report is consistent with encode") {
    auto vocab = Vocabulary::train_bpe("a tiny corpus for the report test, repeated words words",
                                       300);
    std::string text = "report me words";
    auto report = tokenization_report(text, vocab);
    auto enc = encode(text, vocab);
    CHECK(report.count == static_cast<std::int64_t>(enc.ids.size()));
    CHECK(report.ids == enc.ids);
    CHECK(report.token_display.size() == enc.ids.size());

    auto empty = tokenization_report("", vocab);
    CHECK(empty.count == 0);
}

TEST_CASE("vocabulary JSON round-trips with stable content") {
    auto base = Vocabulary::train_bpe("json round trip corpus corpus corpus", 290);
    auto [vocab, rows] = add_special_tokens(base, {"<image>"});
    (void)rows;
    auto dir = std::filesystem::temp_directory_path() / "sarlv_bpe_test";
    std::filesystem::create_directories(dir);
    auto file = dir / "vocab.json";
    vocab.save_json(file);
    auto loaded = Vocabulary::load_json(file);
    CHECK(loaded.merges() == vocab.merges());
    CHECK(loaded.extended_size() == vocab.extended_size());
    CHECK(loaded.special_tokens().size() == 1);
    std::string text = "round trip corpus";
    CHECK(encode(text, loaded).ids == encode(text, vocab).ids);

    // byte-identical re-save (stable ordering for diffability)
    auto file2 = dir / "vocab2.json";
    loaded.save_json(file2);
    std::ifstream f1(file), f2(file2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("decode rejects unknown ids naming the offender") {
    auto vocab = Vocabulary::train_bpe("aaaa", 257);
    CHECK_THROWS_WITH_AS(decode({0, 9999}, vocab), doctest::Contains("9999"),
                         std::invalid_argument);
}

TEST_CASE("reference vocabulary sizes are metadata only") {
    const auto& refs = reference_vocabularies();
    REQUIRE(refs.size() == 6);
    CHECK(refs[0].second == 50257);
    bool has_mistral = false;
    for (const auto& [name, size] : refs) {
        if (name == "Mistral") {
            has_mistral = true;
            CHECK(size == 32000);
        }
    }
    CHECK(has_mistral);
}
