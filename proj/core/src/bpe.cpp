#include "sarlv/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace sarlv {

namespace {

bool is_ws(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

/// Chunk boundaries fall between a non-whitespace byte and the whitespace run
/// that follows, so every chunk is "[whitespace-run][word]" (or a bare run at
/// the text edges). Merges never cross chunks.
std::vector<std::string_view> pre_tokenize(std::string_view text) {
    std::vector<std::string_view> chunks;
    std::size_t start = 0;
    for (std::size_t i = 1; i < text.size(); ++i) {
        if (is_ws(static_cast<unsigned char>(text[i])) &&
            !is_ws(static_cast<unsigned char>(text[i - 1]))) {
            chunks.push_back(text.substr(start, i - start));
            start = i;
        }
    }
    if (start < text.size()) chunks.push_back(text.substr(start));
    return chunks;
}

std::uint64_t pair_key(std::int64_t a, std::int64_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

}  // namespace

struct VocabularyBuilder {
    static Vocabulary build(std::vector<std::string> tokens,
                            std::vector<std::pair<std::int64_t, std::int64_t>> merges,
                            std::vector<SpecialToken> specials, bool truncated) {
        Vocabulary v;
        v.tokens_ = std::move(tokens);
        v.merges_ = std::move(merges);
        v.specials_ = std::move(specials);
        v.truncated_ = truncated;
        for (std::size_t i = 0; i < v.merges_.size(); ++i) {
            v.rank_by_pair_[pair_key(v.merges_[i].first, v.merges_[i].second)] =
                static_cast<std::int64_t>(i);
        }
        return v;
    }
};

Vocabulary Vocabulary::train_bpe(const std::string& corpus, std::int64_t target_vocab_size) {
    if (corpus.empty()) throw std::invalid_argument("train_bpe: corpus is empty");
    if (target_vocab_size <= 256) {
        throw std::invalid_argument("train_bpe: target_vocab_size must exceed the byte alphabet (256)");
    }

    std::vector<std::string> tokens(256);
    for (int b = 0; b < 256; ++b) tokens[static_cast<std::size_t>(b)] = std::string(1, static_cast<char>(b));

    // Unique chunks with counts keep the merge loop small.
    std::map<std::string_view, std::int64_t> chunk_counts;
    for (auto c : pre_tokenize(corpus)) ++chunk_counts[c];
    struct Chunk {
        std::vector<std::int64_t> ids;
        std::int64_t count;
    };
    std::vector<Chunk> chunks;
    chunks.reserve(chunk_counts.size());
    for (const auto& [text, count] : chunk_counts) {
        Chunk c;
        c.count = count;
        c.ids.reserve(text.size());
        for (unsigned char b : text) c.ids.push_back(b);
        chunks.push_back(std::move(c));
    }

    std::vector<std::pair<std::int64_t, std::int64_t>> merges;
    bool truncated = false;
    while (static_cast<std::int64_t>(tokens.size()) < target_vocab_size) {
        // Count adjacent pairs; merging later applies left to right.
        std::unordered_map<std::uint64_t, std::int64_t> counts;
        for (const auto& chunk : chunks) {
            for (std::size_t i = 0; i + 1 < chunk.ids.size(); ++i) {
                counts[pair_key(chunk.ids[i], chunk.ids[i + 1])] += chunk.count;
            }
        }
        std::int64_t best_count = 0;
        std::int64_t best_l = -1, best_r = -1;
        for (const auto& [key, count] : counts) {
            auto l = static_cast<std::int64_t>(key >> 32);
            auto r = static_cast<std::int64_t>(key & 0xffffffffull);
            if (count > best_count) {
                best_count = count;
                best_l = l;
                best_r = r;
            } else if (count == best_count && count > 0) {
                // lexicographic tie-break on the byte strings
                const auto& cl = tokens[static_cast<std::size_t>(l)];
                const auto& cr = tokens[static_cast<std::size_t>(r)];
                const auto& bl = tokens[static_cast<std::size_t>(best_l)];
                const auto& br = tokens[static_cast<std::size_t>(best_r)];
                if (std::tie(cl, cr) < std::tie(bl, br)) {
                    best_l = l;
                    best_r = r;
                }
            }
        }
        if (best_count < 2) {  // no pair repeats
            truncated = true;
            break;
        }
        std::int64_t new_id = static_cast<std::int64_t>(tokens.size());
        tokens.push_back(tokens[static_cast<std::size_t>(best_l)] +
                         tokens[static_cast<std::size_t>(best_r)]);
        merges.emplace_back(best_l, best_r);
        for (auto& chunk : chunks) {
            auto& ids = chunk.ids;
            std::size_t w = 0;
            for (std::size_t i = 0; i < ids.size();) {
                if (i + 1 < ids.size() && ids[i] == best_l && ids[i + 1] == best_r) {
                    ids[w++] = new_id;
                    i += 2;
                } else {
                    ids[w++] = ids[i++];
                }
            }
            ids.resize(w);
        }
    }

    return VocabularyBuilder::build(std::move(tokens), std::move(merges), {}, truncated);
}

std::optional<std::int64_t> Vocabulary::special_id(std::string_view text) const {
    for (const auto& s : specials_) {
        if (s.text == text) return s.id;
    }
    return std::nullopt;
}

const std::string& Vocabulary::token_bytes(std::int64_t id) const {
    if (id >= 0 && id < base_size()) return tokens_[static_cast<std::size_t>(id)];
    std::int64_t si = id - base_size();
    if (si >= 0 && si < static_cast<std::int64_t>(specials_.size())) {
        return specials_[static_cast<std::size_t>(si)].text;
    }
    throw std::invalid_argument("unknown token id " + std::to_string(id));
}

std::optional<std::int64_t> Vocabulary::token_id(std::string_view bytes) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i] == bytes) return static_cast<std::int64_t>(i);
    }
    return std::nullopt;
}

std::optional<std::int64_t> Vocabulary::merge_rank(std::int64_t left, std::int64_t right) const {
    auto it = rank_by_pair_.find(pair_key(left, right));
    if (it == rank_by_pair_.end()) return std::nullopt;
    return it->second;
}

void Vocabulary::save_json(const std::filesystem::path& file) const {
    nlohmann::json j;
    j["sizes"] = {{"base", base_size()}, {"extended", extended_size()}};
    j["truncated"] = truncated_;
    nlohmann::json merges = nlohmann::json::array();
    for (const auto& [l, r] : merges_) merges.push_back({l, r});
    j["merges"] = std::move(merges);
    // Display-only escaped renderings; the loader rebuilds tokens from merges.
    nlohmann::json toks = nlohmann::json::array();
    for (std::size_t i = 256; i < tokens_.size(); ++i) {
        std::string display;
        for (unsigned char c : tokens_[i]) {
            if (c >= 0x20 && c < 0x7f && c != '\\') {
                display.push_back(static_cast<char>(c));
            } else {
                static const char* hexd = "0123456789abcdef";
                display += "\\x";
                display.push_back(hexd[c >> 4]);
                display.push_back(hexd[c & 0xf]);
            }
        }
        toks.push_back(display);
    }
    j["tokens"] = std::move(toks);
    nlohmann::json specials = nlohmann::json::array();
    for (const auto& s : specials_) specials.push_back({{"text", s.text}, {"id", s.id}});
    j["special_tokens"] = std::move(specials);
    std::ofstream out(file);
    if (!out) throw std::runtime_error("save_json: cannot open " + file.string());
    out << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("load_json: cannot open " + file.string());
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<std::string> tokens(256);
    for (int b = 0; b < 256; ++b) tokens[static_cast<std::size_t>(b)] = std::string(1, static_cast<char>(b));
    std::vector<std::pair<std::int64_t, std::int64_t>> merges;
    for (const auto& m : j.at("merges")) {
        std::int64_t l = m.at(0).get<std::int64_t>();
        std::int64_t r = m.at(1).get<std::int64_t>();
        if (l < 0 || r < 0 || l >= static_cast<std::int64_t>(tokens.size()) ||
            r >= static_cast<std::int64_t>(tokens.size())) {
            throw std::runtime_error("load_json: merge references unknown token id");
        }
        tokens.push_back(tokens[static_cast<std::size_t>(l)] + tokens[static_cast<std::size_t>(r)]);
        merges.emplace_back(l, r);
    }
    std::vector<SpecialToken> specials;
    for (const auto& s : j.at("special_tokens")) {
        specials.push_back({s.at("text").get<std::string>(), s.at("id").get<std::int64_t>()});
    }
    bool truncated = j.value("truncated", false);
    auto vocab = VocabularyBuilder::build(std::move(tokens), std::move(merges),
                                          std::move(specials), truncated);
    if (j.contains("sizes")) {
        auto base = j["sizes"].at("base").get<std::int64_t>();
        auto ext = j["sizes"].at("extended").get<std::int64_t>();
        if (base != vocab.base_size() || ext != vocab.extended_size()) {
            throw std::runtime_error("load_json: size fields disagree with merge/special lists");
        }
    }
    return vocab;
}

namespace {

/// BPE for one chunk: repeatedly merge the lowest-rank adjacent pair, left to
/// right, which reproduces applying merges in training order.
void bpe_chunk(const Vocabulary& vocab, std::string_view chunk, std::size_t base_offset,
               Encoding& out) {
    std::vector<std::int64_t> ids;
    std::vector<std::size_t> ends;  // byte end offset of each token within the chunk
    ids.reserve(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
        ids.push_back(static_cast<unsigned char>(chunk[i]));
        ends.push_back(i + 1);
    }
    while (ids.size() > 1) {
        std::int64_t best_rank = -1;
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            auto rank = vocab.merge_rank(ids[i], ids[i + 1]);
            if (rank && (best_rank < 0 || *rank < best_rank)) best_rank = *rank;
        }
        if (best_rank < 0) break;
        auto [l, r] = vocab.merges()[static_cast<std::size_t>(best_rank)];
        std::int64_t merged = 256 + best_rank;
        std::size_t w = 0;
        for (std::size_t i = 0; i < ids.size();) {
            if (i + 1 < ids.size() && ids[i] == l && ids[i + 1] == r) {
                ids[w] = merged;
                ends[w] = ends[i + 1];
                ++w;
                i += 2;
            } else {
                ids[w] = ids[i];
                ends[w] = ends[i];
                ++w;
                ++i;
            }
        }
        ids.resize(w);
        ends.resize(w);
    }
    std::size_t begin = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.ids.push_back(ids[i]);
        out.offsets.emplace_back(base_offset + begin, base_offset + ends[i]);
        begin = ends[i];
    }
}

void encode_plain(const Vocabulary& vocab, std::string_view span, std::size_t base_offset,
                  Encoding& out) {
    for (auto chunk : pre_tokenize(span)) {
        std::size_t off = static_cast<std::size_t>(chunk.data() - span.data());
        bpe_chunk(vocab, chunk, base_offset + off, out);
    }
}

}  // namespace

Encoding encode(const std::string& text, const Vocabulary& vocab) {
    Encoding out;
    if (text.empty()) return out;
    const auto& specials = vocab.special_tokens();
    std::size_t plain_start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const SpecialToken* hit = nullptr;
        for (const auto& s : specials) {
            if (s.text.empty() || s.text.size() > text.size() - i) continue;
            if (text.compare(i, s.text.size(), s.text) == 0) {
                if (!hit || s.text.size() > hit->text.size()) hit = &s;  // longest match wins
            }
        }
        if (hit) {
            if (plain_start < i) {
                encode_plain(vocab, std::string_view(text).substr(plain_start, i - plain_start),
                             plain_start, out);
            }
            out.ids.push_back(hit->id);
            out.offsets.emplace_back(i, i + hit->text.size());
            i += hit->text.size();
            plain_start = i;
        } else {
            ++i;
        }
    }
    if (plain_start < text.size()) {
        encode_plain(vocab, std::string_view(text).substr(plain_start), plain_start, out);
    }
    return out;
}

std::string decode(const std::vector<std::int64_t>& ids, const Vocabulary& vocab) {
    std::string out;
    for (auto id : ids) out += vocab.token_bytes(id);  // throws on unknown ids
    return out;
}

AddSpecialsResult add_special_tokens(const Vocabulary& vocab,
                                     const std::vector<std::string>& names) {
    if (names.empty()) throw std::invalid_argument("add_special_tokens: empty name list");
    std::vector<SpecialToken> specials = vocab.special_tokens();
    for (const auto& name : names) {
        if (name.empty()) throw std::invalid_argument("add_special_tokens: empty name");
        for (const auto& s : specials) {
            if (s.text == name) {
                throw std::invalid_argument("add_special_tokens: duplicate name \"" + name + "\"");
            }
        }
        specials.push_back({name, vocab.base_size() + static_cast<std::int64_t>(specials.size())});
    }
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(vocab.base_size()));
    for (std::int64_t id = 0; id < vocab.base_size(); ++id) tokens.push_back(vocab.token_bytes(id));
    auto merges = vocab.merges();
    auto next = VocabularyBuilder::build(std::move(tokens), std::move(merges), std::move(specials),
                                         vocab.truncated());
    std::int64_t rows = next.extended_size();
    return AddSpecialsResult{std::move(next), rows};
}

TokenizationReport tokenization_report(const std::string& text, const Vocabulary& vocab) {
    TokenizationReport report;
    auto enc = encode(text, vocab);
    report.ids = enc.ids;
    report.count = static_cast<std::int64_t>(enc.ids.size());
    static const char* hexd = "0123456789abcdef";
    for (auto id : enc.ids) {
        std::string display;
        for (unsigned char c : vocab.token_bytes(id)) {
            if (c >= 0x20 && c < 0x7f && c != '\\') {
                display.push_back(static_cast<char>(c));
            } else {
                display += "\\x";
                display.push_back(hexd[c >> 4]);
                display.push_back(hexd[c & 0xf]);
            }
        }
        report.token_display.push_back(std::move(display));
    }
    return report;
}

const std::vector<std::pair<std::string, int>>& reference_vocabularies() {
    static const std::vector<std::pair<std::string, int>> table = {
        {"GPT-2, GPT-3 r50k-base", 50257},
        {"GPT-3.5, GPT-4 cl100k-base", 100256},
        {"GPT-4o o200k-base", 199997},
        {"LLaMA-1, LLaMA-2", 32000},
        {"LLaMA-3", 128256},
        {"Mistral", 32000},
    };
    return table;
}

}  // namespace sarlv
