#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sarlv {

struct SpecialToken {
    std::string text;
    std::int64_t id;
};

/// Byte-level BPE vocabulary. Ids 0..255 are the byte alphabet, each merge
/// appends one id, and special tokens occupy [base_size, extended_size).
/// Immutable after construction; encode/decode are safe to call concurrently.
class Vocabulary {
public:
    /// Greedy highest-frequency merges until `target_vocab_size` total tokens
    /// or no adjacent pair repeats. Ties break lexicographically, so training
    /// is deterministic. Merges never cross whitespace-attached chunk
    /// boundaries (a chunk is a run of whitespace plus the word after it).
    static Vocabulary train_bpe(const std::string& corpus, std::int64_t target_vocab_size);

    static Vocabulary load_json(const std::filesystem::path& file);
    void save_json(const std::filesystem::path& file) const;

    std::int64_t base_size() const { return static_cast<std::int64_t>(tokens_.size()); }
    std::int64_t extended_size() const {
        return base_size() + static_cast<std::int64_t>(specials_.size());
    }
    /// Set when training stopped early because no pair repeated.
    bool truncated() const { return truncated_; }

    const std::vector<std::pair<std::int64_t, std::int64_t>>& merges() const { return merges_; }
    const std::vector<SpecialToken>& special_tokens() const { return specials_; }
    std::optional<std::int64_t> special_id(std::string_view text) const;
    /// Byte string for any id in [0, extended_size); throws on unknown ids.
    const std::string& token_bytes(std::int64_t id) const;
    std::optional<std::int64_t> token_id(std::string_view bytes) const;
    /// Merge rank for an adjacent id pair, if one exists.
    std::optional<std::int64_t> merge_rank(std::int64_t left, std::int64_t right) const;

    friend struct VocabularyBuilder;

private:
    std::vector<std::string> tokens_;  // id -> bytes, base region
    std::vector<std::pair<std::int64_t, std::int64_t>> merges_;
    std::vector<SpecialToken> specials_;
    std::unordered_map<std::uint64_t, std::int64_t> rank_by_pair_;
    bool truncated_ = false;
};

struct Encoding {
    std::vector<std::int64_t> ids;
    /// Per-token [begin, end) byte spans into the source text; contiguous,
    /// non-overlapping, covering the whole source.
    std::vector<std::pair<std::size_t, std::size_t>> offsets;
};

/// Special-token strings match greedily first and never split; remaining
/// spans go through BPE with merges applied in training order.
Encoding encode(const std::string& text, const Vocabulary& vocab);

/// Exact inverse of encode; throws naming the first unknown id.
std::string decode(const std::vector<std::int64_t>& ids, const Vocabulary& vocab);

struct AddSpecialsResult {
    Vocabulary vocab;
    /// Embedding tables must grow to at least this many rows.
    std::int64_t embedding_rows_required;
};

AddSpecialsResult add_special_tokens(const Vocabulary& vocab,
                                     const std::vector<std::string>& names);

struct TokenizationReport {
    std::int64_t count = 0;
    std::vector<std::int64_t> ids;
    /// Printable rendering of each token (non-ASCII bytes escaped as \xNN).
    std::vector<std::string> token_display;
};

TokenizationReport tokenization_report(const std::string& text, const Vocabulary& vocab);

/// Published vocabulary sizes of well-known external tokenizers. Reference
/// metadata only; nothing in the pipeline computes with these.
const std::vector<std::pair<std::string, int>>& reference_vocabularies();

}  // namespace sarlv
