#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "molang/error.hpp"

namespace molang {

enum class Role { Source, Target };

struct TokenSequence {
    std::vector<long> ids;
    Role role = Role::Source;
};

// Id layout: specials [0, 105), text pieces [105, motion_base) ordered by
// (frequency desc, lexicographic), motion words [motion_base, |V|) with
// id(<motion_id_k>) = motion_base + k. Specials are <pad>, </s>, <unk>,
// </som>, </eom>, then <extra_id_0>..<extra_id_99>.
class UnifiedVocab {
public:
    static constexpr long kPad = 0;
    static constexpr long kEos = 1;
    static constexpr long kUnk = 2;
    static constexpr long kSom = 3;
    static constexpr long kEom = 4;
    static constexpr long kSentinelBase = 5;
    static constexpr long kSentinelCount = 100;
    static constexpr long kSpecialCount = kSentinelBase + kSentinelCount;

    long size() const { return static_cast<long>(tokens_.size()); }
    long motion_base() const { return motion_base_; }
    long motion_count() const { return size() - motion_base_; }
    long text_piece_count() const { return motion_base_ - kSpecialCount; }

    long extra_id(long i) const;                  // RangeError outside [0, 100)
    long motion_word(long k) const;               // RangeError outside [0, K_m)
    bool is_motion_word(long id) const { return id >= motion_base_ && id < size(); }
    bool is_sentinel(long id) const { return id >= kSentinelBase && id < kSentinelBase + kSentinelCount; }
    long motion_index(long id) const;             // inverse of motion_word
    const std::string& token(long id) const;      // RangeError outside [0, |V|)
    std::optional<long> lookup(const std::string& token) const;  // exact token string

    // Tokenization: lowercase, split on whitespace, isolate . , ! ? ' " as
    // single tokens. Unknown words map to <unk>; no </s> is appended.
    std::vector<std::string> tokenize(const std::string& text) const;
    TokenSequence encode_text(const std::string& text) const;
    // Joins token strings with single spaces, skipping <pad> and </s>.
    std::string decode_text(const std::vector<long>& ids) const;

    friend UnifiedVocab build_unified_vocab(const std::vector<std::string>& caption_corpus, long motion_count);
    friend UnifiedVocab vocab_from_tokens(std::vector<std::string> tokens, long motion_base);

private:
    std::vector<std::string> tokens_;
    std::map<std::string, long> index_;
    long motion_base_ = kSpecialCount;
};

// Deterministic id assignment; corpus must be non-empty and motion_count >= 1.
UnifiedVocab build_unified_vocab(const std::vector<std::string>& caption_corpus, long motion_count);

// Rebuilds a vocab from its serialized token list (one per line + sidecar).
UnifiedVocab vocab_from_tokens(std::vector<std::string> tokens, long motion_base);

// ["</som>"] + motion words + ["</eom>"]; ids must be in [0, K_m) and
// non-empty.
TokenSequence wrap_motion(const std::vector<long>& motion_ids, const UnifiedVocab& vocab);

// Inverse of wrap_motion; ContractError unless the sequence is exactly one
// well-formed motion segment.
std::vector<long> unwrap_motion(const TokenSequence& seq, const UnifiedVocab& vocab);

struct PromptBindings {
    std::optional<std::string> caption;
    std::optional<long> frames;
    std::optional<double> seconds;
    std::optional<std::vector<long>> motion_ids;   // codebook indices
    // Vocab-space ids spliced verbatim at the motion placeholder (already
    // including </som>/</eom> and any interior sentinel); takes precedence
    // over motion_ids. Used by in-between sources, whose motion segment
    // carries <extra_id_0> where the masked span was.
    std::optional<std::vector<long>> motion_segment;
};

// Fills [caption] / [frames] / [seconds] and the motion placeholder (both the
// "[motion]" and "<motion_tokens>" spellings); text runs through encode_text,
// the motion placeholder becomes an inline </som>..</eom> segment. A
// placeholder without a binding raises TemplateError naming it. [seconds] is
// rendered with one decimal place.
TokenSequence render_prompt(const std::string& template_text, const PromptBindings& bindings,
                            const UnifiedVocab& vocab);

struct Segment {
    enum class Kind { Text, Motion } kind = Kind::Text;
    std::string text;               // Kind::Text
    std::vector<long> motion_ids;   // Kind::Motion, codebook indices
};

// Splits at </som>/</eom> pairs. Generation-side repair: an unclosed </som>
// consumes to end of sequence, a stray </eom> is dropped, and non-motion ids
// inside a motion segment are skipped. <pad>/</s> are skipped in text without
// counting as repair. When `repair_count` is given it receives the number of
// repair events (0 = the sequence was structurally well-formed).
std::vector<Segment> decode_mixed(const std::vector<long>& ids, const UnifiedVocab& vocab,
                                  long* repair_count = nullptr);

// One token per line (line number = id); motion_base in a "<path>.json"
// sidecar. 64-bit FNV-1a over the token list, for checkpoint compatibility
// stamps.
void save_vocab(const std::string& path, const UnifiedVocab& vocab);
UnifiedVocab load_vocab(const std::string& path);
std::uint64_t vocab_hash(const UnifiedVocab& vocab);

}  // namespace molang
