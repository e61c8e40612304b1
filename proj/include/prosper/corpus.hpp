#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prosper/sparse.hpp"

namespace prosper {

inline constexpr std::size_t kDefaultMaxLen = 64;

/// Dense term-id table. Id 0 is reserved for unknown tokens.
class Vocab {
  public:
    static constexpr TermId kUnknown = 0;
    static constexpr std::string_view kUnknownTerm = "[UNK]";

    /// Unknown id plus the (max_size - 1) most frequent lowercase
    /// whitespace tokens, ties broken lexicographically.
    static Vocab build(std::span<const std::string> texts, std::size_t max_size);

    /// `terms[0]` must be the unknown marker; remaining terms must be unique.
    static Vocab from_terms(std::vector<std::string> terms);

    static Vocab load(const std::filesystem::path &path);
    void save(const std::filesystem::path &path) const;

    [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
    [[nodiscard]] const std::vector<std::string> &terms() const noexcept { return terms_; }
    [[nodiscard]] const std::string &term(TermId id) const;

    /// Exact-match lookup; unknown strings map to kUnknown.
    [[nodiscard]] TermId id_of(std::string_view term) const;

    friend bool operator==(const Vocab &a, const Vocab &b) { return a.terms_ == b.terms_; }

  private:
    std::vector<std::string> terms_;
    std::unordered_map<std::string, TermId> ids_;
};

struct TokenSeq {
    std::vector<TermId> ids;

    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
    friend bool operator==(const TokenSeq &, const TokenSeq &) = default;
};

/// Lowercased whitespace tokens of `text`.
[[nodiscard]] std::vector<std::string> normalize_tokens(std::string_view text);

/// Whitespace tokenization against `vocab`, keeping the first `max_len` ids.
[[nodiscard]] TokenSeq tokenize(const Vocab &vocab, std::string_view text, std::size_t max_len = kDefaultMaxLen);

struct TextRecord {
    std::string id;
    std::string text;

    friend bool operator==(const TextRecord &, const TextRecord &) = default;
};

struct RawPair {
    std::string query_id;
    std::string query_text;
    std::string item_id;
    std::string item_text;

    friend bool operator==(const RawPair &, const RawPair &) = default;
};

struct PairRecord {
    TokenSeq query;
    TokenSeq item;
    std::string query_id;
    std::string item_id;
};

using PairSet = std::vector<PairRecord>;

/// Four-column TSV: query_id, query_text, item_id, item_text.
[[nodiscard]] std::vector<RawPair> read_pairs_tsv(const std::filesystem::path &path);
void write_pairs_tsv(const std::filesystem::path &path, std::span<const RawPair> pairs);

[[nodiscard]] PairSet load_pairs(const std::filesystem::path &path, const Vocab &vocab,
                                 std::size_t max_len = kDefaultMaxLen);
[[nodiscard]] PairSet tokenize_pairs(std::span<const RawPair> pairs, const Vocab &vocab,
                                     std::size_t max_len = kDefaultMaxLen);

/// One JSON object per line with string fields "id" and "text".
[[nodiscard]] std::vector<TextRecord> read_corpus_jsonl(const std::filesystem::path &path);
void write_corpus_jsonl(const std::filesystem::path &path, std::span<const TextRecord> records);

}  // namespace prosper
