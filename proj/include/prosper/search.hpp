#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prosper/corpus.hpp"
#include "prosper/index.hpp"
#include "prosper/sparse.hpp"

namespace prosper {

inline constexpr std::size_t kDefaultQueryTerms = 16;
inline constexpr std::size_t kDefaultTopK = 1000;

/// Serving-side query: strictly positive f32 weights sorted by term id.
struct QueryVec {
    std::vector<TermId> terms;
    std::vector<float> weights;

    [[nodiscard]] std::size_t size() const noexcept { return terms.size(); }
    friend bool operator==(const QueryVec &, const QueryVec &) = default;
};

/// Keeps the m heaviest entries (ties: lower term id) and rounds weights to
/// f32. Entries whose f32 weight underflows to zero are dropped.
[[nodiscard]] QueryVec truncate_query(const SparseVec &w, std::size_t m = kDefaultQueryTerms);

/// Multiplies every weight by alpha (> 0).
[[nodiscard]] QueryVec scale_query(const QueryVec &q, float alpha);

struct ScoredDoc {
    std::uint32_t ord = 0;
    double score = 0.0;

    friend bool operator==(const ScoredDoc &, const ScoredDoc &) = default;
};

/// At most k documents with positive score, by descending score then
/// ascending ordinal.
struct SearchResult {
    std::vector<ScoredDoc> hits;

    friend bool operator==(const SearchResult &, const SearchResult &) = default;
};

struct SearchStats {
    std::size_t docs_scored = 0;     // candidates fully evaluated
    std::size_t docs_pruned = 0;     // candidates rejected by an upper bound
    std::size_t blocks_skipped = 0;  // posting blocks jumped over without decoding
};

/// Term-at-a-time scoring of every matching document. Reference oracle.
[[nodiscard]] SearchResult search_exhaustive(const InvertedIndex &idx, const QueryVec &q, std::size_t k);

/// Document-at-a-time Block-Max Maxscore with safe pruning; returns exactly
/// what search_exhaustive returns, scores included.
[[nodiscard]] SearchResult search_bmm(const InvertedIndex &idx, const QueryVec &q, std::size_t k,
                                      SearchStats *stats = nullptr);

enum class Engine { Bmm, Exhaustive, Bm25 };

[[nodiscard]] std::optional<Engine> parse_engine(std::string_view s);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    double delta = 0.25;
};

/// Corpus statistics for lower-bounded BM25 over vocabulary ids. The unknown
/// id is never indexed but counts toward document length.
class Bm25Stats {
  public:
    static Bm25Stats build(std::span<const TokenSeq> docs, Bm25Params params = {});

    [[nodiscard]] std::size_t num_docs() const noexcept { return doc_len_.size(); }
    [[nodiscard]] double avgdl() const noexcept { return avgdl_; }
    [[nodiscard]] double doc_length(std::size_t doc) const { return doc_len_.at(doc); }
    [[nodiscard]] std::size_t df(TermId t) const noexcept { return t < df_.size() ? df_[t] : 0; }
    [[nodiscard]] std::size_t tf(std::size_t doc, TermId t) const;
    [[nodiscard]] const Bm25Params &params() const noexcept { return params_; }

    /// ln((N - df + 0.5) / (df + 0.5) + 1)
    [[nodiscard]] double idf(TermId t) const noexcept;

    /// idf * (tf (k1 + 1) / (tf + k1 (1 - b + b dl / avgdl)) + delta) for tf >= 1.
    [[nodiscard]] double term_weight(TermId t, std::size_t tf, double dl) const noexcept;

    /// Per-term weights of one document, for indexing.
    [[nodiscard]] SparseVec doc_vector(std::size_t doc) const;

  private:
    Bm25Params params_;
    std::vector<std::vector<std::pair<TermId, std::uint32_t>>> doc_tf_;
    std::vector<std::uint32_t> df_;
    std::vector<double> doc_len_;
    double avgdl_ = 0.0;
};

/// Sum over query tokens (repeats counted) of the term weight in `doc`;
/// tokens absent from the document contribute nothing.
[[nodiscard]] double bm25_score(const Bm25Stats &stats, std::span<const TermId> query, std::size_t doc);

[[nodiscard]] InvertedIndex build_bm25_index(const Bm25Stats &stats, std::span<const std::string> doc_ids,
                                             std::size_t block_size = kDefaultBlockSize);

/// Query-token multiplicities as weights (unknown id dropped).
[[nodiscard]] QueryVec bm25_query(const TokenSeq &q);

}  // namespace prosper
