#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prosper/head.hpp"
#include "prosper/sparse.hpp"

namespace prosper {

/// query_id -> relevant doc ids (non-empty).
using Qrels = std::map<std::string, std::set<std::string>>;

struct RunEntry {
    std::string query_id;
    std::string doc_id;
    std::size_t rank = 0;  // 1-based
    double score = 0.0;
};

/// query_id -> doc ids ordered by rank.
using Run = std::map<std::string, std::vector<std::string>>;

/// `query_id \t doc_id` per line.
[[nodiscard]] Qrels read_qrels(const std::filesystem::path &path);
void write_qrels(const std::filesystem::path &path, const Qrels &qrels);

/// `query_id \t doc_id \t rank \t score`; rows of one query may appear in any
/// order, the rank field decides.
[[nodiscard]] Run read_run(const std::filesystem::path &path);
void write_run(const std::filesystem::path &path, std::span<const RunEntry> entries);
[[nodiscard]] std::string format_run(std::span<const RunEntry> entries);

// Every metric averages over the queries in `qrels`; a query that is missing
// from the run counts as a miss. A run query missing from qrels is an error.
[[nodiscard]] double hit_at_k(const Run &run, const Qrels &qrels, std::size_t k);
[[nodiscard]] double mrr_at_10(const Run &run, const Qrels &qrels);
[[nodiscard]] double recall_at_k(const Run &run, const Qrels &qrels, std::size_t k);

/// Mean support overlap over query/item pairs: every pair when there are at
/// most `max_pairs`, otherwise `max_pairs` pairs drawn with a seeded RNG.
[[nodiscard]] double flops_overlap(std::span<const SparseVec> queries, std::span<const SparseVec> items,
                                   std::uint64_t seed = 42, std::size_t max_pairs = 10000);

enum class MaskKeep { LiteralOnly, ExpansionOnly };

[[nodiscard]] SparseVec mask_terms(const SparseVec &vec, const LiteralIndicator &lit, MaskKeep keep);

struct MetricsReport {
    std::size_t num_queries = 0;
    std::size_t multi_relevant_queries = 0;  // hit@k assumes one relevant doc
    std::map<std::size_t, double> hit;       // k -> Hit@k
    double mrr10 = 0.0;
    std::map<std::size_t, double> recall;    // k -> Recall@k
    double flops_overlap = -1.0;             // negative when not computed

    /// (name, value) in display order, e.g. ("hit@10", 0.5). Names are
    /// lowercase; flops_overlap is listed only when computed.
    [[nodiscard]] std::vector<std::pair<std::string, double>> rows() const;

    /// `only` restricts the output to the named metrics (case-insensitive);
    /// an unknown name is an error.
    [[nodiscard]] std::string to_json(std::span<const std::string> only = {}) const;
    [[nodiscard]] std::string to_table(std::span<const std::string> only = {}) const;
};

/// Hit@{1,10,100,1000}, MRR@10 and Recall@{10,100,1000}.
[[nodiscard]] MetricsReport evaluate(const Run &run, const Qrels &qrels);

}  // namespace prosper
