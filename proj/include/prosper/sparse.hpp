#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace prosper {

using TermId = std::uint32_t;

struct TermWeight {
    TermId term = 0;
    double weight = 0.0;

    friend bool operator==(const TermWeight &, const TermWeight &) = default;
};

/// Sparse vocabulary-space vector: entries sorted by term id, every stored
/// weight finite and strictly positive.
class SparseVec {
  public:
    SparseVec() = default;

    /// Sorts and validates; throws on duplicate terms or non-positive weights.
    static SparseVec from_entries(std::vector<TermWeight> entries);

    /// Keeps the strictly positive coordinates. Negative or non-finite input is
    /// rejected, exact zeros are dropped.
    static SparseVec from_dense(std::span<const double> dense);

    [[nodiscard]] std::span<const TermWeight> entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t nnz() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

    /// Weight of `term`, or 0 when absent.
    [[nodiscard]] double weight_of(TermId term) const noexcept;
    [[nodiscard]] bool contains(TermId term) const noexcept { return weight_of(term) > 0.0; }

    [[nodiscard]] std::vector<double> to_dense(std::size_t dim) const;

    friend bool operator==(const SparseVec &, const SparseVec &) = default;

  private:
    std::vector<TermWeight> entries_;
};

[[nodiscard]] double dot(const SparseVec &a, const SparseVec &b) noexcept;
[[nodiscard]] double l2_norm(const SparseVec &v) noexcept;
[[nodiscard]] double l1_norm(const SparseVec &v) noexcept;

/// Number of term ids present in both supports.
[[nodiscard]] std::size_t support_overlap(const SparseVec &a, const SparseVec &b) noexcept;

/// Keeps the `k` largest weights, ties broken by lower term id. Result is
/// sorted by term id.
[[nodiscard]] SparseVec top_k_by_weight(const SparseVec &v, std::size_t k);

}  // namespace prosper
