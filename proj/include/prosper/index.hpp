#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prosper/sparse.hpp"

namespace prosper {

inline constexpr std::size_t kDefaultBlockSize = 64;

enum class Quantization : std::uint8_t { None = 0, Fixed16 = 1 };

[[nodiscard]] std::optional<Quantization> parse_quantization(std::string_view s);

/// Fixed-point 16-bit codes: weight ~= code * scale.
[[nodiscard]] std::uint16_t quantize(double weight, float scale) noexcept;
[[nodiscard]] double dequantize(std::uint16_t code, float scale) noexcept;

struct DocVector {
    std::string id;
    SparseVec vec;
};

/// Postings of one term, split into fixed-size blocks. Weights are the values
/// scoring actually uses (f32-rounded, or code * scale when quantized), so
/// block maxima bound exactly what the scorer sees.
struct PostingList {
    TermId term = 0;
    std::vector<std::uint32_t> docs;      // strictly increasing ordinals
    std::vector<double> weights;          // aligned with docs
    std::vector<std::uint16_t> codes;     // Fixed16 only, aligned with docs
    std::vector<double> block_max;        // per block
    std::vector<std::uint32_t> block_last;  // last ordinal of each block
    double term_max = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return docs.size(); }
    [[nodiscard]] std::size_t num_blocks() const noexcept { return block_max.size(); }

    friend bool operator==(const PostingList &, const PostingList &) = default;
};

class InvertedIndex {
  public:
    /// Ordinals follow input order. Throws on duplicate ids or stored weights
    /// that are not strictly positive.
    static InvertedIndex build(std::span<const DocVector> docs, std::size_t block_size = kDefaultBlockSize,
                               Quantization quant = Quantization::None);

    /// "PRIX" binary format; load validates block maxima and ordering and
    /// reports the failing byte offset.
    void save(const std::filesystem::path &path) const;
    static InvertedIndex load(const std::filesystem::path &path);
    [[nodiscard]] std::string serialize() const;
    static InvertedIndex deserialize(std::string_view bytes, const std::string &what = "index");

    [[nodiscard]] std::size_t num_docs() const noexcept { return doc_ids_.size(); }
    [[nodiscard]] std::size_t block_size() const noexcept { return block_size_; }
    [[nodiscard]] Quantization quantization() const noexcept { return quant_; }
    [[nodiscard]] float scale() const noexcept { return scale_; }
    [[nodiscard]] const std::string &doc_id(std::uint32_t ord) const { return doc_ids_.at(ord); }
    [[nodiscard]] std::span<const std::string> doc_ids() const noexcept { return doc_ids_; }
    [[nodiscard]] std::span<const PostingList> lists() const noexcept { return lists_; }

    /// Postings for `term`, or nullptr when no document contains it.
    [[nodiscard]] const PostingList *postings(TermId term) const noexcept;

    [[nodiscard]] std::size_t total_postings() const noexcept;

    friend bool operator==(const InvertedIndex &a, const InvertedIndex &b) {
        return a.doc_ids_ == b.doc_ids_ && a.block_size_ == b.block_size_ && a.quant_ == b.quant_ &&
               a.scale_ == b.scale_ && a.lists_ == b.lists_;
    }

  private:
    void finish_lists();  // block metadata + term lookup

    std::vector<std::string> doc_ids_;
    std::size_t block_size_ = kDefaultBlockSize;
    Quantization quant_ = Quantization::None;
    float scale_ = 0.0f;
    std::vector<PostingList> lists_;  // sorted by term
    std::vector<std::int32_t> lookup_;  // term -> index into lists_, -1 when absent
};

}  // namespace prosper
