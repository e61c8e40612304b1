#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "prosper/corpus.hpp"
#include "prosper/encoder.hpp"
#include "prosper/sparse.hpp"

namespace prosper {

enum class HeadMode {
    Prosper,    // last-pooling plus literal residual compensation
    SpladeMax,  // max-pooling over positions, no compensation
    NoLrn,      // last-pooling, no compensation
};

[[nodiscard]] std::optional<HeadMode> parse_head_mode(std::string_view s);
[[nodiscard]] std::string_view to_string(HeadMode m);

/// Vocabulary dims literally present in a sequence (unknown id excluded).
struct LiteralIndicator {
    std::vector<TermId> dims;  // sorted, unique

    static LiteralIndicator of(const TokenSeq &s);
    [[nodiscard]] bool contains(TermId t) const noexcept;
};

struct HeadOutput {
    SparseVec basic;
    std::vector<double> enhancement;  // empty unless mode is Prosper
    SparseVec final_rep;
};

/// log(1 + max(x, 0))
[[nodiscard]] double saturate(double x) noexcept;

[[nodiscard]] std::vector<double> last_pool(const Matrix &rows);
[[nodiscard]] std::vector<double> max_pool(const Matrix &rows);

/// basic + indicator * (max(enhancement) - enhancement). The max runs over
/// every dimension, not just the literal ones.
[[nodiscard]] std::vector<double> lrn_enhance(std::span<const double> basic, std::span<const double> enhancement,
                                              const LiteralIndicator &lit);

[[nodiscard]] HeadOutput encode(const ModelParams &p, const TokenSeq &s, HeadMode mode);

/// Forward state kept for backpropagation through the head.
struct HeadTrace {
    HeadMode mode = HeadMode::Prosper;
    EncoderOutput enc;
    LiteralIndicator lit;
    std::vector<double> basic;           // |V|
    std::vector<double> final_rep;       // |V|
    std::vector<double> enhancement;     // |V|, Prosper only
    std::vector<double> pooled_hidden;   // saturated last hidden row, Prosper only
    std::size_t enhancement_argmax = 0;  // lowest id attaining the max
    std::vector<std::size_t> pool_rows;  // source row of each basic coordinate
};

[[nodiscard]] HeadTrace encode_traced(const ModelParams &p, const TokenSeq &s, HeadMode mode);
[[nodiscard]] HeadOutput to_output(const HeadTrace &t);

/// Adds the gradient of <d_final, final> + <d_basic, basic> into `grads`.
/// Subgradient conventions: ReLU at 0 passes nothing, the max of the
/// enhancement vector routes to its lowest-id argmax, max-pooling to the
/// lowest row attaining the max.
void head_backward(const ModelParams &p, const TokenSeq &s, const HeadTrace &trace,
                   std::span<const double> d_final, std::span<const double> d_basic, GradientSet &grads);

}  // namespace prosper
