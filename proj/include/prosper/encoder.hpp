#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "prosper/corpus.hpp"

namespace prosper {

inline constexpr std::size_t kDefaultHidden = 32;
inline constexpr std::size_t kDefaultVocabSize = 2000;

// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    [[nodiscard]] std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    double &at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    friend bool operator==(const Matrix &, const Matrix &) = default;
};

/// The seven trainable tensors, in model-file order. Shared by the parameter
/// set and its gradient.
struct ParamTensors {
    Matrix emb;                   // |V| x H token embeddings
    Matrix mix_w;                 // H x H
    std::vector<double> mix_b;    // H
    Matrix head;                  // |V| x H vocabulary projection
    std::vector<double> head_b;   // |V|
    Matrix lrn_w;                 // |V| x H literal-residual projection
    std::vector<double> lrn_b;    // |V|

    ParamTensors() = default;
    ParamTensors(std::size_t vocab_size, std::size_t hidden);

    [[nodiscard]] std::size_t vocab_size() const noexcept { return emb.rows; }
    [[nodiscard]] std::size_t hidden() const noexcept { return emb.cols; }

    /// Flat views of every tensor in file order.
    [[nodiscard]] std::vector<std::span<double>> tensors();
    [[nodiscard]] std::vector<std::span<const double>> tensors() const;

    [[nodiscard]] bool same_shape(const ParamTensors &other) const noexcept;
    [[nodiscard]] bool all_finite() const noexcept;
    void set_zero();

    friend bool operator==(const ParamTensors &, const ParamTensors &) = default;
};

struct ModelParams : ParamTensors {
    using ParamTensors::ParamTensors;

    /// Weights uniform in [-1/sqrt(H), 1/sqrt(H)], biases zero.
    static ModelParams init(std::size_t vocab_size, std::size_t hidden, std::uint64_t seed);

    /// Checks H >= 2, consistent shapes and finiteness.
    void validate() const;

    /// Binary little-endian model file ("PRSP"). Weights are stored as f32.
    void save(const std::filesystem::path &path) const;
    static ModelParams load(const std::filesystem::path &path);
    [[nodiscard]] std::string serialize() const;
    static ModelParams deserialize(std::string_view bytes, const std::string &what = "model");
};

struct GradientSet : ParamTensors {
    using ParamTensors::ParamTensors;

    static GradientSet zeros_like(const ParamTensors &p) { return GradientSet(p.vocab_size(), p.hidden()); }
    void add(const GradientSet &other);
};

struct EncoderOutput {
    Matrix hidden;  // N x H
    Matrix logits;  // N x |V|
};

/// Causal prefix-mean encoder: h_i = tanh(mix_w * mean(emb[t_1..t_i]) + mix_b),
/// logits_i = head * h_i + head_b.
[[nodiscard]] EncoderOutput forward(const ModelParams &p, const TokenSeq &s);

/// Upstream gradients with respect to an EncoderOutput; an empty matrix means
/// "all zero".
struct EncoderUpstream {
    Matrix hidden;
    Matrix logits;
};

/// Adds the gradient of <upstream, forward(p, s)> into `grads`, reusing the
/// cached forward output. Touches emb, mix_w, mix_b, head and head_b only.
void accumulate_backward(const ModelParams &p, const TokenSeq &s, const EncoderOutput &out,
                         const EncoderUpstream &upstream, GradientSet &grads);

[[nodiscard]] GradientSet backward(const ModelParams &p, const TokenSeq &s, const EncoderUpstream &upstream);

}  // namespace prosper
