#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prosper/corpus.hpp"
#include "prosper/encoder.hpp"
#include "prosper/head.hpp"
#include "prosper/sparse.hpp"

namespace prosper {

enum class NormMode {
    QNorm,    // l2 on the query side only
    AllNorm,  // cosine
    NoNorm,   // plain dot product
    DNorm,    // l2 on the item side only
    L1QNorm,  // l1 on the query side only
};

[[nodiscard]] std::optional<NormMode> parse_norm_mode(std::string_view s);
[[nodiscard]] std::string_view to_string(NormMode m);

struct WindowSchedule {
    bool dynamic = false;
    std::vector<std::size_t> query_sizes{256, 128, 64};
    std::vector<std::size_t> item_sizes{512, 256, 128};
    double threshold = 0.9;

    friend bool operator==(const WindowSchedule &, const WindowSchedule &) = default;
};

struct TrainConfig {
    std::size_t k_q = 256;
    std::size_t k_d = 512;
    double lambda_q = 5e-3;
    double lambda_d = 1e-3;
    std::size_t warmup_steps_flops = 100;
    std::size_t warmup_steps_lr = 50;
    double lr = 3e-5;
    double weight_decay = 0.1;
    std::size_t batch_size = 64;
    std::size_t epochs = 5;
    std::uint64_t seed = 42;
    NormMode norm_mode = NormMode::QNorm;
    WindowSchedule window_schedule;

    void validate() const;

    /// Flat `key=value` lines; blank lines and `#` comments are ignored,
    /// unknown keys are errors. Unspecified keys keep their defaults.
    static TrainConfig parse(std::string_view text, const std::string &what = "config");
    static TrainConfig load(const std::filesystem::path &path);
    /// Applies one `key=value` assignment.
    void set(std::string_view key, std::string_view value);
    [[nodiscard]] std::string to_text() const;

    friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

/// Keeps the k largest weights when nnz(w) > k (ties: lower term id wins),
/// otherwise returns w unchanged.
[[nodiscard]] SparseVec conditional_topk(const SparseVec &w, std::size_t k);

[[nodiscard]] double similarity_lfw(const SparseVec &wq, const SparseVec &wd, const TrainConfig &cfg);

struct BatchReps {
    std::vector<HeadOutput> queries;
    std::vector<HeadOutput> items;
};

/// Mean over queries of -log softmax_i(s_ii) with the other queries'
/// positives as negatives.
[[nodiscard]] double infonce_lfw(const BatchReps &batch, const TrainConfig &cfg);

/// Sum over terms of the squared mean activation across `reps`.
[[nodiscard]] double flops_loss(std::span<const SparseVec> reps);

/// target * min(1, step / warmup)^2; a zero warmup means no ramp.
[[nodiscard]] double flops_weight(double target, std::size_t step, std::size_t warmup);

/// Linear warm-up of the learning rate over the first `warmup` updates.
[[nodiscard]] double learning_rate(double target, std::size_t step, std::size_t warmup);

struct LossBreakdown {
    double total = 0.0;
    double rank = 0.0;
    double flops_q = 0.0;  // unweighted regularizer values
    double flops_d = 0.0;
    double lambda_q = 0.0;  // weights in effect at this step
    double lambda_d = 0.0;
};

[[nodiscard]] LossBreakdown total_loss(const BatchReps &batch, const TrainConfig &cfg, std::size_t step);

/// Advances a side to its next smaller listed size when more than
/// `threshold` of the batch sits below the current size. Never grows.
[[nodiscard]] std::pair<std::size_t, std::size_t> dynamic_window_update(double frac_q_below, double frac_d_below,
                                                                        const TrainConfig &cfg,
                                                                        std::pair<std::size_t, std::size_t> current);

struct BatchEvaluation {
    LossBreakdown loss;
    double nnz_q_mean = 0.0;  // basic representations
    double nnz_d_mean = 0.0;
    std::size_t max_nnz_q_kept = 0;  // largest support entering similarity
    std::size_t max_nnz_d_kept = 0;
    double frac_q_below_window = 0.0;  // final representations with nnz < k_q
    double frac_d_below_window = 0.0;
    /// Hash of every discrete choice made in the forward pass (ReLU supports,
    /// window selections, argmaxes). Equal hashes mean the loss is locally
    /// smooth between the two evaluations.
    std::uint64_t structure = 0;
};

/// Full forward pass over one batch of pairs and, when `grads` is non-null,
/// the accumulated gradient of the total loss. Gradient reduction order is
/// fixed and independent of `threads`.
[[nodiscard]] BatchEvaluation evaluate_batch(const ModelParams &p, std::span<const PairRecord> batch,
                                             const TrainConfig &cfg, HeadMode mode, std::size_t step,
                                             GradientSet *grads, unsigned threads = 1);

/// Decoupled-weight-decay adaptive-moment optimizer.
class AdamW {
  public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    explicit AdamW(const ParamTensors &shape);

    void update(ModelParams &p, const GradientSet &g, double lr, double weight_decay);

  private:
    GradientSet m_;
    GradientSet v_;
    std::size_t t_ = 0;
};

struct StepMetrics {
    std::size_t step = 0;  // 1-based count of completed updates
    LossBreakdown loss;
    double nnz_q_mean = 0.0;
    double nnz_d_mean = 0.0;
    std::size_t k_q = 0;
    std::size_t k_d = 0;
};

/// One JSON object: step, loss, rank_loss, flops_q, flops_d, nnz_q_mean,
/// nnz_d_mean, k_q, k_d.
[[nodiscard]] std::string to_json_line(const StepMetrics &m);

class Trainer {
  public:
    Trainer(ModelParams &params, TrainConfig cfg, HeadMode mode = HeadMode::Prosper, unsigned threads = 1);

    /// Encodes, differentiates and applies one optimizer update.
    StepMetrics train_step(std::span<const PairRecord> batch);

    /// Runs cfg.epochs passes over seeded shuffles of `pairs`. A trailing batch
    /// with fewer than two pairs is dropped. A non-zero `max_steps` stops
    /// training once that many updates have been made.
    void fit(const PairSet &pairs, const std::function<void(const StepMetrics &)> &on_step = {},
             std::size_t max_steps = 0);

    [[nodiscard]] std::size_t steps_done() const noexcept { return step_; }
    [[nodiscard]] std::pair<std::size_t, std::size_t> windows() const noexcept { return {cfg_.k_q, cfg_.k_d}; }

  private:
    ModelParams &params_;
    TrainConfig cfg_;  // k_q / k_d track the live window sizes
    HeadMode mode_;
    unsigned threads_;
    AdamW opt_;
    std::size_t step_ = 0;
};

}  // namespace prosper
