#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace prosper {

struct SparsityPoint {
    std::size_t step = 0;
    double nnz_q_mean = 0.0;
    double nnz_d_mean = 0.0;
};

/// Reads step, nnz_q_mean and nnz_d_mean from a training JSONL log. Throws
/// on an empty log or on steps that are not strictly increasing.
[[nodiscard]] std::vector<SparsityPoint> parse_sparsity_log(std::string_view text, const std::string &what = "log");
[[nodiscard]] std::vector<SparsityPoint> read_sparsity_log(const std::filesystem::path &path);

/// CSV with header `step,nnz_q_on,nnz_d_on,nnz_q_off,nnz_d_off` over the
/// union of both step grids; each log contributes its value at the nearest
/// logged step (the earlier one on a tie).
[[nodiscard]] std::string bench_sparsity(const std::vector<SparsityPoint> &on, const std::vector<SparsityPoint> &off);

}  // namespace prosper
