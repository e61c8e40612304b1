#pragma once

// Helpers shared by the unit tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "prosper/corpus.hpp"
#include "prosper/encoder.hpp"
#include "prosper/index.hpp"
#include "prosper/rng.hpp"
#include "prosper/sparse.hpp"
#include "prosper/training.hpp"

namespace prosper::testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
    auto dir = std::filesystem::temp_directory_path() / ("prosper_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Params with every tensor (biases included) uniform in [-scale, scale].
inline ModelParams random_params(std::size_t vocab, std::size_t hidden, std::uint64_t seed, double scale = 0.8) {
    ModelParams p(vocab, hidden);
    Rng rng(seed);
    for (auto t : p.tensors()) {
        for (auto &x : t) {
            x = rng.uniform(-scale, scale);
        }
    }
    return p;
}

/// Length in [1, max_len]; ids drawn from [0, vocab) so the unknown id and
/// repeats both occur.
inline TokenSeq random_seq(Rng &rng, std::size_t vocab, std::size_t max_len) {
    TokenSeq s;
    const auto n = 1 + rng.below(max_len);
    for (std::size_t i = 0; i < n; ++i) {
        s.ids.push_back(static_cast<TermId>(rng.below(vocab)));
    }
    return s;
}

inline SparseVec random_sparse(Rng &rng, std::size_t dim, std::size_t max_nnz, double max_w = 3.0) {
    std::vector<TermWeight> e;
    const auto n = rng.below(max_nnz + 1);
    std::vector<TermId> ids(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        ids[i] = static_cast<TermId>(i);
    }
    rng.shuffle(ids.begin(), ids.end());
    for (std::size_t i = 0; i < n && i < dim; ++i) {
        e.push_back({ids[i], rng.uniform(0.01, max_w)});
    }
    return SparseVec::from_entries(std::move(e));
}

/// Documents over a Zipf-like vocabulary so posting lengths vary widely,
/// which is what gives block-max pruning something to skip.
inline std::vector<DocVector> zipf_docs(Rng &rng, std::size_t n, std::size_t vocab, std::size_t min_nnz,
                                        std::size_t max_nnz) {
    std::vector<double> cdf(vocab);
    double total = 0.0;
    for (std::size_t t = 0; t < vocab; ++t) {
        total += 1.0 / std::pow(static_cast<double>(t + 1), 0.9);
        cdf[t] = total;
    }
    std::vector<DocVector> docs;
    docs.reserve(n);
    for (std::size_t d = 0; d < n; ++d) {
        const auto nnz = min_nnz + rng.below(max_nnz - min_nnz + 1);
        std::vector<TermWeight> e;
        std::vector<char> used(vocab, 0);
        while (e.size() < nnz) {
            const double u = rng.uniform() * total;
            const auto t = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            const auto term = std::min(t, vocab - 1);
            if (used[term]) {
                continue;
            }
            used[term] = 1;
            e.push_back({static_cast<TermId>(term), rng.uniform(0.05, 4.0)});
        }
        docs.push_back({"d" + std::to_string(d), SparseVec::from_entries(std::move(e))});
    }
    return docs;
}

struct FdReport {
    std::size_t checked = 0;
    std::size_t excluded = 0;  // kink-adjacent coordinates
    std::size_t failures = 0;
    double max_rel = 0.0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps round-off noise on
/// coordinates whose true gradient is ~0 from dominating.
inline double rel_error(double a, double n, double floor = 1e-6) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Central finite differences of the full training loss against the analytic
/// gradient from evaluate_batch, coordinate by coordinate. A coordinate is
/// excluded when either perturbed evaluation changes a discrete choice of the
/// forward pass (different structure hash).
inline FdReport fd_check_batch(const ModelParams &p, const std::vector<PairRecord> &batch, const TrainConfig &cfg,
                               HeadMode mode, std::size_t step, double h = 1e-5, double tol = 1e-3) {
    auto grads = GradientSet::zeros_like(p);
    const auto base = evaluate_batch(p, batch, cfg, mode, step, &grads);
    FdReport rep;
    auto q = p;
    auto qt = q.tensors();
    const auto gt = std::as_const(grads).tensors();
    for (std::size_t t = 0; t < qt.size(); ++t) {
        for (std::size_t i = 0; i < qt[t].size(); ++i) {
            const double orig = qt[t][i];
            qt[t][i] = orig + h;
            const auto plus = evaluate_batch(q, batch, cfg, mode, step, nullptr);
            qt[t][i] = orig - h;
            const auto minus = evaluate_batch(q, batch, cfg, mode, step, nullptr);
            qt[t][i] = orig;
            if (plus.structure != base.structure || minus.structure != base.structure) {
                ++rep.excluded;
                continue;
            }
            const double numeric = (plus.loss.total - minus.loss.total) / (2.0 * h);
            const double r = rel_error(gt[t][i], numeric);
            ++rep.checked;
            rep.max_rel = std::max(rep.max_rel, r);
            if (!(r < tol)) {
                ++rep.failures;
            }
        }
    }
    return rep;
}

}  // namespace prosper::testing
