#include "prosper/head.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prosper/error.hpp"

namespace prosper {

std::optional<HeadMode> parse_head_mode(std::string_view s) {
    if (s == "prosper") {
        return HeadMode::Prosper;
    }
    if (s == "splade_max") {
        return HeadMode::SpladeMax;
    }
    if (s == "no_lrn") {
        return HeadMode::NoLrn;
    }
    return std::nullopt;
}

std::string_view to_string(HeadMode m) {
    switch (m) {
        case HeadMode::Prosper:
            return "prosper";
        case HeadMode::SpladeMax:
            return "splade_max";
        case HeadMode::NoLrn:
            return "no_lrn";
    }
    return "?";
}

LiteralIndicator LiteralIndicator::of(const TokenSeq &s) {
    LiteralIndicator lit;
    for (auto id : s.ids) {
        if (id != Vocab::kUnknown) {
            lit.dims.push_back(id);
        }
    }
    std::sort(lit.dims.begin(), lit.dims.end());
    lit.dims.erase(std::unique(lit.dims.begin(), lit.dims.end()), lit.dims.end());
    return lit;
}

bool LiteralIndicator::contains(TermId t) const noexcept { return std::binary_search(dims.begin(), dims.end(), t); }

double saturate(double x) noexcept { return x > 0.0 ? std::log1p(x) : 0.0; }

std::vector<double> last_pool(const Matrix &rows) {
    require(rows.rows >= 1, "last_pool needs at least one row");
    auto r = rows.row(rows.rows - 1);
    return {r.begin(), r.end()};
}

std::vector<double> max_pool(const Matrix &rows) {
    require(rows.rows >= 1, "max_pool needs at least one row");
    auto r0 = rows.row(0);
    std::vector<double> out(r0.begin(), r0.end());
    for (std::size_t i = 1; i < rows.rows; ++i) {
        auto r = rows.row(i);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] = std::max(out[j], r[j]);
        }
    }
    return out;
}

std::vector<double> lrn_enhance(std::span<const double> basic, std::span<const double> enhancement,
                                const LiteralIndicator &lit) {
    require(basic.size() == enhancement.size(), "lrn_enhance: basic and enhancement lengths differ");
    std::vector<double> out(basic.begin(), basic.end());
    if (lit.dims.empty()) {
        return out;
    }
    const double top = *std::max_element(enhancement.begin(), enhancement.end());
    for (auto j : lit.dims) {
        require(j < out.size(), "literal dim outside vector length");
        out[j] += top - enhancement[j];
    }
    return out;
}

HeadTrace encode_traced(const ModelParams &p, const TokenSeq &s, HeadMode mode) {
    HeadTrace t;
    t.mode = mode;
    t.enc = forward(p, s);
    t.lit = LiteralIndicator::of(s);
    const auto v = p.vocab_size();
    const auto n = t.enc.logits.rows;

    if (mode == HeadMode::SpladeMax) {
        t.basic.assign(v, 0.0);
        t.pool_rows.assign(v, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto lg = t.enc.logits.row(i);
            for (std::size_t j = 0; j < v; ++j) {
                const double x = saturate(lg[j]);
                if (i == 0 || x > t.basic[j]) {
                    t.basic[j] = x;
                    t.pool_rows[j] = i;
                }
            }
        }
    } else {
        auto lg = t.enc.logits.row(n - 1);
        t.basic.resize(v);
        std::transform(lg.begin(), lg.end(), t.basic.begin(), saturate);
        t.pool_rows.assign(v, n - 1);
    }

    if (mode != HeadMode::Prosper) {
        t.final_rep = t.basic;
        return t;
    }

    auto hid = t.enc.hidden.row(n - 1);
    t.pooled_hidden.resize(hid.size());
    std::transform(hid.begin(), hid.end(), t.pooled_hidden.begin(), saturate);
    t.enhancement.resize(v);
    for (std::size_t j = 0; j < v; ++j) {
        double z = p.lrn_b[j];
        auto w = p.lrn_w.row(j);
        for (std::size_t a = 0; a < w.size(); ++a) {
            z += w[a] * t.pooled_hidden[a];
        }
        t.enhancement[j] = z;
    }
    t.enhancement_argmax = static_cast<std::size_t>(
        std::max_element(t.enhancement.begin(), t.enhancement.end()) - t.enhancement.begin());
    t.final_rep = lrn_enhance(t.basic, t.enhancement, t.lit);
    return t;
}

HeadOutput to_output(const HeadTrace &t) {
    return {SparseVec::from_dense(t.basic), t.enhancement, SparseVec::from_dense(t.final_rep)};
}

HeadOutput encode(const ModelParams &p, const TokenSeq &s, HeadMode mode) { return to_output(encode_traced(p, s, mode)); }

void head_backward(const ModelParams &p, const TokenSeq &s, const HeadTrace &t, std::span<const double> d_final,
                   std::span<const double> d_basic, GradientSet &g) {
    const auto v = p.vocab_size();
    const auto h = p.hidden();
    const auto n = t.enc.logits.rows;
    require(d_final.size() == v && d_basic.size() == v, "head gradient length mismatch");

    EncoderUpstream up{Matrix(), Matrix(n, v)};
    for (std::size_t j = 0; j < v; ++j) {
        const double dw = d_final[j] + d_basic[j];
        if (dw == 0.0) {
            continue;
        }
        const std::size_t row = t.pool_rows[j];
        const double x = t.enc.logits.at(row, j);
        if (x > 0.0) {
            up.logits.at(row, j) = dw / (1.0 + x);
        }
    }

    if (t.mode == HeadMode::Prosper) {
        // final_j = basic_j + max(w') - w'_j on literal dims.
        std::vector<double> d_enh(v, 0.0);
        double to_max = 0.0;
        for (auto j : t.lit.dims) {
            d_enh[j] -= d_final[j];
            to_max += d_final[j];
        }
        d_enh[t.enhancement_argmax] += to_max;

        std::vector<double> d_pooled(h, 0.0);
        for (std::size_t j = 0; j < v; ++j) {
            const double d = d_enh[j];
            if (d == 0.0) {
                continue;
            }
            g.lrn_b[j] += d;
            auto gw = g.lrn_w.row(j);
            auto w = p.lrn_w.row(j);
            for (std::size_t a = 0; a < h; ++a) {
                gw[a] += d * t.pooled_hidden[a];
                d_pooled[a] += d * w[a];
            }
        }
        up.hidden = Matrix(n, h);
        auto hid = t.enc.hidden.row(n - 1);
        auto dh = up.hidden.row(n - 1);
        for (std::size_t a = 0; a < h; ++a) {
            if (hid[a] > 0.0) {
                dh[a] = d_pooled[a] / (1.0 + hid[a]);
            }
        }
    }
    accumulate_backward(p, s, t.enc, up, g);
}

}  // namespace prosper
