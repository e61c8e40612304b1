#include "prosper/encoder.hpp"

#include <cmath>
#include <string>

#include "prosper/binio.hpp"
#include "prosper/error.hpp"
#include "prosper/rng.hpp"

namespace prosper {

namespace {

constexpr std::string_view kModelMagic = "PRSP";
constexpr std::uint32_t kModelVersion = 1;

bool all_finite(std::span<const double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

bool is_zero(std::span<const double> xs) {
    for (double x : xs) {
        if (x != 0.0) {
            return false;
        }
    }
    return true;
}

void check_seq(const ParamTensors &p, const TokenSeq &s) {
    require(!s.ids.empty(), "token sequence is empty");
    for (auto id : s.ids) {
        require(id < p.vocab_size(), "token id " + std::to_string(id) + " outside model vocabulary of size " +
                                         std::to_string(p.vocab_size()));
    }
}

}  // namespace

ParamTensors::ParamTensors(std::size_t vocab_size, std::size_t hidden)
    : emb(vocab_size, hidden),
      mix_w(hidden, hidden),
      mix_b(hidden, 0.0),
      head(vocab_size, hidden),
      head_b(vocab_size, 0.0),
      lrn_w(vocab_size, hidden),
      lrn_b(vocab_size, 0.0) {}

std::vector<std::span<double>> ParamTensors::tensors() {
    return {emb.data, mix_w.data, mix_b, head.data, head_b, lrn_w.data, lrn_b};
}

std::vector<std::span<const double>> ParamTensors::tensors() const {
    return {emb.data, mix_w.data, mix_b, head.data, head_b, lrn_w.data, lrn_b};
}

bool ParamTensors::same_shape(const ParamTensors &o) const noexcept {
    return emb.rows == o.emb.rows && emb.cols == o.emb.cols && mix_w.rows == o.mix_w.rows &&
           mix_w.cols == o.mix_w.cols && mix_b.size() == o.mix_b.size() && head.rows == o.head.rows &&
           head.cols == o.head.cols && head_b.size() == o.head_b.size() && lrn_w.rows == o.lrn_w.rows &&
           lrn_w.cols == o.lrn_w.cols && lrn_b.size() == o.lrn_b.size();
}

bool ParamTensors::all_finite() const noexcept {
    for (auto t : tensors()) {
        if (!prosper::all_finite(t)) {
            return false;
        }
    }
    return true;
}

void ParamTensors::set_zero() {
    for (auto t : tensors()) {
        std::fill(t.begin(), t.end(), 0.0);
    }
}

ModelParams ModelParams::init(std::size_t vocab_size, std::size_t hidden, std::uint64_t seed) {
    require(hidden >= 2, "hidden size must be at least 2");
    require(vocab_size >= 2, "vocabulary size must be at least 2");
    ModelParams p(vocab_size, hidden);
    Rng rng(seed);
    const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto *m : {&p.emb, &p.mix_w, &p.head, &p.lrn_w}) {
        for (auto &x : m->data) {
            x = rng.uniform(-r, r);
        }
    }
    return p;
}

void ModelParams::validate() const {
    const auto v = vocab_size();
    const auto h = hidden();
    require(h >= 2, "hidden size must be at least 2");
    require(v >= 2, "vocabulary size must be at least 2");
    require(emb.data.size() == v * h && mix_w.rows == h && mix_w.cols == h && mix_w.data.size() == h * h &&
                mix_b.size() == h && head.rows == v && head.cols == h && head.data.size() == v * h &&
                head_b.size() == v && lrn_w.rows == v && lrn_w.cols == h && lrn_w.data.size() == v * h &&
                lrn_b.size() == v,
            "model tensor shapes are inconsistent");
    if (!all_finite()) {
        fail(ErrorKind::Numeric, "model parameters contain non-finite values");
    }
}

std::string ModelParams::serialize() const {
    validate();
    ByteWriter w;
    w.bytes(kModelMagic);
    w.u32(kModelVersion);
    w.u32(static_cast<std::uint32_t>(vocab_size()));
    w.u32(static_cast<std::uint32_t>(hidden()));
    for (auto t : tensors()) {
        w.u64(t.size());
        for (double x : t) {
            w.f32(static_cast<float>(x));
        }
    }
    return w.take();
}

ModelParams ModelParams::deserialize(std::string_view bytes, const std::string &what) {
    ByteReader r(bytes, what);
    if (r.remaining() < 4 || r.bytes(4) != kModelMagic) {
        r.corrupt_at(0, "bad magic (expected PRSP)");
    }
    const auto version_at = r.offset();
    if (r.u32() != kModelVersion) {
        r.corrupt_at(version_at, "unsupported model version");
    }
    const auto dims_at = r.offset();
    const std::size_t v = r.u32();
    const std::size_t h = r.u32();
    if (v < 2 || h < 2 || v > (1u << 24) || h > (1u << 16)) {
        r.corrupt_at(dims_at, "implausible model dimensions");
    }
    ModelParams p(v, h);
    for (auto t : p.tensors()) {
        const auto len_at = r.offset();
        if (r.u64() != t.size()) {
            r.corrupt_at(len_at, "tensor length does not match header dimensions");
        }
        for (auto &x : t) {
            const auto at = r.offset();
            const float f = r.f32();
            if (!std::isfinite(f)) {
                r.corrupt_at(at, "non-finite weight");
            }
            x = f;
        }
    }
    if (!r.at_end()) {
        r.corrupt("trailing bytes after last tensor");
    }
    return p;
}

void ModelParams::save(const std::filesystem::path &path) const { write_file_atomic(path, serialize()); }

ModelParams ModelParams::load(const std::filesystem::path &path) {
    return deserialize(read_file(path), path.string());
}

void GradientSet::add(const GradientSet &other) {
    require(same_shape(other), "gradient shapes differ");
    auto dst = tensors();
    auto src = other.tensors();
    for (std::size_t t = 0; t < dst.size(); ++t) {
        for (std::size_t i = 0; i < dst[t].size(); ++i) {
            dst[t][i] += src[t][i];
        }
    }
}

EncoderOutput forward(const ModelParams &p, const TokenSeq &s) {
    check_seq(p, s);
    const auto n = s.size();
    const auto h = p.hidden();
    const auto v = p.vocab_size();
    EncoderOutput out{Matrix(n, h), Matrix(n, v)};
    std::vector<double> prefix(h, 0.0);
    std::vector<double> mean(h);
    for (std::size_t i = 0; i < n; ++i) {
        auto e = p.emb.row(s.ids[i]);
        for (std::size_t a = 0; a < h; ++a) {
            prefix[a] += e[a];
        }
        const double inv = 1.0 / static_cast<double>(i + 1);
        for (std::size_t a = 0; a < h; ++a) {
            mean[a] = prefix[a] * inv;
        }
        auto hid = out.hidden.row(i);
        for (std::size_t a = 0; a < h; ++a) {
            double z = p.mix_b[a];
            auto wrow = p.mix_w.row(a);
            for (std::size_t b = 0; b < h; ++b) {
                z += wrow[b] * mean[b];
            }
            hid[a] = std::tanh(z);
        }
        auto lg = out.logits.row(i);
        for (std::size_t t = 0; t < v; ++t) {
            double z = p.head_b[t];
            auto hrow = p.head.row(t);
            for (std::size_t a = 0; a < h; ++a) {
                z += hrow[a] * hid[a];
            }
            lg[t] = z;
        }
    }
    return out;
}

void accumulate_backward(const ModelParams &p, const TokenSeq &s, const EncoderOutput &out,
                         const EncoderUpstream &up, GradientSet &g) {
    check_seq(p, s);
    require(g.same_shape(p), "gradient set shape does not match model");
    const auto n = s.size();
    const auto h = p.hidden();
    const auto v = p.vocab_size();
    const bool has_hidden = !up.hidden.data.empty();
    const bool has_logits = !up.logits.data.empty();
    require(!has_hidden || (up.hidden.rows == n && up.hidden.cols == h), "hidden upstream shape mismatch");
    require(!has_logits || (up.logits.rows == n && up.logits.cols == v), "logit upstream shape mismatch");
    if ((has_hidden && !all_finite(up.hidden.data)) || (has_logits && !all_finite(up.logits.data))) {
        fail(ErrorKind::Numeric, "non-finite upstream gradient");
    }

    // dm[i] = gradient w.r.t. the prefix mean at position i.
    Matrix dm(n, h);
    std::vector<double> prefix(h, 0.0);
    std::vector<double> mean(h);
    std::vector<double> gh(h);
    std::vector<double> dz(h);
    for (std::size_t i = 0; i < n; ++i) {
        auto e = p.emb.row(s.ids[i]);
        for (std::size_t a = 0; a < h; ++a) {
            prefix[a] += e[a];
        }
        const double inv = 1.0 / static_cast<double>(i + 1);
        for (std::size_t a = 0; a < h; ++a) {
            mean[a] = prefix[a] * inv;
        }
        auto hid = out.hidden.row(i);
        if (has_hidden) {
            auto u = up.hidden.row(i);
            std::copy(u.begin(), u.end(), gh.begin());
        } else {
            std::fill(gh.begin(), gh.end(), 0.0);
        }
        if (has_logits && !is_zero(up.logits.row(i))) {
            auto dl = up.logits.row(i);
            for (std::size_t t = 0; t < v; ++t) {
                const double d = dl[t];
                if (d == 0.0) {
                    continue;
                }
                auto grow = g.head.row(t);
                auto hrow = p.head.row(t);
                for (std::size_t a = 0; a < h; ++a) {
                    grow[a] += d * hid[a];
                    gh[a] += d * hrow[a];
                }
                g.head_b[t] += d;
            }
        }
        if (is_zero(gh)) {
            continue;
        }
        for (std::size_t a = 0; a < h; ++a) {
            dz[a] = gh[a] * (1.0 - hid[a] * hid[a]);
            g.mix_b[a] += dz[a];
            auto gw = g.mix_w.row(a);
            for (std::size_t b = 0; b < h; ++b) {
                gw[b] += dz[a] * mean[b];
            }
        }
        auto dmi = dm.row(i);
        for (std::size_t a = 0; a < h; ++a) {
            auto wrow = p.mix_w.row(a);
            for (std::size_t b = 0; b < h; ++b) {
                dmi[b] += wrow[b] * dz[a];
            }
        }
    }
    // emb[t_j] feeds every mean m_i with i >= j, each with weight 1/(i+1).
    std::vector<double> suffix(h, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        const double inv = 1.0 / static_cast<double>(i + 1);
        auto dmi = dm.row(i);
        for (std::size_t a = 0; a < h; ++a) {
            suffix[a] += dmi[a] * inv;
        }
        auto ge = g.emb.row(s.ids[i]);
        for (std::size_t a = 0; a < h; ++a) {
            ge[a] += suffix[a];
        }
    }
}

GradientSet backward(const ModelParams &p, const TokenSeq &s, const EncoderUpstream &upstream) {
    auto out = forward(p, s);
    auto g = GradientSet::zeros_like(p);
    accumulate_backward(p, s, out, upstream, g);
    return g;
}

}  // namespace prosper
