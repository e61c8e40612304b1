#include "prosper/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "prosper/binio.hpp"
#include "prosper/error.hpp"
#include "prosper/parallel.hpp"
#include "prosper/rng.hpp"

namespace prosper {

namespace {

// Accumulators for per-member gradients; summed in index order so the result
// does not depend on the worker count.
constexpr std::size_t kReduceChunks = 4;

enum class SideNorm { None, L2, L1 };

SideNorm query_norm(NormMode m) {
    switch (m) {
        case NormMode::QNorm:
        case NormMode::AllNorm:
            return SideNorm::L2;
        case NormMode::L1QNorm:
            return SideNorm::L1;
        default:
            return SideNorm::None;
    }
}

SideNorm item_norm(NormMode m) {
    return (m == NormMode::AllNorm || m == NormMode::DNorm) ? SideNorm::L2 : SideNorm::None;
}

// A window-pooled representation scaled by its side's normalization. `unit`
// holds the scaled weights aligned with `kept`'s entries.
struct Side {
    SparseVec kept;
    std::vector<double> unit;
    double norm = 1.0;
};

Side make_side(const SparseVec &w, std::size_t k, SideNorm how) {
    Side s;
    s.kept = conditional_topk(w, k);
    if (how == SideNorm::L2) {
        s.norm = l2_norm(s.kept);
    } else if (how == SideNorm::L1) {
        s.norm = l1_norm(s.kept);
    }
    if (s.norm > 0.0) {
        for (const auto &e : s.kept.entries()) {
            s.unit.push_back(e.weight / s.norm);
        }
    }
    // A normalized empty side scores zero against everything: unit stays empty.
    return s;
}

double side_dot(const Side &a, const Side &b) {
    auto ea = a.kept.entries();
    auto eb = b.kept.entries();
    if (a.unit.empty() || b.unit.empty()) {
        return 0.0;
    }
    double s = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].term < eb[j].term) {
            ++i;
        } else if (eb[j].term < ea[i].term) {
            ++j;
        } else {
            s += a.unit[i] * b.unit[j];
            ++i;
            ++j;
        }
    }
    return s;
}

// Backpropagates a dense gradient w.r.t. the unit vector onto the kept
// (pre-normalization) weights, writing into `out` on the kept support.
void side_backward(const Side &s, SideNorm how, std::span<const double> g_unit, std::span<double> out) {
    if (s.unit.empty()) {
        return;
    }
    auto e = s.kept.entries();
    double c = 0.0;
    if (how != SideNorm::None) {
        for (std::size_t i = 0; i < e.size(); ++i) {
            c += s.unit[i] * g_unit[e[i].term];
        }
    }
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double g = g_unit[e[i].term];
        switch (how) {
            case SideNorm::None:
                out[e[i].term] += g;
                break;
            case SideNorm::L2:
                out[e[i].term] += (g - c * s.unit[i]) / s.norm;
                break;
            case SideNorm::L1:
                out[e[i].term] += (g - c) / s.norm;
                break;
        }
    }
}

struct Fnv {
    std::uint64_t h = 1469598103934665603ull;
    void mix(std::uint64_t x) {
        for (int b = 0; b < 8; ++b) {
            h ^= (x >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    }
};

void mix_trace(Fnv &f, const HeadTrace &t, const Side &side) {
    f.mix(0xB0);
    for (std::size_t j = 0; j < t.basic.size(); ++j) {
        if (t.basic[j] > 0.0) {
            f.mix(j);
        }
    }
    f.mix(0xB1);
    for (std::size_t a = 0; a < t.pooled_hidden.size(); ++a) {
        if (t.pooled_hidden[a] > 0.0) {
            f.mix(a);
        }
    }
    f.mix(0xB2);
    f.mix(t.enhancement_argmax);
    if (t.mode == HeadMode::SpladeMax) {
        for (std::size_t j = 0; j < t.pool_rows.size(); ++j) {
            if (t.basic[j] > 0.0) {
                f.mix(t.pool_rows[j]);
            }
        }
    }
    f.mix(0xB3);
    for (std::size_t j = 0; j < t.final_rep.size(); ++j) {
        if (t.final_rep[j] > 0.0) {
            f.mix(j);
        }
    }
    f.mix(0xB4);
    for (const auto &e : side.kept.entries()) {
        f.mix(e.term);
    }
}

std::size_t parse_count(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        fail(ErrorKind::InvalidArgument, "config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                                             std::string(v) + "'");
    }
    return out;
}

double parse_real(std::string_view key, std::string_view v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
        fail(ErrorKind::InvalidArgument, "config key '" + std::string(key) + "': expected a real number, got '" +
                                             std::string(v) + "'");
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view v) {
    std::vector<std::size_t> out;
    for (auto part : split(v, ',')) {
        out.push_back(parse_count(key, trim(part)));
    }
    return out;
}

WindowSchedule parse_schedule(std::string_view v) {
    WindowSchedule ws;
    if (v == "fixed") {
        return ws;
    }
    if (v == "dynamic") {
        ws.dynamic = true;
        return ws;
    }
    // dynamic(256,128,64;512,256,128;0.9)
    if (v.size() > 9 && v.substr(0, 8) == "dynamic(" && v.back() == ')') {
        auto parts = split(v.substr(8, v.size() - 9), ';');
        if (parts.size() == 2 || parts.size() == 3) {
            ws.dynamic = true;
            ws.query_sizes = parse_sizes("window_schedule", parts[0]);
            ws.item_sizes = parse_sizes("window_schedule", parts[1]);
            if (parts.size() == 3) {
                ws.threshold = parse_real("window_schedule", trim(parts[2]));
            }
            return ws;
        }
    }
    fail(ErrorKind::InvalidArgument,
         "config key 'window_schedule': expected fixed, dynamic or dynamic(q sizes;d sizes[;threshold]), got '" +
             std::string(v) + "'");
}

std::string join_sizes(const std::vector<std::size_t> &xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out += (i ? "," : "") + std::to_string(xs[i]);
    }
    return out;
}

std::string real_text(double x) {
    std::ostringstream ss;
    ss.precision(17);
    ss << x;
    return ss.str();
}

}  // namespace

std::optional<NormMode> parse_norm_mode(std::string_view s) {
    if (s == "q_norm") return NormMode::QNorm;
    if (s == "all_norm") return NormMode::AllNorm;
    if (s == "no_norm") return NormMode::NoNorm;
    if (s == "d_norm") return NormMode::DNorm;
    if (s == "l1_q_norm") return NormMode::L1QNorm;
    return std::nullopt;
}

std::string_view to_string(NormMode m) {
    switch (m) {
        case NormMode::QNorm:
            return "q_norm";
        case NormMode::AllNorm:
            return "all_norm";
        case NormMode::NoNorm:
            return "no_norm";
        case NormMode::DNorm:
            return "d_norm";
        case NormMode::L1QNorm:
            return "l1_q_norm";
    }
    return "?";
}

void TrainConfig::validate() const {
    require(k_q >= 1 && k_d >= 1, "window sizes k_q and k_d must be at least 1");
    require(lambda_q >= 0.0 && lambda_d >= 0.0, "FLOPS weights must be non-negative");
    require(lr >= 0.0 && weight_decay >= 0.0, "lr and weight_decay must be non-negative");
    require(batch_size >= 2, "batch_size must be at least 2 for in-batch negatives");
    if (window_schedule.dynamic) {
        const auto &ws = window_schedule;
        require(!ws.query_sizes.empty() && !ws.item_sizes.empty(), "dynamic window lists must be non-empty");
        for (const auto *list : {&ws.query_sizes, &ws.item_sizes}) {
            for (std::size_t i = 0; i < list->size(); ++i) {
                require((*list)[i] >= 1, "dynamic window sizes must be at least 1");
                require(i == 0 || (*list)[i] < (*list)[i - 1], "dynamic window sizes must be strictly decreasing");
            }
        }
        require(ws.threshold >= 0.0 && ws.threshold <= 1.0, "dynamic window threshold must be in [0, 1]");
    }
}

void TrainConfig::set(std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "k_q") {
        k_q = parse_count(key, value);
    } else if (key == "k_d") {
        k_d = parse_count(key, value);
    } else if (key == "lambda_q") {
        lambda_q = parse_real(key, value);
    } else if (key == "lambda_d") {
        lambda_d = parse_real(key, value);
    } else if (key == "warmup_steps_flops") {
        warmup_steps_flops = parse_count(key, value);
    } else if (key == "warmup_steps_lr") {
        warmup_steps_lr = parse_count(key, value);
    } else if (key == "lr") {
        lr = parse_real(key, value);
    } else if (key == "weight_decay") {
        weight_decay = parse_real(key, value);
    } else if (key == "batch_size") {
        batch_size = parse_count(key, value);
    } else if (key == "epochs") {
        epochs = parse_count(key, value);
    } else if (key == "seed") {
        seed = parse_count(key, value);
    } else if (key == "norm_mode") {
        auto m = parse_norm_mode(value);
        if (!m) {
            fail(ErrorKind::InvalidArgument, "config key 'norm_mode': unknown mode '" + std::string(value) + "'");
        }
        norm_mode = *m;
    } else if (key == "window_schedule") {
        window_schedule = parse_schedule(value);
    } else {
        fail(ErrorKind::InvalidArgument, "unknown config key '" + std::string(key) + "'");
    }
}

TrainConfig TrainConfig::parse(std::string_view text, const std::string &what) {
    TrainConfig cfg;
    std::size_t lineno = 0;
    for (auto raw : split_lines(text)) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail(ErrorKind::InvalidArgument, what + ":" + std::to_string(lineno) + ": expected key=value");
        }
        try {
            cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const Error &e) {
            fail(ErrorKind::InvalidArgument, what + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path &path) { return parse(read_file(path), path.string()); }

std::string TrainConfig::to_text() const {
    std::string s;
    s += "k_q=" + std::to_string(k_q) + "\n";
    s += "k_d=" + std::to_string(k_d) + "\n";
    s += "lambda_q=" + real_text(lambda_q) + "\n";
    s += "lambda_d=" + real_text(lambda_d) + "\n";
    s += "warmup_steps_flops=" + std::to_string(warmup_steps_flops) + "\n";
    s += "warmup_steps_lr=" + std::to_string(warmup_steps_lr) + "\n";
    s += "lr=" + real_text(lr) + "\n";
    s += "weight_decay=" + real_text(weight_decay) + "\n";
    s += "batch_size=" + std::to_string(batch_size) + "\n";
    s += "epochs=" + std::to_string(epochs) + "\n";
    s += "seed=" + std::to_string(seed) + "\n";
    s += "norm_mode=" + std::string(to_string(norm_mode)) + "\n";
    if (window_schedule.dynamic) {
        s += "window_schedule=dynamic(" + join_sizes(window_schedule.query_sizes) + ";" +
             join_sizes(window_schedule.item_sizes) + ";" + real_text(window_schedule.threshold) + ")\n";
    } else {
        s += "window_schedule=fixed\n";
    }
    return s;
}

SparseVec conditional_topk(const SparseVec &w, std::size_t k) { return top_k_by_weight(w, k); }

double similarity_lfw(const SparseVec &wq, const SparseVec &wd, const TrainConfig &cfg) {
    const auto q = make_side(wq, cfg.k_q, query_norm(cfg.norm_mode));
    const auto d = make_side(wd, cfg.k_d, item_norm(cfg.norm_mode));
    return side_dot(q, d);
}

namespace {

std::vector<std::vector<double>> score_matrix(const BatchReps &batch, const TrainConfig &cfg) {
    const auto b = batch.queries.size();
    std::vector<std::vector<double>> s(b, std::vector<double>(b));
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            s[i][j] = similarity_lfw(batch.queries[i].final_rep, batch.items[j].final_rep, cfg);
        }
    }
    return s;
}

// Mean over rows of logsumexp(row) - row[i].
double infonce_from_scores(const std::vector<std::vector<double>> &s) {
    const auto b = s.size();
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        for (double x : s[i]) {
            if (!std::isfinite(x)) {
                fail(ErrorKind::Numeric, "non-finite similarity score in batch");
            }
        }
        const double m = *std::max_element(s[i].begin(), s[i].end());
        double z = 0.0;
        for (double x : s[i]) {
            z += std::exp(x - m);
        }
        total += m + std::log(z) - s[i][i];
    }
    return total / static_cast<double>(b);
}

}  // namespace

double infonce_lfw(const BatchReps &batch, const TrainConfig &cfg) {
    require(batch.queries.size() == batch.items.size(), "batch queries and items differ in length");
    require(!batch.queries.empty(), "empty batch");
    return infonce_from_scores(score_matrix(batch, cfg));
}

double flops_loss(std::span<const SparseVec> reps) {
    require(!reps.empty(), "flops_loss needs at least one representation");
    std::vector<TermWeight> all;
    for (const auto &r : reps) {
        all.insert(all.end(), r.entries().begin(), r.entries().end());
    }
    std::sort(all.begin(), all.end(), [](const TermWeight &a, const TermWeight &b) { return a.term < b.term; });
    const double inv_n = 1.0 / static_cast<double>(reps.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        double sum = 0.0;
        std::size_t j = i;
        for (; j < all.size() && all[j].term == all[i].term; ++j) {
            sum += all[j].weight;
        }
        const double mean = sum * inv_n;
        loss += mean * mean;
        i = j;
    }
    return loss;
}

double flops_weight(double target, std::size_t step, std::size_t warmup) {
    if (warmup == 0) {
        return target;
    }
    const double r = std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup));
    return target * r * r;
}

double learning_rate(double target, std::size_t step, std::size_t warmup) {
    if (warmup == 0) {
        return target;
    }
    return target * std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(warmup));
}

LossBreakdown total_loss(const BatchReps &batch, const TrainConfig &cfg, std::size_t step) {
    LossBreakdown out;
    out.rank = infonce_lfw(batch, cfg);
    std::vector<SparseVec> qb;
    std::vector<SparseVec> db;
    for (const auto &q : batch.queries) {
        qb.push_back(q.basic);
    }
    for (const auto &d : batch.items) {
        db.push_back(d.basic);
    }
    out.flops_q = flops_loss(qb);
    out.flops_d = flops_loss(db);
    out.lambda_q = flops_weight(cfg.lambda_q, step, cfg.warmup_steps_flops);
    out.lambda_d = flops_weight(cfg.lambda_d, step, cfg.warmup_steps_flops);
    out.total = out.rank + out.lambda_q * out.flops_q + out.lambda_d * out.flops_d;
    return out;
}

std::pair<std::size_t, std::size_t> dynamic_window_update(double frac_q_below, double frac_d_below,
                                                          const TrainConfig &cfg,
                                                          std::pair<std::size_t, std::size_t> current) {
    const auto &ws = cfg.window_schedule;
    if (!ws.dynamic) {
        return current;
    }
    auto shrink = [&](std::size_t k, double frac, const std::vector<std::size_t> &sizes) {
        if (frac <= ws.threshold) {
            return k;
        }
        for (auto s : sizes) {
            if (s < k) {
                return s;
            }
        }
        return k;
    };
    return {shrink(current.first, frac_q_below, ws.query_sizes), shrink(current.second, frac_d_below, ws.item_sizes)};
}

BatchEvaluation evaluate_batch(const ModelParams &p, std::span<const PairRecord> batch, const TrainConfig &cfg,
                               HeadMode mode, std::size_t step, GradientSet *grads, unsigned threads) {
    require(!batch.empty(), "empty batch");
    require(cfg.k_q >= 1 && cfg.k_d >= 1, "window sizes must be at least 1");
    const auto b = batch.size();
    const auto v = p.vocab_size();
    const auto qn = query_norm(cfg.norm_mode);
    const auto dn = item_norm(cfg.norm_mode);

    std::vector<HeadTrace> qt(b);
    std::vector<HeadTrace> dt(b);
    parallel_for(2 * b, threads, [&](std::size_t i) {
        if (i < b) {
            qt[i] = encode_traced(p, batch[i].query, mode);
        } else {
            dt[i - b] = encode_traced(p, batch[i - b].item, mode);
        }
    });

    std::vector<Side> qs(b);
    std::vector<Side> ds(b);
    std::vector<double> mean_q(v, 0.0);
    std::vector<double> mean_d(v, 0.0);
    BatchEvaluation ev;
    const double inv_b = 1.0 / static_cast<double>(b);
    std::size_t below_q = 0;
    std::size_t below_d = 0;
    for (std::size_t i = 0; i < b; ++i) {
        const auto qf = SparseVec::from_dense(qt[i].final_rep);
        const auto df = SparseVec::from_dense(dt[i].final_rep);
        below_q += qf.nnz() < cfg.k_q ? 1 : 0;
        below_d += df.nnz() < cfg.k_d ? 1 : 0;
        qs[i] = make_side(qf, cfg.k_q, qn);
        ds[i] = make_side(df, cfg.k_d, dn);
        ev.max_nnz_q_kept = std::max(ev.max_nnz_q_kept, qs[i].kept.nnz());
        ev.max_nnz_d_kept = std::max(ev.max_nnz_d_kept, ds[i].kept.nnz());
        std::size_t nq = 0;
        std::size_t nd = 0;
        for (std::size_t j = 0; j < v; ++j) {
            mean_q[j] += qt[i].basic[j];
            mean_d[j] += dt[i].basic[j];
            nq += qt[i].basic[j] > 0.0 ? 1 : 0;
            nd += dt[i].basic[j] > 0.0 ? 1 : 0;
        }
        ev.nnz_q_mean += static_cast<double>(nq) * inv_b;
        ev.nnz_d_mean += static_cast<double>(nd) * inv_b;
    }
    ev.frac_q_below_window = static_cast<double>(below_q) * inv_b;
    ev.frac_d_below_window = static_cast<double>(below_d) * inv_b;

    std::vector<std::vector<double>> s(b, std::vector<double>(b));
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            s[i][j] = side_dot(qs[i], ds[j]);
        }
    }
    auto &loss = ev.loss;
    loss.rank = infonce_from_scores(s);
    for (std::size_t j = 0; j < v; ++j) {
        mean_q[j] *= inv_b;
        mean_d[j] *= inv_b;
        loss.flops_q += mean_q[j] * mean_q[j];
        loss.flops_d += mean_d[j] * mean_d[j];
    }
    loss.lambda_q = flops_weight(cfg.lambda_q, step, cfg.warmup_steps_flops);
    loss.lambda_d = flops_weight(cfg.lambda_d, step, cfg.warmup_steps_flops);
    loss.total = loss.rank + loss.lambda_q * loss.flops_q + loss.lambda_d * loss.flops_d;
    if (!std::isfinite(loss.total)) {
        fail(ErrorKind::Numeric, "non-finite loss (rank=" + real_text(loss.rank) + ", flops_q=" +
                                     real_text(loss.flops_q) + ", flops_d=" + real_text(loss.flops_d) + ")");
    }

    Fnv fnv;
    for (std::size_t i = 0; i < b; ++i) {
        mix_trace(fnv, qt[i], qs[i]);
        mix_trace(fnv, dt[i], ds[i]);
    }
    ev.structure = fnv.h;

    if (grads == nullptr) {
        return ev;
    }
    require(grads->same_shape(p), "gradient set shape does not match model");

    // dL/ds_ij = (softmax_ij - [i == j]) / B
    std::vector<std::vector<double>> gs(b, std::vector<double>(b));
    for (std::size_t i = 0; i < b; ++i) {
        const double m = *std::max_element(s[i].begin(), s[i].end());
        double z = 0.0;
        for (double x : s[i]) {
            z += std::exp(x - m);
        }
        for (std::size_t j = 0; j < b; ++j) {
            gs[i][j] = (std::exp(s[i][j] - m) / z - (i == j ? 1.0 : 0.0)) * inv_b;
        }
    }

    std::vector<GradientSet> partial;
    const std::size_t chunks = std::min(kReduceChunks, 2 * b);
    partial.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        partial.push_back(GradientSet::zeros_like(p));
    }
    const double flops_scale_q = 2.0 * loss.lambda_q * inv_b;
    const double flops_scale_d = 2.0 * loss.lambda_d * inv_b;

    auto member_backward = [&](std::size_t m, GradientSet &g) {
        const bool is_query = m < b;
        const std::size_t i = is_query ? m : m - b;
        std::vector<double> g_unit(v, 0.0);
        if (is_query) {
            for (std::size_t j = 0; j < b; ++j) {
                const double w = gs[i][j];
                auto e = ds[j].kept.entries();
                for (std::size_t t = 0; t < ds[j].unit.size(); ++t) {
                    g_unit[e[t].term] += w * ds[j].unit[t];
                }
            }
        } else {
            for (std::size_t r = 0; r < b; ++r) {
                const double w = gs[r][i];
                auto e = qs[r].kept.entries();
                for (std::size_t t = 0; t < qs[r].unit.size(); ++t) {
                    g_unit[e[t].term] += w * qs[r].unit[t];
                }
            }
        }
        // Window pooling is straight-through on the kept support.
        std::vector<double> d_final(v, 0.0);
        side_backward(is_query ? qs[i] : ds[i], is_query ? qn : dn, g_unit, d_final);
        std::vector<double> d_basic(v);
        const auto &mean = is_query ? mean_q : mean_d;
        const double scale = is_query ? flops_scale_q : flops_scale_d;
        for (std::size_t j = 0; j < v; ++j) {
            d_basic[j] = scale * mean[j];
        }
        const auto &pair = batch[i];
        head_backward(p, is_query ? pair.query : pair.item, is_query ? qt[i] : dt[i], d_final, d_basic, g);
    };

    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t lo = c * 2 * b / chunks;
        const std::size_t hi = (c + 1) * 2 * b / chunks;
        for (std::size_t m = lo; m < hi; ++m) {
            member_backward(m, partial[c]);
        }
    });
    for (auto &g : partial) {
        grads->add(g);
    }
    return ev;
}

AdamW::AdamW(const ParamTensors &shape) : m_(GradientSet::zeros_like(shape)), v_(GradientSet::zeros_like(shape)) {}

void AdamW::update(ModelParams &p, const GradientSet &g, double lr, double weight_decay) {
    require(p.same_shape(g) && p.same_shape(m_), "optimizer state shape does not match model");
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    auto params = p.tensors();
    auto grads = g.tensors();
    auto ms = m_.tensors();
    auto vs = v_.tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t].size(); ++i) {
            const double gi = grads[t][i];
            ms[t][i] = kBeta1 * ms[t][i] + (1.0 - kBeta1) * gi;
            vs[t][i] = kBeta2 * vs[t][i] + (1.0 - kBeta2) * gi * gi;
            const double mhat = ms[t][i] / c1;
            const double vhat = vs[t][i] / c2;
            double &x = params[t][i];
            x -= lr * weight_decay * x;
            x -= lr * mhat / (std::sqrt(vhat) + kEps);
        }
    }
}

std::string to_json_line(const StepMetrics &m) {
    nlohmann::json j;
    j["step"] = m.step;
    j["loss"] = m.loss.total;
    j["rank_loss"] = m.loss.rank;
    j["flops_q"] = m.loss.flops_q;
    j["flops_d"] = m.loss.flops_d;
    j["nnz_q_mean"] = m.nnz_q_mean;
    j["nnz_d_mean"] = m.nnz_d_mean;
    j["k_q"] = m.k_q;
    j["k_d"] = m.k_d;
    return j.dump();
}

Trainer::Trainer(ModelParams &params, TrainConfig cfg, HeadMode mode, unsigned threads)
    : params_(params), cfg_(std::move(cfg)), mode_(mode), threads_(threads), opt_(params) {
    cfg_.validate();
    params_.validate();
    if (cfg_.window_schedule.dynamic) {
        cfg_.k_q = cfg_.window_schedule.query_sizes.front();
        cfg_.k_d = cfg_.window_schedule.item_sizes.front();
    }
}

StepMetrics Trainer::train_step(std::span<const PairRecord> batch) {
    require(batch.size() >= 2, "train_step needs at least two pairs");
    auto g = GradientSet::zeros_like(params_);
    const auto ev = evaluate_batch(params_, batch, cfg_, mode_, step_, &g, threads_);
    if (!g.all_finite()) {
        fail(ErrorKind::Numeric, "non-finite gradient at step " + std::to_string(step_ + 1));
    }
    opt_.update(params_, g, learning_rate(cfg_.lr, step_, cfg_.warmup_steps_lr), cfg_.weight_decay);

    StepMetrics m;
    m.step = ++step_;
    m.loss = ev.loss;
    m.nnz_q_mean = ev.nnz_q_mean;
    m.nnz_d_mean = ev.nnz_d_mean;
    m.k_q = cfg_.k_q;
    m.k_d = cfg_.k_d;
    std::tie(cfg_.k_q, cfg_.k_d) =
        dynamic_window_update(ev.frac_q_below_window, ev.frac_d_below_window, cfg_, {cfg_.k_q, cfg_.k_d});
    return m;
}

void Trainer::fit(const PairSet &pairs, const std::function<void(const StepMetrics &)> &on_step,
                  std::size_t max_steps) {
    require(pairs.size() >= 2, "training needs at least two pairs");
    Rng rng(cfg_.seed ^ 0x5eed5eed5eed5eedull);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<PairRecord> batch;
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start + 2 <= order.size(); start += cfg_.batch_size) {
            if (max_steps != 0 && step_ >= max_steps) {
                return;
            }
            const auto end = std::min(order.size(), start + cfg_.batch_size);
            batch.clear();
            for (auto k = start; k < end; ++k) {
                batch.push_back(pairs[order[k]]);
            }
            const auto m = train_step(batch);
            if (on_step) {
                on_step(m);
            }
        }
    }
}

}  // namespace prosper
