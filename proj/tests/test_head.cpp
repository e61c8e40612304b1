#include <cmath>

#include "doctest.h"
#include "prosper/error.hpp"
#include "prosper/head.hpp"
#include "support.hpp"

using namespace prosper;
using testing::random_params;

namespace {

// Straight re-derivation of the prosper-mode head from the parameter tensors,
// sharing no code with the library.
struct OracleHead {
    std::vector<double> basic, enh, final_rep;
};

OracleHead oracle(const ModelParams &p, const std::vector<TermId> &ids) {
    const std::size_t v = p.emb.rows;
    const std::size_t h = p.emb.cols;
    std::vector<double> sum(h, 0.0);
    for (auto id : ids) {
        for (std::size_t a = 0; a < h; ++a) {
            sum[a] += p.emb.data[id * h + a];
        }
    }
    std::vector<double> hid(h);
    for (std::size_t a = 0; a < h; ++a) {
        double z = p.mix_b[a];
        for (std::size_t b = 0; b < h; ++b) {
            z += p.mix_w.data[a * h + b] * sum[b] / static_cast<double>(ids.size());
        }
        hid[a] = std::tanh(z);
    }
    auto sat = [](double x) { return std::log(1.0 + std::max(x, 0.0)); };
    OracleHead o;
    for (std::size_t t = 0; t < v; ++t) {
        double logit = p.head_b[t];
        double e = p.lrn_b[t];
        for (std::size_t a = 0; a < h; ++a) {
            logit += p.head.data[t * h + a] * hid[a];
            e += p.lrn_w.data[t * h + a] * sat(hid[a]);
        }
        o.basic.push_back(sat(logit));
        o.enh.push_back(e);
    }
    double top = o.enh[0];
    for (double e : o.enh) {
        top = std::max(top, e);
    }
    o.final_rep = o.basic;
    for (std::size_t t = 1; t < v; ++t) {
        if (std::find(ids.begin(), ids.end(), static_cast<TermId>(t)) != ids.end()) {
            o.final_rep[t] += top - o.enh[t];
        }
    }
    return o;
}

Matrix rows_of(std::initializer_list<std::vector<double>> rs) {
    Matrix m(rs.size(), rs.begin()->size());
    std::size_t i = 0;
    for (const auto &r : rs) {
        std::copy(r.begin(), r.end(), m.row(i++).begin());
    }
    return m;
}

}  // namespace

TEST_CASE("saturate") {
    CHECK(saturate(0.0) == 0.0);
    CHECK(saturate(-5.0) == 0.0);
    CHECK(saturate(std::exp(1.0) - 1.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pooling") {
    CHECK(last_pool(rows_of({{1, 2}, {3, 4}})) == std::vector<double>{3, 4});
    CHECK(last_pool(rows_of({{1, 2}, {3, 4}, {3, 4}})) == std::vector<double>{3, 4});
    CHECK(last_pool(rows_of({{5, 6}})) == std::vector<double>{5, 6});
    CHECK(max_pool(rows_of({{1, 4}, {3, 2}})) == std::vector<double>{3, 4});
    CHECK(max_pool(rows_of({{3, 2}, {1, 4}})) == std::vector<double>{3, 4});
    CHECK(max_pool(rows_of({{5, 6}})) == std::vector<double>{5, 6});
    CHECK_THROWS_AS((void)last_pool(Matrix(0, 3)), Error);
    CHECK_THROWS_AS((void)max_pool(Matrix(0, 3)), Error);
}

TEST_CASE("lrn_enhance") {
    const std::vector<double> basic{0.2, 0.5, 0.0};
    const std::vector<double> enh{1, 3, 2};
    const auto out = lrn_enhance(basic, enh, LiteralIndicator{{0, 2}});
    CHECK(out[0] == doctest::Approx(2.2));
    CHECK(out[1] == 0.5);
    CHECK(out[2] == doctest::Approx(1.0));
    CHECK(lrn_enhance(basic, enh, LiteralIndicator{}) == basic);
    const std::vector<double> flat{1.5, 1.5, 1.5};
    CHECK(lrn_enhance(basic, flat, LiteralIndicator{{0, 1, 2}}) == basic);
    const std::vector<double> short_enh{1, 2};
    CHECK_THROWS_AS((void)lrn_enhance(basic, short_enh, LiteralIndicator{}), Error);
}

TEST_CASE("literal indicator drops the unknown id and duplicates") {
    const auto lit = LiteralIndicator::of(TokenSeq{{4, 0, 2, 4}});
    CHECK(lit.dims == std::vector<TermId>{2, 4});
    CHECK(lit.contains(4));
    CHECK_FALSE(lit.contains(0));
}

TEST_CASE("head mode names round-trip") {
    for (auto m : {HeadMode::Prosper, HeadMode::SpladeMax, HeadMode::NoLrn}) {
        CHECK(parse_head_mode(to_string(m)) == m);
    }
    CHECK_FALSE(parse_head_mode("splade"));
}

TEST_CASE("zero parameters encode to all-zero outputs") {
    const ModelParams p(6, 3);
    const auto out = encode(p, TokenSeq{{1, 2}}, HeadMode::Prosper);
    CHECK(out.basic.empty());
    CHECK(out.final_rep.empty());
    for (double e : out.enhancement) {
        CHECK(e == 0.0);
    }
}

TEST_CASE("prosper head agrees with an independent re-computation") {
    const auto p = random_params(10, 4, 42);
    const std::vector<TermId> ids{3, 7};
    const auto out = encode(p, TokenSeq{ids}, HeadMode::Prosper);
    const auto o = oracle(p, ids);
    const auto fin = out.final_rep.to_dense(10);
    const auto bas = out.basic.to_dense(10);
    for (std::size_t t = 0; t < 10; ++t) {
        CAPTURE(t);
        CHECK(std::abs(fin[t] - o.final_rep[t]) < 1e-10);
        CHECK(std::abs(bas[t] - o.basic[t]) < 1e-10);
        CHECK(std::abs(out.enhancement[t] - o.enh[t]) < 1e-10);
    }
    // Oracle outputs, frozen after the first run.
    const std::vector<double> frozen{0.6720405326976725,  0, 0, 0.8223554213179487,  0, 0,
                                     0.16199368334354761, 0.13680278425831779,     0.34739089461248285,
                                     0.50219503667431564};
    for (std::size_t t = 0; t < 10; ++t) {
        CAPTURE(t);
        CHECK(std::abs(o.final_rep[t] - frozen[t]) < 1e-10);
    }
}

TEST_CASE("final equals basic off the literal set and dominates it on the set") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_params(15, 4, 100 + static_cast<std::uint64_t>(trial));
        const auto s = testing::random_seq(rng, 15, 6);
        const auto t = encode_traced(p, s, HeadMode::Prosper);
        const double top = *std::max_element(t.enhancement.begin(), t.enhancement.end());
        for (std::size_t j = 0; j < 15; ++j) {
            if (t.lit.contains(static_cast<TermId>(j))) {
                CHECK(t.final_rep[j] - t.basic[j] == doctest::Approx(top - t.enhancement[j]).epsilon(1e-12));
                CHECK(t.final_rep[j] >= t.basic[j]);
            } else {
                CHECK(t.final_rep[j] == t.basic[j]);
            }
        }
    }
}

TEST_CASE("splade_max equals no_lrn on a sequence of identical tokens") {
    const auto p = random_params(12, 4, 9);
    const TokenSeq s{{6, 6, 6, 6}};
    CHECK(encode(p, s, HeadMode::SpladeMax).final_rep == encode(p, s, HeadMode::NoLrn).final_rep);
}

TEST_CASE("no_lrn and splade_max leave final equal to basic") {
    const auto p = random_params(12, 4, 10);
    const TokenSeq s{{1, 5, 2}};
    for (auto m : {HeadMode::NoLrn, HeadMode::SpladeMax}) {
        const auto out = encode(p, s, m);
        CHECK(out.final_rep == out.basic);
        CHECK(out.enhancement.empty());
    }
}

TEST_CASE("max pooling dominates last pooling") {
    const auto p = random_params(12, 4, 11);
    const TokenSeq s{{1, 5, 2, 8}};
    const auto mx = encode(p, s, HeadMode::SpladeMax).basic.to_dense(12);
    const auto last = encode(p, s, HeadMode::NoLrn).basic.to_dense(12);
    for (std::size_t j = 0; j < 12; ++j) {
        CHECK(mx[j] >= last[j]);
    }
}

TEST_CASE("head backward matches finite differences away from kinks") {
    constexpr double step = 1e-6;
    for (auto mode : {HeadMode::Prosper, HeadMode::SpladeMax, HeadMode::NoLrn}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto p = random_params(8, 4, seed);
            Rng rng(seed);
            const TokenSeq s{{static_cast<TermId>(1 + rng.below(7)), static_cast<TermId>(1 + rng.below(7)), 0}};
            std::vector<double> df(8);
            std::vector<double> db(8);
            for (std::size_t j = 0; j < 8; ++j) {
                df[j] = rng.uniform(-1, 1);
                db[j] = rng.uniform(-1, 1);
            }
            auto objective = [&](const ModelParams &q) {
                const auto t = encode_traced(q, s, mode);
                double f = 0.0;
                for (std::size_t j = 0; j < 8; ++j) {
                    f += df[j] * t.final_rep[j] + db[j] * t.basic[j];
                }
                return f;
            };
            auto g = GradientSet::zeros_like(p);
            head_backward(p, s, encode_traced(p, s, mode), df, db, g);
            auto pt = p.tensors();
            const auto gt = std::as_const(g).tensors();
            for (std::size_t t = 0; t < pt.size(); ++t) {
                for (std::size_t i = 0; i < pt[t].size(); ++i) {
                    const double orig = pt[t][i];
                    pt[t][i] = orig + step;
                    const double fp = objective(p);
                    pt[t][i] = orig - step;
                    const double fm = objective(p);
                    pt[t][i] = orig;
                    const double f0 = objective(p);
                    const double numeric = (fp - fm) / (2 * step);
                    // One-sided slopes differ at a kink; skip those coordinates.
                    const double right = (fp - f0) / step;
                    const double left = (f0 - fm) / step;
                    if (std::abs(right - left) > 1e-3 * std::max(1.0, std::abs(numeric))) {
                        continue;
                    }
                    CHECK(testing::rel_error(gt[t][i], numeric) < 1e-4);
                }
            }
        }
    }
}
