#include <cstring>
#include <string>

#include "doctest.h"
#include "prosper/error.hpp"
#include "prosper/index.hpp"
#include "support.hpp"

using namespace prosper;

namespace {

SparseVec sv(std::initializer_list<TermWeight> e) { return SparseVec::from_entries(e); }

std::string error_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.what();
    }
    return {};
}

void check_block_invariants(const InvertedIndex &idx) {
    for (const auto &pl : idx.lists()) {
        REQUIRE(pl.num_blocks() == (pl.size() + idx.block_size() - 1) / idx.block_size());
        double term_max = 0.0;
        for (std::size_t b = 0; b < pl.num_blocks(); ++b) {
            double m = 0.0;
            const auto end = std::min(pl.size(), (b + 1) * idx.block_size());
            for (auto i = b * idx.block_size(); i < end; ++i) {
                m = std::max(m, pl.weights[i]);
                CHECK(pl.docs[i] < idx.num_docs());
                if (i > 0) {
                    CHECK(pl.docs[i] > pl.docs[i - 1]);
                }
            }
            CHECK(pl.block_max[b] == m);
            CHECK(pl.block_last[b] == pl.docs[end - 1]);
            term_max = std::max(term_max, m);
        }
        CHECK(pl.term_max == term_max);
    }
}

}  // namespace

TEST_CASE("empty stream builds an empty index") {
    const auto idx = InvertedIndex::build({});
    CHECK(idx.num_docs() == 0);
    CHECK(idx.lists().empty());
    CHECK(idx.postings(0) == nullptr);
}

TEST_CASE("two-document example") {
    const std::vector<DocVector> docs{{"d1", sv({{0, 1}})}, {"d2", sv({{0, 2}, {1, 3}})}};
    const auto idx = InvertedIndex::build(docs);
    REQUIRE(idx.num_docs() == 2);
    const auto *a = idx.postings(0);
    REQUIRE(a != nullptr);
    CHECK(a->docs == std::vector<std::uint32_t>{0, 1});
    CHECK(a->weights == std::vector<double>{1.0, 2.0});
    CHECK(a->term_max == 2.0f);
    const auto *b = idx.postings(1);
    REQUIRE(b != nullptr);
    CHECK(b->docs == std::vector<std::uint32_t>{1});
    CHECK(b->term_max == 3.0f);
    CHECK(idx.postings(7) == nullptr);
    CHECK(idx.doc_id(1) == "d2");
}

TEST_CASE("build rejects duplicates and bad arguments") {
    const std::vector<DocVector> dup{{"d", sv({{0, 1}})}, {"d", sv({{1, 1}})}};
    CHECK(error_of([&] { (void)InvertedIndex::build(dup); }).find("duplicate doc_id 'd'") != std::string::npos);
    const std::vector<DocVector> one{{"d", sv({{0, 1}})}};
    CHECK_THROWS_AS((void)InvertedIndex::build(one, 0), Error);
    // A zero weight cannot even be stored in a SparseVec.
    CHECK_THROWS_AS((void)SparseVec::from_entries({{0, 0.0}}), Error);
}

TEST_CASE("fixed16 round-trip stays within half a step") {
    Rng rng(42);
    std::vector<DocVector> docs;
    std::vector<double> raw;
    for (int d = 0; d < 1000; ++d) {
        std::vector<TermWeight> e;
        for (TermId t = 0; t < 10; ++t) {
            const double w = rng.uniform(1e-6, 7.5);
            e.push_back({t * 3, w});
        }
        docs.push_back({"d" + std::to_string(d), SparseVec::from_entries(e)});
    }
    const auto idx = InvertedIndex::build(docs, 64, Quantization::Fixed16);
    REQUIRE(idx.scale() > 0.0f);
    std::size_t checked = 0;
    for (const auto &pl : idx.lists()) {
        for (std::size_t i = 0; i < pl.size(); ++i) {
            const double original = docs[pl.docs[i]].vec.weight_of(pl.term);
            CHECK(std::abs(pl.weights[i] - original) <= idx.scale() / 2.0 * (1 + 1e-12));
            ++checked;
        }
    }
    CHECK(checked == 10000);
}

TEST_CASE("quantization is monotone") {
    Rng rng(8);
    const float scale = 7.5f / 65535.0f;
    for (int i = 0; i < 10000; ++i) {
        double a = rng.uniform(0.0, 7.5);
        double b = rng.uniform(0.0, 7.5);
        if (a > b) {
            std::swap(a, b);
        }
        CHECK(quantize(a, scale) <= quantize(b, scale));
    }
    CHECK(quantize(100.0, scale) == 65535);
    CHECK(quantize(-1.0, scale) == 0);
    CHECK(dequantize(quantize(7.5, scale), scale) == doctest::Approx(7.5).epsilon(1e-6));
}

TEST_CASE("block metadata and posting counts") {
    Rng rng(3);
    for (std::size_t bs : {1u, 2u, 3u, 7u, 64u}) {
        for (auto quant : {Quantization::None, Quantization::Fixed16}) {
            const auto docs = testing::zipf_docs(rng, 200, 40, 1, 12);
            const auto idx = InvertedIndex::build(docs, bs, quant);
            check_block_invariants(idx);
            std::size_t nnz = 0;
            for (const auto &d : docs) {
                nnz += d.vec.nnz();
            }
            CHECK(idx.total_postings() == nnz);
        }
    }
}

TEST_CASE("save and load round-trip") {
    const auto dir = testing::scratch_dir("index");
    const auto empty = InvertedIndex::build({});
    empty.save(dir / "empty.prix");
    CHECK(InvertedIndex::load(dir / "empty.prix") == empty);

    Rng rng(4);
    const auto docs = testing::zipf_docs(rng, 1000, 300, 3, 30);
    for (auto quant : {Quantization::None, Quantization::Fixed16}) {
        const auto idx = InvertedIndex::build(docs, 16, quant);
        idx.save(dir / "i.prix");
        const auto back = InvertedIndex::load(dir / "i.prix");
        CHECK(back == idx);
        CHECK(back.serialize() == idx.serialize());
        for (TermId t = 0; t < 300; ++t) {
            const auto *a = idx.postings(t);
            const auto *b = back.postings(t);
            CHECK((a == nullptr) == (b == nullptr));
        }
    }
}

TEST_CASE("corrupt index files are rejected with offsets") {
    const std::vector<DocVector> docs{{"d1", sv({{0, 1}})}, {"d2", sv({{0, 2}, {1, 3}})}};
    const auto bytes = InvertedIndex::build(docs).serialize();

    auto bad_magic = bytes;
    bad_magic[1] = 'Z';
    CHECK(error_of([&] { (void)InvertedIndex::deserialize(bad_magic); }).find("at offset 0") != std::string::npos);

    auto bad_version = bytes;
    bad_version[4] = 7;
    CHECK(error_of([&] { (void)InvertedIndex::deserialize(bad_version); }).find("at offset 4") !=
          std::string::npos);

    for (std::size_t cut = 1; cut < bytes.size(); ++cut) {
        CAPTURE(cut);
        CHECK(error_of([&] { (void)InvertedIndex::deserialize(bytes.substr(0, cut)); }).find("offset") !=
              std::string::npos);
    }
    CHECK(error_of([&] { (void)InvertedIndex::deserialize(bytes + "x"); }).find("trailing") != std::string::npos);

    // The last posting weight (term 1, doc d2) is the final four bytes.
    auto bad_weight = bytes;
    const float neg = -3.0f;
    std::memcpy(bad_weight.data() + bad_weight.size() - 4, &neg, 4);
    CHECK(error_of([&] { (void)InvertedIndex::deserialize(bad_weight); })
              .find("non-positive or non-finite weight at offset " + std::to_string(bytes.size() - 4)) !=
          std::string::npos);

    auto bad_max = bytes;
    const float three_and_a_bit = 3.5f;
    std::memcpy(bad_max.data() + bad_max.size() - 4, &three_and_a_bit, 4);
    CHECK(error_of([&] { (void)InvertedIndex::deserialize(bad_max); }).find("block max") != std::string::npos);
}

TEST_CASE("quantization names parse") {
    CHECK(parse_quantization("none") == Quantization::None);
    CHECK(parse_quantization("fixed16") == Quantization::Fixed16);
    CHECK_FALSE(parse_quantization("int8"));
}
