#include <algorithm>
#include <fstream>

#include "doctest.h"
#include "prosper/binio.hpp"
#include "prosper/corpus.hpp"
#include "prosper/error.hpp"
#include "support.hpp"

using namespace prosper;

namespace {

void write_text(const std::filesystem::path &p, const std::string &s) {
    std::ofstream(p, std::ios::binary) << s;
}

std::string error_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("build_vocab orders by frequency then lexicographically") {
    const std::vector<std::string> texts{"a b", "b c"};
    const auto v = Vocab::build(texts, 4);
    CHECK(v.terms() == std::vector<std::string>{"[UNK]", "b", "a", "c"});
    for (TermId i = 0; i < v.size(); ++i) {
        CHECK(v.id_of(v.term(i)) == i);
    }
}

TEST_CASE("build_vocab caps the size and keeps the unknown id") {
    const std::vector<std::string> one{"x"};
    CHECK(Vocab::build(one, 2).terms() == std::vector<std::string>{"[UNK]", "x"});
    const std::vector<std::string> texts{"a b c d a b a"};
    CHECK(Vocab::build(texts, 3).terms() == std::vector<std::string>{"[UNK]", "a", "b"});
}

TEST_CASE("build_vocab rejects an empty corpus and a size below 2") {
    const std::vector<std::string> none;
    CHECK(error_of([&] { (void)Vocab::build(none, 10); }) == "empty corpus");
    const std::vector<std::string> texts{"a"};
    CHECK_THROWS_AS((void)Vocab::build(texts, 1), Error);
}

TEST_CASE("build_vocab ignores input order") {
    std::vector<std::string> texts{"red shoe", "blue shoe lace", "red red hat", "lace hat", "shoe"};
    const auto ref = Vocab::build(texts, 100);
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        rng.shuffle(texts.begin(), texts.end());
        CHECK(Vocab::build(texts, 100) == ref);
    }
}

TEST_CASE("tokenize maps known words, unknowns to 0 and truncates") {
    const auto v = Vocab::from_terms({"[UNK]", "red", "shoe"});
    CHECK(tokenize(v, "red shoe").ids == std::vector<TermId>{1, 2});
    CHECK(tokenize(v, "zzz").ids == std::vector<TermId>{0});
    CHECK(tokenize(v, "  RED\tShoe ").ids == std::vector<TermId>{1, 2});

    std::string long_text;
    for (int i = 0; i < 100; ++i) {
        long_text += (i % 2 ? "red " : "shoe ");
    }
    const auto s = tokenize(v, long_text);
    REQUIRE(s.size() == 64);
    CHECK(s.ids.front() == 2);
    CHECK(s.ids[1] == 1);
    CHECK(tokenize(v, long_text, 5).size() == 5);
}

TEST_CASE("tokenize rejects blank text") {
    const auto v = Vocab::from_terms({"[UNK]", "a"});
    CHECK(error_of([&] { (void)tokenize(v, "   \t "); }) == "empty text");
    CHECK(error_of([&] { (void)tokenize(v, ""); }) == "empty text");
}

TEST_CASE("tokenize is deterministic and emits valid ids") {
    const std::vector<std::string> texts{"a b c", "c d e f", "g"};
    const auto v = Vocab::build(texts, 4);
    for (const auto &t : {"a b c d e f g h", "c c c", "q"}) {
        const auto s1 = tokenize(v, t);
        CHECK(s1 == tokenize(v, t));
        for (auto id : s1.ids) {
            CHECK(id < v.size());
        }
    }
}

TEST_CASE("vocab file round-trips and validates") {
    const auto dir = testing::scratch_dir("vocab");
    const std::vector<std::string> texts{"alpha beta", "beta gamma"};
    const auto v = Vocab::build(texts, 10);
    v.save(dir / "v.txt");
    CHECK(Vocab::load(dir / "v.txt") == v);
    write_text(dir / "bad.txt", "alpha\nbeta\n");
    CHECK_THROWS_AS((void)Vocab::load(dir / "bad.txt"), Error);
    write_text(dir / "dup.txt", "[UNK]\na\na\n");
    CHECK_THROWS_AS((void)Vocab::load(dir / "dup.txt"), Error);
}

TEST_CASE("load_pairs parses rows in file order") {
    const auto dir = testing::scratch_dir("pairs");
    write_text(dir / "p.tsv", "q1\tred shoe\ti1\tred running shoe\nq2\tblue hat\ti2\tnavy hat\n");
    const std::vector<std::string> texts{"red shoe blue hat running navy"};
    const auto v = Vocab::build(texts, 20);
    const auto pairs = load_pairs(dir / "p.tsv", v);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].query_id == "q1");
    CHECK(pairs[1].item_id == "i2");
    CHECK(pairs[0].item.size() == 3);
}

TEST_CASE("load_pairs reports malformed rows with their line number") {
    const auto dir = testing::scratch_dir("pairs_bad");
    write_text(dir / "p.tsv", "q1\ta\ti1\tb\nq2\ta\ti2\n");
    const auto msg = error_of([&] { (void)read_pairs_tsv(dir / "p.tsv"); });
    CHECK(msg.find(":2:") != std::string::npos);
    write_text(dir / "empty.tsv", "");
    CHECK(error_of([&] { (void)read_pairs_tsv(dir / "empty.tsv"); }).find("empty corpus") != std::string::npos);
    write_text(dir / "crlf.tsv", "q1\ta\ti1\tb\r\n");
    CHECK(error_of([&] { (void)read_pairs_tsv(dir / "crlf.tsv"); }).find(":1:") != std::string::npos);
}

TEST_CASE("pairs TSV and corpus JSONL round-trip") {
    const auto dir = testing::scratch_dir("roundtrip");
    const std::vector<RawPair> pairs{{"q1", "a b", "i1", "c d"}, {"q2", "e", "i2", "f g h"}};
    write_pairs_tsv(dir / "p.tsv", pairs);
    CHECK(read_pairs_tsv(dir / "p.tsv") == pairs);

    const std::vector<TextRecord> recs{{"x", "hello \"world\""}, {"y", "tab\there"}};
    write_corpus_jsonl(dir / "c.jsonl", recs);
    CHECK(read_corpus_jsonl(dir / "c.jsonl") == recs);

    write_text(dir / "dup.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
    CHECK(error_of([&] { (void)read_corpus_jsonl(dir / "dup.jsonl"); }).find(":2:") != std::string::npos);
    write_text(dir / "typ.jsonl", "{\"id\":1,\"text\":\"x\"}\n");
    CHECK_THROWS_AS((void)read_corpus_jsonl(dir / "typ.jsonl"), Error);
}
