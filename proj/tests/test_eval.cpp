#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "prosper/error.hpp"
#include "prosper/eval.hpp"
#include "support.hpp"

using namespace prosper;

namespace {

SparseVec sv(std::initializer_list<TermWeight> e) { return SparseVec::from_entries(e); }

// Ranked list with the single relevant doc "rel" at `rank` (0 = absent).
std::vector<std::string> list_with_hit_at(std::size_t rank, std::size_t len = 20) {
    std::vector<std::string> out;
    for (std::size_t r = 1; r <= len; ++r) {
        out.push_back(r == rank ? "rel" : "x" + std::to_string(r));
    }
    return out;
}

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

TEST_CASE("hit examples") {
    const Qrels qrels{{"q", {"rel"}}};
    CHECK(hit_at_k({{"q", list_with_hit_at(3)}}, qrels, 10) == 1.0);
    CHECK(hit_at_k({{"q", list_with_hit_at(11)}}, qrels, 10) == 0.0);
    CHECK(hit_at_k({{"q", {}}}, qrels, 10) == 0.0);
}

TEST_CASE("mrr examples") {
    const Qrels qrels{{"q", {"rel"}}};
    CHECK(mrr_at_10({{"q", list_with_hit_at(4)}}, qrels) == 0.25);
    CHECK(mrr_at_10({{"q", list_with_hit_at(1)}}, qrels) == 1.0);
    CHECK(mrr_at_10({{"q", list_with_hit_at(12)}}, qrels) == 0.0);
    const Qrels two{{"q", {"rel", "x2"}}};
    CHECK(mrr_at_10({{"q", list_with_hit_at(4)}}, two) == 0.5);
}

TEST_CASE("recall examples") {
    const Qrels qrels{{"q", {"a", "b", "c", "d"}}};
    CHECK(recall_at_k({{"q", {"a", "z", "c"}}}, qrels, 10) == 0.5);
    CHECK(recall_at_k({{"q", {"d", "c", "b", "a"}}}, qrels, 10) == 1.0);
    CHECK(recall_at_k({{"q", {"z"}}}, qrels, 10) == 0.0);
    CHECK(recall_at_k({{"q", {"a", "z", "c"}}}, qrels, 2) == 0.25);
}

TEST_CASE("queries missing from the run count as misses") {
    const Qrels qrels{{"q1", {"rel"}}, {"q2", {"rel"}}};
    const Run run{{"q1", list_with_hit_at(1)}};
    CHECK(hit_at_k(run, qrels, 10) == 0.5);
    CHECK(mrr_at_10(run, qrels) == 0.5);
    CHECK(recall_at_k(run, qrels, 10) == 0.5);
}

TEST_CASE("a run query without judgments is an error") {
    const Qrels qrels{{"q1", {"rel"}}};
    const Run run{{"q1", list_with_hit_at(1)}, {"q9", {"a"}}};
    CHECK(error_of([&] { (void)hit_at_k(run, qrels, 10); }).find("'q9'") != std::string::npos);
    CHECK_THROWS_AS((void)mrr_at_10(run, qrels), Error);
    CHECK_THROWS_AS((void)recall_at_k(run, qrels, 10), Error);
}

TEST_CASE("hit and recall grow with k; recall equals hit for single judgments") {
    Rng rng(4);
    Qrels single;
    Qrels multi;
    Run run;
    for (int q = 0; q < 50; ++q) {
        const auto qid = "q" + std::to_string(q);
        std::vector<std::string> list;
        for (int r = 0; r < 60; ++r) {
            list.push_back("d" + std::to_string(rng.below(100)));
        }
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        rng.shuffle(list.begin(), list.end());
        run[qid] = list;
        single[qid] = {"d" + std::to_string(rng.below(100))};
        for (int j = 0; j < 4; ++j) {
            multi[qid].insert("d" + std::to_string(rng.below(100)));
        }
    }
    double prev_hit = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 1; k <= 70; ++k) {
        const double h = hit_at_k(run, multi, k);
        const double r = recall_at_k(run, multi, k);
        CHECK(h >= prev_hit);
        CHECK(r >= prev_recall);
        prev_hit = h;
        prev_recall = r;
        CHECK(recall_at_k(run, single, k) == hit_at_k(run, single, k));
    }
}

TEST_CASE("run line order within a query does not matter") {
    const auto dir = testing::scratch_dir("eval_run");
    write_text(dir / "a.tsv", "q\td1\t1\t3.0\nq\td2\t2\t2.0\nq\trel\t3\t1.0\n");
    write_text(dir / "b.tsv", "q\trel\t3\t1.0\nq\td1\t1\t3.0\nq\td2\t2\t2.0\n");
    const auto a = read_run(dir / "a.tsv");
    const auto b = read_run(dir / "b.tsv");
    CHECK(a == b);
    CHECK(a.at("q") == std::vector<std::string>{"d1", "d2", "rel"});
    const Qrels qrels{{"q", {"rel"}}};
    CHECK(mrr_at_10(a, qrels) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("run and qrels file errors") {
    const auto dir = testing::scratch_dir("eval_bad");
    write_text(dir / "dup.tsv", "q\td1\t1\t3.0\nq\td2\t1\t2.0\n");
    CHECK(error_of([&] { (void)read_run(dir / "dup.tsv"); }).find("duplicate rank 1") != std::string::npos);
    write_text(dir / "rank0.tsv", "q\td1\t0\t3.0\n");
    CHECK(error_of([&] { (void)read_run(dir / "rank0.tsv"); }).find(":1:") != std::string::npos);
    write_text(dir / "cols.tsv", "q\td1\t1\n");
    CHECK(error_of([&] { (void)read_run(dir / "cols.tsv"); }).find(":1:") != std::string::npos);
    write_text(dir / "score.tsv", "q\td1\t1\tnan\n");
    CHECK_THROWS_AS((void)read_run(dir / "score.tsv"), Error);
    write_text(dir / "qrels.tsv", "");
    CHECK(error_of([&] { (void)read_qrels(dir / "qrels.tsv"); }).find("no relevance judgments") !=
          std::string::npos);
    write_text(dir / "qrels3.tsv", "q\td\textra\n");
    CHECK_THROWS_AS((void)read_qrels(dir / "qrels3.tsv"), Error);
}

TEST_CASE("run and qrels round-trip") {
    const auto dir = testing::scratch_dir("eval_rt");
    const Qrels qrels{{"q1", {"a", "b"}}, {"q2", {"c"}}};
    write_qrels(dir / "q.tsv", qrels);
    CHECK(read_qrels(dir / "q.tsv") == qrels);
    const std::vector<RunEntry> entries{{"q1", "a", 1, 2.5}, {"q1", "c", 2, 1.25}, {"q2", "c", 1, 0.5}};
    write_run(dir / "r.tsv", entries);
    const auto run = read_run(dir / "r.tsv");
    CHECK(run.at("q1") == std::vector<std::string>{"a", "c"});
    CHECK(format_run(entries).substr(0, 13) == "q1\ta\t1\t2.5\nq1");
}

TEST_CASE("flops_overlap") {
    const std::vector<SparseVec> qab{sv({{0, 1}, {1, 1}})};
    const std::vector<SparseVec> dbc{sv({{1, 1}, {2, 1}})};
    CHECK(flops_overlap(qab, dbc) == 1.0);
    const std::vector<SparseVec> dz{sv({{7, 1}})};
    CHECK(flops_overlap(qab, dz) == 0.0);
    const std::vector<SparseVec> five{sv({{1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 2}})};
    CHECK(flops_overlap(five, five) == 5.0);
    CHECK_THROWS_AS((void)flops_overlap(std::vector<SparseVec>{}, five), Error);

    // Enumerated pairs average exactly; sampling is seeded and close to it.
    Rng rng(6);
    std::vector<SparseVec> qs;
    std::vector<SparseVec> ds;
    for (int i = 0; i < 200; ++i) {
        qs.push_back(testing::random_sparse(rng, 30, 10));
        ds.push_back(testing::random_sparse(rng, 30, 10));
    }
    double exact = 0.0;
    for (const auto &q : qs) {
        for (const auto &d : ds) {
            exact += static_cast<double>(support_overlap(q, d));
        }
    }
    exact /= 200.0 * 200.0;
    CHECK(flops_overlap(qs, ds, 1, 40000) == doctest::Approx(exact).epsilon(1e-12));
    const double sampled = flops_overlap(qs, ds, 1);
    CHECK(sampled == flops_overlap(qs, ds, 1));
    CHECK(std::abs(sampled - exact) < 0.1);
}

TEST_CASE("mask_terms partitions a vector") {
    const LiteralIndicator lit{{1, 3}};
    const auto lit_only = sv({{1, 0.5}, {3, 2}});
    CHECK(mask_terms(lit_only, lit, MaskKeep::LiteralOnly) == lit_only);
    CHECK(mask_terms(lit_only, lit, MaskKeep::ExpansionOnly).empty());

    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto v = testing::random_sparse(rng, 20, 12);
        const auto l = LiteralIndicator::of(testing::random_seq(rng, 20, 6));
        const auto a = mask_terms(v, l, MaskKeep::LiteralOnly);
        const auto b = mask_terms(v, l, MaskKeep::ExpansionOnly);
        CHECK(a.nnz() + b.nnz() == v.nnz());
        CHECK(support_overlap(a, b) == 0);
        std::vector<TermWeight> all(a.entries().begin(), a.entries().end());
        all.insert(all.end(), b.entries().begin(), b.entries().end());
        CHECK(SparseVec::from_entries(all) == v);
    }
}

TEST_CASE("metrics report") {
    const Qrels qrels{{"q1", {"rel"}}, {"q2", {"rel", "never"}}};
    const Run run{{"q1", list_with_hit_at(2)}, {"q2", list_with_hit_at(15)}};
    auto report = evaluate(run, qrels);
    CHECK(report.num_queries == 2);
    CHECK(report.multi_relevant_queries == 1);
    CHECK(report.hit.at(1) == 0.0);
    CHECK(report.hit.at(10) == 0.5);
    CHECK(report.mrr10 == 0.25);
    CHECK(report.recall.at(10) == 0.5);
    CHECK(report.recall.at(100) == 0.75);

    const std::vector<std::string> only{"HIT@10", "mrr@10"};
    const auto table = report.to_table(only);
    CHECK(table.find("hit@10") != std::string::npos);
    CHECK(table.find("0.5000") != std::string::npos);
    CHECK(table.find("recall") == std::string::npos);

    auto j = nlohmann::json::parse(report.to_json());
    CHECK(j.at("num_queries") == 2);
    CHECK(j.at("hit@1000") == 1.0);
    CHECK_FALSE(j.contains("flops_overlap"));
    report.flops_overlap = 3.5;
    j = nlohmann::json::parse(report.to_json());
    CHECK(j.at("flops_overlap") == 3.5);

    const std::vector<std::string> bad{"ndcg@10"};
    CHECK(error_of([&] { (void)report.to_table(bad); }).find("unknown metric 'ndcg@10'") != std::string::npos);
}
