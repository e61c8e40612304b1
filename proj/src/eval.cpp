#include "prosper/eval.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "prosper/binio.hpp"
#include "prosper/error.hpp"
#include "prosper/rng.hpp"

namespace prosper {

namespace {

[[noreturn]] void line_error(const std::filesystem::path &path, std::size_t line, const std::string &msg) {
    fail(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": " + msg);
}

void check_run_queries(const Run &run, const Qrels &qrels) {
    require(!qrels.empty(), "qrels are empty");
    for (const auto &[qid, docs] : run) {
        if (!qrels.contains(qid)) {
            fail(ErrorKind::InvalidArgument, "run query '" + qid + "' has no relevance judgments");
        }
    }
}

const std::vector<std::string> &ranked_for(const Run &run, const std::string &qid) {
    static const std::vector<std::string> kEmpty;
    auto it = run.find(qid);
    return it == run.end() ? kEmpty : it->second;
}

}  // namespace

Qrels read_qrels(const std::filesystem::path &path) {
    const auto text = read_file(path);
    Qrels q;
    std::size_t lineno = 0;
    for (auto line : split_lines(text)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        auto cols = split(line, '\t');
        if (cols.size() != 2 || cols[0].empty() || cols[1].empty()) {
            line_error(path, lineno, "expected query_id<TAB>doc_id");
        }
        q[std::string(cols[0])].insert(std::string(cols[1]));
    }
    if (q.empty()) {
        fail(ErrorKind::Format, path.string() + ": no relevance judgments");
    }
    return q;
}

void write_qrels(const std::filesystem::path &path, const Qrels &qrels) {
    std::string out;
    for (const auto &[qid, docs] : qrels) {
        for (const auto &d : docs) {
            out += qid + '\t' + d + '\n';
        }
    }
    write_file_atomic(path, out);
}

Run read_run(const std::filesystem::path &path) {
    const auto text = read_file(path);
    std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> rows;
    std::size_t lineno = 0;
    for (auto line : split_lines(text)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        auto cols = split(line, '\t');
        if (cols.size() != 4) {
            line_error(path, lineno, "expected 4 tab-separated columns");
        }
        std::size_t rank = 0;
        auto [p, ec] = std::from_chars(cols[2].data(), cols[2].data() + cols[2].size(), rank);
        if (ec != std::errc() || p != cols[2].data() + cols[2].size() || rank == 0) {
            line_error(path, lineno, "rank must be a positive integer");
        }
        double score = 0.0;
        auto [ps, es] = std::from_chars(cols[3].data(), cols[3].data() + cols[3].size(), score);
        if (es != std::errc() || ps != cols[3].data() + cols[3].size() || !std::isfinite(score)) {
            line_error(path, lineno, "score must be a finite number");
        }
        rows[std::string(cols[0])].emplace_back(rank, std::string(cols[1]));
    }
    Run run;
    for (auto &[qid, list] : rows) {
        std::sort(list.begin(), list.end());
        for (std::size_t i = 1; i < list.size(); ++i) {
            if (list[i].first == list[i - 1].first) {
                fail(ErrorKind::Format, path.string() + ": duplicate rank " + std::to_string(list[i].first) +
                                            " for query '" + qid + "'");
            }
        }
        auto &out = run[qid];
        for (auto &[r, doc] : list) {
            out.push_back(std::move(doc));
        }
    }
    return run;
}

std::string format_run(std::span<const RunEntry> entries) {
    std::string out;
    char buf[64];
    for (const auto &e : entries) {
        std::snprintf(buf, sizeof(buf), "%.9g", e.score);
        out += e.query_id + '\t' + e.doc_id + '\t' + std::to_string(e.rank) + '\t' + buf + '\n';
    }
    return out;
}

void write_run(const std::filesystem::path &path, std::span<const RunEntry> entries) {
    write_file_atomic(path, format_run(entries));
}

double hit_at_k(const Run &run, const Qrels &qrels, std::size_t k) {
    check_run_queries(run, qrels);
    double hits = 0.0;
    for (const auto &[qid, rel] : qrels) {
        const auto &ranked = ranked_for(run, qid);
        const auto n = std::min(k, ranked.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (rel.contains(ranked[i])) {
                hits += 1.0;
                break;
            }
        }
    }
    return hits / static_cast<double>(qrels.size());
}

double mrr_at_10(const Run &run, const Qrels &qrels) {
    check_run_queries(run, qrels);
    double total = 0.0;
    for (const auto &[qid, rel] : qrels) {
        const auto &ranked = ranked_for(run, qid);
        const auto n = std::min<std::size_t>(10, ranked.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (rel.contains(ranked[i])) {
                total += 1.0 / static_cast<double>(i + 1);
                break;
            }
        }
    }
    return total / static_cast<double>(qrels.size());
}

double recall_at_k(const Run &run, const Qrels &qrels, std::size_t k) {
    check_run_queries(run, qrels);
    double total = 0.0;
    for (const auto &[qid, rel] : qrels) {
        const auto &ranked = ranked_for(run, qid);
        const auto n = std::min(k, ranked.size());
        std::size_t found = 0;
        for (std::size_t i = 0; i < n; ++i) {
            found += rel.contains(ranked[i]) ? 1 : 0;
        }
        total += static_cast<double>(found) / static_cast<double>(rel.size());
    }
    return total / static_cast<double>(qrels.size());
}

double flops_overlap(std::span<const SparseVec> queries, std::span<const SparseVec> items, std::uint64_t seed,
                     std::size_t max_pairs) {
    if (queries.empty() || items.empty() || max_pairs == 0) {
        fail(ErrorKind::InvalidArgument, "flops_overlap: empty sample");
    }
    double sum = 0.0;
    std::size_t n = 0;
    if (queries.size() <= max_pairs / items.size()) {
        for (const auto &q : queries) {
            for (const auto &d : items) {
                sum += static_cast<double>(support_overlap(q, d));
                ++n;
            }
        }
    } else {
        Rng rng(seed);
        for (; n < max_pairs; ++n) {
            const auto &q = queries[rng.below(queries.size())];
            const auto &d = items[rng.below(items.size())];
            sum += static_cast<double>(support_overlap(q, d));
        }
    }
    return sum / static_cast<double>(n);
}

SparseVec mask_terms(const SparseVec &vec, const LiteralIndicator &lit, MaskKeep keep) {
    std::vector<TermWeight> out;
    for (const auto &e : vec.entries()) {
        if (lit.contains(e.term) == (keep == MaskKeep::LiteralOnly)) {
            out.push_back(e);
        }
    }
    return SparseVec::from_entries(std::move(out));
}

MetricsReport evaluate(const Run &run, const Qrels &qrels) {
    MetricsReport r;
    r.num_queries = qrels.size();
    for (const auto &[qid, rel] : qrels) {
        r.multi_relevant_queries += rel.size() > 1 ? 1 : 0;
    }
    for (std::size_t k : {1, 10, 100, 1000}) {
        r.hit[k] = hit_at_k(run, qrels, k);
    }
    r.mrr10 = mrr_at_10(run, qrels);
    for (std::size_t k : {10, 100, 1000}) {
        r.recall[k] = recall_at_k(run, qrels, k);
    }
    return r;
}

std::vector<std::pair<std::string, double>> MetricsReport::rows() const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto &[k, v] : hit) {
        out.emplace_back("hit@" + std::to_string(k), v);
    }
    out.emplace_back("mrr@10", mrr10);
    for (const auto &[k, v] : recall) {
        out.emplace_back("recall@" + std::to_string(k), v);
    }
    if (flops_overlap >= 0.0) {
        out.emplace_back("flops_overlap", flops_overlap);
    }
    return out;
}

namespace {

std::vector<std::pair<std::string, double>> selected_rows(const MetricsReport &r, std::span<const std::string> only) {
    auto all = r.rows();
    if (only.empty()) {
        return all;
    }
    std::vector<std::pair<std::string, double>> out;
    for (const auto &name : only) {
        std::string key;
        for (char c : name) {
            key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        auto it = std::find_if(all.begin(), all.end(), [&](const auto &row) { return row.first == key; });
        if (it == all.end()) {
            fail(ErrorKind::InvalidArgument, "unknown metric '" + name + "'");
        }
        out.push_back(*it);
    }
    return out;
}

}  // namespace

std::string MetricsReport::to_json(std::span<const std::string> only) const {
    nlohmann::ordered_json j;
    j["num_queries"] = num_queries;
    for (const auto &[name, v] : selected_rows(*this, only)) {
        j[name] = v;
    }
    return j.dump(2);
}

std::string MetricsReport::to_table(std::span<const std::string> only) const {
    std::string out;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-14s %10zu\n", "queries", num_queries);
    out += buf;
    for (const auto &[name, v] : selected_rows(*this, only)) {
        std::snprintf(buf, sizeof(buf), "%-14s %10.4f\n", name.c_str(), v);
        out += buf;
    }
    return out;
}

}  // namespace prosper
