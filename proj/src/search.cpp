#include "prosper/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "prosper/error.hpp"

namespace prosper {

namespace {

constexpr std::uint32_t kEnd = std::numeric_limits<std::uint32_t>::max();

// Upper bounds and exact scores are summed in different orders; the relative
// slack keeps a bound from landing a few ulps under the score it bounds.
constexpr double kBoundSlack = 1e-12;

bool ranks_before(const ScoredDoc &a, const ScoredDoc &b) {
    return a.score > b.score || (a.score == b.score && a.ord < b.ord);
}

// Min-heap of the k best documents seen so far, ordinals arriving in
// ascending order.
class TopK {
  public:
    explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

    [[nodiscard]] double threshold() const { return heap_.size() < k_ ? 0.0 : heap_.front().score; }

    /// A later ordinal never wins a tie, so entry needs a strictly larger score.
    [[nodiscard]] bool bound_allows(double upper_bound) const {
        return upper_bound * (1.0 + kBoundSlack) > threshold();
    }

    bool insert(double score, std::uint32_t ord) {
        if (!(score > threshold())) {
            return false;
        }
        if (heap_.size() == k_) {
            std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
            heap_.pop_back();
        }
        heap_.push_back({ord, score});
        std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        return heap_.size() == k_;
    }

    SearchResult finish() {
        std::sort(heap_.begin(), heap_.end(), ranks_before);
        return {std::move(heap_)};
    }

  private:
    std::size_t k_;
    std::vector<ScoredDoc> heap_;
};

struct Cursor {
    const PostingList *pl = nullptr;
    std::size_t block_size = 0;
    double qw = 0.0;
    double ub = 0.0;
    std::size_t slot = 0;   // position of the term in the query (term-id order)
    std::size_t pos = 0;    // current posting
    std::size_t shallow = 0;  // block consulted for block-max bounds

    [[nodiscard]] std::uint32_t doc() const { return pos < pl->size() ? pl->docs[pos] : kEnd; }
    [[nodiscard]] double contribution() const { return qw * static_cast<double>(pl->weights[pos]); }

    void next_geq(std::uint32_t target, SearchStats &stats) {
        if (doc() >= target) {
            return;
        }
        std::size_t blk = pos / block_size;
        std::size_t b = blk;
        while (b < pl->num_blocks() && pl->block_last[b] < target) {
            ++b;
        }
        if (b > blk) {
            stats.blocks_skipped += b - blk - (pos % block_size == 0 ? 0 : 1);
            pos = std::min(pl->size(), b * block_size);
        }
        while (pos < pl->size() && pl->docs[pos] < target) {
            ++pos;
        }
    }

    // Max weight of the block that would hold `target`; 0 past the list end.
    double block_bound(std::uint32_t target) {
        shallow = std::max(shallow, pos / block_size);
        while (shallow < pl->num_blocks() && pl->block_last[shallow] < target) {
            ++shallow;
        }
        return shallow < pl->num_blocks() ? qw * static_cast<double>(pl->block_max[shallow]) : 0.0;
    }
};

void check_query(const QueryVec &q, std::size_t k) {
    require(k >= 1, "k must be at least 1");
    require(q.terms.size() == q.weights.size(), "query terms and weights differ in length");
    for (std::size_t i = 0; i < q.size(); ++i) {
        require(i == 0 || q.terms[i - 1] < q.terms[i], "query terms must be strictly increasing");
        require(std::isfinite(q.weights[i]) && q.weights[i] > 0.0f, "query weights must be finite and positive");
    }
}

}  // namespace

QueryVec truncate_query(const SparseVec &w, std::size_t m) {
    require(m >= 1, "query term budget must be at least 1");
    QueryVec q;
    const auto kept = top_k_by_weight(w, m);
    for (const auto &e : kept.entries()) {
        const auto f = static_cast<float>(e.weight);
        if (f > 0.0f) {
            q.terms.push_back(e.term);
            q.weights.push_back(f);
        }
    }
    return q;
}

QueryVec scale_query(const QueryVec &q, float alpha) {
    require(alpha > 0.0f, "query scale must be positive");
    QueryVec out = q;
    for (auto &w : out.weights) {
        w *= alpha;
    }
    return out;
}

SearchResult search_exhaustive(const InvertedIndex &idx, const QueryVec &q, std::size_t k) {
    check_query(q, k);
    std::vector<double> acc(idx.num_docs(), 0.0);
    std::vector<char> seen(idx.num_docs(), 0);
    std::vector<std::uint32_t> touched;
    for (std::size_t t = 0; t < q.size(); ++t) {
        const auto *pl = idx.postings(q.terms[t]);
        if (pl == nullptr) {
            continue;
        }
        const double qw = q.weights[t];
        for (std::size_t i = 0; i < pl->size(); ++i) {
            const auto d = pl->docs[i];
            if (!seen[d]) {
                seen[d] = 1;
                touched.push_back(d);
            }
            acc[d] += qw * static_cast<double>(pl->weights[i]);
        }
    }
    SearchResult res;
    for (auto d : touched) {
        if (acc[d] > 0.0) {
            res.hits.push_back({d, acc[d]});
        }
    }
    const auto n = std::min(k, res.hits.size());
    std::partial_sort(res.hits.begin(), res.hits.begin() + static_cast<std::ptrdiff_t>(n), res.hits.end(),
                      ranks_before);
    res.hits.resize(n);
    return res;
}

SearchResult search_bmm(const InvertedIndex &idx, const QueryVec &q, std::size_t k, SearchStats *stats_out) {
    check_query(q, k);
    SearchStats stats;
    std::vector<Cursor> cursors;
    for (std::size_t t = 0; t < q.size(); ++t) {
        const auto *pl = idx.postings(q.terms[t]);
        if (pl == nullptr) {
            continue;
        }
        Cursor c;
        c.pl = pl;
        c.block_size = idx.block_size();
        c.qw = q.weights[t];
        c.ub = c.qw * static_cast<double>(pl->term_max);
        c.slot = t;
        cursors.push_back(c);
    }
    TopK top(k);
    if (cursors.empty()) {
        if (stats_out) {
            *stats_out = stats;
        }
        return top.finish();
    }

    // Increasing upper bound; prefix[i] bounds any doc matching only order[0..i].
    std::vector<Cursor *> order;
    for (auto &c : cursors) {
        order.push_back(&c);
    }
    std::stable_sort(order.begin(), order.end(), [](const Cursor *a, const Cursor *b) { return a->ub < b->ub; });
    std::vector<double> prefix(order.size());
    double running = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        running += order[i]->ub;
        prefix[i] = running;
    }

    std::vector<double> contrib(q.size(), 0.0);
    std::vector<double> block_bounds(order.size(), 0.0);
    std::size_t non_essential = 0;
    std::uint32_t cur = kEnd;
    for (const auto *c : order) {
        cur = std::min(cur, c->doc());
    }

    while (non_essential < order.size() && cur < idx.num_docs()) {
        double partial = 0.0;
        std::uint32_t next = kEnd;
        for (std::size_t i = non_essential; i < order.size(); ++i) {
            auto *c = order[i];
            if (c->doc() == cur) {
                contrib[c->slot] = c->contribution();
                partial += contrib[c->slot];
                ++c->pos;
            }
            next = std::min(next, c->doc());
        }

        double bound = 0.0;
        for (std::size_t i = 0; i < non_essential; ++i) {
            block_bounds[i] = order[i]->block_bound(cur);
            bound += block_bounds[i];
        }
        bool alive = top.bound_allows(partial + bound);
        for (std::size_t i = non_essential; alive && i-- > 0;) {
            auto *c = order[i];
            bound -= block_bounds[i];
            c->next_geq(cur, stats);
            if (c->doc() == cur) {
                contrib[c->slot] = c->contribution();
                partial += contrib[c->slot];
            }
            alive = top.bound_allows(partial + bound);
        }

        if (alive) {
            // Sum in query-term order so the score is bit-identical to the
            // term-at-a-time oracle.
            double score = 0.0;
            for (double x : contrib) {
                score += x;
            }
            ++stats.docs_scored;
            if (top.insert(score, cur)) {
                while (non_essential < order.size() && !top.bound_allows(prefix[non_essential])) {
                    ++non_essential;
                }
            }
        } else {
            ++stats.docs_pruned;
        }
        std::fill(contrib.begin(), contrib.end(), 0.0);
        cur = next;
    }
    if (stats_out) {
        *stats_out = stats;
    }
    return top.finish();
}

std::optional<Engine> parse_engine(std::string_view s) {
    if (s == "bmm") {
        return Engine::Bmm;
    }
    if (s == "exhaustive") {
        return Engine::Exhaustive;
    }
    if (s == "bm25") {
        return Engine::Bm25;
    }
    return std::nullopt;
}

Bm25Stats Bm25Stats::build(std::span<const TokenSeq> docs, Bm25Params params) {
    require(params.k1 >= 0.0 && params.b >= 0.0 && params.b <= 1.0 && params.delta >= 0.0,
            "BM25 parameters out of range");
    Bm25Stats s;
    s.params_ = params;
    double total = 0.0;
    for (const auto &d : docs) {
        std::map<TermId, std::uint32_t> tf;
        for (auto id : d.ids) {
            if (id != Vocab::kUnknown) {
                ++tf[id];
            }
        }
        std::vector<std::pair<TermId, std::uint32_t>> row(tf.begin(), tf.end());
        for (const auto &[t, n] : row) {
            if (t >= s.df_.size()) {
                s.df_.resize(static_cast<std::size_t>(t) + 1, 0);
            }
            ++s.df_[t];
        }
        s.doc_tf_.push_back(std::move(row));
        s.doc_len_.push_back(static_cast<double>(d.size()));
        total += static_cast<double>(d.size());
    }
    s.avgdl_ = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
    return s;
}

std::size_t Bm25Stats::tf(std::size_t doc, TermId t) const {
    const auto &row = doc_tf_.at(doc);
    auto it = std::lower_bound(row.begin(), row.end(), t, [](const auto &e, TermId x) { return e.first < x; });
    return (it != row.end() && it->first == t) ? it->second : 0;
}

double Bm25Stats::idf(TermId t) const noexcept {
    const double n = static_cast<double>(num_docs());
    const double d = static_cast<double>(df(t));
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

double Bm25Stats::term_weight(TermId t, std::size_t tf, double dl) const noexcept {
    if (tf == 0) {
        return 0.0;
    }
    const auto &p = params_;
    const double f = static_cast<double>(tf);
    const double norm = avgdl_ > 0.0 ? dl / avgdl_ : 1.0;
    return idf(t) * (f * (p.k1 + 1.0) / (f + p.k1 * (1.0 - p.b + p.b * norm)) + p.delta);
}

SparseVec Bm25Stats::doc_vector(std::size_t doc) const {
    std::vector<TermWeight> e;
    for (const auto &[t, n] : doc_tf_.at(doc)) {
        e.push_back({t, term_weight(t, n, doc_len_[doc])});
    }
    return SparseVec::from_entries(std::move(e));
}

double bm25_score(const Bm25Stats &stats, std::span<const TermId> query, std::size_t doc) {
    require(doc < stats.num_docs(), "BM25 doc ordinal out of range");
    double s = 0.0;
    for (auto t : query) {
        if (t == Vocab::kUnknown) {
            continue;
        }
        s += stats.term_weight(t, stats.tf(doc, t), stats.doc_length(doc));
    }
    return s;
}

InvertedIndex build_bm25_index(const Bm25Stats &stats, std::span<const std::string> doc_ids, std::size_t block_size) {
    require(doc_ids.size() == stats.num_docs(), "BM25 doc id count does not match statistics");
    std::vector<DocVector> docs;
    docs.reserve(doc_ids.size());
    for (std::size_t d = 0; d < doc_ids.size(); ++d) {
        docs.push_back({doc_ids[d], stats.doc_vector(d)});
    }
    return InvertedIndex::build(docs, block_size, Quantization::None);
}

QueryVec bm25_query(const TokenSeq &q) {
    std::map<TermId, float> counts;
    for (auto id : q.ids) {
        if (id != Vocab::kUnknown) {
            counts[id] += 1.0f;
        }
    }
    QueryVec out;
    for (const auto &[t, n] : counts) {
        out.terms.push_back(t);
        out.weights.push_back(n);
    }
    return out;
}

}  // namespace prosper
