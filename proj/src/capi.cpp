#include "prosper/prosper.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "prosper/bench.hpp"
#include "prosper/binio.hpp"
#include "prosper/corpus.hpp"
#include "prosper/encoder.hpp"
#include "prosper/error.hpp"
#include "prosper/eval.hpp"
#include "prosper/head.hpp"
#include "prosper/index.hpp"
#include "prosper/parallel.hpp"
#include "prosper/search.hpp"
#include "prosper/synth.hpp"
#include "prosper/training.hpp"
#include "prosper/vecfile.hpp"

struct prsp_vocab {
    prosper::Vocab v;
};
struct prsp_config {
    prosper::TrainConfig c;
};
struct prsp_model {
    prosper::ModelParams p;
};
struct prsp_index {
    prosper::InvertedIndex idx;
};

namespace {

thread_local std::string g_last_error;

prsp_status status_of(prosper::ErrorKind k) {
    switch (k) {
    case prosper::ErrorKind::InvalidArgument:
        return PRSP_ERR_INVALID_ARGUMENT;
    case prosper::ErrorKind::Io:
        return PRSP_ERR_IO;
    case prosper::ErrorKind::Format:
        return PRSP_ERR_FORMAT;
    case prosper::ErrorKind::Numeric:
        return PRSP_ERR_NUMERIC;
    }
    return PRSP_ERR_INTERNAL;
}

template <typename Fn>
prsp_status guard(Fn &&fn) noexcept {
    try {
        g_last_error.clear();
        fn();
        return PRSP_OK;
    } catch (const prosper::Error &e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc &) {
        g_last_error = "out of memory";
        return PRSP_ERR_INTERNAL;
    } catch (const std::exception &e) {
        g_last_error = e.what();
        return PRSP_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return PRSP_ERR_INTERNAL;
    }
}

template <typename T>
void need(const T *ptr, const char *name) {
    if (ptr == nullptr) {
        prosper::fail(prosper::ErrorKind::InvalidArgument, std::string(name) + " must not be null");
    }
}

char *dup_string(const std::string &s) {
    auto *out = static_cast<char *>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

prosper::HeadMode head_mode(prsp_head_mode m) {
    switch (m) {
    case PRSP_HEAD_PROSPER:
        return prosper::HeadMode::Prosper;
    case PRSP_HEAD_SPLADE_MAX:
        return prosper::HeadMode::SpladeMax;
    case PRSP_HEAD_NO_LRN:
        return prosper::HeadMode::NoLrn;
    }
    prosper::fail(prosper::ErrorKind::InvalidArgument, "unknown head mode");
}

prosper::QueryVec make_query(const prosper::SparseVec &v, std::size_t query_terms) {
    return prosper::truncate_query(v, query_terms);
}

prosper::SearchResult run_engine(const prosper::InvertedIndex &idx, const prosper::QueryVec &q, std::size_t topk,
                                 prsp_engine engine) {
    switch (engine) {
    case PRSP_ENGINE_BMM:
        return prosper::search_bmm(idx, q, topk);
    case PRSP_ENGINE_EXHAUSTIVE:
        return prosper::search_exhaustive(idx, q, topk);
    }
    prosper::fail(prosper::ErrorKind::InvalidArgument, "unknown search engine");
}

void append_hits(std::vector<prosper::RunEntry> &run, const prosper::InvertedIndex &idx, const std::string &qid,
                 const prosper::SearchResult &res) {
    std::size_t rank = 1;
    for (const auto &h : res.hits) {
        run.push_back({qid, idx.doc_id(h.ord), rank++, h.score});
    }
}

}  // namespace

extern "C" {

const char *prsp_version(void) { return "0.1.0"; }

const char *prsp_last_error(void) { return g_last_error.c_str(); }

void prsp_string_free(char *s) { std::free(s); }

prsp_status prsp_head_mode_parse(const char *name, prsp_head_mode *out) {
    return guard([&] {
        need(name, "name");
        need(out, "out");
        const auto m = prosper::parse_head_mode(name);
        if (!m) {
            prosper::fail(prosper::ErrorKind::InvalidArgument,
                          std::string("unknown head mode '") + name + "' (expected prosper, splade_max or no_lrn)");
        }
        *out = *m == prosper::HeadMode::Prosper     ? PRSP_HEAD_PROSPER
               : *m == prosper::HeadMode::SpladeMax ? PRSP_HEAD_SPLADE_MAX
                                                    : PRSP_HEAD_NO_LRN;
    });
}

prsp_status prsp_quantization_parse(const char *name, prsp_quantization *out) {
    return guard([&] {
        need(name, "name");
        need(out, "out");
        const auto q = prosper::parse_quantization(name);
        if (!q) {
            prosper::fail(prosper::ErrorKind::InvalidArgument,
                          std::string("unknown quantization '") + name + "' (expected none or fixed16)");
        }
        *out = *q == prosper::Quantization::Fixed16 ? PRSP_QUANT_FIXED16 : PRSP_QUANT_NONE;
    });
}

prsp_status prsp_vocab_build(const char *pairs_tsv, const char *corpus_jsonl, size_t max_size, prsp_vocab **out) {
    return guard([&] {
        need(pairs_tsv, "pairs_tsv");
        need(out, "out");
        std::vector<std::string> texts;
        for (auto &p : prosper::read_pairs_tsv(pairs_tsv)) {
            texts.push_back(std::move(p.query_text));
            texts.push_back(std::move(p.item_text));
        }
        if (corpus_jsonl != nullptr) {
            for (auto &r : prosper::read_corpus_jsonl(corpus_jsonl)) {
                texts.push_back(std::move(r.text));
            }
        }
        *out = new prsp_vocab{prosper::Vocab::build(texts, max_size)};
    });
}

prsp_status prsp_vocab_load(const char *path, prsp_vocab **out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new prsp_vocab{prosper::Vocab::load(path)};
    });
}

prsp_status prsp_vocab_save(const prsp_vocab *vocab, const char *path) {
    return guard([&] {
        need(vocab, "vocab");
        need(path, "path");
        vocab->v.save(path);
    });
}

size_t prsp_vocab_size(const prsp_vocab *vocab) { return vocab == nullptr ? 0 : vocab->v.size(); }

void prsp_vocab_free(prsp_vocab *vocab) { delete vocab; }

prsp_status prsp_config_new(prsp_config **out) {
    return guard([&] {
        need(out, "out");
        *out = new prsp_config{};
    });
}

prsp_status prsp_config_load(const char *path, prsp_config **out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new prsp_config{prosper::TrainConfig::load(path)};
    });
}

prsp_status prsp_config_set(prsp_config *cfg, const char *key, const char *value) {
    return guard([&] {
        need(cfg, "cfg");
        need(key, "key");
        need(value, "value");
        auto next = cfg->c;
        next.set(key, value);
        next.validate();
        cfg->c = std::move(next);
    });
}

prsp_status prsp_config_to_text(const prsp_config *cfg, char **out) {
    return guard([&] {
        need(cfg, "cfg");
        need(out, "out");
        *out = dup_string(cfg->c.to_text());
    });
}

uint64_t prsp_config_seed(const prsp_config *cfg) { return cfg == nullptr ? 0 : cfg->c.seed; }

void prsp_config_free(prsp_config *cfg) { delete cfg; }

prsp_status prsp_model_init(size_t vocab_size, size_t hidden, uint64_t seed, prsp_model **out) {
    return guard([&] {
        need(out, "out");
        *out = new prsp_model{prosper::ModelParams::init(vocab_size, hidden, seed)};
    });
}

prsp_status prsp_model_load(const char *path, prsp_model **out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new prsp_model{prosper::ModelParams::load(path)};
    });
}

prsp_status prsp_model_save(const prsp_model *model, const char *path) {
    return guard([&] {
        need(model, "model");
        need(path, "path");
        model->p.save(path);
    });
}

size_t prsp_model_vocab_size(const prsp_model *model) { return model == nullptr ? 0 : model->p.vocab_size(); }

size_t prsp_model_hidden(const prsp_model *model) { return model == nullptr ? 0 : model->p.hidden(); }

void prsp_model_free(prsp_model *model) { delete model; }

prsp_status prsp_train(prsp_model *model, const prsp_vocab *vocab, const char *pairs_tsv, const prsp_config *cfg,
                       prsp_head_mode mode, unsigned threads, const char *log_jsonl, prsp_train_summary *summary) {
    return guard([&] {
        need(model, "model");
        need(vocab, "vocab");
        need(pairs_tsv, "pairs_tsv");
        need(cfg, "cfg");
        if (vocab->v.size() != model->p.vocab_size()) {
            prosper::fail(prosper::ErrorKind::InvalidArgument,
                          "vocabulary size " + std::to_string(vocab->v.size()) + " does not match model size " +
                              std::to_string(model->p.vocab_size()));
        }
        const auto pairs = prosper::load_pairs(pairs_tsv, vocab->v);
        // Train on a copy so a failure leaves the caller's model untouched.
        auto params = model->p;
        prosper::Trainer trainer(params, cfg->c, head_mode(mode), threads);
        std::string log;
        prosper::StepMetrics last;
        trainer.fit(pairs, [&](const prosper::StepMetrics &m) {
            log += prosper::to_json_line(m);
            log += '\n';
            last = m;
        });
        if (log_jsonl != nullptr) {
            prosper::write_file_atomic(log_jsonl, log);
        }
        model->p = std::move(params);
        if (summary != nullptr) {
            *summary = {last.step, last.loss.total, last.nnz_q_mean, last.nnz_d_mean, last.k_q, last.k_d};
        }
    });
}

prsp_encode_options prsp_encode_options_default(void) {
    return {PRSP_HEAD_PROSPER, PRSP_REP_FINAL, PRSP_MASK_NONE, prosper::kDefaultMaxLen, 1};
}

prsp_status prsp_encode_corpus(const prsp_model *model, const prsp_vocab *vocab, const char *corpus_jsonl,
                               const prsp_encode_options *opts, const char *out_vectors) {
    return guard([&] {
        need(model, "model");
        need(vocab, "vocab");
        need(corpus_jsonl, "corpus_jsonl");
        need(out_vectors, "out_vectors");
        const auto o = opts != nullptr ? *opts : prsp_encode_options_default();
        if (vocab->v.size() != model->p.vocab_size()) {
            prosper::fail(prosper::ErrorKind::InvalidArgument, "vocabulary size does not match model");
        }
        prosper::require(o.max_len >= 1, "max_len must be at least 1");
        const auto mode = head_mode(o.mode);
        const auto records = prosper::read_corpus_jsonl(corpus_jsonl);
        std::vector<prosper::DocVector> out(records.size());
        prosper::parallel_for(records.size(), o.threads, [&](std::size_t i) {
            const auto seq = prosper::tokenize(vocab->v, records[i].text, o.max_len);
            auto enc = prosper::encode(model->p, seq, mode);
            auto vec = o.rep == PRSP_REP_BASIC ? std::move(enc.basic) : std::move(enc.final_rep);
            if (o.mask != PRSP_MASK_NONE) {
                const auto keep = o.mask == PRSP_MASK_LITERAL_ONLY ? prosper::MaskKeep::LiteralOnly
                                                                   : prosper::MaskKeep::ExpansionOnly;
                vec = prosper::mask_terms(vec, prosper::LiteralIndicator::of(seq), keep);
            }
            out[i] = {records[i].id, std::move(vec)};
        });
        prosper::save_vectors(out_vectors, out);
    });
}

prsp_status prsp_index_build(const char *vectors_path, size_t block_size, prsp_quantization quant, prsp_index **out) {
    return guard([&] {
        need(vectors_path, "vectors_path");
        need(out, "out");
        const auto docs = prosper::load_vectors(vectors_path);
        const auto q = quant == PRSP_QUANT_FIXED16 ? prosper::Quantization::Fixed16 : prosper::Quantization::None;
        *out = new prsp_index{prosper::InvertedIndex::build(docs, block_size, q)};
    });
}

prsp_status prsp_bm25_index_build(const prsp_vocab *vocab, const char *corpus_jsonl, double k1, double b,
                                  double delta, size_t block_size, prsp_index **out) {
    return guard([&] {
        need(vocab, "vocab");
        need(corpus_jsonl, "corpus_jsonl");
        need(out, "out");
        const auto records = prosper::read_corpus_jsonl(corpus_jsonl);
        std::vector<prosper::TokenSeq> docs;
        std::vector<std::string> ids;
        for (const auto &r : records) {
            docs.push_back(prosper::tokenize(vocab->v, r.text, SIZE_MAX));
            ids.push_back(r.id);
        }
        const auto stats = prosper::Bm25Stats::build(docs, {k1, b, delta});
        *out = new prsp_index{prosper::build_bm25_index(stats, ids, block_size)};
    });
}

prsp_status prsp_index_load(const char *path, prsp_index **out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new prsp_index{prosper::InvertedIndex::load(path)};
    });
}

prsp_status prsp_index_save(const prsp_index *index, const char *path) {
    return guard([&] {
        need(index, "index");
        need(path, "path");
        index->idx.save(path);
    });
}

size_t prsp_index_num_docs(const prsp_index *index) { return index == nullptr ? 0 : index->idx.num_docs(); }

const char *prsp_index_doc_id(const prsp_index *index, uint32_t ord) {
    if (index == nullptr || ord >= index->idx.num_docs()) {
        return nullptr;
    }
    return index->idx.doc_id(ord).c_str();
}

void prsp_index_free(prsp_index *index) { delete index; }

prsp_status prsp_index_search(const prsp_index *index, const uint32_t *terms, const float *weights, size_t n,
                              size_t topk, size_t query_terms, prsp_engine engine, prsp_hit *hits, size_t capacity,
                              size_t *count) {
    return guard([&] {
        need(index, "index");
        need(count, "count");
        if (n > 0) {
            need(terms, "terms");
            need(weights, "weights");
        }
        if (capacity > 0) {
            need(hits, "hits");
        }
        std::vector<prosper::TermWeight> entries;
        for (size_t i = 0; i < n; ++i) {
            if (!(weights[i] > 0.0f)) {
                prosper::fail(prosper::ErrorKind::InvalidArgument, "query weights must be positive");
            }
            entries.push_back({terms[i], static_cast<double>(weights[i])});
        }
        const auto vec = prosper::SparseVec::from_entries(std::move(entries));
        const auto res = run_engine(index->idx, make_query(vec, query_terms), topk, engine);
        const auto m = std::min(capacity, res.hits.size());
        for (size_t i = 0; i < m; ++i) {
            hits[i] = {res.hits[i].ord, res.hits[i].score};
        }
        *count = m;
    });
}

prsp_status prsp_search_run(const prsp_index *index, const char *query_vectors, size_t topk, size_t query_terms,
                            prsp_engine engine, const char *run_out) {
    return guard([&] {
        need(index, "index");
        need(query_vectors, "query_vectors");
        need(run_out, "run_out");
        const auto queries = prosper::load_vectors(query_vectors);
        std::vector<prosper::RunEntry> run;
        for (const auto &q : queries) {
            if (q.vec.empty()) {
                continue;
            }
            append_hits(run, index->idx, q.id, run_engine(index->idx, make_query(q.vec, query_terms), topk, engine));
        }
        prosper::write_run(run_out, run);
    });
}

prsp_status prsp_bm25_search_run(const prsp_index *index, const prsp_vocab *vocab, const char *queries_jsonl,
                                 size_t topk, const char *run_out) {
    return guard([&] {
        need(index, "index");
        need(vocab, "vocab");
        need(queries_jsonl, "queries_jsonl");
        need(run_out, "run_out");
        const auto queries = prosper::read_corpus_jsonl(queries_jsonl);
        std::vector<prosper::RunEntry> run;
        for (const auto &q : queries) {
            const auto qv = prosper::bm25_query(prosper::tokenize(vocab->v, q.text, SIZE_MAX));
            if (qv.size() == 0) {
                continue;
            }
            append_hits(run, index->idx, q.id, prosper::search_bmm(index->idx, qv, topk));
        }
        prosper::write_run(run_out, run);
    });
}

prsp_status prsp_eval(const char *run_tsv, const char *qrels_tsv, prsp_metrics *out) {
    return guard([&] {
        need(run_tsv, "run_tsv");
        need(qrels_tsv, "qrels_tsv");
        need(out, "out");
        const auto r = prosper::evaluate(prosper::read_run(run_tsv), prosper::read_qrels(qrels_tsv));
        *out = {r.num_queries,  r.multi_relevant_queries, r.hit.at(1),       r.hit.at(10),
                r.hit.at(100),  r.hit.at(1000),           r.mrr10,           r.recall.at(10),
                r.recall.at(100), r.recall.at(1000),      r.flops_overlap};
    });
}

prsp_status prsp_flops_overlap(const char *query_vectors, const char *item_vectors, uint64_t seed, double *out) {
    return guard([&] {
        need(query_vectors, "query_vectors");
        need(item_vectors, "item_vectors");
        need(out, "out");
        std::vector<prosper::SparseVec> qs;
        std::vector<prosper::SparseVec> ds;
        for (auto &d : prosper::load_vectors(query_vectors)) {
            qs.push_back(std::move(d.vec));
        }
        for (auto &d : prosper::load_vectors(item_vectors)) {
            ds.push_back(std::move(d.vec));
        }
        *out = prosper::flops_overlap(qs, ds, seed);
    });
}

prsp_status prsp_metrics_format(const prsp_metrics *m, const char *only, int json, char **out) {
    return guard([&] {
        need(m, "m");
        need(out, "out");
        prosper::MetricsReport r;
        r.num_queries = m->num_queries;
        r.multi_relevant_queries = m->multi_relevant_queries;
        r.hit = {{1, m->hit_1}, {10, m->hit_10}, {100, m->hit_100}, {1000, m->hit_1000}};
        r.mrr10 = m->mrr_10;
        r.recall = {{10, m->recall_10}, {100, m->recall_100}, {1000, m->recall_1000}};
        r.flops_overlap = m->flops_overlap;
        std::vector<std::string> names;
        if (only != nullptr) {
            for (auto part : prosper::split(only, ',')) {
                if (!part.empty()) {
                    names.emplace_back(part);
                }
            }
        }
        *out = dup_string(json != 0 ? r.to_json(names) + "\n" : r.to_table(names));
    });
}

prsp_status prsp_bench_sparsity(const char *log_on, const char *log_off, const char *csv_out) {
    return guard([&] {
        need(log_on, "log_on");
        need(log_off, "log_off");
        need(csv_out, "csv_out");
        const auto csv = prosper::bench_sparsity(prosper::read_sparsity_log(log_on),
                                                 prosper::read_sparsity_log(log_off));
        prosper::write_file_atomic(csv_out, csv);
    });
}

prsp_status prsp_synth_generate(const char *dir, uint64_t seed) {
    return guard([&] {
        need(dir, "dir");
        prosper::SynthConfig cfg;
        cfg.seed = seed;
        prosper::write_synthetic(dir, prosper::generate_synthetic(cfg));
    });
}

}  // extern "C"
