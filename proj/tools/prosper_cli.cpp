// Command-line front end. Talks to the library only through prosper.h.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "prosper/prosper.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct DataError {
    std::string message;
};

void check(prsp_status s) {
    if (s != PRSP_OK) {
        throw DataError{prsp_last_error()};
    }
}

struct VocabDel {
    void operator()(prsp_vocab *p) const { prsp_vocab_free(p); }
};
struct ConfigDel {
    void operator()(prsp_config *p) const { prsp_config_free(p); }
};
struct ModelDel {
    void operator()(prsp_model *p) const { prsp_model_free(p); }
};
struct IndexDel {
    void operator()(prsp_index *p) const { prsp_index_free(p); }
};
using Vocab = std::unique_ptr<prsp_vocab, VocabDel>;
using Config = std::unique_ptr<prsp_config, ConfigDel>;
using Model = std::unique_ptr<prsp_model, ModelDel>;
using Index = std::unique_ptr<prsp_index, IndexDel>;

Vocab load_vocab(const std::string &path) {
    prsp_vocab *v = nullptr;
    check(prsp_vocab_load(path.c_str(), &v));
    return Vocab(v);
}

Index load_index(const std::string &path) {
    prsp_index *i = nullptr;
    check(prsp_index_load(path.c_str(), &i));
    return Index(i);
}

prsp_head_mode parse_mode(const std::string &name) {
    prsp_head_mode m{};
    check(prsp_head_mode_parse(name.c_str(), &m));
    return m;
}

std::string take_string(char *s) {
    std::string out(s);
    prsp_string_free(s);
    return out;
}

struct TrainArgs {
    std::string pairs;
    std::string synthetic;
    std::string config;
    std::string vocab;
    std::string vocab_out;
    std::string out;
    std::string log;
    std::string mode = "prosper";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::size_t hidden = 32;
    std::size_t vocab_size = 2000;
};

int run_train(const TrainArgs &a) {
    Config cfg;
    {
        prsp_config *c = nullptr;
        check(a.config.empty() ? prsp_config_new(&c) : prsp_config_load(a.config.c_str(), &c));
        cfg.reset(c);
    }
    if (a.seed) {
        check(prsp_config_set(cfg.get(), "seed", std::to_string(*a.seed).c_str()));
    }
    const std::uint64_t seed = prsp_config_seed(cfg.get());

    std::string pairs = a.pairs;
    std::string extra_corpus;
    if (!a.synthetic.empty()) {
        check(prsp_synth_generate(a.synthetic.c_str(), seed));
        pairs = (std::filesystem::path(a.synthetic) / "train.tsv").string();
        extra_corpus = (std::filesystem::path(a.synthetic) / "items.jsonl").string();
    }

    Vocab vocab;
    if (!a.vocab.empty()) {
        vocab = load_vocab(a.vocab);
    } else {
        prsp_vocab *v = nullptr;
        check(prsp_vocab_build(pairs.c_str(), extra_corpus.empty() ? nullptr : extra_corpus.c_str(), a.vocab_size, &v));
        vocab.reset(v);
        const auto vocab_out = a.vocab_out.empty() ? a.out + ".vocab" : a.vocab_out;
        check(prsp_vocab_save(vocab.get(), vocab_out.c_str()));
    }

    prsp_model *m = nullptr;
    check(prsp_model_init(prsp_vocab_size(vocab.get()), a.hidden, seed, &m));
    Model model(m);
    prsp_train_summary summary{};
    check(prsp_train(model.get(), vocab.get(), pairs.c_str(), cfg.get(), parse_mode(a.mode), a.threads,
                     a.log.empty() ? nullptr : a.log.c_str(), &summary));
    check(prsp_model_save(model.get(), a.out.c_str()));
    std::printf("steps=%zu loss=%.6f nnz_q_mean=%.2f nnz_d_mean=%.2f k_q=%zu k_d=%zu\n", summary.steps,
                summary.final_loss, summary.nnz_q_mean, summary.nnz_d_mean, summary.k_q, summary.k_d);
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"prosper: learned sparse retrieval toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(prsp_version()));

    TrainArgs ta;
    auto *train = app.add_subcommand("train", "Train an encoder on query/item pairs");
    auto *pairs_opt = train->add_option("--pairs", ta.pairs, "Pairs TSV");
    auto *synth_opt = train->add_option("--synthetic", ta.synthetic, "Generate the planted-synonym dataset into DIR and train on it");
    pairs_opt->excludes(synth_opt);
    train->add_option("--config", ta.config, "key=value config file")->check(CLI::ExistingFile);
    train->add_option("--vocab", ta.vocab, "Existing vocabulary (otherwise built from the training data)");
    train->add_option("--vocab-out", ta.vocab_out, "Where to write a built vocabulary (default: <out>.vocab)");
    train->add_option("--out", ta.out, "Model output path")->required();
    train->add_option("--log", ta.log, "Per-step JSONL log");
    train->add_option("--mode", ta.mode, "prosper | splade_max | no_lrn")->capture_default_str();
    train->add_option("--seed", ta.seed, "Overrides the config seed");
    train->add_option("--threads", ta.threads)->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--hidden", ta.hidden)->capture_default_str();
    train->add_option("--vocab-size", ta.vocab_size, "Maximum vocabulary size when building")->capture_default_str();

    std::string enc_model, enc_vocab, enc_corpus, enc_out, enc_mode = "prosper", enc_rep = "final", enc_mask = "none";
    std::size_t enc_max_len = 64;
    unsigned enc_threads = 1;
    auto *encode = app.add_subcommand("encode", "Encode a corpus JSONL into a sparse vector file");
    encode->add_option("--model", enc_model)->required();
    encode->add_option("--vocab", enc_vocab)->required();
    encode->add_option("--corpus", enc_corpus, "Corpus JSONL (id, text)")->required();
    encode->add_option("--out", enc_out)->required();
    encode->add_option("--mode", enc_mode)->capture_default_str();
    encode->add_option("--rep", enc_rep, "final | basic")->capture_default_str()->check(CLI::IsMember({"final", "basic"}));
    encode->add_option("--mask", enc_mask, "none | literal_only | expansion_only")
        ->capture_default_str()
        ->check(CLI::IsMember({"none", "literal_only", "expansion_only"}));
    encode->add_option("--max-len", enc_max_len)->capture_default_str()->check(CLI::PositiveNumber);
    encode->add_option("--threads", enc_threads)->capture_default_str()->check(CLI::PositiveNumber);

    std::string idx_vectors, idx_out, idx_quant = "none";
    std::size_t idx_block = 64;
    auto *index = app.add_subcommand("index", "Build an inverted index from a sparse vector file");
    index->add_option("--vectors", idx_vectors)->required();
    index->add_option("--out", idx_out)->required();
    index->add_option("--block-size", idx_block)->capture_default_str()->check(CLI::PositiveNumber);
    index->add_option("--quant", idx_quant, "none | fixed16")->capture_default_str();

    std::string s_index, s_queries, s_out, s_engine = "bmm", s_vocab;
    std::size_t s_topk = 1000, s_query_terms = 16;
    auto *search = app.add_subcommand("search", "Retrieve top-k documents for every query");
    search->add_option("--index", s_index)->required();
    search->add_option("--queries", s_queries, "Query vectors (corpus JSONL with --engine bm25)")->required();
    search->add_option("--out", s_out, "Run TSV")->required();
    search->add_option("--topk", s_topk)->capture_default_str()->check(CLI::PositiveNumber);
    search->add_option("--query-terms", s_query_terms)->capture_default_str()->check(CLI::PositiveNumber);
    search->add_option("--engine", s_engine)->capture_default_str()->check(CLI::IsMember({"bmm", "exhaustive", "bm25"}));
    search->add_option("--vocab", s_vocab, "Vocabulary (required with --engine bm25)");

    std::string e_run, e_qrels, e_metrics, e_qvec, e_dvec;
    bool e_json = false;
    std::uint64_t e_seed = 42;
    auto *eval = app.add_subcommand("eval", "Score a run against relevance judgments");
    eval->add_option("--run", e_run)->required();
    eval->add_option("--qrels", e_qrels)->required();
    eval->add_option("--metrics", e_metrics, "Comma-separated subset, e.g. hit@10,mrr@10");
    eval->add_flag("--json", e_json, "Print a JSON object instead of a table");
    auto *qv = eval->add_option("--query-vectors", e_qvec, "With --item-vectors: also report #FLOPS overlap");
    auto *dv = eval->add_option("--item-vectors", e_dvec);
    qv->needs(dv);
    dv->needs(qv);
    eval->add_option("--seed", e_seed, "Pair-sampling seed for #FLOPS")->capture_default_str();

    std::string b_on, b_off, b_out;
    auto *bench = app.add_subcommand("bench-sparsity", "Align two training logs into a sparsity CSV");
    bench->add_option("--on", b_on, "Log of the run with the focusing window")->required();
    bench->add_option("--off", b_off, "Log of the run without it")->required();
    bench->add_option("--out", b_out)->required();

    std::string bi_vocab, bi_corpus, bi_out;
    double bi_k1 = 1.2, bi_b = 0.75, bi_delta = 0.25;
    std::size_t bi_block = 64;
    auto *bm25_index = app.add_subcommand("bm25-index", "Build a BM25 index over a corpus JSONL");
    bm25_index->add_option("--vocab", bi_vocab)->required();
    bm25_index->add_option("--corpus", bi_corpus)->required();
    bm25_index->add_option("--out", bi_out)->required();
    bm25_index->add_option("--k1", bi_k1)->capture_default_str();
    bm25_index->add_option("--b", bi_b)->capture_default_str();
    bm25_index->add_option("--delta", bi_delta)->capture_default_str();
    bm25_index->add_option("--block-size", bi_block)->capture_default_str()->check(CLI::PositiveNumber);

    std::string bs_index, bs_vocab, bs_queries, bs_out;
    std::size_t bs_topk = 1000;
    auto *bm25_search = app.add_subcommand("bm25-search", "BM25 retrieval for a query JSONL");
    bm25_search->add_option("--index", bs_index)->required();
    bm25_search->add_option("--vocab", bs_vocab)->required();
    bm25_search->add_option("--queries", bs_queries)->required();
    bm25_search->add_option("--out", bs_out)->required();
    bm25_search->add_option("--topk", bs_topk)->capture_default_str()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        if (e.get_exit_code() != 0) {
            const auto subs = app.get_subcommands();
            std::fputs((subs.empty() ? app.help() : subs.front()->help()).c_str(), stderr);
        }
        return kExitUsage;
    }

    try {
        if (*train) {
            if (ta.pairs.empty() && ta.synthetic.empty()) {
                std::fputs("train: one of --pairs or --synthetic is required\n", stderr);
                std::fputs(train->help().c_str(), stderr);
                return kExitUsage;
            }
            return run_train(ta);
        }
        if (*encode) {
            prsp_model *m = nullptr;
            check(prsp_model_load(enc_model.c_str(), &m));
            Model model(m);
            auto vocab = load_vocab(enc_vocab);
            auto opts = prsp_encode_options_default();
            opts.mode = parse_mode(enc_mode);
            opts.rep = enc_rep == "basic" ? PRSP_REP_BASIC : PRSP_REP_FINAL;
            opts.mask = enc_mask == "literal_only"     ? PRSP_MASK_LITERAL_ONLY
                        : enc_mask == "expansion_only" ? PRSP_MASK_EXPANSION_ONLY
                                                       : PRSP_MASK_NONE;
            opts.max_len = enc_max_len;
            opts.threads = enc_threads;
            check(prsp_encode_corpus(model.get(), vocab.get(), enc_corpus.c_str(), &opts, enc_out.c_str()));
            return 0;
        }
        if (*index) {
            prsp_quantization q{};
            check(prsp_quantization_parse(idx_quant.c_str(), &q));
            prsp_index *i = nullptr;
            check(prsp_index_build(idx_vectors.c_str(), idx_block, q, &i));
            Index idx(i);
            check(prsp_index_save(idx.get(), idx_out.c_str()));
            return 0;
        }
        if (*search) {
            auto idx = load_index(s_index);
            if (s_engine == "bm25") {
                if (s_vocab.empty()) {
                    std::fputs("search: --vocab is required with --engine bm25\n", stderr);
                    return kExitUsage;
                }
                auto vocab = load_vocab(s_vocab);
                check(prsp_bm25_search_run(idx.get(), vocab.get(), s_queries.c_str(), s_topk, s_out.c_str()));
                return 0;
            }
            const auto engine = s_engine == "exhaustive" ? PRSP_ENGINE_EXHAUSTIVE : PRSP_ENGINE_BMM;
            check(prsp_search_run(idx.get(), s_queries.c_str(), s_topk, s_query_terms, engine, s_out.c_str()));
            return 0;
        }
        if (*eval) {
            prsp_metrics m{};
            check(prsp_eval(e_run.c_str(), e_qrels.c_str(), &m));
            if (!e_qvec.empty()) {
                check(prsp_flops_overlap(e_qvec.c_str(), e_dvec.c_str(), e_seed, &m.flops_overlap));
            }
            if (m.multi_relevant_queries > 0) {
                std::fprintf(stderr, "warning: %zu queries have several relevant documents; Hit@k counts any of them\n",
                             m.multi_relevant_queries);
            }
            char *text = nullptr;
            check(prsp_metrics_format(&m, e_metrics.empty() ? nullptr : e_metrics.c_str(), e_json ? 1 : 0, &text));
            std::fputs(take_string(text).c_str(), stdout);
            return 0;
        }
        if (*bench) {
            check(prsp_bench_sparsity(b_on.c_str(), b_off.c_str(), b_out.c_str()));
            return 0;
        }
        if (*bm25_index) {
            auto vocab = load_vocab(bi_vocab);
            prsp_index *i = nullptr;
            check(prsp_bm25_index_build(vocab.get(), bi_corpus.c_str(), bi_k1, bi_b, bi_delta, bi_block, &i));
            Index idx(i);
            check(prsp_index_save(idx.get(), bi_out.c_str()));
            return 0;
        }
        if (*bm25_search) {
            auto idx = load_index(bs_index);
            auto vocab = load_vocab(bs_vocab);
            check(prsp_bm25_search_run(idx.get(), vocab.get(), bs_queries.c_str(), bs_topk, bs_out.c_str()));
            return 0;
        }
    } catch (const DataError &e) {
        std::fprintf(stderr, "error: %s\n", e.message.c_str());
        return kExitData;
    }
    return kExitUsage;
}
