#include "prosper/synth.hpp"

#include <array>
#include <set>
#include <string_view>
#include <tuple>
#include <unordered_set>

#include "prosper/binio.hpp"
#include "prosper/error.hpp"
#include "prosper/rng.hpp"

namespace prosper {

namespace {

// Pronounceable pseudo-words, unique across every pool of one dataset.
class WordFactory {
  public:
    explicit WordFactory(Rng &rng) : rng_(rng) {}

    std::string make(std::size_t syllables) {
        static constexpr std::string_view kOnset = "bdfghklmnprstvz";
        static constexpr std::string_view kVowel = "aeiou";
        for (;;) {
            std::string w;
            for (std::size_t i = 0; i < syllables; ++i) {
                w += kOnset[rng_.below(kOnset.size())];
                w += kVowel[rng_.below(kVowel.size())];
            }
            if (used_.insert(w).second) {
                return w;
            }
        }
    }

    std::vector<std::string> pool(std::size_t n, std::size_t syllables) {
        std::vector<std::string> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(make(syllables));
        }
        return out;
    }

  private:
    Rng &rng_;
    std::unordered_set<std::string> used_;
};

struct Item {
    std::size_t brand, category, color, material;
};

}  // namespace

void SynthConfig::validate() const {
    require(num_items >= 1, "num_items must be positive");
    require(num_train + num_test <= num_items, "more queries than items");
    require(num_brands >= 1 && num_categories >= 1 && num_colors >= 1 && num_materials >= 1,
            "attribute pools must be non-empty");
    require(num_styles >= 1 && num_model_codes >= 1 && num_fillers >= 1, "word pools must be non-empty");
    require(num_model_codes <= 900 * num_brands, "too many model codes");
    require(num_brands * num_categories * num_colors * num_materials >= 2 * num_items,
            "attribute space too small for distinct items");
    require(synonym_prob >= 0.0 && synonym_prob <= 1.0, "synonym_prob must lie in [0, 1]");
}

std::vector<std::string> SynthDataset::vocab_texts() const {
    std::vector<std::string> out;
    out.reserve(items.size() + train.size());
    for (const auto &it : items) {
        out.push_back(it.text);
    }
    for (const auto &p : train) {
        out.push_back(p.query_text);
    }
    return out;
}

SynthDataset generate_synthetic(const SynthConfig &cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    WordFactory words(rng);

    const auto brands = words.pool(cfg.num_brands, 3);
    const auto categories = words.pool(cfg.num_categories, 2);
    const auto category_syn = words.pool(cfg.num_categories, 2);
    const auto colors = words.pool(cfg.num_colors, 2);
    const auto color_syn = words.pool(cfg.num_colors, 2);
    const auto materials = words.pool(cfg.num_materials, 2);
    const auto material_syn = words.pool(cfg.num_materials, 2);
    const auto styles = words.pool(cfg.num_styles, 3);
    const auto fillers = words.pool(cfg.num_fillers, 3);
    std::vector<std::string> codes;
    for (std::unordered_set<std::string> seen; codes.size() < cfg.num_model_codes;) {
        auto code = brands[rng.below(brands.size())].substr(0, 2) + std::to_string(100 + rng.below(900));
        if (seen.insert(code).second) {
            codes.push_back(std::move(code));
        }
    }
    const std::array<std::string_view, 4> query_noise{"buy", "cheap", "best", "new"};

    SynthDataset data;
    for (std::size_t i = 0; i < cfg.num_categories; ++i) {
        data.synonyms.emplace_back(categories[i], category_syn[i]);
    }
    for (std::size_t i = 0; i < cfg.num_colors; ++i) {
        data.synonyms.emplace_back(colors[i], color_syn[i]);
    }
    for (std::size_t i = 0; i < cfg.num_materials; ++i) {
        data.synonyms.emplace_back(materials[i], material_syn[i]);
    }

    std::vector<Item> items;
    std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> combos;
    while (items.size() < cfg.num_items) {
        Item it{rng.below(cfg.num_brands), rng.below(cfg.num_categories), rng.below(cfg.num_colors),
                rng.below(cfg.num_materials)};
        if (!combos.emplace(it.brand, it.category, it.color, it.material).second) {
            continue;
        }
        std::string text = brands[it.brand] + ' ' + styles[rng.below(styles.size())] + ' ' +
                           colors[it.color] + ' ' + materials[it.material] + ' ' + categories[it.category] + ' ' +
                           codes[rng.below(codes.size())];
        for (std::size_t f = 0; f < cfg.fillers_per_item; ++f) {
            text += ' ' + fillers[rng.below(fillers.size())];
        }
        data.items.push_back({"item" + std::to_string(items.size()), std::move(text)});
        items.push_back(it);
    }

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    rng.shuffle(order.begin(), order.end());

    auto query_text = [&](const Item &it) {
        auto pick = [&](const std::string &literal, const std::string &syn) {
            return rng.bernoulli(cfg.synonym_prob) ? syn : literal;
        };
        std::string q = brands[it.brand];
        q += ' ' + pick(colors[it.color], color_syn[it.color]);
        q += ' ' + pick(materials[it.material], material_syn[it.material]);
        q += ' ' + pick(categories[it.category], category_syn[it.category]);
        if (rng.bernoulli(0.5)) {
            q = std::string(query_noise[rng.below(query_noise.size())]) + ' ' + q;
        }
        return q;
    };

    for (std::size_t i = 0; i < cfg.num_train; ++i) {
        const auto ord = order[i];
        const auto &item = data.items[ord];
        data.train.push_back({"q" + std::to_string(i), query_text(items[ord]), item.id, item.text});
    }
    for (std::size_t i = 0; i < cfg.num_test; ++i) {
        const auto ord = order[cfg.num_train + i];
        const auto qid = "t" + std::to_string(i);
        data.test_queries.push_back({qid, query_text(items[ord])});
        data.test_qrels[qid].insert(data.items[ord].id);
    }
    return data;
}

void write_synthetic(const std::filesystem::path &dir, const SynthDataset &data) {
    std::filesystem::create_directories(dir);
    write_corpus_jsonl(dir / "items.jsonl", data.items);
    write_pairs_tsv(dir / "train.tsv", data.train);
    write_corpus_jsonl(dir / "test_queries.jsonl", data.test_queries);
    write_qrels(dir / "test_qrels.tsv", data.test_qrels);
    std::string syn;
    for (const auto &[word, alt] : data.synonyms) {
        syn += word + '\t' + alt + '\n';
    }
    write_file_atomic(dir / "synonyms.tsv", syn);
}

}  // namespace prosper
