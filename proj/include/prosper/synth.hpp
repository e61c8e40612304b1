#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prosper/corpus.hpp"
#include "prosper/eval.hpp"

namespace prosper {

/// Product-search toy data with controlled vocabulary mismatch. Items are
/// built from attribute slots (brand, category, color, material) plus model
/// codes and filler words. A query names its item's brand literally, but each
/// other attribute is replaced by its synonym with probability `synonym_prob`.
struct SynthConfig {
    std::size_t num_items = 2000;
    std::size_t num_train = 500;
    std::size_t num_test = 100;
    std::size_t num_brands = 8;
    std::size_t num_categories = 20;
    std::size_t num_colors = 12;
    std::size_t num_materials = 10;
    std::size_t num_styles = 20;
    std::size_t num_model_codes = 500;
    std::size_t num_fillers = 1700;
    std::size_t fillers_per_item = 2;
    double synonym_prob = 0.85;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SynthDataset {
    std::vector<TextRecord> items;
    std::vector<RawPair> train;        // one pair per training query
    std::vector<TextRecord> test_queries;
    Qrels test_qrels;                  // exactly one relevant item per query
    /// Attribute word -> its query-side synonym.
    std::vector<std::pair<std::string, std::string>> synonyms;

    /// Item texts followed by training query texts, for vocabulary building.
    [[nodiscard]] std::vector<std::string> vocab_texts() const;
};

[[nodiscard]] SynthDataset generate_synthetic(const SynthConfig &cfg = {});

/// Writes items.jsonl, train.tsv, test_queries.jsonl, test_qrels.tsv and
/// synonyms.tsv into `dir` (created if missing).
void write_synthetic(const std::filesystem::path &dir, const SynthDataset &data);

}  // namespace prosper
