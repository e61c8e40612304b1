#include "prosper/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_set>

#include "json.hpp"
#include "prosper/binio.hpp"
#include "prosper/error.hpp"

namespace prosper {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto &c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

[[noreturn]] void line_error(const std::filesystem::path &path, std::size_t line, const std::string &msg) {
    fail(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

std::vector<std::string> normalize_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) {
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) {
            ++j;
        }
        if (j > i) {
            out.push_back(lowercase(text.substr(i, j - i)));
        }
        i = j;
    }
    return out;
}

Vocab Vocab::build(std::span<const std::string> texts, std::size_t max_size) {
    require(max_size >= 2, "vocabulary max_size must be at least 2");
    if (texts.empty()) {
        fail(ErrorKind::InvalidArgument, "empty corpus");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto &t : texts) {
        for (auto &tok : normalize_tokens(t)) {
            ++counts[std::move(tok)];
        }
    }
    // Tokens are lowercased, so none can collide with the uppercase unknown marker.
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    // std::map iteration is lexicographic already, so a stable sort by count keeps the tie order.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) { return a.second > b.second; });
    std::vector<std::string> terms{std::string(kUnknownTerm)};
    for (auto &[term, n] : ranked) {
        if (terms.size() >= max_size) {
            break;
        }
        terms.push_back(term);
    }
    return from_terms(std::move(terms));
}

Vocab Vocab::from_terms(std::vector<std::string> terms) {
    require(terms.size() >= 2, "vocabulary needs the unknown id and at least one term");
    require(terms[0] == kUnknownTerm, "vocabulary id 0 must be " + std::string(kUnknownTerm));
    Vocab v;
    v.terms_ = std::move(terms);
    v.ids_.reserve(v.terms_.size());
    for (std::size_t i = 0; i < v.terms_.size(); ++i) {
        const auto &t = v.terms_[i];
        require(!t.empty(), "empty vocabulary term at id " + std::to_string(i));
        require(std::none_of(t.begin(), t.end(), is_space), "vocabulary term contains whitespace at id " +
                                                                 std::to_string(i));
        if (!v.ids_.emplace(t, static_cast<TermId>(i)).second) {
            fail(ErrorKind::InvalidArgument, "duplicate vocabulary term '" + t + "'");
        }
    }
    return v;
}

Vocab Vocab::load(const std::filesystem::path &path) {
    const auto text = read_file(path);
    std::vector<std::string> terms;
    for (auto line : split_lines(text)) {
        terms.emplace_back(line);
    }
    try {
        return from_terms(std::move(terms));
    } catch (const Error &e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

void Vocab::save(const std::filesystem::path &path) const {
    std::string out;
    for (const auto &t : terms_) {
        out += t;
        out += '\n';
    }
    write_file_atomic(path, out);
}

const std::string &Vocab::term(TermId id) const {
    require(id < terms_.size(), "term id " + std::to_string(id) + " out of vocabulary range");
    return terms_[id];
}

TermId Vocab::id_of(std::string_view term) const {
    auto it = ids_.find(std::string(term));
    return it == ids_.end() ? kUnknown : it->second;
}

TokenSeq tokenize(const Vocab &vocab, std::string_view text, std::size_t max_len) {
    require(max_len >= 1, "max_len must be at least 1");
    auto toks = normalize_tokens(text);
    if (toks.empty()) {
        fail(ErrorKind::InvalidArgument, "empty text");
    }
    TokenSeq seq;
    const auto n = std::min(toks.size(), max_len);
    seq.ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        seq.ids.push_back(vocab.id_of(toks[i]));
    }
    return seq;
}

std::vector<RawPair> read_pairs_tsv(const std::filesystem::path &path) {
    const auto text = read_file(path);
    std::vector<RawPair> out;
    std::size_t lineno = 0;
    for (auto line : split_lines(text)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line_error(path, lineno, "CR line ending");
        }
        auto cols = split(line, '\t');
        if (cols.size() != 4) {
            line_error(path, lineno, "expected 4 tab-separated columns, got " + std::to_string(cols.size()));
        }
        for (std::size_t c = 0; c < 4; ++c) {
            if (normalize_tokens(cols[c]).empty()) {
                line_error(path, lineno, "empty column " + std::to_string(c + 1));
            }
        }
        out.push_back({std::string(cols[0]), std::string(cols[1]), std::string(cols[2]), std::string(cols[3])});
    }
    if (out.empty()) {
        fail(ErrorKind::Format, path.string() + ": empty corpus");
    }
    return out;
}

void write_pairs_tsv(const std::filesystem::path &path, std::span<const RawPair> pairs) {
    std::string out;
    for (const auto &p : pairs) {
        out += p.query_id + '\t' + p.query_text + '\t' + p.item_id + '\t' + p.item_text + '\n';
    }
    write_file_atomic(path, out);
}

PairSet tokenize_pairs(std::span<const RawPair> pairs, const Vocab &vocab, std::size_t max_len) {
    PairSet out;
    out.reserve(pairs.size());
    for (const auto &p : pairs) {
        out.push_back({tokenize(vocab, p.query_text, max_len), tokenize(vocab, p.item_text, max_len), p.query_id,
                       p.item_id});
    }
    return out;
}

PairSet load_pairs(const std::filesystem::path &path, const Vocab &vocab, std::size_t max_len) {
    const auto raw = read_pairs_tsv(path);
    return tokenize_pairs(raw, vocab, max_len);
}

std::vector<TextRecord> read_corpus_jsonl(const std::filesystem::path &path) {
    const auto text = read_file(path);
    std::vector<TextRecord> out;
    std::unordered_set<std::string> seen;
    std::size_t lineno = 0;
    for (auto line : split_lines(text)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
            line_error(path, lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
            !j["text"].is_string()) {
            line_error(path, lineno, "expected object with string fields 'id' and 'text'");
        }
        TextRecord r{j["id"].get<std::string>(), j["text"].get<std::string>()};
        if (!seen.insert(r.id).second) {
            line_error(path, lineno, "duplicate id '" + r.id + "'");
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) {
        fail(ErrorKind::Format, path.string() + ": empty corpus");
    }
    return out;
}

void write_corpus_jsonl(const std::filesystem::path &path, std::span<const TextRecord> records) {
    std::string out;
    for (const auto &r : records) {
        out += nlohmann::json{{"id", r.id}, {"text", r.text}}.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

}  // namespace prosper
