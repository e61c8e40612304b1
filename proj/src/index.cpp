#include "prosper/index.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "prosper/binio.hpp"
#include "prosper/error.hpp"

namespace prosper {

namespace {

constexpr std::string_view kIndexMagic = "PRIX";
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

std::optional<Quantization> parse_quantization(std::string_view s) {
    if (s == "none") {
        return Quantization::None;
    }
    if (s == "fixed16") {
        return Quantization::Fixed16;
    }
    return std::nullopt;
}

std::uint16_t quantize(double weight, float scale) noexcept {
    if (scale <= 0.0f || weight <= 0.0) {
        return 0;
    }
    const double q = std::nearbyint(weight / static_cast<double>(scale));
    return static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
}

double dequantize(std::uint16_t code, float scale) noexcept {
    return static_cast<double>(code) * static_cast<double>(scale);
}

InvertedIndex InvertedIndex::build(std::span<const DocVector> docs, std::size_t block_size, Quantization quant) {
    require(block_size >= 1, "block_size must be at least 1");
    require(docs.size() <= UINT32_MAX, "too many documents");
    InvertedIndex idx;
    idx.block_size_ = block_size;
    idx.quant_ = quant;

    std::unordered_set<std::string> seen;
    std::map<TermId, PostingList> by_term;
    double global_max = 0.0;
    for (std::size_t ord = 0; ord < docs.size(); ++ord) {
        const auto &d = docs[ord];
        if (!seen.insert(d.id).second) {
            fail(ErrorKind::InvalidArgument, "duplicate doc_id '" + d.id + "'");
        }
        idx.doc_ids_.push_back(d.id);
        for (const auto &e : d.vec.entries()) {
            if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
                fail(ErrorKind::InvalidArgument, "doc '" + d.id + "' has a non-positive weight for term " +
                                                     std::to_string(e.term));
            }
            auto &pl = by_term[e.term];
            pl.term = e.term;
            pl.docs.push_back(static_cast<std::uint32_t>(ord));
            pl.weights.push_back(static_cast<float>(e.weight));
            global_max = std::max(global_max, e.weight);
        }
    }
    if (quant == Quantization::Fixed16) {
        idx.scale_ = static_cast<float>(global_max / 65535.0);
    }
    idx.lists_.reserve(by_term.size());
    for (auto &[term, pl] : by_term) {
        if (quant == Quantization::Fixed16) {
            pl.codes.resize(pl.weights.size());
            for (std::size_t i = 0; i < pl.weights.size(); ++i) {
                // Quantize from the full-precision value, not the f32 copy.
                pl.codes[i] = quantize(docs[pl.docs[i]].vec.weight_of(term), idx.scale_);
                pl.weights[i] = dequantize(pl.codes[i], idx.scale_);
            }
        }
        idx.lists_.push_back(std::move(pl));
    }
    idx.finish_lists();
    return idx;
}

void InvertedIndex::finish_lists() {
    TermId max_term = 0;
    for (auto &pl : lists_) {
        pl.block_max.clear();
        pl.block_last.clear();
        pl.term_max = 0.0;
        for (std::size_t start = 0; start < pl.size(); start += block_size_) {
            const auto end = std::min(pl.size(), start + block_size_);
            const double m = *std::max_element(pl.weights.begin() + static_cast<std::ptrdiff_t>(start),
                                              pl.weights.begin() + static_cast<std::ptrdiff_t>(end));
            pl.block_max.push_back(m);
            pl.block_last.push_back(pl.docs[end - 1]);
            pl.term_max = std::max(pl.term_max, m);
        }
        max_term = std::max(max_term, pl.term);
    }
    lookup_.assign(lists_.empty() ? 0 : static_cast<std::size_t>(max_term) + 1, -1);
    for (std::size_t i = 0; i < lists_.size(); ++i) {
        lookup_[lists_[i].term] = static_cast<std::int32_t>(i);
    }
}

const PostingList *InvertedIndex::postings(TermId term) const noexcept {
    if (term >= lookup_.size() || lookup_[term] < 0) {
        return nullptr;
    }
    return &lists_[static_cast<std::size_t>(lookup_[term])];
}

std::size_t InvertedIndex::total_postings() const noexcept {
    std::size_t n = 0;
    for (const auto &pl : lists_) {
        n += pl.size();
    }
    return n;
}

std::string InvertedIndex::serialize() const {
    ByteWriter w;
    w.bytes(kIndexMagic);
    w.u32(kIndexVersion);
    w.u32(static_cast<std::uint32_t>(doc_ids_.size()));
    for (const auto &id : doc_ids_) {
        w.str(id);
    }
    w.u8(static_cast<std::uint8_t>(quant_));
    w.f32(scale_);
    w.u32(static_cast<std::uint32_t>(block_size_));
    w.u32(static_cast<std::uint32_t>(lists_.size()));
    for (const auto &pl : lists_) {
        w.u32(pl.term);
        w.u32(static_cast<std::uint32_t>(pl.num_blocks()));
        std::uint32_t prev = 0;
        for (std::size_t blk = 0; blk < pl.num_blocks(); ++blk) {
            const auto start = blk * block_size_;
            const auto end = std::min(pl.size(), start + block_size_);
            w.u32(static_cast<std::uint32_t>(end - start));
            w.f32(static_cast<float>(pl.block_max[blk]));
            for (auto i = start; i < end; ++i) {
                w.varint(pl.docs[i] - prev);
                prev = pl.docs[i];
            }
            for (auto i = start; i < end; ++i) {
                if (quant_ == Quantization::Fixed16) {
                    w.u16(pl.codes[i]);
                } else {
                    w.f32(static_cast<float>(pl.weights[i]));
                }
            }
        }
    }
    return w.take();
}

InvertedIndex InvertedIndex::deserialize(std::string_view bytes, const std::string &what) {
    ByteReader r(bytes, what);
    if (r.remaining() < 4 || r.bytes(4) != kIndexMagic) {
        r.corrupt_at(0, "bad magic (expected PRIX)");
    }
    const auto version_at = r.offset();
    if (r.u32() != kIndexVersion) {
        r.corrupt_at(version_at, "unsupported index version");
    }
    InvertedIndex idx;
    const std::uint32_t num_docs = r.u32();
    if (num_docs > r.remaining() / 4) {
        r.corrupt("document count exceeds file size");
    }
    std::unordered_set<std::string> seen;
    for (std::uint32_t d = 0; d < num_docs; ++d) {
        const auto at = r.offset();
        auto id = r.str();
        if (!seen.insert(id).second) {
            r.corrupt_at(at, "duplicate doc id");
        }
        idx.doc_ids_.push_back(std::move(id));
    }
    const auto quant_at = r.offset();
    const auto q = r.u8();
    if (q > 1) {
        r.corrupt_at(quant_at, "unknown quantization kind");
    }
    idx.quant_ = static_cast<Quantization>(q);
    const auto scale_at = r.offset();
    idx.scale_ = r.f32();
    if (!std::isfinite(idx.scale_) || idx.scale_ < 0.0f || (idx.quant_ == Quantization::None && idx.scale_ != 0.0f)) {
        r.corrupt_at(scale_at, "invalid quantization scale");
    }
    const auto bs_at = r.offset();
    idx.block_size_ = r.u32();
    if (idx.block_size_ == 0) {
        r.corrupt_at(bs_at, "zero block size");
    }
    const std::uint32_t num_terms = r.u32();
    if (num_terms > r.remaining() / 8) {
        r.corrupt("term count exceeds file size");
    }
    const bool quantized = idx.quant_ == Quantization::Fixed16;
    idx.lists_.reserve(num_terms);
    for (std::uint32_t t = 0; t < num_terms; ++t) {
        PostingList pl;
        const auto term_at = r.offset();
        pl.term = r.u32();
        if (!idx.lists_.empty() && pl.term <= idx.lists_.back().term) {
            r.corrupt_at(term_at, "term ids not strictly increasing");
        }
        const auto nb_at = r.offset();
        const std::uint32_t nblocks = r.u32();
        if (nblocks == 0 || nblocks > r.remaining() / 9) {
            r.corrupt_at(nb_at, "invalid block count");
        }
        std::uint32_t prev = 0;
        for (std::uint32_t blk = 0; blk < nblocks; ++blk) {
            const auto count_at = r.offset();
            const std::uint32_t count = r.u32();
            const bool last = blk + 1 == nblocks;
            if (count == 0 || count > idx.block_size_ || (!last && count != idx.block_size_)) {
                r.corrupt_at(count_at, "invalid block posting count");
            }
            const auto max_at = r.offset();
            const float stored_max = r.f32();
            for (std::uint32_t i = 0; i < count; ++i) {
                const auto at = r.offset();
                const auto delta = r.varint();
                const bool first = pl.docs.empty();
                if ((!first && delta == 0) || prev + delta >= num_docs) {
                    r.corrupt_at(at, "invalid doc ordinal delta");
                }
                prev = static_cast<std::uint32_t>(prev + delta);
                pl.docs.push_back(prev);
            }
            double true_max = 0.0;
            for (std::uint32_t i = 0; i < count; ++i) {
                const auto at = r.offset();
                double wgt;
                if (quantized) {
                    const auto code = r.u16();
                    pl.codes.push_back(code);
                    wgt = dequantize(code, idx.scale_);
                } else {
                    wgt = r.f32();
                    if (!std::isfinite(wgt) || wgt <= 0.0) {
                        r.corrupt_at(at, "non-positive or non-finite weight");
                    }
                }
                pl.weights.push_back(wgt);
                true_max = i == 0 ? wgt : std::max(true_max, wgt);
            }
            if (stored_max != static_cast<float>(true_max)) {
                r.corrupt_at(max_at, "block max does not match block weights");
            }
        }
        idx.lists_.push_back(std::move(pl));
    }
    if (!r.at_end()) {
        r.corrupt("trailing bytes after last posting list");
    }
    idx.finish_lists();
    return idx;
}

void InvertedIndex::save(const std::filesystem::path &path) const { write_file_atomic(path, serialize()); }

InvertedIndex InvertedIndex::load(const std::filesystem::path &path) {
    return deserialize(read_file(path), path.string());
}

}  // namespace prosper
