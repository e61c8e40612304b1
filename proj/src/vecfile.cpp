#include "prosper/vecfile.hpp"

#include <cmath>
#include <unordered_set>

#include "prosper/binio.hpp"

namespace prosper {

std::string serialize_vectors(std::span<const DocVector> vecs) {
    ByteWriter w;
    for (const auto &d : vecs) {
        std::vector<TermWeight> kept;
        kept.reserve(d.vec.nnz());
        for (const auto &e : d.vec.entries()) {
            if (static_cast<float>(e.weight) > 0.0f) {
                kept.push_back(e);
            }
        }
        w.str(d.id);
        w.u32(static_cast<std::uint32_t>(kept.size()));
        for (const auto &e : kept) {
            w.u32(e.term);
            w.f32(static_cast<float>(e.weight));
        }
    }
    return w.take();
}

std::vector<DocVector> deserialize_vectors(std::string_view bytes, const std::string &what) {
    ByteReader r(bytes, what);
    std::vector<DocVector> out;
    std::unordered_set<std::string> seen;
    while (!r.at_end()) {
        const auto rec_at = r.offset();
        DocVector d;
        d.id = r.str();
        if (!seen.insert(d.id).second) {
            r.corrupt_at(rec_at, "duplicate id '" + d.id + "'");
        }
        const auto nnz_at = r.offset();
        const std::uint32_t nnz = r.u32();
        if (nnz > r.remaining() / 8) {
            r.corrupt_at(nnz_at, "nnz exceeds remaining bytes");
        }
        std::vector<TermWeight> entries;
        entries.reserve(nnz);
        for (std::uint32_t i = 0; i < nnz; ++i) {
            const auto at = r.offset();
            const TermId term = r.u32();
            const float wgt = r.f32();
            if (!entries.empty() && term <= entries.back().term) {
                r.corrupt_at(at, "term ids not strictly increasing");
            }
            if (!std::isfinite(wgt) || wgt <= 0.0f) {
                r.corrupt_at(at + 4, "non-positive or non-finite weight");
            }
            entries.push_back({term, static_cast<double>(wgt)});
        }
        d.vec = SparseVec::from_entries(std::move(entries));
        out.push_back(std::move(d));
    }
    return out;
}

void save_vectors(const std::filesystem::path &path, std::span<const DocVector> vecs) {
    write_file_atomic(path, serialize_vectors(vecs));
}

std::vector<DocVector> load_vectors(const std::filesystem::path &path) {
    return deserialize_vectors(read_file(path), path.string());
}

}  // namespace prosper
