#include "prosper/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prosper/error.hpp"

namespace prosper {

SparseVec SparseVec::from_entries(std::vector<TermWeight> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const TermWeight &a, const TermWeight &b) { return a.term < b.term; });
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto &e = entries[i];
        if (!std::isfinite(e.weight) || e.weight <= 0.0) {
            fail(ErrorKind::InvalidArgument,
                 "sparse vector weight for term " + std::to_string(e.term) + " must be finite and > 0");
        }
        if (i > 0 && entries[i - 1].term == e.term) {
            fail(ErrorKind::InvalidArgument, "duplicate term " + std::to_string(e.term) + " in sparse vector");
        }
    }
    SparseVec v;
    v.entries_ = std::move(entries);
    return v;
}

SparseVec SparseVec::from_dense(std::span<const double> dense) {
    SparseVec v;
    for (std::size_t j = 0; j < dense.size(); ++j) {
        const double x = dense[j];
        if (!std::isfinite(x) || x < 0.0) {
            fail(ErrorKind::Numeric, "dense coordinate " + std::to_string(j) + " is negative or non-finite");
        }
        if (x > 0.0) {
            v.entries_.push_back({static_cast<TermId>(j), x});
        }
    }
    return v;
}

double SparseVec::weight_of(TermId term) const noexcept {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), term,
                               [](const TermWeight &e, TermId t) { return e.term < t; });
    return (it != entries_.end() && it->term == term) ? it->weight : 0.0;
}

std::vector<double> SparseVec::to_dense(std::size_t dim) const {
    std::vector<double> out(dim, 0.0);
    for (const auto &e : entries_) {
        require(e.term < dim, "sparse term id exceeds dense dimension");
        out[e.term] = e.weight;
    }
    return out;
}

double dot(const SparseVec &a, const SparseVec &b) noexcept {
    auto ea = a.entries();
    auto eb = b.entries();
    double s = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].term < eb[j].term) {
            ++i;
        } else if (eb[j].term < ea[i].term) {
            ++j;
        } else {
            s += ea[i].weight * eb[j].weight;
            ++i;
            ++j;
        }
    }
    return s;
}

double l2_norm(const SparseVec &v) noexcept {
    double s = 0.0;
    for (const auto &e : v.entries()) {
        s += e.weight * e.weight;
    }
    return std::sqrt(s);
}

double l1_norm(const SparseVec &v) noexcept {
    double s = 0.0;
    for (const auto &e : v.entries()) {
        s += e.weight;
    }
    return s;
}

std::size_t support_overlap(const SparseVec &a, const SparseVec &b) noexcept {
    auto ea = a.entries();
    auto eb = b.entries();
    std::size_t n = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].term < eb[j].term) {
            ++i;
        } else if (eb[j].term < ea[i].term) {
            ++j;
        } else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

SparseVec top_k_by_weight(const SparseVec &v, std::size_t k) {
    if (v.nnz() <= k) {
        return v;
    }
    std::vector<TermWeight> e(v.entries().begin(), v.entries().end());
    auto heavier = [](const TermWeight &a, const TermWeight &b) {
        return a.weight > b.weight || (a.weight == b.weight && a.term < b.term);
    };
    std::nth_element(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(k), e.end(), heavier);
    e.resize(k);
    return SparseVec::from_entries(std::move(e));
}

}  // namespace prosper
