#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prosper/index.hpp"

namespace prosper {

// Sparse vector file: a headerless sequence of records, each a u32-length
// prefixed id, a u32 nnz and nnz (u32 term, f32 weight) pairs sorted by term.
// Weights are stored as f32; entries that round to zero are not written.

[[nodiscard]] std::string serialize_vectors(std::span<const DocVector> vecs);
[[nodiscard]] std::vector<DocVector> deserialize_vectors(std::string_view bytes,
                                                         const std::string &what = "vectors");

void save_vectors(const std::filesystem::path &path, std::span<const DocVector> vecs);
[[nodiscard]] std::vector<DocVector> load_vectors(const std::filesystem::path &path);

}  // namespace prosper
