#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prosper {

// Little-endian encoder for the binary file formats.
class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void varint(std::uint64_t v);
    void bytes(std::string_view s) { buf_.append(s); }
    /// u32 length followed by the raw bytes.
    void str(std::string_view s);

    [[nodiscard]] const std::string &data() const noexcept { return buf_; }
    [[nodiscard]] std::string take() noexcept { return std::move(buf_); }

  private:
    std::string buf_;
};

// Bounds-checked decoder; every failure names the byte offset it happened at.
class ByteReader {
  public:
    explicit ByteReader(std::string_view data, std::string what = "file")
        : data_(data), what_(std::move(what)) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    std::uint64_t varint();
    std::string_view bytes(std::size_t n);
    std::string str();

    [[nodiscard]] std::size_t offset() const noexcept { return pos_; }
    [[nodiscard]] bool at_end() const noexcept { return pos_ == data_.size(); }
    [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }

    [[noreturn]] void corrupt(const std::string &msg) const { corrupt_at(pos_, msg); }
    [[noreturn]] void corrupt_at(std::size_t offset, const std::string &msg) const;

  private:
    void need(std::size_t n, const char *field);

    std::string_view data_;
    std::string what_;
    std::size_t pos_ = 0;
};

[[nodiscard]] std::string read_file(const std::filesystem::path &path);

/// Writes to a sibling temp file then renames it over `path`, so readers never
/// observe a partially written output.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);

/// Splits on '\n', dropping a trailing empty line; a trailing '\r' is rejected
/// by callers that require LF endings.
[[nodiscard]] std::vector<std::string_view> split_lines(std::string_view text);

[[nodiscard]] std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace prosper
