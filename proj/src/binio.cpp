#include "prosper/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "prosper/error.hpp"

namespace prosper {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void ByteWriter::u16(std::uint16_t v) {
    char b[2];
    std::memcpy(b, &v, 2);
    buf_.append(b, 2);
}

void ByteWriter::u32(std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf_.append(b, 4);
}

void ByteWriter::u64(std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    buf_.append(b, 8);
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::varint(std::uint64_t v) {
    while (v >= 0x80) {
        u8(static_cast<std::uint8_t>(v | 0x80));
        v >>= 7;
    }
    u8(static_cast<std::uint8_t>(v));
}

void ByteWriter::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
}

void ByteReader::corrupt_at(std::size_t offset, const std::string &msg) const {
    fail(ErrorKind::Format, what_ + ": " + msg + " at offset " + std::to_string(offset));
}

void ByteReader::need(std::size_t n, const char *field) {
    if (remaining() < n) {
        corrupt(std::string("truncated while reading ") + field);
    }
}

std::uint8_t ByteReader::u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint16_t ByteReader::u16() {
    need(2, "u16");
    std::uint16_t v;
    std::memcpy(&v, data_.data() + pos_, 2);
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    need(4, "u32");
    std::uint32_t v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8, "u64");
    std::uint64_t v;
    std::memcpy(&v, data_.data() + pos_, 8);
    pos_ += 8;
    return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::uint64_t ByteReader::varint() {
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
        const std::uint8_t b = u8();
        v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
        if ((b & 0x80) == 0) {
            return v;
        }
    }
    corrupt_at(start, "varint longer than 10 bytes");
}

std::string_view ByteReader::bytes(std::size_t n) {
    need(n, "bytes");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
}

std::string ByteReader::str() {
    const std::uint32_t n = u32();
    return std::string(bytes(n));
}

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        fail(ErrorKind::Io, "error while reading '" + path.string() + "'");
    }
    return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path &path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            fail(ErrorKind::Io, "error while writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::Io, "cannot rename onto '" + path.string() + "'");
    }
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    return lines;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace prosper
