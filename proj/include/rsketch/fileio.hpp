#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rsketch/error.hpp"

namespace rsk {

/// Little-endian byte-stream writer for the binary artifact formats.
class ByteWriter {
public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void magic(const char (&tag)[5]) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(tag[i]));
  }

  void pad(std::size_t n) { bytes_.insert(bytes_.end(), n, 0); }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
  std::vector<std::uint8_t> bytes_;
};

/// Little-endian reader; every decode failure reports the byte offset.
class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  void expect_magic(const char (&tag)[5], const char* what) {
    const std::size_t at = pos_;
    need(4, what);
    for (int i = 0; i < 4; ++i) {
      if (bytes_[at + i] != static_cast<std::uint8_t>(tag[i])) {
        throw FormatError(std::string("bad magic, expected \"") + tag + "\" for " + what, at);
      }
    }
    pos_ += 4;
  }

  void skip(std::size_t n, const char* what) {
    need(n, what);
    pos_ += n;
  }

  void f64_block(std::span<double> out, const char* what) {
    need(out.size() * 8, what);
    for (double& v : out) v = f64(what);
  }

  void expect_end(const char* what) {
    if (pos_ != bytes_.size()) {
      throw FormatError(std::string("trailing bytes after ") + what, pos_);
    }
  }

private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated while reading ") + what, pos_);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames on success, so a failed run
/// never leaves a partial artifact behind.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// Slurps a text file that may be either plain or gzip-compressed.
std::string read_text_auto(const std::filesystem::path& path);

}  // namespace rsk
