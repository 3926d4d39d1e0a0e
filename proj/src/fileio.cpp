#include "rsketch/fileio.hpp"

#include <unistd.h>
#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <system_error>

namespace rsk {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::vector<std::uint8_t> bytes;
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  bytes.resize(static_cast<std::size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw InputError("failed reading file: " + path.string());
  return bytes;
}

namespace {

void rename_over(const std::filesystem::path& temp, const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp);
    throw InputError("cannot move temp file onto " + path.string() + ": " + ec.message());
  }
}

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  return path.string() + ".tmp-" + std::to_string(::getpid());
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path temp = temp_sibling(path);
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open file for writing: " + temp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::filesystem::remove(temp);
      throw InputError("failed writing file: " + temp.string());
    }
  }
  rename_over(temp, path);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_auto(const std::filesystem::path& path) {
  // gzread passes uncompressed bytes through unchanged, so one code path
  // covers both plain and .gz inputs.
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (file == nullptr) throw InputError("cannot open file: " + path.string());
  std::string text;
  char buffer[1 << 16];
  for (;;) {
    const int n = gzread(file, buffer, sizeof(buffer));
    if (n < 0) {
      gzclose(file);
      throw InputError("failed reading file (bad gzip stream?): " + path.string());
    }
    if (n == 0) break;
    text.append(buffer, static_cast<std::size_t>(n));
  }
  gzclose(file);
  return text;
}

}  // namespace rsk
