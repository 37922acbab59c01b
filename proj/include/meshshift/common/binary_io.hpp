#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "meshshift/common/errors.hpp"

namespace meshshift::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written by direct little-endian stores");

inline constexpr std::array<char, 8> kMagic = {'M', 'E', 'S', 'H', 'S', 'H', 'F', 'T'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

enum class RecordType : std::uint32_t { sample = 1, checkpoint = 2, cache = 3 };

/// Append-only little-endian encoder.
class ByteWriter {
 public:
  explicit ByteWriter(RecordType type);

  void u64(std::uint64_t v) { put(&v, sizeof v); }
  void f64(double v) { put(&v, sizeof v); }
  void u64s(std::span<const std::uint64_t> v) { put(v.data(), v.size_bytes()); }
  void f64s(std::span<const double> v) { put(v.data(), v.size_bytes()); }

  const std::vector<char>& bytes() const noexcept { return buf_; }
  /// Writes atomically through a temporary file in the same directory.
  void save(const std::filesystem::path& path) const;

 private:
  void put(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  std::vector<char> buf_;
};

/// Bounds-checked decoder. Every failure reports the byte offset where it happened.
class ByteReader {
 public:
  ByteReader(std::vector<char> bytes, RecordType expected, std::string origin);
  static ByteReader open(const std::filesystem::path& path, RecordType expected);

  std::uint64_t u64();
  double f64();
  std::vector<std::uint64_t> u64s(std::uint64_t count);
  std::vector<double> f64s(std::uint64_t count);

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return buf_.size() - pos_; }
  void expect_end() const;
  [[noreturn]] void fail(const std::string& what) const { fail_at(what, pos_); }
  [[noreturn]] void fail_at(const std::string& what, std::uint64_t offset) const;

 private:
  void take(void* dst, std::uint64_t n, const char* what);
  std::vector<char> buf_;
  std::uint64_t pos_ = 0;
  std::string origin_;
};

std::vector<char> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Lowercase hex SHA-256, used for content fingerprints in manifests.
std::string sha256_hex(std::span<const char> bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace meshshift::io
