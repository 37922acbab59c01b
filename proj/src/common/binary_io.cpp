#include "meshshift/common/binary_io.hpp"

#include <openssl/sha.h>

#include <fstream>
#include <iterator>
#include <sstream>

namespace meshshift::io {

ByteWriter::ByteWriter(RecordType type) {
  put(kMagic.data(), kMagic.size());
  const std::uint32_t version = kFormatVersion;
  const auto t = static_cast<std::uint32_t>(type);
  put(&version, sizeof version);
  put(&t, sizeof t);
}

void ByteWriter::save(const std::filesystem::path& path) const { write_file_atomic(path, buf_); }

ByteReader::ByteReader(std::vector<char> bytes, RecordType expected, std::string origin)
    : buf_(std::move(bytes)), origin_(std::move(origin)) {
  if (buf_.size() < kHeaderBytes) fail_at("file shorter than the 16-byte header", buf_.size());
  if (std::memcmp(buf_.data(), kMagic.data(), kMagic.size()) != 0) fail_at("bad magic", 0);
  std::uint32_t version = 0, type = 0;
  std::memcpy(&version, buf_.data() + 8, 4);
  std::memcpy(&type, buf_.data() + 12, 4);
  if (version != kFormatVersion) fail_at("unsupported format version " + std::to_string(version), 8);
  if (type != static_cast<std::uint32_t>(expected)) {
    fail_at("record type " + std::to_string(type) + " where " +
                std::to_string(static_cast<std::uint32_t>(expected)) + " was expected",
            12);
  }
  pos_ = kHeaderBytes;
}

ByteReader ByteReader::open(const std::filesystem::path& path, RecordType expected) {
  return ByteReader(read_file(path), expected, path.string());
}

void ByteReader::take(void* dst, std::uint64_t n, const char* what) {
  if (n > remaining()) {
    fail_at(std::string("truncated while reading ") + what + ": need " + std::to_string(n) + " bytes, " +
                std::to_string(remaining()) + " left",
            buf_.size());
  }
  std::memcpy(dst, buf_.data() + pos_, n);
  pos_ += n;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  take(&v, sizeof v, "u64");
  return v;
}

double ByteReader::f64() {
  double v;
  take(&v, sizeof v, "f64");
  return v;
}

std::vector<std::uint64_t> ByteReader::u64s(std::uint64_t count) {
  if (count > remaining() / 8) fail_at("truncated u64 array of length " + std::to_string(count), buf_.size());
  std::vector<std::uint64_t> v(count);
  take(v.data(), count * 8, "u64 array");
  return v;
}

std::vector<double> ByteReader::f64s(std::uint64_t count) {
  if (count > remaining() / 8) fail_at("truncated f64 array of length " + std::to_string(count), buf_.size());
  std::vector<double> v(count);
  take(v.data(), count * 8, "f64 array");
  return v;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
}

void ByteReader::fail_at(const std::string& what, std::uint64_t offset) const {
  throw FormatError(origin_ + ": " + what, offset);
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  auto b = read_file(path);
  return std::string(b.begin(), b.end());
}

std::string sha256_hex(std::span<const char> bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  static constexpr char kHex[] = "0123456789abcdef";
  for (unsigned char c : digest) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace meshshift::io
