#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace park::bytesio {

// Little-endian binary encoding helpers shared by the dataset and
// checkpoint containers.

inline uint64_t fnv1a(const uint8_t* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for write: " + path);
  }

  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { put_le(v, 4); }
  void u64(uint64_t v) { put_le(v, 8); }
  void i64(int64_t v) { put_le(static_cast<uint64_t>(v), 8); }
  void f64(double v) { put_le(std::bit_cast<uint64_t>(v), 8); }
  void f32(float v) { put_le(std::bit_cast<uint32_t>(v), 4); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }
  void bytes(const uint8_t* p, size_t n) { raw(p, n); }

  uint64_t checksum() const { return hash_; }
  uint64_t offset() const { return offset_; }

  void flush() { out_.flush(); }

 private:
  void raw(const uint8_t* p, size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    hash_ = fnv1a(p, n, hash_);
    offset_ += n;
  }
  void put_le(uint64_t v, int nbytes) {
    uint8_t buf[8];
    for (int i = 0; i < nbytes; ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
    raw(buf, static_cast<size_t>(nbytes));
  }

  std::ofstream out_;
  uint64_t hash_ = 0xcbf29ce484222325ULL;
  uint64_t offset_ = 0;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("cannot open for read: " + path);
  }

  uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
  uint32_t u32() { return static_cast<uint32_t>(get_le(4)); }
  uint64_t u64() { return get_le(8); }
  int64_t i64() { return static_cast<int64_t>(get_le(8)); }
  double f64() { return std::bit_cast<double>(get_le(8)); }
  float f32() { return std::bit_cast<float>(static_cast<uint32_t>(get_le(4))); }
  std::string str() {
    const uint32_t n = u32();
    std::string s(n, '\0');
    raw(reinterpret_cast<uint8_t*>(s.data()), n);
    return s;
  }
  void bytes(uint8_t* p, size_t n) { raw(p, n); }

  uint64_t checksum() const { return hash_; }
  uint64_t offset() const { return offset_; }
  void reset_checksum() { hash_ = 0xcbf29ce484222325ULL; }

 private:
  void raw(uint8_t* p, size_t n) {
    in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw std::runtime_error("truncated file " + path_ + " at byte offset " +
                               std::to_string(offset_));
    hash_ = fnv1a(p, n, hash_);
    offset_ += n;
  }
  uint64_t get_le(int nbytes) {
    uint8_t buf[8] = {0};
    raw(buf, static_cast<size_t>(nbytes));
    uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
  }

  std::ifstream in_;
  std::string path_;
  uint64_t hash_ = 0xcbf29ce484222325ULL;
  uint64_t offset_ = 0;
};

}  // namespace park::bytesio
