#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "nvsc/types.hpp"

namespace nvsc {

// Versioned little-endian binary container with named sections and a CRC32
// trailer. Backing store for the codebook (.nvcb) and checkpoint (.nvck)
// files.
//
// layout: magic[4] | version u8 | section count u32 |
//         sections: name_len u16, name, payload_len u64, payload |
//         crc32 u32 over everything after the magic

uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0);

class ByteWriter {
 public:
  void put_u8(uint8_t v) { bytes_.push_back(v); }
  void put_u16(uint16_t v);
  void put_u32(uint32_t v);
  void put_u64(uint64_t v);
  void put_i32(int32_t v) { put_u32(static_cast<uint32_t>(v)); }
  void put_f64(double v);
  void put_f32(float v);
  void put_bytes(const uint8_t* data, size_t len);
  const std::vector<uint8_t>& bytes() const { return bytes_; }
  std::vector<uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t len) : data_(data), len_(len) {}
  explicit ByteReader(const std::vector<uint8_t>& v) : data_(v.data()), len_(v.size()) {}
  uint8_t get_u8();
  uint16_t get_u16();
  uint32_t get_u32();
  uint64_t get_u64();
  int32_t get_i32() { return static_cast<int32_t>(get_u32()); }
  double get_f64();
  float get_f32();
  void get_bytes(uint8_t* out, size_t len);
  size_t remaining() const { return len_ - pos_; }

 private:
  const uint8_t* data_;
  size_t len_;
  size_t pos_ = 0;
};

class Container {
 public:
  void set(const std::string& name, std::vector<uint8_t> payload) { sections_[name] = std::move(payload); }
  bool has(const std::string& name) const { return sections_.count(name) != 0; }
  const std::vector<uint8_t>& get(const std::string& name) const;

  void write(const std::string& path, const char magic[4], uint8_t version) const;
  // Validates magic, version and checksum; throws FormatError otherwise.
  static Container read(const std::string& path, const char magic[4], uint8_t expected_version);

 private:
  std::map<std::string, std::vector<uint8_t>> sections_;
};

}  // namespace nvsc
