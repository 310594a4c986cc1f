#include "nvsc/container.hpp"

#include <array>
#include <bit>
#include <fstream>

namespace nvsc {

namespace {

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

}  // namespace

uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void ByteWriter::put_u16(uint16_t v) {
  put_u8(static_cast<uint8_t>(v));
  put_u8(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::put_u32(uint32_t v) {
  for (int i = 0; i < 4; ++i) put_u8(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) put_u8(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_f64(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(bits);
}

void ByteWriter::put_f32(float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(bits);
}

void ByteWriter::put_bytes(const uint8_t* data, size_t len) {
  bytes_.insert(bytes_.end(), data, data + len);
}

uint8_t ByteReader::get_u8() {
  if (pos_ >= len_) throw FormatError("container section truncated");
  return data_[pos_++];
}

uint16_t ByteReader::get_u16() {
  uint16_t v = get_u8();
  return static_cast<uint16_t>(v | (get_u8() << 8));
}

uint32_t ByteReader::get_u32() {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(get_u8()) << (8 * i);
  return v;
}

uint64_t ByteReader::get_u64() {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(get_u8()) << (8 * i);
  return v;
}

double ByteReader::get_f64() {
  uint64_t bits = get_u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

float ByteReader::get_f32() {
  uint32_t bits = get_u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void ByteReader::get_bytes(uint8_t* out, size_t len) {
  if (pos_ + len > len_) throw FormatError("container section truncated");
  std::memcpy(out, data_ + pos_, len);
  pos_ += len;
}

const std::vector<uint8_t>& Container::get(const std::string& name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) throw FormatError("container is missing section '" + name + "'");
  return it->second;
}

void Container::write(const std::string& path, const char magic[4], uint8_t version) const {
  ByteWriter body;
  body.put_u8(version);
  body.put_u32(static_cast<uint32_t>(sections_.size()));
  for (const auto& [name, payload] : sections_) {
    body.put_u16(static_cast<uint16_t>(name.size()));
    body.put_bytes(reinterpret_cast<const uint8_t*>(name.data()), name.size());
    body.put_u64(payload.size());
    body.put_bytes(payload.data(), payload.size());
  }
  const uint32_t checksum = crc32(body.bytes().data(), body.bytes().size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot create file: " + path);
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(body.bytes().data()),
            static_cast<std::streamsize>(body.bytes().size()));
  ByteWriter tail;
  tail.put_u32(checksum);
  out.write(reinterpret_cast<const char*>(tail.bytes().data()), 4);
  if (!out) throw FormatError("failed writing file: " + path);
}

Container Container::read(const std::string& path, const char magic[4], uint8_t expected_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() < 4 + 1 + 4 + 4) throw FormatError("file too short: " + path);
  if (std::memcmp(raw.data(), magic, 4) != 0)
    throw FormatError("bad magic in " + path + " (expected " + std::string(magic, 4) + ")");

  const size_t body_len = raw.size() - 8;
  ByteReader tail(raw.data() + 4 + body_len, 4);
  const uint32_t stored = tail.get_u32();
  const uint32_t computed = crc32(raw.data() + 4, body_len);
  if (stored != computed) throw FormatError("checksum mismatch in " + path);

  ByteReader body(raw.data() + 4, body_len);
  const uint8_t version = body.get_u8();
  if (version != expected_version)
    throw FormatError("unsupported version " + std::to_string(version) + " in " + path);

  Container c;
  const uint32_t count = body.get_u32();
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = body.get_u16();
    std::string name(name_len, '\0');
    body.get_bytes(reinterpret_cast<uint8_t*>(name.data()), name_len);
    const uint64_t payload_len = body.get_u64();
    std::vector<uint8_t> payload(payload_len);
    body.get_bytes(payload.data(), payload_len);
    c.sections_[name] = std::move(payload);
  }
  return c;
}

}  // namespace nvsc
