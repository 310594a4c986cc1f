#include "nvsc/bitstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace nvsc {

namespace {

constexpr uint32_t kTop = 1u << 24;
constexpr uint32_t kBottom = 1u << 16;
constexpr uint32_t kMaxTotalFreq = 1u << 16;

}  // namespace

// ---- range coder -----------------------------------------------------------

void RangeEncoder::normalize() {
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBottom && ((range_ = static_cast<uint32_t>(-static_cast<int32_t>(low_)) & (kBottom - 1)), true))) {
    bytes_.push_back(static_cast<uint8_t>(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

void RangeEncoder::encode(uint32_t cum_freq, uint32_t freq, uint32_t total_freq) {
  if (freq == 0 || total_freq > kMaxTotalFreq || cum_freq + freq > total_freq)
    throw std::invalid_argument("invalid range coder frequencies");
  range_ /= total_freq;
  low_ += cum_freq * range_;
  range_ *= freq;
  normalize();
}

void RangeEncoder::put_bits(uint32_t value, int bits) {
  while (bits > 16) {
    put_bits((value >> (bits - 16)) & 0xFFFF, 16);
    bits -= 16;
  }
  if (bits <= 0) return;
  const uint32_t total = 1u << bits;
  if (value >= total) throw std::invalid_argument("value exceeds field width");
  encode(value, 1, total);
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 4; ++i) {
    bytes_.push_back(static_cast<uint8_t>(low_ >> 24));
    low_ <<= 8;
  }
  return std::move(bytes_);
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t len) : data_(data), len_(len) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= len_) {
    overrun_ = true;
    return 0;
  }
  return data_[pos_++];
}

void RangeDecoder::normalize() {
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBottom && ((range_ = static_cast<uint32_t>(-static_cast<int32_t>(low_)) & (kBottom - 1)), true))) {
    code_ = (code_ << 8) | next_byte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

uint32_t RangeDecoder::decode_freq(uint32_t total_freq) {
  range_ /= total_freq;
  const uint32_t v = (code_ - low_) / range_;
  if (v >= total_freq) throw FormatError("bitstream decode failure");
  return v;
}

void RangeDecoder::decode_update(uint32_t cum_freq, uint32_t freq, uint32_t total_freq) {
  (void)total_freq;
  low_ += cum_freq * range_;
  range_ *= freq;
  normalize();
}

uint32_t RangeDecoder::get_bits(int bits) {
  if (bits > 16) {
    const uint32_t hi = get_bits(16);
    return (hi << (bits - 16)) | get_bits(bits - 16);
  }
  if (bits <= 0) return 0;
  const uint32_t total = 1u << bits;
  const uint32_t v = decode_freq(total);
  decode_update(v, 1, total);
  return v;
}

// ---- symbol tables -----------------------------------------------------------

SymbolTable SymbolTable::from_probabilities(const std::vector<double>& p) {
  SymbolTable t;
  const size_t n = p.size();
  if (n == 0 || n >= kMaxTotalFreq) throw std::invalid_argument("bad alphabet size");
  // floor() keeps the total bounded by kMaxTotalFreq even after the +1 floor
  // that guarantees every symbol is codable
  const double scale = static_cast<double>(kMaxTotalFreq - n);
  t.freq.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double pi = std::clamp(p[i], 0.0, 1.0);
    t.freq[i] = static_cast<uint32_t>(pi * scale) + 1;
  }
  t.cum.resize(n + 1);
  t.cum[0] = 0;
  for (size_t i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + t.freq[i];
  t.total = t.cum[n];
  if (t.total > kMaxTotalFreq) throw std::invalid_argument("frequency table overflow");
  return t;
}

void SymbolTable::encode_symbol(RangeEncoder& enc, int symbol) const {
  enc.encode(cum[symbol], freq[symbol], total);
}

int SymbolTable::decode_symbol(RangeDecoder& dec) const {
  const uint32_t v = dec.decode_freq(total);
  // tables are tiny; linear scan
  int symbol = 0;
  while (cum[symbol + 1] <= v) ++symbol;
  dec.decode_update(cum[symbol], freq[symbol], total);
  return symbol;
}

LspSymbolTables LspSymbolTables::build(const GmmModel& gmm) {
  LspSymbolTables tables;
  {
    std::vector<double> p(gmm.components());
    for (int m = 0; m < gmm.components(); ++m) p[m] = gmm.weights[m];
    tables.component = SymbolTable::from_probabilities(p);
  }
  tables.lattice.resize(gmm.components());
  for (int m = 0; m < gmm.components(); ++m) {
    tables.lattice[m].reserve(gmm.dim());
    for (int j = 0; j < gmm.dim(); ++j) {
      std::vector<double> p(129);
      double covered = 0.0;
      for (int off = kLatticeOffsetMin; off <= kLatticeOffsetMax; ++off) {
        const double mass = lattice_cell_mass(gmm, m, j, off);
        p[off - kLatticeOffsetMin] = mass;
        covered += mass;
      }
      p[kLatticeEscape] = std::max(1.0 - covered, 0.0);
      tables.lattice[m].push_back(SymbolTable::from_probabilities(p));
    }
  }
  return tables;
}

// ---- frame packing ------------------------------------------------------------

void pack_frame(const QuantizedFrame& q, const OperatingPoint& op, const LspSymbolTables& tables,
                RangeEncoder& enc) {
  enc.put_bits(static_cast<uint32_t>(q.level.mode), 1);
  enc.put_bits(static_cast<uint32_t>(q.level.payload), op.level_payload_bits);
  enc.put_bits(static_cast<uint32_t>(q.pitch.mode), 1);
  enc.put_bits(static_cast<uint32_t>(q.pitch.payload), op.pitch_payload_bits);
  enc.put_bits(static_cast<uint32_t>(q.voicing_index), op.voicing_bits);

  tables.component.encode_symbol(enc, q.lsp.component);
  for (Eigen::Index j = 0; j < q.lsp.indices.size(); ++j) {
    const int idx = q.lsp.indices[j];
    const SymbolTable& t = tables.lattice[q.lsp.component][j];
    if (idx >= kLatticeOffsetMin && idx <= kLatticeOffsetMax) {
      t.encode_symbol(enc, idx - kLatticeOffsetMin);
    } else {
      if (idx < -32768 || idx > 32767) throw std::invalid_argument("lattice index exceeds field width");
      t.encode_symbol(enc, kLatticeEscape);
      enc.put_bits(static_cast<uint32_t>(idx + 32768), 16);
    }
  }
}

QuantizedFrame unpack_frame(const OperatingPoint& op, const LspSymbolTables& tables,
                            RangeDecoder& dec) {
  QuantizedFrame q;
  q.level.mode = static_cast<int>(dec.get_bits(1));
  q.level.payload = static_cast<int>(dec.get_bits(op.level_payload_bits));
  q.pitch.mode = static_cast<int>(dec.get_bits(1));
  q.pitch.payload = static_cast<int>(dec.get_bits(op.pitch_payload_bits));
  q.voicing_index = static_cast<int>(dec.get_bits(op.voicing_bits));

  q.lsp.component = tables.component.decode_symbol(dec);
  q.lsp.indices.resize(op.lpc_order);
  for (int j = 0; j < op.lpc_order; ++j) {
    const int symbol = tables.lattice[q.lsp.component][j].decode_symbol(dec);
    if (symbol == kLatticeEscape) {
      q.lsp.indices[j] = static_cast<int>(dec.get_bits(16)) - 32768;
    } else {
      q.lsp.indices[j] = symbol + kLatticeOffsetMin;
    }
  }
  return q;
}

// ---- stream io ------------------------------------------------------------------

std::vector<uint8_t> encode_stream(const std::vector<QuantizedFrame>& frames,
                                   const OperatingPoint& op, const CodebookSet& books) {
  const LspSymbolTables tables = LspSymbolTables::build(books.gmm_for(op.id));
  RangeEncoder enc;
  for (const QuantizedFrame& q : frames) pack_frame(q, op, tables, enc);
  std::vector<uint8_t> payload = enc.finish();

  std::vector<uint8_t> out;
  out.reserve(kStreamHeaderBytes + payload.size());
  out.insert(out.end(), kStreamMagic, kStreamMagic + 4);
  out.push_back(kStreamVersion);
  out.push_back(static_cast<uint8_t>(op.id));
  const uint32_t count = static_cast<uint32_t>(frames.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(count >> (8 * i)));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

namespace {

StreamInfo parse_header(const std::vector<uint8_t>& bytes, const std::string& path) {
  if (bytes.size() < kStreamHeaderBytes) throw FormatError("stream too short: " + path);
  if (std::memcmp(bytes.data(), kStreamMagic, 4) != 0)
    throw FormatError("bad stream magic (not an .nvsc file): " + path);
  if (bytes[4] != kStreamVersion)
    throw FormatError("unsupported stream version " + std::to_string(bytes[4]) + ": " + path);
  if (bytes[5] > 2) throw FormatError("invalid operating point id in stream header: " + path);
  StreamInfo info;
  info.op = static_cast<OpPointId>(bytes[5]);
  info.frame_count = 0;
  for (int i = 0; i < 4; ++i) info.frame_count |= static_cast<uint32_t>(bytes[6 + i]) << (8 * i);
  info.payload_bytes = bytes.size() - kStreamHeaderBytes;
  return info;
}

}  // namespace

std::pair<OpPointId, std::vector<QuantizedFrame>> decode_stream(const std::vector<uint8_t>& bytes,
                                                                const CodebookSet& books) {
  const StreamInfo info = parse_header(bytes, "<memory>");
  const OperatingPoint& op = OperatingPoint::get(info.op);
  const LspSymbolTables tables = LspSymbolTables::build(books.gmm_for(info.op));

  RangeDecoder dec(bytes.data() + kStreamHeaderBytes, bytes.size() - kStreamHeaderBytes);
  std::vector<QuantizedFrame> frames;
  frames.reserve(info.frame_count);
  for (uint32_t i = 0; i < info.frame_count; ++i) {
    frames.push_back(unpack_frame(op, tables, dec));
    if (dec.exhausted()) throw FormatError("bitstream decode failure: truncated payload");
  }
  return {info.op, std::move(frames)};
}

void write_stream(const std::vector<QuantizedFrame>& frames, const OperatingPoint& op,
                  const CodebookSet& books, const std::string& path) {
  const std::vector<uint8_t> bytes = encode_stream(frames, op, books);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot create stream file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing stream file: " + path);
}

std::pair<OpPointId, std::vector<QuantizedFrame>> read_stream(const std::string& path,
                                                              const CodebookSet& books) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open stream file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  parse_header(bytes, path);
  return decode_stream(bytes, books);
}

StreamInfo peek_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open stream file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_header(bytes, path);
}

}  // namespace nvsc
