#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvsc/parameter_coding.hpp"
#include "nvsc/types.hpp"

namespace nvsc {

// Carry-less range coder, 32-bit registers with byte-wise renormalization,
// 16-bit frequency precision (total frequency per table <= 65536).

class RangeEncoder {
 public:
  RangeEncoder() = default;
  void encode(uint32_t cum_freq, uint32_t freq, uint32_t total_freq);
  void put_bits(uint32_t value, int bits);  // uniform alphabet of width `bits`
  std::vector<uint8_t> finish();

 private:
  void normalize();
  std::vector<uint8_t> bytes_;
  uint32_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t len);
  // value in [0, total_freq) locating the next symbol's cumulative slot
  uint32_t decode_freq(uint32_t total_freq);
  void decode_update(uint32_t cum_freq, uint32_t freq, uint32_t total_freq);
  uint32_t get_bits(int bits);
  bool exhausted() const { return overrun_; }

 private:
  void normalize();
  uint8_t next_byte();
  const uint8_t* data_;
  size_t len_;
  size_t pos_ = 0;
  bool overrun_ = false;
  uint32_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// Cumulative frequency table over a small alphabet; total <= 65536, every
// symbol frequency >= 1.
struct SymbolTable {
  std::vector<uint32_t> freq;
  std::vector<uint32_t> cum;  // size freq.size() + 1
  uint32_t total = 0;

  static SymbolTable from_probabilities(const std::vector<double>& p);
  void encode_symbol(RangeEncoder& enc, int symbol) const;
  int decode_symbol(RangeDecoder& dec) const;
};

// Entropy-coding tables derived from a GMM: a component table plus one
// lattice-offset table per (component, dimension). Lattice indices are
// offset-shifted into [-64, 63]; outliers use an escape symbol followed by a
// raw 16-bit field.
struct LspSymbolTables {
  SymbolTable component;
  std::vector<std::vector<SymbolTable>> lattice;  // [component][dim]
  static LspSymbolTables build(const GmmModel& gmm);
};

constexpr int kLatticeOffsetMin = -64;
constexpr int kLatticeOffsetMax = 63;
constexpr int kLatticeEscape = 128;  // symbol index after the 128 offsets

// Frame field order: level mode bit, level payload, pitch mode bit, pitch
// payload, voicing index, then the range-coded LSP component and lattice
// indices.
void pack_frame(const QuantizedFrame& q, const OperatingPoint& op, const LspSymbolTables& tables,
                RangeEncoder& enc);
QuantizedFrame unpack_frame(const OperatingPoint& op, const LspSymbolTables& tables,
                            RangeDecoder& dec);

// .nvsc stream: header (magic "NVSC", version 1, operating point id, frame
// count) followed by the range-coded payload.
constexpr char kStreamMagic[4] = {'N', 'V', 'S', 'C'};
constexpr uint8_t kStreamVersion = 1;
constexpr size_t kStreamHeaderBytes = 10;

struct StreamInfo {
  OpPointId op;
  uint32_t frame_count = 0;
  uint64_t payload_bytes = 0;
};

std::vector<uint8_t> encode_stream(const std::vector<QuantizedFrame>& frames,
                                   const OperatingPoint& op, const CodebookSet& books);
std::pair<OpPointId, std::vector<QuantizedFrame>> decode_stream(const std::vector<uint8_t>& bytes,
                                                                const CodebookSet& books);

void write_stream(const std::vector<QuantizedFrame>& frames, const OperatingPoint& op,
                  const CodebookSet& books, const std::string& path);
std::pair<OpPointId, std::vector<QuantizedFrame>> read_stream(const std::string& path,
                                                              const CodebookSet& books);

// Header-only inspection (no codebooks needed).
StreamInfo peek_stream(const std::string& path);

}  // namespace nvsc
