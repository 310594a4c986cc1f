#include "nvsc/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace nvsc {

namespace {

uint32_t read_u32(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  uint8_t b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  out.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

std::vector<int16_t> to_pcm16(const Vec& samples) {
  std::vector<int16_t> pcm(samples.size());
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    double v = std::round(samples[i] * 32768.0);
    v = std::clamp(v, -32768.0, 32767.0);
    pcm[i] = static_cast<int16_t>(v);
  }
  return pcm;
}

Vec from_pcm16(const std::vector<int16_t>& pcm) {
  Vec out(pcm.size());
  for (size_t i = 0; i < pcm.size(); ++i) out[i] = pcm[i] / 32768.0;
  return out;
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open WAV file: " + path);

  char riff[4], wave[4];
  in.read(riff, 4);
  uint32_t riff_size = read_u32(in);
  (void)riff_size;
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path);

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<int16_t> pcm;
  bool have_data = false;

  while (in) {
    char id[4];
    in.read(id, 4);
    if (!in) break;
    uint32_t size = read_u32(in);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("WAV data chunk before fmt chunk: " + path);
      pcm.resize(size / 2);
      in.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(pcm.size() * 2));
      if (!in) throw FormatError("truncated WAV data chunk: " + path);
      have_data = true;
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data) throw FormatError("WAV missing fmt or data chunk: " + path);
  if (format != 1) throw FormatError("WAV is not integer PCM (format tag " + std::to_string(format) + "): " + path);
  if (bits != 16) throw FormatError("WAV is not 16-bit (got " + std::to_string(bits) + " bits): " + path);
  if (channels != 1) throw FormatError("WAV is not mono (got " + std::to_string(channels) + " channels): " + path);
  if (rate != kSampleRate)
    throw FormatError("WAV is not 16 kHz (got " + std::to_string(rate) + " Hz): " + path);

  AudioBuffer audio;
  audio.sample_rate = kSampleRate;
  audio.samples = from_pcm16(pcm);
  return audio;
}

void write_wav(const std::string& path, const AudioBuffer& audio) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot create WAV file: " + path);

  const std::vector<int16_t> pcm = to_pcm16(audio.samples);
  const uint32_t data_size = static_cast<uint32_t>(pcm.size() * 2);

  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(audio.sample_rate));
  write_u32(out, static_cast<uint32_t>(audio.sample_rate * 2));
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_size);
  out.write(reinterpret_cast<const char*>(pcm.data()), data_size);
  if (!out) throw FormatError("failed writing WAV file: " + path);
}

}  // namespace nvsc
