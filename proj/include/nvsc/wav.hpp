#pragma once

#include <string>
#include <vector>

#include "nvsc/types.hpp"

namespace nvsc {

struct AudioBuffer {
  Vec samples;  // normalized to [-1, 1), sample / 32768
  int sample_rate = kSampleRate;
};

// Accepts PCM 16-bit little-endian mono at 16 kHz only.
AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& audio);

// Exact int16 <-> [-1, 1) mapping used everywhere in the codec.
std::vector<int16_t> to_pcm16(const Vec& samples);
Vec from_pcm16(const std::vector<int16_t>& pcm);

}  // namespace nvsc
