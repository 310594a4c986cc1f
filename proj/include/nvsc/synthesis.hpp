#pragma once

#include <string>
#include <vector>

#include "nvsc/parameter_coding.hpp"
#include "nvsc/rng.hpp"
#include "nvsc/signal_analysis.hpp"
#include "nvsc/wav.hpp"

namespace nvsc {

// Deterministic vocoder decoder: per band, a mix of a phase-accumulated pulse
// train and white noise weighted by the decoded voicing, band-filtered,
// normalized to the decoded level and shaped by 1/A(z) with LSP interpolation
// at 2.5 ms subframes.
class ClassicSynthesizer {
 public:
  ClassicSynthesizer(const AnalysisConfig& config, uint64_t seed);

  // Consumes one decoded frame, emits frame_length samples.
  Vec synthesize_frame(const FrameParams& decoded);

  long clipped_samples() const { return clipped_; }

 private:
  AnalysisConfig config_;
  BandFilterBank bank_;
  Rng noise_;
  std::vector<Vec> band_history_;  // per-band excitation delay lines
  Vec filter_mem_;                 // 1/A(z) state
  Vec prev_lsp_;
  bool has_prev_lsp_ = false;
  double phase_ = 0.0;
  long clipped_ = 0;
};

// Full decoder path for one stream's decoded parameters.
AudioBuffer synthesize_classic(const std::vector<FrameParams>& decoded,
                               const AnalysisConfig& config, uint64_t seed);

// Reads the stream, dequantizes and synthesizes.
AudioBuffer decode_classic(const std::string& nvsc_path, const CodebookSet& books, uint64_t seed);

double soft_clip(double x);

}  // namespace nvsc
