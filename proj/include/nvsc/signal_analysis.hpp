#pragma once

#include <array>
#include <utility>
#include <vector>

#include "nvsc/types.hpp"
#include "nvsc/wav.hpp"

namespace nvsc {

struct AnalysisConfig {
  int frame_length = kFrameLength;
  // Full per-frame analysis extent; wide enough for the pitch correlation
  // span (320-sample window + 320-sample max lag).
  int window_length = 640;
  // 25 ms Hann window used for the LPC autocorrelation, centered in the
  // analysis extent.
  int lpc_window_length = 400;
  int lpc_order = 16;  // M: 16 or 22
  double pitch_min_hz = 50.0;
  double pitch_max_hz = 400.0;
  double voicing_threshold = 0.3;
  std::array<double, kVoicingBands + 1> band_edges_hz{0, 500, 1000, 2000, 3000, 5000, 8000};
};

struct FrameParams {
  Vec lpc;             // a_1..a_M; predictor x_hat[n] = -sum a_i x[n-i]
  double s = 0.0;      // residual RMS, linear amplitude
  double f0 = 0.0;     // pitch in Hz, 0 = unvoiced
  Vec6 voicing = Vec6::Zero();  // per-band periodic energy fraction in [0,1]
};

// Linear-phase FIR band splitter shared by voicing analysis and synthesis.
class BandFilterBank {
 public:
  explicit BandFilterBank(const std::array<double, kVoicingBands + 1>& edges_hz, int taps = 129);
  // Zero-padded convolution with group delay removed; output length = input length.
  Vec filter(int band, const Vec& x) const;
  int bands() const { return static_cast<int>(taps_.size()); }
  const Vec& taps(int band) const { return taps_[band]; }

 private:
  std::vector<Vec> taps_;
};

// One column per frame: the centered window_length extent, zero-padded at the
// signal edges. Frame count = ceil(len / frame_length).
Mat frame_signal(const AudioBuffer& audio, const AnalysisConfig& config);

Vec hann_window(int n);

// Autocorrelation-method LPC on a windowed frame. Returns (a_1..a_M,
// residual RMS). All-zero input returns zeros with rms 0.
std::pair<Vec, double> lpc_analyze(const Vec& windowed, int order);

Vec lpc_to_reflection(const Vec& lpc);
Vec reflection_to_lpc(const Vec& refl);

// LSP frequencies strictly increasing in (0, pi); M must be even.
Vec lpc_to_lsp(const Vec& lpc);
Vec lsp_to_lpc(const Vec& lsp);

bool lpc_is_stable(const Vec& lpc);

double pitch_estimate(const Vec& frame, const AnalysisConfig& config);

Vec6 voicing_estimate(const Vec& frame, double f0, const AnalysisConfig& config,
                      const BandFilterBank& bank);

// Full per-frame analysis pipeline.
std::vector<FrameParams> analyze(const AudioBuffer& audio, const AnalysisConfig& config);

}  // namespace nvsc
