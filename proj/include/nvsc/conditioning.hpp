#pragma once

#include <vector>

#include "nvsc/parameter_coding.hpp"
#include "nvsc/signal_analysis.hpp"
#include "nvsc/types.hpp"

namespace nvsc {

// Corpus statistics applied to the f0 (Hz) and level (dB) slots of the
// conditioning vector; computed at codebook-training time.
struct ConditioningScaler {
  double f0_mean = 0.0, f0_std = 1.0;
  double s_db_mean = 0.0, s_db_std = 1.0;

  double scale_f0(double f0) const { return (f0 - f0_mean) / f0_std; }
  double scale_s_db(double s_db) const { return (s_db - s_db_mean) / s_db_std; }
};

ConditioningScaler scaler_from(const CodebookSet& books);

// Layout: [reflection coefficients (M slots) | f0 | s | voicing (6)].
// Dimension M + 8 (24 for M=16, 30 for M=22). Inputs must be decoded
// (reconstructed) parameters.
Vec build_conditioning(const FrameParams& decoded, const ConditioningScaler& scaler);

// Embedded low-rate-into-high-rate layout: 16 reflection slots, 6 zeros, then
// the coarse scalar/voicing slots at their fixed positions. Dimension 30.
Vec embed_conditioning(const FrameParams& decoded_m16, const ConditioningScaler& scaler);

// Zero-order hold: sample i belongs to frame i / 160.
// Throws unless total_samples == 160 * n_frames.
std::vector<int> upsample_conditioning_sequence(int n_frames, long total_samples);

// Convenience: one conditioning column per frame (direct when dims match,
// embedded when target_dim is 30 and M is 16).
Mat conditioning_matrix(const std::vector<FrameParams>& decoded, const ConditioningScaler& scaler,
                        int target_dim);

}  // namespace nvsc
