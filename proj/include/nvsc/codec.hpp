#pragma once

#include <string>
#include <vector>

#include "nvsc/bitstream.hpp"
#include "nvsc/rng.hpp"
#include "nvsc/codebook_io.hpp"
#include "nvsc/parameter_coding.hpp"
#include "nvsc/signal_analysis.hpp"
#include "nvsc/wav.hpp"

namespace nvsc {

AnalysisConfig analysis_config_for(const OperatingPoint& op);

struct EncodeResult {
  std::vector<QuantizedFrame> frames;
  std::vector<FrameParams> analyzed;       // unquantized analysis output
  std::vector<FrameParams> decoded_local;  // encoder-side reconstruction
};

EncodeResult encode_audio(const AudioBuffer& audio, const OperatingPoint& op,
                          const CodebookSet& books);

std::vector<FrameParams> decode_frames(const std::vector<QuantizedFrame>& frames,
                                       const OperatingPoint& op, const CodebookSet& books);

struct CodebookTrainOptions {
  std::vector<OpPointId> ops = {OpPointId::R5_6, OpPointId::R6_4, OpPointId::R8_0};
  int gmm_components = 8;
  int gmm_iters = 30;
  uint64_t seed = kDefaultSeed;
};

struct CodebookTrainReport {
  // realized mean LSP rate (bits/frame) per trained operating point
  std::vector<std::pair<OpPointId, double>> realized_rates;
};

// Analysis over the corpus, GMM + VQ training, step calibration. Requires at
// least 60 s of speech in total.
CodebookSet train_codebooks(const std::vector<AudioBuffer>& corpus,
                            const CodebookTrainOptions& options,
                            CodebookTrainReport* report = nullptr);

}  // namespace nvsc
