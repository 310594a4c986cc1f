#include "nvsc/codec.hpp"

#include <cmath>

namespace nvsc {

AnalysisConfig analysis_config_for(const OperatingPoint& op) {
  AnalysisConfig config;
  config.lpc_order = op.lpc_order;
  return config;
}

EncodeResult encode_audio(const AudioBuffer& audio, const OperatingPoint& op,
                          const CodebookSet& books) {
  EncodeResult result;
  result.analyzed = analyze(audio, analysis_config_for(op));
  PredictiveCoderState enc_state, dec_state;
  result.frames.reserve(result.analyzed.size());
  result.decoded_local.reserve(result.analyzed.size());
  for (const FrameParams& params : result.analyzed) {
    result.frames.push_back(quantize_frame(params, op, books, enc_state));
    result.decoded_local.push_back(dequantize_frame(result.frames.back(), op, books, dec_state));
  }
  return result;
}

std::vector<FrameParams> decode_frames(const std::vector<QuantizedFrame>& frames,
                                       const OperatingPoint& op, const CodebookSet& books) {
  PredictiveCoderState state;
  std::vector<FrameParams> decoded;
  decoded.reserve(frames.size());
  for (const QuantizedFrame& q : frames) decoded.push_back(dequantize_frame(q, op, books, state));
  return decoded;
}

CodebookSet train_codebooks(const std::vector<AudioBuffer>& corpus,
                            const CodebookTrainOptions& options, CodebookTrainReport* report) {
  long total_samples = 0;
  for (const AudioBuffer& audio : corpus) total_samples += audio.samples.size();
  if (total_samples < 60l * kSampleRate)
    throw std::invalid_argument("codebook training needs at least 60 s of speech");

  CodebookSet books;

  bool need16 = false, need22 = false;
  for (OpPointId id : options.ops) {
    if (OperatingPoint::get(id).lpc_order == 16) need16 = true;
    if (OperatingPoint::get(id).lpc_order == 22) need22 = true;
  }

  // Voicing vectors and f0/level statistics do not depend on the LPC order;
  // collect them in a single fixed-order pass.
  std::vector<std::vector<FrameParams>> frames16(corpus.size()), frames22(corpus.size());
  {
    AnalysisConfig config;
    config.lpc_order = 16;
    for (size_t u = 0; u < corpus.size(); ++u) frames16[u] = analyze(corpus[u], config);
  }
  if (need22) {
    AnalysisConfig config;
    config.lpc_order = 22;
    for (size_t u = 0; u < corpus.size(); ++u) frames22[u] = analyze(corpus[u], config);
  }
  if (!need16 && !need22) throw std::invalid_argument("no operating points requested");

  long n_frames = 0;
  for (const auto& frames : frames16) n_frames += static_cast<long>(frames.size());

  // voicing VQ + standardization statistics
  {
    Mat warped(n_frames, kVoicingBands);
    double f0_sum = 0, f0_sq = 0, s_sum = 0, s_sq = 0;
    long row = 0;
    for (const auto& frames : frames16) {
      for (const FrameParams& fp : frames) {
        warped.row(row++) = warp_voicing(fp.voicing).transpose();
        f0_sum += fp.f0;
        f0_sq += fp.f0 * fp.f0;
        const double sdb = level_to_db(fp.s);
        s_sum += sdb;
        s_sq += sdb * sdb;
      }
    }
    books.vq = vq_train(warped, derive_seed(options.seed, "vq-init"));
    books.has_vq = true;

    const double nf = static_cast<double>(n_frames);
    books.f0_mean = f0_sum / nf;
    books.f0_std = std::sqrt(std::max(f0_sq / nf - books.f0_mean * books.f0_mean, 0.0));
    if (books.f0_std < 1e-9) books.f0_std = 1.0;
    books.s_db_mean = s_sum / nf;
    books.s_db_std = std::sqrt(std::max(s_sq / nf - books.s_db_mean * books.s_db_mean, 0.0));
    if (books.s_db_std < 1e-9) books.s_db_std = 1.0;
  }

  auto lsp_rows = [&](const std::vector<std::vector<FrameParams>>& all, int order) {
    Mat rows(n_frames, order);
    long row = 0;
    for (const auto& frames : all)
      for (const FrameParams& fp : frames) rows.row(row++) = lpc_to_lsp(fp.lpc).transpose();
    return rows;
  };

  Mat lsp16, lsp22;
  GmmModel gmm16, gmm22;
  if (need16) {
    lsp16 = lsp_rows(frames16, 16);
    gmm16 = gmm_train(lsp16, options.gmm_components, options.gmm_iters,
                      derive_seed(options.seed, "gmm-init-16"));
  }
  if (need22) {
    lsp22 = lsp_rows(frames22, 22);
    gmm22 = gmm_train(lsp22, options.gmm_components, options.gmm_iters,
                      derive_seed(options.seed, "gmm-init-22"));
  }

  for (OpPointId id : options.ops) {
    const OperatingPoint& op = OperatingPoint::get(id);
    GmmModel gmm = op.lpc_order == 16 ? gmm16 : gmm22;
    const Mat& data = op.lpc_order == 16 ? lsp16 : lsp22;
    const double rate = calibrate_steps(gmm, data, op.lsp_bit_budget);
    if (report) report->realized_rates.emplace_back(id, rate);
    books.gmm[static_cast<int>(id)] = std::move(gmm);
    books.has_gmm[static_cast<int>(id)] = true;
  }

  return books;
}

}  // namespace nvsc
