#include "nvsc/synthesis.hpp"

#include <cmath>

#include "nvsc/bitstream.hpp"

namespace nvsc {

double soft_clip(double x) {
  constexpr double knee = 0.85;
  if (std::abs(x) <= knee) return x;
  const double sign = x < 0.0 ? -1.0 : 1.0;
  return sign * (knee + (1.0 - knee) * std::tanh((std::abs(x) - knee) / (1.0 - knee)));
}

ClassicSynthesizer::ClassicSynthesizer(const AnalysisConfig& config, uint64_t seed)
    : config_(config),
      bank_(config.band_edges_hz),
      noise_(derive_seed(seed, "synthesis-noise")),
      filter_mem_(Vec::Zero(config.lpc_order)) {
  for (int b = 0; b < bank_.bands(); ++b)
    band_history_.push_back(Vec::Zero(bank_.taps(b).size() - 1));
}

Vec ClassicSynthesizer::synthesize_frame(const FrameParams& decoded) {
  const int n = config_.frame_length;
  const int subframes = 4;
  const double f0 = decoded.f0;

  // pulse train shared across bands; fractional positions keep phase continuous
  Vec pulses = Vec::Zero(n + 1);
  if (f0 > 0.0) {
    const double step = f0 / kSampleRate;  // cycles per sample
    const double amp = std::sqrt(kSampleRate / f0);
    for (int i = 0; i < n; ++i) {
      phase_ += step;
      if (phase_ >= 1.0) {
        phase_ -= 1.0;
        const double u = phase_ / step;  // fraction of a sample past the crossing
        pulses[i] += amp * (1.0 - u);
        pulses[i + 1] += amp * u;
      }
    }
  }

  // per-band voiced/unvoiced mix, band-filtered with carried delay lines
  Vec excitation = Vec::Zero(n);
  for (int b = 0; b < bank_.bands(); ++b) {
    const double vb = std::clamp(decoded.voicing[b], 0.0, 1.0);
    const double wp = std::sqrt(vb);
    const double wn = std::sqrt(1.0 - vb);
    Vec mix(n);
    for (int i = 0; i < n; ++i) mix[i] = wp * pulses[i] + wn * noise_.normal();

    const Vec& h = bank_.taps(b);
    const int hist = static_cast<int>(h.size()) - 1;
    Vec& mem = band_history_[b];
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < static_cast<int>(h.size()); ++k) {
        const int j = i - k;
        acc += h[k] * (j >= 0 ? mix[j] : mem[hist + j]);
      }
      excitation[i] += acc;
    }
    // shift delay line
    for (int k = 0; k < hist; ++k)
      mem[k] = (n - hist + k) >= 0 ? mix[n - hist + k] : mem[k + n];
  }

  const double rms = std::sqrt(excitation.squaredNorm() / n);
  const double gain = decoded.s / std::max(rms, 1e-6);

  // 1/A(z) with LSP-domain interpolation at 2.5 ms subframes
  const Vec cur_lsp = lpc_to_lsp(decoded.lpc);
  if (!has_prev_lsp_) {
    prev_lsp_ = cur_lsp;
    has_prev_lsp_ = true;
  }

  Vec out(n);
  const int sub_len = n / subframes;
  const int order = config_.lpc_order;
  for (int sf = 0; sf < subframes; ++sf) {
    const double alpha = static_cast<double>(sf + 1) / subframes;
    const Vec lsp = (1.0 - alpha) * prev_lsp_ + alpha * cur_lsp;
    const Vec a = lsp_to_lpc(lsp);
    for (int i = sf * sub_len; i < (sf + 1) * sub_len; ++i) {
      double y = gain * excitation[i];
      for (int k = 0; k < order; ++k) y -= a[k] * filter_mem_[k];
      for (int k = order - 1; k > 0; --k) filter_mem_[k] = filter_mem_[k - 1];
      filter_mem_[0] = y;
      out[i] = y;
    }
  }
  prev_lsp_ = cur_lsp;

  for (int i = 0; i < n; ++i) {
    const double clipped = soft_clip(out[i]);
    if (clipped != out[i]) ++clipped_;
    out[i] = clipped;
  }
  return out;
}

AudioBuffer synthesize_classic(const std::vector<FrameParams>& decoded,
                               const AnalysisConfig& config, uint64_t seed) {
  ClassicSynthesizer synth(config, seed);
  AudioBuffer audio;
  audio.samples = Vec(decoded.size() * config.frame_length);
  for (size_t t = 0; t < decoded.size(); ++t)
    audio.samples.segment(t * config.frame_length, config.frame_length) =
        synth.synthesize_frame(decoded[t]);
  return audio;
}

AudioBuffer decode_classic(const std::string& nvsc_path, const CodebookSet& books, uint64_t seed) {
  const auto [op_id, frames] = read_stream(nvsc_path, books);
  const OperatingPoint& op = OperatingPoint::get(op_id);

  PredictiveCoderState state;
  std::vector<FrameParams> decoded;
  decoded.reserve(frames.size());
  for (const QuantizedFrame& q : frames) decoded.push_back(dequantize_frame(q, op, books, state));

  AnalysisConfig config;
  config.lpc_order = op.lpc_order;
  return synthesize_classic(decoded, config, seed);
}

}  // namespace nvsc
