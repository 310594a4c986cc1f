#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nvsc/codec.hpp"
#include "nvsc/synthesis.hpp"
#include "testutil.hpp"

using namespace nvsc;

namespace {

// lag-domain periodicity: normalized autocorrelation at the given lag
double periodicity(const Vec& x, int lag) {
  const Eigen::Index n = x.size() - lag;
  double dot = 0, ea = 0, eb = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    dot += x[i] * x[i + lag];
    ea += x[i] * x[i];
    eb += x[i + lag] * x[i + lag];
  }
  return dot / std::sqrt(std::max(ea * eb, 1e-30));
}

FrameParams flat_frame(double s, double f0, double voicing) {
  FrameParams p;
  p.lpc = Vec::Zero(16);
  p.s = s;
  p.f0 = f0;
  p.voicing.setConstant(voicing);
  return p;
}

}  // namespace

TEST_CASE("unvoiced excitation is aperiodic") {
  AnalysisConfig config;
  ClassicSynthesizer synth(config, 7);
  Vec out(160 * 20);
  for (int t = 0; t < 20; ++t)
    out.segment(160 * t, 160) = synth.synthesize_frame(flat_frame(0.1, 120.0, 0.0));
  CHECK(periodicity(out.tail(2400), kSampleRate / 120) <= 0.3);
}

TEST_CASE("zero level synthesizes exact silence") {
  AnalysisConfig config;
  ClassicSynthesizer synth(config, 7);
  for (int t = 0; t < 5; ++t) {
    const Vec out = synth.synthesize_frame(flat_frame(0.0, 100.0, 1.0));
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("fully voiced flat-filter synthesis: level and periodicity") {
  AnalysisConfig config;
  ClassicSynthesizer synth(config, 7);
  const double level = 0.1;
  Vec out(160 * 30);
  for (int t = 0; t < 30; ++t)
    out.segment(160 * t, 160) = synth.synthesize_frame(flat_frame(level, 100.0, 1.0));

  // steady region, skipping the filter warmup
  const Vec steady = out.tail(160 * 25);
  const double rms = std::sqrt(steady.squaredNorm() / steady.size());
  CHECK(rms == doctest::Approx(level).epsilon(0.10));
  CHECK(periodicity(steady, 160) >= 0.8);
}

TEST_CASE("pitch phase stays continuous across frames") {
  AnalysisConfig config;
  ClassicSynthesizer synth(config, 7);
  // 125 Hz: the 128-sample period does not divide the 160-sample frame, so a
  // per-frame phase reset would misalign pulses and kill the correlation
  Vec out(160 * 40);
  for (int t = 0; t < 40; ++t)
    out.segment(160 * t, 160) = synth.synthesize_frame(flat_frame(0.1, 125.0, 1.0));
  const Vec steady = out.tail(160 * 30);
  CHECK(periodicity(steady, 128) >= 0.8);
}

TEST_CASE("soft clip bounds the output") {
  CHECK(soft_clip(0.5) == 0.5);
  CHECK(soft_clip(3.0) < 1.0);
  CHECK(soft_clip(-3.0) > -1.0);
  CHECK(soft_clip(100.0) <= 1.0);
  for (double x = -5.0; x < 5.0; x += 0.01) {
    CHECK(std::abs(soft_clip(x)) <= 1.0);
  }
}

TEST_CASE("decode_classic end to end") {
  const auto corpus = testutil::speech_corpus(606, 2, 32.0);
  CodebookTrainOptions options;
  options.ops = {OpPointId::R6_4};
  options.gmm_iters = 10;
  const CodebookSet books = train_codebooks(corpus, options);
  const OperatingPoint& op = OperatingPoint::get(OpPointId::R6_4);

  SUBCASE("length and determinism") {
    const AudioBuffer eval = testutil::speech_buffer(707, 2.0);
    const EncodeResult enc = encode_audio(eval, op, books);
    const std::string path = testutil::temp_path("nvsc_synth_test.nvsc");
    write_stream(enc.frames, op, books, path);
    const AudioBuffer a = decode_classic(path, books, 42);
    const AudioBuffer b = decode_classic(path, books, 42);
    CHECK(a.samples.size() == static_cast<long>(enc.frames.size()) * 160);
    CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.samples.cwiseAbs().maxCoeff() <= 1.0);
    std::remove(path.c_str());
  }

  SUBCASE("output RMS tracks the decoded level on steady flat-spectrum input") {
    // constant-level noise analyzes to a near-flat filter with unit
    // prediction gain, which is where the level contract is exact
    Rng rng(11);
    AudioBuffer noise;
    noise.samples.resize(2 * kSampleRate);
    for (long i = 0; i < noise.samples.size(); ++i) noise.samples[i] = 0.08 * rng.normal();
    const EncodeResult enc = encode_audio(noise, op, books);
    const std::vector<FrameParams> decoded = decode_frames(enc.frames, op, books);
    const AudioBuffer out = synthesize_classic(decoded, analysis_config_for(op), 42);

    // skip filter warmup, measure per-frame and long-term RMS
    double energy = 0.0;
    long count = 0;
    int tracked = 0, within = 0;
    for (size_t t = 4; t < decoded.size(); ++t) {
      const Vec frame = out.samples.segment(160 * t, 160);
      const double rms = std::sqrt(frame.squaredNorm() / 160.0);
      ++tracked;
      if (std::abs(20.0 * std::log10(rms / decoded[t].s)) <= 1.5) ++within;
      energy += frame.squaredNorm();
      count += 160;
    }
    REQUIRE(tracked > 100);
    CHECK(within >= tracked * 95 / 100);

    double s_mean = 0.0;
    for (size_t t = 4; t < decoded.size(); ++t) s_mean += decoded[t].s;
    s_mean /= static_cast<double>(decoded.size() - 4);
    const double long_term = std::sqrt(energy / count);
    CHECK(std::abs(20.0 * std::log10(long_term / s_mean)) <= 1.5);
  }
}
