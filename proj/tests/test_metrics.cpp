#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <fstream>

#include "nvsc/metrics.hpp"
#include "nvsc/signal_analysis.hpp"
#include "testutil.hpp"

using namespace nvsc;

TEST_CASE("spectral distortion") {
  SUBCASE("identical filters give zero") {
    Rng rng(3);
    const Vec a = testutil::random_stable_lpc(rng, 16, 0.8);
    CHECK(spectral_distortion(a, a) == 0.0);
  }

  SUBCASE("order-1 pair against a direct grid oracle") {
    Vec a(1), b(1);
    a << -0.9;
    b << -0.8;
    // oracle: evaluate |A(e^{jw})|^2 literally on the same 512-point grid
    double acc = 0.0;
    for (int k = 0; k < 512; ++k) {
      const double w = M_PI * k / 512;
      const std::complex<double> ejw(std::cos(-w), std::sin(-w));
      const double ma = std::norm(1.0 + (-0.9) * ejw);
      const double mb = std::norm(1.0 + (-0.8) * ejw);
      const double diff = 10.0 * std::log10(mb / ma);
      acc += diff * diff;
    }
    const double oracle = std::sqrt(acc / 512);
    CHECK(spectral_distortion(a, b) == doctest::Approx(oracle).epsilon(1e-9));
  }

  SUBCASE("symmetry") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Vec a = testutil::random_stable_lpc(rng, 16, 0.8);
      const Vec b = testutil::random_stable_lpc(rng, 16, 0.8);
      CHECK(spectral_distortion(a, b) == doctest::Approx(spectral_distortion(b, a)).epsilon(1e-12));
    }
  }

  SUBCASE("512-point grid is converged on analyzed speech spectra") {
    // the pipeline compares filters produced by lpc_analyze, whose lag window
    // keeps the poles off the unit circle; the grid claim applies to those
    const AudioBuffer audio = testutil::speech_buffer(808, 2.0);
    AnalysisConfig config;
    const auto frames = analyze(audio, config);
    int compared = 0;
    for (size_t t = 1; t < frames.size(); ++t) {
      if (frames[t].s < 1e-4 || frames[t - 1].s < 1e-4) continue;
      const Vec& a = frames[t - 1].lpc;
      const Vec& b = frames[t].lpc;
      CHECK(std::abs(spectral_distortion(a, b, 512) - spectral_distortion(a, b, 1024)) < 0.01);
      ++compared;
    }
    CHECK(compared > 100);
  }

  SUBCASE("unstable filter rejected") {
    Vec bad(1);
    bad << -1.5;
    Vec good(1);
    good << -0.5;
    CHECK_THROWS_AS(spectral_distortion(bad, good), NumericalError);
  }
}

TEST_CASE("measure_bitrate arithmetic") {
  // craft a stream file: 10-byte header with frame count 100, 1000 payload bytes
  const std::string path = testutil::temp_path("nvsc_bitrate_test.nvsc");
  {
    std::ofstream out(path, std::ios::binary);
    out.write("NVSC", 4);
    out.put(1);
    out.put(2);  // 8.0
    const uint32_t count = 100;
    out.write(reinterpret_cast<const char*>(&count), 4);
    std::vector<char> payload(1000, 0x5A);
    out.write(payload.data(), 1000);
  }
  CHECK(measure_bitrate(path) == doctest::Approx(8.0).epsilon(1e-12));

  // empty stream: header only, zero frames
  const std::string empty = testutil::temp_path("nvsc_bitrate_empty.nvsc");
  {
    std::ofstream out(empty, std::ios::binary);
    out.write("NVSC", 4);
    out.put(1);
    out.put(0);
    const uint32_t count = 0;
    out.write(reinterpret_cast<const char*>(&count), 4);
  }
  CHECK(measure_bitrate(empty) == 0.0);

  std::remove(path.c_str());
  std::remove(empty.c_str());
}

TEST_CASE("snr") {
  Rng rng(9);
  Vec ref(4000);
  for (int i = 0; i < 4000; ++i) ref[i] = 0.3 * rng.normal();

  SUBCASE("identical signals cap at 120 dB") {
    CHECK(snr(ref, ref) == 120.0);
  }

  SUBCASE("zero test signal gives 0 dB") {
    CHECK(snr(ref, Vec::Zero(4000)) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("noise at -20 dB gives 20 dB") {
    const double ref_rms = std::sqrt(ref.squaredNorm() / ref.size());
    Vec noise(4000);
    for (int i = 0; i < 4000; ++i) noise[i] = rng.normal();
    noise *= ref_rms * 0.1 / std::sqrt(noise.squaredNorm() / noise.size());
    CHECK(snr(ref, ref + noise) == doctest::Approx(20.0).epsilon(0.005));
  }

  SUBCASE("zero reference rejected") {
    CHECK_THROWS_AS(snr(Vec::Zero(100), Vec::Ones(100)), std::invalid_argument);
  }
}
