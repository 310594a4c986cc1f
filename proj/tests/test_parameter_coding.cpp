#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nvsc/codec.hpp"
#include "nvsc/parameter_coding.hpp"
#include "testutil.hpp"

using namespace nvsc;

TEST_CASE("operating point table") {
  CHECK(OperatingPoint::get(OpPointId::R8_0).lpc_order == 22);
  CHECK(OperatingPoint::get(OpPointId::R6_4).lpc_order == 16);
  CHECK(OperatingPoint::get(OpPointId::R5_6).lpc_order == 16);
  CHECK(OperatingPoint::get(OpPointId::R8_0).fixed_bits() == 29);
  CHECK(OperatingPoint::get(OpPointId::R6_4).fixed_bits() == 28);
  CHECK(OperatingPoint::get(OpPointId::R5_6).fixed_bits() == 28);
  // budget = nominal bits/frame minus the fixed fields
  CHECK(OperatingPoint::get(OpPointId::R8_0).lsp_bit_budget == 51.0);
  CHECK(OperatingPoint::get(OpPointId::R6_4).lsp_bit_budget == 36.0);
  CHECK(OperatingPoint::get(OpPointId::R5_6).lsp_bit_budget == 28.0);
  CHECK_THROWS_AS(OperatingPoint::parse("7.2"), FormatError);
}

TEST_CASE("pitch warp") {
  CHECK(warp_pitch(500.0) == doctest::Approx(250.0).epsilon(1e-12));
  CHECK(warp_pitch(0.0) == 0.0);
  CHECK(warp_pitch(100.0) == doctest::Approx(500.0 * 100.0 / 600.0).epsilon(1e-12));

  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double f0 = rng.uniform(0.0, 480.0);
    CHECK(unwarp_pitch(warp_pitch(f0)) == doctest::Approx(f0).epsilon(1e-9));
  }
  CHECK_THROWS_AS(unwarp_pitch(500.0), std::invalid_argument);
}

TEST_CASE("voicing warp") {
  Vec6 v = Vec6::Zero();
  CHECK(warp_voicing(v)[0] == 0.0);

  v.setConstant(0.5);
  CHECK(warp_voicing(v)[0] == doctest::Approx(std::log(0.5 / 1.5)).epsilon(1e-12));

  v.setConstant(1.0);
  const Vec6 w = warp_voicing(v);
  CHECK(std::isfinite(w[0]));
  CHECK(w[0] == doctest::Approx(std::log(1e-6 / (2.0 - 1e-6))).epsilon(1e-9));

  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    Vec6 x;
    for (int j = 0; j < 6; ++j) x[j] = rng.uniform(0.0, 1.0 - 1e-6);
    const Vec6 back = unwarp_voicing(warp_voicing(x));
    for (int j = 0; j < 6; ++j) CHECK(back[j] == doctest::Approx(x[j]).epsilon(1e-9));
  }
}

TEST_CASE("level coding") {
  const OperatingPoint& op9 = OperatingPoint::get(OpPointId::R8_0);  // 9-bit payload
  const OperatingPoint& op8 = OperatingPoint::get(OpPointId::R6_4);  // 8-bit payload

  SUBCASE("first frame is forced memoryless") {
    PredictiveCoderState state;
    const FieldCode code = level_encode(10.0, state, op9);
    CHECK(code.mode == 0);
  }

  SUBCASE("small variation goes predictive with 0.25 dB steps") {
    PredictiveCoderState enc, dec;
    level_decode(level_encode(20.0, enc, op9), dec, op9);
    // force the predictor to hold exactly 20.0 dB
    enc.prev_level_db = 20.0;
    dec.prev_level_db = 20.0;
    const FieldCode code = level_encode(20.07, enc, op9);
    CHECK(code.mode == 1);
    CHECK(level_decode(code, dec, op9) == doctest::Approx(20.0).epsilon(1e-12));
  }

  SUBCASE("silence saturates at the bottom memoryless cell") {
    PredictiveCoderState state;
    const FieldCode code = level_encode(-200.0, state, op9);
    CHECK(code.mode == 0);
    CHECK(code.payload == 0);
    PredictiveCoderState dec;
    CHECK(level_decode(code, dec, op9) == doctest::Approx(-70.0 + 102.6 / 512.0 / 2).epsilon(1e-12));
  }

  SUBCASE("memoryless cells cover [-70, 32.6] exactly") {
    const double step9 = 102.6 / 512.0;  // 0.2004 dB, the stated ~0.2
    const double step8 = 102.6 / 256.0;  // 0.4008 dB, the stated ~0.4
    PredictiveCoderState s1, s2;
    const FieldCode top9 = level_encode(1000.0, s1, op9);
    CHECK(top9.payload == 511);
    PredictiveCoderState d1;
    CHECK(level_decode(top9, d1, op9) == doctest::Approx(32.6 - step9 / 2).epsilon(1e-9));
    const FieldCode top8 = level_encode(1000.0, s2, op8);
    CHECK(top8.payload == 255);
    PredictiveCoderState d2;
    CHECK(level_decode(top8, d2, op8) == doctest::Approx(32.6 - step8 / 2).epsilon(1e-9));
  }
}

TEST_CASE("pitch coding") {
  const OperatingPoint& op = OperatingPoint::get(OpPointId::R6_4);
  const double wmin = warp_pitch(50.0), wmax = warp_pitch(400.0);
  const double coarse = (wmax - wmin) / 511.0;

  SUBCASE("unvoiced reserved symbol") {
    PredictiveCoderState enc, dec;
    const FieldCode code = pitch_encode(0.0, enc, op);
    CHECK(code.mode == 0);
    CHECK(code.payload == 0);
    CHECK(pitch_decode(code, dec, op) == 0.0);
  }

  SUBCASE("consecutive voiced frames go predictive") {
    PredictiveCoderState enc, dec;
    pitch_decode(pitch_encode(199.0, enc, op), dec, op);
    const FieldCode code = pitch_encode(200.0, enc, op);
    CHECK(code.mode == 1);
    const double decoded = pitch_decode(code, dec, op);
    CHECK(std::abs(warp_pitch(decoded) - warp_pitch(200.0)) <= coarse / 8.0 / 2.0 + 1e-12);
  }

  SUBCASE("first voiced frame is memoryless within half a coarse step") {
    PredictiveCoderState enc, dec;
    const FieldCode code = pitch_encode(400.0, enc, op);
    CHECK(code.mode == 0);
    const double decoded = pitch_decode(code, dec, op);
    CHECK(std::abs(warp_pitch(decoded) - wmax) <= coarse / 2.0 + 1e-12);
  }
}

TEST_CASE("level and pitch state synchrony over random sequences") {
  const OperatingPoint& op = OperatingPoint::get(OpPointId::R5_6);
  Rng rng(99);
  PredictiveCoderState enc, dec;
  bool was_voiced = false;
  for (int t = 0; t < 10000; ++t) {
    const double s_db = rng.uniform(-75.0, 35.0);
    double f0 = 0.0;
    if (rng.uniform() < (was_voiced ? 0.8 : 0.4)) {
      f0 = was_voiced ? std::clamp(unwarp_pitch(enc.prev_pitch_warped) + rng.uniform(-15.0, 15.0), 50.0, 400.0)
                      : rng.uniform(50.0, 400.0);
    }
    was_voiced = f0 > 0.0;

    const FieldCode lc = level_encode(s_db, enc, op);
    const FieldCode pc = pitch_encode(f0, enc, op);
    level_decode(lc, dec, op);
    pitch_decode(pc, dec, op);

    REQUIRE(enc.has_prev == dec.has_prev);
    REQUIRE(enc.prev_level_db == dec.prev_level_db);
    REQUIRE(enc.prev_voiced == dec.prev_voiced);
    REQUIRE(enc.prev_pitch_warped == dec.prev_pitch_warped);
  }
}

TEST_CASE("voicing VQ encode/decode") {
  VqCodebook cb;
  Rng rng(5);
  cb.codewords.resize(512, 6);
  for (int i = 0; i < 512; ++i)
    for (int j = 0; j < 6; ++j) cb.codewords(i, j) = -std::abs(rng.normal());

  SUBCASE("codeword fixed point") {
    const Vec6 v = voicing_decode(17, cb);
    CHECK(voicing_encode(v, cb) == 17);
    const Vec6 back = voicing_decode(voicing_encode(v, cb), cb);
    for (int j = 0; j < 6; ++j) CHECK(back[j] == doctest::Approx(v[j]).epsilon(1e-9));
  }

  SUBCASE("ties break to the lowest index") {
    cb.codewords.row(7) = cb.codewords.row(3);
    const Vec6 v = voicing_decode(3, cb);
    CHECK(voicing_encode(v, cb) == 3);
  }

  SUBCASE("decoded voicing is always within [0,1]") {
    for (int trial = 0; trial < 200; ++trial) {
      const Vec6 v = voicing_decode(static_cast<int>(rng.below(512)), cb);
      for (int j = 0; j < 6; ++j) {
        CHECK(v[j] >= 0.0);
        CHECK(v[j] <= 1.0);
      }
    }
  }
}

TEST_CASE("vq_train") {
  Rng rng(21);

  SUBCASE("512 distinct points fit exactly") {
    Mat data(5120, 6);
    // 512 distinct points, each repeated 10 times
    for (int i = 0; i < 512; ++i) {
      Vec6 p;
      for (int j = 0; j < 6; ++j) p[j] = rng.normal();
      for (int r = 0; r < 10; ++r) data.row(i * 10 + r) = p.transpose();
    }
    std::vector<double> trace;
    const VqCodebook cb = vq_train(data, 3, &trace);
    double final_dist = 0.0;
    for (int i = 0; i < data.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < 512; ++c)
        best = std::min(best, (data.row(i) - cb.codewords.row(c)).squaredNorm());
      final_dist += best;
    }
    CHECK(final_dist / data.rows() < 1e-18);
  }

  SUBCASE("distortion trace is non-increasing and codewords stay in the data box") {
    Mat data(6000, 6);
    for (int i = 0; i < 6000; ++i)
      for (int j = 0; j < 6; ++j) data(i, j) = rng.normal() - 1.0;
    std::vector<double> trace;
    const VqCodebook cb = vq_train(data, 4, &trace);
    for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
    for (int j = 0; j < 6; ++j) {
      CHECK(cb.codewords.col(j).minCoeff() >= data.col(j).minCoeff() - 1e-12);
      CHECK(cb.codewords.col(j).maxCoeff() <= data.col(j).maxCoeff() + 1e-12);
    }
    CHECK(cb.codewords.allFinite());
  }

  SUBCASE("insufficient data throws") {
    CHECK_THROWS_AS(vq_train(Mat::Zero(100, 6), 0), std::invalid_argument);
  }
}

TEST_CASE("gmm_train") {
  Rng rng(33);

  SUBCASE("recovers a single Gaussian") {
    const int n = 4000, d = 4;
    Mat data(n, d);
    const double true_mean = 0.7, true_sd = 0.2;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) data(i, j) = true_mean + true_sd * rng.normal();
    const GmmModel gmm = gmm_train(data, 1, 10, 5);
    const double stderr_mean = true_sd / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < d; ++j)
      CHECK(std::abs(gmm.means(0, j) - true_mean) < 3.0 * stderr_mean);
  }

  SUBCASE("log-likelihood trace is non-decreasing") {
    const int n = 3000, d = 3;
    Mat data(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) data(i, j) = (i % 2 ? 1.0 : -1.0) + 0.3 * rng.normal();
    std::vector<double> trace;
    gmm_train(data, 4, 25, 7, &trace);
    REQUIRE(trace.size() == 25);
    for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
  }

  SUBCASE("insufficient data throws") {
    CHECK_THROWS_AS(gmm_train(Mat::Zero(10, 4), 8, 5, 1), std::invalid_argument);
  }
}

TEST_CASE("lsp_quantize / lsp_dequantize") {
  const GmmModel gmm = testutil::toy_gmm(4, 16, 77);

  SUBCASE("component mean is a zero-distortion candidate") {
    const Vec lsp = gmm.means.row(1).transpose();
    const LspCode code = lsp_quantize(lsp, gmm, gmm.lambda);
    const double cost_at_mean =
        gmm.lambda * (-std::log2(gmm.weights[1]) -
                      [&] {
                        double bits = 0;
                        for (int j = 0; j < 16; ++j) bits += std::log2(lattice_cell_mass(gmm, 1, j, 0));
                        return bits;
                      }());
    const Vec recon_raw = gmm.means.row(code.component).transpose() +
                          (code.indices.cast<double>().array() *
                           gmm.steps.row(code.component).transpose().array()).matrix();
    const double chosen_cost = (lsp - recon_raw).squaredNorm() + gmm.lambda * lsp_code_rate_bits(code, gmm);
    CHECK(chosen_cost <= cost_at_mean + 1e-12);
  }

  SUBCASE("lambda = 0 matches exhaustive distortion search") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      Vec lsp = testutil::random_stable_lpc(rng, 16, 0.8);
      lsp = lpc_to_lsp(lsp);
      const LspCode code = lsp_quantize(lsp, gmm, 0.0);

      // oracle: brute force over components with rounded lattice points
      double best = std::numeric_limits<double>::infinity();
      int best_m = -1;
      for (int m = 0; m < gmm.components(); ++m) {
        double dist = 0.0;
        for (int j = 0; j < 16; ++j) {
          const double step = gmm.steps(m, j);
          const double idx = std::round((lsp[j] - gmm.means(m, j)) / step);
          const double recon = gmm.means(m, j) + idx * step;
          dist += (lsp[j] - recon) * (lsp[j] - recon);
        }
        if (dist < best) {
          best = dist;
          best_m = m;
        }
      }
      CHECK(code.component == best_m);
    }
  }

  SUBCASE("single component reduces to rounding (lsp - mean) / step") {
    GmmModel simple;
    simple.weights = Vec::Ones(1);
    simple.means = Mat::Zero(1, 16);
    for (int j = 0; j < 16; ++j) simple.means(0, j) = M_PI * (j + 1) / 17.0;
    simple.vars = Mat::Constant(1, 16, 1.0);
    simple.steps = Mat::Constant(1, 16, 0.05);
    Vec lsp = simple.means.row(0).transpose();
    lsp[4] += 0.12;  // rounds to +2
    lsp[7] -= 0.08;  // rounds to -2
    const LspCode code = lsp_quantize(lsp, simple, 0.0);
    for (int j = 0; j < 16; ++j)
      CHECK(code.indices[j] == std::lround((lsp[j] - simple.means(0, j)) / 0.05));
    CHECK(code.indices[4] == 2);
    CHECK(code.indices[7] == -2);
    CHECK(code.indices[0] == 0);
  }

  SUBCASE("unordered input is rejected") {
    Vec bad(16);
    for (int j = 0; j < 16; ++j) bad[j] = M_PI * (16 - j) / 17.0;
    CHECK_THROWS_WITH_AS(lsp_quantize(bad, gmm, 0.01), "invalid LSP vector", std::invalid_argument);
  }

  SUBCASE("larger lambda never increases the coded rate") {
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
      const Vec lsp = lpc_to_lsp(testutil::random_stable_lpc(rng, 16, 0.8));
      double prev_rate = std::numeric_limits<double>::infinity();
      for (double lambda : {0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
        const double rate = lsp_code_rate_bits(lsp_quantize(lsp, gmm, lambda), gmm);
        CHECK(rate <= prev_rate + 1e-9);
        prev_rate = rate;
      }
    }
  }

  SUBCASE("dequantized LSPs are ordered with the minimum separation") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
      const Vec lsp = lpc_to_lsp(testutil::random_stable_lpc(rng, 16, 0.9));
      const Vec recon = lsp_dequantize(lsp_quantize(lsp, gmm, gmm.lambda), gmm);
      CHECK(recon[0] >= kLspMinSeparation - 1e-12);
      CHECK(recon[15] <= M_PI - kLspMinSeparation + 1e-12);
      for (int j = 1; j < 16; ++j) CHECK(recon[j] - recon[j - 1] >= kLspMinSeparation - 1e-12);
      CHECK(lpc_is_stable(lsp_to_lpc(recon)));
    }
  }
}

TEST_CASE("step calibration hits the bit budget") {
  Rng rng(55);
  const int n = 3000;
  Mat data(n, 16);
  for (int i = 0; i < n; ++i) data.row(i) = lpc_to_lsp(testutil::random_stable_lpc(rng, 16, 0.85)).transpose();
  GmmModel gmm = gmm_train(data, 4, 15, 3);
  const double rate = calibrate_steps(gmm, data, 36.0);
  CHECK(rate == doctest::Approx(36.0).epsilon(0.05));

  // the realized rate measured independently over the data
  double bits = 0.0;
  for (int i = 0; i < n; ++i)
    bits += lsp_code_rate_bits(lsp_quantize(data.row(i).transpose(), gmm, gmm.lambda), gmm);
  CHECK(bits / n == doctest::Approx(36.0).epsilon(0.05));
}

TEST_CASE("quantize_frame round trip yields valid parameters") {
  const auto corpus = testutil::speech_corpus(404, 2, 35.0);
  CodebookTrainOptions options;
  options.ops = {OpPointId::R6_4};
  options.gmm_iters = 15;
  const CodebookSet books = train_codebooks(corpus, options);
  const OperatingPoint& op = OperatingPoint::get(OpPointId::R6_4);

  const AudioBuffer eval = testutil::speech_buffer(505, 3.0);
  const auto frames = analyze(eval, analysis_config_for(op));

  PredictiveCoderState enc, dec;
  for (const FrameParams& fp : frames) {
    const QuantizedFrame q = quantize_frame(fp, op, books, enc);
    CHECK(q.voicing_index >= 0);
    CHECK(q.voicing_index < 512);
    CHECK(q.level.payload >= 0);
    CHECK(q.level.payload < (1 << op.level_payload_bits));
    CHECK(q.pitch.payload >= 0);
    CHECK(q.pitch.payload < (1 << op.pitch_payload_bits));

    const FrameParams decoded = dequantize_frame(q, op, books, dec);
    CHECK(lpc_is_stable(decoded.lpc));
    CHECK(decoded.s >= 0.0);
    const bool pitch_ok = decoded.f0 == 0.0 || (decoded.f0 >= 50.0 - 1e-9 && decoded.f0 <= 400.0 + 1e-9);
    CHECK(pitch_ok);
    for (int j = 0; j < 6; ++j) {
      CHECK(decoded.voicing[j] >= 0.0);
      CHECK(decoded.voicing[j] <= 1.0);
    }
  }
}
