#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nvsc/codec.hpp"
#include "nvsc/conditioning.hpp"
#include "testutil.hpp"

using namespace nvsc;

namespace {

FrameParams sample_params(Rng& rng, int order) {
  FrameParams p;
  p.lpc = testutil::random_stable_lpc(rng, order, 0.8);
  p.s = rng.uniform(0.001, 0.3);
  p.f0 = rng.uniform() < 0.5 ? 0.0 : rng.uniform(50.0, 400.0);
  for (int j = 0; j < 6; ++j) p.voicing[j] = rng.uniform();
  return p;
}

}  // namespace

TEST_CASE("direct conditioning layout and dimensions") {
  Rng rng(1);
  const ConditioningScaler identity;

  SUBCASE("M=16 gives dimension 24, M=22 gives 30") {
    CHECK(build_conditioning(sample_params(rng, 16), identity).size() == 24);
    CHECK(build_conditioning(sample_params(rng, 22), identity).size() == 30);
  }

  SUBCASE("slot semantics") {
    const FrameParams p = sample_params(rng, 16);
    const Vec h = build_conditioning(p, identity);
    const Vec refl = lpc_to_reflection(p.lpc);
    CHECK((h.head(16) - refl).cwiseAbs().maxCoeff() == 0.0);
    CHECK(h[16] == p.f0);
    CHECK(h[17] == level_to_db(p.s));
    CHECK((h.tail(6) - p.voicing).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("standardization applies to the f0 and level slots only") {
    ConditioningScaler scaler{100.0, 50.0, -30.0, 10.0};
    const FrameParams p = sample_params(rng, 16);
    const Vec h = build_conditioning(p, scaler);
    CHECK(h[16] == doctest::Approx((p.f0 - 100.0) / 50.0).epsilon(1e-12));
    CHECK(h[17] == doctest::Approx((level_to_db(p.s) + 30.0) / 10.0).epsilon(1e-12));
    CHECK((h.tail(6) - p.voicing).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("zeroed parameters fill the layout with the scaled floor values") {
    FrameParams p;
    p.lpc = Vec::Zero(16);
    const Vec h = build_conditioning(p, identity);
    CHECK(h.head(16).cwiseAbs().maxCoeff() == 0.0);
    CHECK(h[16] == 0.0);
    CHECK(h[17] == level_to_db(0.0));  // dB floor of exact silence
    CHECK(h.tail(6).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("embedded conditioning") {
  Rng rng(2);
  const ConditioningScaler identity;
  const FrameParams p = sample_params(rng, 16);

  const Vec direct = build_conditioning(p, identity);
  const Vec embedded = embed_conditioning(p, identity);

  SUBCASE("dimension 30 with zeros in slots 16..21") {
    CHECK(embedded.size() == 30);
    CHECK(embedded.segment(16, 6).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("shared coordinates agree; dropping the padding reproduces direct-24") {
    CHECK((embedded.head(16) - direct.head(16)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((embedded.tail(8) - direct.tail(8)).cwiseAbs().maxCoeff() == 0.0);
    Vec dropped(24);
    dropped.head(16) = embedded.head(16);
    dropped.tail(8) = embedded.tail(8);
    CHECK((dropped - direct).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("M=22 input is rejected") {
    CHECK_THROWS_WITH_AS(embed_conditioning(sample_params(rng, 22), identity), "already high-rate",
                         std::invalid_argument);
  }
}

TEST_CASE("sample-to-frame association") {
  SUBCASE("hold rule") {
    const auto map2 = upsample_conditioning_sequence(2, 320);
    CHECK(map2[159] == 0);
    CHECK(map2[160] == 1);
  }
  SUBCASE("single frame") {
    const auto map1 = upsample_conditioning_sequence(1, 160);
    for (int i = 0; i < 160; ++i) CHECK(map1[i] == 0);
  }
  SUBCASE("empty") {
    CHECK(upsample_conditioning_sequence(0, 0).empty());
  }
  SUBCASE("length mismatch rejected") {
    CHECK_THROWS_AS(upsample_conditioning_sequence(2, 300), std::invalid_argument);
  }
}

TEST_CASE("conditioning is a function of decoded values only") {
  const auto corpus = testutil::speech_corpus(808, 2, 32.0);
  CodebookTrainOptions options;
  options.ops = {OpPointId::R6_4};
  options.gmm_iters = 10;
  const CodebookSet books = train_codebooks(corpus, options);
  const ConditioningScaler scaler = scaler_from(books);
  const OperatingPoint& op = OperatingPoint::get(OpPointId::R6_4);

  const AudioBuffer eval = testutil::speech_buffer(909, 2.0);
  const EncodeResult enc = encode_audio(eval, op, books);

  // decoder-side reconstruction from the serialized bitstream
  const std::vector<uint8_t> bytes = encode_stream(enc.frames, op, books);
  const auto [id, frames] = decode_stream(bytes, books);
  const std::vector<FrameParams> decoded = decode_frames(frames, op, books);

  REQUIRE(decoded.size() == enc.decoded_local.size());
  for (size_t t = 0; t < decoded.size(); ++t) {
    const Vec from_encoder = build_conditioning(enc.decoded_local[t], scaler);
    const Vec from_bitstream = build_conditioning(decoded[t], scaler);
    REQUIRE((from_encoder - from_bitstream).cwiseAbs().maxCoeff() == 0.0);
  }
}
