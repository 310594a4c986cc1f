#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "nvsc/bitstream.hpp"
#include "nvsc/container.hpp"
#include "testutil.hpp"

using namespace nvsc;

namespace {

CodebookSet toy_books(int order) {
  CodebookSet books;
  const int id = order == 22 ? 2 : 1;
  books.gmm[id] = testutil::toy_gmm(4, order, 123);
  books.has_gmm[id] = true;
  books.vq.codewords.setZero(512, 6);
  Rng rng(9);
  for (int i = 0; i < 512; ++i)
    for (int j = 0; j < 6; ++j) books.vq.codewords(i, j) = -std::abs(rng.normal());
  books.has_vq = true;
  return books;
}

QuantizedFrame random_frame(Rng& rng, const OperatingPoint& op, const GmmModel& gmm) {
  QuantizedFrame q;
  q.level.mode = static_cast<int>(rng.below(2));
  q.level.payload = static_cast<int>(rng.below(1u << op.level_payload_bits));
  q.pitch.mode = static_cast<int>(rng.below(2));
  q.pitch.payload = static_cast<int>(rng.below(1u << op.pitch_payload_bits));
  q.voicing_index = static_cast<int>(rng.below(512));
  q.lsp.component = static_cast<int>(rng.below(gmm.components()));
  q.lsp.indices.resize(gmm.dim());
  for (int j = 0; j < gmm.dim(); ++j) {
    // mostly small offsets, occasional escapes
    if (rng.uniform() < 0.02)
      q.lsp.indices[j] = static_cast<int>(rng.below(60000)) - 30000;
    else
      q.lsp.indices[j] = static_cast<int>(rng.below(129)) - 64;
  }
  return q;
}

}  // namespace

TEST_CASE("range coder roundtrip on random tables") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int alphabet = 2 + static_cast<int>(rng.below(300));
    std::vector<double> p(alphabet);
    double sum = 0.0;
    for (double& x : p) sum += (x = rng.uniform(0.001, 1.0));
    for (double& x : p) x /= sum;
    const SymbolTable table = SymbolTable::from_probabilities(p);

    const int n = 200 + static_cast<int>(rng.below(2000));
    std::vector<int> symbols(n);
    for (int& s : symbols) s = static_cast<int>(rng.below(alphabet));

    RangeEncoder enc;
    for (int s : symbols) table.encode_symbol(enc, s);
    const std::vector<uint8_t> bytes = enc.finish();

    RangeDecoder dec(bytes.data(), bytes.size());
    for (int i = 0; i < n; ++i) REQUIRE(table.decode_symbol(dec) == symbols[i]);
    CHECK_FALSE(dec.exhausted());
  }
}

TEST_CASE("empty sequence produces a header-only payload") {
  RangeEncoder enc;
  const std::vector<uint8_t> bytes = enc.finish();
  CHECK(bytes.size() == 4);  // flush only
  RangeDecoder dec(bytes.data(), bytes.size());
  CHECK_FALSE(dec.exhausted());
}

TEST_CASE("coded size stays within 2% + 4 bytes of the entropy") {
  Rng rng(5);

  SUBCASE("uniform 256-ary source: one byte per symbol") {
    std::vector<double> p(256, 1.0 / 256.0);
    const SymbolTable table = SymbolTable::from_probabilities(p);
    const int n = 10000;
    RangeEncoder enc;
    for (int i = 0; i < n; ++i) {
      const int s = static_cast<int>(rng.below(256));
      table.encode_symbol(enc, s);
    }
    const double bytes = static_cast<double>(enc.finish().size());
    CHECK(bytes <= 10000.0 * 1.02 + 4.0);
  }

  SUBCASE("skewed iid source vs Shannon information content") {
    std::vector<double> p = {0.5, 0.25, 0.125, 0.0625, 0.0625};
    const SymbolTable table = SymbolTable::from_probabilities(p);
    const int n = 50000;
    double info_bits = 0.0;
    RangeEncoder enc;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      int s = 0;
      double acc = p[0];
      while (u >= acc && s + 1 < static_cast<int>(p.size())) acc += p[++s];
      info_bits += -std::log2(p[s]);
      table.encode_symbol(enc, s);
    }
    const double bytes = static_cast<double>(enc.finish().size());
    CHECK(bytes <= info_bits / 8.0 * 1.02 + 4.0);
  }

  SUBCASE("raw bits cost their width") {
    RangeEncoder enc;
    Rng bits_rng(3);
    const int n = 20000;
    for (int i = 0; i < n; ++i) enc.put_bits(static_cast<uint32_t>(bits_rng.below(512)), 9);
    const double bytes = static_cast<double>(enc.finish().size());
    CHECK(bytes <= n * 9.0 / 8.0 * 1.02 + 4.0);
  }
}

TEST_CASE("pack/unpack frame roundtrip identity on 10^4 random frames") {
  for (OpPointId id : {OpPointId::R6_4, OpPointId::R8_0}) {
    const OperatingPoint& op = OperatingPoint::get(id);
    const CodebookSet books = toy_books(op.lpc_order);
    const GmmModel& gmm = books.gmm_for(id);
    const LspSymbolTables tables = LspSymbolTables::build(gmm);

    Rng rng(31 + static_cast<int>(id));
    std::vector<QuantizedFrame> frames;
    for (int i = 0; i < 10000; ++i) frames.push_back(random_frame(rng, op, gmm));

    RangeEncoder enc;
    for (const QuantizedFrame& q : frames) pack_frame(q, op, tables, enc);
    const std::vector<uint8_t> bytes = enc.finish();

    RangeDecoder dec(bytes.data(), bytes.size());
    for (const QuantizedFrame& q : frames) {
      const QuantizedFrame u = unpack_frame(op, tables, dec);
      REQUIRE(u.level.mode == q.level.mode);
      REQUIRE(u.level.payload == q.level.payload);
      REQUIRE(u.pitch.mode == q.pitch.mode);
      REQUIRE(u.pitch.payload == q.pitch.payload);
      REQUIRE(u.voicing_index == q.voicing_index);
      REQUIRE(u.lsp.component == q.lsp.component);
      REQUIRE((u.lsp.indices - q.lsp.indices).cwiseAbs().maxCoeff() == 0);
    }
    CHECK_FALSE(dec.exhausted());
  }
}

TEST_CASE("payload exceeding a field width fails at pack time") {
  const OperatingPoint& op = OperatingPoint::get(OpPointId::R6_4);
  const CodebookSet books = toy_books(16);
  const LspSymbolTables tables = LspSymbolTables::build(books.gmm_for(OpPointId::R6_4));
  Rng rng(1);
  QuantizedFrame q = random_frame(rng, op, books.gmm_for(OpPointId::R6_4));
  q.level.payload = 1 << op.level_payload_bits;  // one past the width
  RangeEncoder enc;
  CHECK_THROWS_AS(pack_frame(q, op, tables, enc), std::invalid_argument);
}

TEST_CASE("stream write/read") {
  const OperatingPoint& op = OperatingPoint::get(OpPointId::R6_4);
  const CodebookSet books = toy_books(16);
  const GmmModel& gmm = books.gmm_for(OpPointId::R6_4);
  Rng rng(17);
  std::vector<QuantizedFrame> frames;
  for (int i = 0; i < 300; ++i) frames.push_back(random_frame(rng, op, gmm));

  const std::string path = testutil::temp_path("nvsc_stream_test.nvsc");
  write_stream(frames, op, books, path);

  SUBCASE("roundtrip identity") {
    const auto [id, back] = read_stream(path, books);
    CHECK(id == OpPointId::R6_4);
    REQUIRE(back.size() == frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
      REQUIRE(back[i].voicing_index == frames[i].voicing_index);
      REQUIRE(back[i].lsp.component == frames[i].lsp.component);
      REQUIRE((back[i].lsp.indices - frames[i].lsp.indices).cwiseAbs().maxCoeff() == 0);
    }
  }

  SUBCASE("deterministic bytes") {
    const std::vector<uint8_t> a = encode_stream(frames, op, books);
    const std::vector<uint8_t> b = encode_stream(frames, op, books);
    CHECK(a == b);
  }

  SUBCASE("truncation is detected") {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string cut = testutil::temp_path("nvsc_stream_cut.nvsc");
    std::ofstream out(cut, std::ios::binary);
    out.write(raw.data(), static_cast<std::streamsize>(raw.size() / 2));
    out.close();
    CHECK_THROWS_AS(read_stream(cut, books), FormatError);
  }

  SUBCASE("bad magic is rejected") {
    const std::string bad = testutil::temp_path("nvsc_stream_bad.nvsc");
    std::ofstream out(bad, std::ios::binary);
    out.write("JUNKJUNKJUNKJUNK", 16);
    out.close();
    CHECK_THROWS_AS(read_stream(bad, books), FormatError);
  }

  std::remove(path.c_str());
}

TEST_CASE("golden bytes: serialization is platform independent") {
  // Handcrafted single-component codebook and three fixed frames; the bytes
  // below were frozen from a verified run and must never change.
  CodebookSet books;
  GmmModel gmm;
  gmm.weights = Vec::Ones(1);
  gmm.means.setZero(1, 16);
  for (int j = 0; j < 16; ++j) gmm.means(0, j) = M_PI * (j + 1) / 17.0;
  gmm.vars = Mat::Constant(1, 16, 0.0025);
  gmm.steps = Mat::Constant(1, 16, 0.02);
  gmm.lambda = 0.01;
  books.gmm[1] = gmm;
  books.has_gmm[1] = true;
  books.vq.codewords.setZero(512, 6);
  books.has_vq = true;

  const OperatingPoint& op = OperatingPoint::get(OpPointId::R6_4);
  std::vector<QuantizedFrame> frames(3);
  for (int t = 0; t < 3; ++t) {
    QuantizedFrame& q = frames[t];
    q.level = {t == 0 ? 0 : 1, 100 + t};
    q.pitch = {0, 7 * t};
    q.voicing_index = 500 - t;
    q.lsp.component = 0;
    q.lsp.indices.setConstant(16, t - 1);
    q.lsp.indices[15] = t == 2 ? 90 : 0;  // escape path on the last frame
  }
  const std::vector<uint8_t> bytes = encode_stream(frames, op, books);

  char hex[4096];
  size_t pos = 0;
  for (uint8_t b : bytes) pos += static_cast<size_t>(snprintf(hex + pos, sizeof(hex) - pos, "%02x", b));
  const std::string got(hex, pos);

  const std::string frozen =
      "4e56534301010300000031fffffdb8150348daf33a1a43b6ca751c25522124563187e99e85550fe03bc96e"
      "0000";
  CHECK(got == frozen);

  // and it still decodes to the same frames
  const auto [id, back] = decode_stream(bytes, books);
  CHECK(id == OpPointId::R6_4);
  REQUIRE(back.size() == 3);
  CHECK(back[2].lsp.indices[15] == 90);
  CHECK(back[1].level.payload == 101);
}

TEST_CASE("container checksum detects corruption") {
  Container c;
  c.set("alpha", {1, 2, 3, 4});
  const std::string path = testutil::temp_path("nvsc_container_test.bin");
  const char magic[4] = {'T', 'E', 'S', 'T'};
  c.write(path, magic, 1);

  Container back = Container::read(path, magic, 1);
  CHECK(back.get("alpha") == std::vector<uint8_t>({1, 2, 3, 4}));

  // flip one payload byte
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(12);
  f.put(static_cast<char>(0xFF));
  f.close();
  CHECK_THROWS_AS(Container::read(path, magic, 1), FormatError);
  std::remove(path.c_str());
}
