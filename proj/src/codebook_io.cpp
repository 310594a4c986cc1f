#include "nvsc/codebook_io.hpp"

#include "nvsc/container.hpp"

namespace nvsc {

namespace {

void put_matrix(ByteWriter& w, const Mat& m) {
  w.put_u32(static_cast<uint32_t>(m.rows()));
  w.put_u32(static_cast<uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.put_f64(m(i, j));
}

Mat get_matrix(ByteReader& r) {
  const uint32_t rows = r.get_u32();
  const uint32_t cols = r.get_u32();
  Mat m(rows, cols);
  for (uint32_t i = 0; i < rows; ++i)
    for (uint32_t j = 0; j < cols; ++j) m(i, j) = r.get_f64();
  return m;
}

}  // namespace

void write_codebooks(const CodebookSet& books, const std::string& path) {
  Container c;
  for (int id = 0; id < 3; ++id) {
    if (!books.has_gmm[id]) continue;
    const GmmModel& gmm = books.gmm[id];
    ByteWriter w;
    w.put_u32(static_cast<uint32_t>(gmm.components()));
    w.put_u32(static_cast<uint32_t>(gmm.dim()));
    for (int m = 0; m < gmm.components(); ++m) w.put_f64(gmm.weights[m]);
    put_matrix(w, gmm.means);
    put_matrix(w, gmm.vars);
    put_matrix(w, gmm.steps);
    w.put_f64(gmm.lambda);
    c.set("gmm." + op_point_name(static_cast<OpPointId>(id)), w.take());
  }
  if (books.has_vq) {
    ByteWriter w;
    put_matrix(w, books.vq.codewords);
    c.set("vq.voicing", w.take());
  }
  {
    ByteWriter w;
    w.put_f64(books.f0_mean);
    w.put_f64(books.f0_std);
    w.put_f64(books.s_db_mean);
    w.put_f64(books.s_db_std);
    c.set("cond.standardization", w.take());
  }
  c.write(path, kCodebookMagic, kCodebookVersion);
}

CodebookSet read_codebooks(const std::string& path) {
  const Container c = Container::read(path, kCodebookMagic, kCodebookVersion);
  CodebookSet books;
  for (int id = 0; id < 3; ++id) {
    const std::string name = "gmm." + op_point_name(static_cast<OpPointId>(id));
    if (!c.has(name)) continue;
    ByteReader r(c.get(name));
    GmmModel gmm;
    const uint32_t n = r.get_u32();
    const uint32_t d = r.get_u32();
    (void)d;
    gmm.weights.resize(n);
    for (uint32_t m = 0; m < n; ++m) gmm.weights[m] = r.get_f64();
    gmm.means = get_matrix(r);
    gmm.vars = get_matrix(r);
    gmm.steps = get_matrix(r);
    gmm.lambda = r.get_f64();
    books.gmm[id] = std::move(gmm);
    books.has_gmm[id] = true;
  }
  if (c.has("vq.voicing")) {
    ByteReader r(c.get("vq.voicing"));
    books.vq.codewords = get_matrix(r);
    books.has_vq = true;
  }
  {
    ByteReader r(c.get("cond.standardization"));
    books.f0_mean = r.get_f64();
    books.f0_std = r.get_f64();
    books.s_db_mean = r.get_f64();
    books.s_db_std = r.get_f64();
  }
  return books;
}

}  // namespace nvsc
