#include "nvsc/parameter_coding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nvsc/rng.hpp"

namespace nvsc {

namespace {

constexpr double kLevelMinDb = -70.0;
constexpr double kLevelMaxDb = 32.6;
constexpr double kLevelPredStepDb = 0.25;
constexpr double kPitchFineDivisor = 8.0;
constexpr double kTinyMass = 1e-12;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

}  // namespace

const OperatingPoint& OperatingPoint::get(OpPointId id) {
  static const OperatingPoint table[3] = {
      {OpPointId::R5_6, 5.6, 16, 8, 9, 9, 28.0},
      {OpPointId::R6_4, 6.4, 16, 8, 9, 9, 36.0},
      {OpPointId::R8_0, 8.0, 22, 9, 9, 9, 51.0},
  };
  return table[static_cast<int>(id)];
}

OpPointId OperatingPoint::parse(const std::string& name) {
  if (name == "5.6") return OpPointId::R5_6;
  if (name == "6.4") return OpPointId::R6_4;
  if (name == "8.0") return OpPointId::R8_0;
  throw FormatError("unknown operating point '" + name + "' (expected 5.6, 6.4 or 8.0)");
}

std::string op_point_name(OpPointId id) {
  switch (id) {
    case OpPointId::R5_6: return "5.6";
    case OpPointId::R6_4: return "6.4";
    case OpPointId::R8_0: return "8.0";
  }
  return "?";
}

// ---- warped domains ---------------------------------------------------------

double warp_pitch(double f0_hz) {
  if (f0_hz < 0.0) throw std::invalid_argument("negative pitch");
  return kPitchWarpC * f0_hz / (kPitchWarpC + f0_hz);
}

double unwarp_pitch(double warped) {
  if (warped >= kPitchWarpC) throw std::invalid_argument("warp out of range");
  if (warped < 0.0) throw std::invalid_argument("warp out of range");
  return kPitchWarpC * warped / (kPitchWarpC - warped);
}

Vec6 warp_voicing(const Vec6& v) {
  Vec6 out;
  for (int i = 0; i < kVoicingBands; ++i) {
    const double vi = std::clamp(v[i], 0.0, kVoicingClamp);
    out[i] = std::log((1.0 - vi) / (1.0 + vi));
  }
  return out;
}

Vec6 unwarp_voicing(const Vec6& w) {
  Vec6 out;
  for (int i = 0; i < kVoicingBands; ++i) {
    const double e = std::exp(w[i]);
    out[i] = std::clamp((1.0 - e) / (1.0 + e), 0.0, 1.0);
  }
  return out;
}

double level_to_db(double s_linear) { return 20.0 * std::log10(std::max(s_linear, 1e-9)); }

double level_from_db(double s_db) { return std::pow(10.0, s_db / 20.0); }

// ---- level coding -------------------------------------------------------------

namespace {

// Uniform over the full [-70, 32.6] dB range; 0.2004 dB/cell at 9 bits,
// 0.4008 at 8.
double level_mem_step(const OperatingPoint& op) {
  return (kLevelMaxDb - kLevelMinDb) / static_cast<double>(1 << op.level_payload_bits);
}

int level_mem_index(double s_db, const OperatingPoint& op) {
  const double step = level_mem_step(op);
  const int cells = 1 << op.level_payload_bits;
  const int idx = static_cast<int>(std::floor((s_db - kLevelMinDb) / step));
  return std::clamp(idx, 0, cells - 1);
}

double level_mem_recon(int idx, const OperatingPoint& op) {
  return kLevelMinDb + (idx + 0.5) * level_mem_step(op);
}

}  // namespace

FieldCode level_encode(double s_db, PredictiveCoderState& state, const OperatingPoint& op) {
  FieldCode code;
  const int half = 1 << (op.level_payload_bits - 1);
  double recon;
  long ridx = 0;
  const bool predictable =
      state.has_prev &&
      (ridx = std::lround((s_db - state.prev_level_db) / kLevelPredStepDb)) >= -half &&
      ridx <= half - 1;
  if (predictable) {
    code.mode = 1;
    code.payload = static_cast<int>(ridx) + half;
    recon = state.prev_level_db + ridx * kLevelPredStepDb;
  } else {
    code.mode = 0;
    code.payload = level_mem_index(s_db, op);
    recon = level_mem_recon(code.payload, op);
  }
  state.prev_level_db = recon;
  state.has_prev = true;
  return code;
}

double level_decode(const FieldCode& code, PredictiveCoderState& state, const OperatingPoint& op) {
  double recon;
  if (code.mode == 1) {
    const int half = 1 << (op.level_payload_bits - 1);
    recon = state.prev_level_db + (code.payload - half) * kLevelPredStepDb;
  } else {
    recon = level_mem_recon(code.payload, op);
  }
  state.prev_level_db = recon;
  state.has_prev = true;
  return recon;
}

// ---- pitch coding -------------------------------------------------------------

namespace {

struct PitchGrid {
  double wmin, wmax, coarse, fine;
  int cells;  // memoryless cells; payload 0 is the reserved unvoiced symbol
};

PitchGrid pitch_grid(const OperatingPoint& op) {
  PitchGrid g;
  g.wmin = warp_pitch(50.0);
  g.wmax = warp_pitch(400.0);
  g.cells = (1 << op.pitch_payload_bits) - 1;
  g.coarse = (g.wmax - g.wmin) / g.cells;
  g.fine = g.coarse / kPitchFineDivisor;
  return g;
}

}  // namespace

FieldCode pitch_encode(double f0_hz, PredictiveCoderState& state, const OperatingPoint& op) {
  const PitchGrid g = pitch_grid(op);
  FieldCode code;
  const bool voiced = f0_hz > 0.0;
  double recon_w = state.prev_pitch_warped;
  bool recon_voiced = false;

  if (!voiced) {
    code.mode = 0;
    code.payload = 0;
  } else {
    const double w = warp_pitch(f0_hz);
    const int half = 1 << (op.pitch_payload_bits - 1);
    long ridx = 0;
    const bool predictable =
        state.prev_voiced &&
        (ridx = std::lround((w - state.prev_pitch_warped) / g.fine)) >= -half && ridx <= half - 1;
    if (predictable) {
      code.mode = 1;
      code.payload = static_cast<int>(ridx) + half;
      recon_w = state.prev_pitch_warped + ridx * g.fine;
    } else {
      code.mode = 0;
      const int cell = std::clamp(static_cast<int>(std::floor((w - g.wmin) / g.coarse)), 0, g.cells - 1);
      code.payload = cell + 1;
      recon_w = g.wmin + (cell + 0.5) * g.coarse;
    }
    recon_voiced = true;
  }

  if (recon_voiced) state.prev_pitch_warped = recon_w;
  state.prev_voiced = recon_voiced;
  return code;
}

double pitch_decode(const FieldCode& code, PredictiveCoderState& state, const OperatingPoint& op) {
  const PitchGrid g = pitch_grid(op);
  double f0 = 0.0;
  if (code.mode == 1) {
    const int half = 1 << (op.pitch_payload_bits - 1);
    const double w = state.prev_pitch_warped + (code.payload - half) * g.fine;
    state.prev_pitch_warped = w;
    state.prev_voiced = true;
    f0 = unwarp_pitch(w);
  } else if (code.payload == 0) {
    state.prev_voiced = false;
  } else {
    const double w = g.wmin + (code.payload - 1 + 0.5) * g.coarse;
    state.prev_pitch_warped = w;
    state.prev_voiced = true;
    f0 = unwarp_pitch(w);
  }
  return f0;
}

// ---- voicing VQ ----------------------------------------------------------------

int voicing_encode(const Vec6& v, const VqCodebook& cb) {
  const Vec6 w = warp_voicing(v);
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cb.codewords.rows(); ++i) {
    const double dist = (cb.codewords.row(i).transpose() - w).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Vec6 voicing_decode(int index, const VqCodebook& cb) {
  if (index < 0 || index >= cb.codewords.rows()) throw std::invalid_argument("VQ index out of range");
  return unwarp_voicing(cb.codewords.row(index).transpose());
}

VqCodebook vq_train(const Mat& warped, uint64_t seed, std::vector<double>* distortion_trace) {
  constexpr int kCodewords = 512;
  const Eigen::Index n = warped.rows();
  const Eigen::Index d = warped.cols();
  if (n < 10 * kCodewords) throw std::invalid_argument("insufficient data for VQ training");

  Rng rng(derive_seed(seed, "vq-train"));
  Mat centroids = warped.colwise().mean();

  std::vector<int> assign(n, 0);
  std::vector<double> dists(n, 0.0);

  auto assignment_pass = [&]() {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double dist = (warped.row(i) - centroids.row(c)).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = static_cast<int>(c);
        }
      }
      assign[i] = best;
      dists[i] = best_dist;
      total += best_dist;
    }
    return total / static_cast<double>(n);
  };

  auto update_pass = [&]() {
    const Eigen::Index k = centroids.rows();
    Mat sums = Mat::Zero(k, d);
    std::vector<long> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += warped.row(i);
      ++counts[assign[i]];
    }
    for (Eigen::Index c = 0; c < k; ++c)
      if (counts[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);

    // re-seed empty cells from the farthest point of the largest cell
    while (true) {
      int empty = -1;
      for (Eigen::Index c = 0; c < k; ++c)
        if (counts[c] == 0) {
          empty = static_cast<int>(c);
          break;
        }
      if (empty < 0) break;
      int donor = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      if (counts[donor] <= 1) break;
      Eigen::Index far_idx = -1;
      double far_dist = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (assign[i] != donor) continue;
        const double dist = (warped.row(i) - centroids.row(donor)).squaredNorm();
        if (dist > far_dist) {
          far_dist = dist;
          far_idx = i;
        }
      }
      centroids.row(empty) = warped.row(far_idx);
      assign[far_idx] = empty;
      counts[empty] = 1;
      --counts[donor];
    }
  };

  auto record = [&](double dist) {
    if (distortion_trace) distortion_trace->push_back(dist);
  };

  record(assignment_pass());

  while (centroids.rows() < kCodewords) {
    // binary split: keep each centroid, add a copy nudged toward the farthest
    // member so both children stay inside the data hull
    const Eigen::Index k = centroids.rows();
    const Eigen::Index next = std::min<Eigen::Index>(2 * k, kCodewords);
    Mat split(next, d);
    split.topRows(k) = centroids;
    for (Eigen::Index c = 0; c < next - k; ++c) {
      Eigen::Index far_idx = -1;
      double far_dist = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        const double dist = (warped.row(i) - centroids.row(c)).squaredNorm();
        if (dist > far_dist) {
          far_dist = dist;
          far_idx = i;
        }
      }
      if (far_idx >= 0 && far_dist > 0.0) {
        split.row(k + c) = 0.99 * centroids.row(c) + 0.01 * warped.row(far_idx);
      } else {
        // degenerate cell: fall back to a seeded pick
        split.row(k + c) = warped.row(static_cast<Eigen::Index>(rng.below(n)));
      }
    }
    centroids = split;

    for (int it = 0; it < 8; ++it) {
      record(assignment_pass());
      update_pass();
    }
  }

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double dist = assignment_pass();
    record(dist);
    bool any_empty = false;
    {
      std::vector<bool> used(centroids.rows(), false);
      for (Eigen::Index i = 0; i < n; ++i) used[assign[i]] = true;
      any_empty = std::find(used.begin(), used.end(), false) != used.end();
    }
    if (!any_empty && dist >= prev - 1e-15 * std::max(1.0, prev)) break;
    prev = dist;
    update_pass();
  }

  VqCodebook cb;
  cb.codewords = centroids;
  return cb;
}

// ---- GMM / lattice LSP coding ---------------------------------------------------

GmmModel gmm_train(const Mat& data, int n_components, int n_iters, uint64_t seed,
                   std::vector<double>* loglik_trace) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 10l * n_components * d) throw std::invalid_argument("insufficient data for GMM training");

  Rng rng(derive_seed(seed, "gmm-train"));

  // k-means++ seeding
  Mat means(n_components, d);
  means.row(0) = data.row(static_cast<Eigen::Index>(rng.below(n)));
  Vec min_dist = (data.rowwise() - means.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < n_components; ++c) {
    const double total = min_dist.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= min_dist[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(n));
    }
    means.row(c) = data.row(pick);
    min_dist = min_dist.cwiseMin((data.rowwise() - means.row(c)).rowwise().squaredNorm());
  }

  const Vec global_mean = data.colwise().mean().transpose();
  Vec global_var(d);
  for (Eigen::Index j = 0; j < d; ++j)
    global_var[j] = (data.col(j).array() - global_mean[j]).square().mean();
  const Vec var_floor = (1e-6 * global_var.array() + 1e-12).matrix();

  GmmModel gmm;
  gmm.weights = Vec::Constant(n_components, 1.0 / n_components);
  gmm.means = means;
  gmm.vars = global_var.transpose().replicate(n_components, 1).cwiseMax(var_floor.transpose().replicate(n_components, 1));
  gmm.steps = gmm.vars.cwiseSqrt();

  Mat log_resp(n, n_components);
  for (int iter = 0; iter < n_iters; ++iter) {
    // E step
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double max_term = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < n_components; ++c) {
        double log_p = std::log(gmm.weights[c]);
        for (Eigen::Index j = 0; j < d; ++j) {
          const double diff = data(i, j) - gmm.means(c, j);
          log_p += -0.5 * (std::log(2.0 * M_PI * gmm.vars(c, j)) + diff * diff / gmm.vars(c, j));
        }
        log_resp(i, c) = log_p;
        max_term = std::max(max_term, log_p);
      }
      double sum = 0.0;
      for (int c = 0; c < n_components; ++c) sum += std::exp(log_resp(i, c) - max_term);
      const double log_sum = max_term + std::log(sum);
      loglik += log_sum;
      for (int c = 0; c < n_components; ++c)
        log_resp(i, c) = std::exp(log_resp(i, c) - log_sum);
    }
    if (loglik_trace) loglik_trace->push_back(loglik / static_cast<double>(n));

    // M step (log_resp now holds plain responsibilities)
    for (int c = 0; c < n_components; ++c) {
      const double resp_sum = log_resp.col(c).sum();
      gmm.weights[c] = std::max(resp_sum / static_cast<double>(n), 1e-8);
      if (resp_sum > 0.0) {
        for (Eigen::Index j = 0; j < d; ++j) {
          const double mean = (log_resp.col(c).array() * data.col(j).array()).sum() / resp_sum;
          const double var =
              (log_resp.col(c).array() * (data.col(j).array() - mean).square()).sum() / resp_sum;
          gmm.means(c, j) = mean;
          gmm.vars(c, j) = std::max(var, var_floor[j]);
        }
      }
    }
    gmm.weights /= gmm.weights.sum();
  }

  gmm.steps = gmm.vars.cwiseSqrt();
  return gmm;
}

double lattice_cell_mass(const GmmModel& gmm, int component, int dim, long index) {
  const double step = gmm.steps(component, dim);
  const double sigma = std::sqrt(gmm.vars(component, dim));
  const double center = index * step;
  const double hi = normal_cdf((center + 0.5 * step) / sigma);
  const double lo = normal_cdf((center - 0.5 * step) / sigma);
  return std::max(hi - lo, kTinyMass);
}

double lsp_code_rate_bits(const LspCode& code, const GmmModel& gmm) {
  double bits = -std::log2(gmm.weights[code.component]);
  for (int j = 0; j < gmm.dim(); ++j)
    bits += -std::log2(lattice_cell_mass(gmm, code.component, j, code.indices[j]));
  return bits;
}

LspCode lsp_quantize(const Vec& lsp, const GmmModel& gmm, double lambda) {
  if (lsp.size() != gmm.dim()) throw std::invalid_argument("invalid LSP vector");
  for (Eigen::Index i = 0; i < lsp.size(); ++i) {
    const bool ok = lsp[i] > 0.0 && lsp[i] < M_PI && (i == 0 || lsp[i] > lsp[i - 1]);
    if (!ok) throw std::invalid_argument("invalid LSP vector");
  }

  LspCode best;
  double best_cost = std::numeric_limits<double>::infinity();
  VecI indices(gmm.dim());
  for (int m = 0; m < gmm.components(); ++m) {
    double dist = 0.0;
    double rate = -std::log2(gmm.weights[m]);
    for (int j = 0; j < gmm.dim(); ++j) {
      const double step = gmm.steps(m, j);
      const long idx = std::lround((lsp[j] - gmm.means(m, j)) / step);
      indices[j] = static_cast<int>(idx);
      const double recon = gmm.means(m, j) + idx * step;
      dist += (lsp[j] - recon) * (lsp[j] - recon);
      rate += -std::log2(lattice_cell_mass(gmm, m, j, idx));
    }
    const double cost = dist + lambda * rate;
    if (cost < best_cost) {
      best_cost = cost;
      best.component = m;
      best.indices = indices;
    }
  }
  return best;
}

Vec enforce_lsp_ordering(Vec lsp) {
  std::sort(lsp.data(), lsp.data() + lsp.size());
  const double d = kLspMinSeparation;
  lsp[0] = std::max(lsp[0], d);
  for (Eigen::Index i = 1; i < lsp.size(); ++i) lsp[i] = std::max(lsp[i], lsp[i - 1] + d);
  lsp[lsp.size() - 1] = std::min(lsp[lsp.size() - 1], M_PI - d);
  for (Eigen::Index i = lsp.size() - 2; i >= 0; --i) lsp[i] = std::min(lsp[i], lsp[i + 1] - d);
  return lsp;
}

Vec lsp_dequantize(const LspCode& code, const GmmModel& gmm) {
  Vec recon(gmm.dim());
  for (int j = 0; j < gmm.dim(); ++j)
    recon[j] = gmm.means(code.component, j) + static_cast<double>(code.indices[j]) * gmm.steps(code.component, j);
  return enforce_lsp_ordering(std::move(recon));
}

double calibrate_steps(GmmModel& gmm, const Mat& data, double bit_budget) {
  const Eigen::Index max_rows = 4000;
  const Eigen::Index stride = std::max<Eigen::Index>(1, data.rows() / max_rows);

  Mat sigma = gmm.vars.cwiseSqrt();
  auto measure = [&](double scale) {
    gmm.steps = scale * sigma;
    gmm.lambda = std::log(2.0) / 6.0 * gmm.steps.array().square().mean();
    double bits = 0.0;
    long count = 0;
    for (Eigen::Index i = 0; i < data.rows(); i += stride) {
      const LspCode code = lsp_quantize(data.row(i).transpose(), gmm, gmm.lambda);
      bits += lsp_code_rate_bits(code, gmm);
      ++count;
    }
    return bits / static_cast<double>(count);
  };

  double lo = 1e-3, hi = 50.0;  // rate(lo) >> budget, rate(hi) << budget
  double rate = 0.0;
  for (int it = 0; it < 36; ++it) {
    const double mid = std::sqrt(lo * hi);
    rate = measure(mid);
    if (rate > bit_budget)
      lo = mid;
    else
      hi = mid;
    if (std::abs(rate - bit_budget) < 0.01 * bit_budget) break;
  }
  return rate;
}

// ---- per-frame quantization ------------------------------------------------------

const GmmModel& CodebookSet::gmm_for(OpPointId id) const {
  if (!has_gmm[static_cast<int>(id)])
    throw FormatError("codebook file has no GMM for operating point " + op_point_name(id));
  return gmm[static_cast<int>(id)];
}

QuantizedFrame quantize_frame(const FrameParams& params, const OperatingPoint& op,
                              const CodebookSet& books, PredictiveCoderState& state) {
  if (!books.has_vq) throw FormatError("codebook file has no voicing VQ");
  const GmmModel& gmm = books.gmm_for(op.id);
  if (static_cast<int>(params.lpc.size()) != op.lpc_order)
    throw std::invalid_argument("LPC order does not match the operating point");

  QuantizedFrame q;
  q.lsp = lsp_quantize(lpc_to_lsp(params.lpc), gmm, gmm.lambda);
  q.level = level_encode(level_to_db(params.s), state, op);
  q.pitch = pitch_encode(params.f0, state, op);
  q.voicing_index = voicing_encode(params.voicing, books.vq);
  return q;
}

FrameParams dequantize_frame(const QuantizedFrame& q, const OperatingPoint& op,
                             const CodebookSet& books, PredictiveCoderState& state) {
  if (!books.has_vq) throw FormatError("codebook file has no voicing VQ");
  const GmmModel& gmm = books.gmm_for(op.id);

  FrameParams params;
  params.lpc = lsp_to_lpc(lsp_dequantize(q.lsp, gmm));
  params.s = level_from_db(level_decode(q.level, state, op));
  params.f0 = pitch_decode(q.pitch, state, op);
  params.voicing = voicing_decode(q.voicing_index, books.vq);
  return params;
}

}  // namespace nvsc
