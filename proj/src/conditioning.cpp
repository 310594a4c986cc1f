#include "nvsc/conditioning.hpp"

#include <cmath>

namespace nvsc {

ConditioningScaler scaler_from(const CodebookSet& books) {
  ConditioningScaler s;
  s.f0_mean = books.f0_mean;
  s.f0_std = books.f0_std;
  s.s_db_mean = books.s_db_mean;
  s.s_db_std = books.s_db_std;
  return s;
}

namespace {

void fill_tail(Vec& h, int base, const FrameParams& p, const ConditioningScaler& scaler) {
  h[base] = scaler.scale_f0(p.f0);
  h[base + 1] = scaler.scale_s_db(level_to_db(p.s));
  h.segment(base + 2, kVoicingBands) = p.voicing;
}

}  // namespace

Vec build_conditioning(const FrameParams& decoded, const ConditioningScaler& scaler) {
  const int order = static_cast<int>(decoded.lpc.size());
  const Vec refl = lpc_to_reflection(decoded.lpc);
  Vec h(order + 8);
  h.head(order) = refl;
  fill_tail(h, order, decoded, scaler);
  if (!h.allFinite()) throw std::invalid_argument("non-finite conditioning input");
  return h;
}

Vec embed_conditioning(const FrameParams& decoded_m16, const ConditioningScaler& scaler) {
  if (decoded_m16.lpc.size() != 16) throw std::invalid_argument("already high-rate");
  const Vec refl = lpc_to_reflection(decoded_m16.lpc);
  Vec h = Vec::Zero(30);
  h.head(16) = refl;
  // slots 16..21 stay zero (the padded reflection block)
  fill_tail(h, 22, decoded_m16, scaler);
  if (!h.allFinite()) throw std::invalid_argument("non-finite conditioning input");
  return h;
}

std::vector<int> upsample_conditioning_sequence(int n_frames, long total_samples) {
  if (total_samples != static_cast<long>(n_frames) * kFrameLength)
    throw std::invalid_argument("conditioning/sample length mismatch");
  std::vector<int> frame_of(total_samples);
  for (long i = 0; i < total_samples; ++i) frame_of[i] = static_cast<int>(i / kFrameLength);
  return frame_of;
}

Mat conditioning_matrix(const std::vector<FrameParams>& decoded, const ConditioningScaler& scaler,
                        int target_dim) {
  Mat h(target_dim, decoded.size());
  for (size_t t = 0; t < decoded.size(); ++t) {
    const int order = static_cast<int>(decoded[t].lpc.size());
    Vec col;
    if (order + 8 == target_dim) {
      col = build_conditioning(decoded[t], scaler);
    } else if (order == 16 && target_dim == 30) {
      col = embed_conditioning(decoded[t], scaler);
    } else {
      throw std::invalid_argument("conditioning dimension mismatch: stream provides " +
                                  std::to_string(order + 8) + ", decoder expects " +
                                  std::to_string(target_dim));
    }
    h.col(t) = col;
  }
  return h;
}

}  // namespace nvsc
