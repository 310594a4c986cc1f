#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvsc/signal_analysis.hpp"
#include "nvsc/types.hpp"

namespace nvsc {

enum class OpPointId : uint8_t { R5_6 = 0, R6_4 = 1, R8_0 = 2 };

struct OperatingPoint {
  OpPointId id;
  double nominal_kbps;
  int lpc_order;           // M
  int level_payload_bits;  // payload width; one mode bit on top
  int pitch_payload_bits;  // payload width; one mode bit on top
  int voicing_bits;
  double lsp_bit_budget;   // target mean bits/frame for the entropy-coded LSPs

  int fixed_bits() const { return 1 + level_payload_bits + 1 + pitch_payload_bits + voicing_bits; }

  static const OperatingPoint& get(OpPointId id);
  static OpPointId parse(const std::string& name);  // "5.6" | "6.4" | "8.0"
};

std::string op_point_name(OpPointId id);

// ---- warped domains ----------------------------------------------------

constexpr double kPitchWarpC = 500.0;  // Hz
constexpr double kVoicingClamp = 1.0 - 1e-6;

double warp_pitch(double f0_hz);
double unwarp_pitch(double warped);  // throws on warped >= c

Vec6 warp_voicing(const Vec6& v);    // clamps v into [0, 1-1e-6] first
Vec6 unwarp_voicing(const Vec6& w);  // output clamped into [0, 1]

double level_to_db(double s_linear);   // 20 log10(max(s, 1e-9))
double level_from_db(double s_db);

// ---- predictive level / pitch coding -------------------------------------

// Shared by the level and pitch coders; the encoder and decoder instances
// must follow identical trajectories (synchrony invariant).
struct PredictiveCoderState {
  bool has_prev = false;
  double prev_level_db = 0.0;
  double prev_pitch_warped = 0.0;
  bool prev_voiced = false;
};

struct FieldCode {
  int mode = 0;     // 0 = memoryless, 1 = predictive
  int payload = 0;  // within the operating point's payload width
};

FieldCode level_encode(double s_db, PredictiveCoderState& state, const OperatingPoint& op);
double level_decode(const FieldCode& code, PredictiveCoderState& state, const OperatingPoint& op);

FieldCode pitch_encode(double f0_hz, PredictiveCoderState& state, const OperatingPoint& op);
double pitch_decode(const FieldCode& code, PredictiveCoderState& state, const OperatingPoint& op);

// ---- voicing VQ -----------------------------------------------------------

struct VqCodebook {
  Mat codewords;  // 512 x 6, stored in the warped domain
};

int voicing_encode(const Vec6& v, const VqCodebook& cb);
Vec6 voicing_decode(int index, const VqCodebook& cb);

// LBG with binary splitting; vectors are rows of `warped` (already in the
// warped domain). Requires >= 5120 vectors.
VqCodebook vq_train(const Mat& warped, uint64_t seed, std::vector<double>* distortion_trace = nullptr);

// ---- GMM / lattice LSP coding ---------------------------------------------

struct GmmModel {
  Vec weights;  // n components
  Mat means;    // n x d
  Mat vars;     // n x d, diagonal covariances
  Mat steps;    // n x d, per-component lattice step sizes
  double lambda = 0.01;

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
};

struct LspCode {
  int component = 0;
  VecI indices;  // d lattice offsets
};

// Diagonal-covariance EM with seeded k-means++ initialization. Data rows are
// LSP vectors. Requires >= 10 * n_components * dim rows.
GmmModel gmm_train(const Mat& data, int n_components, int n_iters, uint64_t seed,
                   std::vector<double>* loglik_trace = nullptr);

// Gaussian probability mass of lattice cell `index` in dimension d of
// component m (cell width = steps(m, d), centered on the lattice point).
double lattice_cell_mass(const GmmModel& gmm, int component, int dim, long index);

// Model rate of a coded cell in bits: -log2 w_m - sum_d log2 cell mass.
double lsp_code_rate_bits(const LspCode& code, const GmmModel& gmm);

LspCode lsp_quantize(const Vec& lsp, const GmmModel& gmm, double lambda);
Vec lsp_dequantize(const LspCode& code, const GmmModel& gmm);

// Scales steps(m, d) = scale * sigma(m, d), bisecting the global scale until
// the measured mean rate over `data` hits bit_budget; sets gmm.lambda to the
// matching rate-distortion slope. Returns the realized mean rate.
double calibrate_steps(GmmModel& gmm, const Mat& data, double bit_budget);

// ---- per-frame quantization ------------------------------------------------

struct QuantizedFrame {
  LspCode lsp;
  FieldCode level;
  FieldCode pitch;
  int voicing_index = 0;
};

struct CodebookSet {
  // Indexed by OpPointId; only trained operating points are usable.
  std::vector<GmmModel> gmm = std::vector<GmmModel>(3);
  std::vector<bool> has_gmm = std::vector<bool>(3, false);
  VqCodebook vq;
  bool has_vq = false;
  // Conditioning standardization, computed over the training corpus.
  double f0_mean = 0.0, f0_std = 1.0;
  double s_db_mean = 0.0, s_db_std = 1.0;

  const GmmModel& gmm_for(OpPointId id) const;
};

QuantizedFrame quantize_frame(const FrameParams& params, const OperatingPoint& op,
                              const CodebookSet& books, PredictiveCoderState& state);
FrameParams dequantize_frame(const QuantizedFrame& q, const OperatingPoint& op,
                             const CodebookSet& books, PredictiveCoderState& state);

// Minimum LSP separation enforced after dequantization.
constexpr double kLspMinSeparation = 0.008;
Vec enforce_lsp_ordering(Vec lsp);

}  // namespace nvsc
