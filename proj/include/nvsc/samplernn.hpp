#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "nvsc/conditioning.hpp"
#include "nvsc/dml.hpp"
#include "nvsc/rng.hpp"
#include "nvsc/types.hpp"

namespace nvsc {

// Four-tier conditional SampleRNN. Tiers 4..2 are GRUs over non-overlapping
// waveform frames with learned (transposed-convolution) upsampling between
// tiers; tier 1 is a two-hidden-layer MLP over the previous two raw samples
// emitting discretized-logistic-mixture parameters. Every tier also receives
// the decoded conditioning vector through its own 1x1 convolution.
//
// Scalar type T is float for normal runs and double for gradient checks.

constexpr int kFrameSize1 = 2;
constexpr int kFrameSize2 = 2;
constexpr int kFrameSize3 = 16;
constexpr int kFrameSize4 = 160;
constexpr int kRatio2 = 2;
constexpr int kRatio3 = 8;
constexpr int kRatio4 = 10;

struct ModelConfig {
  int hidden = 64;    // units per recurrent / fully-connected layer
  int cond_dim = 24;  // 24 (M=16 direct) or 30 (M=22 direct / embedded)
  int n_mix = 10;     // logistic mixture components
};

template <typename T>
struct Linear {
  MatX<T> w;
  VecX<T> b;

  void resize(int out, int in) {
    w.setZero(out, in);
    b.setZero(out);
  }
  VecX<T> apply(const VecX<T>& x) const { return w * x + b; }
};

template <typename T>
struct GruParams {
  MatX<T> wz, wr, wc;  // input weights, hidden x in
  MatX<T> uz, ur, uc;  // recurrent weights, hidden x hidden
  VecX<T> bz, br, bc;

  void resize(int hidden, int in) {
    wz.setZero(hidden, in);
    wr.setZero(hidden, in);
    wc.setZero(hidden, in);
    uz.setZero(hidden, hidden);
    ur.setZero(hidden, hidden);
    uc.setZero(hidden, hidden);
    bz.setZero(hidden);
    br.setZero(hidden);
    bc.setZero(hidden);
  }
};

template <typename T>
struct UpsampleParams {
  // transposed convolution, kernel size = stride = ratio: one hidden x hidden
  // kernel slice and bias per output phase
  std::vector<MatX<T>> k;
  std::vector<VecX<T>> b;

  void resize(int ratio, int hidden) {
    k.assign(ratio, MatX<T>::Zero(hidden, hidden));
    b.assign(ratio, VecX<T>::Zero(hidden));
  }
  int ratio() const { return static_cast<int>(k.size()); }
};

template <typename T>
struct TierParams {
  Linear<T> in_wave;  // 1x1 conv of the previous frame_size samples
  Linear<T> in_cond;  // 1x1 conv of the conditioning vector
  GruParams<T> gru;
  UpsampleParams<T> up;
};

template <typename T>
struct MlpParams {
  Linear<T> in_samp;  // previous kFrameSize1 raw samples
  Linear<T> in_cond;
  Linear<T> fc1, fc2;  // tanh hidden layers
  Linear<T> out;       // 3 * n_mix DML parameters
};

template <typename T>
struct SampleRnn {
  ModelConfig cfg;
  ConditioningScaler scaler;  // stored with the model for checkpointing
  TierParams<T> tier4, tier3, tier2;
  MlpParams<T> mlp;

  void resize(const ModelConfig& config);
  void set_zero();

  // Stable enumeration order; used by init, Adam, checkpoints and tests.
  template <typename F>
  void visit(F&& f) {
    auto lin = [&](const std::string& name, Linear<T>& l) {
      f(name + ".w", l.w);
      f(name + ".b", l.b);
    };
    auto gru = [&](const std::string& name, GruParams<T>& g) {
      f(name + ".wz", g.wz);
      f(name + ".wr", g.wr);
      f(name + ".wc", g.wc);
      f(name + ".uz", g.uz);
      f(name + ".ur", g.ur);
      f(name + ".uc", g.uc);
      f(name + ".bz", g.bz);
      f(name + ".br", g.br);
      f(name + ".bc", g.bc);
    };
    auto up = [&](const std::string& name, UpsampleParams<T>& u) {
      for (size_t j = 0; j < u.k.size(); ++j) {
        f(name + ".k" + std::to_string(j), u.k[j]);
        f(name + ".b" + std::to_string(j), u.b[j]);
      }
    };
    auto tier = [&](const std::string& name, TierParams<T>& t) {
      lin(name + ".in_wave", t.in_wave);
      lin(name + ".in_cond", t.in_cond);
      gru(name + ".gru", t.gru);
      up(name + ".up", t.up);
    };
    tier("tier4", tier4);
    tier("tier3", tier3);
    tier("tier2", tier2);
    lin("mlp.in_samp", mlp.in_samp);
    lin("mlp.in_cond", mlp.in_cond);
    lin("mlp.fc1", mlp.fc1);
    lin("mlp.fc2", mlp.fc2);
    lin("mlp.out", mlp.out);
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<SampleRnn*>(this)->visit(
        [&](const std::string& name, auto& block) { f(name, std::as_const(block)); });
  }

  static SampleRnn init(const ModelConfig& config, uint64_t seed);
};

// Recurrent state carried across TBPTT chunks / generation: GRU hiddens plus
// the last kFrameSize4 samples of waveform history.
template <typename T>
struct ModelState {
  VecX<T> h4, h3, h2;
  VecX<T> history;  // real-valued, length kFrameSize4

  explicit ModelState(int hidden)
      : h4(VecX<T>::Zero(hidden)),
        h3(VecX<T>::Zero(hidden)),
        h2(VecX<T>::Zero(hidden)),
        history(VecX<T>::Zero(kFrameSize4)) {}
};

// ---- single steps ------------------------------------------------------------

template <typename T>
struct GruCache {
  VecX<T> x, h_prev, z, r, c, rh;
};

template <typename T, typename DX, typename DH>
VecX<T> gru_step(const GruParams<T>& p, const Eigen::MatrixBase<DX>& x_expr,
                 const Eigen::MatrixBase<DH>& h_expr, GruCache<T>* cache = nullptr) {
  const VecX<T> x = x_expr;
  const VecX<T> h_prev = h_expr;
  const VecX<T> z = ((p.wz * x + p.uz * h_prev + p.bz).array().logistic()).matrix();
  const VecX<T> r = ((p.wr * x + p.ur * h_prev + p.br).array().logistic()).matrix();
  const VecX<T> rh = r.cwiseProduct(h_prev);
  const VecX<T> c = ((p.wc * x + p.uc * rh + p.bc).array().tanh()).matrix();
  VecX<T> h = z.cwiseProduct(h_prev) + (VecX<T>::Ones(z.size()) - z).cwiseProduct(c);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = z;
    cache->r = r;
    cache->c = c;
    cache->rh = rh;
  }
  return h;
}

// Returns d(h_prev); accumulates parameter gradients and d(x) into dx.
template <typename T>
VecX<T> gru_backward(const GruParams<T>& p, const GruCache<T>& cache, const VecX<T>& dh,
                     GruParams<T>& grad, VecX<T>& dx) {
  const VecX<T> ones = VecX<T>::Ones(dh.size());
  const VecX<T> dz = dh.cwiseProduct(cache.h_prev - cache.c);
  const VecX<T> dc = dh.cwiseProduct(ones - cache.z);
  const VecX<T> dci = dc.cwiseProduct(ones - cache.c.cwiseProduct(cache.c));
  const VecX<T> dzi = dz.cwiseProduct(cache.z.cwiseProduct(ones - cache.z));
  const VecX<T> drh = p.uc.transpose() * dci;
  const VecX<T> dr = drh.cwiseProduct(cache.h_prev);
  const VecX<T> dri = dr.cwiseProduct(cache.r.cwiseProduct(ones - cache.r));

  VecX<T> dh_prev = dh.cwiseProduct(cache.z) + drh.cwiseProduct(cache.r);
  dh_prev.noalias() += p.uz.transpose() * dzi;
  dh_prev.noalias() += p.ur.transpose() * dri;

  dx.noalias() += p.wz.transpose() * dzi;
  dx.noalias() += p.wr.transpose() * dri;
  dx.noalias() += p.wc.transpose() * dci;

  grad.wz.noalias() += dzi * cache.x.transpose();
  grad.wr.noalias() += dri * cache.x.transpose();
  grad.wc.noalias() += dci * cache.x.transpose();
  grad.uz.noalias() += dzi * cache.h_prev.transpose();
  grad.ur.noalias() += dri * cache.h_prev.transpose();
  grad.uc.noalias() += dci * cache.rh.transpose();
  grad.bz += dzi;
  grad.br += dri;
  grad.bc += dci;
  return dh_prev;
}

// Non-overlapping transposed convolution: each input column expands to
// `ratio` output columns.
template <typename T, typename D>
MatX<T> upsample_learned(const UpsampleParams<T>& p, const Eigen::MatrixBase<D>& input_expr) {
  const MatX<T> input = input_expr;
  const int ratio = p.ratio();
  MatX<T> out(input.rows(), input.cols() * ratio);
  for (Eigen::Index t = 0; t < input.cols(); ++t)
    for (int j = 0; j < ratio; ++j) out.col(t * ratio + j) = p.k[j] * input.col(t) + p.b[j];
  return out;
}

// ---- whole-sequence teacher-forced pass ---------------------------------------

template <typename T>
struct TierCache {
  std::vector<VecX<T>> window;
  std::vector<int> cond_idx;
  std::vector<GruCache<T>> gru;
  MatX<T> h_post;  // hidden x steps, GRU outputs feeding the upsampler
};

template <typename T>
struct MlpSampleCache {
  VecX<T> prev2;    // raw inputs
  int cond_idx = 0;
  VecX<T> a0;       // summed tier-1 input
  VecX<T> h1, h2;   // tanh activations
  DmlParams<T> dml;
  int target_bin = 0;
};

template <typename T>
struct ForwardCache {
  TierCache<T> t4, t3, t2;
  std::vector<MlpSampleCache<T>> mlp;
  MatX<T> cond;      // conditioning actually used (copy for backward)
  VecX<T> padded;    // history + chunk samples as reals
};

template <typename T>
struct ForwardResult {
  T mean_nll = 0;         // nats per sample
  long samples = 0;
  T bits_per_sample = 0;  // mean_nll / ln 2
};

template <typename T, typename D>
ForwardResult<T> forward_nll(const SampleRnn<T>& model, const std::vector<int16_t>& samples,
                             const Eigen::MatrixBase<D>& cond,
                             std::type_identity_t<ModelState<T>>* state = nullptr,
                             ForwardCache<T>* cache = nullptr);

// Accumulates parameter gradients of (upstream * sum of per-sample NLL).
template <typename T>
void backward(const SampleRnn<T>& model, const ForwardCache<T>& cache, T upstream,
              SampleRnn<T>& grad);

// Autoregressive synthesis: exactly kFrameSize4 samples per conditioning
// column, bit-deterministic given the seed.
template <typename T, typename D>
std::vector<int16_t> generate(const SampleRnn<T>& model, const Eigen::MatrixBase<D>& cond,
                              uint64_t seed, std::type_identity_t<ModelState<T>>* state = nullptr);

}  // namespace nvsc

#include "nvsc/samplernn_impl.hpp"
