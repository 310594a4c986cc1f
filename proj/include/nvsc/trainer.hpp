#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "nvsc/samplernn.hpp"

namespace nvsc {

struct TrainerConfig {
  int batch = 4;           // paper: 24
  int seq_len = 1600;      // paper: 6400; must be a multiple of 160
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 1.0;       // elementwise gradient clip
  double plateau_factor = 0.3;
  int patience = 3;
  double lr_floor = 1e-6;
};

// Plateau schedule on the validation loss.
struct LrSchedule {
  double lr = 2e-4;
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
};

inline void lr_schedule_update(LrSchedule& sched, double val_loss, const TrainerConfig& cfg) {
  if (val_loss < sched.best) {
    sched.best = val_loss;
    sched.stall = 0;
    return;
  }
  if (++sched.stall >= cfg.patience) {
    sched.lr = std::max(sched.lr * cfg.plateau_factor, cfg.lr_floor);
    sched.stall = 0;
  }
}

template <typename T>
struct AdamState {
  SampleRnn<T> m, v;
  long step = 0;

  explicit AdamState(const ModelConfig& cfg) {
    m.resize(cfg);
    v.resize(cfg);
  }
};

// Flat (data pointer, size) view of every parameter block, in visit order.
template <typename T>
std::vector<std::pair<T*, long>> flat_params(SampleRnn<T>& model) {
  std::vector<std::pair<T*, long>> flat;
  model.visit([&](const std::string&, auto& block) {
    flat.emplace_back(block.data(), static_cast<long>(block.size()));
  });
  return flat;
}

// One TBPTT chunk per batch item; each item carries its own recurrent state,
// updated (and detached) in place.
template <typename T>
struct TrainItem {
  const std::vector<int16_t>* samples;
  const MatX<T>* cond;
  ModelState<T>* state;
};

// Elementwise gradient clip to [-clip, clip] followed by a bias-corrected
// ADAM update.
template <typename T>
void adam_apply(SampleRnn<T>& model, SampleRnn<T>& grad, AdamState<T>& adam, double lr,
                const TrainerConfig& cfg) {
  ++adam.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));

  const auto theta = flat_params(model);
  const auto g = flat_params(grad);
  const auto m = flat_params(adam.m);
  const auto v = flat_params(adam.v);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  for (size_t blk = 0; blk < theta.size(); ++blk) {
    T* tp = theta[blk].first;
    T* gp = g[blk].first;
    T* mp = m[blk].first;
    T* vp = v[blk].first;
    for (long i = 0; i < theta[blk].second; ++i) {
      const T gi = std::clamp(gp[i], static_cast<T>(-cfg.clip), static_cast<T>(cfg.clip));
      mp[i] = b1 * mp[i] + (static_cast<T>(1) - b1) * gi;
      vp[i] = b2 * vp[i] + (static_cast<T>(1) - b2) * gi * gi;
      const T mhat = mp[i] / static_cast<T>(c1);
      const T vhat = vp[i] / static_cast<T>(c2);
      tp[i] -= static_cast<T>(lr) * mhat / (std::sqrt(vhat) + static_cast<T>(cfg.eps));
    }
  }
}

// Runs forward/backward over the batch, clips, applies ADAM and returns the
// mean NLL (nats/sample) over the batch.
template <typename T>
T train_step(SampleRnn<T>& model, std::span<const TrainItem<T>> batch, AdamState<T>& adam,
             double lr, const TrainerConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");

  SampleRnn<T> grad;
  grad.resize(model.cfg);

  long total_samples = 0;
  for (const TrainItem<T>& item : batch) total_samples += static_cast<long>(item.samples->size());

  T loss = 0;
  const T upstream = static_cast<T>(1.0 / static_cast<double>(total_samples));
  for (const TrainItem<T>& item : batch) {
    ForwardCache<T> cache;
    const ForwardResult<T> result = forward_nll(model, *item.samples, *item.cond, item.state, &cache);
    loss += result.mean_nll * static_cast<T>(result.samples);
    backward(model, cache, upstream, grad);
  }
  loss /= static_cast<T>(total_samples);
  if (!std::isfinite(static_cast<double>(loss))) throw NumericalError("training diverged");

  adam_apply(model, grad, adam, lr, cfg);
  return loss;
}

}  // namespace nvsc
