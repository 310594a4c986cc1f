#pragma once

// Implementation of the templated SampleRNN forward / backward / generation
// paths; included at the end of samplernn.hpp.

namespace nvsc {

template <typename T>
void SampleRnn<T>::resize(const ModelConfig& config) {
  cfg = config;
  const int h = cfg.hidden;
  tier4.in_wave.resize(h, kFrameSize4);
  tier4.in_cond.resize(h, cfg.cond_dim);
  tier4.gru.resize(h, h);
  tier4.up.resize(kRatio4, h);
  tier3.in_wave.resize(h, kFrameSize3);
  tier3.in_cond.resize(h, cfg.cond_dim);
  tier3.gru.resize(h, h);
  tier3.up.resize(kRatio3, h);
  tier2.in_wave.resize(h, kFrameSize2);
  tier2.in_cond.resize(h, cfg.cond_dim);
  tier2.gru.resize(h, h);
  tier2.up.resize(kRatio2, h);
  mlp.in_samp.resize(h, kFrameSize1);
  mlp.in_cond.resize(h, cfg.cond_dim);
  mlp.fc1.resize(h, h);
  mlp.fc2.resize(h, h);
  mlp.out.resize(3 * cfg.n_mix, h);
}

template <typename T>
void SampleRnn<T>::set_zero() {
  visit([](const std::string&, auto& block) { block.setZero(); });
}

template <typename T>
SampleRnn<T> SampleRnn<T>::init(const ModelConfig& config, uint64_t seed) {
  SampleRnn<T> model;
  model.resize(config);
  Rng rng(derive_seed(seed, "model-init"));
  model.visit([&](const std::string&, auto& block) {
    using Block = std::decay_t<decltype(block)>;
    if constexpr (Block::ColsAtCompileTime == 1) {
      block.setZero();  // biases
    } else {
      const double bound = std::sqrt(1.0 / static_cast<double>(block.cols()));
      for (Eigen::Index i = 0; i < block.rows(); ++i)
        for (Eigen::Index j = 0; j < block.cols(); ++j)
          block(i, j) = static_cast<T>(rng.uniform(-bound, bound));
    }
  });
  // Output-head biases break the mixture symmetry: component means spread
  // across the sample domain and log-scales laddered from the full-range
  // scale down toward sharp components (the log-scale parameter is in bin
  // widths), widest components carrying the largest means. The initial
  // predictive distribution stays near the 16-bit uniform bound; adapting to
  // data then only requires re-weighting instead of a long scale descent.
  const int n_mix = config.n_mix;
  for (int m = 0; m < n_mix; ++m) {
    const double frac = n_mix > 1 ? static_cast<double>(m) / (n_mix - 1) : 0.0;
    const double sign = m % 2 == 0 ? 1.0 : -1.0;
    model.mlp.out.b[n_mix + m] = static_cast<T>(sign * 0.4 * (1.0 - frac));
    model.mlp.out.b[2 * n_mix + m] = static_cast<T>(std::log(32768.0) - 8.0 * frac);
  }
  return model;
}

namespace detail {

template <typename T>
DmlParams<T> split_dml(const VecX<T>& out, int n_mix) {
  DmlParams<T> dml;
  dml.logit_w = out.segment(0, n_mix);
  dml.mean = out.segment(n_mix, n_mix);
  dml.log_scale = out.segment(2 * n_mix, n_mix);
  return dml;
}

template <typename T>
void check_forward_args(const SampleRnn<T>& model, size_t n_samples, const MatX<T>& cond) {
  if (n_samples == 0 || n_samples % kFrameSize4 != 0)
    throw std::invalid_argument("waveform length must be a positive multiple of 160");
  if (cond.cols() != static_cast<Eigen::Index>(n_samples / kFrameSize4))
    throw std::invalid_argument("conditioning length mismatch");
  if (cond.rows() != model.cfg.cond_dim)
    throw std::invalid_argument("conditioning dimension mismatch: model expects " +
                                std::to_string(model.cfg.cond_dim) + ", got " +
                                std::to_string(cond.rows()));
}

}  // namespace detail

template <typename T, typename D>
ForwardResult<T> forward_nll(const SampleRnn<T>& model, const std::vector<int16_t>& samples,
                             const Eigen::MatrixBase<D>& cond_expr,
                             std::type_identity_t<ModelState<T>>* state, ForwardCache<T>* cache) {
  const MatX<T> cond = cond_expr.template cast<T>();
  detail::check_forward_args(model, samples.size(), cond);
  const int h = model.cfg.hidden;
  const long n = static_cast<long>(samples.size());

  ModelState<T> local(h);
  ModelState<T>& st = state ? *state : local;

  VecX<T> padded(kFrameSize4 + n);
  padded.head(kFrameSize4) = st.history;
  for (long i = 0; i < n; ++i) padded[kFrameSize4 + i] = static_cast<T>(samples[i] / 32768.0);

  auto run_tier = [&](const TierParams<T>& tier, int frame_size, VecX<T>& hidden,
                      const MatX<T>* upper, TierCache<T>* tc) {
    const long steps = n / frame_size;
    MatX<T> h_post(h, steps);
    if (tc) {
      tc->window.resize(steps);
      tc->cond_idx.resize(steps);
      tc->gru.resize(steps);
    }
    for (long t = 0; t < steps; ++t) {
      const VecX<T> window = padded.segment(kFrameSize4 + t * frame_size - frame_size, frame_size);
      const int ci = static_cast<int>(t * frame_size / kFrameSize4);
      VecX<T> x = tier.in_wave.apply(window) + tier.in_cond.apply(cond.col(ci));
      if (upper) x += upper->col(t);
      hidden = gru_step(tier.gru, x, hidden, tc ? &tc->gru[t] : nullptr);
      h_post.col(t) = hidden;
      if (tc) {
        tc->window[t] = window;
        tc->cond_idx[t] = ci;
      }
    }
    if (tc) tc->h_post = h_post;
    return upsample_learned(tier.up, h_post);
  };

  const MatX<T> u4 = run_tier(model.tier4, kFrameSize4, st.h4, nullptr, cache ? &cache->t4 : nullptr);
  const MatX<T> u3 = run_tier(model.tier3, kFrameSize3, st.h3, &u4, cache ? &cache->t3 : nullptr);
  const MatX<T> u2 = run_tier(model.tier2, kFrameSize2, st.h2, &u3, cache ? &cache->t2 : nullptr);

  if (cache) cache->mlp.resize(n);
  // Kahan-compensated sum; keeps the loss differentiable by finite
  // differences down to the 1e-11 scale in 64-bit mode.
  T nll_sum = 0, nll_comp = 0;
  const int n_mix = model.cfg.n_mix;
  for (long i = 0; i < n; ++i) {
    const VecX<T> prev2 = padded.segment(kFrameSize4 + i - kFrameSize1, kFrameSize1);
    const int ci = static_cast<int>(i / kFrameSize4);
    const VecX<T> a0 =
        model.mlp.in_samp.apply(prev2) + model.mlp.in_cond.apply(cond.col(ci)) + u2.col(i);
    const VecX<T> h1 = (model.mlp.fc1.apply(a0)).array().tanh().matrix();
    const VecX<T> h2 = (model.mlp.fc2.apply(h1)).array().tanh().matrix();
    const DmlParams<T> dml = detail::split_dml(model.mlp.out.apply(h2), n_mix);
    {
      const T y = dml_nll(dml, samples[i]) - nll_comp;
      const T t = nll_sum + y;
      nll_comp = (t - nll_sum) - y;
      nll_sum = t;
    }
    if (cache) {
      MlpSampleCache<T>& mc = cache->mlp[i];
      mc.prev2 = prev2;
      mc.cond_idx = ci;
      mc.a0 = a0;
      mc.h1 = h1;
      mc.h2 = h2;
      mc.dml = dml;
      mc.target_bin = samples[i];
    }
  }

  st.history = padded.tail(kFrameSize4);
  if (cache) {
    cache->cond = cond;
    cache->padded = padded;
  }

  ForwardResult<T> result;
  result.samples = n;
  result.mean_nll = nll_sum / static_cast<T>(n);
  result.bits_per_sample = result.mean_nll / static_cast<T>(std::log(2.0));
  return result;
}

template <typename T>
void backward(const SampleRnn<T>& model, const ForwardCache<T>& cache, T upstream,
              SampleRnn<T>& grad) {
  const int h = model.cfg.hidden;
  const int n_mix = model.cfg.n_mix;
  const long n = static_cast<long>(cache.mlp.size());

  MatX<T> du2 = MatX<T>::Zero(h, n);
  {
    DmlParams<T> dml_grad;
    VecX<T> dout(3 * n_mix);
    for (long i = 0; i < n; ++i) {
      const MlpSampleCache<T>& mc = cache.mlp[i];
      dml_grad.logit_w = VecX<T>::Zero(n_mix);
      dml_grad.mean = VecX<T>::Zero(n_mix);
      dml_grad.log_scale = VecX<T>::Zero(n_mix);
      dml_nll_backward(mc.dml, mc.target_bin, upstream, dml_grad);
      dout.segment(0, n_mix) = dml_grad.logit_w;
      dout.segment(n_mix, n_mix) = dml_grad.mean;
      dout.segment(2 * n_mix, n_mix) = dml_grad.log_scale;

      grad.mlp.out.w.noalias() += dout * mc.h2.transpose();
      grad.mlp.out.b += dout;
      const VecX<T> dh2 = model.mlp.out.w.transpose() * dout;
      const VecX<T> dz2 =
          dh2.cwiseProduct((VecX<T>::Ones(h) - mc.h2.cwiseProduct(mc.h2)));
      grad.mlp.fc2.w.noalias() += dz2 * mc.h1.transpose();
      grad.mlp.fc2.b += dz2;
      const VecX<T> dh1 = model.mlp.fc2.w.transpose() * dz2;
      const VecX<T> dz1 =
          dh1.cwiseProduct((VecX<T>::Ones(h) - mc.h1.cwiseProduct(mc.h1)));
      grad.mlp.fc1.w.noalias() += dz1 * mc.a0.transpose();
      grad.mlp.fc1.b += dz1;
      const VecX<T> da0 = model.mlp.fc1.w.transpose() * dz1;

      grad.mlp.in_samp.w.noalias() += da0 * mc.prev2.transpose();
      grad.mlp.in_samp.b += da0;
      grad.mlp.in_cond.w.noalias() += da0 * cache.cond.col(mc.cond_idx).transpose();
      grad.mlp.in_cond.b += da0;
      du2.col(i) += da0;
    }
  }

  auto run_tier_backward = [&](const TierParams<T>& tier, TierParams<T>& tier_grad,
                               const TierCache<T>& tc, const MatX<T>& du) {
    const long steps = static_cast<long>(tc.gru.size());
    const int ratio = tier.up.ratio();
    MatX<T> du_upper = MatX<T>::Zero(h, steps);

    VecX<T> dh_carry = VecX<T>::Zero(h);
    for (long t = steps - 1; t >= 0; --t) {
      VecX<T> dh = dh_carry;
      for (int j = 0; j < ratio; ++j) {
        const auto du_col = du.col(t * ratio + j);
        tier_grad.up.k[j].noalias() += du_col * tc.h_post.col(t).transpose();
        tier_grad.up.b[j] += du_col;
        dh.noalias() += tier.up.k[j].transpose() * du_col;
      }
      VecX<T> dx = VecX<T>::Zero(h);
      dh_carry = gru_backward(tier.gru, tc.gru[t], dh, tier_grad.gru, dx);
      tier_grad.in_wave.w.noalias() += dx * tc.window[t].transpose();
      tier_grad.in_wave.b += dx;
      tier_grad.in_cond.w.noalias() += dx * cache.cond.col(tc.cond_idx[t]).transpose();
      tier_grad.in_cond.b += dx;
      du_upper.col(t) += dx;
    }
    return du_upper;
  };

  const MatX<T> du3 = run_tier_backward(model.tier2, grad.tier2, cache.t2, du2);
  const MatX<T> du4 = run_tier_backward(model.tier3, grad.tier3, cache.t3, du3);
  run_tier_backward(model.tier4, grad.tier4, cache.t4, du4);
}

template <typename T, typename D>
std::vector<int16_t> generate(const SampleRnn<T>& model, const Eigen::MatrixBase<D>& cond_expr,
                              uint64_t seed, std::type_identity_t<ModelState<T>>* state) {
  const MatX<T> cond = cond_expr.template cast<T>();
  if (cond.cols() > 0 && cond.rows() != model.cfg.cond_dim)
    throw std::invalid_argument("conditioning dimension mismatch: model expects " +
                                std::to_string(model.cfg.cond_dim) + ", got " +
                                std::to_string(cond.rows()));
  const int h = model.cfg.hidden;
  const long n = static_cast<long>(cond.cols()) * kFrameSize4;

  ModelState<T> local(h);
  ModelState<T>& st = state ? *state : local;
  Rng rng(derive_seed(seed, "dml-sample"));

  VecX<T> padded(kFrameSize4 + n);
  padded.head(kFrameSize4) = st.history;

  MatX<T> u4(h, kRatio4), u3(h, kRatio3), u2(h, kRatio2);
  std::vector<int16_t> out(n);
  const int n_mix = model.cfg.n_mix;

  for (long i = 0; i < n; ++i) {
    const int ci = static_cast<int>(i / kFrameSize4);
    if (i % kFrameSize4 == 0) {
      const VecX<T> window = padded.segment(i, kFrameSize4);
      const VecX<T> x = model.tier4.in_wave.apply(window) + model.tier4.in_cond.apply(cond.col(ci));
      st.h4 = gru_step(model.tier4.gru, x, st.h4);
      u4 = upsample_learned(model.tier4.up, MatX<T>(st.h4));
    }
    if (i % kFrameSize3 == 0) {
      const VecX<T> window = padded.segment(kFrameSize4 + i - kFrameSize3, kFrameSize3);
      VecX<T> x = model.tier3.in_wave.apply(window) + model.tier3.in_cond.apply(cond.col(ci));
      x += u4.col((i / kFrameSize3) % kRatio4);
      st.h3 = gru_step(model.tier3.gru, x, st.h3);
      u3 = upsample_learned(model.tier3.up, MatX<T>(st.h3));
    }
    if (i % kFrameSize2 == 0) {
      const VecX<T> window = padded.segment(kFrameSize4 + i - kFrameSize2, kFrameSize2);
      VecX<T> x = model.tier2.in_wave.apply(window) + model.tier2.in_cond.apply(cond.col(ci));
      x += u3.col((i / kFrameSize2) % kRatio3);
      st.h2 = gru_step(model.tier2.gru, x, st.h2);
      u2 = upsample_learned(model.tier2.up, MatX<T>(st.h2));
    }

    const VecX<T> prev2 = padded.segment(kFrameSize4 + i - kFrameSize1, kFrameSize1);
    const VecX<T> a0 =
        model.mlp.in_samp.apply(prev2) + model.mlp.in_cond.apply(cond.col(ci)) + u2.col(i % kRatio2);
    const VecX<T> h1 = (model.mlp.fc1.apply(a0)).array().tanh().matrix();
    const VecX<T> h2 = (model.mlp.fc2.apply(h1)).array().tanh().matrix();
    const DmlParams<T> dml = detail::split_dml(model.mlp.out.apply(h2), n_mix);
    const int bin = dml_sample(dml, rng);
    out[i] = static_cast<int16_t>(bin);
    padded[kFrameSize4 + i] = static_cast<T>(bin / 32768.0);
  }

  if (n > 0) st.history = padded.tail(kFrameSize4);
  return out;
}

}  // namespace nvsc
