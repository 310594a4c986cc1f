#include "nvsc/signal_analysis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace nvsc {

namespace {

constexpr double kLagWindowBandwidthHz = 60.0;
constexpr double kAutocorrNoiseFloor = 1e-6;

// Clenshaw evaluation of sum c_k T_k(x).
double cheb_eval(const Vec& c, double x) {
  double b1 = 0.0, b2 = 0.0;
  for (Eigen::Index k = c.size() - 1; k >= 1; --k) {
    const double b0 = 2.0 * x * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  return x * b1 - b2 + c[0];
}

// d/dx sum c_k T_k(x) = sum_{k>=1} k c_k U_{k-1}(x), evaluated by Clenshaw in U.
double cheb_deriv_eval(const Vec& c, double x) {
  const Eigen::Index n = c.size() - 1;
  if (n < 1) return 0.0;
  double b1 = 0.0, b2 = 0.0;
  for (Eigen::Index k = n; k >= 1; --k) {
    const double b0 = 2.0 * x * b1 - b2 + static_cast<double>(k) * c[k];
    b2 = b1;
    b1 = b0;
  }
  return b1;  // U_0 = 1 and the Clenshaw tail reduces to b1
}

// Real roots in [-1, 1] of a Chebyshev-basis polynomial via its colleague
// matrix, polished with safeguarded Newton steps.
std::vector<double> cheb_roots(const Vec& c) {
  const Eigen::Index n = c.size() - 1;
  if (n < 1) return {};
  Mat a = Mat::Zero(n, n);
  if (n == 1) {
    a(0, 0) = -c[0] / c[1];
  } else {
    a(0, 1) = 1.0;
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
      a(i, i - 1) = 0.5;
      a(i, i + 1) = 0.5;
    }
    for (Eigen::Index j = 0; j < n; ++j) a(n - 1, j) = -c[j] / (2.0 * c[n]);
    a(n - 1, n - 2) += 0.5;
  }

  Eigen::EigenSolver<Mat> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw NumericalError("LSP conversion failed");

  std::vector<double> roots;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> ev = solver.eigenvalues()[i];
    if (std::abs(ev.imag()) > 1e-8 * (1.0 + std::abs(ev.real()))) continue;
    double x = std::clamp(ev.real(), -1.0, 1.0);
    for (int it = 0; it < 4; ++it) {
      const double f = cheb_eval(c, x);
      const double df = cheb_deriv_eval(c, x);
      if (df == 0.0) break;
      const double step = f / df;
      if (!std::isfinite(step) || std::abs(step) > 0.1) break;
      x = std::clamp(x - step, -1.0, 1.0);
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Symmetric polynomial g_0..g_m (g_i = g_{m-i}, m even) evaluated on the unit
// circle reduces to a degree m/2 Chebyshev polynomial in x = cos(w).
Vec symmetric_to_cheb(const Vec& g) {
  const Eigen::Index half = (g.size() - 1) / 2;
  Vec c(half + 1);
  c[0] = g[half];
  for (Eigen::Index i = 1; i <= half; ++i) c[i] = 2.0 * g[half - i];
  return c;
}

Vec conv(const Vec& a, const Vec& b) {
  Vec out = Vec::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

}  // namespace

Vec hann_window(int n) {
  Vec w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 0.5) / n);
  return w;
}

BandFilterBank::BandFilterBank(const std::array<double, kVoicingBands + 1>& edges_hz, int taps) {
  if (taps % 2 == 0) ++taps;
  const int c = taps / 2;
  Vec win(taps);
  for (int i = 0; i < taps; ++i) win[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (taps - 1));

  auto sinc_lp = [&](double fc_norm, int i) {
    // cutoff as fraction of the sample rate, impulse response of an ideal LPF
    const int m = i - c;
    if (m == 0) return 2.0 * fc_norm;
    return std::sin(2.0 * M_PI * fc_norm * m) / (M_PI * m);
  };

  for (int b = 0; b + 1 < static_cast<int>(edges_hz.size()); ++b) {
    const double f1 = edges_hz[b] / kSampleRate;
    const double f2 = edges_hz[b + 1] / kSampleRate;
    Vec h(taps);
    for (int i = 0; i < taps; ++i) h[i] = (sinc_lp(f2, i) - sinc_lp(f1, i)) * win[i];
    taps_.push_back(std::move(h));
  }
}

Vec BandFilterBank::filter(int band, const Vec& x) const {
  const Vec& h = taps_.at(band);
  const int c = static_cast<int>(h.size()) / 2;
  Vec y = Vec::Zero(x.size());
  for (Eigen::Index n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < h.size(); ++k) {
      const Eigen::Index j = n + c - k;
      if (j >= 0 && j < x.size()) acc += h[k] * x[j];
    }
    y[n] = acc;
  }
  return y;
}

Mat frame_signal(const AudioBuffer& audio, const AnalysisConfig& config) {
  const Eigen::Index len = audio.samples.size();
  if (len == 0) throw FormatError("empty signal");
  const int hop = config.frame_length;
  const int w = config.window_length;
  const Eigen::Index n_frames = (len + hop - 1) / hop;

  Mat frames = Mat::Zero(w, n_frames);
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const Eigen::Index center = t * hop + hop / 2;
    const Eigen::Index start = center - w / 2;
    for (int i = 0; i < w; ++i) {
      const Eigen::Index idx = start + i;
      if (idx >= 0 && idx < len) frames(i, t) = audio.samples[idx];
    }
  }
  return frames;
}

std::pair<Vec, double> lpc_analyze(const Vec& windowed, int order) {
  if (order < 1) throw std::invalid_argument("LPC order must be >= 1");
  const Eigen::Index n = windowed.size();

  Vec r = Vec::Zero(order + 1);
  for (int tau = 0; tau <= order; ++tau) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i + tau < n; ++i) acc += windowed[i] * windowed[i + tau];
    r[tau] = acc;
  }

  if (r[0] <= 0.0) return {Vec::Zero(order), 0.0};

  // Gaussian lag window (60 Hz bandwidth expansion) plus a white-noise floor
  // keeps the normal equations well conditioned on near-singular frames.
  r[0] *= 1.0 + kAutocorrNoiseFloor;
  for (int tau = 1; tau <= order; ++tau) {
    const double arg = 2.0 * M_PI * kLagWindowBandwidthHz * tau / kSampleRate;
    r[tau] *= std::exp(-0.5 * arg * arg);
  }

  Vec a = Vec::Zero(order);
  double err = r[0];
  for (int m = 1; m <= order; ++m) {
    double acc = r[m];
    for (int i = 1; i < m; ++i) acc += a[i - 1] * r[m - i];
    double k = -acc / err;
    k = std::clamp(k, -0.999999, 0.999999);
    Vec prev = a;
    a[m - 1] = k;
    for (int i = 1; i < m; ++i) a[i - 1] = prev[i - 1] + k * prev[m - i - 1];
    err *= 1.0 - k * k;
  }

  const double rms = std::sqrt(std::max(err, 0.0) / static_cast<double>(n));
  return {a, rms};
}

Vec lpc_to_reflection(const Vec& lpc) {
  const int order = static_cast<int>(lpc.size());
  Vec k(order);
  Vec b = lpc;
  for (int m = order; m >= 1; --m) {
    k[m - 1] = b[m - 1];
    if (std::abs(k[m - 1]) >= 1.0) throw NumericalError("unstable filter");
    if (m == 1) break;
    const double denom = 1.0 - k[m - 1] * k[m - 1];
    Vec next(m - 1);
    for (int i = 1; i < m; ++i) next[i - 1] = (b[i - 1] - k[m - 1] * b[m - i - 1]) / denom;
    b = next;
  }
  return k;
}

Vec reflection_to_lpc(const Vec& refl) {
  const int order = static_cast<int>(refl.size());
  Vec a;
  for (int m = 1; m <= order; ++m) {
    Vec next(m);
    next[m - 1] = refl[m - 1];
    for (int i = 1; i < m; ++i) next[i - 1] = a[i - 1] + refl[m - 1] * a[m - i - 1];
    a = next;
  }
  return a;
}

bool lpc_is_stable(const Vec& lpc) {
  try {
    lpc_to_reflection(lpc);
    return true;
  } catch (const NumericalError&) {
    return false;
  }
}

Vec lpc_to_lsp(const Vec& lpc) {
  const int order = static_cast<int>(lpc.size());
  if (order < 2 || order % 2 != 0) throw std::invalid_argument("LSP requires an even LPC order");
  const int half = order / 2;

  // P(z) = A(z) + z^-(M+1) A(1/z), Q(z) = A(z) - z^-(M+1) A(1/z)
  Vec p(order + 2), q(order + 2);
  p[0] = 1.0;
  q[0] = 1.0;
  p[order + 1] = 1.0;
  q[order + 1] = -1.0;
  for (int i = 1; i <= order; ++i) {
    p[i] = lpc[i - 1] + lpc[order - i];
    q[i] = lpc[i - 1] - lpc[order - i];
  }

  // Deflate the fixed roots at z = -1 (P) and z = +1 (Q).
  Vec pd(order + 1), qd(order + 1);
  pd[0] = 1.0;
  qd[0] = 1.0;
  for (int i = 1; i <= order; ++i) {
    pd[i] = p[i] - pd[i - 1];
    qd[i] = q[i] + qd[i - 1];
  }

  const std::vector<double> px = cheb_roots(symmetric_to_cheb(pd));
  const std::vector<double> qx = cheb_roots(symmetric_to_cheb(qd));
  if (static_cast<int>(px.size()) != half || static_cast<int>(qx.size()) != half)
    throw NumericalError("LSP conversion failed");

  Vec lsp(order);
  for (int i = 0; i < half; ++i) {
    // descending x is ascending w; P roots at odd positions 1,3,..., Q at even
    lsp[2 * i] = std::acos(std::clamp(px[half - 1 - i], -1.0, 1.0));
    lsp[2 * i + 1] = std::acos(std::clamp(qx[half - 1 - i], -1.0, 1.0));
  }
  for (int i = 0; i < order; ++i) {
    const bool ok = lsp[i] > 0.0 && lsp[i] < M_PI && (i == 0 || lsp[i] > lsp[i - 1]);
    if (!ok) throw NumericalError("LSP conversion failed");
  }
  return lsp;
}

Vec lsp_to_lpc(const Vec& lsp) {
  const int order = static_cast<int>(lsp.size());
  if (order < 2 || order % 2 != 0) throw std::invalid_argument("LSP requires an even order");

  Vec pd(1), qd(1);
  pd[0] = 1.0;
  qd[0] = 1.0;
  for (int i = 0; i < order; i += 2) {
    Vec factor(3);
    factor << 1.0, -2.0 * std::cos(lsp[i]), 1.0;
    pd = conv(pd, factor);
  }
  for (int i = 1; i < order; i += 2) {
    Vec factor(3);
    factor << 1.0, -2.0 * std::cos(lsp[i]), 1.0;
    qd = conv(qd, factor);
  }

  Vec one_plus(2), one_minus(2);
  one_plus << 1.0, 1.0;
  one_minus << 1.0, -1.0;
  const Vec p = conv(pd, one_plus);
  const Vec q = conv(qd, one_minus);

  Vec a(order);
  for (int i = 1; i <= order; ++i) a[i - 1] = 0.5 * (p[i] + q[i]);
  return a;
}

double pitch_estimate(const Vec& frame, const AnalysisConfig& config) {
  const int fs = kSampleRate;
  const int lag_min = static_cast<int>(std::floor(fs / config.pitch_max_hz));
  const int lag_max = static_cast<int>(std::ceil(fs / config.pitch_min_hz));
  const Eigen::Index len = frame.size();
  const int corr_len = static_cast<int>(len) - lag_max;
  if (corr_len < 16) return 0.0;

  // prefix energies for the sliding reference segment
  Vec energy(len + 1);
  energy[0] = 0.0;
  for (Eigen::Index i = 0; i < len; ++i) energy[i + 1] = energy[i] + frame[i] * frame[i];
  auto seg_energy = [&](Eigen::Index begin, Eigen::Index count) {
    return energy[begin + count] - energy[begin];
  };

  const Eigen::Index a_begin = len - corr_len;
  const double ea = seg_energy(a_begin, corr_len);
  if (ea <= 0.0) return 0.0;

  Vec rho = Vec::Zero(lag_max + 2);
  int best_lag = 0;
  double best = -2.0;
  for (int tau = lag_min - 1; tau <= lag_max; ++tau) {
    if (a_begin - tau < 0) continue;
    double dot = 0.0;
    const double* a = frame.data() + a_begin;
    const double* b = frame.data() + a_begin - tau;
    for (int i = 0; i < corr_len; ++i) dot += a[i] * b[i];
    const double eb = seg_energy(a_begin - tau, corr_len);
    const double denom = std::sqrt(ea * eb);
    rho[tau] = denom > 0.0 ? dot / denom : 0.0;
    if (tau >= lag_min && rho[tau] > best) {
      best = rho[tau];
      best_lag = tau;
    }
  }

  if (best <= config.voicing_threshold) return 0.0;

  double delta = 0.0;
  if (best_lag > lag_min && best_lag < lag_max) {
    const double ym = rho[best_lag - 1], y0 = rho[best_lag], yp = rho[best_lag + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (std::abs(denom) > 1e-12) delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
  }
  const double f0 = fs / (best_lag + delta);
  return std::clamp(f0, config.pitch_min_hz, config.pitch_max_hz);
}

Vec6 voicing_estimate(const Vec& frame, double f0, const AnalysisConfig& config,
                      const BandFilterBank& bank) {
  Vec6 v = Vec6::Zero();
  if (f0 <= 0.0) return v;

  const double lag0 = kSampleRate / f0;
  const int lag_max = static_cast<int>(std::ceil(kSampleRate / config.pitch_min_hz));
  const Eigen::Index len = frame.size();
  const int corr_len = static_cast<int>(len) - lag_max;
  if (corr_len < 16) return v;
  const Eigen::Index a_begin = len - corr_len;

  for (int b = 0; b < bank.bands(); ++b) {
    const Vec xb = bank.filter(b, frame);
    Vec energy(len + 1);
    energy[0] = 0.0;
    for (Eigen::Index i = 0; i < len; ++i) energy[i + 1] = energy[i] + xb[i] * xb[i];
    const double ea = energy[a_begin + corr_len] - energy[a_begin];
    if (ea <= 1e-20) continue;

    auto ncc_at = [&](int tau) {
      if (tau < 0 || a_begin - tau < 0) return 0.0;
      double dot = 0.0;
      const double* pa = xb.data() + a_begin;
      const double* pb = xb.data() + a_begin - tau;
      for (int i = 0; i < corr_len; ++i) dot += pa[i] * pb[i];
      const double eb = energy[a_begin - tau + corr_len] - energy[a_begin - tau];
      const double denom = std::sqrt(ea * eb);
      return denom > 0.0 ? dot / denom : 0.0;
    };

    // average the comb correlation over the period multiples that fit
    double sum = 0.0;
    int count = 0;
    for (int k = 1; k * lag0 <= lag_max; ++k) {
      const double lag = k * lag0;
      const int lo = static_cast<int>(std::floor(lag));
      const double frac = lag - lo;
      sum += (1.0 - frac) * ncc_at(lo) + frac * ncc_at(lo + 1);
      ++count;
    }
    if (count > 0) v[b] = std::clamp(sum / count, 0.0, 1.0);
  }
  return v;
}

std::vector<FrameParams> analyze(const AudioBuffer& audio, const AnalysisConfig& config) {
  const Mat frames = frame_signal(audio, config);
  const BandFilterBank bank(config.band_edges_hz);

  // Hann scaled to unit power so residual RMS tracks the frame RMS.
  const int lw = config.lpc_window_length;
  Vec window = hann_window(lw);
  window *= std::sqrt(static_cast<double>(lw) / window.squaredNorm());
  const int offset = (config.window_length - lw) / 2;

  std::vector<FrameParams> out(frames.cols());
  for (Eigen::Index t = 0; t < frames.cols(); ++t) {
    const Vec extent = frames.col(t);
    const Vec windowed = extent.segment(offset, lw).cwiseProduct(window);
    FrameParams& fp = out[t];
    std::tie(fp.lpc, fp.s) = lpc_analyze(windowed, config.lpc_order);
    fp.f0 = pitch_estimate(extent, config);
    fp.voicing = voicing_estimate(extent, fp.f0, config, bank);
  }
  return out;
}

}  // namespace nvsc
