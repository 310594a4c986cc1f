#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "nvsc/rng.hpp"
#include "nvsc/types.hpp"

namespace nvsc {

// Discretized mixture of logistics over 16-bit sample bins. Bin q in
// [-32768, 32767] covers reals [q/32768 - delta/2, q/32768 + delta/2) with
// delta = 2/65536; edge bins absorb the tails. The log-scale parameter is
// expressed in bin widths (scale = delta * exp(log_scale)) and clamped at -7
// before use.

constexpr double kDmlBinWidth = 2.0 / 65536.0;
constexpr double kDmlLogScaleFloor = -7.0;
constexpr int kDmlBinMin = -32768;
constexpr int kDmlBinMax = 32767;

template <typename T>
struct DmlParams {
  VecX<T> logit_w;    // n_mix
  VecX<T> mean;       // n_mix, in the [-1, 1) sample domain
  VecX<T> log_scale;  // n_mix, in bin widths
};

namespace detail {

inline double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
inline double log_sigmoid(double x) { return -softplus(-x); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-component log bin mass plus the intermediates needed for the gradient.
template <typename T>
inline void dml_eval(const DmlParams<T>& dml, int bin, Eigen::ArrayXd& log_w,
                     Eigen::ArrayXd& log_p, Eigen::ArrayXd& a, Eigen::ArrayXd& b,
                     Eigen::ArrayXd& inv_s, double& total_log_p) {
  const int n = static_cast<int>(dml.logit_w.size());
  log_w.resize(n);
  log_p.resize(n);
  a.resize(n);
  b.resize(n);
  inv_s.resize(n);

  double max_logit = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < n; ++m) max_logit = std::max(max_logit, static_cast<double>(dml.logit_w[m]));
  double z = 0.0;
  for (int m = 0; m < n; ++m) z += std::exp(static_cast<double>(dml.logit_w[m]) - max_logit);
  const double log_z = max_logit + std::log(z);

  const double xc = bin / 32768.0;
  for (int m = 0; m < n; ++m) {
    log_w[m] = static_cast<double>(dml.logit_w[m]) - log_z;
    const double ls = std::max(static_cast<double>(dml.log_scale[m]), kDmlLogScaleFloor);
    const double s = kDmlBinWidth * std::exp(ls);
    inv_s[m] = 1.0 / s;
    const double centered = xc - static_cast<double>(dml.mean[m]);
    a[m] = (centered + 0.5 * kDmlBinWidth) * inv_s[m];
    b[m] = (centered - 0.5 * kDmlBinWidth) * inv_s[m];
    if (bin <= kDmlBinMin) {
      log_p[m] = log_sigmoid(a[m]);
    } else if (bin >= kDmlBinMax) {
      log_p[m] = log_sigmoid(-b[m]);
    } else {
      const double d = a[m] - b[m];  // = delta / s > 0
      log_p[m] = -b[m] + std::log1p(-std::exp(-d)) - softplus(-a[m]) - softplus(-b[m]);
    }
  }

  double max_term = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < n; ++m) max_term = std::max(max_term, log_w[m] + log_p[m]);
  double acc = 0.0;
  for (int m = 0; m < n; ++m) acc += std::exp(log_w[m] + log_p[m] - max_term);
  total_log_p = max_term + std::log(acc);
}

}  // namespace detail

// Negative log-likelihood (nats) of one 16-bit sample bin.
template <typename T>
T dml_nll(const DmlParams<T>& dml, int bin) {
  Eigen::ArrayXd log_w, log_p, a, b, inv_s;
  double total;
  detail::dml_eval(dml, bin, log_w, log_p, a, b, inv_s, total);
  return static_cast<T>(-total);
}

// Accumulates d(nll)/d(params) scaled by upstream into grad.
template <typename T>
void dml_nll_backward(const DmlParams<T>& dml, int bin, T upstream, DmlParams<T>& grad) {
  Eigen::ArrayXd log_w, log_p, a, b, inv_s;
  double total;
  detail::dml_eval(dml, bin, log_w, log_p, a, b, inv_s, total);

  const int n = static_cast<int>(dml.logit_w.size());
  const double up = static_cast<double>(upstream);
  for (int m = 0; m < n; ++m) {
    const double w = std::exp(log_w[m]);
    const double resp = std::exp(log_w[m] + log_p[m] - total);
    grad.logit_w[m] += static_cast<T>(up * (w - resp));

    double dlp_da = 0.0, dlp_db = 0.0;
    if (bin <= kDmlBinMin) {
      dlp_da = detail::sigmoid(-a[m]);
    } else if (bin >= kDmlBinMax) {
      dlp_db = -detail::sigmoid(b[m]);
    } else {
      // d log p / d a = sigmoid'(a) / p, computed in log space
      dlp_da = std::exp(-detail::softplus(a[m]) - detail::softplus(-a[m]) - log_p[m]);
      dlp_db = -std::exp(-detail::softplus(b[m]) - detail::softplus(-b[m]) - log_p[m]);
    }

    const double g = up * -resp;  // d nll / d log_p_m = -resp
    grad.mean[m] += static_cast<T>(g * (dlp_da + dlp_db) * -inv_s[m]);
    if (static_cast<double>(dml.log_scale[m]) > kDmlLogScaleFloor)
      grad.log_scale[m] += static_cast<T>(g * -(a[m] * dlp_da + b[m] * dlp_db));
  }
}

// Component draw from the mixture weights, logistic variate by inverse CDF,
// rounded to the nearest bin and clamped. Deterministic given the rng state.
template <typename T>
int dml_sample(const DmlParams<T>& dml, Rng& rng) {
  const int n = static_cast<int>(dml.logit_w.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < n; ++m) max_logit = std::max(max_logit, static_cast<double>(dml.logit_w[m]));
  double z = 0.0;
  for (int m = 0; m < n; ++m) z += std::exp(static_cast<double>(dml.logit_w[m]) - max_logit);

  const double u1 = rng.uniform() * z;
  double acc = 0.0;
  int pick = n - 1;
  for (int m = 0; m < n; ++m) {
    acc += std::exp(static_cast<double>(dml.logit_w[m]) - max_logit);
    if (u1 < acc) {
      pick = m;
      break;
    }
  }

  const double ls = std::max(static_cast<double>(dml.log_scale[pick]), kDmlLogScaleFloor);
  const double s = kDmlBinWidth * std::exp(ls);
  const double u2 = rng.uniform_open();
  const double x = static_cast<double>(dml.mean[pick]) + s * std::log(u2 / (1.0 - u2));
  const long bin = std::lround(x * 32768.0);
  return static_cast<int>(std::clamp(bin, static_cast<long>(kDmlBinMin), static_cast<long>(kDmlBinMax)));
}

}  // namespace nvsc
