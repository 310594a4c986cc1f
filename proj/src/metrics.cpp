#include "nvsc/metrics.hpp"

#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <filesystem>

#include "nvsc/bitstream.hpp"
#include "nvsc/signal_analysis.hpp"

namespace nvsc {

namespace {

// |A(e^{jw})|^2 with A(z) = 1 + sum a_i z^-i
double a_mag2(const Vec& lpc, double omega) {
  std::complex<double> acc(1.0, 0.0);
  for (Eigen::Index i = 0; i < lpc.size(); ++i) {
    const double phi = -omega * static_cast<double>(i + 1);
    acc += lpc[i] * std::complex<double>(std::cos(phi), std::sin(phi));
  }
  return std::norm(acc);
}

std::string format_record(const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

}  // namespace

double spectral_distortion(const Vec& lpc_a, const Vec& lpc_b, int grid) {
  if (!lpc_is_stable(lpc_a) || !lpc_is_stable(lpc_b))
    throw NumericalError("spectral distortion of an unstable filter");
  double acc = 0.0;
  for (int k = 0; k < grid; ++k) {
    const double omega = M_PI * k / grid;
    // 10 log10(1/|A_a|^2) - 10 log10(1/|A_b|^2)
    const double diff = 10.0 * std::log10(a_mag2(lpc_b, omega) / a_mag2(lpc_a, omega));
    acc += diff * diff;
  }
  return std::sqrt(acc / grid);
}

DistortionReport distortion_report(const std::vector<std::pair<Vec, Vec>>& lpc_pairs) {
  DistortionReport report;
  report.per_frame_db.reserve(lpc_pairs.size());
  int n2 = 0, n4 = 0;
  double sum = 0.0;
  for (const auto& [a, b] : lpc_pairs) {
    const double sd = spectral_distortion(a, b);
    report.per_frame_db.push_back(sd);
    sum += sd;
    if (sd > 2.0) ++n2;
    if (sd > 4.0) ++n4;
  }
  const double n = static_cast<double>(std::max<size_t>(lpc_pairs.size(), 1));
  report.mean_db = sum / n;
  report.outliers_2db = n2 / n;
  report.outliers_4db = n4 / n;
  return report;
}

std::string DistortionReport::to_record() const {
  return format_record("SD frames=%zu mean_db=%.6f outliers_2db=%.6f outliers_4db=%.6f",
                       per_frame_db.size(), mean_db, outliers_2db, outliers_4db);
}

double measure_bitrate(const std::string& nvsc_path) {
  const StreamInfo info = peek_stream(nvsc_path);
  if (info.frame_count == 0) return 0.0;
  const double payload_bytes = static_cast<double>(info.payload_bytes);
  const double seconds = info.frame_count / 100.0;
  return 8.0 * payload_bytes / seconds / 1000.0;
}

std::string bitrate_record(const std::string& nvsc_path) {
  const StreamInfo info = peek_stream(nvsc_path);
  const double kbps = measure_bitrate(nvsc_path);
  return format_record("BITRATE kbps=%.6f frames=%u payload_bytes=%llu op=%s", kbps,
                       info.frame_count, static_cast<unsigned long long>(info.payload_bytes),
                       op_point_name(info.op).c_str());
}

double snr(const Vec& reference, const Vec& test) {
  if (reference.size() != test.size()) throw std::invalid_argument("snr: length mismatch");
  const double ref_energy = reference.squaredNorm();
  if (ref_energy <= 0.0) throw std::invalid_argument("snr: zero reference energy");
  const double err_energy = (reference - test).squaredNorm();
  if (err_energy <= 0.0) return 120.0;
  return std::min(10.0 * std::log10(ref_energy / err_energy), 120.0);
}

std::string snr_record(const Vec& reference, const Vec& test) {
  return format_record("SNR db=%.6f samples=%lld", snr(reference, test),
                       static_cast<long long>(reference.size()));
}

}  // namespace nvsc
