#pragma once

#include <string>
#include <vector>

#include "nvsc/types.hpp"

namespace nvsc {

struct DistortionReport {
  std::vector<double> per_frame_db;
  double mean_db = 0.0;
  double outliers_2db = 0.0;  // fraction of frames above 2 dB
  double outliers_4db = 0.0;
  std::string to_record() const;  // "SD mean_db=... frames=... ..."
};

// RMS log-spectral difference over a uniform frequency grid, in dB. The gain
// convention is excluded: only the A(z) coefficients enter.
double spectral_distortion(const Vec& lpc_a, const Vec& lpc_b, int grid = 512);

DistortionReport distortion_report(const std::vector<std::pair<Vec, Vec>>& lpc_pairs);

// 8 * payload bytes / duration (frames / 100 s), in kb/s.
double measure_bitrate(const std::string& nvsc_path);
std::string bitrate_record(const std::string& nvsc_path);

// 10 log10(sum ref^2 / sum (ref-test)^2), capped at 120 dB.
double snr(const Vec& reference, const Vec& test);
std::string snr_record(const Vec& reference, const Vec& test);

}  // namespace nvsc
