#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nvsc {

template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VecX<double>;
using Mat = MatX<double>;
using VecI = Eigen::VectorXi;
using Vec6 = Eigen::Matrix<double, 6, 1>;

constexpr int kSampleRate = 16000;
constexpr int kFrameLength = 160;  // 10 ms at 16 kHz
constexpr int kVoicingBands = 6;

// Data/format problems (bad WAV, bad bitstream, bad container). Exit code 3.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures (unstable filter, diverged training). Exit code 4.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nvsc
