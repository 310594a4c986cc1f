#pragma once

#include <string>

#include "nvsc/parameter_coding.hpp"

namespace nvsc {

// .nvcb codebook container: named sections with little-endian 64-bit floats
// and a CRC32 checksum. Sections: "gmm.<op>" per trained operating point,
// "vq.voicing", "cond.standardization".
constexpr char kCodebookMagic[4] = {'N', 'V', 'C', 'B'};
constexpr uint8_t kCodebookVersion = 1;

void write_codebooks(const CodebookSet& books, const std::string& path);
CodebookSet read_codebooks(const std::string& path);

}  // namespace nvsc
