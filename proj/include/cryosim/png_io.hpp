#pragma once
#include <string>

#include "cryosim/volume.hpp"

namespace cryosim {

// 16-bit grayscale preview with linear min-max normalization.
void write_png16(const std::string& path, const Micrograph& m);

} // namespace cryosim
