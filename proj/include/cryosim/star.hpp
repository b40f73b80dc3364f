#pragma once
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cryosim {

struct PickRecord {
    double x = 0, y = 0;                         // pixels
    std::optional<std::array<double, 3>> euler;  // (rot, tilt, psi) degrees
    double confidence = 1.0;                     // [0, 1]
};

// STAR subset: one data_ block, one loop_, labels _rlnCoordinateX/Y,
// optional _rlnAngleRot/Tilt/Psi and _rlnAutopickFigureOfMerit.
// Row order is preserved.
std::vector<PickRecord> parse_pick_table(std::string_view text);
std::vector<PickRecord> parse_pick_table_file(const std::string& path);

} // namespace cryosim
