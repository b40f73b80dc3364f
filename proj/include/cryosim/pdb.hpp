#pragma once
#include <string>
#include <string_view>
#include <vector>

#include "cryosim/vec3.hpp"

namespace cryosim {

struct Atom {
    std::string element;
    Vec3 position;          // Angstrom
    double confidence = 0;  // temperature-factor column, clamped to [0, 100]
    double vdw_radius = 0;  // Angstrom
};

struct AtomicModel {
    std::string id;
    std::vector<Atom> atoms;
    double r_max = 0; // max vdw radius, cached at parse time

    Box3 bounding_box() const;
    double bounding_radius() const; // from centroid
    Vec3 centroid() const;
};

// Van der Waals radius lookup; unknown symbols get the 1.5 A default.
double vdw_radius_for(std::string_view element);

// Fixed-column ATOM/HETATM records (PDB v3.3 columns: coords 31-54,
// temperature factor 61-66, element 77-78). Only the first MODEL is read;
// later models are skipped with a warning.
AtomicModel parse_atomic_model(std::string_view text, std::string id = "",
                               std::vector<std::string>* warnings = nullptr);
AtomicModel parse_atomic_model_file(const std::string& path, std::string id = "",
                                    std::vector<std::string>* warnings = nullptr);

} // namespace cryosim
