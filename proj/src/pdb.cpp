#include "cryosim/pdb.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cryosim/error.hpp"

namespace cryosim {

Box3 AtomicModel::bounding_box() const {
    Box3 b{atoms.front().position, atoms.front().position};
    for (const Atom& a : atoms) {
        b.lo = min(b.lo, a.position);
        b.hi = max(b.hi, a.position);
    }
    return b;
}

Vec3 AtomicModel::centroid() const {
    Vec3 c;
    for (const Atom& a : atoms) c += a.position;
    return c / static_cast<double>(atoms.size());
}

double AtomicModel::bounding_radius() const {
    Vec3 c = centroid();
    double r2 = 0;
    for (const Atom& a : atoms) r2 = std::max(r2, (a.position - c).norm2());
    return std::sqrt(r2);
}

double vdw_radius_for(std::string_view element) {
    // Established crystallographic values; 1.5 A fallback for anything else.
    std::string e;
    for (char c : element)
        if (!std::isspace(static_cast<unsigned char>(c)))
            e.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (e == "C") return 1.70;
    if (e == "N") return 1.55;
    if (e == "O") return 1.52;
    if (e == "S") return 1.80;
    if (e == "H") return 1.20;
    if (e == "P") return 1.80;
    return 1.5;
}

namespace {

std::string_view field(std::string_view line, std::size_t col1, std::size_t col2) {
    // 1-based inclusive PDB columns
    if (line.size() < col1) return {};
    return line.substr(col1 - 1, std::min(col2, line.size()) - (col1 - 1));
}

bool parse_double_field(std::string_view f, double& out) {
    std::size_t b = f.find_first_not_of(" \t");
    if (b == std::string_view::npos) return false;
    std::size_t e = f.find_last_not_of(" \t\r");
    f = f.substr(b, e - b + 1);
    auto res = std::from_chars(f.data(), f.data() + f.size(), out);
    return res.ec == std::errc{} && res.ptr == f.data() + f.size() && std::isfinite(out);
}

std::string trimmed(std::string_view f) {
    std::size_t b = f.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    std::size_t e = f.find_last_not_of(" \t\r");
    return std::string(f.substr(b, e - b + 1));
}

} // namespace

AtomicModel parse_atomic_model(std::string_view text, std::string id,
                               std::vector<std::string>* warnings) {
    AtomicModel model;
    model.id = std::move(id);

    int line_no = 0;
    int model_count = 0;
    bool in_skipped_model = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (line.empty()) continue;

        std::string_view rec = field(line, 1, 6);
        if (rec.substr(0, 5) == "MODEL") {
            ++model_count;
            if (model_count > 1) {
                in_skipped_model = true;
                if (warnings)
                    warnings->push_back("line " + std::to_string(line_no) +
                                        ": extra MODEL ignored (only the first model is read)");
            }
            continue;
        }
        if (rec.substr(0, 6) == "ENDMDL") continue;
        if (in_skipped_model) continue;
        if (rec != "ATOM  " && rec != "HETATM") continue;

        Atom atom;
        double x, y, z;
        if (!parse_double_field(field(line, 31, 38), x) ||
            !parse_double_field(field(line, 39, 46), y) ||
            !parse_double_field(field(line, 47, 54), z)) {
            fail_data("line " + std::to_string(line_no) + ": unparseable coordinate field");
        }
        atom.position = {x, y, z};

        double temp = 0.0;
        if (!parse_double_field(field(line, 61, 66), temp)) temp = 0.0;
        atom.confidence = std::clamp(temp, 0.0, 100.0);

        atom.element = trimmed(field(line, 77, 78));
        atom.vdw_radius = vdw_radius_for(atom.element);
        model.atoms.push_back(std::move(atom));
    }

    if (model.atoms.empty()) fail_data("no ATOM/HETATM records found");

    model.r_max = 0;
    for (const Atom& a : model.atoms) model.r_max = std::max(model.r_max, a.vdw_radius);
    return model;
}

AtomicModel parse_atomic_model_file(const std::string& path, std::string id,
                                    std::vector<std::string>* warnings) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("cannot open coordinate file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    if (id.empty()) id = path;
    return parse_atomic_model(ss.str(), std::move(id), warnings);
}

} // namespace cryosim
