#include "cryosim/density.hpp"

#include <algorithm>
#include <cmath>

#include "cryosim/error.hpp"
#include "cryosim/quat.hpp"

namespace cryosim {

float DensityVolume::max_value() const {
    float m = 0.0f;
    for (float v : data) m = std::max(m, v);
    return m;
}

double DensityVolume::sample_trilinear(const Vec3& p) const {
    double fx = (p.x - origin.x) / voxel_size;
    double fy = (p.y - origin.y) / voxel_size;
    double fz = (p.z - origin.z) / voxel_size;
    int i0 = static_cast<int>(std::floor(fx));
    int j0 = static_cast<int>(std::floor(fy));
    int k0 = static_cast<int>(std::floor(fz));
    double tx = fx - i0, ty = fy - j0, tz = fz - k0;

    double acc = 0.0;
    for (int dk = 0; dk <= 1; ++dk)
        for (int dj = 0; dj <= 1; ++dj)
            for (int di = 0; di <= 1; ++di) {
                int i = i0 + di, j = j0 + dj, k = k0 + dk;
                if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) continue;
                double w = (di ? tx : 1 - tx) * (dj ? ty : 1 - ty) * (dk ? tz : 1 - tz);
                acc += w * at(i, j, k);
            }
    return acc;
}

double mean_of(const std::vector<float>& v) {
    double s = 0;
    for (float x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
}

double variance_of(const std::vector<float>& v) {
    if (v.empty()) return 0.0;
    double m = mean_of(v);
    double s = 0;
    for (float x : v) s += (x - m) * (x - m);
    return s / v.size();
}

namespace {

void deposit_atoms(DensityVolume& vol, const AtomicModel& model, double spacing) {
    for (const Atom& a : model.atoms) {
        double sigma = a.vdw_radius / (2.0 * spacing); // voxels
        double cutoff = 4.0 * sigma;
        double fx = (a.position.x - vol.origin.x) / spacing;
        double fy = (a.position.y - vol.origin.y) / spacing;
        double fz = (a.position.z - vol.origin.z) / spacing;
        int i0 = std::max(0, static_cast<int>(std::ceil(fx - cutoff)));
        int i1 = std::min(vol.nx - 1, static_cast<int>(std::floor(fx + cutoff)));
        int j0 = std::max(0, static_cast<int>(std::ceil(fy - cutoff)));
        int j1 = std::min(vol.ny - 1, static_cast<int>(std::floor(fy + cutoff)));
        int k0 = std::max(0, static_cast<int>(std::ceil(fz - cutoff)));
        int k1 = std::min(vol.nz - 1, static_cast<int>(std::floor(fz + cutoff)));
        double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        double cut2 = cutoff * cutoff;
        for (int k = k0; k <= k1; ++k) {
            double dz = k - fz;
            for (int j = j0; j <= j1; ++j) {
                double dy = j - fy;
                for (int i = i0; i <= i1; ++i) {
                    double dx = i - fx;
                    double r2 = dx * dx + dy * dy + dz * dz;
                    if (r2 > cut2) continue;
                    vol.at(i, j, k) += static_cast<float>(std::exp(-r2 * inv2s2));
                }
            }
        }
    }
}

DensityVolume make_grid(const Box3& box, double spacing) {
    Vec3 size = box.size();
    int nx = static_cast<int>(std::ceil(size.x / spacing)) + 1;
    int ny = static_cast<int>(std::ceil(size.y / spacing)) + 1;
    int nz = static_cast<int>(std::ceil(size.z / spacing)) + 1;
    return DensityVolume(nx, ny, nz, spacing, box.lo);
}

} // namespace

DensityVolume voxelize(const AtomicModel& model, double resolution) {
    if (!(resolution > 0)) fail_data("resolution must be > 0");
    if (model.atoms.empty()) fail_data("cannot voxelize an empty model");
    for (const Atom& a : model.atoms)
        if (!a.position.finite()) fail_data("non-finite atom coordinates");

    double spacing = resolution / 2.0;
    double margin = std::max(3.0 * model.r_max, 2.0 * resolution);
    Box3 box = model.bounding_box().expanded(margin);
    DensityVolume vol = make_grid(box, spacing);
    deposit_atoms(vol, model, spacing);
    return vol;
}

DensityVolume voxelize(const AtomicModel& model, double resolution, const Box3& box) {
    if (!(resolution > 0)) fail_data("resolution must be > 0");
    if (model.atoms.empty()) fail_data("cannot voxelize an empty model");
    for (const Atom& a : model.atoms)
        if (!a.position.finite()) fail_data("non-finite atom coordinates");

    double spacing = resolution / 2.0;
    Box3 current = box;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::size_t outside = 0;
        for (const Atom& a : model.atoms)
            if (!current.contains(a.position)) ++outside;
        if (outside > model.atoms.size() / 10) {
            if (attempt == 1)
                fail_data("boundary violations persist after one box expansion");
            current = current.expanded(4.0 * model.r_max);
            continue;
        }
        DensityVolume vol = make_grid(current, spacing);
        deposit_atoms(vol, model, spacing);
        return vol;
    }
    fail_internal("unreachable voxelize state");
}

namespace {

// separable blur, kernel normalized to unit sum and truncated at 4 sigma
std::vector<double> gaussian_kernel(double sigma) {
    int half = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> k(2 * half + 1);
    double sum = 0;
    for (int i = -half; i <= half; ++i) {
        double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + half] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

void blur_axis(std::vector<float>& data, int nx, int ny, int nz, int axis,
               const std::vector<double>& kernel) {
    int half = static_cast<int>(kernel.size()) / 2;
    int dims[3] = {nx, ny, nz};
    std::size_t strides[3] = {1, static_cast<std::size_t>(nx),
                              static_cast<std::size_t>(nx) * ny};
    int n = dims[axis];
    std::size_t stride = strides[axis];
    int u_dim = axis == 0 ? ny : nx;
    int v_dim = axis == 2 ? ny : nz;
    std::size_t u_stride = axis == 0 ? strides[1] : strides[0];
    std::size_t v_stride = axis == 2 ? strides[1] : strides[2];

    std::vector<float> line(n);
    for (int v = 0; v < v_dim; ++v)
        for (int u = 0; u < u_dim; ++u) {
            std::size_t base = u * u_stride + v * v_stride;
            for (int i = 0; i < n; ++i) line[i] = data[base + i * stride];
            for (int i = 0; i < n; ++i) {
                double acc = 0;
                int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
                for (int j = lo; j <= hi; ++j) acc += kernel[j - i + half] * line[j];
                data[base + i * stride] = static_cast<float>(acc);
            }
        }
}

} // namespace

DensityVolume smooth_and_threshold(const DensityVolume& vol, double resolution) {
    for (float v : vol.data)
        if (!std::isfinite(v)) fail_data("non-finite volume sample");

    DensityVolume out = vol;
    double sigma = resolution / (2.0 * vol.voxel_size); // voxels
    if (sigma > 0 && !out.data.empty()) {
        auto kernel = gaussian_kernel(sigma);
        blur_axis(out.data, out.nx, out.ny, out.nz, 0, kernel);
        blur_axis(out.data, out.nx, out.ny, out.nz, 1, kernel);
        blur_axis(out.data, out.nx, out.ny, out.nz, 2, kernel);
    }
    float cut = 0.005f * out.max_value();
    for (float& v : out.data)
        if (v < cut) v = 0.0f;
    return out;
}

AtomicModel perturb_conformer(const AtomicModel& model, const ConformerParams& params,
                              RandomStream& rng) {
    AtomicModel out = model;

    // shared rigid-body move per domain, about the domain centroid
    for (const auto& [begin, end] : params.domains) {
        int b = std::clamp(begin, 0, static_cast<int>(out.atoms.size()));
        int e = std::clamp(end, b, static_cast<int>(out.atoms.size()));
        Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
        double angle = rng.normal(0.0, params.domain_rot_sigma_deg * M_PI / 180.0);
        Vec3 shift{rng.normal(0.0, params.domain_trans_sigma),
                   rng.normal(0.0, params.domain_trans_sigma),
                   rng.normal(0.0, params.domain_trans_sigma)};
        if (b == e) continue;
        Vec3 centroid;
        for (int i = b; i < e; ++i) centroid += out.atoms[i].position;
        centroid = centroid / static_cast<double>(e - b);
        Quaternion q = Quaternion::from_axis_angle(axis, angle);
        for (int i = b; i < e; ++i)
            out.atoms[i].position = centroid + q.rotate(out.atoms[i].position - centroid) + shift;
    }

    for (Atom& a : out.atoms) {
        double amp;
        if (a.confidence > 90.0) amp = params.amp_static;
        else if (a.confidence > 70.0) amp = params.amp_constrained;
        else if (a.confidence > 50.0) amp = params.amp_enhanced;
        else amp = params.amp_flexible;
        // always consume three draws so streams stay aligned across strata
        Vec3 d{rng.normal(), rng.normal(), rng.normal()};
        a.position += d * amp;
    }
    return out;
}

} // namespace cryosim
