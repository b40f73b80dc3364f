#include "cryosim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cryosim/density.hpp"
#include "cryosim/error.hpp"
#include "cryosim/ice.hpp"
#include "cryosim/octree.hpp"

namespace cryosim {

Quaternion euler_to_quaternion(double alpha_deg, double beta_deg, double gamma_deg) {
    if (!std::isfinite(alpha_deg) || !std::isfinite(beta_deg) || !std::isfinite(gamma_deg))
        fail_data("non-finite Euler angles");
    auto rad = [](double d) { return d * M_PI / 180.0; };
    Quaternion qa = Quaternion::from_axis_angle({0, 0, 1}, rad(alpha_deg));
    Quaternion qb = Quaternion::from_axis_angle({0, 1, 0}, rad(beta_deg));
    Quaternion qg = Quaternion::from_axis_angle({0, 0, 1}, rad(gamma_deg));
    Quaternion q = qa * qb * qg;
    q.renormalize();
    return q.canonicalized();
}

std::vector<Placement> import_experimental_poses(const std::vector<PickRecord>& picks,
                                                 double pixel_size, const Vec3& volume_origin,
                                                 double default_z,
                                                 const std::string& structure_id,
                                                 double radius) {
    if (!(pixel_size > 0)) fail_data("pixel size must be > 0");
    std::vector<Placement> out;
    out.reserve(picks.size());
    for (const PickRecord& p : picks) {
        Placement pl;
        pl.structure_id = structure_id;
        pl.T = Vec3{p.x * pixel_size, p.y * pixel_size, default_z} + volume_origin;
        pl.q = p.euler ? euler_to_quaternion((*p.euler)[0], (*p.euler)[1], (*p.euler)[2])
                       : Quaternion::identity();
        pl.radius = radius;
        pl.source = PlacementSource::experimental;
        pl.confidence = p.confidence;
        out.push_back(std::move(pl));
    }
    return out;
}

namespace {

// rotation taking +z to direction d, no in-plane spin constraint
Quaternion align_z_to(const Vec3& d) {
    Vec3 z{0, 0, 1};
    double c = z.dot(d);
    if (c > 1.0 - 1e-15) return Quaternion::identity();
    if (c < -1.0 + 1e-15) return Quaternion::from_axis_angle({1, 0, 0}, M_PI);
    Vec3 axis = z.cross(d);
    return Quaternion::from_axis_angle(axis, std::acos(std::clamp(c, -1.0, 1.0)));
}

Vec3 sample_vmf(const Vec3& mu, double kappa, RandomStream& rng) {
    // inversion sampling of cos(theta) about +z, then frame rotation to mu
    double xi = rng.uniform_open();
    double w = 1.0 + std::log(xi + (1.0 - xi) * std::exp(-2.0 * kappa)) / kappa;
    w = std::clamp(w, -1.0, 1.0);
    double phi = rng.uniform(0.0, 2.0 * M_PI);
    double s = std::sqrt(std::max(0.0, 1.0 - w * w));
    Vec3 local{s * std::cos(phi), s * std::sin(phi), w};
    return align_z_to(mu.normalized()).rotate(local);
}

} // namespace

Quaternion sample_orientation(const OrientationParams& params, RandomStream& rng) {
    using Mode = OrientationParams::Mode;
    switch (params.mode) {
    case Mode::uniform: {
        // normalized 4D Gaussian is Haar-uniform on SO(3)
        Quaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        double n = q.norm();
        if (n < 1e-12) return Quaternion::identity();
        return Quaternion{q.w / n, q.x / n, q.y / n, q.z / n}.canonicalized();
    }
    case Mode::preferred: {
        if (!(params.kappa > 0)) fail_data("kappa must be > 0");
        Vec3 d = sample_vmf(params.mu, params.kappa, rng);
        double spin = rng.uniform(0.0, 2.0 * M_PI);
        Quaternion q = align_z_to(d) * Quaternion::from_axis_angle({0, 0, 1}, spin);
        q.renormalize();
        return q.canonicalized();
    }
    case Mode::limited_tilt: {
        if (!(params.theta_max > 0 && params.theta_max <= M_PI))
            fail_data("theta_max must be in (0, pi]");
        double sigma = params.theta_max / 2.0;
        double tilt;
        do {
            tilt = std::abs(rng.normal(0.0, sigma));
        } while (tilt > params.theta_max);
        double azimuth = rng.uniform(0.0, 2.0 * M_PI);
        double spin = rng.uniform(0.0, 2.0 * M_PI);
        Quaternion q = Quaternion::from_axis_angle({0, 0, 1}, azimuth) *
                       Quaternion::from_axis_angle({0, 1, 0}, tilt) *
                       Quaternion::from_axis_angle({0, 0, 1}, spin);
        q.renormalize();
        return q.canonicalized();
    }
    }
    fail_internal("unknown orientation mode");
}

double collision_floor(double radius, double overlap_threshold) {
    return 2.0 * radius * (1.0 - overlap_threshold);
}

double grid_spacing(double radius, double overlap_threshold) {
    return 2.0 * radius * (1.0 - overlap_threshold / 2.0);
}

namespace {

// incremental collision set: octree over settled placements + linear tail;
// pairwise floor is (r_new + r_item)(1 - ov), raised to extra_floor when set
class CollisionSet {
public:
    CollisionSet(const Box3& bounds, const ScaleParams& scale, double overlap)
        : bounds_(bounds), scale_(scale), overlap_(overlap) {}

    bool collides(const Vec3& p, double r_new, double extra_floor) const {
        auto violates = [&](const Vec3& q, double r_item) {
            double floor_d = std::max((r_new + r_item) * (1.0 - overlap_), extra_floor);
            return (p - q).norm() < floor_d;
        };
        if (tree_) {
            double qr = std::max(r_new * (1.0 - overlap_), extra_floor);
            for (int id : tree_->query_near(p, qr))
                if (violates(points_[id], radii_[id])) return true;
        }
        for (std::size_t t : tail_)
            if (violates(points_[t], radii_[t])) return true;
        return false;
    }

    void add(const Vec3& p, double r) {
        points_.push_back(p);
        radii_.push_back(r);
        tail_.push_back(points_.size() - 1);
        if (tail_.size() >= 64) rebuild();
    }

private:
    void rebuild() {
        std::vector<SphereItem> items;
        items.reserve(points_.size());
        for (std::size_t i = 0; i < points_.size(); ++i)
            items.push_back({static_cast<int>(i), points_[i], radii_[i] * (1.0 - overlap_)});
        tree_.emplace(std::move(items), bounds_, scale_);
        tail_.clear();
    }

    Box3 bounds_;
    ScaleParams scale_;
    double overlap_;
    std::optional<Octree> tree_;
    std::vector<Vec3> points_;
    std::vector<double> radii_;
    std::vector<std::size_t> tail_;
};

} // namespace

std::vector<Placement> place_particles(int count, double radius,
                                       const PlaceStrategy& strategy, const ClassRule& rule,
                                       const ScaleParams& scale, const Vec3& extents,
                                       RandomStream& rng,
                                       const std::vector<Placement>& existing) {
    if (!(radius > 0)) fail_data("particle radius must be > 0");
    if (!(extents.x > 0 && extents.y > 0 && extents.z > 0))
        fail_data("scene extents must be positive");

    double min_dist = collision_floor(radius, scale.overlap_threshold);
    double extra_floor = rule.kind == ClassRule::Kind::separated ? rule.min_separation : 0.0;
    min_dist = std::max(min_dist, extra_floor);

    // sampling window keeps particles inside the extents
    Vec3 half = extents * 0.5;
    Vec3 lo = {-half.x + radius, -half.y + radius, -half.z + radius};
    Vec3 hi = {half.x - radius, half.y - radius, half.z - radius};
    for (int a = 0; a < 3; ++a)
        if ((a == 0 ? lo.x > hi.x : a == 1 ? lo.y > hi.y : lo.z > hi.z)) {
            // axis thinner than the particle: pin to the mid-plane
            if (a == 0) lo.x = hi.x = 0;
            else if (a == 1) lo.y = hi.y = 0;
            else lo.z = hi.z = 0;
        }
    Box3 window{lo, hi};
    Box3 scene_box{-half, half};

    int target = static_cast<int>(std::lround(count * scale.placement_density));
    if (count > 0) target = std::max(1, target);
    int budget = std::max(1, static_cast<int>(std::lround(scale.collision_strictness * 1000.0)));

    // grid sites, row-major, centered on the window
    std::vector<Vec3> sites;
    double spacing = grid_spacing(radius, scale.overlap_threshold);
    if (strategy.kind == PlaceStrategy::Kind::grid) {
        Vec3 span = window.size();
        int nx = std::max(1, static_cast<int>(std::floor(span.x / spacing)) + 1);
        int ny = std::max(1, static_cast<int>(std::floor(span.y / spacing)) + 1);
        int nz = std::max(1, static_cast<int>(std::floor(span.z / spacing)) + 1);
        Vec3 start = window.center() - Vec3{(nx - 1) * spacing, (ny - 1) * spacing,
                                            (nz - 1) * spacing} * 0.5;
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i)
                    sites.push_back(start + Vec3{i * spacing, j * spacing, k * spacing});
        target = std::min(target, static_cast<int>(sites.size()));
    }

    // gaussian mixture centers for the cluster strategy
    Vec3 primary_center = {0, 0, 0};
    Vec3 secondary_center;
    double sigma_primary = std::min({extents.x, extents.y, extents.z}) / 6.0;
    double sigma_secondary = 0.7 * sigma_primary;
    if (strategy.kind == PlaceStrategy::Kind::cluster) {
        secondary_center = {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y),
                            rng.uniform(lo.z, hi.z)};
    }

    Box3 occupied_bounds = scene_box.expanded(radius);
    for (const Placement& e : existing) {
        occupied_bounds.lo = min(occupied_bounds.lo, e.T - Vec3{1, 1, 1});
        occupied_bounds.hi = max(occupied_bounds.hi, e.T + Vec3{1, 1, 1});
    }
    CollisionSet occupied(occupied_bounds, scale, scale.overlap_threshold);
    for (const Placement& e : existing) occupied.add(e.T, e.radius);

    std::vector<Placement> placed;
    placed.reserve(target);

    auto clamp_window = [&](Vec3 p) {
        return Vec3{std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y),
                    std::clamp(p.z, lo.z, hi.z)};
    };

    // area-weighted face table for surface sampling
    std::vector<double> face_cdf;
    double face_cdf_total = 0;
    if (strategy.kind == PlaceStrategy::Kind::interface) {
        if (!strategy.surface || strategy.surface->empty())
            fail_data("interface strategy requires a surface mesh");
        for (std::size_t f = 0; f < strategy.surface->faces.size(); ++f) {
            face_cdf_total += strategy.surface->face_area(static_cast<int>(f));
            face_cdf.push_back(face_cdf_total);
        }
        if (!(face_cdf_total > 0)) fail_data("interface surface has zero area");
    }

    auto candidate = [&](int slot) -> Vec3 {
        switch (strategy.kind) {
        case PlaceStrategy::Kind::uniform:
            return {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
        case PlaceStrategy::Kind::cluster: {
            bool primary = rng.uniform() < 0.7;
            Vec3 c = primary ? primary_center : secondary_center;
            double sg = primary ? sigma_primary : sigma_secondary;
            return clamp_window(c + Vec3{rng.normal(0.0, sg), rng.normal(0.0, sg),
                                         rng.normal(0.0, sg)});
        }
        case PlaceStrategy::Kind::grid: {
            const Vec3& site = sites[slot];
            double jb = grid_jitter_bound(spacing);
            return clamp_window(site + Vec3{rng.uniform(-jb, jb), rng.uniform(-jb, jb),
                                            rng.uniform(-jb, jb)});
        }
        case PlaceStrategy::Kind::interface: {
            const TriangleMesh& m = *strategy.surface;
            double u = rng.uniform() * face_cdf_total;
            auto it = std::upper_bound(face_cdf.begin(), face_cdf.end(), u);
            int f = static_cast<int>(std::min<std::size_t>(face_cdf.size() - 1,
                                                           it - face_cdf.begin()));
            const auto& t = m.faces[f];
            double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
            Vec3 p = m.vertices[t[0]] * (1 - r1) + m.vertices[t[1]] * (r1 * (1 - r2)) +
                     m.vertices[t[2]] * (r1 * r2);
            Vec3 n = m.face_normal(f);
            return clamp_window(p + n * rng.uniform(-strategy.tolerance, strategy.tolerance));
        }
        }
        fail_internal("unknown placement strategy");
    };

    for (int slot = 0; slot < target; ++slot) {
        bool ok = false;
        for (int attempt = 0; attempt < budget && !ok; ++attempt) {
            Vec3 p = candidate(slot);

            // class-specific adjustments
            if (rule.kind == ClassRule::Kind::cluster && !placed.empty()) {
                // resample the distance to an anchor particle toward the
                // measured inter-particle target spacing
                int anchor = static_cast<int>(rng.uniform() * placed.size());
                anchor = std::min(anchor, static_cast<int>(placed.size()) - 1);
                Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
                if (dir.norm2() == 0) dir = {1, 0, 0};
                dir = dir.normalized();
                double dist = std::max(min_dist,
                                       rng.normal(rule.cluster_spacing, rule.cluster_spacing / 5.0));
                p = clamp_window(placed[anchor].T + dir * dist);
                // reject fold-backs that would undercut the target spacing
                double nearest = 1e300;
                for (const Placement& q : placed)
                    nearest = std::min(nearest, (p - q.T).norm());
                if (nearest < 0.7 * rule.cluster_spacing) continue;
            }
            if (rule.kind == ClassRule::Kind::confined) {
                if (!rule.confinement || rule.confinement->empty())
                    fail_data("confined class rule requires a confinement mesh");
                if (!point_in_mesh(*rule.confinement, p)) continue;
            }
            if (strategy.kind == PlaceStrategy::Kind::interface &&
                distance_to_surface(*strategy.surface, p) > strategy.tolerance) continue;

            if (occupied.collides(p, radius, extra_floor)) continue;

            Placement pl;
            pl.T = p;
            pl.radius = radius;
            pl.source = PlacementSource::synthetic;
            placed.push_back(std::move(pl));
            occupied.add(p, radius);
            ok = true;
        }
    }

    if (target > 0 && static_cast<int>(placed.size()) * 2 < target)
        fail_data("placement capacity exceeded: placed " + std::to_string(placed.size()) +
                  " of " + std::to_string(target) + " requested particles");
    return placed;
}

std::vector<Placement> blend_placements(const std::vector<Placement>& experimental,
                                        const std::vector<Placement>& synthetic,
                                        double w_exp, RandomStream& rng, int count,
                                        double overlap_threshold) {
    if (w_exp < 0 || w_exp > 1) fail_data("w_exp must be in [0, 1]");
    if (experimental.empty() && synthetic.empty())
        fail_data("both placement pools are empty");

    std::vector<int> exp_left(experimental.size()), syn_left(synthetic.size());
    for (std::size_t i = 0; i < exp_left.size(); ++i) exp_left[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < syn_left.size(); ++i) syn_left[i] = static_cast<int>(i);

    int total = count >= 0 ? count
                           : static_cast<int>(experimental.size() + synthetic.size());
    std::vector<Placement> out;
    out.reserve(total);

    double exp_conf_sum = 0;
    for (const Placement& p : experimental) exp_conf_sum += p.confidence;

    for (int slot = 0; slot < total; ++slot) {
        if (exp_left.empty() && syn_left.empty()) break;
        bool take_exp;
        if (exp_left.empty()) take_exp = false;
        else if (syn_left.empty()) take_exp = true;
        else {
            double mean_conf = exp_conf_sum / exp_left.size();
            take_exp = rng.uniform() < w_exp * mean_conf;
        }
        if (take_exp) {
            // confidence-weighted draw without replacement
            double u = rng.uniform() * exp_conf_sum;
            std::size_t pick = 0;
            double acc = 0;
            for (std::size_t i = 0; i < exp_left.size(); ++i) {
                acc += experimental[exp_left[i]].confidence;
                if (u < acc || i + 1 == exp_left.size()) { pick = i; break; }
            }
            exp_conf_sum -= experimental[exp_left[pick]].confidence;
            out.push_back(experimental[exp_left[pick]]);
            exp_left.erase(exp_left.begin() + pick);
        } else {
            std::size_t pick = static_cast<std::size_t>(rng.uniform() * syn_left.size());
            pick = std::min(pick, syn_left.size() - 1);
            out.push_back(synthetic[syn_left[pick]]);
            syn_left.erase(syn_left.begin() + pick);
        }
    }

    // keep the merged list collision-free: later entries that violate the
    // pairwise floor against accepted ones are dropped
    std::vector<Placement> accepted;
    for (const Placement& p : out) {
        bool ok = true;
        for (const Placement& a : accepted) {
            double floor_d = (p.radius + a.radius) * (1.0 - overlap_threshold);
            if ((p.T - a.T).norm() < floor_d) { ok = false; break; }
        }
        if (ok) accepted.push_back(p);
    }
    return accepted;
}

std::vector<TriangleMesh> embed_context(const DensityVolume& labeled_volume,
                                        double perturb_amplitude, RandomStream& rng,
                                        std::vector<int>* label_ids,
                                        std::vector<std::string>* warnings) {
    // collect labels present (0 = background)
    std::map<int, long> histogram;
    for (float v : labeled_volume.data) {
        int label = static_cast<int>(std::lround(v));
        if (label < 0) fail_data("labels must be non-negative integers");
        if (label > 0) ++histogram[label];
    }

    std::vector<TriangleMesh> meshes;
    for (const auto& [label, nvox] : histogram) {
        (void)nvox;
        DensityVolume bin(labeled_volume.nx, labeled_volume.ny, labeled_volume.nz,
                          labeled_volume.voxel_size, labeled_volume.origin);
        for (std::size_t i = 0; i < bin.data.size(); ++i)
            bin.data[i] = std::lround(labeled_volume.data[i]) == label ? 1.0f : 0.0f;

        double resolution = 2.0 * labeled_volume.voxel_size;
        DensityVolume smooth = smooth_and_threshold(bin, resolution);

        // scale from the label extent
        Box3 bb{{1e30, 1e30, 1e30}, {-1e30, -1e30, -1e30}};
        for (int k = 0; k < bin.nz; ++k)
            for (int j = 0; j < bin.ny; ++j)
                for (int i = 0; i < bin.nx; ++i)
                    if (bin.at(i, j, k) > 0) {
                        Vec3 p = bin.position(i, j, k);
                        bb.lo = min(bb.lo, p);
                        bb.hi = max(bb.hi, p);
                    }
        double size = bb.size().norm();
        ScaleParams scale = derive_scale_params(std::max(1.0, size),
                                                static_cast<double>(bin.size()));

        TriangleMesh mesh = extract_isosurface(smooth, 0.5 * smooth.max_value(), scale);
        if (mesh.empty()) {
            if (warnings) warnings->push_back("label " + std::to_string(label) +
                                              " produced no surface, skipped");
            continue;
        }
        mesh = smooth_mesh(mesh, scale);

        if (perturb_amplitude > 0) {
            PerlinField3 noise(rng);
            double freq = 1.0 / (4.0 * labeled_volume.voxel_size);
            for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
                double n = noise.sample(mesh.vertices[v].x * freq, mesh.vertices[v].y * freq,
                                        mesh.vertices[v].z * freq);
                mesh.vertices[v] += mesh.normals[v] * (perturb_amplitude * n);
            }
            recompute_normals(mesh);
        }
        if (label_ids) label_ids->push_back(label);
        meshes.push_back(std::move(mesh));
    }
    return meshes;
}

namespace {

using nlohmann::json;

json placement_to_json(const Placement& p) {
    return json{{"structure", p.structure_id},
                {"T", {p.T.x, p.T.y, p.T.z}},
                {"q", {p.q.w, p.q.x, p.q.y, p.q.z}},
                {"radius", p.radius},
                {"source", p.source == PlacementSource::experimental ? "experimental"
                                                                     : "synthetic"},
                {"confidence", p.confidence},
                {"class", p.class_rule}};
}

Placement placement_from_json(const json& j) {
    Placement p;
    p.structure_id = j.at("structure").get<std::string>();
    p.T = {j.at("T")[0].get<double>(), j.at("T")[1].get<double>(), j.at("T")[2].get<double>()};
    p.q = {j.at("q")[0].get<double>(), j.at("q")[1].get<double>(),
           j.at("q")[2].get<double>(), j.at("q")[3].get<double>()};
    p.radius = j.at("radius").get<double>();
    p.source = j.at("source").get<std::string>() == "experimental"
                   ? PlacementSource::experimental
                   : PlacementSource::synthetic;
    p.confidence = j.at("confidence").get<double>();
    p.class_rule = j.at("class").get<std::string>();
    return p;
}

} // namespace

std::string scene_to_json(const Scene& scene) {
    json j;
    j["extents"] = {scene.extents.x, scene.extents.y, scene.extents.z};
    j["seed"] = scene.seed;
    j["scene_index"] = scene.scene_index;
    j["scale"] = {{"s", scene.scale.s},
                  {"overlap_threshold", scene.scale.overlap_threshold},
                  {"placement_density", scene.scale.placement_density},
                  {"collision_strictness", scene.scale.collision_strictness},
                  {"mesh_reduction", scene.scale.mesh_reduction}};
    j["placements"] = json::array();
    for (const Placement& p : scene.placements) j["placements"].push_back(placement_to_json(p));
    return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail_data(std::string("scene manifest is not valid JSON: ") + e.what());
    }
    Scene s;
    try {
        s.extents = {j.at("extents")[0].get<double>(), j.at("extents")[1].get<double>(),
                     j.at("extents")[2].get<double>()};
        s.seed = j.at("seed").get<std::uint64_t>();
        s.scene_index = j.value("scene_index", 0u);
        const json& sc = j.at("scale");
        s.scale.s = sc.at("s").get<double>();
        s.scale.overlap_threshold = sc.at("overlap_threshold").get<double>();
        s.scale.placement_density = sc.at("placement_density").get<double>();
        s.scale.collision_strictness = sc.at("collision_strictness").get<double>();
        s.scale.mesh_reduction = sc.at("mesh_reduction").get<double>();
        for (const json& p : j.at("placements")) s.placements.push_back(placement_from_json(p));
    } catch (const json::exception& e) {
        fail_data(std::string("bad scene manifest: ") + e.what());
    }
    return s;
}

void write_scene_file(const std::string& path, const Scene& scene) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail_data("cannot create scene manifest: " + path);
    f << scene_to_json(scene) << '\n';
    if (!f) fail_data("short write: " + path);
}

Scene read_scene_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_data("cannot open scene manifest: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return scene_from_json(ss.str());
}

} // namespace cryosim
