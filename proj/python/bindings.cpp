#include <fstream>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cryosim/density.hpp"
#include "cryosim/error.hpp"
#include "cryosim/imaging.hpp"
#include "cryosim/metrics.hpp"
#include "cryosim/mrc.hpp"
#include "cryosim/pipeline.hpp"
#include "cryosim/scene.hpp"

namespace py = pybind11;
using namespace cryosim;

namespace {

DensityVolume volume_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> arr,
                                double voxel_size, std::array<double, 3> origin) {
    if (arr.ndim() != 3) throw py::value_error("expected a 3D array (nz, ny, nx)");
    DensityVolume vol(static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(1)),
                      static_cast<int>(arr.shape(0)), voxel_size,
                      {origin[0], origin[1], origin[2]});
    std::memcpy(vol.data.data(), arr.data(), sizeof(float) * vol.size());
    return vol;
}

py::array_t<float> array_from_volume(const DensityVolume& vol) {
    py::array_t<float> arr({vol.nz, vol.ny, vol.nx});
    std::memcpy(arr.mutable_data(), vol.data.data(), sizeof(float) * vol.size());
    return arr;
}

Micrograph micrograph_from_array(
    py::array_t<float, py::array::c_style | py::array::forcecast> arr, double pixel_size) {
    if (arr.ndim() != 2) throw py::value_error("expected a 2D array (ny, nx)");
    Micrograph m(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)), pixel_size);
    std::memcpy(m.pixels.data(), arr.data(), sizeof(float) * m.size());
    return m;
}

py::array_t<float> array_from_micrograph(const Micrograph& m) {
    py::array_t<float> arr({m.ny, m.nx});
    std::memcpy(arr.mutable_data(), m.pixels.data(), sizeof(float) * m.size());
    return arr;
}

CtfParams ctf_from_kwargs(double voltage_kv, double defocus_A, double cs_mm, double w,
                          double b_factor, double phase_shift) {
    return CtfParams{voltage_kv, defocus_A, cs_mm, w, b_factor, phase_shift};
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "cryo-EM micrograph synthesis engine (C++ core)";

    py::register_exception<error>(m, "CryosimError");

    py::class_<AtomicModel>(m, "AtomicModel")
        .def_property_readonly("id", [](const AtomicModel& a) { return a.id; })
        .def_property_readonly("r_max", [](const AtomicModel& a) { return a.r_max; })
        .def("__len__", [](const AtomicModel& a) { return a.atoms.size(); })
        .def_property_readonly("positions",
                               [](const AtomicModel& a) {
                                   py::array_t<double> out(
                                       {static_cast<py::ssize_t>(a.atoms.size()),
                                        static_cast<py::ssize_t>(3)});
                                   auto r = out.mutable_unchecked<2>();
                                   for (py::ssize_t i = 0;
                                        i < static_cast<py::ssize_t>(a.atoms.size()); ++i) {
                                       r(i, 0) = a.atoms[i].position.x;
                                       r(i, 1) = a.atoms[i].position.y;
                                       r(i, 2) = a.atoms[i].position.z;
                                   }
                                   return out;
                               })
        .def_property_readonly("confidence",
                               [](const AtomicModel& a) {
                                   py::array_t<double> out(
                                       static_cast<py::ssize_t>(a.atoms.size()));
                                   auto r = out.mutable_unchecked<1>();
                                   for (py::ssize_t i = 0;
                                        i < static_cast<py::ssize_t>(a.atoms.size()); ++i)
                                       r(i) = a.atoms[i].confidence;
                                   return out;
                               })
        .def_property_readonly("vdw_radii", [](const AtomicModel& a) {
            py::array_t<double> out(static_cast<py::ssize_t>(a.atoms.size()));
            auto r = out.mutable_unchecked<1>();
            for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(a.atoms.size()); ++i)
                r(i) = a.atoms[i].vdw_radius;
            return out;
        });

    m.def("parse_atomic_model",
          [](const std::string& text, const std::string& id) {
              return parse_atomic_model(text, id);
          },
          py::arg("text"), py::arg("id") = "");
    m.def("load_atomic_model",
          [](const std::string& path) { return parse_atomic_model_file(path); },
          py::arg("path"));

    m.def("voxelize",
          [](const AtomicModel& model, double resolution) {
              DensityVolume vol = voxelize(model, resolution);
              return py::make_tuple(array_from_volume(vol), vol.voxel_size,
                                    std::array<double, 3>{vol.origin.x, vol.origin.y,
                                                          vol.origin.z});
          },
          py::arg("model"), py::arg("resolution"),
          "Gaussian deposition; returns (grid[z,y,x], voxel_size, origin)");

    m.def("smooth_and_threshold",
          [](py::array_t<float, py::array::c_style | py::array::forcecast> grid,
             double voxel_size, double resolution) {
              DensityVolume vol = volume_from_array(grid, voxel_size, {0, 0, 0});
              return array_from_volume(smooth_and_threshold(vol, resolution));
          },
          py::arg("grid"), py::arg("voxel_size"), py::arg("resolution"));

    m.def("read_mrc",
          [](const std::string& path) {
              DensityVolume vol = read_volume_file(path);
              return py::make_tuple(array_from_volume(vol), vol.voxel_size,
                                    std::array<double, 3>{vol.origin.x, vol.origin.y,
                                                          vol.origin.z});
          },
          py::arg("path"));
    m.def("write_mrc",
          [](const std::string& path,
             py::array_t<float, py::array::c_style | py::array::forcecast> grid,
             double voxel_size, std::array<double, 3> origin) {
              if (grid.ndim() == 2) {
                  py::array_t<float> g3({py::ssize_t(1), grid.shape(0), grid.shape(1)});
                  std::memcpy(g3.mutable_data(), grid.data(),
                              sizeof(float) * grid.size());
                  write_volume_file(path, volume_from_array(g3, voxel_size, origin));
              } else {
                  write_volume_file(path, volume_from_array(grid, voxel_size, origin));
              }
          },
          py::arg("path"), py::arg("grid"), py::arg("voxel_size") = 1.0,
          py::arg("origin") = std::array<double, 3>{0, 0, 0});

    m.def("derive_scale_params",
          [](double particle_size, double volume_voxels) {
              ScaleParams p = derive_scale_params(particle_size, volume_voxels);
              py::dict d;
              d["s"] = p.s;
              d["overlap_threshold"] = p.overlap_threshold;
              d["placement_density"] = p.placement_density;
              d["collision_strictness"] = p.collision_strictness;
              d["mesh_reduction"] = p.mesh_reduction;
              return d;
          },
          py::arg("particle_size"), py::arg("volume_voxels"));

    m.def("euler_to_quaternion",
          [](double alpha, double beta, double gamma) {
              Quaternion q = euler_to_quaternion(alpha, beta, gamma);
              return std::array<double, 4>{q.w, q.x, q.y, q.z};
          },
          py::arg("alpha_deg"), py::arg("beta_deg"), py::arg("gamma_deg"),
          "Intrinsic ZYZ convention, canonical sign (w >= 0)");

    m.def("sample_orientations",
          [](int n, const std::string& mode, std::uint64_t seed, double kappa,
             std::array<double, 3> mu, double theta_max) {
              OrientationParams params;
              if (mode == "uniform") params.mode = OrientationParams::Mode::uniform;
              else if (mode == "preferred") params.mode = OrientationParams::Mode::preferred;
              else if (mode == "limited_tilt")
                  params.mode = OrientationParams::Mode::limited_tilt;
              else throw py::value_error("mode must be uniform|preferred|limited_tilt");
              params.kappa = kappa;
              params.mu = Vec3{mu[0], mu[1], mu[2]}.normalized();
              params.theta_max = theta_max;
              RandomStream rng(seed, rng_stage::orientation);
              py::array_t<double> out({static_cast<py::ssize_t>(n), py::ssize_t(4)});
              auto r = out.mutable_unchecked<2>();
              for (int i = 0; i < n; ++i) {
                  Quaternion q = sample_orientation(params, rng);
                  r(i, 0) = q.w; r(i, 1) = q.x; r(i, 2) = q.y; r(i, 3) = q.z;
              }
              return out;
          },
          py::arg("n"), py::arg("mode") = "uniform", py::arg("seed") = 0,
          py::arg("kappa") = 10.0, py::arg("mu") = std::array<double, 3>{0, 0, 1},
          py::arg("theta_max") = M_PI / 6.0);

    m.def("place_particles",
          [](int count, double radius, std::array<double, 3> extents, std::uint64_t seed,
             const std::string& strategy, double scale_s) {
              PlaceStrategy st;
              if (strategy == "uniform") st.kind = PlaceStrategy::Kind::uniform;
              else if (strategy == "cluster") st.kind = PlaceStrategy::Kind::cluster;
              else if (strategy == "grid") st.kind = PlaceStrategy::Kind::grid;
              else throw py::value_error("strategy must be uniform|cluster|grid");
              RandomStream rng(seed, rng_stage::placement);
              auto placed = place_particles(count, radius, st, {}, ScaleParams::from_s(scale_s),
                                            {extents[0], extents[1], extents[2]}, rng);
              py::array_t<double> out({static_cast<py::ssize_t>(placed.size()), py::ssize_t(3)});
              auto r = out.mutable_unchecked<2>();
              for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(placed.size()); ++i) {
                  r(i, 0) = placed[i].T.x;
                  r(i, 1) = placed[i].T.y;
                  r(i, 2) = placed[i].T.z;
              }
              return out;
          },
          py::arg("count"), py::arg("radius"), py::arg("extents"), py::arg("seed") = 0,
          py::arg("strategy") = "uniform", py::arg("scale_s") = 1.0,
          "Collision-safe positions (N x 3) in a centered box");

    m.def("electron_wavelength", &electron_wavelength, py::arg("voltage_kv"));
    m.def("ctf_value",
          [](double s, double voltage_kv, double defocus_A, double cs_mm, double w,
             double b_factor, double phase_shift) {
              return ctf_value(
                  ctf_from_kwargs(voltage_kv, defocus_A, cs_mm, w, b_factor, phase_shift), s);
          },
          py::arg("s"), py::arg("voltage_kv") = 300.0, py::arg("defocus_A") = 10000.0,
          py::arg("cs_mm") = 2.7, py::arg("amplitude_contrast") = 0.07,
          py::arg("b_factor") = 0.0, py::arg("phase_shift") = 0.0);

    m.def("ctf_filter",
          [](py::array_t<float, py::array::c_style | py::array::forcecast> img,
             double pixel_size, double voltage_kv, double defocus_A, double cs_mm, double w,
             double b_factor, double phase_shift) {
              Micrograph in = micrograph_from_array(img, pixel_size);
              return array_from_micrograph(ctf_filter(
                  in, ctf_from_kwargs(voltage_kv, defocus_A, cs_mm, w, b_factor, phase_shift)));
          },
          py::arg("image"), py::arg("pixel_size"), py::arg("voltage_kv") = 300.0,
          py::arg("defocus_A") = 10000.0, py::arg("cs_mm") = 2.7,
          py::arg("amplitude_contrast") = 0.07, py::arg("b_factor") = 0.0,
          py::arg("phase_shift") = 0.0);

    m.def("project",
          [](py::array_t<float, py::array::c_style | py::array::forcecast> grid,
             double voxel_size) {
              DensityVolume vol = volume_from_array(grid, voxel_size, {0, 0, 0});
              Micrograph p = project(vol, 0.0, (vol.nz - 1) * voxel_size);
              return array_from_micrograph(p);
          },
          py::arg("grid"), py::arg("voxel_size"), "Full-depth line integral along z");

    m.def("apply_noise",
          [](py::array_t<float, py::array::c_style | py::array::forcecast> img,
             const std::string& model, double snr, std::uint64_t seed, double dose,
             double sigma) {
              NoiseSpec spec;
              if (model == "gaussian") spec.model = NoiseSpec::Model::gaussian;
              else if (model == "poisson") spec.model = NoiseSpec::Model::poisson;
              else if (model == "poisson_gaussian")
                  spec.model = NoiseSpec::Model::poisson_gaussian;
              else throw py::value_error("model must be gaussian|poisson|poisson_gaussian");
              spec.target_snr = snr;
              spec.dose = dose;
              spec.sigma = sigma;
              RandomStream rng(seed, rng_stage::noise);
              Micrograph in = micrograph_from_array(img, 1.0);
              return array_from_micrograph(apply_noise(in, spec, rng));
          },
          py::arg("image"), py::arg("model") = "gaussian", py::arg("snr") = 0.1,
          py::arg("seed") = 0, py::arg("dose") = 0.0, py::arg("sigma") = 1.0);

    m.def("fsc",
          [](py::array_t<float, py::array::c_style | py::array::forcecast> a,
             py::array_t<float, py::array::c_style | py::array::forcecast> b) {
              FscCurve curve =
                  fsc(volume_from_array(a, 1.0, {0, 0, 0}), volume_from_array(b, 1.0, {0, 0, 0}));
              py::array_t<double> freq(static_cast<py::ssize_t>(curve.shells.size()));
              py::array_t<double> corr(static_cast<py::ssize_t>(curve.shells.size()));
              auto rf = freq.mutable_unchecked<1>();
              auto rc = corr.mutable_unchecked<1>();
              for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(curve.shells.size()); ++i) {
                  rf(i) = curve.shells[i].frequency;
                  rc(i) = curve.shells[i].correlation;
              }
              return py::make_tuple(freq, corr);
          },
          py::arg("a"), py::arg("b"), "Shell index and correlation per integer-radius shell");

    m.def("resolution_at",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> freq,
             py::array_t<double, py::array::c_style | py::array::forcecast> corr,
             double threshold) {
              FscCurve curve;
              auto f = freq.unchecked<1>();
              auto c = corr.unchecked<1>();
              for (py::ssize_t i = 0; i < f.shape(0); ++i)
                  curve.shells.push_back({f(i), c(i), 1, false});
              ResolutionResult r = resolution_at(curve, threshold);
              return py::make_tuple(r.frequency, r.crossed);
          },
          py::arg("frequencies"), py::arg("correlations"), py::arg("threshold") = 0.5);

    m.def("auprc",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> picks,
             py::array_t<double, py::array::c_style | py::array::forcecast> gt,
             double d_match) {
              if (picks.ndim() != 2 || picks.shape(1) != 3)
                  throw py::value_error("picks must be (N, 3): x, y, confidence");
              if (gt.ndim() != 2 || gt.shape(1) != 2)
                  throw py::value_error("gt must be (M, 2): x, y");
              std::vector<ScoredPick> ps;
              auto rp = picks.unchecked<2>();
              for (py::ssize_t i = 0; i < rp.shape(0); ++i)
                  ps.push_back({rp(i, 0), rp(i, 1), rp(i, 2)});
              std::vector<std::array<double, 2>> gs;
              auto rg = gt.unchecked<2>();
              for (py::ssize_t i = 0; i < rg.shape(0); ++i) gs.push_back({rg(i, 0), rg(i, 1)});
              MatchResult match = match_picks(ps, gs, d_match);
              return auprc(pr_curve(match, 0));
          },
          py::arg("picks"), py::arg("gt"), py::arg("d_match"));

    m.def("pose_metrics",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> r_gt,
             py::array_t<double, py::array::c_style | py::array::forcecast> r_pred,
             py::array_t<double, py::array::c_style | py::array::forcecast> t_gt,
             py::array_t<double, py::array::c_style | py::array::forcecast> t_pred) {
              if (r_gt.ndim() != 3 || r_gt.shape(1) != 3 || r_gt.shape(2) != 3)
                  throw py::value_error("rotations must be (B, 3, 3)");
              PoseBatch batch;
              auto a = r_gt.unchecked<3>();
              auto b = r_pred.unchecked<3>();
              auto ta = t_gt.unchecked<2>();
              auto tb = t_pred.unchecked<2>();
              for (py::ssize_t i = 0; i < a.shape(0); ++i) {
                  PosePair p;
                  for (int r = 0; r < 3; ++r)
                      for (int c = 0; c < 3; ++c) {
                          p.r_gt[r * 3 + c] = a(i, r, c);
                          p.r_pred[r * 3 + c] = b(i, r, c);
                      }
                  p.t_gt = {ta(i, 0), ta(i, 1)};
                  p.t_pred = {tb(i, 0), tb(i, 1)};
                  batch.pairs.push_back(p);
              }
              batch.validate();
              py::dict d;
              d["pose_loss"] = pose_loss(batch);
              d["rot_error_radians"] = angular_error_radians(batch);
              d["rot_error_scaled"] = angular_error_paper(batch);
              return d;
          },
          py::arg("r_gt"), py::arg("r_pred"), py::arg("t_gt"), py::arg("t_pred"));

    m.def("run_pipeline",
          [](const std::string& config_path, const std::string& out_dir,
             py::object seed, int threads, bool verbose) {
              std::ifstream f(config_path, std::ios::binary);
              if (!f) fail_config("cannot open config: " + config_path);
              std::ostringstream ss;
              ss << f.rdbuf();
              std::string text = ss.str();
              SceneConfig cfg = parse_scene_config(
                  text, std::filesystem::path(config_path).parent_path(), true);
              if (!seed.is_none()) cfg.seed = seed.cast<std::uint64_t>();
              RunManifest manifest;
              {
                  py::gil_scoped_release release;
                  manifest = run_pipeline(cfg, out_dir, threads, verbose, text);
              }
              py::dict d;
              d["config_sha256"] = manifest.config_sha256;
              d["seed"] = manifest.seed;
              d["digest_algorithm"] = manifest.digest_algorithm;
              py::list outputs;
              for (const OutputRecord& o : manifest.outputs) {
                  py::dict rec;
                  rec["path"] = o.path;
                  rec["sha256"] = o.sha256;
                  outputs.append(rec);
              }
              d["outputs"] = outputs;
              return d;
          },
          py::arg("config_path"), py::arg("out_dir"), py::arg("seed") = py::none(),
          py::arg("threads") = 1, py::arg("verbose") = false);

#ifdef CRYOSIM_VERSION
    m.attr("__version__") = CRYOSIM_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}
