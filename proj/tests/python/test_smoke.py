"""Smoke tests for the pybind11 module against the C++ core."""

import json
import math
import os
import sys

import numpy as np
import pytest

_module_dir = os.environ.get("CRYOSIM_MODULE_DIR")
if _module_dir:
    sys.path.insert(0, _module_dir)

core = pytest.importorskip("_core")


PDB_LINE = (
    "ATOM  {serial:>5d}  CA  ALA A{serial:>4d}    "
    "{x:8.3f}{y:8.3f}{z:8.3f}{occ:6.2f}{b:6.2f}          {el:>2s}\n"
)


def helix_pdb(n, confidence=95.0):
    out = []
    for i in range(n):
        t = 0.6 * i
        out.append(
            PDB_LINE.format(
                serial=i + 1,
                x=8.0 * math.cos(t),
                y=8.0 * math.sin(t),
                z=0.375 * i,
                occ=1.0,
                b=confidence,
                el="C",
            )
        )
    return "".join(out)


def test_wavelength():
    assert abs(core.electron_wavelength(300.0) - 0.0197) < 1e-4
    assert abs(core.electron_wavelength(200.0) - 0.02508) < 1e-4


def test_scale_laws():
    p = core.derive_scale_params(5.0, 125000.0)
    assert p["s"] == pytest.approx(1.0)
    assert p["overlap_threshold"] == pytest.approx(0.1)
    assert p["placement_density"] == pytest.approx(1.2)
    assert p["collision_strictness"] == pytest.approx(1.0)
    assert p["mesh_reduction"] == pytest.approx(0.0, abs=1e-12)


def test_euler_quaternion():
    w, x, y, z = core.euler_to_quaternion(0.0, 0.0, 0.0)
    assert (w, x, y, z) == pytest.approx((1.0, 0.0, 0.0, 0.0))
    w, x, y, z = core.euler_to_quaternion(90.0, 0.0, 0.0)
    assert w == pytest.approx(math.cos(math.pi / 4))
    assert z == pytest.approx(math.sin(math.pi / 4))


def test_parse_and_voxelize():
    model = core.parse_atomic_model(helix_pdb(24), "helix")
    assert len(model) == 24
    assert model.r_max == pytest.approx(1.70)
    assert model.positions.shape == (24, 3)
    grid, voxel, origin = core.voxelize(model, 4.0)
    assert voxel == pytest.approx(2.0)
    assert grid.ndim == 3
    assert grid.sum() > 0


def test_mrc_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    grid = rng.normal(size=(4, 6, 8)).astype(np.float32)
    path = str(tmp_path / "vol.mrc")
    core.write_mrc(path, grid, 2.5, [1.0, 2.0, 3.0])
    back, voxel, origin = core.read_mrc(path)
    assert voxel == pytest.approx(2.5)
    assert origin == pytest.approx([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(back, grid)


def test_ctf_values():
    assert core.ctf_value(0.0) == pytest.approx(0.07)
    # underfocus: negative first band
    assert core.ctf_value(0.02) < 0


def test_ctf_filter_roundtrip_energy():
    rng = np.random.default_rng(7)
    img = rng.normal(size=(64, 64)).astype(np.float32)
    out = core.ctf_filter(img, 2.0)
    assert out.shape == img.shape
    assert np.isfinite(out).all()


def test_projection_constant():
    grid = np.full((10, 8, 8), 0.5, dtype=np.float32)
    proj = core.project(grid, 2.0)
    assert proj.shape == (8, 8)
    np.testing.assert_allclose(proj, 0.5 * 10 * 2.0, rtol=1e-6)


def test_fsc_self_is_one():
    rng = np.random.default_rng(11)
    vol = rng.normal(size=(24, 24, 24)).astype(np.float32)
    freq, corr = core.fsc(vol, vol)
    np.testing.assert_allclose(corr, 1.0, atol=1e-9)
    shell, crossed = core.resolution_at(freq, corr, 0.5)
    assert not crossed


def test_auprc_hand_case():
    picks = np.array([[0, 0, 0.9], [500, 500, 0.8], [100, 0, 0.7]])
    gt = np.array([[0, 0], [100, 0], [900, 900]])
    value = core.auprc(picks, gt, 5.0)
    assert value == pytest.approx(1.0 / 3 + 2.0 / 9, abs=1e-12)


def test_pose_metrics():
    r_gt = np.eye(3)[None, :, :]
    r_pred = np.diag([1.0, -1.0, -1.0])[None, :, :]
    t = np.zeros((1, 2))
    out = core.pose_metrics(r_gt, r_pred, t, t)
    assert out["pose_loss"] == pytest.approx(8.0 / 9.0, abs=1e-12)
    assert out["rot_error_radians"] == pytest.approx(math.pi, abs=1e-9)


def test_orientations_unit_norm():
    quats = core.sample_orientations(1000, "uniform", seed=3)
    norms = np.linalg.norm(quats, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-9)


def test_placement_collision_floor():
    pts = core.place_particles(40, 20.0, [400.0, 400.0, 400.0], seed=9)
    assert pts.shape[1] == 3
    if len(pts) > 1:
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        d += np.eye(len(pts)) * 1e9
        assert d.min() >= 2 * 20.0 * (1 - 0.1) - 1e-9


def test_noise_snr():
    rng = np.random.default_rng(13)
    img = rng.normal(size=(512, 512)).astype(np.float32)
    noisy = core.apply_noise(img, "gaussian", snr=0.1, seed=21)
    measured = img.var() / (noisy - img).var()
    assert measured == pytest.approx(0.1, rel=0.1)


def test_pipeline_run(tmp_path):
    pdb = tmp_path / "demo.pdb"
    pdb.write_text(helix_pdb(40))
    config = {
        "seed": 7,
        "extents": [512, 512, 160],
        "resolution": 8.0,
        "structures": [{"id": "demo", "path": str(pdb), "count": 6}],
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))

    out_a = core.run_pipeline(str(cfg_path), str(tmp_path / "a"), threads=1)
    out_b = core.run_pipeline(str(cfg_path), str(tmp_path / "b"), threads=2)
    assert out_a["digest_algorithm"] == "SHA-256"
    digests_a = [(o["path"], o["sha256"]) for o in out_a["outputs"]]
    digests_b = [(o["path"], o["sha256"]) for o in out_b["outputs"]]
    assert digests_a == digests_b
    assert (tmp_path / "a" / "scene_000" / "micrograph_noisy.mrc").exists()
    assert (tmp_path / "a" / "manifest.json").exists()

    grid, voxel, origin = core.read_mrc(str(tmp_path / "a/scene_000/micrograph_clean.mrc"))
    assert grid.shape == (1, 128, 128)
    assert voxel == pytest.approx(4.0)


def test_error_type():
    with pytest.raises(core.CryosimError):
        core.parse_atomic_model("no atoms here")
