"""Python interface to the cryosim synthesis engine."""

from ._core import (
    AtomicModel,
    CryosimError,
    apply_noise,
    auprc,
    ctf_filter,
    ctf_value,
    derive_scale_params,
    electron_wavelength,
    euler_to_quaternion,
    fsc,
    load_atomic_model,
    parse_atomic_model,
    place_particles,
    pose_metrics,
    project,
    read_mrc,
    resolution_at,
    run_pipeline,
    sample_orientations,
    smooth_and_threshold,
    voxelize,
    write_mrc,
    __version__,
)

__all__ = [
    "AtomicModel",
    "CryosimError",
    "apply_noise",
    "auprc",
    "ctf_filter",
    "ctf_value",
    "derive_scale_params",
    "electron_wavelength",
    "euler_to_quaternion",
    "fsc",
    "load_atomic_model",
    "parse_atomic_model",
    "place_particles",
    "pose_metrics",
    "project",
    "read_mrc",
    "resolution_at",
    "run_pipeline",
    "sample_orientations",
    "smooth_and_threshold",
    "voxelize",
    "write_mrc",
    "__version__",
]
