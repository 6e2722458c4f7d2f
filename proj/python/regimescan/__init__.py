"""Change-point detection and parameter estimation for regime-switching ODEs."""

from ._core import (
    RegimeSchedule,
    SystemSpec,
    Trajectory,
    affine_parts,
    build_windows,
    certify_window,
    default_pelt_penalty,
    field,
    gate,
    gmm_em,
    information_matrix,
    mad_normalize,
    observe,
    oracle_floors,
    pelt,
    preset_config,
    preset_names,
    residual_floor,
    run,
    simulate,
    system,
    systems,
    tau_of_eta,
)

__version__ = "0.1.0"

__all__ = [
    "RegimeSchedule",
    "SystemSpec",
    "Trajectory",
    "affine_parts",
    "build_windows",
    "certify_window",
    "default_pelt_penalty",
    "field",
    "gate",
    "gmm_em",
    "information_matrix",
    "mad_normalize",
    "observe",
    "oracle_floors",
    "pelt",
    "preset_config",
    "preset_names",
    "residual_floor",
    "run",
    "simulate",
    "system",
    "systems",
    "tau_of_eta",
]
