"""Run configuration: YAML document with documented defaults.

Sections ``fiber``, ``slab``, ``lattice``, ``coupler``, ``grids``,
``io``; every physical quantity carries its unit in the key name.
Unknown keys are rejected; missing keys fall back to the defaults
below (echo the merged result with --print-effective-config).
"""

from __future__ import annotations

import copy
import hashlib
import json

import yaml

from .bands import DispersiveIndex, PCWaveguideSpec, default_kpath_norm
from .coupling import (
    D_KAPPA_UM,
    D_REF_UM,
    G_REF_NM,
    KAPPA_REF_L,
    CouplerConfig,
)
from .errors import ConfigError
from .fiber import FiberSpec, TaperProfile
from .slab import DEFAULT_EFFECTIVE_HOLE_FILL, SlabSpec, slab_effective_index

import numpy as np

DEFAULTS = {
    "fiber": {
        "core_index": None,  # null: fused-silica Sellmeier at each wavelength
        "clad_index": 1.0,
        "d_um": 1.5,
        "taper_waist_um": 0.6,
        "taper_pull_mm": 5.5,
        "taper_csv": None,  # overrides the exponential profile when given
    },
    "slab": {
        "t_nm": 340.0,
        "n_si": 3.4,
        "n_clad": 1.0,
        "effective_hole_fill": DEFAULT_EFFECTIVE_HOLE_FILL,
    },
    "lattice": {
        "lam_z_nm": 500.0,
        "lam_x_nm": 400.0,
        "r_frac": 0.35,
        "grading": [0.31, 0.325, 0.34],
        "supercell_rows": 17,
        "pw_per_cell": 7,
        "n_eff_override": None,  # null: order-0 slab solve at lam_ref
        "lam_ref_um": 1.6,
        "dispersive": True,
        "k_start": 0.30,
        "k_stop": 0.50,
        "k_points": 26,
        "num_bands": None,
    },
    "coupler": {
        "gap_nm": 700.0,
        "l_c_um": 60.0,
        "dx_um": 0.0,
        "kappa_ref_l": KAPPA_REF_L,
        "g_ref_nm": G_REF_NM,
        "d_ref_um": D_REF_UM,
        "d_kappa_um": D_KAPPA_UM,
        "g0_nm": None,  # null: use the fiber evanescent decay constant
        "scatter_loss_ref": 0.10,
        "scatter_g_scale_nm": 250.0,
        "scatter_d_scale_um": 0.55,
        "include_loss": True,
    },
    "grids": {
        "lambda_start_nm": 1565.0,
        "lambda_stop_nm": 1625.0,
        "lambda_step_nm": 0.25,
        "lc_start_mm": 0.20,
        "lc_stop_mm": 0.55,
        "lc_points": 50,
        "gap_start_nm": 250.0,
        "gap_stop_nm": 800.0,
        "gap_step_nm": 25.0,
        "gap_sweep_d_um": 1.9,
        "lateral_d_um": 1.0,
        "lateral_gap_nm": 400.0,
        "dx_span_um": 4.0,
        "dx_points": 81,
        "noise_sigma": 0.005,
    },
    "io": {
        "out_dir": "out",
        "cache": True,
    },
}


def _merge_validate(defaults: dict, user: dict, path: str = "") -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {here!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here!r} must be a mapping")
            merged[key] = _merge_validate(defaults[key], value, here)
        else:
            merged[key] = value
    return merged


def load_config(path=None) -> dict:
    """Load a YAML config and merge it over the defaults."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be a mapping of sections")
    return _merge_validate(DEFAULTS, user)


def effective_config_yaml(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def config_hash(cfg: dict, sections) -> str:
    """Stable short hash of selected config sections (cache key)."""
    payload = json.dumps({s: cfg[s] for s in sections}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# -- typed builders ----------------------------------------------------------


def build_fiber(cfg: dict, d_um=None) -> FiberSpec:
    f = cfg["fiber"]
    return FiberSpec(
        d_um=float(d_um if d_um is not None else f["d_um"]),
        core_index=None if f["core_index"] is None else float(f["core_index"]),
        clad_index=float(f["clad_index"]),
    )


def build_taper(cfg: dict) -> TaperProfile:
    f = cfg["fiber"]
    if f["taper_csv"]:
        return TaperProfile.from_csv(f["taper_csv"])
    return TaperProfile.exponential(float(f["taper_waist_um"]), float(f["taper_pull_mm"]))


def build_slab(cfg: dict) -> SlabSpec:
    s = cfg["slab"]
    return SlabSpec(
        t_nm=float(s["t_nm"]),
        n_slab=float(s["n_si"]),
        n_clad=float(s["n_clad"]),
        effective_hole_fill=float(s["effective_hole_fill"]),
    )


def build_lattice(cfg: dict):
    """PCWaveguideSpec plus the dispersive-index handle (or None)."""
    lat = cfg["lattice"]
    slab = build_slab(cfg)
    lam_ref = float(lat["lam_ref_um"])
    if lat["n_eff_override"] is not None:
        n_eff = float(lat["n_eff_override"])
        dispersive = None
    else:
        n_eff = slab_effective_index(slab, lam_ref, 0)
        dispersive = (
            DispersiveIndex(slab, vertical_order=0, lam_ref_um=lam_ref)
            if lat["dispersive"]
            else None
        )
    spec = PCWaveguideSpec(
        lam_z_nm=float(lat["lam_z_nm"]),
        lam_x_nm=float(lat["lam_x_nm"]),
        r_frac=float(lat["r_frac"]),
        grading=tuple(float(v) for v in lat["grading"]),
        supercell_rows=int(lat["supercell_rows"]),
        n_eff=float(n_eff),
        pw_per_cell=int(lat["pw_per_cell"]),
    )
    return spec, dispersive


def build_kpath(cfg: dict):
    lat = cfg["lattice"]
    return default_kpath_norm(int(lat["k_points"]), float(lat["k_start"]), float(lat["k_stop"]))


def build_coupler(cfg: dict, gap_nm=None, dx_um=None) -> CouplerConfig:
    c = cfg["coupler"]
    return CouplerConfig(
        gap_nm=float(gap_nm if gap_nm is not None else c["gap_nm"]),
        l_c_um=float(c["l_c_um"]),
        dx_um=float(dx_um if dx_um is not None else c["dx_um"]),
        kappa_ref_l=float(c["kappa_ref_l"]),
        g_ref_nm=float(c["g_ref_nm"]),
        d_ref_um=float(c["d_ref_um"]),
        d_kappa_um=float(c["d_kappa_um"]),
        g0_nm=None if c["g0_nm"] is None else float(c["g0_nm"]),
        scatter_loss_ref=float(c["scatter_loss_ref"]),
        scatter_g_scale_nm=float(c["scatter_g_scale_nm"]),
        scatter_d_scale_um=float(c["scatter_d_scale_um"]),
    )


def build_lambda_grid(cfg: dict) -> np.ndarray:
    g = cfg["grids"]
    start, stop, step = (
        float(g["lambda_start_nm"]),
        float(g["lambda_stop_nm"]),
        float(g["lambda_step_nm"]),
    )
    if step <= 0 or stop <= start:
        raise ConfigError(
            f"empty wavelength grid: start={start}, stop={stop}, step={step}"
        )
    return np.arange(start, stop + 1e-9, step)


def build_lc_grid(cfg: dict) -> np.ndarray:
    g = cfg["grids"]
    n = int(g["lc_points"])
    if n < 1 or float(g["lc_stop_mm"]) <= float(g["lc_start_mm"]):
        raise ConfigError("empty taper-position grid")
    return np.linspace(float(g["lc_start_mm"]), float(g["lc_stop_mm"]), n)


def build_gap_grid(cfg: dict) -> np.ndarray:
    g = cfg["grids"]
    if float(g["gap_step_nm"]) <= 0 or float(g["gap_stop_nm"]) <= float(g["gap_start_nm"]):
        raise ConfigError("empty gap grid")
    return np.arange(
        float(g["gap_start_nm"]), float(g["gap_stop_nm"]) + 1e-9, float(g["gap_step_nm"])
    )


def build_dx_grid(cfg: dict) -> np.ndarray:
    g = cfg["grids"]
    n = int(g["dx_points"])
    span = float(g["dx_span_um"])
    if n < 5 or span <= 0:
        raise ConfigError("lateral sweep needs span > 0 and >= 5 points")
    if n % 2 == 0:
        n += 1  # keep dx = 0 on the grid and the sweep symmetric
    return np.linspace(-span, span, n)
