"""Shared fixtures: the default bandstructure is expensive (~20 s), so it
is computed once per session and reused; its wall time feeds the
runtime acceptance criterion.  CLI tests get a work directory with the
bands cache pre-seeded from the same computation.
"""

import json
import time

import numpy as np
import pytest

from pcwgprobe import config as cfgmod
from pcwgprobe.bands import waveguide_bands
from pcwgprobe.fiber import TaperProfile


@pytest.fixture(scope="session")
def default_cfg():
    return cfgmod.load_config(None)


@pytest.fixture(scope="session")
def bands_result(default_cfg):
    """(WaveguideBandsResult, elapsed_seconds) for the default lattice."""
    spec, dispersive = cfgmod.build_lattice(default_cfg)
    kpath = cfgmod.build_kpath(default_cfg)
    t0 = time.perf_counter()
    res = waveguide_bands(spec, kpath_norm=kpath, dispersive=dispersive)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def te1(bands_result):
    return bands_result[0].curve("TE-1")


@pytest.fixture(scope="session")
def te1_odd(bands_result):
    return bands_result[0].curve("TE-1-odd")


@pytest.fixture(scope="session")
def default_spec(default_cfg):
    spec, _ = cfgmod.build_lattice(default_cfg)
    return spec


@pytest.fixture(scope="session")
def default_taper():
    return TaperProfile.exponential(0.6, 5.5)


@pytest.fixture(scope="session")
def bands_payload(bands_result, default_spec):
    res, _ = bands_result
    return {
        "lam_z_nm": default_spec.lam_z_nm,
        "n_eff": default_spec.n_eff,
        "gap_norm": list(res.gap_norm) if res.gap_norm else None,
        "curves": [c.to_dict() for c in res.curves],
    }


@pytest.fixture
def cli_out(tmp_path, bands_payload, default_cfg):
    """Output dir with the bands cache pre-seeded (CLI tests stay fast)."""
    key = cfgmod.config_hash(default_cfg, ("slab", "lattice"))
    cache = tmp_path / ".cache"
    cache.mkdir()
    with open(cache / f"bands_{key}.json", "w") as fh:
        json.dump(bands_payload, fh)
    return tmp_path


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)
