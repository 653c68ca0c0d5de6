"""Forward synthesis of taper transmission maps T(lambda, l_c) and the
inverse analysis: resonance extraction and bandstructure reconstruction.

The forward model composes the exact fiber dispersion at the local taper
diameter with the PCWG branch dispersion (linearized between samples),
feeds the detuning through the lossless two-mode transfer functions
(contra-directional for negative-group-velocity branches, co-directional
otherwise), averages over the diameter variation across the interaction
length, and applies the broadband scattering loss.  The inverse path
never sees the forward model's internals: dips are located per column,
refined sub-grid, tracked across columns into branches, and mapped to
(beta, omega) points through the fiber solver.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .bands import BandCurve, phase_match_crossing
from .coupling import CouplerConfig, co_transmission, contra_transmission
from .errors import BandCoverageError, MapFormatError
from .fiber import C_UM_PER_S, FiberSpec, TaperProfile, dispersion_curve, fundamental_neff

MAP_HEADER_CELL = "lc_mm\\lambda_nm"


@dataclass
class TransmissionMap:
    """T on a (l_c x wavelength) grid at fixed gap and lateral offset."""

    wavelengths_nm: np.ndarray
    lc_mm: np.ndarray
    t: np.ndarray  # shape (n_lc, n_lambda)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.wavelengths_nm = np.asarray(self.wavelengths_nm, dtype=float)
        self.lc_mm = np.asarray(self.lc_mm, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        if self.t.shape != (self.lc_mm.size, self.wavelengths_nm.size):
            raise ValueError(
                f"T shape {self.t.shape} does not match grids "
                f"({self.lc_mm.size}, {self.wavelengths_nm.size})"
            )
        if np.any(self.t < -1e-12) or np.any(self.t > 1.0 + 1e-12):
            raise ValueError("transmission values must lie in [0, 1]")

    def to_csv(self, path, meta_path=None):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([MAP_HEADER_CELL] + [repr(float(v)) for v in self.wavelengths_nm])
            for lc, row in zip(self.lc_mm, self.t):
                writer.writerow([repr(float(lc))] + [repr(float(v)) for v in row])
        if meta_path is not None:
            with open(meta_path, "w") as fh:
                json.dump(self.meta, fh, indent=2, sort_keys=True)
                fh.write("\n")

    @classmethod
    def from_csv(cls, path, meta_path=None):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise MapFormatError(f"{path}: empty file", line=1)
        header = rows[0]
        if not header or header[0] != MAP_HEADER_CELL:
            raise MapFormatError(
                f"{path}: first cell must be {MAP_HEADER_CELL!r}", line=1, column=1
            )
        try:
            wavelengths = np.array([float(v) for v in header[1:]])
        except ValueError as exc:
            raise MapFormatError(f"{path}: bad wavelength header: {exc}", line=1) from exc
        if wavelengths.size < 2 or np.any(np.diff(wavelengths) <= 0):
            raise MapFormatError(
                f"{path}: wavelength grid must be increasing with >= 2 points", line=1
            )
        lc, data = [], []
        for i, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != wavelengths.size + 1:
                raise MapFormatError(
                    f"{path}: expected {wavelengths.size + 1} cells, got {len(row)}",
                    line=i,
                    column=len(row),
                )
            try:
                lc.append(float(row[0]))
                data.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise MapFormatError(f"{path}: non-numeric cell: {exc}", line=i) from exc
        if not data:
            raise MapFormatError(f"{path}: no data rows", line=2)
        meta = {}
        if meta_path is not None:
            with open(meta_path) as fh:
                meta = json.load(fh)
        try:
            return cls(np.array(wavelengths), np.array(lc), np.array(data), meta)
        except ValueError as exc:
            raise MapFormatError(f"{path}: {exc}") from exc


@dataclass
class ResonancePoint:
    lc_mm: float
    lambda_min_nm: float
    t_min: float
    label: str = "unassigned"
    fit_width_nm: float = float("nan")
    branch: int = -1
    ambiguous: bool = False

    def to_dict(self):
        return {
            "lc_mm": self.lc_mm,
            "lambda_min_nm": self.lambda_min_nm,
            "t_min": self.t_min,
            "label": self.label,
            "fit_width_nm": self.fit_width_nm,
            "branch": self.branch,
            "ambiguous": self.ambiguous,
        }


@dataclass
class BandPoint:
    beta_rad_per_um: float
    omega_rad_per_s: float
    lambda_nm: float
    lc_mm: float
    label: str = "unassigned"

    def to_dict(self):
        return {
            "beta_rad_per_um": self.beta_rad_per_um,
            "omega_rad_per_s": self.omega_rad_per_s,
            "lambda_nm": self.lambda_nm,
            "lc_mm": self.lc_mm,
            "label": self.label,
        }


# ---------------------------------------------------------------------------
# Forward synthesis
# ---------------------------------------------------------------------------


def _branch_beta_of_lambda(curve: BandCurve, lam_nm_grid: np.ndarray):
    """Branch beta(lambda) on the scan grid, linearized beyond its samples.

    The branch must actually reach the scan window (expanded by half its
    width); otherwise composing a detuning would be silent extrapolation.
    """
    lam = curve.lambda_nm
    beta = curve.beta_rad_per_um
    order = np.argsort(lam)
    lam, beta = lam[order], beta[order]
    lo, hi = lam_nm_grid[0], lam_nm_grid[-1]
    span = hi - lo
    if lam[-1] < lo - 0.5 * span or lam[0] > hi + 0.5 * span:
        raise BandCoverageError(
            f"branch {curve.label!r} samples ({lam[0]:.0f}-{lam[-1]:.0f} nm) do not "
            f"reach the scan window ({lo:.0f}-{hi:.0f} nm)"
        )
    out = np.interp(lam_nm_grid, lam, beta)
    # linear extension with the end slopes (linearized composition)
    lo_slope = (beta[1] - beta[0]) / (lam[1] - lam[0])
    hi_slope = (beta[-1] - beta[-2]) / (lam[-1] - lam[-2])
    below = lam_nm_grid < lam[0]
    above = lam_nm_grid > lam[-1]
    out[below] = beta[0] + lo_slope * (lam_nm_grid[below] - lam[0])
    out[above] = beta[-1] + hi_slope * (lam_nm_grid[above] - lam[-1])
    return out


def synthesize_map(
    taper: TaperProfile,
    curves: list,
    coupler: CouplerConfig,
    fiber: FiberSpec,
    wavelengths_nm=None,
    lc_mm=None,
    noise_sigma: float = 0.0,
    seed: int | None = None,
    include_loss: bool = True,
    n_sub: int = 5,
) -> TransmissionMap:
    """Synthesize T(lambda, l_c) for a taper scanned along the PCWG.

    At each (lambda, l_c): the fiber propagation constant at the local
    diameter sets the detuning against every branch; branches with
    negative group velocity couple contra-directionally, the rest
    co-directionally; channels multiply.  The diameter variation across
    the interaction length is modeled by averaging the transfer over
    ``n_sub`` sub-positions.  Noise is additive Gaussian with standard
    deviation ``noise_sigma * T``.
    """
    if wavelengths_nm is None:
        wavelengths_nm = np.arange(1565.0, 1625.0 + 1e-9, 0.25)
    if lc_mm is None:
        lc_mm = np.linspace(0.20, 0.55, 50)
    wavelengths_nm = np.asarray(wavelengths_nm, dtype=float)
    lc_mm = np.asarray(lc_mm, dtype=float)
    if wavelengths_nm.size < 2 or lc_mm.size < 1:
        raise ValueError("need >= 2 wavelengths and >= 1 taper position")

    lam_um = wavelengths_nm * 1e-3
    betas = {c.label: _branch_beta_of_lambda(c, wavelengths_nm) for c in curves}
    contra = {c.label: c.mean_slope() < 0 for c in curves}

    lo, hi = taper.span_mm
    half_lc_mm = 0.5 * coupler.l_c_um * 1e-3
    offsets = np.linspace(-half_lc_mm, half_lc_mm, n_sub) if n_sub > 1 else np.array([0.0])

    t = np.empty((lc_mm.size, wavelengths_nm.size))
    for i, lc in enumerate(lc_mm):
        acc = np.zeros(wavelengths_nm.size)
        for off in offsets:
            d = float(taper.diameter_at(min(max(lc + off, lo), hi)))
            sub_fiber = fiber.with_diameter(d)
            beta_f = 2.0 * np.pi * dispersion_curve(sub_fiber, lam_um) / lam_um
            t_sub = np.ones(wavelengths_nm.size)
            for c in curves:
                delta = 0.5 * (beta_f - betas[c.label])
                kappa = coupler.kappa_perp(sub_fiber, float(np.mean(lam_um)))
                if contra[c.label]:
                    t_br, _ = contra_transmission(kappa, coupler.l_c_um, delta)
                else:
                    t_br, _ = co_transmission(kappa, coupler.l_c_um, delta)
                t_sub = t_sub * t_br
            acc += t_sub
        row = acc / offsets.size
        if include_loss:
            d_center = float(taper.diameter_at(lc))
            row = row * coupler.scattering_transmission(d_center)
        t[i] = row

    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        t = t * (1.0 + noise_sigma * rng.standard_normal(t.shape))
    t = np.clip(t, 0.0, 1.0)

    meta = {
        "gap_nm": coupler.gap_nm,
        "dx_um": coupler.dx_um,
        "taper_id": taper.name,
        "normalization": "relative to the bare-taper transmission",
        "noise_sigma": noise_sigma,
        "seed": seed,
        "branches": sorted(betas),
        "include_loss": include_loss,
    }
    return TransmissionMap(wavelengths_nm, lc_mm, t, meta)


# ---------------------------------------------------------------------------
# Inverse analysis
# ---------------------------------------------------------------------------


def _column_dips(lam_nm, t_row, depth_sigmas, min_run=2,
                 sidelobe_window_nm=20.0, sidelobe_depth_frac=0.25):
    """Local minima below baseline - max(3 sigma, floor), sub-grid refined.

    Runs shorter than ``min_run`` samples are treated as noise.  The
    two-mode transfer function carries oscillatory sidelobes around each
    resonance; a dip much shallower than a deeper dip nearby is one of
    those and is suppressed rather than reported as its own resonance.
    """
    top = np.quantile(t_row, 0.75)
    baseline = float(np.median(t_row[t_row >= top]))
    diffs = np.abs(np.diff(t_row))
    sigma = 1.4826 * float(np.median(diffs)) / np.sqrt(2.0)
    threshold = baseline - max(depth_sigmas * sigma, 1e-6)

    below = t_row < threshold
    dips = []
    j = 0
    while j < len(t_row):
        if not below[j]:
            j += 1
            continue
        k = j
        while k + 1 < len(t_row) and below[k + 1]:
            k += 1
        if k - j + 1 >= min_run:
            seg = slice(j, k + 1)
            m = j + int(np.argmin(t_row[seg]))
            lam_min, t_min = lam_nm[m], t_row[m]
            # sub-grid refinement: quadratic fit over the quarter-depth
            # window (a 3-point vertex is noise-limited on wide dips);
            # the window stays inside this run so a shallow noise run on a
            # shoulder cannot swallow a neighboring dip
            depth0 = baseline - t_row[m]
            lo_w = m
            while lo_w > j and t_row[lo_w - 1] <= t_row[m] + 0.25 * depth0:
                lo_w -= 1
            hi_w = m
            while hi_w < k and t_row[hi_w + 1] <= t_row[m] + 0.25 * depth0:
                hi_w += 1
            if hi_w - lo_w >= 2:
                xs = lam_nm[lo_w : hi_w + 1] - lam_nm[m]
                ys = t_row[lo_w : hi_w + 1]
                a2, a1, a0 = np.polyfit(xs, ys, 2)
                if a2 > 0:
                    vertex = -a1 / (2.0 * a2)
                    if abs(vertex) <= max(abs(xs[0]), abs(xs[-1])):
                        lam_min = lam_nm[m] + vertex
                        t_min = float(a0 - a1**2 / (4.0 * a2))
            half = baseline - 0.5 * (baseline - t_min)
            left = right = np.nan
            for p in range(m - 1, -1, -1):  # first sample at/above the half level
                if t_row[p] >= half:
                    fr = (half - t_row[p + 1]) / (t_row[p] - t_row[p + 1])
                    left = lam_nm[p + 1] - fr * (lam_nm[p + 1] - lam_nm[p])
                    break
            for p in range(m + 1, len(t_row)):
                if t_row[p] >= half:
                    fr = (half - t_row[p - 1]) / (t_row[p] - t_row[p - 1])
                    right = lam_nm[p - 1] + fr * (lam_nm[p] - lam_nm[p - 1])
                    break
            width = (
                right - left if np.isfinite(left) and np.isfinite(right) else float("nan")
            )
            dips.append((float(lam_min), float(t_min), float(width)))
        j = k + 1

    keep = []
    for lam, tmin, width in dips:
        depth = baseline - tmin
        shadowed = any(
            abs(lam - lam2) <= sidelobe_window_nm
            and depth < sidelobe_depth_frac * (baseline - tmin2)
            for lam2, tmin2, _ in dips
            if (lam2, tmin2) != (lam, tmin)
        )
        if not shadowed:
            keep.append((lam, tmin, width))
    return keep


def extract_resonances(
    tmap: TransmissionMap, depth_sigmas: float = 3.0, max_jump_nm: float = 5.0
) -> list:
    """Per-column dip detection and cross-column branch tracking.

    Dips are tracked into branches by nearest-wavelength association
    with a per-step jump bound; a second candidate inside the bound
    flags the point as ambiguous.  Labels stay "unassigned" here; see
    ``label_branches``.  An empty result is valid (constant map).
    """
    order = np.argsort(tmap.lc_mm)
    points: list[ResonancePoint] = []
    open_tracks: list[dict] = []
    next_branch = 0
    for i in order:
        dips = _column_dips(tmap.wavelengths_nm, tmap.t[i], depth_sigmas)
        used = set()
        new_tracks = []
        for track in open_tracks:
            cands = [
                (abs(lam - track["lam"]), j)
                for j, (lam, _, _) in enumerate(dips)
                if j not in used and abs(lam - track["lam"]) <= max_jump_nm
            ]
            if not cands:
                continue
            cands.sort()
            _, j = cands[0]
            lam, tmin, width = dips[j]
            used.add(j)
            points.append(
                ResonancePoint(
                    lc_mm=float(tmap.lc_mm[i]),
                    lambda_min_nm=lam,
                    t_min=tmin,
                    fit_width_nm=width,
                    branch=track["branch"],
                    ambiguous=len(cands) > 1,
                )
            )
            track["lam"] = lam
            new_tracks.append(track)
        for j, (lam, tmin, width) in enumerate(dips):
            if j in used:
                continue
            points.append(
                ResonancePoint(
                    lc_mm=float(tmap.lc_mm[i]),
                    lambda_min_nm=lam,
                    t_min=tmin,
                    fit_width_nm=width,
                    branch=next_branch,
                )
            )
            new_tracks.append({"lam": lam, "branch": next_branch})
            next_branch += 1
        open_tracks = new_tracks
    return points


def label_branches(points: list, taper: TaperProfile) -> list:
    """Assign TE-1 / TE-2 labels from the dip drift against diameter.

    The contra-coupled (negative group velocity) branch phase-matches at
    longer wavelength as the taper gets thicker; a co-coupled branch
    with group index above the fiber's drifts the other way.
    """
    by_branch: dict[int, list[ResonancePoint]] = {}
    for p in points:
        by_branch.setdefault(p.branch, []).append(p)
    for branch_points in by_branch.values():
        if len(branch_points) < 3:
            continue
        lc = np.array([p.lc_mm for p in branch_points])
        lam = np.array([p.lambda_min_nm for p in branch_points])
        d = np.array([taper.diameter_at(v) for v in lc])
        if np.ptp(d) <= 0:
            continue
        slope = np.polyfit(d, lam, 1)[0]
        if abs(slope) < 1.0:  # nm per um of diameter: too flat to call
            label = "unassigned"
        else:
            label = "TE-1" if slope > 0 else "TE-2"
        for p in branch_points:
            p.label = label
    return points


def to_bandstructure(points: list, taper: TaperProfile, fiber: FiberSpec) -> list:
    """Resonances -> (beta, omega) samples through the fiber solver."""
    out = []
    for p in points:
        d = float(taper.diameter_at(p.lc_mm))
        lam_um = p.lambda_min_nm * 1e-3
        mode = fundamental_neff(fiber.with_diameter(d), lam_um)
        out.append(
            BandPoint(
                beta_rad_per_um=mode.beta_rad_per_um,
                omega_rad_per_s=2.0 * np.pi * C_UM_PER_S / lam_um,
                lambda_nm=p.lambda_min_nm,
                lc_mm=p.lc_mm,
                label=p.label,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Gap sweep
# ---------------------------------------------------------------------------


@dataclass
class GapSweepRow:
    gap_nm: float
    t_min: float
    t_max: float
    gamma: float
    kappa_l: float

    def to_dict(self):
        return {
            "gap_nm": self.gap_nm,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "gamma": self.gamma,
            "kappa_l": self.kappa_l,
        }


def gap_sweep(
    gaps_nm,
    coupler: CouplerConfig,
    fiber: FiberSpec,
    curve: BandCurve,
    lam_span_nm: float = 150.0,
    n_lam: int = 601,
    include_loss: bool = True,
) -> list:
    """On/off-resonance transmission, ideality, and inferred coupling per gap.

    The wavelength grid is centered on the phase-matching point of
    ``curve`` for this fiber diameter.  The inferred coupling strength
    is kappa_perp L_c = artanh(sqrt(1 - T_min/T_max)), which undoes the
    contra-directional transfer exactly in the lossless case.
    """
    pm = phase_match_crossing(curve, fiber)
    lam_nm = np.linspace(
        pm.lambda_nm - lam_span_nm / 2.0, pm.lambda_nm + lam_span_nm / 2.0, n_lam
    )
    lam_um = lam_nm * 1e-3
    beta_f = 2.0 * np.pi * dispersion_curve(fiber, lam_um) / lam_um
    beta_br = _branch_beta_of_lambda(curve, lam_nm)
    delta = 0.5 * (beta_f - beta_br)

    rows = []
    for g in np.asarray(gaps_nm, dtype=float):
        kappa = coupler.kappa_perp(fiber, float(np.mean(lam_um)), gap_nm=g)
        t, _ = contra_transmission(kappa, coupler.l_c_um, delta)
        if include_loss:
            t = t * coupler.scattering_transmission(fiber.d_um, gap_nm=g)
        t_min, t_max = float(np.min(t)), float(np.max(t))
        ratio = min(max(1.0 - t_min / t_max, 0.0), 1.0 - 1e-15)
        rows.append(
            GapSweepRow(
                gap_nm=float(g),
                t_min=t_min,
                t_max=t_max,
                gamma=t_max - t_min,
                kappa_l=float(np.arctanh(np.sqrt(ratio))),
            )
        )
    return rows
