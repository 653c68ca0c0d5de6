"""2D plane-wave bandstructure of the compressed square lattice and its
graded-defect waveguide modes.

TE polarization (in-plane electric field) in the out-of-plane magnetic
field scalar formulation:

    -div( (1/eps) grad H ) = (w/c)^2 H,
    Theta[i,j] = (k+G_i).(k+G_j) * inv(EPS)[i,j],

where EPS[i,j] = eps_hat(G_i - G_j) is built from the analytic
circular-hole Fourier factor and inverted numerically (the Ho-style
inverse rule, which converges much faster for TE than a direct Fourier
expansion of 1/eps).

The waveguide is a line defect along Gamma-X (the z axis, period L_z)
formed by laterally grading the hole radius; defect modes are computed
in a 1 x N-row supercell and identified by their field-energy
localization on the graded rows.

Units: lengths in um internally, frequencies reported both normalized
(L_z/lambda) and absolute (rad/s); beta in rad/um.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import EigensolverError, NoDefectModeError
from .fiber import C_UM_PER_S
from .slab import SlabSpec, slab_effective_index

_NEG_EIG_TOL = 1e-8


@dataclass(frozen=True)
class PCWaveguideSpec:
    """Compressed square lattice with a laterally graded line defect.

    ``grading`` lists per-row hole radii (fractions of the transverse
    lattice constant) from the center row outward; rows beyond it carry
    the bulk radius ``r_frac``.  The physical row list is symmetric
    about the center row by construction.
    """

    lam_z_nm: float = 500.0
    lam_x_nm: float = 400.0
    r_frac: float = 0.35
    grading: tuple = (0.31, 0.325, 0.34)
    supercell_rows: int = 17
    n_eff: float = 2.60
    pw_per_cell: int = 7

    def __post_init__(self):
        if self.lam_z_nm <= 0 or self.lam_x_nm <= 0:
            raise ValueError("lattice constants must be positive")
        radii = (self.r_frac,) + tuple(self.grading)
        if any(not 0.0 <= r < 0.5 for r in radii):
            raise ValueError("hole radii must lie in [0, 0.5) of the transverse pitch")
        # holes must not overlap along z either
        if any(2 * r * self.lam_x_nm >= self.lam_z_nm for r in radii):
            raise ValueError("holes overlap along the waveguide axis")
        if self.supercell_rows % 2 == 0 or self.supercell_rows < 1:
            raise ValueError("supercell_rows must be odd and positive")
        needed = 2 * len(self.grading) + 3 if self.grading else 1
        if self.supercell_rows < needed:
            raise ValueError(
                f"supercell_rows={self.supercell_rows} too small: the graded block "
                f"plus 4 buffer rows needs at least {needed}"
            )
        if self.n_eff <= 1.0:
            raise ValueError("in-plane effective index must exceed 1")
        if self.pw_per_cell % 2 == 0 or self.pw_per_cell < 3:
            raise ValueError("pw_per_cell must be odd and >= 3")

    @property
    def lam_z_um(self):
        return self.lam_z_nm * 1e-3

    @property
    def lam_x_um(self):
        return self.lam_x_nm * 1e-3

    @property
    def width_um(self):
        return self.supercell_rows * self.lam_x_um

    @property
    def eps_bg(self):
        return self.n_eff**2

    def bulk(self) -> "PCWaveguideSpec":
        """Uniform-lattice copy (no grading, single-row cell)."""
        return replace(self, grading=(), supercell_rows=1)

    def with_n_eff(self, n_eff: float) -> "PCWaveguideSpec":
        return replace(self, n_eff=n_eff)

    def row_radii_um(self) -> np.ndarray:
        """Hole radius per supercell row, center row first in the middle."""
        n = self.supercell_rows
        center = (n - 1) // 2
        radii = np.empty(n)
        for j in range(n):
            dist = abs(j - center)
            frac = self.grading[dist] if dist < len(self.grading) else self.r_frac
            radii[j] = frac * self.lam_x_um
        return radii

    def row_positions_um(self) -> np.ndarray:
        n = self.supercell_rows
        return (np.arange(n) - (n - 1) / 2.0) * self.lam_x_um

    def graded_halfwidth_um(self) -> float:
        """Half-width of the graded block (for the localization measure)."""
        if not self.grading:
            return 0.0
        return (len(self.grading) - 0.5) * self.lam_x_um

    def fill_fraction(self) -> float:
        """Area fraction of air in the supercell."""
        radii = self.row_radii_um()
        return float(np.sum(np.pi * radii**2) / (self.lam_z_um * self.width_um))


@dataclass
class BandCurve:
    """One labeled dispersion branch omega(beta) with derived group index."""

    label: str
    beta_rad_per_um: np.ndarray
    omega_norm: np.ndarray  # L_z / lambda
    lam_z_um: float
    parity: str = "none"

    def __post_init__(self):
        self.beta_rad_per_um = np.asarray(self.beta_rad_per_um, dtype=float)
        self.omega_norm = np.asarray(self.omega_norm, dtype=float)
        if self.beta_rad_per_um.shape != self.omega_norm.shape:
            raise ValueError("beta and omega sample arrays must match")
        if np.any(np.diff(self.beta_rad_per_um) <= 0):
            raise ValueError("samples must be ordered in beta")
        if np.any(self.omega_norm < 0):
            raise ValueError("frequencies must be non-negative")

    @property
    def beta_norm(self):
        return self.beta_rad_per_um * self.lam_z_um / (2.0 * np.pi)

    @property
    def lambda_nm(self):
        return 1e3 * self.lam_z_um / self.omega_norm

    @property
    def omega_rad_per_s(self):
        return 2.0 * np.pi * C_UM_PER_S * self.omega_norm / self.lam_z_um

    def group_index(self) -> np.ndarray:
        """n_g = c d(beta)/d(omega), centered differences of the samples."""
        bn = self.beta_norm
        return np.gradient(bn, edge_order=1) / np.gradient(self.omega_norm, edge_order=1)

    def mean_slope(self) -> float:
        """Mean d(omega)/d(beta) sign indicator (normalized units)."""
        return float(np.polyfit(self.beta_norm, self.omega_norm, 1)[0])

    def to_dict(self) -> dict:
        ng = self.group_index()
        return {
            "label": self.label,
            "parity": self.parity,
            "samples": [
                {
                    "beta_rad_per_um": float(b),
                    "omega_norm": float(o),
                    "lambda_nm": float(l),
                    "n_g": float(g),
                }
                for b, o, l, g in zip(
                    self.beta_rad_per_um, self.omega_norm, self.lambda_nm, ng
                )
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, lam_z_um: float) -> "BandCurve":
        samples = data["samples"]
        return cls(
            label=data["label"],
            beta_rad_per_um=np.array([s["beta_rad_per_um"] for s in samples]),
            omega_norm=np.array([s["omega_norm"] for s in samples]),
            lam_z_um=lam_z_um,
            parity=data.get("parity", "none"),
        )


# ---------------------------------------------------------------------------
# Fourier coefficients and the plane-wave operator
# ---------------------------------------------------------------------------


def _basis(spec: PCWaveguideSpec):
    """Reciprocal vectors of the supercell, cutoff scaled per unit cell."""
    p = (spec.pw_per_cell - 1) // 2
    mz = np.arange(-p, p + 1)
    px = p * spec.supercell_rows
    mx = np.arange(-px, px + 1)
    gz = 2.0 * np.pi / spec.lam_z_um
    gx = 2.0 * np.pi / spec.width_um
    MZ, MX = np.meshgrid(mz, mx, indexing="ij")
    g = np.stack([MZ.ravel() * gz, MX.ravel() * gx], axis=-1)
    return g, mz, mx


def _hole_factor(q, radius_um, cell_area_um2):
    """Fourier factor of one circular hole: 2 f J1(qR)/(qR); f at q=0."""
    from scipy.special import j1

    f = np.pi * radius_um**2 / cell_area_um2
    qr = q * radius_um
    out = np.full(np.shape(qr), f, dtype=float)
    nz = qr > 1e-12
    out[nz] = 2.0 * f * j1(qr[nz]) / qr[nz]
    return out


def epsilon_fourier(spec: PCWaveguideSpec, g_vec_rad_per_um) -> complex:
    """Fourier coefficient of the supercell permittivity at reciprocal vector G.

    G = 0 returns the area-weighted average; elsewhere the analytic
    circular-hole factor summed with per-row structure phases.
    """
    g = np.asarray(g_vec_rad_per_um, dtype=float)
    q = float(np.hypot(g[0], g[1]))
    area = spec.lam_z_um * spec.width_um
    radii = spec.row_radii_um()
    xs = spec.row_positions_um()
    coeff = 0.0 + 0.0j
    if q <= 1e-12:
        coeff += spec.eps_bg
    for r_um, x in zip(radii, xs):
        if r_um <= 0:
            continue
        factor = _hole_factor(np.array(q), r_um, area)[()]
        coeff += (1.0 - spec.eps_bg) * factor * np.exp(-1j * g[1] * x)
    return complex(coeff)


def _epsilon_matrix(spec: PCWaveguideSpec, mz, mx):
    """EPS[i,j] = eps_hat(G_i - G_j) over the truncated basis."""
    dmz = np.arange(-(mz[-1] - mz[0]), mz[-1] - mz[0] + 1)
    dmx = np.arange(-(mx[-1] - mx[0]), mx[-1] - mx[0] + 1)
    gz = 2.0 * np.pi / spec.lam_z_um
    gx = 2.0 * np.pi / spec.width_um
    DZ, DX = np.meshgrid(dmz * gz, dmx * gx, indexing="ij")
    q = np.hypot(DZ, DX)

    area = spec.lam_z_um * spec.width_um
    table = np.zeros(q.shape, dtype=complex)
    table[q <= 1e-12] = spec.eps_bg
    radii = spec.row_radii_um()
    xs = spec.row_positions_um()
    for r_um, x in zip(radii, xs):
        if r_um <= 0:
            continue
        table += (1.0 - spec.eps_bg) * _hole_factor(q, r_um, area) * np.exp(-1j * DX * x)

    nz, nx = len(mz), len(mx)
    iz, ix = np.divmod(np.arange(nz * nx), nx)
    diz = iz[:, None] - iz[None, :] + (len(dmz) - 1) // 2
    dix = ix[:, None] - ix[None, :] + (len(dmx) - 1) // 2
    return table[diz, dix]


class PlaneWaveSolver:
    """Dense TE plane-wave solver for one lattice/supercell geometry.

    The inverse permittivity matrix is factored once; each k-point then
    costs one Hermitian eigensolve.
    """

    def __init__(self, spec: PCWaveguideSpec):
        self.spec = spec
        self.g, self._mz, self._mx = _basis(spec)
        eps = _epsilon_matrix(spec, self._mz, self._mx)
        self.eps_inv = np.linalg.inv(eps)
        self.eps_inv = 0.5 * (self.eps_inv + self.eps_inv.conj().T)

    @property
    def n_pw(self):
        return self.g.shape[0]

    def solve_k(self, beta_rad_per_um: float, num_bands: int, vectors: bool = False):
        """Lowest eigenfrequencies (normalized L_z/lambda) at k = (beta, 0)."""
        kg = self.g.copy()
        kg[:, 0] += beta_rad_per_um
        theta = (kg @ kg.T) * self.eps_inv
        theta = 0.5 * (theta + theta.conj().T)
        nb = min(num_bands, self.n_pw)
        try:
            if vectors:
                vals, vecs = scipy.linalg.eigh(theta, subset_by_index=(0, nb - 1))
            else:
                vals = scipy.linalg.eigh(
                    theta, subset_by_index=(0, nb - 1), eigvals_only=True
                )
                vecs = None
        except scipy.linalg.LinAlgError as exc:
            raise EigensolverError(
                f"eigensolve failed at beta={beta_rad_per_um:.6f} rad/um "
                f"(n_pw={self.n_pw}): {exc}"
            ) from exc
        scale = max(abs(vals[-1]), 1.0)
        if vals[0] < -_NEG_EIG_TOL * scale:
            raise EigensolverError(
                f"operator not positive semi-definite at beta={beta_rad_per_um:.6f}: "
                f"min eigenvalue {vals[0]:.3e} (scale {scale:.3e})"
            )
        vals = np.clip(vals, 0.0, None)
        omega_norm = np.sqrt(vals) * self.spec.lam_z_um / (2.0 * np.pi)
        return (omega_norm, vecs) if vectors else omega_norm

    # -- real-space diagnostics ------------------------------------------

    def field_profile_x(self, vec: np.ndarray, n_x: int = 0):
        """|H|^2 integrated over z, on a symmetric transverse grid."""
        if n_x <= 0:
            n_x = 16 * self.spec.supercell_rows
        x = (np.arange(n_x) + 0.5 - n_x / 2.0) * (self.spec.width_um / n_x)
        gx = self._mx * (2.0 * np.pi / self.spec.width_um)
        phase = np.exp(1j * np.outer(gx, x))
        amp = vec.reshape(len(self._mz), len(self._mx)) @ phase
        return x, np.sum(np.abs(amp) ** 2, axis=0), amp

    def localization(self, vec: np.ndarray) -> float:
        """Fraction of |H|^2 energy inside the graded rows."""
        x, energy, _ = self.field_profile_x(vec)
        half = self.spec.graded_halfwidth_um()
        total = float(np.sum(energy))
        if total <= 0 or half <= 0:
            return 0.0
        return float(np.sum(energy[np.abs(x) <= half]) / total)

    def parity_score(self, vec: np.ndarray) -> float:
        """+1 for H even about the waveguide axis, -1 for odd."""
        _, _, amp = self.field_profile_x(vec)
        mirrored = amp[:, ::-1]
        sym = 0.5 * (amp + mirrored)
        anti = 0.5 * (amp - mirrored)
        es, ea = float(np.sum(np.abs(sym) ** 2)), float(np.sum(np.abs(anti) ** 2))
        if es + ea == 0:
            return 0.0
        return (es - ea) / (es + ea)


# ---------------------------------------------------------------------------
# Bulk bands
# ---------------------------------------------------------------------------


@dataclass
class BulkBandsResult:
    curves: list
    gap_norm: tuple | None  # (valence edge, conduction edge) in L_z/lambda

    @property
    def has_gap(self):
        return self.gap_norm is not None


def default_kpath_norm(n_k: int = 41, start: float = 0.0, stop: float = 0.5):
    """Normalized beta grid (beta L_z / 2pi) along Gamma-X."""
    return np.linspace(start, stop, n_k)


def bulk_bands(spec: PCWaveguideSpec, kpath_norm=None, num_bands: int = 6) -> BulkBandsResult:
    """TE bands of the uniform lattice along Gamma-X, plus the first stop band.

    The spec must be uniform (use ``spec.bulk()`` to strip a grading).
    """
    if spec.grading:
        raise ValueError("bulk_bands needs a uniform lattice; use spec.bulk()")
    if kpath_norm is None:
        kpath_norm = default_kpath_norm()
    kpath_norm = np.asarray(kpath_norm, dtype=float)
    solver = PlaneWaveSolver(spec)
    omega = np.empty((kpath_norm.size, num_bands))
    for i, bn in enumerate(kpath_norm):
        omega[i] = solver.solve_k(bn * 2.0 * np.pi / spec.lam_z_um, num_bands)

    beta = kpath_norm * 2.0 * np.pi / spec.lam_z_um
    order = np.argsort(beta)
    curves = [
        BandCurve(
            label=f"bulk-{b + 1}",
            beta_rad_per_um=beta[order],
            omega_norm=omega[order, b],
            lam_z_um=spec.lam_z_um,
        )
        for b in range(num_bands)
    ]
    gap = None
    if num_bands >= 2:
        lo = float(np.max(omega[:, 0]))
        hi = float(np.min(omega[:, 1]))
        if hi > lo:
            gap = (lo, hi)
    return BulkBandsResult(curves=curves, gap_norm=gap)


def local_gap(bulk: BulkBandsResult, beta_norm: float) -> tuple:
    """k-resolved stop band (band-1 edge, band-2 edge) at one Gamma-X point.

    The donor defect branch detaches below the *local* conduction-band
    edge, which disperses along the path; this is the window that
    brackets the TE-1 frequency at the phase-matching point.
    """
    b1, b2 = bulk.curves[0], bulk.curves[1]
    lo = float(np.interp(beta_norm, b1.beta_norm, b1.omega_norm))
    hi = float(np.interp(beta_norm, b2.beta_norm, b2.omega_norm))
    return lo, hi


# ---------------------------------------------------------------------------
# Supercell waveguide bands
# ---------------------------------------------------------------------------


@dataclass
class WaveguideBandsResult:
    curves: list  # labeled defect BandCurves
    gap_norm: tuple | None
    kpath_norm: np.ndarray
    all_omega_norm: np.ndarray  # (n_k, num_bands), for diagnostics
    spec: PCWaveguideSpec = field(repr=False, default=None)

    def curve(self, label: str) -> BandCurve:
        for c in self.curves:
            if c.label == label:
                return c
        raise KeyError(f"no branch labeled {label!r}; have {[c.label for c in self.curves]}")


@dataclass(frozen=True)
class DispersiveIndex:
    """Wavelength-dependent slab effective index for the 2D model.

    The vertical mode of the membrane is strongly dispersive (its group
    index is well above its phase index), which flattens the in-plane
    defect branches.  Solving the 2D bands self-consistently with
    n_eff(lambda) restores that flattening; a fixed-index solve
    systematically overestimates the defect-mode group velocity.
    """

    slab: SlabSpec
    vertical_order: int = 0
    lam_ref_um: float = 1.6

    def n(self, lam_um: float) -> float:
        return slab_effective_index(self.slab, lam_um, self.vertical_order)

    @property
    def n_ref(self) -> float:
        return self.n(self.lam_ref_um)


def _track_branches(kpath_norm, cand_per_k):
    """Greedy eigenvector-overlap tracking of defect candidates across k.

    ``cand_per_k``: list over k of lists of (omega_norm, vec, loc, par).
    Returns list of branches, each a list of (ik, omega, loc, par).
    """
    branches = []  # each: {"samples": [(ik, omega, loc, par)], "vec": last vector}
    for ik, cands in enumerate(cand_per_k):
        taken = set()
        # extend existing branches first, best overlap wins
        for br in branches:
            if br["samples"][-1][0] != ik - 1:
                continue
            best, best_ov = None, 0.35
            for j, (om, vec, loc, par) in enumerate(cands):
                if j in taken:
                    continue
                ov = abs(np.vdot(br["vec"], vec))
                if ov > best_ov:
                    best, best_ov = j, ov
            if best is not None:
                om, vec, loc, par = cands[best]
                br["samples"].append((ik, om, loc, par))
                br["vec"] = vec
                taken.add(best)
        for j, (om, vec, loc, par) in enumerate(cands):
            if j not in taken:
                branches.append({"samples": [(ik, om, loc, par)], "vec": vec})
    return branches


def waveguide_bands(
    spec: PCWaveguideSpec,
    kpath_norm=None,
    num_bands: int | None = None,
    localization_threshold: float = 0.5,
    require_defect: bool = True,
    dispersive: DispersiveIndex | None = None,
) -> WaveguideBandsResult:
    """Supercell bands with the graded-defect branches identified and labeled.

    Defect branches are eigenstates inside the bulk stop band whose
    |H|^2 energy fraction on the graded rows exceeds
    ``localization_threshold``; they are tracked across k by eigenvector
    overlap.  The even branch with negative group velocity (connected to
    the conduction-band edge) is labeled TE-1; its odd-parity
    counterpart, when present, TE-1-odd.

    With ``dispersive`` given, the defect branches are made
    self-consistent with the wavelength-dependent slab index: the local
    sensitivity of each sample to the background index is measured from
    a second fixed-index solve, and each sample frequency then solves
    omega = omega_2D(beta; n_eff(lambda(omega))).
    """
    if dispersive is not None:
        return _waveguide_bands_dispersive(
            spec, dispersive, kpath_norm, num_bands, localization_threshold,
            require_defect,
        )
    if not spec.grading:
        raise ValueError("waveguide_bands needs a graded defect")
    if kpath_norm is None:
        kpath_norm = default_kpath_norm(23, 0.28, 0.5)
    kpath_norm = np.asarray(kpath_norm, dtype=float)
    if num_bands is None:
        num_bands = 2 * spec.supercell_rows + 8

    bulk = bulk_bands(spec.bulk(), kpath_norm=default_kpath_norm(26), num_bands=2)
    gap = bulk.gap_norm
    if gap is None:
        raise NoDefectModeError("uniform lattice shows no Gamma-X stop band")

    solver = PlaneWaveSolver(spec)
    all_omega = np.empty((kpath_norm.size, num_bands))
    cand_per_k = []
    for i, bn in enumerate(kpath_norm):
        omega, vecs = solver.solve_k(
            bn * 2.0 * np.pi / spec.lam_z_um, num_bands, vectors=True
        )
        all_omega[i] = omega
        # Defect states live in the k-resolved stop band: below the local
        # conduction-band edge (which disperses along Gamma-X), above the
        # local valence edge.
        lo, hi = local_gap(bulk, bn)
        cands = []
        inside = np.where((omega > lo) & (omega < hi * (1.0 - 1e-9)))[0]
        for j in inside:
            loc = solver.localization(vecs[:, j])
            if loc > localization_threshold:
                cands.append((omega[j], vecs[:, j], loc, solver.parity_score(vecs[:, j])))
        cand_per_k.append(cands)

    branches = [
        b for b in _track_branches(kpath_norm, cand_per_k) if len(b["samples"]) >= 3
    ]
    if not branches:
        if require_defect:
            raise NoDefectModeError(
                "no localized branch found inside the gap "
                f"({gap[0]:.4f}, {gap[1]:.4f}); grading too weak or threshold too strict"
            )
        return WaveguideBandsResult([], gap, kpath_norm, all_omega, spec)

    curves = []
    for br in branches:
        ik = np.array([s[0] for s in br["samples"]])
        om = np.array([s[1] for s in br["samples"]])
        par = float(np.mean([s[3] for s in br["samples"]]))
        beta = kpath_norm[ik] * 2.0 * np.pi / spec.lam_z_um
        order = np.argsort(beta)
        parity = "even" if par > 0.5 else ("odd" if par < -0.5 else "mixed")
        curves.append(
            BandCurve(
                label="defect",
                beta_rad_per_um=beta[order],
                omega_norm=om[order],
                lam_z_um=spec.lam_z_um,
                parity=parity,
            )
        )

    _label_defect_curves(curves)
    return WaveguideBandsResult(curves, gap, kpath_norm, all_omega, spec)


def _label_defect_curves(curves):
    """Assign TE-1 / TE-1-odd labels by slope sign and lateral parity."""
    neg_even = [c for c in curves if c.mean_slope() < 0 and c.parity == "even"]
    neg_odd = [c for c in curves if c.mean_slope() < 0 and c.parity == "odd"]
    neg_even.sort(key=lambda c: float(np.mean(c.omega_norm)))
    neg_odd.sort(key=lambda c: float(np.mean(c.omega_norm)))
    if neg_even:
        neg_even[0].label = "TE-1"
        for i, c in enumerate(neg_even[1:], start=2):
            c.label = f"TE-1-even-{i}"
    if neg_odd:
        neg_odd[0].label = "TE-1-odd"
        for i, c in enumerate(neg_odd[1:], start=2):
            c.label = f"TE-1-odd-{i}"
    rest = [c for c in curves if c.label == "defect"]
    for i, c in enumerate(rest, start=1):
        c.label = f"defect-{i}"


_SENSITIVITY_STEP = 0.015  # relative n_eff step used to probe d(omega)/d(n_eff)


def _waveguide_bands_dispersive(
    spec, dispersive, kpath_norm, num_bands, localization_threshold, require_defect
):
    from scipy.optimize import brentq

    n_ref = dispersive.n_ref
    base = waveguide_bands(
        spec.with_n_eff(n_ref), kpath_norm, num_bands, localization_threshold,
        require_defect,
    )
    n_lo = n_ref * (1.0 - _SENSITIVITY_STEP)
    probe = waveguide_bands(
        spec.with_n_eff(n_lo), base.kpath_norm, num_bands, localization_threshold,
        require_defect=False,
    )

    for curve in base.curves:
        # local sensitivity exponent S: omega ~ n_eff^-S (S < 1: the air
        # holes do not scale with the background index)
        s_default = _edge_sensitivity(spec, n_ref, n_lo)
        s_beta, s_val = [], []
        try:
            partner = probe.curve(curve.label)
        except KeyError:
            partner = None
        if partner is not None:
            common, ia, ib = np.intersect1d(
                np.round(curve.beta_norm, 9), np.round(partner.beta_norm, 9),
                return_indices=True,
            )
            for bi, pj in zip(ia, ib):
                w1, w2 = curve.omega_norm[bi], partner.omega_norm[pj]
                if w1 > 0 and w2 > 0:
                    s_beta.append(curve.beta_norm[bi])
                    s_val.append(np.log(w2 / w1) / np.log(n_ref / n_lo))
        if s_beta:
            s_of_beta = lambda b: np.interp(b, s_beta, s_val)  # noqa: E731
        else:
            s_of_beta = lambda b: s_default  # noqa: E731

        lamz = spec.lam_z_um
        new_omega = np.empty_like(curve.omega_norm)
        for i, (bn, w1) in enumerate(zip(curve.beta_norm, curve.omega_norm)):
            s_i = float(s_of_beta(bn))

            def fixed_point(w):
                n_w = dispersive.n(lamz / w)
                return w - w1 * (n_ref / n_w) ** s_i

            try:
                new_omega[i] = brentq(fixed_point, 0.6 * w1, 1.6 * w1, xtol=1e-13)
            except ValueError:
                new_omega[i] = w1  # no sign change: leave at fixed-index value
        curve.omega_norm = new_omega
    return base


def _edge_sensitivity(spec, n_ref, n_lo):
    """Global fallback exponent from the conduction-band edge at X."""
    betas = np.array([0.5])
    hi = PlaneWaveSolver(spec.bulk().with_n_eff(n_ref)).solve_k(
        betas[0] * 2 * np.pi / spec.lam_z_um, 2
    )[1]
    lo = PlaneWaveSolver(spec.bulk().with_n_eff(n_lo)).solve_k(
        betas[0] * 2 * np.pi / spec.lam_z_um, 2
    )[1]
    return float(np.log(lo / hi) / np.log(n_ref / n_lo))


def defect_profile(spec: PCWaveguideSpec, curve: BandCurve, beta_norm: float):
    """Signed lateral amplitude of a defect branch at one k-point.

    Returns (x_um, u) with u the m_z = 0 harmonic of H (the component
    that phase-matches a co-reduced external wave), normalized to unit
    power: integral |u|^2 dx = 1.  u keeps the lateral sign, so odd
    branches yield an antisymmetric profile.
    """
    solver = PlaneWaveSolver(spec)
    nb = 2 * spec.supercell_rows + 8
    omega, vecs = solver.solve_k(
        beta_norm * 2.0 * np.pi / spec.lam_z_um, nb, vectors=True
    )
    target = float(np.interp(beta_norm, curve.beta_norm, curve.omega_norm))
    want_odd = curve.parity == "odd"
    best, best_score = None, np.inf
    for j in range(nb):
        if solver.localization(vecs[:, j]) < 0.4:
            continue
        par = solver.parity_score(vecs[:, j])
        if want_odd and par > -0.5:
            continue
        if not want_odd and par < 0.5:
            continue
        score = abs(omega[j] - target)
        if score < best_score:
            best, best_score = j, score
    if best is None:
        raise NoDefectModeError(
            f"no localized {curve.parity} state found at beta_norm={beta_norm:.4f}"
        )
    vec = vecs[:, best]
    n_x = 16 * spec.supercell_rows
    x = (np.arange(n_x) + 0.5 - n_x / 2.0) * (spec.width_um / n_x)
    mz0 = (len(solver._mz) - 1) // 2
    gx = solver._mx * (2.0 * np.pi / spec.width_um)
    u = vec.reshape(len(solver._mz), len(solver._mx))[mz0] @ np.exp(1j * np.outer(gx, x))
    # fix the arbitrary global phase so u is (nearly) real positive at its peak
    peak = np.argmax(np.abs(u))
    u = u * np.exp(-1j * np.angle(u[peak]))
    dx = spec.width_um / n_x
    u = u / np.sqrt(np.sum(np.abs(u) ** 2) * dx)
    return x, u


# ---------------------------------------------------------------------------
# Phase matching against the fiber
# ---------------------------------------------------------------------------


@dataclass
class PhaseMatchPoint:
    beta_rad_per_um: float
    lambda_nm: float
    omega_norm: float
    n_g_branch: float
    fiber_d_um: float


def phase_match_crossing(curve: BandCurve, fiber_spec, lam_window_nm=None) -> PhaseMatchPoint:
    """Crossing of a PCWG branch with the fiber dispersion curve.

    Solves beta_fiber(lambda) = beta_branch(lambda) on the branch's
    sampled interval (optionally restricted to ``lam_window_nm``); both
    curves are exact, the branch linearly interpolated between samples.

    Raises
    ------
    BandCoverageError
        If no crossing lies on the sampled interval.
    """
    from .errors import BandCoverageError
    from .fiber import dispersion_curve

    lam_um = curve.lam_z_um / curve.omega_norm
    mask = np.ones(lam_um.size, dtype=bool)
    if lam_window_nm is not None:
        mask = (lam_um * 1e3 >= lam_window_nm[0]) & (lam_um * 1e3 <= lam_window_nm[1])
        if mask.sum() < 2:
            raise BandCoverageError(
                f"branch {curve.label!r} has <2 samples in window {lam_window_nm}"
            )
    nf = dispersion_curve(fiber_spec, lam_um[mask])
    beta_fiber = 2.0 * np.pi * nf / lam_um[mask]
    diff = curve.beta_rad_per_um[mask] - beta_fiber
    sign = np.where(np.sign(diff[:-1]) != np.sign(diff[1:]))[0]
    if sign.size == 0:
        raise BandCoverageError(
            f"branch {curve.label!r} does not cross the d={fiber_spec.d_um} um "
            f"fiber curve on its sampled interval"
        )
    i = int(sign[0])
    t = diff[i] / (diff[i] - diff[i + 1])
    beta = float((1 - t) * curve.beta_rad_per_um[mask][i] + t * curve.beta_rad_per_um[mask][i + 1])
    omega = float((1 - t) * curve.omega_norm[mask][i] + t * curve.omega_norm[mask][i + 1])
    ng = curve.group_index()[mask]
    ng_star = float((1 - t) * ng[i] + t * ng[i + 1])
    return PhaseMatchPoint(
        beta_rad_per_um=beta,
        lambda_nm=1e3 * curve.lam_z_um / omega,
        omega_norm=omega,
        n_g_branch=ng_star,
        fiber_d_um=fiber_spec.d_um,
    )


# ---------------------------------------------------------------------------
# Slab-thinning response
# ---------------------------------------------------------------------------


@dataclass
class ThinningShift:
    """Per-branch frequency shift when the membrane is thinned."""

    d_omega_norm: dict  # label -> shift in L_z/lambda units
    lam_z_um: float

    def d_omega_rad_per_s(self, label: str) -> float:
        return 2.0 * np.pi * C_UM_PER_S * self.d_omega_norm[label] / self.lam_z_um


def thinning_shift(
    spec: PCWaveguideSpec,
    slab: SlabSpec,
    t_thin_nm: float,
    lam_um: float = 1.6,
    kpath_norm=None,
) -> ThinningShift:
    """Band shifts for thinning the membrane from slab.t_nm to t_thin_nm.

    TE-1: mean shift of the supercell defect branch, recomputed with the
    order-0 effective index of each thickness.  TE-2 is hosted by the
    second-order vertical band; its shift is tracked on the (bulk)
    valence band edge at X computed with the order-1 index, which is
    what sets how fast it moves with thickness.  Raises ModeCutoffError
    if order 1 is below cutoff at either thickness.
    """
    if t_thin_nm == slab.t_nm:
        return ThinningShift({"TE-1": 0.0, "TE-2": 0.0}, spec.lam_z_um)

    thin = slab.thinned(t_thin_nm)
    n0_thick = slab_effective_index(slab, lam_um, 0)
    n0_thin = slab_effective_index(thin, lam_um, 0)
    n1_thick = slab_effective_index(slab, lam_um, 1)
    n1_thin = slab_effective_index(thin, lam_um, 1)

    if kpath_norm is None:
        kpath_norm = default_kpath_norm(13, 0.34, 0.5)

    te1 = {}
    for tag, n_eff in (("thick", n0_thick), ("thin", n0_thin)):
        res = waveguide_bands(spec.with_n_eff(n_eff), kpath_norm=kpath_norm)
        te1[tag] = res.curve("TE-1")
    common = np.intersect1d(
        np.round(te1["thick"].beta_norm, 9), np.round(te1["thin"].beta_norm, 9)
    )
    if common.size == 0:
        raise NoDefectModeError("TE-1 branches at the two thicknesses share no k-points")
    shift_te1 = float(
        np.mean(
            [
                te1["thin"].omega_norm[np.round(te1["thin"].beta_norm, 9) == b][0]
                - te1["thick"].omega_norm[np.round(te1["thick"].beta_norm, 9) == b][0]
                for b in common
            ]
        )
    )

    edge = {}
    for tag, n_eff in (("thick", n1_thick), ("thin", n1_thin)):
        res = bulk_bands(spec.bulk().with_n_eff(n_eff), num_bands=2)
        edge[tag] = float(np.max(res.curves[0].omega_norm))
    shift_te2 = edge["thin"] - edge["thick"]

    return ThinningShift({"TE-1": shift_te1, "TE-2": shift_te2}, spec.lam_z_um)
