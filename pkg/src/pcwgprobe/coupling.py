"""Coupled-mode theory of the taper / PCWG junction.

Lossless two-mode transfer functions for contra- and co-directional
coupling, the field-overlap coupling coefficient, the scattering-loss
model, and the efficiency metrics (ideality from transmission and from
back-reflection, Fabry-Perot end reflectivity from fringe contrast).

Conventions: kappa and the detuning Delta are in 1/um, interaction
lengths in um, gaps in nm.  Delta = (beta_fiber - beta_wg)/2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientFringesError, NonPhysicalContrastError
from .fiber import FiberSpec, ModeField, exterior_decay

# Reference coupling amplitude: kappa_perp * L_c = 4.0 at the reference
# point (g = 250 nm gap, d = 1.9 um taper), which puts the on-resonance
# transmission floor well below 1% there.  The gap law away from the
# reference follows the fiber mode's own evanescent decay constant; the
# diameter factor exp(-(d_ref - d)/d_kappa) is calibrated so a 1.0 um
# taper at g = 400 nm reaches a resonant dip of ~0.9 (kappa L_c = 1.82).
KAPPA_REF_L = 4.0
G_REF_NM = 250.0
D_REF_UM = 1.9
D_KAPPA_UM = 2.0393


@dataclass(frozen=True)
class CouplerConfig:
    """Taper-PCWG junction parameters and calibrated coupling defaults."""

    gap_nm: float = 700.0
    l_c_um: float = 60.0
    dx_um: float = 0.0
    kappa_ref_l: float = KAPPA_REF_L
    g_ref_nm: float = G_REF_NM
    d_ref_um: float = D_REF_UM
    d_kappa_um: float = D_KAPPA_UM
    g0_nm: float | None = None  # None: derive 1/gamma from the fiber solve
    # broadband scattering loss: fraction lost at (g = 400 nm, d = 1.0 um),
    # growing exponentially toward small gaps and small diameters
    scatter_loss_ref: float = 0.10
    scatter_g_scale_nm: float = 250.0
    scatter_d_scale_um: float = 0.55

    def __post_init__(self):
        if self.gap_nm < 0 or self.l_c_um <= 0:
            raise ValueError("need gap >= 0 and L_c > 0")
        if self.kappa_ref_l < 0:
            raise ValueError("coupling amplitude must be >= 0")

    def decay_per_um(self, fiber: FiberSpec, lam_um: float) -> float:
        """Gap decay rate of kappa: the fiber exterior decay constant."""
        if self.g0_nm is not None:
            return 1e3 / self.g0_nm
        return exterior_decay(fiber, lam_um)

    def kappa_perp(self, fiber: FiberSpec, lam_um: float, gap_nm=None) -> float:
        """Parametric kappa_perp(g, d) [1/um].

        kappa = (kappa_ref_l / L_c) e^(-gamma(d) (g - g_ref)) e^(-(d_ref - d)/d_kappa)
        """
        g = self.gap_nm if gap_nm is None else gap_nm
        gamma = self.decay_per_um(fiber, lam_um)
        kappa_ref = self.kappa_ref_l / self.l_c_um
        size = np.exp(-(self.d_ref_um - fiber.d_um) / self.d_kappa_um)
        return kappa_ref * size * float(np.exp(-gamma * (g - self.g_ref_nm) * 1e-3))

    def scattering_transmission(self, d_um: float, gap_nm=None) -> float:
        """Off-resonance power transmission 1 - loss(g, d), broadband."""
        g = self.gap_nm if gap_nm is None else gap_nm
        loss = (
            self.scatter_loss_ref
            * np.exp(-(g - 400.0) / self.scatter_g_scale_nm)
            * np.exp(-(d_um - 1.0) / self.scatter_d_scale_um)
        )
        return 1.0 - float(np.clip(loss, 0.0, 0.5))


@dataclass(frozen=True)
class CouplingMetrics:
    """Efficiency numbers extracted from one coupling measurement."""

    t_min: float
    t_max: float
    gamma: float
    r_max: float | None = None
    r_sq: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.t_min <= self.t_max <= 1.0:
            raise ValueError("need 0 <= T_min <= T_max <= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("ideality must lie in [0, 1]")


# ---------------------------------------------------------------------------
# Two-mode transfer functions
# ---------------------------------------------------------------------------


def contra_transmission(kappa_per_um, l_um, delta_per_um):
    """Contra-directional (Bragg-mediated) transfer: (T, C) power fractions.

    T = s^2 / (s^2 cosh^2 sL + Delta^2 sinh^2 sL) with s^2 = kappa^2 -
    Delta^2; the oscillatory branch (|Delta| > kappa) is the analytic
    continuation sinh -> sin.  Lossless: T + C = 1 at every detuning.
    """
    kappa = np.asarray(kappa_per_um, dtype=float)
    delta = np.asarray(delta_per_um, dtype=float)
    kappa, delta = np.broadcast_arrays(kappa, delta)
    x = kappa**2 - delta**2  # s^2, either sign
    sl2 = np.abs(x) * l_um**2
    root = np.sqrt(np.sqrt(sl2))  # |s| L enters only via sinh^2/sin^2
    sl = root * root
    # q = sinh(sL)^2 / s^2 (hyperbolic), sin(sigma L)^2 / sigma^2 (oscillatory),
    # L^2 at the degenerate point; continuous in x.
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(
            x > 0,
            np.sinh(sl) ** 2 / np.where(x != 0, np.abs(x), 1.0),
            np.sin(sl) ** 2 / np.where(x != 0, np.abs(x), 1.0),
        )
    q = np.where(x == 0, l_um**2, q)
    t = 1.0 / (1.0 + kappa**2 * q)
    c = (kappa**2 * q) / (1.0 + kappa**2 * q)
    if t.ndim == 0:
        return float(t), float(c)
    return t, c


def co_transmission(kappa_per_um, l_um, delta_per_um):
    """Co-directional transfer: C = kappa^2/(kappa^2+Delta^2) sin^2(L sqrt(...))."""
    kappa = np.asarray(kappa_per_um, dtype=float)
    delta = np.asarray(delta_per_um, dtype=float)
    kappa, delta = np.broadcast_arrays(kappa, delta)
    s2 = kappa**2 + delta**2
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(
            s2 > 0,
            kappa**2 / np.where(s2 > 0, s2, 1.0) * np.sin(l_um * np.sqrt(s2)) ** 2,
            0.0,
        )
    t = 1.0 - c
    if t.ndim == 0:
        return float(t), float(c)
    return t, c


# ---------------------------------------------------------------------------
# Field-overlap coupling coefficient
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaveguideProfile:
    """Transverse profile of a PCWG branch for overlap integrals.

    ``x_um``/``u`` sample the signed lateral amplitude (unit power:
    integral |u|^2 dx = 1); the vertical tail above the slab decays at
    ``gamma_v_per_um``; ``beta_rad_per_um`` is the branch propagation
    constant at the evaluation point.
    """

    x_um: np.ndarray
    u: np.ndarray
    beta_rad_per_um: float
    lam_um: float
    slab_t_um: float = 0.34
    eps_bg: float = 2.60**2

    def __post_init__(self):
        x = np.asarray(self.x_um, dtype=float)
        u = np.asarray(self.u)
        object.__setattr__(self, "x_um", x)
        object.__setattr__(self, "u", u)
        if x.shape != u.shape or x.ndim != 1:
            raise ValueError("x and u must be matching 1-D arrays")

    def norm_residual(self) -> float:
        dx = float(np.mean(np.diff(self.x_um)))
        return abs(float(np.sum(np.abs(self.u) ** 2) * dx) - 1.0)


def kappa_overlap(
    fiber_mode: ModeField,
    wg: WaveguideProfile,
    gap_nm: float,
    dx_um: float = 0.0,
    n_vertical: int = 9,
) -> float:
    """Coupling coefficient from the field overlap, kappa_perp [1/um].

    Quasi-scalar estimate: kappa ~ (k0^2 / 2 sqrt(beta_f beta_wg)) *
    integral of Delta_eps E_fiber* E_wg over the slab cross-section,
    with the fiber mode displaced laterally by dx and vertically by the
    surface gap.  Both inputs must be power-normalized.
    """
    if wg.norm_residual() > 1e-6:
        raise ValueError("waveguide profile is not power-normalized")
    if gap_nm < 0:
        raise ValueError("gap must be >= 0")
    lam = fiber_mode.point.wavelength_um
    k0 = 2.0 * np.pi / lam
    beta_f = fiber_mode.point.beta_rad_per_um
    h_um = gap_nm * 1e-3 + fiber_mode.spec.d_um / 2.0  # fiber axis above slab top

    t = wg.slab_t_um
    depth = (np.arange(n_vertical) + 0.5) * (t / n_vertical)
    xx = wg.x_um[:, None] - dx_um
    rr = np.hypot(xx, h_um + depth[None, :])
    psi_f = fiber_mode.radial(rr)  # exterior tail over the slab section
    vert = np.sum(psi_f, axis=1) * (t / n_vertical) / np.sqrt(t)

    dx_grid = float(np.mean(np.diff(wg.x_um)))
    overlap = np.sum(np.real(wg.u) * vert) * dx_grid
    d_eps = wg.eps_bg - 1.0
    return float(
        k0**2 / (2.0 * np.sqrt(beta_f * wg.beta_rad_per_um)) * d_eps * overlap
    )


# ---------------------------------------------------------------------------
# Efficiency metrics
# ---------------------------------------------------------------------------


def ideality_from_transmission(t_min: float, t_max: float) -> float:
    """Gamma = (1 - T_min) - (1 - T_max): resonant dip minus broadband loss."""
    if not 0.0 <= t_min <= t_max <= 1.0:
        raise ValueError(f"need 0 <= T_min <= T_max <= 1, got ({t_min}, {t_max})")
    return t_max - t_min


def ideality_from_reflection(r_max: float, r_sq: float) -> float:
    """Gamma = sqrt(R_max / r^2) from peak back-reflection and end reflectivity.

    Values above 1 indicate inconsistent inputs (R_max larger than the
    end mirror can return); they are returned as-is with a warning.
    """
    if r_sq <= 0.0:
        raise ValueError("end reflectivity r^2 must be positive")
    if not 0.0 <= r_max <= 1.0 or r_sq > 1.0:
        raise ValueError("reflectances must lie in [0, 1]")
    gamma = float(np.sqrt(r_max / r_sq))
    if gamma > 1.0:
        warnings.warn(
            f"ideality {gamma:.3f} > 1: R_max={r_max} inconsistent with r^2={r_sq}",
            stacklevel=2,
        )
    return gamma


def _refined_extrema(t: np.ndarray):
    """Strict local extrema with 3-point parabolic value refinement."""
    maxima, minima = [], []
    for j in range(1, len(t) - 1):
        left, mid, right = t[j - 1], t[j], t[j + 1]
        curv = left - 2.0 * mid + right
        if mid > left and mid > right:
            val = mid - (right - left) ** 2 / (8.0 * curv) if curv != 0 else mid
            maxima.append(val)
        elif mid < left and mid < right:
            val = mid - (right - left) ** 2 / (8.0 * curv) if curv != 0 else mid
            minima.append(val)
    return maxima, minima


def fp_reflectivity(transmission) -> float:
    """End reflectivity r^2 from Fabry-Perot fringe contrast.

    For a lossless symmetric cavity the fringe contrast is
    C = (T_max - T_min)/(T_max + T_min) = 2 r^2 / (1 + r^4), inverted
    here as r^2 = (1 - sqrt(1 - C^2))/C.  Needs at least 3 fringe
    extrema; a flat spectrum returns 0.
    """
    t = np.asarray(transmission, dtype=float)
    if t.ndim != 1 or t.size < 5:
        raise InsufficientFringesError("need a 1-D spectrum with >= 5 samples")
    scale = max(abs(float(np.max(t))), 1e-300)
    if float(np.ptp(t)) <= 1e-9 * scale:
        return 0.0
    maxima, minima = _refined_extrema(t)
    if len(maxima) + len(minima) < 3:
        raise InsufficientFringesError(
            f"found {len(maxima)} maxima + {len(minima)} minima, need >= 3 extrema"
        )
    t_hi = float(np.mean(maxima))
    t_lo = float(np.mean(minima))
    contrast = (t_hi - t_lo) / (t_hi + t_lo)
    if contrast > 1.0:
        raise NonPhysicalContrastError(f"fringe contrast {contrast:.3f} > 1")
    if contrast <= 0.0:
        return 0.0
    return float((1.0 - np.sqrt(1.0 - contrast**2)) / contrast)


# ---------------------------------------------------------------------------
# Lateral probe response
# ---------------------------------------------------------------------------


@dataclass
class LateralProfileResult:
    dx_um: np.ndarray
    kappa_per_um: np.ndarray
    one_minus_tmin: np.ndarray
    fwhm_um: float


def lateral_profile(
    fiber_mode: ModeField,
    wg: WaveguideProfile,
    gap_nm: float,
    l_c_um: float,
    dx_um,
    kappa_at_center: float | None = None,
) -> LateralProfileResult:
    """Coupling versus lateral taper offset, and the FWHM of 1 - T_min.

    1 - T_min(dx) = tanh^2(kappa(dx) L_c) with kappa(dx) from the field
    overlap; when ``kappa_at_center`` is given the overlap shape is
    rescaled to that amplitude at dx = 0 (calibrated strength, computed
    shape).  The sweep must be symmetric about 0; the FWHM is read off
    by linear interpolation between samples.
    """
    dx = np.asarray(dx_um, dtype=float)
    if dx.ndim != 1 or dx.size < 5:
        raise ValueError("need a 1-D sweep with >= 5 offsets")
    if np.max(np.abs(dx + dx[::-1])) > 1e-9:
        raise ValueError("sweep must be symmetric about dx = 0")
    kappa = np.array([kappa_overlap(fiber_mode, wg, gap_nm, d) for d in dx])
    if kappa_at_center is not None:
        center = kappa[np.argmin(np.abs(dx))]
        if center != 0:
            kappa = kappa * (kappa_at_center / center)
    dip = np.tanh(np.abs(kappa) * l_c_um) ** 2
    return LateralProfileResult(dx, kappa, dip, _fwhm(dx, dip))


def _fwhm(x: np.ndarray, y: np.ndarray) -> float:
    """Full width at half maximum by linear interpolation between samples."""
    peak = int(np.argmax(y))
    half = y[peak] / 2.0
    left = right = np.nan
    for j in range(peak, 0, -1):
        if y[j - 1] <= half <= y[j]:
            frac = (half - y[j - 1]) / (y[j] - y[j - 1])
            left = x[j - 1] + frac * (x[j] - x[j - 1])
            break
    for j in range(peak, len(y) - 1):
        if y[j + 1] <= half <= y[j]:
            frac = (y[j] - half) / (y[j] - y[j + 1])
            right = x[j] + frac * (x[j + 1] - x[j])
            break
    if np.isnan(left) or np.isnan(right):
        raise ValueError("profile does not fall to half maximum inside the sweep")
    return float(right - left)
