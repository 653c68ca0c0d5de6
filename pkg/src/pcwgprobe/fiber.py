"""Fundamental-mode dispersion and fields of an air-clad silica fiber taper.

The taper is treated as a two-medium step-index circular waveguide
(silica core, air cladding).  Because the index contrast is large, the
solver uses the exact hybrid-mode characteristic equation (m = 1 family,
of which the HE11 root is the one with the largest propagation
constant), not the weakly-guiding LP01 approximation.

All lengths are in micrometres unless the name says otherwise; angular
propagation constants are rad/um.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import jv, kve

from .errors import ConvergenceError, NoGuidedModeError, ProfileRangeError

C_UM_PER_S = 2.99792458e14  # speed of light [um/s]

# Fused-silica Sellmeier coefficients (lambda in um).
_SELLMEIER_B = (0.6961663, 0.4079426, 0.8974794)
_SELLMEIER_L2 = (0.0684043**2, 0.1162414**2, 9.896161**2)

# Bracket-scan resolution in n_eff for the characteristic equation.
_SCAN_STEP = 1e-3
_RESIDUAL_TOL = 1e-10


def silica_index(lam_um):
    """Refractive index of fused silica from the Sellmeier expansion."""
    lam2 = np.asarray(lam_um, dtype=float) ** 2
    n2 = 1.0 + sum(b * lam2 / (lam2 - l2) for b, l2 in zip(_SELLMEIER_B, _SELLMEIER_L2))
    return np.sqrt(n2)


@dataclass(frozen=True)
class FiberSpec:
    """Air-clad step-index fiber segment of diameter ``d_um``.

    ``core_index=None`` means "fused silica", evaluated from the
    Sellmeier expansion at each operating wavelength.
    """

    d_um: float
    core_index: float | None = None
    clad_index: float = 1.0

    def __post_init__(self):
        if self.d_um <= 0:
            raise ValueError(f"fiber diameter must be positive, got {self.d_um}")
        if self.clad_index < 1.0:
            raise ValueError(f"cladding index must be >= 1, got {self.clad_index}")
        if self.core_index is not None and self.core_index <= self.clad_index:
            raise ValueError("core index must exceed cladding index")

    def n_core(self, lam_um: float) -> float:
        if self.core_index is not None:
            return self.core_index
        return float(silica_index(lam_um))

    def with_diameter(self, d_um: float) -> "FiberSpec":
        return FiberSpec(d_um=d_um, core_index=self.core_index, clad_index=self.clad_index)


@dataclass(frozen=True)
class GuidedModePoint:
    """One (wavelength, propagation constant) sample of a guided mode."""

    wavelength_um: float
    n_eff: float

    @property
    def beta_rad_per_um(self) -> float:
        return 2.0 * np.pi * self.n_eff / self.wavelength_um

    @property
    def omega_rad_per_s(self) -> float:
        return 2.0 * np.pi * C_UM_PER_S / self.wavelength_um


def _char_m1(neff, n1, n2, a_k0):
    """Exact m=1 hybrid-mode characteristic function and its scale.

    Roots of the returned ``value`` are the HE1n/EH1n modes.  ``scale``
    is the magnitude of the balanced terms, used for a relative
    residual check (it diverges at poles of the Bessel ratios, so
    pole crossings are rejected by ``value/scale`` staying large).
    """
    neff = np.asarray(neff, dtype=float)
    u = a_k0 * np.sqrt(np.maximum(n1**2 - neff**2, 0.0))
    w = a_k0 * np.sqrt(np.maximum(neff**2 - n2**2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (jv(0, u) - jv(2, u)) / (2.0 * u * jv(1, u))
        # kve ratios: the exponential scaling cancels, stable for large w.
        q = -(kve(0, w) + kve(2, w)) / (2.0 * w * kve(1, w))
        c2 = (n2 / n1) ** 2
        lhs = (p + q) * (p + c2 * q)
        rhs = (neff / n1) ** 2 * (1.0 / u**2 + 1.0 / w**2) ** 2
    return lhs - rhs, np.abs(lhs) + np.abs(rhs)


def _solve_neff(n1, n2, a_k0, scan_step=_SCAN_STEP):
    """Largest m=1 root of the characteristic equation in (n2, n1).

    Scans n_eff at ``scan_step`` resolution, brackets sign changes and
    refines with Brent's method.  Sign changes caused by poles of the
    Bessel ratios fail the relative-residual check and are discarded
    (after one subdivision retry to recover a root sharing the cell
    with a pole).
    """

    def f(x):
        return _char_m1(x, n1, n2, a_k0)[0]

    def try_bracket(lo, hi, depth=0):
        try:
            root = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        except ValueError:
            return None
        value, scale = _char_m1(root, n1, n2, a_k0)
        if scale > 0 and abs(value) / scale < _RESIDUAL_TOL:
            return float(root)
        if depth >= 1:
            return None
        # Pole and root may share the cell: subdivide once and rescan.
        sub = np.linspace(lo, hi, 41)
        vals = f(sub)
        for j in range(len(sub) - 1, 0, -1):
            if np.isfinite(vals[j - 1]) and np.isfinite(vals[j]) and vals[j - 1] * vals[j] < 0:
                found = try_bracket(sub[j - 1], sub[j], depth + 1)
                if found is not None:
                    return found
        return None

    eps = max(1e-9, scan_step * 1e-3)
    grid = np.arange(n2 + eps, n1 - eps, scan_step)
    if grid.size < 2:
        raise NoGuidedModeError(
            f"index window ({n2}, {n1}) narrower than the scan resolution"
        )
    if grid[-1] < n1 - eps:
        # close the top cell: the fundamental root crowds the core index
        # for thick fibers and must stay bracketed
        grid = np.append(grid, n1 - eps)
    vals = f(grid)
    finite = np.isfinite(vals)
    crossings = [
        i
        for i in range(len(grid) - 1)
        if finite[i] and finite[i + 1] and vals[i] * vals[i + 1] < 0
    ]
    if not crossings:
        raise NoGuidedModeError(
            f"no guided m=1 solution bracketed for V={a_k0 * np.sqrt(n1**2 - n2**2):.3f} "
            f"(diameter too small for the numerical bracket)"
        )
    rejected = 0
    for i in reversed(crossings):
        root = try_bracket(grid[i], grid[i + 1])
        if root is not None:
            return root
        rejected += 1
    raise ConvergenceError(
        f"{rejected} bracketed sign change(s) all failed the residual check "
        f"(V={a_k0 * np.sqrt(n1**2 - n2**2):.3f})"
    )


def fundamental_neff(spec: FiberSpec, lam_um: float) -> GuidedModePoint:
    """Effective index of the fundamental (HE11) mode.

    Solves the exact two-medium characteristic equation and returns the
    root with the largest propagation constant.

    Raises
    ------
    NoGuidedModeError
        If no root is bracketed (diameter too small for the scan).
    ConvergenceError
        If bracketed sign changes cannot be refined to tolerance.
    """
    if lam_um <= 0:
        raise ValueError("wavelength must be positive")
    n1 = spec.n_core(lam_um)
    n2 = spec.clad_index
    a_k0 = np.pi * spec.d_um / lam_um  # (d/2) * (2 pi / lambda)
    neff = _solve_neff(n1, n2, a_k0)
    return GuidedModePoint(wavelength_um=lam_um, n_eff=neff)


def characteristic_residual(spec: FiberSpec, point: GuidedModePoint) -> float:
    """Relative residual of the characteristic equation at a solved point."""
    n1 = spec.n_core(point.wavelength_um)
    a_k0 = np.pi * spec.d_um / point.wavelength_um
    value, scale = _char_m1(point.n_eff, n1, spec.clad_index, a_k0)
    return float(abs(value) / scale)


def dispersion_curve(spec: FiberSpec, lam_um: np.ndarray) -> np.ndarray:
    """n_eff over a wavelength grid, warm-starting each solve from the last.

    Falls back to the full bracket scan whenever continuation fails, so
    the result is identical to point-by-point ``fundamental_neff`` calls.
    """
    lam_um = np.asarray(lam_um, dtype=float)
    out = np.empty(lam_um.shape)
    prev = None
    for i, lam in enumerate(lam_um.ravel()):
        n1 = spec.n_core(lam)
        n2 = spec.clad_index
        a_k0 = np.pi * spec.d_um / lam

        root = None
        if prev is not None:
            root = _continue_root(prev, n1, n2, a_k0)
        if root is None:
            root = _solve_neff(n1, n2, a_k0)
        out.ravel()[i] = root
        prev = root
    return out


def _continue_root(guess, n1, n2, a_k0):
    """Refine a nearby root by expanding a local bracket around ``guess``."""

    def f(x):
        return _char_m1(x, n1, n2, a_k0)[0]

    half = 2e-3
    for _ in range(6):
        lo = max(n2 + 1e-9, guess - half)
        hi = min(n1 - 1e-9, guess + half)
        flo, fhi = f(lo), f(hi)
        if np.isfinite(flo) and np.isfinite(fhi) and flo * fhi < 0:
            root = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16)
            value, scale = _char_m1(root, n1, n2, a_k0)
            if scale > 0 and abs(value) / scale < _RESIDUAL_TOL:
                return float(root)
            return None
        half *= 3.0
    return None


def dbeta_dd(spec: FiberSpec, lam_um: float) -> float:
    """Diameter sensitivity d(beta)/d(d) in units of (omega/c) per um.

    Centered finite difference with step max(1e-3 um, 1e-3 * d); the
    step sits above the solver noise floor and below truncation error.
    """
    dd = max(1e-3, 1e-3 * spec.d_um)
    hi = fundamental_neff(spec.with_diameter(spec.d_um + dd), lam_um)
    lo = fundamental_neff(spec.with_diameter(spec.d_um - dd), lam_um)
    # beta = n_eff * k0, so (dbeta/dd)/k0 reduces to d(n_eff)/dd.
    return (hi.n_eff - lo.n_eff) / (2.0 * dd)


def exterior_decay(spec: FiberSpec, lam_um: float) -> float:
    """Evanescent decay constant gamma = sqrt(beta^2 - k0^2 n_clad^2) [1/um]."""
    point = fundamental_neff(spec, lam_um)
    k0 = 2.0 * np.pi / lam_um
    return k0 * np.sqrt(point.n_eff**2 - spec.clad_index**2)


class ModeField:
    """Dominant transverse electric component of the solved HE11 mode.

    Quasi-linearly-polarized profile: Bessel J0 radial dependence in the
    core, K0 in the cladding, continuous at the boundary, normalized to
    unit power flux (integral of |E|^2 over the cross-section is 1).
    """

    def __init__(self, spec: FiberSpec, lam_um: float):
        self.spec = spec
        self.point = fundamental_neff(spec, lam_um)
        self.a_um = spec.d_um / 2.0
        n1 = spec.n_core(lam_um)
        k0 = 2.0 * np.pi / lam_um
        self.u = self.a_um * k0 * np.sqrt(n1**2 - self.point.n_eff**2)
        self.w = self.a_um * k0 * np.sqrt(self.point.n_eff**2 - spec.clad_index**2)
        self.gamma_per_um = self.w / self.a_um
        # Closed-form norm of the piecewise J0/K0 profile with psi(a) = 1:
        #   P = pi a^2 [ (J0^2+J1^2)/J0^2 |_u - 1 + K1^2/K0^2 |_w ]
        ju = jv(0, self.u)
        j1 = jv(1, self.u)
        k_ratio = kve(1, self.w) / kve(0, self.w)
        power = np.pi * self.a_um**2 * ((j1 / ju) ** 2 + k_ratio**2)
        self._amp = 1.0 / np.sqrt(power)

    def radial(self, r_um):
        """Normalized field amplitude at radius r (um)."""
        r = np.asarray(r_um, dtype=float)
        rho = r / self.a_um
        inside = rho <= 1.0
        out = np.empty(r.shape)
        out[inside] = jv(0, self.u * rho[inside]) / jv(0, self.u)
        ro = rho[~inside]
        # K0(w rho)/K0(w) via scaled Bessels to stay finite for large rho.
        out[~inside] = (
            kve(0, self.w * ro) / kve(0, self.w) * np.exp(-self.w * (ro - 1.0))
        )
        return self._amp * out

    def __call__(self, x_um, y_um):
        """Complex field amplitude at transverse position (x, y) from the axis."""
        x = np.asarray(x_um, dtype=float)
        y = np.asarray(y_um, dtype=float)
        r = np.hypot(x, y)
        return self.radial(r).astype(complex)


def mode_field(spec: FiberSpec, lam_um: float, x_um, y_um):
    """Convenience wrapper: evaluate the normalized HE11 field at (x, y)."""
    return ModeField(spec, lam_um)(x_um, y_um)


@dataclass(frozen=True)
class TaperProfile:
    """Fiber diameter versus position along the taper, d(l_c).

    ``l_c_mm`` must be strictly increasing; the diameter must not
    decrease moving away from the waist (the minimum-diameter point).
    Interpolation is monotone piecewise-cubic (PCHIP), exact at the
    sample points.
    """

    l_c_mm: tuple
    d_um: tuple
    name: str = "taper"
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lc = np.asarray(self.l_c_mm, dtype=float)
        d = np.asarray(self.d_um, dtype=float)
        if lc.ndim != 1 or lc.size < 2 or lc.shape != d.shape:
            raise ValueError("profile needs matching 1-D l_c and d arrays (>= 2 samples)")
        if not np.all(np.diff(lc) > 0):
            raise ValueError("l_c samples must be strictly increasing")
        if np.any(d <= 0):
            raise ValueError("diameters must be positive")
        waist = int(np.argmin(d))
        if np.any(np.diff(d[waist:]) < 0) or np.any(np.diff(d[: waist + 1]) > 0):
            raise ValueError("diameter must be non-decreasing away from the waist")
        object.__setattr__(self, "l_c_mm", tuple(float(v) for v in lc))
        object.__setattr__(self, "d_um", tuple(float(v) for v in d))
        object.__setattr__(self, "_interp", PchipInterpolator(lc, d))

    @property
    def span_mm(self):
        return self.l_c_mm[0], self.l_c_mm[-1]

    def diameter_at(self, l_c_mm) -> float | np.ndarray:
        """Interpolated diameter at l_c (mm); exact at sample points."""
        lc = np.asarray(l_c_mm, dtype=float)
        lo, hi = self.span_mm
        if np.any(lc < lo) or np.any(lc > hi):
            raise ProfileRangeError(
                f"l_c outside sampled range [{lo}, {hi}] mm"
            )
        val = self._interp(lc)
        return float(val) if np.isscalar(l_c_mm) else val

    @classmethod
    def exponential(cls, waist_um: float, pull_mm: float, full_um: float = 125.0,
                    n_samples: int = 201, name: str = "exponential"):
        """Standard heat-and-pull shape: d grows exponentially from the waist.

        The decay length is set so the profile reaches the unpulled fiber
        diameter ``full_um`` at ``pull_mm``.
        """
        if not 0 < waist_um < full_um:
            raise ValueError("need 0 < waist diameter < full diameter")
        if pull_mm <= 0:
            raise ValueError("pull length must be positive")
        scale = pull_mm / np.log(full_um / waist_um)
        lc = np.linspace(0.0, pull_mm, n_samples)
        return cls(tuple(lc), tuple(waist_um * np.exp(lc / scale)), name=name)

    @classmethod
    def from_csv(cls, path, name=None):
        """Read a two-column CSV with header ``l_c_mm,d_um`` sorted in l_c."""
        import csv as _csv

        with open(path, newline="") as fh:
            reader = _csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["l_c_mm", "d_um"]:
                raise ValueError(f"{path}: expected header 'l_c_mm,d_um'")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        lc, d = zip(*rows)
        return cls(lc, d, name=name or str(path))
