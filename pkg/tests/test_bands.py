import numpy as np
import pytest

from pcwgprobe.bands import (
    BandCurve,
    PCWaveguideSpec,
    PlaneWaveSolver,
    bulk_bands,
    default_kpath_norm,
    defect_profile,
    epsilon_fourier,
    local_gap,
    phase_match_crossing,
    waveguide_bands,
)
from pcwgprobe.errors import BandCoverageError, NoDefectModeError
from pcwgprobe.fiber import FiberSpec


def bulk_spec(**kw):
    return PCWaveguideSpec(grading=(), supercell_rows=1, **kw)


class TestEpsilonFourier:
    def test_uniform_lattice_when_r_zero(self):
        spec = bulk_spec(r_frac=0.0)
        assert epsilon_fourier(spec, (0.0, 0.0)) == pytest.approx(spec.eps_bg)
        g1 = 2 * np.pi / spec.lam_z_um
        assert abs(epsilon_fourier(spec, (g1, 0.0))) < 1e-14

    def test_zero_order_is_area_average(self):
        spec = bulk_spec()
        f = spec.fill_fraction()
        expected = f * 1.0 + (1.0 - f) * spec.eps_bg
        assert epsilon_fourier(spec, (0.0, 0.0)) == pytest.approx(expected, rel=1e-12)

    def test_hermitian_symmetry(self):
        spec = PCWaveguideSpec()
        g = (2 * np.pi / spec.lam_z_um, 3 * 2 * np.pi / spec.width_um)
        plus = epsilon_fourier(spec, g)
        minus = epsilon_fourier(spec, (-g[0], -g[1]))
        assert minus == pytest.approx(np.conj(plus), rel=1e-12)


class TestBulkBands:
    def test_empty_lattice_exact(self):
        spec = bulk_spec(r_frac=0.0)
        solver = PlaneWaveSolver(spec)
        for bn in np.linspace(0.025, 0.5, 20):
            beta = bn * 2 * np.pi / spec.lam_z_um
            omega = solver.solve_k(beta, 6)
            kg = solver.g.copy()
            kg[:, 0] += beta
            exact = np.sort(np.hypot(kg[:, 0], kg[:, 1]))[:6] * spec.lam_z_um / (
                2 * np.pi * spec.n_eff
            )
            np.testing.assert_allclose(omega, exact, rtol=1e-9)

    def test_band_symmetry_in_beta(self):
        solver = PlaneWaveSolver(bulk_spec())
        beta = 0.37 * 2 * np.pi / 0.5
        np.testing.assert_allclose(
            solver.solve_k(beta, 8), solver.solve_k(-beta, 8), rtol=0, atol=1e-10
        )

    def test_frequencies_real_nonnegative_sorted(self):
        res = bulk_bands(bulk_spec(), num_bands=5)
        for curve in res.curves:
            assert np.all(curve.omega_norm >= 0)
        stack = np.vstack([c.omega_norm for c in res.curves])
        assert np.all(np.diff(stack, axis=0) >= -1e-12)

    def test_gamma_x_stop_band_exists(self):
        res = bulk_bands(bulk_spec())
        assert res.gap_norm is not None
        lo, hi = res.gap_norm
        assert 0 < lo < hi

    def test_local_gap_brackets_te1_frequency(self, te1, default_spec):
        # the k-resolved stop band at the phase-matching point contains
        # the operating frequency near L_z/lambda ~ 0.3125 (1600 nm band)
        bulk = bulk_bands(default_spec.bulk(), num_bands=2)
        pm = phase_match_crossing(te1, FiberSpec(1.5))
        beta_norm = pm.beta_rad_per_um * default_spec.lam_z_um / (2 * np.pi)
        lo, hi = local_gap(bulk, beta_norm)
        assert lo < pm.omega_norm < hi

    def test_cutoff_convergence_band_edges(self):
        res7 = bulk_bands(bulk_spec(pw_per_cell=7), num_bands=2)
        res13 = bulk_bands(bulk_spec(pw_per_cell=13), num_bands=2)
        for a, b in zip(res7.gap_norm, res13.gap_norm):
            assert abs(a - b) / b < 0.005

    def test_rejects_graded_spec(self):
        with pytest.raises(ValueError):
            bulk_bands(PCWaveguideSpec())


class TestWaveguideBands:
    def test_te1_negative_slope_throughout(self, te1):
        assert np.all(np.diff(te1.omega_norm) < 0)
        assert np.all(te1.group_index() < 0)

    def test_te1_parity_even_odd_counterpart_above(self, te1, te1_odd):
        assert te1.parity == "even"
        assert te1_odd.parity == "odd"
        common = np.intersect1d(
            np.round(te1.beta_norm, 9), np.round(te1_odd.beta_norm, 9)
        )
        assert common.size >= 5
        for b in common:
            w_even = te1.omega_norm[np.round(te1.beta_norm, 9) == b][0]
            w_odd = te1_odd.omega_norm[np.round(te1_odd.beta_norm, 9) == b][0]
            assert w_odd > w_even

    def test_defect_state_localization(self, default_spec, te1):
        solver = PlaneWaveSolver(default_spec)
        beta_norm = 0.42
        omega, vecs = solver.solve_k(
            beta_norm * 2 * np.pi / default_spec.lam_z_um, 42, vectors=True
        )
        target = float(np.interp(beta_norm, te1.beta_norm, te1.omega_norm))
        j = int(np.argmin(np.abs(omega - target)))
        assert solver.localization(vecs[:, j]) > 0.5

    def test_supercell_doubling_converged(self):
        kp = np.array([0.40, 0.44, 0.48])
        r13 = waveguide_bands(PCWaveguideSpec(supercell_rows=13), kpath_norm=kp)
        r27 = waveguide_bands(PCWaveguideSpec(supercell_rows=27), kpath_norm=kp)
        c13, c27 = r13.curve("TE-1"), r27.curve("TE-1")
        common, i13, i27 = np.intersect1d(
            np.round(c13.beta_norm, 9), np.round(c27.beta_norm, 9), return_indices=True
        )
        assert common.size >= 2
        rel = np.abs(c13.omega_norm[i13] - c27.omega_norm[i27]) / c27.omega_norm[i27]
        assert np.max(rel) < 0.002

    def test_no_defect_mode_is_signaled(self):
        # grading equal to the bulk radius produces no defect
        spec = PCWaveguideSpec(grading=(0.35, 0.35, 0.35))
        with pytest.raises(NoDefectModeError):
            waveguide_bands(spec, kpath_norm=np.linspace(0.38, 0.48, 5))

    def test_defect_profile_parity_and_norm(self, default_spec, te1, te1_odd):
        x, u = defect_profile(default_spec, te1, 0.40)
        dx = float(np.mean(np.diff(x)))
        assert np.sum(np.abs(u) ** 2) * dx == pytest.approx(1.0, abs=1e-9)
        sym = np.sum(np.abs(u + u[::-1]) ** 2)
        anti = np.sum(np.abs(u - u[::-1]) ** 2)
        assert sym > 100 * anti  # even branch
        xo, uo = defect_profile(default_spec, te1_odd, 0.40)
        sym_o = np.sum(np.abs(uo + uo[::-1]) ** 2)
        anti_o = np.sum(np.abs(uo - uo[::-1]) ** 2)
        assert anti_o > 100 * sym_o  # odd branch


class TestThinning:
    def test_ordering_and_zero_cases(self, default_spec):
        from pcwgprobe.bands import thinning_shift
        from pcwgprobe.errors import ModeCutoffError
        from pcwgprobe.slab import SlabSpec

        slab = SlabSpec(340.0)
        shift = thinning_shift(default_spec, slab, 300.0)
        assert shift.d_omega_norm["TE-2"] > shift.d_omega_norm["TE-1"] > 0
        assert shift.d_omega_rad_per_s("TE-1") > 0

        same = thinning_shift(default_spec, slab, 340.0)
        assert same.d_omega_norm == {"TE-1": 0.0, "TE-2": 0.0}

        with pytest.raises(ModeCutoffError):
            thinning_shift(default_spec, slab, 140.0)


class TestBandCurve:
    def test_group_index_of_linear_branch(self):
        lam_z = 0.5
        beta_norm = np.linspace(0.3, 0.4, 11)
        omega = 0.5 - 0.25 * beta_norm  # n_g = d beta / d omega = -4
        curve = BandCurve("x", beta_norm * 2 * np.pi / lam_z, omega, lam_z)
        np.testing.assert_allclose(curve.group_index(), -4.0, rtol=1e-9)

    def test_json_schema_round_trip(self, te1):
        data = te1.to_dict()
        assert set(data) == {"label", "parity", "samples"}
        assert set(data["samples"][0]) == {
            "beta_rad_per_um",
            "omega_norm",
            "lambda_nm",
            "n_g",
        }
        back = BandCurve.from_dict(data, te1.lam_z_um)
        np.testing.assert_allclose(back.omega_norm, te1.omega_norm)
        assert back.parity == te1.parity

    def test_requires_ordered_beta(self):
        with pytest.raises(ValueError):
            BandCurve("x", np.array([1.0, 0.5]), np.array([0.3, 0.31]), 0.5)


class TestPhaseMatch:
    def test_synthetic_crossing(self):
        # branch omega = 0.40 - 0.25 b, fiber n_eff constant 1.30:
        # crossing at b = 0.40/(1/1.3 + 0.25)
        lam_z = 0.5
        beta_norm = np.linspace(0.25, 0.5, 26)
        omega = 0.40 - 0.25 * beta_norm
        curve = BandCurve("x", beta_norm * 2 * np.pi / lam_z, omega, lam_z)
        fiber = FiberSpec(1.5, core_index=1.444)

        from pcwgprobe.fiber import dispersion_curve

        pm = phase_match_crossing(curve, fiber)
        lam_um = pm.lambda_nm * 1e-3
        n_f = dispersion_curve(fiber, np.array([lam_um]))[0]
        beta_fiber = 2 * np.pi * n_f / lam_um
        assert pm.beta_rad_per_um == pytest.approx(beta_fiber, rel=2e-3)

    def test_no_crossing_raises(self):
        lam_z = 0.5
        beta_norm = np.linspace(0.25, 0.5, 10)
        omega = np.full(10, 0.9) - 0.1 * beta_norm  # far above any fiber line
        curve = BandCurve("x", beta_norm * 2 * np.pi / lam_z, omega, lam_z)
        with pytest.raises(BandCoverageError):
            phase_match_crossing(curve, FiberSpec(1.5))


class TestSpecValidation:
    def test_overlapping_holes_rejected(self):
        with pytest.raises(ValueError):
            PCWaveguideSpec(r_frac=0.49, lam_x_nm=520.0, lam_z_nm=500.0)

    def test_even_supercell_rejected(self):
        with pytest.raises(ValueError):
            PCWaveguideSpec(supercell_rows=16)

    def test_too_small_supercell_rejected(self):
        with pytest.raises(ValueError):
            PCWaveguideSpec(grading=(0.25, 0.3, 0.32, 0.34), supercell_rows=9)
