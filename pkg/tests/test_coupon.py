import numpy as np
import pytest

from weavesim.coupon import (
    CouponConfig,
    Dataset,
    coupon_boundary_displacements,
    coupon_strain_from_displacements,
    grid_trajectory,
    run_campaign,
    stretch_2d,
)
from weavesim.errors import CampaignAborted, NotPositiveDefinite, WeavesimError
from weavesim.homogenize import HomogenizedLaw
from weavesim.materials import StVkPlaneStressAnalytical
from weavesim.planestress import PlaneStressLaw

LAW = StVkPlaneStressAnalytical(2.0e9, 1.5e9)


def config(n, ranges=((-0.1, 0.25),) * 3, **kw):
    return CouponConfig(ranges=ranges, n=n, **kw)


class TestTrajectory:
    def test_n2_exhaustive(self):
        pts = grid_trajectory(config(2, ((-1.0, 1.0),) * 3))
        assert pts.shape == (8, 3)
        moves = np.diff(pts, axis=0)
        assert len(moves) == 7
        for m in moves:
            assert np.count_nonzero(m) == 1
            assert np.abs(m).max() == pytest.approx(2.0)
        assert len({tuple(p) for p in map(tuple, pts)}) == 8

    def test_paper_grid_dimensions(self):
        cfg = config(17)
        pts = grid_trajectory(cfg)
        assert pts.shape == (4913, 3)
        assert cfg.spacing[0] == pytest.approx(0.021875)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_adjacency_brute_force(self, n):
        cfg = config(n, ((0.0, 1.0),) * 3)
        pts = grid_trajectory(cfg)
        spacing = cfg.spacing
        assert pts.shape == (n**3, 3)
        assert len({tuple(np.round(p, 12)) for p in pts}) == n**3
        for m in np.diff(pts, axis=0):
            nz = np.nonzero(np.abs(m) > 1e-14)[0]
            assert nz.size == 1
            assert abs(m[nz[0]]) == pytest.approx(spacing[nz[0]])

    def test_shift_disjoint_from_training(self):
        cfg = config(5)
        half = 0.5 * cfg.spacing[0]
        shifted = grid_trajectory(config(5, shift=(half, half, half)))
        training = {tuple(np.round(p, 12)) for p in grid_trajectory(cfg)}
        for p in shifted:
            assert tuple(np.round(p, 12)) not in training

    def test_raster_covers_grid(self):
        pts = grid_trajectory(config(3, ((0.0, 1.0),) * 3, mode="raster"))
        assert len({tuple(p) for p in map(tuple, pts)}) == 27


class TestBoundaryDisplacements:
    def test_zero_strain(self):
        disp = coupon_boundary_displacements(np.zeros(3))
        assert disp == pytest.approx(np.zeros((2, 2)), abs=1e-15)

    def test_uniaxial(self):
        # E11 = 0.105 -> C11 = 1.21 -> U11 = 1.1: node (1,0) moves by (0.1, 0)
        disp = coupon_boundary_displacements(np.array([0.105, 0.0, 0.0]))
        assert disp[0] == pytest.approx([0.1, 0.0], abs=1e-14)
        assert disp[1] == pytest.approx([0.0, 0.0], abs=1e-14)

    def test_strain_recovery_oracle(self, rng):
        for _ in range(20):
            e = rng.uniform(-0.1, 0.25, 3)
            if np.linalg.eigvalsh(
                2 * np.array([[e[0], e[2] / 2], [e[2] / 2, e[1]]]) + np.eye(2)
            ).min() < 1e-6:
                continue
            disp = coupon_boundary_displacements(e)
            recovered = coupon_strain_from_displacements(disp)
            assert np.abs(recovered - e).max() <= 1e-12

    def test_inadmissible_strain_raises(self):
        with pytest.raises(NotPositiveDefinite):
            coupon_boundary_displacements(np.array([-0.51, 0.0, 0.0]))

    def test_stretch_2d_squares_to_c(self, rng):
        e = rng.uniform(-0.08, 0.2, 3)
        u2 = stretch_2d(e)
        c2 = 2 * np.array([[e[0], e[2] / 2], [e[2] / 2, e[1]]]) + np.eye(2)
        assert u2 @ u2 == pytest.approx(c2, abs=1e-13)


class TestCampaign:
    def test_analytical_law_matches_closed_form(self):
        cfg = config(3)
        data = run_campaign(cfg, LAW)
        assert len(data) == 27
        for e, s in zip(data.strains, data.stresses):
            assert s == pytest.approx(LAW.stress(e), rel=1e-10, abs=1e-10)

    def test_zero_point_zero_stress(self):
        cfg = config(3, ((-0.1, 0.1),) * 3)
        data = run_campaign(cfg, LAW)
        zero_rows = np.nonzero(np.abs(data.strains).max(axis=1) < 1e-14)[0]
        assert zero_rows.size == 1
        assert np.abs(data.stresses[zero_rows[0]]).max() == 0.0

    def test_csv_round_trip_and_determinism(self, tmp_path):
        cfg = config(3)
        data = run_campaign(cfg, LAW)
        text1 = data.to_csv()
        text2 = run_campaign(cfg, LAW).to_csv()
        assert text1 == text2
        back = Dataset.from_csv(text1)
        assert np.array_equal(back.strains, data.strains)
        assert np.array_equal(back.stresses, data.stresses)
        path = tmp_path / "data.csv"
        data.save(path)
        assert Dataset.load(path).to_csv() == text1

    def test_warm_start_reduces_micro_newton_iterations(self, interior_brick_nu0):
        def total_iters(warm):
            fe2 = HomogenizedLaw(interior_brick_nu0)
            law = PlaneStressLaw(fe2)
            cfg = config(3, ((-0.05, 0.05),) * 3, warm_start=warm)
            run_campaign(cfg, law)
            return fe2.total_newton_iters

        # cold start rebuilds every solve from zero; the warm trajectory
        # cannot be worse in total
        warm_iters = total_iters(True)
        cold = HomogenizedLaw(interior_brick_nu0, warm_start=False)
        law_cold = PlaneStressLaw(cold)
        run_campaign(config(3, ((-0.05, 0.05),) * 3, warm_start=True), law_cold)
        assert warm_iters <= cold.total_newton_iters

    def test_failures_skipped_and_abort_threshold(self):
        class FailingLaw:
            def __init__(self):
                self.calls = 0

            def stress(self, e):
                self.calls += 1
                if e[0] > 0.0:
                    raise WeavesimError("synthetic failure")
                return np.zeros(3)

        law = FailingLaw()
        cfg = config(3, ((-1.0, 1.0),) * 3, max_consecutive_failures=30)
        data = run_campaign(cfg, law)
        assert len(data) + len(data.failures) == 27
        assert all(f["error"] == "WeavesimError" for f in data.failures)

        cfg_strict = config(3, ((-1.0, 1.0),) * 3, max_consecutive_failures=1)
        with pytest.raises(CampaignAborted):
            run_campaign(cfg_strict, law)

    def test_parallel_cold_matches_serial(self):
        class CloneableLaw:
            def stress(self, e):
                return LAW.stress(e)

            def clone(self):
                return CloneableLaw()

        cfg_serial = config(3, warm_start=False)
        cfg_par = config(3, warm_start=False, threads=2)
        law = CloneableLaw()
        d1 = run_campaign(cfg_serial, law)
        d2 = run_campaign(cfg_par, law)
        assert d1.to_csv() == d2.to_csv()
