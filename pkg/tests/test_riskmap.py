import numpy as np
import pytest

from patrolkit.grid import assemble_dataset
from patrolkit.iware import IwareError, train_iware
from patrolkit.riskmap import (
    PwlRiskModel,
    RiskMap,
    build_pwl,
    default_c_max,
    select_field_test_blocks,
    sweep_riskmap,
)

from conftest import flat_grid
from test_iware import ConstLearner, stub_ensemble


def _tiny_dataset(grid, seed=0, T=4):
    rng = np.random.default_rng(seed)
    n = grid.n_cells
    effort = rng.gamma(2.0, 1.0, size=(T, n)) * (rng.random((T, n)) < 0.8)
    labels = (rng.random((T, n)) < 0.3 * (1 - np.exp(-effort))).astype(np.int8)
    return assemble_dataset(grid, effort, labels)


class TestSweep:
    def test_zero_effort_uses_only_first_learner(self):
        grid = flat_grid(2, 2, k=1)
        ds = _tiny_dataset(grid)
        ens = stub_ensemble([0.0, 1.0], [0.5, 0.5],
                            [ConstLearner(0.3), ConstLearner(0.9)])
        ens.n_features = 2
        rm = sweep_riskmap(ens, grid, ds, [0.5])
        ids = grid.masked_ids()
        assert rm.prob[0, ids] == pytest.approx([0.3] * 4)

    def test_masked_cells_carry_nan(self):
        mask = np.array([1, 1, 0, 1], bool)
        grid = flat_grid(2, 2, k=1, mask=mask)
        ds = _tiny_dataset(grid)
        ens = stub_ensemble([0.0], [1.0], [ConstLearner(0.4)])
        ens.n_features = 2
        rm = sweep_riskmap(ens, grid, ds, [1.0])
        assert np.isnan(rm.prob[0, 2]) and np.isnan(rm.var[0, 2])
        assert not np.isnan(rm.prob[0, 0])

    def test_levels_must_increase(self):
        grid = flat_grid(2, 1, k=1)
        ens = stub_ensemble([0.0], [1.0], [ConstLearner(0.4)])
        ens.n_features = 2
        with pytest.raises(IwareError):
            sweep_riskmap(ens, grid, _tiny_dataset(grid), [2.0, 1.0])

    def test_sweep_mostly_nondecreasing_on_trained_ensemble(self):
        # Fig. 6 shape: g generally rises with hypothetical effort. GP weak
        # learners on the full (nested) filtered subsets give correlated,
        # base-rate-calibrated members, which is what produces the shape.
        from patrolkit import synth

        grid = synth.generate_park(12, 12, k=5, num_posts=2, seed=0)
        rng = np.random.default_rng([0, 0xEFF])
        eff = synth.patchy_effort_policy(grid, 8, rng, mean_km=2.5,
                                         patrolled_fraction=0.8,
                                         accessibility_features=[0, 1], coupling=0.8)
        truth = synth.make_ground_truth(grid, 0, target_rate=0.09, effort_policy=eff,
                                        detect_rate_span=(0.12, 0.45),
                                        attack_features=[2, 3, 4])
        ds = synth.sample_dataset(grid, truth, 8, eff, 0)
        train_ds = assemble_dataset(grid, ds.effort[:7], ds.labels[:7])
        ens = train_iware(train_ds, I=4, learner_kind="gp", rng=0, max_points=5000)
        rm = sweep_riskmap(ens, grid, train_ds, [0.5, 1.0, 2.0])
        ids = grid.masked_ids()
        g = rm.prob[:, ids]
        monotone = np.all(np.diff(g, axis=0) >= -1e-12, axis=0)
        assert monotone.mean() >= 0.9


class TestPwl:
    def _model(self):
        grid = flat_grid(2, 1, k=1)
        br = np.array([0.0, 1.0, 2.0])
        prob = np.array([[0.2, 0.4, 0.5], [0.0, 0.1, 0.6]])
        var = np.array([[0.0, 0.2, 0.3], [0.1, 0.1, 0.2]])
        return PwlRiskModel(grid=grid, breakpoints=br, prob_values=prob, var_values=var)

    def test_exact_at_breakpoints(self):
        m = self._model()
        for j, c in enumerate([0.0, 1.0, 2.0]):
            assert m.prob_at(0, c) == pytest.approx([0.2, 0.4, 0.5][j])

    def test_midpoint_interpolation(self):
        m = self._model()
        assert m.prob_at(0, 0.5) == pytest.approx(0.3)

    def test_clamped_beyond_domain(self):
        m = self._model()
        assert m.prob_at(1, 99.0) == pytest.approx(0.6)

    def test_continuity(self):
        m = self._model()
        cs = np.linspace(0, 2, 101)
        vals = m.prob_at(0, cs)
        assert np.all(np.abs(np.diff(vals)) <= 0.25 * (cs[1] - cs[0]) + 1e-12)

    def test_extension_warns_and_flattens(self):
        m = self._model()
        with pytest.warns(UserWarning, match="clamping"):
            ext = m.extended_to(5.0)
        assert ext.c_max == 5.0
        assert ext.prob_at(0, 4.9) == pytest.approx(0.5)

    def test_utility_product_formed_pointwise(self):
        m = self._model()
        u = m.utility_values(beta=1.0)
        assert u[0, 2] == pytest.approx(0.5 * (1 - 0.3))
        u0 = m.utility_values(beta=0.0)
        np.testing.assert_array_equal(u0, m.prob_values)

    def test_build_from_ensemble_and_riskmap(self):
        grid = flat_grid(2, 2, k=1)
        ds = _tiny_dataset(grid)
        ens = stub_ensemble([0.0, 1.0], [0.4, 0.6],
                            [ConstLearner(0.3, 0.01), ConstLearner(0.8, 0.02)])
        ens.n_features = 2
        pwl = build_pwl(ens, grid, m=4, c_max=2.0, ds=ds)
        assert pwl.segments == 4
        ids = grid.masked_ids()
        # at c=0 only the first learner qualifies
        assert pwl.prob_values[ids, 0] == pytest.approx([0.3] * 4)
        rm = sweep_riskmap(ens, grid, ds, [0.5, 1.0, 2.0])
        pwl2 = build_pwl(rm, grid, m=4, c_max=2.0)
        assert pwl2.prob_values[ids[0], -1] == pytest.approx(rm.prob[-1, ids[0]])

    def test_default_c_max(self):
        grid = flat_grid(2, 1, k=1)
        ds = assemble_dataset(grid, np.array([[1.0, 3.0]]), np.zeros((1, 2), int))
        assert default_c_max(ds) == pytest.approx(2 * np.quantile([1.0, 3.0], 0.95))


class TestBlockSelection:
    def test_uniform_risk_identity_convolution(self):
        grid = flat_grid(5, 5, k=1)
        sel = select_field_test_blocks(grid, np.full(25, 0.7), np.zeros(25), per_band=1)
        for band in (sel.high, sel.medium, sel.low):
            assert all(r == pytest.approx(0.7) for _, r in band)

    def test_percentile_bands_partition(self):
        rng = np.random.default_rng(0)
        grid = flat_grid(12, 12, k=1)
        risk = rng.random(144)
        sel = select_field_test_blocks(grid, risk, np.zeros(144), per_band=100)
        all_cells = [c for band in (sel.high, sel.medium, sel.low) for c, _ in band]
        assert len(all_cells) == len(set(all_cells))

    def test_hundred_blocks_band_arithmetic(self):
        # 1-cell blocks on a 10x10 grid: block risks are exactly 1..100
        grid = flat_grid(10, 10, k=1)
        risk = np.arange(1.0, 101.0)
        sel = select_field_test_blocks(grid, risk, np.zeros(100), block_size=1,
                                       per_band=100)
        high = sorted(r for _, r in sel.high)
        low = sorted(r for _, r in sel.low)
        assert high == [float(v) for v in range(81, 101)]
        assert low == [float(v) for v in range(1, 21)]

    def test_high_effort_blocks_excluded(self):
        grid = flat_grid(6, 3, k=1)
        effort = np.zeros(18)
        effort[4] = 100.0  # poisons every block containing cell 4
        risk = np.linspace(0, 1, 18)
        sel = select_field_test_blocks(grid, risk, effort, per_band=50)
        chosen = {c for band in (sel.high, sel.medium, sel.low) for c, _ in band}
        # cell 4 = (x4, y0); the 3x3 blocks containing it have centers 9 and 10
        assert not {9, 10} & chosen
        assert {7, 8} & chosen

    def test_convolved_risk_within_member_range(self):
        rng = np.random.default_rng(1)
        grid = flat_grid(7, 7, k=1)
        risk = rng.random(49)
        sel = select_field_test_blocks(grid, risk, np.zeros(49), per_band=100)
        for c, r in sel.high + sel.medium + sel.low:
            x, y = grid.cell_xy(c)
            block = [risk[(y + dy) * 7 + (x + dx)] for dx in (-1, 0, 1) for dy in (-1, 0, 1)]
            assert min(block) - 1e-12 <= r <= max(block) + 1e-12

    def test_truncation_warns(self):
        grid = flat_grid(3, 3, k=1)
        with pytest.warns(UserWarning, match="valid blocks"):
            sel = select_field_test_blocks(grid, np.full(9, 0.5), np.zeros(9), per_band=5)
        assert sel.truncated

    def test_grid_smaller_than_block_rejected(self):
        grid = flat_grid(2, 2, k=1)
        with pytest.raises(IwareError):
            select_field_test_blocks(grid, np.zeros(4), np.zeros(4), block_size=3)
