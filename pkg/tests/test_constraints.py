import numpy as np
import pytest

from fairproj.constraints import (
    ConstraintSet,
    GroupModel,
    build_constraints,
    build_eo,
    build_oae,
    build_sp,
    estimate_group_model,
    group_model_for,
    membership_tensor,
)
from fairproj.divergence import clip_scores
from fairproj.exceptions import DegenerateMarginalError
from fairproj.metrics import criterion_value


def grid_dataset(rng, n, num_c, num_a):
    """Random scores over a group/label grid covering every (a, y) cell."""
    groups = np.arange(n) % num_a
    labels = (np.arange(n) // num_a) % num_c
    p = clip_scores(rng.dirichlet(np.ones(num_c), size=n))
    return p, labels, groups


def mean_rows(cs: ConstraintSet, h: np.ndarray) -> np.ndarray:
    return np.einsum("ikc,ic->k", cs.g, h) / h.shape[0]


class TestEstimateGroupModel:
    def test_balanced_pairs(self):
        gm = estimate_group_model(np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1]))
        np.testing.assert_allclose(gm.p_s, [0.5, 0.5])
        np.testing.assert_allclose(gm.p_s_given_y, 0.5)
        assert not gm.empty_cells.any()

    def test_single_group(self):
        gm = estimate_group_model(np.zeros(6, dtype=int), np.array([0, 1, 2, 0, 1, 2]))
        np.testing.assert_allclose(gm.p_s, [1.0])
        np.testing.assert_allclose(gm.p_s_given_y, 1.0)

    def test_large_sample_marginals(self):
        rng = np.random.default_rng(0)
        n = 100_000
        groups = (rng.random(n) < 0.7).astype(int)
        labels = (rng.random(n) < 0.4).astype(int)
        gm = estimate_group_model(groups, labels)
        np.testing.assert_allclose(gm.p_s, [0.3, 0.7], atol=0.01)
        np.testing.assert_allclose(gm.p_s_given_y, [[0.3, 0.3], [0.7, 0.7]], atol=0.01)

    def test_membership_tensor_input(self):
        groups = np.array([0, 1, 0, 1])
        labels = np.array([0, 0, 1, 1])
        probs = membership_tensor(groups, 2, 2)
        gm_ids = estimate_group_model(groups, labels)
        gm_tensor = estimate_group_model(probs, labels)
        np.testing.assert_allclose(gm_ids.p_s, gm_tensor.p_s)
        np.testing.assert_allclose(gm_ids.p_s_given_y, gm_tensor.p_s_given_y)

    def test_empty_cell_flagged(self):
        gm = estimate_group_model(np.array([0, 0, 1, 1]), np.array([0, 0, 0, 1]))
        assert gm.empty_cells[0, 1]
        assert not gm.empty_cells[1, 1]

    def test_group_id_out_of_range(self):
        with pytest.raises(ValueError):
            membership_tensor(np.array([0, 2]), 2, 2)

    def test_group_probs_must_normalize(self):
        bad = np.full((2, 2, 2), 0.4)
        with pytest.raises(ValueError):
            GroupModel(group_probs=bad, p_s=np.array([0.5, 0.5]), p_s_given_y=np.full((2, 2), 0.5))


class TestGroupModelFor:
    def test_reuses_frozen_marginals(self):
        gm = estimate_group_model(np.array([0, 0, 0, 1]), np.array([0, 1, 0, 1]))
        out = group_model_for(gm, np.array([1, 1, 1, 1, 0]))
        np.testing.assert_allclose(out.p_s, gm.p_s)
        np.testing.assert_allclose(out.p_s_given_y, gm.p_s_given_y)
        assert out.group_probs.shape == (5, 2, 2)


class TestRowCounts:
    def test_sp(self):
        rng = np.random.default_rng(1)
        p, labels, groups = grid_dataset(rng, 24, 3, 2)
        gm = estimate_group_model(groups, labels, num_classes=3)
        assert build_sp(p, gm, 0.1).g.shape == (24, 12, 3)

    def test_eo(self):
        rng = np.random.default_rng(2)
        p, labels, groups = grid_dataset(rng, 24, 3, 2)
        gm = estimate_group_model(groups, labels, num_classes=3)
        cs = build_eo(p, gm, 0.1)
        assert cs.g.shape == (24, 36, 3)
        assert len(cs.row_index) == 36

    def test_oae(self):
        rng = np.random.default_rng(3)
        p, labels, groups = grid_dataset(rng, 40, 2, 5)
        gm = estimate_group_model(groups, labels, num_classes=2)
        assert build_oae(p, gm, 0.1).g.shape == (40, 10, 2)


class TestSpRows:
    def test_hand_values(self):
        alpha = 0.1
        p = np.array([[0.6, 0.4], [0.4, 0.6]])
        gm = estimate_group_model(np.array([0, 1]), np.array([0, 1]))
        cs = build_sp(p, gm, alpha)
        # sample 0 is in group 0; each row is a multiple of e_{c'}
        row = cs.row_index.index
        np.testing.assert_allclose(cs.g[0, row((0, 0, 0))], [1.0 - alpha, 0.0])
        np.testing.assert_allclose(cs.g[0, row((0, 0, 1))], [0.0, 1.0 - alpha])
        np.testing.assert_allclose(cs.g[0, row((1, 0, 0))], [-1.0 - alpha, 0.0])
        np.testing.assert_allclose(cs.g[0, row((0, 1, 0))], [-1.0 - alpha, 0.0])
        np.testing.assert_allclose(cs.g[0, row((1, 1, 0))], [1.0 - alpha, 0.0])

    def test_alpha_validation(self):
        p = np.array([[0.6, 0.4], [0.4, 0.6]])
        gm = estimate_group_model(np.array([0, 1]), np.array([0, 1]))
        for bad in (0.0, -0.1, np.inf, np.nan):
            with pytest.raises(ValueError):
                build_sp(p, gm, bad)
        build_sp(p, gm, 1.0)
        build_sp(p, gm, 2.5)


class TestSingleGroupSlack:
    def test_all_metrics_strictly_feasible(self):
        rng = np.random.default_rng(4)
        alpha = 0.2
        p, labels, groups = grid_dataset(rng, 30, 3, 1)
        gm = estimate_group_model(groups, labels, num_classes=3)
        h = clip_scores(rng.dirichlet(np.ones(3), size=30))
        for metric in ("sp", "eo", "oae"):
            vals = mean_rows(build_constraints(metric, p, gm, alpha), h)
            assert (vals < 0.0).all()

    def test_sp_exact_slack(self):
        # with one group both bands reduce to -alpha * E[h_{c'}]
        rng = np.random.default_rng(5)
        alpha = 0.15
        p, labels, groups = grid_dataset(rng, 20, 2, 1)
        gm = estimate_group_model(groups, labels, num_classes=2)
        h = clip_scores(rng.dirichlet(np.ones(2), size=20))
        cs = build_sp(p, gm, alpha)
        vals = mean_rows(cs, h)
        for k, (_, _, cp) in enumerate(cs.row_index):
            assert vals[k] == pytest.approx(-alpha * h[:, cp].mean(), rel=1e-12)


class TestCriterionEquivalence:
    # feasibility of the row system matches the reported criterion value
    @pytest.mark.parametrize("metric", ["sp", "eo", "oae"])
    def test_rows_iff_criterion(self, metric):
        rng = np.random.default_rng(6)
        for trial in range(20):
            num_c = int(rng.integers(2, 4))
            num_a = int(rng.integers(2, 4))
            p, labels, groups = grid_dataset(rng, 12 * num_a * num_c, num_c, num_a)
            gm = estimate_group_model(groups, labels, num_classes=num_c)
            h = clip_scores(rng.dirichlet(np.ones(num_c), size=p.shape[0]))
            crit = criterion_value(
                h, labels, groups, metric, base_scores=p, group_model=gm
            )
            for alpha, want in ((1.1 * crit, True), (0.9 * crit, False)):
                cs = build_constraints(metric, p, gm, alpha)
                feasible = bool(mean_rows(cs, h).max() <= 1e-12)
                assert feasible == want, (metric, trial, alpha, crit)


class TestEoDegeneracy:
    def test_empty_cell_raises_with_location(self):
        rng = np.random.default_rng(7)
        groups = np.array([0, 0, 1, 1])
        labels = np.array([0, 0, 0, 1])
        p = clip_scores(rng.dirichlet(np.ones(2), size=4))
        gm = estimate_group_model(groups, labels)
        with pytest.raises(DegenerateMarginalError, match=r"\(0, 1\)"):
            build_eo(p, gm, 0.1)

    def test_sp_tolerates_empty_cell(self):
        rng = np.random.default_rng(8)
        groups = np.array([0, 0, 1, 1])
        labels = np.array([0, 0, 0, 1])
        p = clip_scores(rng.dirichlet(np.ones(2), size=4))
        gm = estimate_group_model(groups, labels)
        build_sp(p, gm, 0.1)


class TestBuildDispatch:
    def test_unknown_metric(self):
        rng = np.random.default_rng(9)
        p, labels, groups = grid_dataset(rng, 8, 2, 2)
        gm = estimate_group_model(groups, labels)
        with pytest.raises(ValueError, match="unknown metric"):
            build_constraints("dp", p, gm, 0.1)

    def test_sample_count_mismatch(self):
        rng = np.random.default_rng(10)
        p, labels, groups = grid_dataset(rng, 8, 2, 2)
        gm = estimate_group_model(groups, labels)
        with pytest.raises(ValueError):
            build_constraints("sp", p[:4], gm, 0.1)
