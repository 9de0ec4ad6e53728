import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from sparseloc.evaluate import (CVResult, cross_validate, error_cdf, evaluate_methods,
                                global_ap_selection, mae, nearest_rank, outlier_trials)
from sparseloc.localize import build_system
from sparseloc.simulate import generate_test_set
from sparseloc.solvers import DesignSystem, PenaltyProfile, estimate


def test_mae_examples():
    assert mae([(3.0, 0.0), (0.0, 5.0)], [(0.0, 0.0), (0.0, 0.0)]) == pytest.approx(4.0)
    assert mae([(1.0, 2.0)], [(1.0, 2.0)]) == 0.0
    assert mae([(3.0, 4.0)], [(0.0, 0.0)]) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        mae([(0.0, 0.0)], [(0.0, 0.0), (1.0, 1.0)])


def test_nearest_rank_examples():
    e = np.array([1.0, 2.0, 3.0, 4.0])
    assert nearest_rank(e, 50) == 2.0
    assert nearest_rank(e, 25) == 1.0
    assert nearest_rank(e, 100) == 4.0
    cdf = error_cdf([(2.0, 0.0)] * 5, [(0.0, 0.0)] * 5)
    assert set(cdf["percentiles"].values()) == {2.0}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=20),
       st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)))
def test_mae_translation_invariant(points, shift):
    est = np.array(points)
    tru = est[::-1] + 1.0
    moved = mae(est + shift, tru + shift)
    assert moved == pytest.approx(mae(est, tru), rel=1e-9, abs=1e-6)


def test_report_rows_and_csv(env, model):
    fixes = generate_test_set(env, 6, seed=3)
    rep = evaluate_methods(model, fixes, ["lasso", "cs", "wknn"])
    assert [r.method for r in rep.rows] == ["lasso", "cs", "wknn"]
    text = rep.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "method,num_aps,mae,p25,p50,p75,p100,failures"
    assert len(lines) == 4
    assert "time_ms" in rep.to_csv(timing=True)
    cdf = rep.cdf_csv().strip().split("\n")
    assert len(cdf) == 1 + 3 * 6
    row = rep.row("lasso")
    assert row.percentiles[100] == pytest.approx(row.errors.max())
    with pytest.raises(ValueError):
        evaluate_methods(model, fixes, ["nope"])


def test_baseline_ap_selection(model):
    aps = global_ap_selection(model, 10)
    assert len(set(aps)) == 10


def test_outlier_trials_keep_aps_selected(env, model):
    fixes = generate_test_set(env, 8, seed=5)
    trials = outlier_trials(env, model, fixes, 2, seed=0, fix_seed_base=5 * 100_003)
    for (y, truth), (y0, t0) in zip(trials, fixes):
        assert len(truth.outlier_aps) == 2
        assert truth.position == t0.position
        assert set(truth.outlier_aps) <= set(build_system(y, model)[1].selected)


def test_cv_single_and_duplicate(env, model):
    fixes = generate_test_set(env, 4, seed=2)
    r = cross_validate(fixes, model, "lasso", [(0.3, 0.95, 0.5)])
    assert r.best == (0.3, 0.95, 0.5)
    r = cross_validate(fixes, model, "lasso", [(0.3, 0.95, 0.5), (0.3, 0.95, 0.5)])
    assert r.best_index == 0
    assert r.to_csv().count(",1\n") == 1


def test_cv_errors(env, model):
    fixes = generate_test_set(env, 3, seed=2)
    with pytest.raises(ValueError):
        cross_validate(fixes, model, folds=4)
    with pytest.raises(ValueError):
        cross_validate(fixes, model, folds=1)
    with pytest.raises(ValueError):
        cross_validate(fixes, model, mode="bogus")


def _heldout_by_hand(fixes, model, lam, folds=2, seed=0):
    """Exhaustive recomputation of the held-out-AP residual score."""
    rng = np.random.default_rng(seed)
    per_fix = []
    for y, _ in fixes:
        sys = build_system(y, model, 10)[2]
        ids = (np.arange(sys.n) % folds)[rng.permutation(sys.n)]
        err = []
        for f in range(folds):
            tr, te = ids != f, ids == f
            sol = estimate("lasso", DesignSystem(H=sys.H[tr], y=sys.y[tr]), PenaltyProfile(lam=lam))
            err.extend(sys.y[te] - sol.intercept - sys.H[te] @ sol.theta)
        per_fix.append(np.mean(np.square(err)))
    return float(np.mean(per_fix))


def test_cv_picks_dominant_lambda(env, model):
    fixes = generate_test_set(env, 12, seed=1)
    grid = [(1e-4, 0.95, 0.5), (0.1, 0.95, 0.5), (10.0, 0.95, 0.5)]
    by_hand = [_heldout_by_hand(fixes, model, g[0]) for g in grid]
    assert np.argmin(by_hand) == 1
    assert min(by_hand[0], by_hand[2]) > 1.5 * by_hand[1]
    r = cross_validate(fixes, model, "lasso", grid, folds=2, seed=0)
    assert_allclose(r.mse_curve, by_hand, rtol=1e-9)
    assert r.best == (0.1, 0.95, 0.5)


def test_cv_position_mode(env, model):
    fixes = generate_test_set(env, 6, seed=4)
    r = cross_validate(fixes, model, "lasso", [(0.01, 0.95, 0.5), (1.0, 0.95, 0.5)],
                       mode="position")
    assert isinstance(r, CVResult) and r.mse_curve.shape == (2,)
