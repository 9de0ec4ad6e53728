import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sparseloc.apselect import select_aps
from sparseloc.localize import (LocalizationConfig, PositionEstimate, build_system, localize,
                                model_from_dict, model_to_dict, outlier_report, postprocess)
from sparseloc.simulate import OutlierSpec, generate_online, rp_positions
from sparseloc.solvers import PenaltyProfile, SparseSolution

POS = np.array([[0.0, 0.0], [3.0, 0.0], [6.0, 0.0]])


def test_weighted_centroid():
    est = postprocess([0.6, 0.4], [(0, 0), (1, 0)], POS, beta=0.01)
    assert_allclose(est.position, (1.2, 0.0))
    assert not est.low_confidence


def test_one_sparse_returns_rp():
    est = postprocess([0.0, 0.0, 2.0], [(0, 0), (1, 0), (2, 3)], POS)
    assert est.position == (6.0, 0.0)
    assert est.support == ((2, 3, 2.0),)


def test_repeated_rp_sums_weights():
    # RP1 at two orientations (0.3 + 0.2) against RP0 with 0.5: midpoint
    est = postprocess([0.5, 0.3, 0.2], [(0, 0), (1, 0), (1, 2)], POS, beta=0.01)
    assert_allclose(est.position, (1.5, 0.0))


def test_relative_beta_drops_small_and_negative():
    est = postprocess([1.0, 0.1, -2.0], [(0, 0), (1, 0), (2, 0)], POS)
    assert est.position == (0.0, 0.0)
    assert [s[0] for s in est.support] == [0]


def test_nothing_passes_falls_back():
    est = postprocess([-1.0, -0.5, 0.0], [(0, 0), (1, 0), (2, 0)], POS)
    assert est.low_confidence
    assert est.position == (6.0, 0.0)


def test_postprocess_tag_mismatch():
    with pytest.raises(ValueError):
        postprocess([1.0], [(0, 0), (1, 0)], POS)


def _sel():
    return select_aps(np.array([0.0, 5.0, 1.0, 4.0]), 3)  # selected (1, 3, 2)


def _sol(kappa):
    return SparseSolution(theta=np.zeros(1), kappa=np.asarray(kappa, float), objective=0.0,
                          iterations=1, converged=True, kkt_residual=0.0)


def test_outlier_report():
    sel = _sel()
    assert outlier_report(_sol([0.0, 0.0, 0.0]), sel) == ()
    assert outlier_report(_sol([0.0, 10.0, 0.0]), sel, 3.0) == (3,)
    assert outlier_report(_sol([0.0, 10.0, -4.0]), sel, 3.0) == (2, 3)
    assert outlier_report(_sol([0.0, 10.0, 0.0]), sel, 11.0) == ()


def test_estimate_to_dict_is_json():
    est = PositionEstimate(position=(1.0, 2.0), support=((0, 1, 0.5),), flagged_outlier_aps=(3,),
                           method="m-lasso")
    d = json.loads(json.dumps(est.to_dict()))
    assert d["x"] == 1.0 and d["outlier_aps"] == [3]
    assert d["support"][0] == {"rp": 0, "orientation": 1, "coefficient": 0.5}


@pytest.mark.parametrize("method", ["lasso", "cs"])
def test_noise_free_fingerprint_is_exact(quiet_model, quiet_env, method):
    pos = rp_positions(quiet_env)
    for j in (0, 40, 113, 191):
        for o in range(4):
            est = localize(quiet_model.averaged.psi[o][:, j], quiet_model, method)
            assert np.hypot(*(np.array(est.position) - pos[j])) < 1e-6


def test_clean_noise_free_kappa_is_zero(quiet_model):
    cfg = LocalizationConfig(penalty=PenaltyProfile(lam=0.1, mu=0.5))
    for j in (5, 40, 150):
        for method in ("m-lasso", "m-glmnet", "m-cs"):
            est, tr = localize(quiet_model.averaged.psi[1][:, j], quiet_model, method, cfg,
                               trace=True)
            assert_array_equal(tr.solution.kappa, 0.0)
            assert est.flagged_outlier_aps == ()


def test_cs_and_m_cs_agree_on_clean(quiet_model):
    y = quiet_model.averaged.psi[0][:, 40]
    a = localize(y, quiet_model, "cs")
    b = localize(y, quiet_model, "m-cs", LocalizationConfig(penalty=PenaltyProfile(mu=1e6)))
    assert_allclose(a.position, b.position, atol=1e-6)


def test_biased_ap_is_flagged(env, model):
    pos = rp_positions(env)[60]
    y, truth = generate_online(env, pos, seed=4, orientation=0)
    target = build_system(y, model)[1].selected[0]
    y2, _ = generate_online(env, pos, OutlierSpec((target,), "bias", 30.0), seed=4, orientation=0)
    assert target in build_system(y2, model)[1].selected
    est = localize(y2, model, "m-lasso")
    assert target in est.flagged_outlier_aps


def test_pipeline_shapes_and_trace(env, model):
    y, _ = generate_online(env, (100.0, 17.5), seed=1)
    est, tr = localize(y, model, "glmnet", LocalizationConfig(num_aps=6), trace=True)
    assert tr.system.H.shape == (6, tr.roi.num_columns)
    assert_allclose(tr.system.H, tr.selection.matrix @ tr.roi.psi)
    assert_allclose(tr.system.y, tr.selection.matrix @ y.rss)
    assert est.diagnostics["converged"]
    assert est.diagnostics["kkt_residual"] <= 1e-7


def test_raw_vector_input_and_length_check(env, model):
    y, _ = generate_online(env, (100.0, 17.5), seed=1)
    a = localize(y, model)
    b = localize(np.asarray(y.rss), model)
    assert a.position == b.position
    with pytest.raises(ValueError):
        localize(np.asarray(y.rss)[:5], model)


def test_model_roundtrip(env, model):
    back = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
    assert_array_equal(back.averaged.psi, model.averaged.psi)
    assert_array_equal(back.reliability.indicators, model.reliability.indicators)
    assert_array_equal(back.stability.per_rp, model.stability.per_rp)
    assert back.clusters == model.clusters
    y, _ = generate_online(env, (50.0, 17.5), seed=2)
    assert localize(y, back).position == localize(y, model).position
