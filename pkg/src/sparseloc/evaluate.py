"""Accuracy metrics, comparison reports and cross-validated tuning."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .apselect import fisher_from_stats, select_aps
from .baselines import BaselineConfig, kde, wknn
from .localize import LocalizationConfig, TrainedModel, build_system, localize
from .simulate import EnvironmentSpec, OutlierSpec, generate_online
from .solvers import DesignSystem, Method, PenaltyProfile, estimate

PERCENTILES = (25, 50, 75, 100)
BASELINES = ("wknn", "kde")
ALL_METHODS = tuple(m.value for m in Method) + BASELINES


def position_errors(estimates, truths) -> np.ndarray:
    est = np.asarray(estimates, dtype=float).reshape(-1, 2)
    tru = np.asarray(truths, dtype=float).reshape(-1, 2)
    if est.shape != tru.shape:
        raise ValueError(f"{len(est)} estimates for {len(tru)} truths")
    if len(est) == 0:
        raise ValueError("no fixes to evaluate")
    return np.linalg.norm(est - tru, axis=1)


def mae(estimates, truths) -> float:
    return float(position_errors(estimates, truths).mean())


def nearest_rank(sorted_errors, q: float) -> float:
    """Nearest-rank percentile: the value at 1-based rank ceil(q/100 * N)."""
    n = len(sorted_errors)
    rank = max(1, math.ceil(q / 100.0 * n - 1e-12))
    return float(sorted_errors[min(rank, n) - 1])


def error_cdf(estimates, truths, percentiles=PERCENTILES) -> dict:
    errors = np.sort(position_errors(estimates, truths))
    return {
        "cdf_samples": errors,
        "mae": float(errors.mean()),
        "percentiles": {q: nearest_rank(errors, q) for q in percentiles},
    }


@dataclass(frozen=True)
class MethodRow:
    method: str
    errors: np.ndarray
    mae: float
    percentiles: dict
    mean_fix_time_ms: float
    failures: int = 0


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    num_aps: int

    def row(self, method: str) -> MethodRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_csv(self, timing: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["method", "num_aps", "mae", "p25", "p50", "p75", "p100", "failures"]
        w.writerow(head + (["time_ms"] if timing else []))
        for r in self.rows:
            line = [r.method, self.num_aps, f"{r.mae:.6f}"]
            line += [f"{r.percentiles[q]:.6f}" for q in PERCENTILES] + [r.failures]
            if timing:
                line.append(f"{r.mean_fix_time_ms:.4f}")
            w.writerow(line)
        return buf.getvalue()

    def cdf_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "error", "cumulative_fraction"])
        for r in self.rows:
            e = np.sort(r.errors)
            for k, v in enumerate(e, start=1):
                w.writerow([r.method, f"{v:.6f}", f"{k / len(e):.6f}"])
        return buf.getvalue()


def global_ap_selection(model: TrainedModel, num_aps: int) -> tuple:
    """Offline Fisher selection over the whole radio map (used by the baselines)."""
    everywhere = range(model.positions.shape[0])
    scores = np.stack([fisher_from_stats(model.averaged.psi[o], model.stability.per_ap[o], everywhere)
                       for o in range(model.averaged.psi.shape[0])])
    return select_aps(scores, num_aps).selected


def run_method(method: str, y, model: TrainedModel, cfg: LocalizationConfig,
               baseline_cfg: BaselineConfig, baseline_aps):
    if method == "wknn":
        return wknn(y, model.averaged, model.positions, baseline_cfg, aps=baseline_aps)
    if method == "kde":
        return kde(y, model.averaged, model.positions, baseline_cfg, aps=baseline_aps)
    return localize(y, model, method, cfg)


def evaluate_methods(model: TrainedModel, fixes, methods, cfg: LocalizationConfig | None = None,
                     baseline_cfg: BaselineConfig | None = None) -> EvalReport:
    """Run every method on every ``(measurement, truth)`` fix.

    A fix whose solver fails counts as a failure and is scored at the
    centroid of all RPs.
    """
    cfg = cfg or LocalizationConfig()
    baseline_cfg = baseline_cfg or BaselineConfig()
    baseline_aps = global_ap_selection(model, cfg.num_aps)
    truths = np.array([_truth_xy(t) for _, t in fixes], dtype=float)
    fallback = tuple(model.positions.mean(axis=0))
    rows = []
    for method in methods:
        if method not in ALL_METHODS:
            raise ValueError(f"unknown method {method!r}")
        est, failures, elapsed = [], 0, 0.0
        for y, _ in fixes:
            t0 = time.perf_counter()
            try:
                p = run_method(method, y, model, cfg, baseline_cfg, baseline_aps).position
            except ValueError:
                p, failures = fallback, failures + 1
            elapsed += time.perf_counter() - t0
            est.append(p)
        frag = error_cdf(est, truths)
        rows.append(MethodRow(method=method, errors=frag["cdf_samples"], mae=frag["mae"],
                              percentiles=frag["percentiles"],
                              mean_fix_time_ms=1e3 * elapsed / len(fixes), failures=failures))
    return EvalReport(rows=tuple(rows), num_aps=cfg.num_aps)


def _truth_xy(t):
    return t.position if hasattr(t, "position") else tuple(t)


def outlier_trials(env: EnvironmentSpec, model: TrainedModel, fixes, num_outliers: int,
                   num_aps: int = 10, bias: float = 30.0, seed: int = 0, max_draws: int = 50,
                   fix_seed_base: int = 0) -> list:
    """Contaminated copies of ``fixes`` with ``num_outliers`` biased APs each.

    The biased APs are drawn from the APs the pipeline selects for the clean
    fix, and the draw is repeated until they are still all selected once the
    bias is applied (the bias can move the region of interest).  The noise
    realisation and orientation of the clean fix are reused.  Returns
    ``(measurement, truth)`` pairs; ``truth.outlier_aps`` lists the injected
    APs.
    """
    rng = np.random.default_rng(seed)
    out = []
    for t, (y, truth) in enumerate(fixes):
        _, sel, _ = build_system(y, model, num_aps)
        for _ in range(max_draws):
            inj = tuple(int(i) for i in rng.choice(sel.selected, num_outliers, replace=False))
            y2, tr2 = generate_online(env, truth.position, OutlierSpec(inj, "bias", bias),
                                      seed=fix_seed_base + t, orientation=truth.orientation,
                                      gamma=model.config.gamma)
            _, sel2, _ = build_system(y2, model, num_aps)
            if set(inj) <= set(sel2.selected):
                break
        out.append((y2, tr2))
    return out


@dataclass(frozen=True)
class CVResult:
    grid: tuple
    mse_curve: np.ndarray
    best: tuple
    best_index: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "alpha", "mu", "score", "best"])
        for k, (g, v) in enumerate(zip(self.grid, self.mse_curve)):
            w.writerow([repr(g[0]), repr(g[1]), repr(g[2]), f"{v:.9g}", int(k == self.best_index)])
        return buf.getvalue()


def _fold_ids(n: int, folds: int, rng) -> np.ndarray:
    ids = np.arange(n) % folds
    return ids[rng.permutation(n)]


def heldout_residual(method, system: DesignSystem, pen: PenaltyProfile, folds: int, rng,
                     opt=None) -> float:
    """Mean squared prediction error on held-out rows (APs) of one system."""
    n = system.n
    if n < folds:
        raise ValueError(f"{n} measurements cannot be split into {folds} folds")
    ids = _fold_ids(n, folds, rng)
    sq, count = 0.0, 0
    for f in range(folds):
        train, test = ids != f, ids == f
        sub = DesignSystem(H=system.H[train], y=system.y[train])
        sol = estimate(method, sub, pen, opt)
        pred = sol.intercept + system.H[test] @ sol.theta
        sq += float(((system.y[test] - pred) ** 2).sum())
        count += int(test.sum())
    return sq / count


def cross_validate(fixes, model: TrainedModel, method="lasso", grid=None, folds: int = 2,
                   cfg: LocalizationConfig | None = None, seed: int = 0,
                   mode: str = "residual") -> CVResult:
    """Score every ``(lambda, alpha, mu)`` tuple and keep the best.

    ``residual`` mode (default) splits each fix's selected APs into
    ``folds`` folds, fits on all but one and scores the squared prediction
    error on the held-out APs, averaged over folds and fixes.  ``position``
    mode scores the mean position error instead and needs truths.  Ties go
    to the first tuple in ``grid``.
    """
    cfg = cfg or LocalizationConfig()
    if folds < 2:
        raise ValueError("at least two folds are required")
    grid = tuple(tuple(float(v) for v in g) for g in (grid or [(cfg.penalty.lam,
                                                                 cfg.penalty.alpha,
                                                                 cfg.penalty.mu)]))
    if not grid:
        raise ValueError("empty parameter grid")
    if len(fixes) < folds:
        raise ValueError(f"{len(fixes)} fixes cannot be split into {folds} folds")
    if mode not in ("residual", "position"):
        raise ValueError(f"unknown mode {mode!r}")
    method = Method.parse(method)
    systems = [build_system(y, model, cfg.num_aps)[2] for y, _ in fixes] \
        if mode == "residual" else None
    scores = []
    for lam, alpha, mu in grid:
        pen = PenaltyProfile(lam=lam, alpha=alpha, mu=mu)
        if mode == "residual":
            rng = np.random.default_rng(seed)
            vals = [heldout_residual(method, s, pen, folds, rng, cfg.options) for s in systems]
        else:
            run_cfg = replace(cfg, penalty=pen)
            vals = [math.dist(localize(y, model, method, run_cfg).position, _truth_xy(t))
                    for y, t in fixes]
        scores.append(float(np.mean(vals)))
    scores = np.array(scores)
    k = int(np.argmin(scores))
    return CVResult(grid=grid, mse_curve=scores, best=grid[k], best_index=k)
