"""Online pipeline: reliability -> ROI -> AP selection -> sparse fit -> position."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import apselect
from .apselect import APSelection, fisher_from_stats, select_aps
from .clustering import ClusterSet, cluster_all
from .roi import ModifiedRadioMap, select_roi
from .solvers import DesignSystem, Method, PenaltyProfile, SolverOptions, SparseSolution, estimate
from .survey import (AveragedRadioMap, OnlineMeasurement, RawRadioMap, ReliabilityProfile,
                     StabilityProfile, SurveyConfig, check_length, min_reliable_count, online_reliability,
                     reliability_indicators, stability, time_average)

DEFAULT_BETA_FRACTION = 0.2
DEFAULT_OUTLIER_FLOOR = 3.0


@dataclass(frozen=True)
class TrainedModel:
    config: SurveyConfig
    positions: np.ndarray
    averaged: AveragedRadioMap
    reliability: ReliabilityProfile
    stability: StabilityProfile
    clusters: tuple

    @property
    def num_aps(self) -> int:
        return self.config.num_aps


def train(raw: RawRadioMap) -> TrainedModel:
    avg = time_average(raw)
    rel = reliability_indicators(raw)
    stab = stability(raw, rel)
    clusters = cluster_all(rel, stab.per_rp, raw.config.eta_fraction)
    return TrainedModel(config=raw.config, positions=raw.positions, averaged=avg,
                        reliability=rel, stability=stab, clusters=clusters)


@dataclass(frozen=True)
class LocalizationConfig:
    num_aps: int = apselect.DEFAULT_NUM_APS
    penalty: PenaltyProfile = field(default_factory=PenaltyProfile)
    options: SolverOptions = field(default_factory=SolverOptions)
    beta_fraction: float = DEFAULT_BETA_FRACTION
    beta: float | None = None
    outlier_floor: float = DEFAULT_OUTLIER_FLOOR


@dataclass(frozen=True)
class PositionEstimate:
    position: tuple
    support: tuple
    flagged_outlier_aps: tuple
    method: str
    low_confidence: bool = False
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x": self.position[0],
            "y": self.position[1],
            "method": self.method,
            "support": [{"rp": rp, "orientation": o, "coefficient": c}
                        for rp, o, c in self.support],
            "outlier_aps": list(self.flagged_outlier_aps),
            "low_confidence": self.low_confidence,
            "diagnostics": self.diagnostics,
        }


def postprocess(theta, tags, positions, beta: float | None = None,
                beta_fraction: float = DEFAULT_BETA_FRACTION, method: str = ""):
    """Weighted centroid of the RPs whose coefficients reach ``beta``.

    ``tags[v] = (rp, orientation)`` for coefficient ``v``; an RP seen at
    several orientations contributes once per column.  Without an absolute
    ``beta`` the threshold is ``beta_fraction`` times the largest positive
    coefficient.  If nothing passes, the RP of the largest coefficient is
    returned and flagged as low confidence.
    """
    theta = np.asarray(theta, dtype=float)
    if len(tags) != theta.size:
        raise ValueError("one (rp, orientation) tag per coefficient is required")
    positions = np.asarray(positions, dtype=float)
    top = float(theta.max()) if theta.size else 0.0
    if beta is None:
        beta = beta_fraction * top
    keep = np.flatnonzero((theta >= beta) & (theta > 0)) if top > 0 else np.array([], int)
    if keep.size == 0:
        v = int(np.argmax(theta)) if theta.size else 0
        rp = tags[v][0]
        return PositionEstimate(position=tuple(float(c) for c in positions[rp]),
                                support=((int(rp), int(tags[v][1]), float(theta[v])),),
                                flagged_outlier_aps=(), method=method, low_confidence=True)
    w = theta[keep]
    rps = np.array([tags[v][0] for v in keep], dtype=int)
    p = (w[:, None] * positions[rps]).sum(axis=0) / w.sum()
    support = tuple((int(tags[v][0]), int(tags[v][1]), float(theta[v])) for v in keep)
    return PositionEstimate(position=(float(p[0]), float(p[1])), support=support,
                            flagged_outlier_aps=(), method=method)


def outlier_report(sol: SparseSolution, sel: APSelection,
                   magnitude_floor: float = DEFAULT_OUTLIER_FLOOR) -> tuple:
    """Original AP indices whose estimated outlier magnitude reaches the floor."""
    kappa = np.asarray(sol.kappa, dtype=float)
    if kappa.size == 0:
        return ()
    return tuple(sorted(sel.selected[r] for r in np.flatnonzero(np.abs(kappa) >= magnitude_floor)))


@dataclass(frozen=True)
class PipelineTrace:
    roi: ModifiedRadioMap
    selection: APSelection
    system: DesignSystem
    solution: SparseSolution


def build_system(y, model: TrainedModel, num_aps: int = apselect.DEFAULT_NUM_APS):
    """Run the coarse stages and return ``(roi, selection, system)``."""
    y = check_length(getattr(y, "rss", y), model.num_aps)
    rel_y = online_reliability(y, model.config.gamma)
    roi = select_roi(rel_y, model.clusters, model.averaged, model.reliability)
    scores = np.stack([
        fisher_from_stats(model.averaged.psi[o], model.stability.per_ap[o], roi.rps)
        for o in range(len(model.clusters))
    ])
    sel = select_aps(scores, num_aps)
    H = apselect.apply_selection(sel, roi.psi)
    return roi, sel, DesignSystem(H=H, y=apselect.apply_selection(sel, y))


def localize(y, model: TrainedModel, method="lasso", cfg: LocalizationConfig | None = None,
             trace: bool = False):
    """Estimate a position from one online measurement.

    ``y`` is an :class:`OnlineMeasurement` or a raw L-vector in dBm.  With
    ``trace`` the intermediate products are returned as well.
    """
    cfg = cfg or LocalizationConfig()
    method = Method.parse(method)
    roi, sel, system = build_system(y, model, cfg.num_aps)
    sol = estimate(method, system, cfg.penalty, cfg.options)
    est = postprocess(sol.theta, roi.columns, model.positions, beta=cfg.beta,
                      beta_fraction=cfg.beta_fraction, method=method.value)
    flagged = outlier_report(sol, sel, cfg.outlier_floor) if method.robust else ()
    diag = {
        "roi_columns": roi.num_columns,
        "roi_rps": roi.num_rps,
        "winning_clusters": list(roi.winners),
        "selected_aps": list(sel.selected),
        "iterations": sol.iterations,
        "converged": sol.converged,
        "kkt_residual": sol.kkt_residual,
        "objective": sol.objective,
    }
    est = PositionEstimate(position=est.position, support=est.support, flagged_outlier_aps=flagged,
                           method=method.value, low_confidence=est.low_confidence, diagnostics=diag)
    if trace:
        return est, PipelineTrace(roi=roi, selection=sel, system=system, solution=sol)
    return est


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "config": model.config.to_dict(),
        "positions": model.positions.tolist(),
        "psi": model.averaged.psi.tolist(),
        "per_ap_variance": model.stability.per_ap.tolist(),
        "reliability_counts": model.reliability.counts.tolist(),
        "clusters": [cs.to_dict() for cs in model.clusters],
    }


def model_from_dict(d: dict) -> TrainedModel:
    cfg = SurveyConfig.from_dict(d["config"])
    counts = np.asarray(d["reliability_counts"], dtype=int)
    ind = counts >= min_reliable_count(cfg.reliability_fraction, cfg.samples_per_rp)
    rel = ReliabilityProfile(counts=counts, indicators=ind)
    per_ap = np.asarray(d["per_ap_variance"], dtype=float)
    n_rel = ind.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_rp = np.where(n_rel > 0, np.where(ind, per_ap, 0).sum(axis=1) / np.maximum(n_rel, 1),
                          np.inf)
    return TrainedModel(
        config=cfg, positions=np.asarray(d["positions"], dtype=float),
        averaged=AveragedRadioMap(psi=np.asarray(d["psi"], dtype=float)),
        reliability=rel, stability=StabilityProfile(per_ap=per_ap, per_rp=per_rp),
        clusters=tuple(ClusterSet.from_dict(c) for c in d["clusters"]),
    )
