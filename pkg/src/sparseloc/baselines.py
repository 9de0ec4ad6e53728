"""Weighted k-nearest-neighbour and Gaussian-kernel reference estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .localize import PositionEstimate
from .survey import AveragedRadioMap, check_length


@dataclass(frozen=True)
class BaselineConfig:
    k: int = 10
    kernel_sigma: float = 5.0
    distance_floor: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.kernel_sigma <= 0 or self.distance_floor <= 0:
            raise ValueError("kernel_sigma and distance_floor must be positive")


def fingerprint_distances(y, avg: AveragedRadioMap, aps=None) -> np.ndarray:
    """Euclidean RSS distance to every RP, minimised over orientations."""
    psi = avg.psi
    y = check_length(getattr(y, "rss", y), psi.shape[1])
    if aps is not None:
        aps = list(aps)
        psi, y = psi[:, aps, :], y[aps]
    d = np.sqrt(((psi - y[None, :, None]) ** 2).sum(axis=1))
    return d.min(axis=0)


def wknn(y, avg: AveragedRadioMap, positions, cfg: BaselineConfig | None = None,
         aps=None) -> PositionEstimate:
    cfg = cfg or BaselineConfig()
    positions = np.asarray(positions, dtype=float)
    d = fingerprint_distances(y, avg, aps)
    if cfg.k > d.size:
        raise ValueError(f"k={cfg.k} exceeds the {d.size} reference points")
    nearest = np.argsort(d, kind="stable")[:cfg.k]
    w = 1.0 / np.maximum(d[nearest], cfg.distance_floor)
    p = (w[:, None] * positions[nearest]).sum(axis=0) / w.sum()
    support = tuple((int(j), -1, float(wj / w.sum())) for j, wj in zip(nearest, w))
    return PositionEstimate(position=(float(p[0]), float(p[1])), support=support,
                            flagged_outlier_aps=(), method="wknn")


def kde_weights(d, sigma: float) -> np.ndarray:
    """Normalised Gaussian-kernel weights; all-zero if every weight underflows."""
    logw = -(np.asarray(d, dtype=float) ** 2) / (2.0 * sigma ** 2)
    w = np.exp(logw)
    total = w.sum()
    return w / total if total > 0 else np.zeros_like(w)


def kde(y, avg: AveragedRadioMap, positions, cfg: BaselineConfig | None = None,
        aps=None) -> PositionEstimate:
    cfg = cfg or BaselineConfig()
    positions = np.asarray(positions, dtype=float)
    d = fingerprint_distances(y, avg, aps)
    w = kde_weights(d, cfg.kernel_sigma)
    if not w.any():
        j = int(np.argmin(d))
        return PositionEstimate(position=tuple(float(c) for c in positions[j]),
                                support=((j, -1, 1.0),), flagged_outlier_aps=(), method="kde",
                                low_confidence=True)
    p = w @ positions
    support = tuple((int(j), -1, float(w[j])) for j in np.flatnonzero(w > 1e-12))
    return PositionEstimate(position=(float(p[0]), float(p[1])), support=support,
                            flagged_outlier_aps=(), method="kde")
