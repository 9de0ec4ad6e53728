"""Online AP selection by the Fisher discrimination criterion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .survey import AveragedRadioMap, RawRadioMap

DENOMINATOR_FLOOR = 1e-9
DEFAULT_NUM_APS = 10


def fisher_from_stats(psi_o, var_o, roi, floor: float = DENOMINATOR_FLOOR) -> np.ndarray:
    """Fisher score of every AP over the RPs in ``roi`` for one orientation.

    ``psi_o`` and ``var_o`` are L x N (time-averaged RSS and unbiased
    per-RP sample variance).  The within-RP term of the criterion is the sum
    of the per-RP variances, so raw samples are not needed here.
    """
    roi = np.asarray(sorted(roi), dtype=int)
    if roi.size == 0:
        raise ValueError("empty region of interest")
    sub = np.asarray(psi_o, dtype=float)[:, roi]
    between = ((sub - sub.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    within = np.asarray(var_o, dtype=float)[:, roi].sum(axis=1)
    return between / np.maximum(within, floor)


def fisher_scores(raw: RawRadioMap, avg: AveragedRadioMap, roi, o: int,
                  floor: float = DENOMINATOR_FLOOR) -> np.ndarray:
    if raw.samples.shape[-1] < 2:
        raise ValueError("Fisher scores need at least two samples per RP")
    var_o = raw.samples[o].var(axis=-1, ddof=1)
    return fisher_from_stats(avg.psi[o], var_o, roi, floor)


@dataclass(frozen=True)
class APSelection:
    per_orientation_scores: np.ndarray
    averaged_scores: np.ndarray
    selected: tuple

    @property
    def num_aps(self) -> int:
        return self.averaged_scores.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        phi = np.zeros((len(self.selected), self.num_aps))
        phi[np.arange(len(self.selected)), list(self.selected)] = 1.0
        return phi


def select_aps(scores, size: int = DEFAULT_NUM_APS) -> APSelection:
    """Keep the ``size`` APs with the largest orientation-averaged score.

    Ties are broken towards the lower AP index.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    num_aps = scores.shape[1]
    if not 1 <= size <= num_aps:
        raise ValueError(f"cannot select {size} of {num_aps} APs")
    avg = scores.mean(axis=0)
    order = np.lexsort((np.arange(num_aps), -avg))
    return APSelection(per_orientation_scores=scores, averaged_scores=avg,
                       selected=tuple(int(i) for i in order[:size]))


def apply_selection(sel: APSelection, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != sel.num_aps:
        raise ValueError(f"leading dimension {v.shape[0]} != {sel.num_aps} APs")
    return v[list(sel.selected)]
