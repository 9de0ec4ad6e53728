"""Coarse localization: pick the region of interest from the cluster heads."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .survey import AveragedRadioMap, ReliabilityProfile


class EmptyROIError(ValueError):
    pass


@dataclass(frozen=True)
class ModifiedRadioMap:
    """Fingerprint columns restricted to the region of interest.

    ``columns[v] = (rp, o)`` tags column ``v`` of ``psi`` with its reference
    point index and orientation index.
    """
    columns: tuple
    psi: np.ndarray
    rps: tuple
    winners: tuple
    included: tuple

    @property
    def num_columns(self) -> int:
        return len(self.columns)

    @property
    def num_rps(self) -> int:
        return len(self.rps)

    def column_rps(self) -> np.ndarray:
        return np.array([rp for rp, _ in self.columns], dtype=int)


def head_distances(reliable_y, clusters, rel: ReliabilityProfile, o: int) -> np.ndarray:
    heads = np.asarray(clusters.heads, dtype=int)
    ch_bits = rel.indicators[o][:, heads]
    return np.count_nonzero(ch_bits != np.asarray(reliable_y, dtype=bool)[:, None], axis=0)


def select_roi(reliable_y, clusters, avg: AveragedRadioMap,
               rel: ReliabilityProfile) -> ModifiedRadioMap:
    """Assemble the modified radio map for one online reliability vector.

    Per orientation the cluster whose head pattern is closest in Hamming
    distance wins (ties to the lowest cluster index).  The winner's RPs and
    the RPs of every cluster sharing at least one RP with it make up that
    orientation's columns.
    """
    reliable_y = np.asarray(reliable_y, dtype=bool)
    if reliable_y.shape != (avg.psi.shape[1],):
        raise ValueError("reliability vector length does not match the radio map")
    columns, winners, included = [], [], []
    failed = [o for o, cs in enumerate(clusters) if cs.num_clusters == 0]
    if failed or not clusters:
        raise EmptyROIError(f"no clusters for orientation(s) {failed}")
    for o, cs in enumerate(clusters):
        dist = head_distances(reliable_y, cs, rel, o)
        win = int(np.argmin(dist))
        core = set(cs.members[win])
        ks = [k for k, mem in enumerate(cs.members) if core.intersection(mem)]
        rps = sorted(set().union(*(cs.members[k] for k in ks)))
        if not rps:
            raise EmptyROIError(f"empty region of interest at orientation {o}")
        winners.append(win)
        included.append(tuple(ks))
        columns.extend((j, o) for j in rps)
    psi = np.stack([avg.psi[o][:, j] for j, o in columns], axis=1)
    psi.setflags(write=False)
    roi_rps = tuple(sorted({j for j, _ in columns}))
    return ModifiedRadioMap(columns=tuple(columns), psi=psi, rps=roi_rps,
                            winners=tuple(winners), included=tuple(included))
