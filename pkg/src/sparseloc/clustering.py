"""Graph clustering of reference points on their AP reliability patterns."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .survey import ReliabilityProfile


def hamming_distance(a, b) -> int:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def pairwise_hamming(ind: np.ndarray) -> np.ndarray:
    """Hamming distances between the columns of an L x N bit matrix."""
    x = np.asarray(ind, dtype=np.int64)
    ones = x.sum(axis=0)
    both = x.T @ x
    return ones[:, None] + ones[None, :] - 2 * both


def membership_threshold(num_aps: int, eta_fraction: float) -> int:
    """Largest Hamming distance that still counts as "similar enough".

    ``eta_fraction`` of the bits have to agree, i.e. at most
    ``floor((1 - eta_fraction) * L)`` may differ.
    """
    return int(math.floor((1.0 - eta_fraction) * num_aps + 1e-9))


@dataclass(frozen=True)
class SimilarityGraph:
    orientation: int
    hamming: np.ndarray
    similarity: np.ndarray
    lambda_cap: float
    num_aps: int

    @property
    def num_rps(self) -> int:
        return self.hamming.shape[0]


def build_similarity_graph(rel: ReliabilityProfile, o: int) -> SimilarityGraph:
    """Similarity graph for orientation index ``o``.

    Edge weight is ``1/H`` for nonzero Hamming distance and ``L + 1`` for
    identical patterns.  The diagonal carries no edge and is left at zero.
    """
    ind = rel.indicators[o]
    num_aps = ind.shape[0]
    ham = pairwise_hamming(ind)
    cap = float(num_aps + 1)
    with np.errstate(divide="ignore"):
        sim = np.where(ham > 0, 1.0 / np.maximum(ham, 1), cap)
    np.fill_diagonal(sim, 0.0)
    ham.setflags(write=False)
    sim.setflags(write=False)
    return SimilarityGraph(orientation=o, hamming=ham, similarity=sim, lambda_cap=cap,
                           num_aps=num_aps)


@dataclass(frozen=True)
class ClusterSet:
    """Overlapping clusters of one orientation.

    ``seeds[k]`` is the node that founded cluster ``k`` (its members were
    admitted against it); ``heads[k]`` is the re-elected minimum-variance
    member.  ``members[k]`` is sorted and always contains the head.
    """
    orientation: int
    members: tuple
    heads: tuple
    seeds: tuple
    threshold: int

    @property
    def num_clusters(self) -> int:
        return len(self.members)

    def followers(self, k: int) -> tuple:
        return tuple(j for j in self.members[k] if j != self.heads[k])

    def membership(self) -> dict:
        """RP index -> list of clusters containing it."""
        table: dict = {}
        for k, mem in enumerate(self.members):
            for j in mem:
                table.setdefault(j, []).append(k)
        return table

    def to_dict(self, rp_ids=None) -> dict:
        ident = (lambda j: int(rp_ids[j])) if rp_ids is not None else int
        return {
            "orientation": self.orientation,
            "threshold": self.threshold,
            "clusters": [
                {"head": ident(h), "seed": ident(s), "members": [ident(j) for j in mem]}
                for h, s, mem in zip(self.heads, self.seeds, self.members)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, rp_index=None) -> "ClusterSet":
        index = (lambda j: int(rp_index[j])) if rp_index is not None else int
        cl = d["clusters"]
        return cls(
            orientation=d["orientation"],
            members=tuple(tuple(sorted(index(j) for j in c["members"])) for c in cl),
            heads=tuple(index(c["head"]) for c in cl),
            seeds=tuple(index(c["seed"]) for c in cl),
            threshold=int(d["threshold"]),
        )


def build_clusters(graph: SimilarityGraph, variance, eta_fraction: float) -> ClusterSet:
    """Overlapped clustering with minimum-variance head election.

    Seeds are taken from the candidate set in ascending index order.  Every
    node whose reliability pattern is within the membership threshold of the
    seed joins its cluster, including nodes already claimed by earlier
    clusters, which is what makes clusters overlap.  Only the new cluster's
    members leave the candidate set.  Heads are then re-elected as the
    member with the smallest variance (ties go to the lowest index).
    """
    n = graph.num_rps
    if n == 0:
        raise ValueError("cannot cluster an empty RP set")
    variance = np.asarray(variance, dtype=float)
    if variance.shape != (n,):
        raise ValueError("variance vector does not match the graph")
    thr = membership_threshold(graph.num_aps, eta_fraction)
    close = graph.hamming <= thr

    candidates = np.ones(n, dtype=bool)
    members, seeds = [], []
    while candidates.any():
        seed = int(np.argmax(candidates))
        mem = np.flatnonzero(close[seed])
        members.append(tuple(int(j) for j in mem))
        seeds.append(seed)
        candidates[mem] = False

    heads = []
    for mem in members:
        v = variance[list(mem)]
        # argmin returns the first minimum, and mem is ascending
        heads.append(mem[int(np.argmin(v))])
    return ClusterSet(orientation=graph.orientation, members=tuple(members),
                      heads=tuple(heads), seeds=tuple(seeds), threshold=thr)


def cluster_all(rel: ReliabilityProfile, per_rp_variance, eta_fraction: float) -> tuple:
    """Cluster every orientation independently."""
    return tuple(
        build_clusters(build_similarity_graph(rel, o), per_rp_variance[o], eta_fraction)
        for o in range(rel.indicators.shape[0])
    )
