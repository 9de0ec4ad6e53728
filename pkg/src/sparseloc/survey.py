"""Radio-map data model and the offline statistics computed from it.

Array layout used throughout the package:

* raw samples: ``(n_orientations, L, N, M)`` -- orientation, AP, RP, time
* averaged map ``psi``: ``(n_orientations, L, N)``

so that ``psi[o]`` is the L x N fingerprint matrix of one orientation, with
one column per reference point.  RPs and APs are addressed by 0-based index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ORIENTATIONS = (0, 90, 180, 270)
MISSING_DBM = -100.0


@dataclass(frozen=True)
class SurveyConfig:
    num_aps: int
    num_rps: int
    samples_per_rp: int
    orientations: tuple = ORIENTATIONS
    gamma: float = -70.0
    eta_fraction: float = 0.92
    missing_sentinel: float = MISSING_DBM
    reliability_fraction: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "orientations", tuple(self.orientations))
        if self.num_aps < 1:
            raise ValueError("num_aps must be >= 1")
        if self.num_rps < 1:
            raise ValueError("num_rps must be >= 1")
        if self.samples_per_rp < 1:
            raise ValueError("samples_per_rp must be >= 1")
        if not self.orientations:
            raise ValueError("at least one orientation is required")
        if not self.missing_sentinel < self.gamma:
            raise ValueError("missing_sentinel must lie below gamma")
        if not 0.0 < self.reliability_fraction <= 1.0:
            raise ValueError("reliability_fraction must be in (0, 1]")
        if not 0.0 < self.eta_fraction <= 1.0:
            raise ValueError("eta_fraction must be in (0, 1]")

    @property
    def eta(self) -> float:
        """Cluster threshold in the units of the tuning table (eta_fraction * L)."""
        return self.eta_fraction * self.num_aps

    def to_dict(self) -> dict:
        return {
            "num_aps": self.num_aps,
            "num_rps": self.num_rps,
            "samples_per_rp": self.samples_per_rp,
            "orientations": list(self.orientations),
            "gamma": self.gamma,
            "eta_fraction": self.eta_fraction,
            "missing_sentinel": self.missing_sentinel,
            "reliability_fraction": self.reliability_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurveyConfig":
        return cls(
            num_aps=int(d["num_aps"]),
            num_rps=int(d["num_rps"]),
            samples_per_rp=int(d["samples_per_rp"]),
            orientations=tuple(d.get("orientations", ORIENTATIONS)),
            gamma=float(d.get("gamma", -70.0)),
            eta_fraction=float(d.get("eta_fraction", 0.92)),
            missing_sentinel=float(d.get("missing_sentinel", MISSING_DBM)),
            reliability_fraction=float(d.get("reliability_fraction", 0.9)),
        )


@dataclass(frozen=True)
class ReferencePoint:
    id: int
    x: float
    y: float


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RawRadioMap:
    samples: np.ndarray
    rps: tuple
    config: SurveyConfig

    def __post_init__(self):
        s = _frozen(self.samples)
        cfg = self.config
        expected = (len(cfg.orientations), cfg.num_aps, cfg.num_rps, cfg.samples_per_rp)
        if s.shape != expected:
            raise ValueError(f"samples shape {s.shape} != expected {expected}")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite; store missing readings as the sentinel")
        rps = tuple(self.rps)
        if len(rps) != cfg.num_rps:
            raise ValueError(f"{len(rps)} reference points for num_rps={cfg.num_rps}")
        ids = [rp.id for rp in rps]
        if ids != list(range(1, cfg.num_rps + 1)):
            raise ValueError("reference point ids must be contiguous 1..N in order")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "rps", rps)

    @property
    def positions(self) -> np.ndarray:
        return np.array([(rp.x, rp.y) for rp in self.rps], dtype=float)


@dataclass(frozen=True)
class AveragedRadioMap:
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "psi", _frozen(self.psi))


@dataclass(frozen=True)
class ReliabilityProfile:
    counts: np.ndarray
    indicators: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "counts", _frozen(self.counts, int))
        object.__setattr__(self, "indicators", _frozen(self.indicators, bool))

    def reliable_set(self, o: int, j: int) -> frozenset:
        """AP indices reliable at RP ``j`` under orientation index ``o``."""
        return frozenset(np.flatnonzero(self.indicators[o, :, j]).tolist())


@dataclass(frozen=True)
class StabilityProfile:
    per_ap: np.ndarray
    per_rp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "per_ap", _frozen(self.per_ap))
        object.__setattr__(self, "per_rp", _frozen(self.per_rp))


@dataclass(frozen=True)
class OnlineMeasurement:
    rss: np.ndarray
    reliable: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "rss", _frozen(self.rss))
        if self.reliable is not None:
            rel = _frozen(self.reliable, bool)
            if rel.shape != self.rss.shape:
                raise ValueError("reliability vector length differs from rss length")
            object.__setattr__(self, "reliable", rel)

    @classmethod
    def from_rss(cls, rss, gamma: float = -70.0) -> "OnlineMeasurement":
        rss = np.asarray(rss, dtype=float)
        return cls(rss=rss, reliable=online_reliability(rss, gamma))


def time_average(raw: RawRadioMap) -> AveragedRadioMap:
    if raw.samples.shape[-1] == 0:
        raise ValueError("cannot average zero samples")
    return AveragedRadioMap(psi=raw.samples.mean(axis=-1))


def min_reliable_count(fraction: float, m: int) -> int:
    # |T| >= fraction*M with |T| integer; the epsilon guards 0.9*M landing just above an integer
    return int(math.ceil(fraction * m - 1e-9))


def reliability_indicators(raw: RawRadioMap, gamma: float | None = None,
                           fraction: float | None = None) -> ReliabilityProfile:
    cfg = raw.config
    gamma = cfg.gamma if gamma is None else gamma
    fraction = cfg.reliability_fraction if fraction is None else fraction
    counts = np.count_nonzero(raw.samples >= gamma, axis=-1)
    return ReliabilityProfile(counts=counts,
                              indicators=counts >= min_reliable_count(fraction, cfg.samples_per_rp))


def stability(raw: RawRadioMap, rel: ReliabilityProfile) -> StabilityProfile:
    """Per-AP sample variance and its mean over each RP's reliable APs.

    RPs without any reliable AP get ``+inf`` so they never win a head election.
    """
    m = raw.samples.shape[-1]
    if m < 2:
        raise ValueError("stability needs at least two samples per RP")
    per_ap = raw.samples.var(axis=-1, ddof=1)
    mask = rel.indicators
    n_rel = mask.sum(axis=1)
    total = np.where(mask, per_ap, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_rp = np.where(n_rel > 0, total / np.maximum(n_rel, 1), np.inf)
    return StabilityProfile(per_ap=per_ap, per_rp=per_rp)


def online_reliability(y, gamma: float = -70.0, num_aps: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("online measurement must be a vector")
    if num_aps is not None:
        check_length(y, num_aps)
    return y >= gamma


def check_length(y, num_aps: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (num_aps,):
        raise ValueError(f"measurement has {y.size} entries, expected {num_aps}")
    return y
