"""Synthetic WLAN survey generator (log-distance path loss with shadowing).

Random streams
--------------
Every random quantity comes from its own PCG64 stream keyed off the
environment seed with ``numpy.random.SeedSequence(seed, spawn_key=...)``:

* ``(0, ap, rp)``          -- frozen shadowing term, one standard normal
* ``(1, ap, rp, o)``       -- the M temporal-noise draws of one survey cell,
  in sample order
* ``(2, fix_seed)``        -- one online fix: orientation draw (when not
  given) followed by L noise draws in AP order
* ``(3, set_seed)``        -- positions of a generated test set

so any cell can be regenerated on its own and results do not depend on
generation order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .survey import MISSING_DBM, ORIENTATIONS, OnlineMeasurement, RawRadioMap, ReferencePoint, \
    SurveyConfig


def default_ap_positions(num_aps: int = 20, width: float = 300.0, height: float = 35.0) -> tuple:
    """APs spread evenly along the long axis, alternating between the two walls."""
    xs = (np.arange(num_aps) + 0.5) * width / num_aps
    ys = np.where(np.arange(num_aps) % 2 == 0, 0.2 * height, 0.8 * height)
    return tuple((float(x), float(y)) for x, y in zip(xs, ys))


@dataclass(frozen=True)
class EnvironmentSpec:
    width: float = 300.0
    height: float = 35.0
    grid_spacing: float = 3.0
    grid_shape: tuple = (96, 2)
    ap_positions: tuple = field(default_factory=default_ap_positions)
    tx_power: float = -30.0
    reference_distance: float = 3.0
    path_loss_exponent: float = 3.0
    shadowing_sigma: float = 4.0
    temporal_sigma: float = 2.0
    orientation_bias: tuple = (0.0, -2.0, -4.0, -2.0)
    detection_floor: float = -95.0
    missing_sentinel: float = MISSING_DBM
    samples_per_rp: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.grid_spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if min(self.shadowing_sigma, self.temporal_sigma) < 0:
            raise ValueError("noise levels must be non-negative")
        if self.reference_distance <= 0:
            raise ValueError("reference distance must be positive")
        if len(self.ap_positions) == 0:
            raise ValueError("at least one AP is required")
        if len(self.orientation_bias) != len(ORIENTATIONS):
            raise ValueError("one orientation bias per orientation is required")
        object.__setattr__(self, "ap_positions",
                           tuple((float(x), float(y)) for x, y in self.ap_positions))
        object.__setattr__(self, "grid_shape", tuple(int(v) for v in self.grid_shape))
        object.__setattr__(self, "orientation_bias", tuple(float(v) for v in self.orientation_bias))
        margin = max(self.width, self.height)
        for x, y in self.ap_positions:
            if not (-margin <= x <= self.width + margin and -margin <= y <= self.height + margin):
                raise ValueError(f"AP at ({x}, {y}) is far outside the area")

    @property
    def num_aps(self) -> int:
        return len(self.ap_positions)

    @property
    def num_rps(self) -> int:
        return self.grid_shape[0] * self.grid_shape[1]

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height, "grid_spacing": self.grid_spacing,
            "grid_shape": list(self.grid_shape),
            "ap_positions": [list(p) for p in self.ap_positions],
            "tx_power": self.tx_power, "reference_distance": self.reference_distance,
            "path_loss_exponent": self.path_loss_exponent,
            "shadowing_sigma": self.shadowing_sigma, "temporal_sigma": self.temporal_sigma,
            "orientation_bias": list(self.orientation_bias),
            "detection_floor": self.detection_floor, "missing_sentinel": self.missing_sentinel,
            "samples_per_rp": self.samples_per_rp, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentSpec":
        d = dict(d)
        d["ap_positions"] = tuple(tuple(p) for p in d["ap_positions"])
        d["grid_shape"] = tuple(d["grid_shape"])
        d["orientation_bias"] = tuple(d["orientation_bias"])
        return cls(**d)


@dataclass(frozen=True)
class OutlierSpec:
    ap_indices: tuple = ()
    mode: str = "bias"
    bias_magnitude: float = 30.0

    def __post_init__(self):
        if self.mode not in ("bias", "dropout"):
            raise ValueError(f"unknown outlier mode {self.mode!r}")
        object.__setattr__(self, "ap_indices", tuple(sorted(int(i) for i in self.ap_indices)))


@dataclass(frozen=True)
class FixTruth:
    position: tuple
    orientation: int
    model_rss: np.ndarray
    outlier_aps: tuple


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def grid_axes(env: EnvironmentSpec):
    """x and y coordinates of the RP grid, centred in the area."""
    nx, ny = env.grid_shape
    s = env.grid_spacing
    xs = (env.width - (nx - 1) * s) / 2.0 + s * np.arange(nx)
    ys = (env.height - (ny - 1) * s) / 2.0 + s * np.arange(ny)
    return xs, ys


def rp_positions(env: EnvironmentSpec) -> np.ndarray:
    """RP coordinates, RP index ``j = ix * ny + iy`` (walks along the long axis)."""
    xs, ys = grid_axes(env)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def path_loss_rss(env: EnvironmentSpec, positions) -> np.ndarray:
    """Deterministic log-distance RSS, L x P for P query positions."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    aps = np.asarray(env.ap_positions, dtype=float)
    d = np.linalg.norm(aps[:, None, :] - pos[None, :, :], axis=-1)
    d0 = env.reference_distance
    return env.tx_power - 10.0 * env.path_loss_exponent * np.log10(np.maximum(d, d0) / d0)


def shadowing_grid(env: EnvironmentSpec) -> np.ndarray:
    """Frozen shadowing per (AP, RP), shape L x N."""
    out = np.zeros((env.num_aps, env.num_rps))
    if env.shadowing_sigma == 0:
        return out
    for i in range(env.num_aps):
        for j in range(env.num_rps):
            out[i, j] = env.shadowing_sigma * _stream(env.seed, 0, i, j).standard_normal()
    return out


def shadowing_at(env: EnvironmentSpec, positions, grid=None) -> np.ndarray:
    """Shadowing at arbitrary positions by bilinear interpolation of the grid draws.

    Exact at RP positions; positions outside the grid use the nearest edge.
    """
    grid = shadowing_grid(env) if grid is None else grid
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    xs, ys = grid_axes(env)
    nx, ny = env.grid_shape
    g = grid.reshape(env.num_aps, nx, ny)

    def locate(axis, v):
        if axis.size == 1:
            return np.zeros(v.shape, int), np.zeros(v.shape, int), np.zeros(v.shape)
        t = np.clip((v - axis[0]) / (axis[1] - axis[0]), 0.0, axis.size - 1)
        lo = np.minimum(np.floor(t).astype(int), axis.size - 2)
        return lo, lo + 1, t - lo

    x0, x1, fx = locate(xs, pos[:, 0])
    y0, y1, fy = locate(ys, pos[:, 1])
    return ((1 - fx) * (1 - fy) * g[:, x0, y0] + fx * (1 - fy) * g[:, x1, y0]
            + (1 - fx) * fy * g[:, x0, y1] + fx * fy * g[:, x1, y1])


def survey_config(env: EnvironmentSpec, **overrides) -> SurveyConfig:
    kw = dict(num_aps=env.num_aps, num_rps=env.num_rps, samples_per_rp=env.samples_per_rp,
              missing_sentinel=env.missing_sentinel)
    kw.update(overrides)
    return SurveyConfig(**kw)


def mean_fingerprints(env: EnvironmentSpec, grid=None) -> np.ndarray:
    """Noise-free survey means, shape (orientations, L, N)."""
    pos = rp_positions(env)
    grid = shadowing_grid(env) if grid is None else grid
    base = path_loss_rss(env, pos) + grid
    return np.stack([base + b for b in env.orientation_bias])


def generate_survey(env: EnvironmentSpec, **config_overrides):
    """Simulated offline survey; returns ``(RawRadioMap, rp_positions)``."""
    means = mean_fingerprints(env)
    n_o, n_ap, n_rp = means.shape
    m = env.samples_per_rp
    samples = np.repeat(means[..., None], m, axis=-1)
    if env.temporal_sigma > 0:
        for o in range(n_o):
            for i in range(n_ap):
                for j in range(n_rp):
                    samples[o, i, j] += env.temporal_sigma * _stream(env.seed, 1, i, j, o) \
                        .standard_normal(m)
    samples[samples < env.detection_floor] = env.missing_sentinel
    pos = rp_positions(env)
    rps = tuple(ReferencePoint(id=j + 1, x=float(x), y=float(y)) for j, (x, y) in enumerate(pos))
    raw = RawRadioMap(samples=samples, rps=rps, config=survey_config(env, **config_overrides))
    return raw, pos


def generate_online(env: EnvironmentSpec, position, outliers: OutlierSpec | None = None,
                    seed: int = 0, orientation: int | None = None, gamma: float = -70.0,
                    shadow_grid=None):
    """One online RSS vector at ``position``; returns ``(OnlineMeasurement, FixTruth)``."""
    outliers = outliers or OutlierSpec()
    rng = _stream(env.seed, 2, seed)
    if orientation is None:
        orientation = int(rng.integers(len(ORIENTATIONS)))
    pos = np.asarray(position, dtype=float).reshape(1, 2)
    model = (path_loss_rss(env, pos) + shadowing_at(env, pos, shadow_grid))[:, 0] \
        + env.orientation_bias[orientation]
    y = model + env.temporal_sigma * rng.standard_normal(env.num_aps)
    idx = list(outliers.ap_indices)
    if any(i < 0 or i >= env.num_aps for i in idx):
        raise ValueError("outlier AP index out of range")
    if outliers.mode == "bias":
        y[idx] += outliers.bias_magnitude
    y[y < env.detection_floor] = env.missing_sentinel
    if outliers.mode == "dropout":
        y[idx] = env.missing_sentinel
    truth = FixTruth(position=(float(pos[0, 0]), float(pos[0, 1])), orientation=orientation,
                     model_rss=model, outlier_aps=tuple(idx))
    return OnlineMeasurement.from_rss(y, gamma), truth


def random_positions(env: EnvironmentSpec, count: int, seed: int = 0,
                     on_grid_fraction: float = 0.5) -> np.ndarray:
    """Test positions inside the RP footprint, a fraction of them exactly on RPs."""
    rng = _stream(env.seed, 3, seed)
    rps = rp_positions(env)
    lo, hi = rps.min(axis=0), rps.max(axis=0)
    out = np.empty((count, 2))
    for t in range(count):
        if rng.random() < on_grid_fraction:
            out[t] = rps[rng.integers(len(rps))]
        else:
            out[t] = lo + rng.random(2) * (hi - lo)
    return out


def generate_test_set(env: EnvironmentSpec, count: int, seed: int = 0,
                      outliers: OutlierSpec | None = None, on_grid_fraction: float = 0.5,
                      gamma: float = -70.0) -> list:
    """``count`` online fixes as ``(OnlineMeasurement, FixTruth)`` pairs."""
    grid = shadowing_grid(env)
    positions = random_positions(env, count, seed, on_grid_fraction)
    return [generate_online(env, p, outliers, seed=seed * 100_003 + t, gamma=gamma,
                            shadow_grid=grid)
            for t, p in enumerate(positions)]


def with_seed(env: EnvironmentSpec, seed: int) -> EnvironmentSpec:
    return replace(env, seed=seed)
