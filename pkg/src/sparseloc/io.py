"""File formats: radio-map JSON, measurement CSV and trained-model JSON."""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .localize import TrainedModel, model_from_dict, model_to_dict
from .simulate import EnvironmentSpec
from .survey import RawRadioMap, ReferencePoint, SurveyConfig

RSS_DECIMALS = 3


class RadioMapFormatError(ValueError):
    """A file does not follow the expected layout; the message names the field or line."""


def _encode(v: float, sentinel: float):
    return None if v == sentinel else round(float(v), RSS_DECIMALS)


def radio_map_to_dict(raw: RawRadioMap, env: EnvironmentSpec | None = None) -> dict:
    """JSON-ready radio map; samples are stored per orientation as N x L x M.

    Readings equal to the missing sentinel are written as ``null``.
    """
    s = raw.config.missing_sentinel
    per_o = np.transpose(raw.samples, (0, 2, 1, 3))
    out = {
        "config": raw.config.to_dict(),
        "rps": [{"id": rp.id, "x": rp.x, "y": rp.y} for rp in raw.rps],
        "samples": [[[[_encode(v, s) for v in cell] for cell in rp] for rp in o] for o in per_o],
    }
    if env is not None:
        out["environment"] = env.to_dict()
    return out


def radio_map_from_dict(d: dict):
    """Inverse of :func:`radio_map_to_dict`; returns ``(RawRadioMap, EnvironmentSpec | None)``."""
    for key in ("config", "rps", "samples"):
        if key not in d:
            raise RadioMapFormatError(f"missing top-level field {key!r}")
    try:
        cfg = SurveyConfig.from_dict(d["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RadioMapFormatError(f"config: {exc}") from exc
    try:
        rps = tuple(ReferencePoint(id=int(r["id"]), x=float(r["x"]), y=float(r["y"]))
                    for r in d["rps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RadioMapFormatError(f"rps: {exc}") from exc
    s = cfg.missing_sentinel
    try:
        arr = np.array([[[[s if v is None else v for v in cell] for cell in rp] for rp in o]
                        for o in d["samples"]], dtype=float)
    except (TypeError, ValueError) as exc:
        raise RadioMapFormatError(f"samples: ragged or non-numeric array ({exc})") from exc
    expected = (len(cfg.orientations), cfg.num_rps, cfg.num_aps, cfg.samples_per_rp)
    if arr.shape != expected:
        raise RadioMapFormatError(f"samples: shape {arr.shape}, expected {expected} "
                                  "(orientation, RP, AP, sample)")
    if not np.isfinite(arr).all():
        raise RadioMapFormatError("samples: non-finite reading")
    try:
        raw = RawRadioMap(samples=np.transpose(arr, (0, 2, 1, 3)), rps=rps, config=cfg)
    except ValueError as exc:
        raise RadioMapFormatError(str(exc)) from exc
    env = None
    if d.get("environment") is not None:
        try:
            env = EnvironmentSpec.from_dict(d["environment"])
        except (KeyError, TypeError, ValueError) as exc:
            raise RadioMapFormatError(f"environment: {exc}") from exc
    return raw, env


def _load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise RadioMapFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, separators=(",", ":"), allow_nan=False)
    if path is not None:
        with open(path, "w") as f:
            f.write(text + "\n")
    return text


def save_radio_map(path, raw: RawRadioMap, env: EnvironmentSpec | None = None):
    dump_json(radio_map_to_dict(raw, env), path)


def load_radio_map(path):
    return radio_map_from_dict(_load_json(path))


def save_model(path, model: TrainedModel):
    dump_json(model_to_dict(model), path)


def load_model(path) -> TrainedModel:
    d = _load_json(path)
    try:
        return model_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise RadioMapFormatError(f"{path}: not a trained model ({exc})") from exc


def write_measurements(rows, truths=None, num_aps: int | None = None) -> str:
    """Measurement CSV text: ``ap1..apL`` columns, empty cell for a missing reading.

    With ``truths`` two trailing ``x,y`` columns carry the true positions.
    Pass RSS vectors with the missing sentinel already applied.
    """
    rows = [np.asarray(getattr(r, "rss", r), dtype=float) for r in rows]
    num_aps = num_aps or (rows[0].size if rows else 0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"ap{i + 1}" for i in range(num_aps)] + (["x", "y"] if truths is not None else []))
    for t, r in enumerate(rows):
        line = ["" if v <= -100.0 else f"{v:.{RSS_DECIMALS}f}" for v in r]
        if truths is not None:
            line += [f"{truths[t][0]:.6f}", f"{truths[t][1]:.6f}"]
        w.writerow(line)
    return buf.getvalue()


def read_measurements(text: str, num_aps: int, missing: float = -100.0):
    """Parse measurement CSV text into ``(rss_rows, truths_or_None)``.

    A header row is optional.  Without one, each row must hold exactly
    ``num_aps`` cells, or ``num_aps + 2`` when true ``x, y`` follow.
    """
    reader = list(csv.reader(io.StringIO(text)))
    reader = [r for r in reader if any(c.strip() for c in r)]
    if not reader:
        raise RadioMapFormatError("measurement file is empty")
    header = None
    first = reader[0]
    if first and not _is_number(first[0]) and first[0].strip() != "":
        header, reader = [c.strip().lower() for c in first], reader[1:]
    has_truth = header is not None and header[-2:] == ["x", "y"]
    width = num_aps + (2 if has_truth else 0)
    rows, truths = [], []
    for lineno, r in enumerate(reader, start=2 if header else 1):
        if header is None and len(r) == num_aps + 2 and not truths and not rows:
            has_truth, width = True, num_aps + 2
        if len(r) != width:
            raise RadioMapFormatError(f"line {lineno}: {len(r)} fields, expected {width}")
        vals = []
        for col, c in enumerate(r):
            c = c.strip()
            if c == "" and col < num_aps:
                vals.append(missing)
                continue
            if not _is_number(c):
                raise RadioMapFormatError(f"line {lineno}, field {col + 1}: {c!r} is not a number")
            vals.append(float(c))
        rows.append(np.array(vals[:num_aps]))
        if has_truth:
            truths.append((vals[num_aps], vals[num_aps + 1]))
    return rows, (truths if has_truth else None)


def _is_number(s: str) -> bool:
    try:
        return math.isfinite(float(s))
    except ValueError:
        return False
