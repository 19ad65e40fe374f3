"""Utility-privacy sweeps, convex-hull AUC and curve files.

A curve is a set of (leakage, utility) points: adversary accuracy on the
private label against utility-provider accuracy on the non-private label.

Convex-hull AUC
---------------
The point set is closed down to the floor between the smallest and largest
leakage, i.e. ``{(x_min, 0)} + points + {(x_max, 0)}``; the upper convex hull
of that set is integrated with the trapezoid rule over ``[x_min, x_max]``.
Under the ``half`` convention both coordinates are measured from 0.5
(values below 0.5 are clipped to it) and the area is divided by the
0.5 x 0.5 box. When all points share one leakage value the area of the
rectangle spanned by the origin and the best point is returned.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import DataError
from .evaluate import (ProbeConfig, eval_accuracy, for_role, strong_adversary_protocol,
                       train_probe, utility_protocol, weak_adversary_protocol)
from .obfuscator import ObfuscatorModel
from .privatize import PrivacyParams, obfuscate_dataset, record_normals

log = logging.getLogger(__name__)

DEFAULT_K_GRID = (0, 5, 10, 15, 20, 40, 60, 100, 200)
DEFAULT_LAMBDA = -3000.0
DEFAULT_VARIANCE_GRID = (0, 0.01, 0.05, 0.2, 1, 5, 40)
CURVE_COLUMNS = ("k", "lambda", "leakage", "utility", "adversary_type", "eval_mode", "seed",
                 "noise_seed", "kind")


@dataclass(frozen=True)
class TradeoffPoint:
    leakage: float
    utility: float
    k: float
    lam: float | None  # None: label clamp disabled
    seed: int = 0
    noise_seed: int = 0

    def __post_init__(self):
        for v in (self.leakage, self.utility):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"coordinates must lie in [0, 1], got {v}")

    @property
    def xy(self) -> tuple[float, float]:
        return self.leakage, self.utility


@dataclass
class TradeoffCurve:
    points: list[TradeoffPoint]
    adversary_type: str = "weak"
    eval_mode: str = "original"
    kind: str = "proposed"  # or "gaussian_input"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.points:
            raise ValueError("a curve needs at least one point")

    def xy(self) -> np.ndarray:
        return np.array([p.xy for p in self.points], dtype=float)

    def point(self, k: float, lam: float | None) -> TradeoffPoint:
        for p in self.points:
            if p.k == k and p.lam == lam:
                return p
        raise KeyError((k, lam))


@dataclass
class Splits:
    """``train``: obfuscator/utility training records; ``aux``: the adversaries'
    look-alike data; ``test``: scored records."""
    train: Dataset
    aux: Dataset
    test: Dataset


# --------------------------------------------------------------------------- AUC

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def upper_hull(points) -> np.ndarray:
    """Upper convex hull from left to right (monotone chain)."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points, dtype=float)})
    hull: list[tuple[float, float]] = []
    for p in pts:
        # keep only strict left turns when walking right along the top
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= 0:
            hull.pop()
        hull.append(p)
    return np.array(hull)


def _shift(xy: np.ndarray, convention: str) -> tuple[np.ndarray, float]:
    if convention == "zero":
        return xy, 1.0
    if convention == "half":
        return np.clip(xy - 0.5, 0.0, None), 0.25
    raise ValueError(f"unknown origin convention {convention!r}")


def hull_boundary(curve_or_points, convention: str = "zero") -> np.ndarray:
    """Top boundary of the closed hull, in the convention's shifted coordinates."""
    xy = curve_or_points.xy() if isinstance(curve_or_points, TradeoffCurve) else np.asarray(curve_or_points, float)
    xy, _ = _shift(np.atleast_2d(xy), convention)
    lo, hi = xy[:, 0].min(), xy[:, 0].max()
    top = upper_hull(np.vstack([xy, [[lo, 0.0], [hi, 0.0]]]))
    if top[-1, 1] != 0.0:  # end on the floor so the boundary closes
        top = np.vstack([top, [[hi, 0.0]]])
    return top


def convex_hull_auc(curve_or_points, convention: str = "zero") -> float:
    xy = curve_or_points.xy() if isinstance(curve_or_points, TradeoffCurve) else np.asarray(curve_or_points, float)
    xy = np.atleast_2d(xy)
    if xy.size == 0:
        raise ValueError("cannot compute the AUC of an empty curve")
    shifted, box = _shift(xy, convention)
    lo, hi = shifted[:, 0].min(), shifted[:, 0].max()
    if hi == lo:
        best = shifted[np.argmax(shifted[:, 1])]
        return float(best[0] * best[1] / box)
    top = hull_boundary(xy, convention)
    area = float(np.sum(np.diff(top[:, 0]) * (top[1:, 1] + top[:-1, 1]) / 2.0))
    return area / box


# --------------------------------------------------------------------------- sweeps

def _settings(k_grid, lam_grid, include_reference, noise_seed) -> list[PrivacyParams]:
    cells = []
    if include_reference:
        cells.append(PrivacyParams(k=0.0, g_enabled=False, noise_seed=noise_seed))
    for lam in lam_grid:
        for k in k_grid:
            cells.append(PrivacyParams(k=float(k), lam=float(lam), noise_seed=noise_seed))
    return cells


def _cell_key(p: PrivacyParams) -> str:
    return p.label()


def _proposed_cell(model, splits, privacy, adversary_type, eval_mode, config, adversary):
    obf_test = obfuscate_dataset(model, splits.test, privacy)
    if adversary_type == "weak":
        leak = weak_adversary_protocol(splits.aux, obf_test, config, privacy, adversary=adversary)
    else:
        leak = strong_adversary_protocol(model, privacy, splits.aux, obf_test, config)
    util = utility_protocol(model, privacy, splits.train, splits.test, config, eval_mode,
                            obf_test=obf_test)
    return leak.accuracy, util.accuracy


def gaussian_noise(dataset: Dataset, variance: float, noise_seed: int) -> Dataset:
    """Add N(0, variance) to every feature (per-record seeded streams)."""
    if variance == 0:
        return dataset.with_features(dataset.features.copy())
    z = record_normals(noise_seed, np.arange(len(dataset)), dataset.width)
    return dataset.with_features(dataset.features + np.sqrt(variance) * z)


def _gaussian_cell(splits, variance, noise_seed, adversary_type, eval_mode, config, adversary):
    seeds = {role: noise_seed + 1_000_003 * i for i, role in enumerate(("test", "aux", "train"))}
    noisy_test = gaussian_noise(splits.test, variance, seeds["test"])
    if adversary_type == "weak":
        adv = adversary if adversary is not None else train_probe(config, splits.aux, "private")
    else:
        adv = train_probe(config, gaussian_noise(splits.aux, variance, seeds["aux"]), "private")
    leakage = eval_accuracy(adv, config, noisy_test, "private")
    provider = train_probe(config, gaussian_noise(splits.train, variance, seeds["train"]), "nonprivate")
    scored = splits.test if eval_mode == "original" else noisy_test
    return leakage, eval_accuracy(provider, config, scored, "nonprivate")


class _Manifest:
    """Append-only JSON-lines record of finished sweep cells."""

    def __init__(self, path, header: dict):
        self.path = Path(path) if path is not None else None
        self.done: dict[str, dict] = {}
        if self.path is None:
            return
        if self.path.exists() and self.path.stat().st_size:
            lines = self.path.read_text(encoding="utf-8").splitlines()
            if json.loads(lines[0]) != header:
                raise DataError(f"{self.path} belongs to a different sweep; remove it to restart")
            for i, line in enumerate(lines[1:], start=2):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    if i == len(lines):  # cut off mid-write; that cell reruns
                        log.warning("%s: ignoring incomplete last line", self.path)
                        self._rewrite(lines[:-1])
                        break
                    raise DataError(f"{self.path}:{i}: corrupt manifest line") from None
                self.done[rec["key"]] = rec
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(header, sort_keys=True) + "\n", encoding="utf-8")

    def _rewrite(self, lines):
        self.path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    def add(self, key: str, rec: dict):
        self.done[key] = rec
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, **rec}, sort_keys=True) + "\n")


def _run_cells(keys, fn, args_list, manifest: _Manifest, jobs: int) -> dict[str, tuple[float, float]]:
    todo = [(key, args) for key, args in zip(keys, args_list) if key not in manifest.done]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {key: pool.submit(fn, *args) for key, args in todo}
            for key, _ in todo:  # collect in grid order so the manifest is stable
                leak, util = futures[key].result()
                manifest.add(key, {"leakage": leak, "utility": util})
    else:
        for key, args in todo:
            leak, util = fn(*args)
            log.info("cell %s: leakage %.4f utility %.4f", key, leak, util)
            manifest.add(key, {"leakage": leak, "utility": util})
    return {k: (manifest.done[k]["leakage"], manifest.done[k]["utility"]) for k in keys}


def _check_types(adversary_type, eval_mode):
    if adversary_type not in ("weak", "strong"):
        raise ValueError(f"adversary_type must be 'weak' or 'strong', got {adversary_type!r}")
    if eval_mode not in ("original", "obfuscated"):
        raise ValueError(f"eval_mode must be 'original' or 'obfuscated', got {eval_mode!r}")


def sweep(model: ObfuscatorModel, splits: Splits, k_grid: Sequence[float] = DEFAULT_K_GRID,
          lam_grid: Sequence[float] = (DEFAULT_LAMBDA,), adversary_type: str = "weak",
          eval_mode: str = "original", config: ProbeConfig | None = None, noise_seed: int = 0,
          include_reference: bool = True, manifest: str | Path | None = None,
          jobs: int = 1, adversary=None) -> TradeoffCurve:
    """One tradeoff point per (k, lambda) cell, plus the no-noise, no-clamp corner.

    Every cell trains fresh probes from ``config.seed``. The weak adversary does
    not depend on the cell, so it is trained once (or taken from ``adversary``).
    Finished cells are appended to ``manifest`` so an interrupted sweep resumes
    where it stopped.
    """
    _check_types(adversary_type, eval_mode)
    config = config or ProbeConfig.reference(splits.test.width)
    cells = _settings(k_grid, lam_grid, include_reference, noise_seed)
    header = {"kind": "proposed", "adversary_type": adversary_type, "eval_mode": eval_mode,
              "k_grid": [float(k) for k in k_grid], "lam_grid": [float(v) for v in lam_grid],
              "reference": include_reference, "noise_seed": noise_seed, "probe_seed": config.seed}
    book = _Manifest(manifest, header)
    keys = [_cell_key(p) for p in cells]
    if adversary_type == "weak" and adversary is None and any(k not in book.done for k in keys):
        adversary = train_probe(config, splits.aux, "private")
    args = [(model, splits, p, adversary_type, eval_mode, config, adversary) for p in cells]
    results = _run_cells(keys, _proposed_cell, args, book, jobs)
    points = [TradeoffPoint(*results[key], k=p.k, lam=p.lam if p.g_enabled else None,
                            seed=config.seed, noise_seed=noise_seed)
              for key, p in zip(keys, cells)]
    return TradeoffCurve(points, adversary_type, eval_mode, "proposed", header)


def gaussian_input_baseline(splits: Splits, variance_grid: Sequence[float] = DEFAULT_VARIANCE_GRID,
                            config: ProbeConfig | None = None, adversary_type: str = "weak",
                            eval_mode: str = "original", noise_seed: int = 0,
                            manifest: str | Path | None = None, jobs: int = 1,
                            adversary=None) -> TradeoffCurve:
    """Comparison curve: Gaussian noise added straight to the input features.

    Points store the noise variance in ``k`` and have no clamp (``lam=None``).
    """
    _check_types(adversary_type, eval_mode)
    config = config or ProbeConfig.reference(splits.test.width)
    header = {"kind": "gaussian_input", "adversary_type": adversary_type, "eval_mode": eval_mode,
              "variance_grid": [float(v) for v in variance_grid], "noise_seed": noise_seed,
              "probe_seed": config.seed}
    book = _Manifest(manifest, header)
    keys = [f"var={float(v):g}" for v in variance_grid]
    if adversary_type == "weak" and adversary is None and any(k not in book.done for k in keys):
        adversary = train_probe(config, splits.aux, "private")
    args = [(splits, float(v), noise_seed, adversary_type, eval_mode, config, adversary)
            for v in variance_grid]
    results = _run_cells(keys, _gaussian_cell, args, book, jobs)
    points = [TradeoffPoint(*results[key], k=float(v), lam=None, seed=config.seed,
                            noise_seed=noise_seed)
              for key, v in zip(keys, variance_grid)]
    return TradeoffCurve(points, adversary_type, eval_mode, "gaussian_input", header)


# --------------------------------------------------------------------------- files

def _num(v) -> str:
    return repr(float(v))


def curve_to_csv(curve: TradeoffCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for p in curve.points:
        writer.writerow([_num(p.k), "" if p.lam is None else _num(p.lam), _num(p.leakage),
                         _num(p.utility), curve.adversary_type, curve.eval_mode, p.seed,
                         p.noise_seed, curve.kind])
    return buf.getvalue()


def emit_curve(curve: TradeoffCurve, path: str | Path):
    Path(path).write_text(curve_to_csv(curve), encoding="utf-8")


def read_curve(path: str | Path) -> TradeoffCurve:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no curve points")
    points = [TradeoffPoint(float(r["leakage"]), float(r["utility"]), float(r["k"]),
                            None if r["lambda"] == "" else float(r["lambda"]),
                            int(r["seed"]), int(r["noise_seed"]))
              for r in rows]
    first = rows[0]
    return TradeoffCurve(points, first["adversary_type"], first["eval_mode"], first["kind"])


def emit_hull(curve: TradeoffCurve, path: str | Path, convention: str = "zero"):
    """Write the hull's top boundary as whitespace-separated ``x y`` lines."""
    top = hull_boundary(curve, convention)
    Path(path).write_text("".join(f"{_num(x)} {_num(y)}\n" for x, y in top), encoding="utf-8")


def curve_summary(curve: TradeoffCurve) -> dict:
    return {"kind": curve.kind, "adversary_type": curve.adversary_type,
            "eval_mode": curve.eval_mode, "points": [asdict(p) for p in curve.points],
            "auc_zero": convex_hull_auc(curve, "zero"), "auc_half": convex_hull_auc(curve, "half")}
