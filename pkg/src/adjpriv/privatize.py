"""Post-training obfuscation: label clamp ``g`` and scaled Gaussian noise ``f``.

``g`` overwrites the classifier head with a hard log-distribution: 0 (= log 1)
at the record's true non-private class and ``lam`` (a large negative stand-in
for log 0) elsewhere. ``f`` adds i.i.d. Gaussian noise to the rest head with
per-record variance ``k * nu``, where ``nu`` is the mean of that record's rest
outputs.

Noise for record ``i`` is drawn from a generator seeded by
``(noise_seed, i)``, so a record's obfuscation does not depend on how the
dataset is chunked or ordered around it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .obfuscator import ObfuscatorModel

NU_FLOOR = 1e-8


@dataclass(frozen=True)
class PrivacyParams:
    k: float = 0.0        # noise variance multiplier: var = k * nu
    lam: float = -3000.0  # log(0) stand-in for g
    g_enabled: bool = True
    f_enabled: bool = True
    noise_seed: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"noise multiplier must be >= 0, got {self.k}")
        if self.lam > 0:
            raise ValueError(f"lambda must be <= 0, got {self.lam}")

    def label(self) -> str:
        g = f"lam={self.lam:g}" if self.g_enabled else "g=off"
        f = f"k={self.k:g}" if self.f_enabled else "f=off"
        return f"{f},{g}"


def nu(w_p) -> np.ndarray | float:
    """Mean of the rest-head outputs (per row for a batch), floored at 1e-8."""
    w_p = np.asarray(w_p, dtype=float)
    if w_p.shape[-1] == 0:
        raise ValueError("rest output is empty")
    m = np.maximum(w_p.mean(axis=-1), NU_FLOOR)
    return float(m) if np.ndim(m) == 0 else m


def record_normals(noise_seed: int, indices, dim: int) -> np.ndarray:
    """Standard normals of shape ``(len(indices), dim)``, one stream per record index."""
    indices = np.atleast_1d(indices)
    out = np.empty((len(indices), dim))
    for row, i in enumerate(indices):
        out[row] = np.random.default_rng([noise_seed, int(i)]).standard_normal(dim)
    return out


def apply_f(w_p, params: PrivacyParams, rng: np.random.Generator | None = None,
            indices=None) -> np.ndarray:
    """Add N(0, k * nu) noise to the rest head.

    Noise comes from ``rng`` when given, otherwise from the per-record streams
    selected by ``indices`` (default ``0..n-1``).
    """
    w_p = np.asarray(w_p, dtype=float)
    if not params.f_enabled or params.k == 0:
        return w_p.copy()
    batch = np.atleast_2d(w_p)
    if rng is not None:
        z = rng.standard_normal(batch.shape)
    else:
        idx = np.arange(len(batch)) if indices is None else indices
        z = record_normals(params.noise_seed, idx, batch.shape[1])
    std = np.sqrt(params.k * np.atleast_1d(nu(batch)))
    out = batch + z * std[:, None]
    return out[0] if w_p.ndim == 1 else out


def apply_g(w_np, y_np, params: PrivacyParams) -> np.ndarray:
    """Replace the classifier head with 0 at the true class and ``lam`` elsewhere."""
    w_np = np.asarray(w_np, dtype=float)
    if not params.g_enabled:
        return w_np.copy()
    batch = np.atleast_2d(w_np)
    y = np.atleast_1d(np.asarray(y_np))
    if len(y) != len(batch):
        raise ValueError("one label per record required")
    if np.any(y < 0) or np.any(y >= batch.shape[1]):
        raise ValueError(f"class index out of range for {batch.shape[1]} classes")
    out = np.full(batch.shape, float(params.lam))
    out[np.arange(len(batch)), y.astype(np.int64)] = 0.0
    return out[0] if w_np.ndim == 1 else out


def obfuscate_batch(model: ObfuscatorModel, x, y_np, params: PrivacyParams,
                    indices=None, rng: np.random.Generator | None = None) -> np.ndarray:
    v = model.encode(x)
    w_np = apply_g(model.classify(v), y_np, params)
    w_p = apply_f(model.rest(v), params, rng=rng, indices=indices)
    return model.decode(w_np, w_p)


def obfuscate_record(model: ObfuscatorModel, x, y_np: int, params: PrivacyParams,
                     rng: np.random.Generator | None = None, index: int = 0) -> np.ndarray:
    """Obfuscate one record. Without ``rng`` the noise stream is ``(noise_seed, index)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("obfuscate_record takes a single record")
    return obfuscate_batch(model, x[None, :], [y_np], params, indices=[index], rng=rng)[0]


def obfuscate_dataset(model: ObfuscatorModel, dataset: Dataset, params: PrivacyParams,
                      chunk: int = 4096) -> Dataset:
    """Obfuscate every record; labels are carried through unchanged."""
    parts = []
    for start in range(0, len(dataset), chunk):
        idx = np.arange(start, min(start + chunk, len(dataset)))
        parts.append(obfuscate_batch(model, dataset.features[idx], dataset.y_nonprivate[idx],
                                     params, indices=idx))
    features = np.vstack(parts) if parts else np.zeros((0, dataset.width))
    return dataset.with_features(features)
