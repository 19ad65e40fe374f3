"""Adversary / utility-provider probes and the measurement protocols.

Both the adversary (predicts the private label) and the utility provider
(predicts the non-private label) are the same dense probe: 256-256-128-2 with
dropout 0.2, 0.3, 0.4 after the three hidden layers and a log_softmax head.

Protocols
---------
weak       probe trained on original-format auxiliary data, tested on the
           obfuscated test set (private label).
strong     probe trained on the auxiliary data passed through the obfuscator
           with the same privacy settings, tested on the obfuscated test set.
utility    probe trained on obfuscated training data (non-private label),
           tested on the original test set; the obfuscated-test score is
           reported alongside.
baseline   probes trained and tested on original data (the leakage and
           utility ceilings).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import nn
from .data import Dataset, majority_rate, minibatches
from .errors import DataError, NumericError
from .nn import AdamState, NetworkParams, NetworkSpec
from .obfuscator import ObfuscatorModel
from .privatize import PrivacyParams, obfuscate_dataset

log = logging.getLogger(__name__)

PROTOCOLS = ("weak", "strong", "utility", "baseline")


@dataclass(frozen=True)
class ProbeConfig:
    spec: NetworkSpec
    lr: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 30
    patience: int = 3
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.spec.layers[-1].activation != "log_softmax":
            raise ValueError("probe must end in log_softmax")

    @classmethod
    def reference(cls, input_dim: int = 102, num_classes: int = 2, **kw) -> ProbeConfig:
        spec = NetworkSpec.chain([input_dim, 256, 256, 128, num_classes],
                                 ["relu", "relu", "relu", "log_softmax"],
                                 [0.0, 0.2, 0.3, 0.4])
        return cls(spec, **kw)

    def with_seed(self, seed: int) -> ProbeConfig:
        return replace(self, seed=seed)


@dataclass
class ProtocolResult:
    protocol: str
    accuracy: float
    baseline: float  # majority-class rate of the scored label on the scored set
    privacy: PrivacyParams | None = None
    seeds: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")

    def row(self) -> dict:
        p = self.privacy
        return {
            "protocol": self.protocol,
            "k": "" if p is None or not p.f_enabled else p.k,
            "lambda": "" if p is None or not p.g_enabled else p.lam,
            "seed": self.seeds.get("probe", ""),
            "accuracy": self.accuracy,
            "baseline": self.baseline,
        }


def train_probe(config: ProbeConfig, dataset: Dataset, target: str) -> NetworkParams:
    """Train a probe on ``dataset`` for the chosen label with early stopping.

    A ``val_fraction`` slice (seeded) is held out; training stops once its NLL
    has not improved for ``patience`` epochs and the best snapshot is returned.
    """
    labels = dataset.labels(target)
    n = len(dataset)
    if n < 2:
        raise DataError("need at least two records to train a probe")
    perm = np.random.default_rng([config.seed, 7]).permutation(n)
    n_val = max(1, int(round(config.val_fraction * n)))
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    x_fit, y_fit = dataset.features[fit_idx], labels[fit_idx]
    x_val, y_val = dataset.features[val_idx], labels[val_idx]

    spec = config.spec
    params = nn.init_network(spec, [config.seed, 0])
    state = AdamState.zeros_like(params)
    best, best_loss = params, nll(spec, params, x_val, y_val)
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        rng = np.random.default_rng([config.seed, epoch, 1])
        for b, idx in enumerate(minibatches(len(fit_idx), config.batch_size, [config.seed, epoch])):
            out, cache = nn.forward(spec, params, x_fit[idx], train=True, rng=rng)
            loss, g = nn.nll_loss(out, y_fit[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite probe loss in epoch {epoch}, batch {b}")
            params, state = nn.adam_step(params, nn.backward(spec, params, cache, g), state, config.lr)
        val_loss = nll(spec, params, x_val, y_val)
        if val_loss < best_loss:
            best, best_loss, stale = params, val_loss, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    log.debug("probe(%s) stopped after %d epochs, val nll %.4f", target, epoch, best_loss)
    return best


def nll(spec: NetworkSpec, params: NetworkParams, x, y) -> float:
    return nn.nll_loss(nn.predict(spec, params, x), y)[0]


def eval_accuracy(params: NetworkParams, config: ProbeConfig, dataset: Dataset, target: str) -> float:
    """Fraction of records whose argmax prediction matches the label (eval mode)."""
    if len(dataset) == 0:
        raise DataError("cannot score an empty dataset")
    pred = np.argmax(nn.predict(config.spec, params, dataset.features), axis=1)
    return float(np.mean(pred == dataset.labels(target)))


def _seeds(config, privacy):
    seeds = {"probe": config.seed}
    if privacy is not None:
        seeds["noise"] = privacy.noise_seed
    return seeds


NOISE_ROLES = {"test": 0, "aux": 1, "train": 2}


def for_role(params: PrivacyParams, role: str) -> PrivacyParams:
    """Privacy settings whose noise stream is distinct for each dataset role.

    The test set keeps ``noise_seed`` itself, so obfuscating it directly with
    ``params`` matches what the protocols score.
    """
    return replace(params, noise_seed=params.noise_seed + 1_000_003 * NOISE_ROLES[role])


def weak_adversary_protocol(aux: Dataset, obf_test: Dataset, config: ProbeConfig,
                            privacy: PrivacyParams | None = None,
                            adversary: NetworkParams | None = None) -> ProtocolResult:
    """Adversary trained on original data, scored on the obfuscated test set.

    ``adversary`` may pass in an already trained probe (it only depends on
    ``aux`` and the config, not on the privacy settings).
    """
    if adversary is None:
        adversary = train_probe(config, aux, "private")
    acc = eval_accuracy(adversary, config, obf_test, "private")
    return ProtocolResult("weak", acc, majority_rate(obf_test.y_private), privacy,
                          _seeds(config, privacy))


def strong_adversary_protocol(model: ObfuscatorModel, privacy: PrivacyParams, aux: Dataset,
                              obf_test: Dataset, config: ProbeConfig) -> ProtocolResult:
    """Adversary trained on a dummy obfuscated copy of ``aux`` with true labels."""
    dummy = obfuscate_dataset(model, aux, for_role(privacy, "aux"))
    adversary = train_probe(config, dummy, "private")
    acc = eval_accuracy(adversary, config, obf_test, "private")
    return ProtocolResult("strong", acc, majority_rate(obf_test.y_private), privacy,
                          _seeds(config, privacy))


def utility_protocol(model: ObfuscatorModel, privacy: PrivacyParams, train: Dataset,
                     orig_test: Dataset, config: ProbeConfig, mode: str = "original",
                     obf_test: Dataset | None = None) -> ProtocolResult:
    """Utility provider trained on obfuscated ``train``.

    ``accuracy`` is scored on the original test set (``mode="original"``) or on
    the obfuscated test set (``mode="obfuscated"``); ``details`` holds both.
    """
    if mode not in ("original", "obfuscated"):
        raise ValueError(f"unknown eval mode {mode!r}")
    obf_train = obfuscate_dataset(model, train, for_role(privacy, "train"))
    provider = train_probe(config, obf_train, "nonprivate")
    if obf_test is None:
        obf_test = obfuscate_dataset(model, orig_test, privacy)
    both = {
        "original": eval_accuracy(provider, config, orig_test, "nonprivate"),
        "obfuscated": eval_accuracy(provider, config, obf_test, "nonprivate"),
    }
    return ProtocolResult("utility", both[mode], majority_rate(orig_test.y_nonprivate), privacy,
                          _seeds(config, privacy), {"eval_mode": mode, **both})


def baseline_protocol(train: Dataset, test: Dataset, config: ProbeConfig,
                      target: str = "private") -> ProtocolResult:
    """Probe trained and scored on unobfuscated data: the ceiling for ``target``."""
    probe = train_probe(config, train, target)
    acc = eval_accuracy(probe, config, test, target)
    return ProtocolResult("baseline", acc, majority_rate(test.labels(target)), None,
                          _seeds(config, None), {"target": target})


@dataclass
class DecorrelationResult:
    agreement: float
    injected: np.ndarray            # injected class per record
    predicted: np.ndarray           # utility-probe prediction per record
    prob_positive: np.ndarray       # probe's P(class 1) per record
    confusion: np.ndarray           # [injected, predicted] counts
    histogram: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"agreement": self.agreement,
                "injected_counts": np.bincount(self.injected, minlength=2).tolist(),
                "confusion": self.confusion.tolist(), **self.histogram}


def decorrelation_test(model: ObfuscatorModel, dataset: Dataset, lam: float,
                       utility_params: NetworkParams, config: ProbeConfig, seed: int = 0,
                       bins: int = 20) -> DecorrelationResult:
    """Inject a random class into the classifier head and check the utility probe follows it.

    Each record's classifier output is replaced by ``(0, lam)`` or ``(lam, 0)``
    uniformly at random; the rest head is left noise-free.
    """
    if lam > 0:
        raise ValueError("lambda must be <= 0")
    rng = np.random.default_rng(seed)
    injected = rng.integers(0, 2, len(dataset))
    w_np = np.full((len(dataset), 2), float(lam))
    w_np[np.arange(len(dataset)), injected] = 0.0
    w_p = model.rest(model.encode(dataset.features))
    x_new = model.decode(w_np, w_p)
    log_probs = nn.predict(config.spec, utility_params, x_new)
    predicted = np.argmax(log_probs, axis=1)
    confusion = np.zeros((2, 2), dtype=np.int64)
    np.add.at(confusion, (injected, predicted), 1)
    p1 = np.exp(log_probs[:, 1])
    counts, edges = np.histogram(p1, bins=bins, range=(0.0, 1.0))
    return DecorrelationResult(
        agreement=float(np.mean(predicted == injected)),
        injected=injected, predicted=predicted, prob_positive=p1, confusion=confusion,
        histogram={"bin_edges": edges.tolist(), "counts": counts.tolist()},
    )


def result_rows(results) -> list[dict]:
    return [r.row() for r in results]


def settings_dict(privacy: PrivacyParams | None) -> dict:
    return {} if privacy is None else asdict(privacy)
