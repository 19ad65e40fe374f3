"""The four-network obfuscator: encoder, classifier head, rest head, decoder.

``x -> encoder -> v``; ``v`` feeds both the classifier head (2 log-probabilities
for the non-private label) and the rest head (non-negative residual features);
the decoder maps ``classifier(v) || rest(v)`` back to the input space. The
classifier output always comes first in the concatenation.

Training minimizes ``L_ae + L_C`` jointly: MSE between the input and its
reconstruction plus the NLL of the classifier head against the non-private
label. One backward pass over the sum at a shared parameter point gives the
decoder and rest head only reconstruction gradients (the classifier loss does
not depend on them) while the encoder and classifier receive both.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .data import Dataset, minibatches
from .errors import DataError, ModelFormatError, NumericError
from .nn import AdamState, GradientBundle, LayerSpec, NetworkParams, NetworkSpec

log = logging.getLogger(__name__)

NETWORKS = ("encoder", "classifier", "rest", "decoder")
MAGIC = "OBFNET v1"
REFERENCE_PARAM_COUNT = 88_494


@dataclass(frozen=True)
class ObfuscatorArch:
    encoder: NetworkSpec
    classifier: NetworkSpec
    rest: NetworkSpec
    decoder: NetworkSpec

    def __post_init__(self):
        b = self.encoder.out_dim
        if self.classifier.in_dim != b or self.rest.in_dim != b:
            raise ValueError("classifier and rest heads must read the encoder output")
        if self.classifier.out_dim + self.rest.out_dim != self.decoder.in_dim:
            raise ValueError("decoder input must equal classifier + rest output widths")
        if self.decoder.out_dim != self.encoder.in_dim:
            raise ValueError("decoder must reproduce the input width")
        if self.classifier.layers[-1].activation != "log_softmax":
            raise ValueError("classifier head must end in log_softmax")

    @property
    def input_dim(self) -> int:
        return self.encoder.in_dim

    @property
    def bottleneck(self) -> int:
        return self.encoder.out_dim

    @property
    def num_classes(self) -> int:
        return self.classifier.out_dim

    def specs(self) -> dict[str, NetworkSpec]:
        return {name: getattr(self, name) for name in NETWORKS}

    def param_count(self) -> int:
        return sum(nn.param_count(s) for s in self.specs().values())

    @classmethod
    def reference(cls, input_dim: int = 102) -> ObfuscatorArch:
        """The categorical-data architecture: 102-128-128-64 encoder, 64-32-8-2
        classifier, 64-64-62 rest, 64-128-128-102 decoder."""
        return cls.dense(input_dim, hidden=(128, 128), bottleneck=64,
                         classifier_hidden=(32, 8), rest_hidden=(64,))

    @classmethod
    def dense(cls, input_dim: int, hidden=(128, 128), bottleneck: int = 64,
              classifier_hidden=(32, 8), rest_hidden=(64,), num_classes: int = 2) -> ObfuscatorArch:
        hidden = tuple(hidden)
        enc_dims = [input_dim, *hidden, bottleneck]
        cls_dims = [bottleneck, *classifier_hidden, num_classes]
        rest_dims = [bottleneck, *rest_hidden, bottleneck - num_classes]
        dec_dims = [bottleneck, *reversed(hidden), input_dim]
        relu = lambda dims: ["relu"] * (len(dims) - 1)  # noqa: E731
        return cls(
            encoder=NetworkSpec.chain(enc_dims, relu(enc_dims)),
            classifier=NetworkSpec.chain(cls_dims, relu(cls_dims)[:-1] + ["log_softmax"]),
            rest=NetworkSpec.chain(rest_dims, relu(rest_dims)),
            decoder=NetworkSpec.chain(dec_dims, relu(dec_dims)[:-1] + ["sigmoid"]),
        )


@dataclass
class ObfuscatorModel:
    arch: ObfuscatorArch
    params: dict[str, NetworkParams]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, spec in self.arch.specs().items():
            self.params[name].check(spec)

    @classmethod
    def initialize(cls, arch: ObfuscatorArch, seed: int = 0,
                   variance: float = nn.INIT_VARIANCE) -> ObfuscatorModel:
        params = {name: nn.init_network(spec, [seed, i], variance)
                  for i, (name, spec) in enumerate(arch.specs().items())}
        return cls(arch, params, {"seed": seed})

    def copy(self) -> ObfuscatorModel:
        return ObfuscatorModel(self.arch, {k: p.copy() for k, p in self.params.items()},
                               json.loads(json.dumps(self.meta)))

    def _run(self, name, x):
        return nn.predict(self.arch.specs()[name], self.params[name], x)

    # eval-mode building blocks -- all accept one record or a batch
    def encode(self, x) -> np.ndarray:
        return self._run("encoder", x)

    def classify(self, v) -> np.ndarray:
        return self._run("classifier", v)

    def rest(self, v) -> np.ndarray:
        return self._run("rest", v)

    def decode(self, w_np, w_p) -> np.ndarray:
        return self._run("decoder", np.concatenate([w_np, w_p], axis=-1))

    def reconstruct(self, x) -> np.ndarray:
        v = self.encode(x)
        return self.decode(self.classify(v), self.rest(v))


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    patience: int = 5
    val_fraction: float = 0.1
    seed: int = 0
    init_variance: float = nn.INIT_VARIANCE

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError(f"invalid training hyperparameters: {self}")


@dataclass
class TrainHistory:
    train_ae: list[float] = field(default_factory=list)
    val_ae: list[float] = field(default_factory=list)
    train_c: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    initial_val_ae: float = float("nan")
    initial_val_acc: float = float("nan")
    best_epoch: int = 0  # 1-based; 0 means the initial model was kept
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.val_ae)

    def rows(self) -> list[dict]:
        return [
            {"epoch": i + 1, "train_ae": a, "val_ae": b, "train_c": c, "val_acc": d,
             "best": int(i + 1 == self.best_epoch)}
            for i, (a, b, c, d) in enumerate(zip(self.train_ae, self.val_ae, self.train_c, self.val_acc))
        ]


def joint_gradients(model: ObfuscatorModel, x, y_np, ae_weight: float = 1.0,
                    c_weight: float = 1.0) -> tuple[float, float, dict[str, GradientBundle]]:
    """Loss values and gradients of ``ae_weight*L_ae + c_weight*L_C`` for a batch.

    Returns ``(L_ae, L_C, grads)`` with one :class:`GradientBundle` per network.
    """
    specs, p = model.arch.specs(), model.params
    x = np.atleast_2d(x)
    v, c_enc = nn.forward(specs["encoder"], p["encoder"], x)
    w_np, c_cls = nn.forward(specs["classifier"], p["classifier"], v)
    w_p, c_rest = nn.forward(specs["rest"], p["rest"], v)
    x_rec, c_dec = nn.forward(specs["decoder"], p["decoder"], np.concatenate([w_np, w_p], axis=1))

    l_ae, g_rec = nn.mse_loss(x, x_rec)
    l_c, g_wnp = nn.nll_loss(w_np, y_np)
    g_dec = nn.backward(specs["decoder"], p["decoder"], c_dec, ae_weight * g_rec)
    k = model.arch.num_classes
    g_cls = nn.backward(specs["classifier"], p["classifier"], c_cls,
                        g_dec.inputs[:, :k] + c_weight * g_wnp)
    g_rest = nn.backward(specs["rest"], p["rest"], c_rest, g_dec.inputs[:, k:])
    g_enc = nn.backward(specs["encoder"], p["encoder"], c_enc, g_cls.inputs + g_rest.inputs)
    grads = {"encoder": g_enc, "classifier": g_cls, "rest": g_rest, "decoder": g_dec}
    return l_ae, l_c, grads


def evaluate(model: ObfuscatorModel, dataset: Dataset, chunk: int = 4096) -> tuple[float, float, float]:
    """Mean L_ae, mean L_C and classifier-head accuracy over ``dataset``."""
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    sq_err = nll = correct = 0.0
    for start in range(0, len(dataset), chunk):
        x = dataset.features[start:start + chunk]
        y = dataset.y_nonprivate[start:start + chunk]
        v = model.encode(x)
        w_np = model.classify(v)
        x_rec = model.decode(w_np, model.rest(v))
        sq_err += float(np.sum((x - x_rec) ** 2))
        nll -= float(np.sum(w_np[np.arange(len(y)), y]))
        correct += float(np.sum(np.argmax(w_np, axis=1) == y))
    n = len(dataset)
    return sq_err / (n * dataset.width), nll / n, correct / n


def train_obfuscator(arch: ObfuscatorArch, train: Dataset, val: Dataset,
                     hyper: TrainHyper = TrainHyper(),
                     model: ObfuscatorModel | None = None) -> tuple[ObfuscatorModel, TrainHistory]:
    """Mini-batch Adam on ``L_ae + L_C`` with early stopping on validation ``L_ae``.

    The best-validation snapshot is returned. ``model`` optionally supplies the
    starting point; otherwise a fresh initialization from ``hyper.seed`` is used.
    """
    if len(val) == 0:
        raise DataError("validation set is empty")
    if train.width != arch.input_dim or val.width != arch.input_dim:
        raise DataError(f"datasets have width {train.width}, architecture expects {arch.input_dim}")
    model = ObfuscatorModel.initialize(arch, hyper.seed, hyper.init_variance) if model is None else model.copy()
    states = {name: AdamState.zeros_like(model.params[name]) for name in NETWORKS}
    history = TrainHistory()
    best_loss, _, history.initial_val_acc = evaluate(model, val)
    history.initial_val_ae = best_loss
    best = model.copy()
    stale = 0
    for epoch in range(1, hyper.epochs + 1):
        ae_sum = c_sum = 0.0
        for b, idx in enumerate(minibatches(len(train), hyper.batch_size, [hyper.seed, epoch])):
            l_ae, l_c, grads = joint_gradients(model, train.features[idx], train.y_nonprivate[idx])
            if not (np.isfinite(l_ae) and np.isfinite(l_c)):
                raise NumericError(f"non-finite loss in epoch {epoch}, batch {b}")
            for name in NETWORKS:
                model.params[name], states[name] = nn.adam_step(
                    model.params[name], grads[name], states[name], hyper.lr)
            ae_sum += l_ae * len(idx)
            c_sum += l_c * len(idx)
        val_ae, _, val_acc = evaluate(model, val)
        history.train_ae.append(ae_sum / len(train))
        history.train_c.append(c_sum / len(train))
        history.val_ae.append(val_ae)
        history.val_acc.append(val_acc)
        log.info("epoch %d: train L_ae %.5f L_C %.4f | val L_ae %.5f acc %.4f",
                 epoch, history.train_ae[-1], history.train_c[-1], val_ae, val_acc)
        if val_ae < best_loss:
            best_loss, best, stale = val_ae, model.copy(), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= hyper.patience:
                history.stopped_early = True
                break
    best.meta.update({
        "seed": hyper.seed,
        "epochs_run": history.epochs_run,
        "best_epoch": history.best_epoch,
        "val_ae": best_loss,
        "hyper": asdict(hyper),
    })
    return best, history


# --------------------------------------------------------------------------- persistence

def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def model_to_text(model: ObfuscatorModel) -> str:
    lines = [MAGIC]
    for name, spec in model.arch.specs().items():
        params = model.params[name]
        lines.append(f"block {name} {len(spec.layers)}")
        for layer, w, b in zip(spec.layers, params.weights, params.biases):
            lines.append(f"layer {layer.in_dim} {layer.out_dim} {layer.activation} "
                         f"{format(layer.dropout_p, '.17g')} {format(layer.negative_slope, '.17g')}")
            lines.append("W " + _fmt(w))
            lines.append("b " + _fmt(b))
    lines.append("meta " + json.dumps(model.meta, sort_keys=True))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(model: ObfuscatorModel, path: str | Path):
    Path(path).write_text(model_to_text(model), encoding="utf-8")


def model_from_text(text: str) -> ObfuscatorModel:
    lines = text.split("\n")
    if not lines or lines[0].strip() != MAGIC:
        head = lines[0].strip() if lines else ""
        if head.startswith("OBFNET"):
            raise ModelFormatError(f"unsupported model version {head!r}, expected {MAGIC!r}")
        raise ModelFormatError(f"not an obfuscator model file (first line {head[:40]!r})")
    pos = 1

    def take(prefix: str) -> list[str]:
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix):
            got = lines[pos][:30] if pos < len(lines) else "end of file"
            raise ModelFormatError(f"line {pos + 1}: expected {prefix.strip()!r}, got {got!r}")
        pos += 1
        return lines[pos - 1].split()[1:]

    def floats(prefix: str, count: int) -> np.ndarray:
        fields = take(prefix)
        if len(fields) != count:
            raise ModelFormatError(f"line {pos}: expected {count} values, got {len(fields)}")
        try:
            return np.array([float(f) for f in fields])
        except ValueError:
            raise ModelFormatError(f"line {pos}: malformed number") from None

    specs, params = {}, {}
    for expected in NETWORKS:
        name, nlayers = take("block ")
        if name != expected:
            raise ModelFormatError(f"expected block {expected!r}, found {name!r}")
        layers, weights, biases = [], [], []
        for _ in range(int(nlayers)):
            f = take("layer ")
            try:
                layer = LayerSpec(int(f[0]), int(f[1]), f[2], float(f[3]), float(f[4]))
            except (ValueError, IndexError) as exc:
                raise ModelFormatError(f"line {pos}: bad layer description ({exc})") from None
            layers.append(layer)
            weights.append(floats("W ", layer.in_dim * layer.out_dim).reshape(layer.out_dim, layer.in_dim))
            biases.append(floats("b ", layer.out_dim))
        try:
            specs[name] = NetworkSpec(tuple(layers))
        except ValueError as exc:
            raise ModelFormatError(f"block {name}: {exc}") from None
        params[name] = NetworkParams(weights, biases)
    meta_fields = lines[pos].split(" ", 1) if pos < len(lines) else []
    if not meta_fields or meta_fields[0] != "meta":
        raise ModelFormatError("missing meta line (truncated file?)")
    meta = json.loads(meta_fields[1]) if len(meta_fields) > 1 else {}
    pos += 1
    if pos >= len(lines) or lines[pos].strip() != "end":
        raise ModelFormatError("missing end marker (truncated file?)")
    try:
        arch = ObfuscatorArch(**specs)
    except ValueError as exc:
        raise ModelFormatError(f"inconsistent architecture: {exc}") from None
    return ObfuscatorModel(arch, params, meta)


def load_model(path: str | Path) -> ObfuscatorModel:
    return model_from_text(Path(path).read_text(encoding="utf-8"))
