"""numpy 1D CNN for 128-sample harvested-voltage segments.

Architecture (defaults in :class:`CnnSpec`)::

    input (1 x 128)
    3 x [valid Conv1D -> ReLU -> MaxPool(2)]      16/32/64 filters, kernels 5/3/3
    flatten
    Dense(128) -> ReLU -> Dropout(0.5)
    Dense(num_classes) -> softmax

Trained with mini-batch gradient descent on softmax cross-entropy. The
learning rate starts at ``lr`` and is multiplied by ``lr_decay`` every
``lr_decay_every`` epochs. Weights use seeded He-uniform initialisation
(bound sqrt(6 / fan_in)) and zero biases.

Training is deterministic for a given spec, seed and data *content*. The
training set is put into a canonical order before the seeded shuffle. The
patch extraction and pooling loops run in :mod:`harvsense.kernels`.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import zipfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DomainError, ModelFormatError, TrainingError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
DIVERGENCE_LOSS = 1e3
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass(frozen=True)
class CnnSpec:
    num_classes: int = 10
    input_len: int = 128
    conv_filters: tuple = (16, 32, 64)
    conv_kernels: tuple = (5, 3, 3)
    pool_size: int = 2
    fc_hidden: int = 128
    dropout_rate: float = 0.5
    lr: float = 0.01
    epochs: int = 300
    batch_size: int = 32
    lr_decay: float = 0.5
    lr_decay_every: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "conv_filters", tuple(int(f) for f in self.conv_filters))
        object.__setattr__(self, "conv_kernels", tuple(int(k) for k in self.conv_kernels))
        if len(self.conv_filters) != len(self.conv_kernels) or not self.conv_filters:
            raise DomainError("conv_filters and conv_kernels must be non-empty and equally long")
        if self.num_classes < 2:
            raise DomainError("num_classes must be >= 2")
        if not 0 <= self.dropout_rate < 1:
            raise DomainError("dropout_rate must lie in [0, 1)")
        if not (self.lr > 0 and self.batch_size >= 1 and self.epochs >= 0 and self.pool_size >= 1):
            raise DomainError("lr, batch_size, pool_size must be positive and epochs >= 0")
        self.layer_lengths()

    def layer_lengths(self) -> list[int]:
        """Temporal length after each conv+pool stage."""
        lengths = []
        length = self.input_len
        for k in self.conv_kernels:
            length = (length - k + 1) // self.pool_size
            if length < 1:
                raise DomainError(f"input_len {self.input_len} is too short for kernels {self.conv_kernels}")
            lengths.append(length)
        return lengths

    @property
    def flatten_len(self) -> int:
        return self.conv_filters[-1] * self.layer_lengths()[-1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_filters"] = list(self.conv_filters)
        d["conv_kernels"] = list(self.conv_kernels)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(eq=False)
class CnnModel:
    spec: CnnSpec
    params: dict
    training_meta: dict = field(default_factory=dict)

    def param_shapes(self) -> dict:
        return {k: v.shape for k, v in self.params.items()}


@dataclass(eq=False)
class EvalReport:
    accuracy: float
    confusion: np.ndarray
    per_class_recall: list
    labels: list | None = None

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "per_class_recall": self.per_class_recall,
            "labels": self.labels,
        }


def expected_shapes(spec: CnnSpec) -> dict:
    shapes = {}
    in_ch = 1
    for i, (f, k) in enumerate(zip(spec.conv_filters, spec.conv_kernels)):
        shapes[f"conv{i}.W"] = (f, in_ch, k)
        shapes[f"conv{i}.b"] = (f,)
        in_ch = f
    shapes["fc0.W"] = (spec.flatten_len, spec.fc_hidden)
    shapes["fc0.b"] = (spec.fc_hidden,)
    shapes["fc1.W"] = (spec.fc_hidden, spec.num_classes)
    shapes["fc1.b"] = (spec.num_classes,)
    return shapes


def init_model(spec: CnnSpec) -> CnnModel:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    params = {}
    for name, shape in expected_shapes(spec).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if name.startswith("conv") else shape[0]
            bound = math.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return CnnModel(spec, params)


def _check_model(model: CnnModel):
    shapes = expected_shapes(model.spec)
    if set(shapes) != set(model.params):
        raise ModelFormatError(f"parameter names {sorted(model.params)} do not match spec")
    for name, shape in shapes.items():
        if model.params[name].shape != shape:
            raise ModelFormatError(f"{name} has shape {model.params[name].shape}, spec needs {shape}")


def _as_batch(spec: CnnSpec, x) -> np.ndarray:
    x = np.asarray(getattr(x, "vector", x), dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_len:
        raise DomainError(f"expected input of length {spec.input_len}, got shape {x.shape}")
    return x


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Valid 1D convolution (cross-correlation). x (N, C, L), w (F, C, k) -> (N, F, L-k+1)."""
    f, c, k = w.shape
    cols = kernels.im2col1d(x, k)
    out = np.ascontiguousarray((cols @ w.reshape(f, c * k).T + b).transpose(0, 2, 1))
    return out, cols


def conv1d_backward(gout: np.ndarray, cols: np.ndarray, w: np.ndarray, need_input_grad: bool = True):
    """Gradients (dx, dw, db) of a valid convolution given its upstream gradient."""
    f, c, k = w.shape
    g = gout.transpose(0, 2, 1)
    dw = (g.reshape(-1, f).T @ cols.reshape(-1, c * k)).reshape(f, c, k)
    db = g.sum(axis=(0, 1))
    dx = kernels.col2im1d(g @ w.reshape(f, c * k), c, k) if need_input_grad else None
    return dx, dw, db


def _forward(model: CnnModel, x: np.ndarray, dropout_mask=None):
    spec, p = model.spec, model.params
    h = x[:, None, :]
    cache = []
    for i in range(len(spec.conv_kernels)):
        z, cols = conv1d_forward(h, p[f"conv{i}.W"], p[f"conv{i}.b"])
        pooled, idx = kernels.maxpool1d_forward(np.maximum(z, 0.0), spec.pool_size)
        cache.append((cols, z, idx))
        h = pooled
    flat = h.reshape(h.shape[0], -1)
    z0 = flat @ p["fc0.W"] + p["fc0.b"]
    a0 = np.maximum(z0, 0.0)
    d0 = a0 if dropout_mask is None else a0 * dropout_mask
    logits = d0 @ p["fc1.W"] + p["fc1.b"]
    return logits, (cache, h.shape, flat, z0, d0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_logits(model: CnnModel, x, batch_size: int = 512) -> np.ndarray:
    x = _as_batch(model.spec, x)
    return np.concatenate([_forward(model, x[i:i + batch_size])[0]
                           for i in range(0, x.shape[0], batch_size)] or [np.zeros((0, model.spec.num_classes))])


def forward(model: CnnModel, segment) -> np.ndarray:
    """Class probabilities for one segment (or a batch); dropout inactive."""
    probs = softmax(predict_logits(model, segment))
    return probs[0] if np.ndim(getattr(segment, "vector", segment)) == 1 else probs


def dropout_mask(spec: CnnSpec, n: int, rng) -> np.ndarray | None:
    if spec.dropout_rate == 0:
        return None
    keep = 1.0 - spec.dropout_rate
    return (rng.random((n, spec.fc_hidden)) < keep) / keep


def loss_and_grads(model: CnnModel, x, y, mask=None, batch_id=None):
    """Mean softmax cross-entropy and its gradient for every parameter.

    ``mask`` is the inverted-dropout multiplier for the hidden dense layer
    (None disables dropout).
    """
    spec, p = model.spec, model.params
    x = _as_batch(spec, x)
    y = np.asarray(y, dtype=np.intp)
    if x.shape[0] == 0 or y.shape != (x.shape[0],):
        raise DomainError("batch must be non-empty with one label per sample")
    if (y < 0).any() or (y >= spec.num_classes).any():
        raise DomainError(f"labels must lie in [0, {spec.num_classes})")
    n = x.shape[0]
    logits, (cache, pooled_shape, flat, z0, d0) = _forward(model, x, mask)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), y]))
    if not math.isfinite(loss):
        raise TrainingError(f"loss is {loss} on batch {batch_id}")

    grads = {}
    g = np.exp(shifted - log_z[:, None])
    g[np.arange(n), y] -= 1.0
    g /= n
    grads["fc1.W"] = d0.T @ g
    grads["fc1.b"] = g.sum(axis=0)
    gd = g @ p["fc1.W"].T
    ga = gd if mask is None else gd * mask
    gz0 = ga * (z0 > 0)
    grads["fc0.W"] = flat.T @ gz0
    grads["fc0.b"] = gz0.sum(axis=0)
    gh = (gz0 @ p["fc0.W"].T).reshape(pooled_shape)

    for i in reversed(range(len(spec.conv_kernels))):
        cols, z, idx = cache[i]
        ga = kernels.maxpool1d_backward(gh, idx, spec.pool_size, z.shape[2])
        gh, grads[f"conv{i}.W"], grads[f"conv{i}.b"] = conv1d_backward(
            ga * (z > 0), cols, p[f"conv{i}.W"], need_input_grad=i > 0)
    return loss, grads


def canonical_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = [hashlib.sha256(row.tobytes() + int(lab).to_bytes(4, "little")).digest()
            for row, lab in zip(x, y)]
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.intp)


def _predict(model, x):
    return np.argmax(predict_logits(model, x), axis=1)


def train(spec: CnnSpec, train_set, val_set, progress=None) -> CnnModel:
    """Fit a model; returns the weights with the best validation accuracy.

    ``train_set`` and ``val_set`` are ``(X, y)`` pairs with ``X`` of shape
    (n, input_len). ``progress`` is an optional callable receiving
    ``(epoch, mean_loss, val_accuracy)``.
    """
    x_tr, y_tr = _as_batch(spec, train_set[0]), np.asarray(train_set[1], dtype=np.intp)
    x_va, y_va = _as_batch(spec, val_set[0]), np.asarray(val_set[1], dtype=np.intp)
    if x_tr.shape[0] == 0 or x_va.shape[0] == 0:
        raise DomainError("training and validation sets must be non-empty")
    for ys in (y_tr, y_va):
        if (ys < 0).any() or (ys >= spec.num_classes).any():
            raise DomainError(f"labels must lie in [0, {spec.num_classes})")

    order = canonical_order(x_tr, y_tr)
    x_tr, y_tr = x_tr[order], y_tr[order]
    model = init_model(spec)
    rng = np.random.Generator(np.random.PCG64([spec.seed, 1]))
    n = x_tr.shape[0]
    best_acc, best_params, best_epoch = -1.0, None, -1
    history = []
    for epoch in range(spec.epochs):
        lr = spec.lr * spec.lr_decay ** (epoch // spec.lr_decay_every) if spec.lr_decay_every else spec.lr
        perm = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, spec.batch_size)):
            idx = perm[start:start + spec.batch_size]
            mask = dropout_mask(spec, idx.size, rng)
            loss, grads = loss_and_grads(model, x_tr[idx], y_tr[idx], mask, batch_id=(epoch, b))
            if loss > DIVERGENCE_LOSS:
                raise TrainingError(f"loss {loss:.3g} exceeds {DIVERGENCE_LOSS:g} at epoch {epoch} batch {b} (lr={lr})")
            for name, g in grads.items():
                model.params[name] -= lr * g
            total += loss * idx.size
        mean_loss = total / n
        val_acc = float(np.mean(_predict(model, x_va) == y_va))
        history.append({"epoch": epoch, "loss": mean_loss, "val_accuracy": val_acc, "lr": lr})
        if val_acc > best_acc:
            best_acc, best_epoch = val_acc, epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
        if progress is not None:
            progress(epoch, mean_loss, val_acc)
        log.debug("epoch %d loss %.4f val_acc %.4f", epoch, mean_loss, val_acc)

    if best_params is not None:
        model.params = best_params
    model.training_meta = {
        "epochs_run": spec.epochs,
        "final_loss": history[-1]["loss"] if history else None,
        "best_epoch": best_epoch,
        "best_val_accuracy": best_acc if history else None,
        "seed": spec.seed,
        "history": history,
    }
    return model


def confusion_report(y_true, y_pred, num_classes: int, labels=None) -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.intp)
    y_pred = np.asarray(y_pred, dtype=np.intp)
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    total = conf.sum()
    rows = conf.sum(axis=1)
    recall = [float(conf[i, i] / rows[i]) if rows[i] else None for i in range(num_classes)]
    acc = float(np.trace(conf) / total) if total else 0.0
    return EvalReport(acc, conf, recall, list(labels) if labels is not None else None)


def evaluate(model: CnnModel, test_set, labels=None) -> EvalReport:
    """Argmax predictions (ties go to the lowest class index) and confusion matrix."""
    x, y = test_set
    x = _as_batch(model.spec, x)
    if x.shape[0] == 0:
        raise DomainError("test set must be non-empty")
    return confusion_report(y, _predict(model, x), model.spec.num_classes, labels)


def _zip_write(zf, name, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, data)


def save_model(model: CnnModel, path) -> Path:
    """Write a zip holding ``meta.json`` and one ``.npy`` per parameter.

    Entry timestamps are fixed, so equal models give byte-identical files.
    """
    _check_model(model)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "spec_digest": model.spec.digest(),
        "training_meta": model.training_meta,
        "params": sorted(model.params),
    }
    with zipfile.ZipFile(path, "w") as zf:
        _zip_write(zf, "meta.json", json.dumps(meta, sort_keys=True, indent=1).encode())
        for name in sorted(model.params):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(model.params[name]), allow_pickle=False)
            _zip_write(zf, f"params/{name}.npy", buf.getvalue())
    return path


def load_model(path, spec: CnnSpec | None = None) -> CnnModel:
    """Load a model file; with ``spec`` given, refuse a model built for another spec."""
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format_version") != FORMAT_VERSION:
                raise ModelFormatError(f"{path}: format version {meta.get('format_version')!r}, "
                                       f"expected {FORMAT_VERSION}")
            stored = CnnSpec(**meta["spec"])
            if stored.digest() != meta["spec_digest"]:
                raise ModelFormatError(f"{path}: stored spec does not match its digest")
            params = {name: np.load(io.BytesIO(zf.read(f"params/{name}.npy")), allow_pickle=False)
                      for name in meta["params"]}
    except ModelFormatError:
        raise
    except (zipfile.BadZipFile, KeyError, ValueError, TypeError, EOFError, OSError) as exc:
        raise ModelFormatError(f"{path}: cannot parse model file ({type(exc).__name__}: {exc})") from exc
    if spec is not None and spec.digest() != meta["spec_digest"]:
        raise ModelFormatError(f"{path}: spec digest mismatch; file holds {meta['spec']}, requested {spec.to_dict()}")
    model = CnnModel(stored, params, meta.get("training_meta", {}))
    _check_model(model)
    for name, arr in params.items():
        if not np.isfinite(arr).all():
            raise ModelFormatError(f"{path}: parameter {name} has non-finite values")
    return model


def with_classes(spec: CnnSpec, num_classes: int) -> CnnSpec:
    return replace(spec, num_classes=num_classes)
