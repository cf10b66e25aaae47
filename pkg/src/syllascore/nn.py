"""The classifier: two stacked LSTM layers feeding three dense layers.

Everything is implemented directly on numpy arrays in double precision:
forward pass, backpropagation through time, binary cross-entropy, and Adam.
No ML runtime is involved, which keeps training bit-deterministic for a
fixed seed and makes the analytic gradients checkable against finite
differences.

All trainable parameters live in one flat float64 vector. Layout, in order:

    lstm1.W (input_dim, 4*H1)   lstm1.U (H1, 4*H1)   lstm1.b (4*H1,)
    lstm2.W (H1, 4*H2)          lstm2.U (H2, 4*H2)   lstm2.b (4*H2,)
    dense1.W (H2, D1)  dense1.b (D1,)
    dense2.W (D1, D2)  dense2.b (D2,)
    dense3.W (D2, 1)   dense3.b (1,)

LSTM kernels hold the four gates side by side along the last axis in the
order input, forget, cell candidate, output. The first LSTM layer emits its
full hidden-state sequence; the second only its last hidden state. Dense
activations are tanh, logistic sigmoid, and a hard sigmoid
min(1, max(0, 0.2 x + 0.5)) whose output is the class-membership
probability (1 = pre-operation reference class).
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from .dsp import DspConfig, FRAGMENT_FRAMES, N_BINS
from .errors import CorruptFile, DegenerateInput, ShapeMismatch, VersionMismatch

BCE_EPS = 1e-7
MODEL_FORMAT = "syllascore-model"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    """Layer dimensions of the LSTM -> dense stack."""

    input_steps: int = FRAGMENT_FRAMES
    input_dim: int = N_BINS
    lstm1_units: int = 128
    lstm2_units: int = 64
    dense1_units: int = 64
    dense2_units: int = 16
    output_units: int = 1

    def __post_init__(self):
        dims = (self.input_steps, self.input_dim, self.lstm1_units,
                self.lstm2_units, self.dense1_units, self.dense2_units)
        if any(d < 1 for d in dims):
            raise ValueError("all architecture dimensions must be >= 1")
        if self.output_units != 1:
            raise ValueError("the classifier has a single output unit")

    def layout(self):
        """Ordered (name, shape) pairs of every parameter block."""
        h1, h2 = self.lstm1_units, self.lstm2_units
        return [
            ("lstm1.W", (self.input_dim, 4 * h1)),
            ("lstm1.U", (h1, 4 * h1)),
            ("lstm1.b", (4 * h1,)),
            ("lstm2.W", (h1, 4 * h2)),
            ("lstm2.U", (h2, 4 * h2)),
            ("lstm2.b", (4 * h2,)),
            ("dense1.W", (h2, self.dense1_units)),
            ("dense1.b", (self.dense1_units,)),
            ("dense2.W", (self.dense1_units, self.dense2_units)),
            ("dense2.b", (self.dense2_units,)),
            ("dense3.W", (self.dense2_units, self.output_units)),
            ("dense3.b", (self.output_units,)),
        ]

    @property
    def param_count(self):
        return sum(int(np.prod(shape)) for _, shape in self.layout())

    def to_dict(self):
        return {
            "input_steps": self.input_steps,
            "input_dim": self.input_dim,
            "lstm1_units": self.lstm1_units,
            "lstm2_units": self.lstm2_units,
            "dense1_units": self.dense1_units,
            "dense2_units": self.dense2_units,
            "output_units": self.output_units,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _views(arch, flat):
    """Named array views into a flat parameter (or gradient) vector."""
    out = {}
    pos = 0
    for name, shape in arch.layout():
        size = int(np.prod(shape))
        out[name] = flat[pos : pos + size].reshape(shape)
        pos += size
    if pos != flat.size:
        raise ShapeMismatch(f"parameter vector has {flat.size} entries, layout needs {pos}")
    return out


def init_params(arch, rng, forget_bias=1.0):
    """Glorot-uniform weight matrices, zero biases, LSTM forget-gate bias 1."""
    flat = np.zeros(arch.param_count)
    views = _views(arch, flat)
    for name, shape in arch.layout():
        if name.endswith(".b"):
            continue
        fan_in, fan_out = shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        views[name][...] = rng.uniform(-bound, bound, size=shape)
    for name, units in (("lstm1.b", arch.lstm1_units), ("lstm2.b", arch.lstm2_units)):
        views[name][units : 2 * units] = forget_bias
    return flat


def hard_sigmoid(x):
    return np.clip(0.2 * np.asarray(x) + 0.5, 0.0, 1.0)


def _hard_sigmoid_grad(x):
    # derivative is 0.2 strictly inside the linear region, 0 at and beyond it
    return np.where((x > -2.5) & (x < 2.5), 0.2, 0.0)


def _lstm_forward(x_seq, W, U, b, want_cache):
    """Run one LSTM layer over (B, T, D) inputs; returns (B, T, H) states."""
    B, T, _ = x_seq.shape
    H = U.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    states = np.empty((B, T, H))
    cache = [] if want_cache else None
    for t in range(T):
        h_prev, c_prev = h, c
        z = x_seq[:, t] @ W + h_prev @ U + b
        i = expit(z[:, :H])
        f = expit(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = expit(z[:, 3 * H :])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        states[:, t] = h
        if want_cache:
            cache.append((i, f, g, o, tc, c_prev, h_prev))
    return states, cache


def _lstm_backward(x_seq, cache, W, U, d_states, dW, dU, db):
    """Backpropagate through time; accumulates into dW/dU/db, returns dX."""
    B, T, _ = x_seq.shape
    H = U.shape[0]
    dx = np.zeros_like(x_seq)
    dh_rec = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i, f, g, o, tc, c_prev, h_prev = cache[t]
        dh = d_states[:, t] + dh_rec
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.empty((B, 4 * H))
        dz[:, :H] = (dc * g) * i * (1.0 - i)
        dz[:, H : 2 * H] = (dc * c_prev) * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = (dc * i) * (1.0 - g * g)
        dz[:, 3 * H :] = do * o * (1.0 - o)
        dW += x_seq[:, t].T @ dz
        dU += h_prev.T @ dz
        db += dz.sum(axis=0)
        dx[:, t] = dz @ W.T
        dh_rec = dz @ U.T
        dc = dc * f
    return dx


def _forward_full(arch, views, X, want_cache=False):
    """Probability head over a (B, steps, input_dim) batch."""
    states1, cache1 = _lstm_forward(X, views["lstm1.W"], views["lstm1.U"], views["lstm1.b"], want_cache)
    states2, cache2 = _lstm_forward(states1, views["lstm2.W"], views["lstm2.U"], views["lstm2.b"], want_cache)
    h_last = states2[:, -1]
    a1 = np.tanh(h_last @ views["dense1.W"] + views["dense1.b"])
    a2 = expit(a1 @ views["dense2.W"] + views["dense2.b"])
    z3 = (a2 @ views["dense3.W"] + views["dense3.b"])[:, 0]
    p = hard_sigmoid(z3)
    if not want_cache:
        return p, None
    return p, (states1, cache1, cache2, h_last, a1, a2, z3)


def _check_batch(arch, X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[1:] != (arch.input_steps, arch.input_dim):
        raise ShapeMismatch(
            f"expected fragments of shape ({arch.input_steps}, {arch.input_dim}), got {X.shape[1:]}"
        )
    return X


@dataclass
class Model:
    """Architecture plus trained parameters and the preprocessing they expect."""

    arch: Architecture
    params: np.ndarray
    dsp_config: DspConfig = field(default_factory=DspConfig)
    input_mean: Optional[np.ndarray] = None  # per-bin standardization, frozen at training
    input_std: Optional[np.ndarray] = None
    train_meta: Optional[dict] = None

    def __post_init__(self):
        if self.params.shape != (self.arch.param_count,):
            raise ShapeMismatch(
                f"parameter vector length {self.params.size} != {self.arch.param_count}"
            )
        if not np.all(np.isfinite(self.params)):
            raise ValueError("parameters contain non-finite values")
        if (self.input_mean is None) != (self.input_std is None):
            raise ValueError("input_mean and input_std must be given together")

    @classmethod
    def zeros(cls, arch, **kwargs):
        return cls(arch, np.zeros(arch.param_count), **kwargs)

    def standardize(self, X):
        """Apply the frozen training-time per-bin statistics, if any."""
        if self.input_mean is None:
            return X
        return (X - self.input_mean) / self.input_std


def forward(model, fragment):
    """Class-membership probability in [0, 1] for one fragment."""
    fragment = np.asarray(fragment, dtype=np.float64)
    if fragment.shape != (model.arch.input_steps, model.arch.input_dim):
        raise ShapeMismatch(
            f"fragment shape {fragment.shape} != "
            f"({model.arch.input_steps}, {model.arch.input_dim})"
        )
    views = _views(model.arch, model.params)
    p, _ = _forward_full(model.arch, views, fragment[None])
    return float(p[0])


def forward_batch(model, X, chunk=512):
    """Vector of probabilities for a (N, steps, input_dim) fragment stack."""
    X = _check_batch(model.arch, X)
    views = _views(model.arch, model.params)
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], chunk):
        p, _ = _forward_full(model.arch, views, X[start : start + chunk])
        out[start : start + chunk] = p
    return out


def bce_loss(p, y):
    """Binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    pt = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(-(y * np.log(pt) + (1.0 - y) * np.log(1.0 - pt)))


def _bce_vector(p, y):
    pt = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return -(y * np.log(pt) + (1.0 - y) * np.log(1.0 - pt))


def _grad(arch, params, X, y):
    """Gradient of the mean batch loss w.r.t. every parameter, plus the loss."""
    B = X.shape[0]
    views = _views(arch, params)
    p, cache = _forward_full(arch, views, X, want_cache=True)
    states1, cache1, cache2, h_last, a1, a2, z3 = cache
    loss = float(np.mean(_bce_vector(p, y)))

    pt = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    inside_clamp = (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    dp = np.where(inside_clamp, (pt - y) / (pt * (1.0 - pt)), 0.0) / B
    dz3 = dp * _hard_sigmoid_grad(z3)

    grad = np.zeros(arch.param_count)
    g = _views(arch, grad)

    g["dense3.W"] += a2.T @ dz3[:, None]
    g["dense3.b"] += dz3.sum(keepdims=True)
    da2 = dz3[:, None] @ views["dense3.W"].T
    dz2 = da2 * a2 * (1.0 - a2)
    g["dense2.W"] += a1.T @ dz2
    g["dense2.b"] += dz2.sum(axis=0)
    da1 = dz2 @ views["dense2.W"].T
    dz1 = da1 * (1.0 - a1 * a1)
    g["dense1.W"] += h_last.T @ dz1
    g["dense1.b"] += dz1.sum(axis=0)
    dh_last = dz1 @ views["dense1.W"].T

    d_states2 = np.zeros((B, arch.input_steps, arch.lstm2_units))
    d_states2[:, -1] = dh_last
    d_states1 = _lstm_backward(states1, cache2, views["lstm2.W"], views["lstm2.U"],
                               d_states2, g["lstm2.W"], g["lstm2.U"], g["lstm2.b"])
    _lstm_backward(X, cache1, views["lstm1.W"], views["lstm1.U"],
                   d_states1, g["lstm1.W"], g["lstm1.U"], g["lstm1.b"])
    return grad, loss


def backward(model, X, y):
    """Gradient of the mean binary cross-entropy over a fragment batch."""
    X = _check_batch(model.arch, X)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ShapeMismatch("labels must be one per fragment")
    if X.shape[0] == 0:
        raise ShapeMismatch("batch must be non-empty")
    return _grad(model.arch, model.params, X, y)


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update with bias correction; mutates params and state."""
    state.t += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * grads
    state.v *= beta2
    state.v += (1.0 - beta2) * grads * grads
    m_hat = state.m / (1.0 - beta1**state.t)
    v_hat = state.v / (1.0 - beta2**state.t)
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    clip_norm: Optional[float] = 5.0  # None disables gradient clipping

    def __post_init__(self):
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ValueError("rates must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must be in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or None")


@dataclass
class TrainTrace:
    """Per-epoch loss and accuracy on the train and test splits."""

    train_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    test_accuracy: list = field(default_factory=list)

    @property
    def n_epochs(self):
        return len(self.train_loss)

    def rows(self):
        return list(zip(self.train_loss, self.train_accuracy, self.test_loss, self.test_accuracy))


def _metrics(arch, params, X, y):
    views = _views(arch, params)
    losses = np.empty(X.shape[0])
    hits = np.empty(X.shape[0], dtype=bool)
    for start in range(0, X.shape[0], 512):
        p, _ = _forward_full(arch, views, X[start : start + 512])
        ys = y[start : start + 512]
        losses[start : start + 512] = _bce_vector(p, ys)
        hits[start : start + 512] = (p >= 0.5) == (ys == 1.0)
    return float(losses.mean()), float(hits.mean())


def train(X, y, split, config, arch=None, dsp_config=None, standardize=False, extra_meta=None):
    """Train the classifier on the given split; fully seeded and deterministic.

    X is the raw fragment stack (N, steps, input_dim); y the binary labels.
    With standardize=True, per-bin mean/std are computed over the training
    fragments, applied everywhere, and frozen into the returned model.
    """
    arch = arch or Architecture()
    X = _check_batch(arch, X)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ShapeMismatch("labels must be one per fragment")
    dsp_config = dsp_config or DspConfig()

    train_idx = np.asarray(split.train_indices)
    test_idx = np.asarray(split.test_indices)
    y_train = y[train_idx]
    if np.unique(y_train).size < 2:
        raise DegenerateInput("training split must contain both classes")

    mean = std = None
    if standardize:
        flat = X[train_idx].reshape(-1, arch.input_dim)
        mean = flat.mean(axis=0)
        std = np.maximum(flat.std(axis=0), 1e-8)
        X = (X - mean) / std

    X_train, X_test = X[train_idx], X[test_idx]
    y_test = y[test_idx]

    rng = np.random.default_rng(config.seed)
    params = init_params(arch, rng)
    state = AdamState.zeros(arch.param_count)
    trace = TrainTrace()

    n_train = X_train.shape[0]
    for _epoch in range(config.epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            sel = order[start : start + config.batch_size]
            grad, _ = _grad(arch, params, X_train[sel], y_train[sel])
            if config.clip_norm is not None:
                norm = float(np.linalg.norm(grad))
                if norm > config.clip_norm:
                    grad *= config.clip_norm / norm
            adam_step(params, grad, state,
                      lr=config.learning_rate, beta1=config.adam_beta1,
                      beta2=config.adam_beta2, eps=config.adam_eps)
        loss, acc = _metrics(arch, params, X_train, y_train)
        trace.train_loss.append(loss)
        trace.train_accuracy.append(acc)
        if X_test.shape[0]:
            loss, acc = _metrics(arch, params, X_test, y_test)
        else:
            loss, acc = float("nan"), float("nan")
        trace.test_loss.append(loss)
        trace.test_accuracy.append(acc)

    meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "clip_norm": config.clip_norm,
        "standardized": bool(standardize),
        "split_seed": int(split.seed),
        "n_train": int(n_train),
        "n_test": int(X_test.shape[0]),
        "final_train_loss": trace.train_loss[-1],
        "final_train_accuracy": trace.train_accuracy[-1],
        "final_test_loss": trace.test_loss[-1],
        "final_test_accuracy": trace.test_accuracy[-1],
    }
    if extra_meta:
        meta.update(extra_meta)
    model = Model(arch, params, dsp_config, input_mean=mean, input_std=std, train_meta=meta)
    return model, trace


def _checksum(doc):
    payload = {k: v for k, v in doc.items() if k != "checksum_sha256"}
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def save_model(model, path):
    """Write the model as a self-describing JSON document.

    Parameters are stored in single precision as base-16 of the raw
    little-endian float32 bytes; loading returns exactly those float32
    values widened back to float64.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "architecture": model.arch.to_dict(),
        "parameter_layout": [f"{name}:{'x'.join(map(str, shape))}" for name, shape in model.arch.layout()],
        "parameters_hex": model.params.astype("<f4").tobytes().hex(),
        "dsp": model.dsp_config.to_dict(),
        "standardize": None
        if model.input_mean is None
        else {"mean": model.input_mean.tolist(), "std": model.input_std.tolist()},
        "train_meta": model.train_meta,
    }
    doc["checksum_sha256"] = _checksum(doc)
    path.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_model(path):
    """Read a model file back; checksum and version are verified."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: not a valid model document ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise CorruptFile(f"{path}: not a {MODEL_FORMAT} document")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: format version {doc.get('format_version')} "
            f"(this build reads version {MODEL_FORMAT_VERSION})"
        )
    if doc.get("checksum_sha256") != _checksum(doc):
        raise CorruptFile(f"{path}: checksum mismatch")
    try:
        arch = Architecture.from_dict(doc["architecture"])
        params = np.frombuffer(bytes.fromhex(doc["parameters_hex"]), dtype="<f4").astype(np.float64)
        dsp_config = DspConfig.from_dict(doc["dsp"])
        stats = doc["standardize"]
        meta = doc["train_meta"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: malformed field ({exc})") from exc
    if params.size != arch.param_count:
        raise CorruptFile(f"{path}: parameter count {params.size} != {arch.param_count}")
    mean = std = None
    if stats is not None:
        mean = np.asarray(stats["mean"], dtype=np.float64)
        std = np.asarray(stats["std"], dtype=np.float64)
    return Model(arch, params, dsp_config, input_mean=mean, input_std=std, train_meta=meta)
