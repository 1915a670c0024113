"""Feed-forward bit detector trained with Adam on an MSE loss.

Layers are fully connected, ReLU on the hidden layers and a sigmoid on the
output. All weights and biases live in one flat float64 buffer; per-layer
``W`` (shape ``(out, in)``) and ``b`` arrays are views into it, which keeps the
Adam update to a handful of vector operations per step.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from goqsm.codec import Scheme, SmConfig, spectral_efficiency
from goqsm.detect import EqualizedSymbol

log = logging.getLogger(__name__)

# (S1, S2, S3) per spectral efficiency in bits/s/Hz
HIDDEN_SIZES = {3: (30, 36, 16), 4: (30, 36, 17), 5: (30, 36, 18)}


def layer_sizes_for(config: SmConfig) -> tuple[int, ...]:
    """(K, S1, S2, S3, R) for a codec configuration."""
    se = spectral_efficiency(config)
    if se.denominator != 1 or int(se) not in HIDDEN_SIZES:
        raise ValueError(f"no hidden-layer sizes defined for {se} bits/s/Hz")
    return (2 * config.n_tx, *HIDDEN_SIZES[int(se)], config.block_bits)


def _param_count(sizes: Sequence[int]) -> int:
    return sum(o * i + o for i, o in zip(sizes[:-1], sizes[1:]))


@dataclass
class MlpNetwork:
    layer_sizes: tuple[int, ...]
    params: np.ndarray = field(repr=False)
    weights: list[np.ndarray] = field(init=False, repr=False)
    biases: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"bad layer sizes {self.layer_sizes}")
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.shape != (_param_count(self.layer_sizes),):
            raise ValueError(f"expected {_param_count(self.layer_sizes)} parameters, got {self.params.shape}")
        self.weights, self.biases = _views(self.params, self.layer_sizes)

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int]) -> "MlpNetwork":
        return cls(tuple(layer_sizes), np.zeros(_param_count(layer_sizes)))

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> "MlpNetwork":
        """He-uniform weights for ReLU layers, Xavier-uniform for the sigmoid layer, zero biases."""
        net = cls.zeros(layer_sizes)
        last = len(net.weights) - 1
        for i, w in enumerate(net.weights):
            fan_out, fan_in = w.shape
            bound = math.sqrt(6.0 / (fan_in + fan_out)) if i == last else math.sqrt(6.0 / fan_in)
            w[...] = rng.uniform(-bound, bound, size=w.shape)
        return net

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(self.layer_sizes, self.params.copy())

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]


def _views(flat: np.ndarray, sizes: Sequence[int]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases, pos = [], [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[pos : pos + n_in * n_out].reshape(n_out, n_in))
        pos += n_in * n_out
        biases.append(flat[pos : pos + n_out])
        pos += n_out
    return weights, biases


@dataclass(frozen=True)
class BitScoreVector:
    y5: np.ndarray
    g_hat: np.ndarray


def hard_decision(scores: np.ndarray) -> np.ndarray:
    return (np.asarray(scores) >= 0.5).astype(np.uint8)


def forward_batch(net: MlpNetwork, x: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer for a ``(batch, K)`` input, input included."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise ValueError(f"expected input of shape (batch, {net.n_inputs}), got {x.shape}")
    acts = [x]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w.T + b
        acts.append(expit(z) if i == last else np.maximum(z, 0.0))
    return acts


def forward(net: MlpNetwork, x) -> BitScoreVector:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    y5 = forward_batch(net, x.reshape(1, -1) if single else x)[-1]
    if single:
        y5 = y5[0]
    return BitScoreVector(y5=y5, g_hat=hard_decision(y5))


def mse_loss(scores, targets) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if scores.shape != targets.shape:
        raise ValueError(f"shape mismatch {scores.shape} vs {targets.shape}")
    return float(np.mean((scores - targets) ** 2))


def gradient(net: MlpNetwork, x: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch-mean MSE loss and its gradient as a flat array aligned with ``net.params``."""
    acts = forward_batch(net, x)
    out = acts[-1]
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != out.shape:
        raise ValueError(f"targets shape {targets.shape} does not match output {out.shape}")
    diff = out - targets
    loss = float(np.mean(diff * diff))
    grad = np.empty_like(net.params)
    g_w, g_b = _views(grad, net.layer_sizes)
    delta = (2.0 / diff.size) * diff * out * (1.0 - out)
    for i in range(len(net.weights) - 1, -1, -1):
        g_w[i][...] = delta.T @ acts[i]
        g_b[i][...] = delta.sum(axis=0)
        if i:
            delta = (delta @ net.weights[i]) * (acts[i] > 0.0)
    return loss, grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_network(cls, net: MlpNetwork, **kwargs) -> "AdamState":
        return cls(np.zeros_like(net.params), np.zeros_like(net.params), **kwargs)

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        """In-place bias-corrected Adam update of ``params``."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * grad
        self.v *= b2
        self.v += (1.0 - b2) * grad * grad
        m_hat = self.m / (1.0 - b1**self.t)
        v_hat = self.v / (1.0 - b2**self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def backward_and_step(
    net: MlpNetwork, x: np.ndarray, targets: np.ndarray, state: AdamState, lr: float
) -> tuple[MlpNetwork, float]:
    """One Adam step on a batch; returns the network (updated in place) and the pre-update loss."""
    loss, grad = gradient(net, x, targets)
    if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise FloatingPointError(f"non-finite loss/gradient at Adam step {state.t + 1} (loss={loss})")
    state.step(net.params, grad, lr)
    return net, loss


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 100
    train_set_size: int = 1_524_000
    validation_set_size: int = 635_000
    epochs: int = 10
    training_snr_db: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "train_set_size", "validation_set_size", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def scaled(self, factor: float) -> "TrainConfig":
        """Same settings with both data-set sizes divided by ``factor``."""
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            train_set_size=max(self.batch_size, int(self.train_set_size / factor)),
            validation_set_size=max(1, int(self.validation_set_size / factor)),
            epochs=self.epochs,
            training_snr_db=self.training_snr_db,
            rng_seed=self.rng_seed,
        )


class TrainingDiverged(FloatingPointError):
    pass


def evaluate_mse(net: MlpNetwork, x: np.ndarray, targets: np.ndarray, chunk: int = 65536) -> float:
    total = 0.0
    for lo in range(0, len(x), chunk):
        out = forward_batch(net, x[lo : lo + chunk])[-1]
        total += float(np.sum((out - targets[lo : lo + chunk]) ** 2))
    return total / targets.size


DataGenerator = Callable[[int, np.random.Generator], "tuple[np.ndarray, np.ndarray]"]


def train(
    net: MlpNetwork,
    data_generator: DataGenerator,
    config: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[MlpNetwork, list[dict]]:
    """Train ``net`` in place.

    ``data_generator(count, rng)`` returns ``(inputs, bits)`` of shapes
    ``(count, K)`` and ``(count, R)``. The training set is drawn once, then
    reshuffled every epoch from ``rng`` (seeded from ``config.rng_seed`` when
    not given). Returns the network and one history row per epoch.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    x_train, g_train = data_generator(config.train_set_size, rng)
    x_val, g_val = data_generator(config.validation_set_size, rng)
    g_train = g_train.astype(np.float64)
    g_val = g_val.astype(np.float64)
    state = AdamState.for_network(net)
    bs = config.batch_size
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(x_train))
        xs, gs = x_train[order], g_train[order]
        running = 0.0
        n_batches = 0
        for lo in range(0, len(xs), bs):
            try:
                _, loss = backward_and_step(net, xs[lo : lo + bs], gs[lo : lo + bs], state, config.learning_rate)
            except FloatingPointError as exc:
                raise TrainingDiverged(f"training diverged in epoch {epoch}: {exc}") from exc
            running += loss
            n_batches += 1
        row = {
            "epoch": epoch,
            "train_mse": running / n_batches,
            "val_mse": evaluate_mse(net, x_val, g_val),
        }
        log.info("epoch %d train_mse=%.6f val_mse=%.6f", epoch, row["train_mse"], row["val_mse"])
        history.append(row)
    return net, history


def ris_input(c_hat: np.ndarray) -> np.ndarray:
    """Real/imaginary separation: ``(..., N_t)`` complex -> ``(..., 2 N_t)`` real."""
    c_hat = np.asarray(c_hat)
    return np.concatenate([c_hat.real, c_hat.imag], axis=-1)


def dnn_detect_batch(net: MlpNetwork, c_hat: np.ndarray, chunk: int = 65536) -> np.ndarray:
    x = ris_input(c_hat)
    out = np.empty((len(x), net.n_outputs), dtype=np.uint8)
    for lo in range(0, len(x), chunk):
        out[lo : lo + chunk] = hard_decision(forward_batch(net, x[lo : lo + chunk])[-1])
    return out


def dnn_detect(net: MlpNetwork, eq: EqualizedSymbol) -> np.ndarray:
    c_hat = np.asarray(eq.c_hat)
    if c_hat.shape[-1] * 2 != net.n_inputs:
        raise ValueError(f"network expects {net.n_inputs // 2} branches, got {c_hat.shape[-1]}")
    if c_hat.ndim == 1:
        return dnn_detect_batch(net, c_hat[None, :])[0]
    return dnn_detect_batch(net, c_hat)


# On-disk layout (all little-endian):
#   8s magic | u32 version | u32 n_sizes | n_sizes * u32 | i64 seed | f64 training_snr_db
#   | u32 meta_len | meta_len bytes JSON | params as f64, layer by layer (W row-major, then b)
_MAGIC = b"GOQSMNN\x00"
_VERSION = 1


def save_network(path, net: MlpNetwork, seed: int, training_snr_db: float, metadata: dict | None = None) -> None:
    meta = json.dumps(metadata or {}, sort_keys=True).encode()
    sizes = net.layer_sizes
    header = struct.pack(f"<8sII{len(sizes)}IqdI", _MAGIC, _VERSION, len(sizes), *sizes, int(seed),
                         float(training_snr_db), len(meta))
    Path(path).write_bytes(header + meta + net.params.astype("<f8").tobytes())


@dataclass(frozen=True)
class SavedNetwork:
    net: MlpNetwork
    seed: int
    training_snr_db: float
    metadata: dict


def load_network(path) -> SavedNetwork:
    raw = Path(path).read_bytes()
    magic, version, n_sizes = struct.unpack_from("<8sII", raw, 0)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path} is not a version-{_VERSION} network file")
    pos = struct.calcsize("<8sII")
    sizes = struct.unpack_from(f"<{n_sizes}I", raw, pos)
    pos += 4 * n_sizes
    seed, snr, meta_len = struct.unpack_from("<qdI", raw, pos)
    pos += struct.calcsize("<qdI")
    meta = json.loads(raw[pos : pos + meta_len].decode())
    pos += meta_len
    params = np.frombuffer(raw, dtype="<f8", offset=pos)
    if params.size != _param_count(sizes):
        raise ValueError(f"{path}: parameter block has {params.size} values, expected {_param_count(sizes)}")
    return SavedNetwork(MlpNetwork(sizes, params.astype(np.float64)), seed, snr, meta)
