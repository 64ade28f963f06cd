"""Small numpy networks: base classifier, noise generator, losses and PGD.

Gradients are computed by explicit reverse-mode passes over cached
activations. Noise enters training through the reparameterisation
``eps = mean(x) + scale(x) * xi`` with ``xi`` drawn from the counter-based
stream, so every loss is a deterministic function of the parameters.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .certify import BaseClassifier
from .core import (
    ConfigError,
    DimensionMismatch,
    DivergenceDetected,
    Family,
    NoiseSpec,
    RandomStream,
    check_label,
    rng_stream,
)

NEGATIVE_SLOPE = 0.01
SCHEMA_VERSION = 1
TRAIN_STREAM_BASE = 1 << 40


def leaky_relu(z):
    return np.where(z > 0, z, NEGATIVE_SLOPE * z)


def leaky_relu_grad(z):
    return np.where(z > 0, 1.0, NEGATIVE_SLOPE)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class Mlp(BaseClassifier):
    """Dense network with leaky-ReLU between layers.

    ``final_activation`` applies the nonlinearity after the last layer too
    (used for the generator trunk). Weights are stored (in, out).
    """

    def __init__(self, layer_dims: Sequence[int], weights, biases, final_activation: bool = False):
        self.layer_dims = [int(d) for d in layer_dims]
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise DimensionMismatch("layer_dims needs >= 2 positive entries")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[i], self.layer_dims[i + 1]) or b.shape != (self.layer_dims[i + 1],):
                raise DimensionMismatch(f"layer {i} parameter shapes do not match layer_dims")
        self.final_activation = final_activation

    @classmethod
    def create(cls, layer_dims, seed: int = 0, final_activation: bool = False) -> "Mlp":
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            ws.append(rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in))
            bs.append(np.zeros(fan_out))
        return cls(layer_dims, ws, bs, final_activation)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "Mlp":
        return Mlp(self.layer_dims, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.final_activation)

    def forward(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.input_dim:
            raise DimensionMismatch(f"expected input dim {self.input_dim}, got {X.shape[-1]}")
        inputs, pre = [], []
        h = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            h = leaky_relu(z) if (i < last or self.final_activation) else z
        return h, (inputs, pre)

    def backward(self, cache, dout):
        """Returns (grads aligned with ``params()``, gradient w.r.t. the input)."""
        inputs, pre = cache
        last = len(self.weights) - 1
        grads = [None] * (2 * len(self.weights))
        d = dout
        for i in range(last, -1, -1):
            if i < last or self.final_activation:
                d = d * leaky_relu_grad(pre[i])
            grads[2 * i] = inputs[i].T @ d
            grads[2 * i + 1] = d.sum(axis=0)
            d = d @ self.weights[i].T
        return grads, d

    def scores_batch(self, X):
        return self.forward(X)[0]

    def input_gradient(self, X, Y) -> np.ndarray:
        """d/dX of the summed cross-entropy of labels Y."""
        logits, cache = self.forward(X)
        p = np.exp(log_softmax(logits))
        p[np.arange(len(Y)), Y] -= 1.0
        return self.backward(cache, p)[1]

    def to_dict(self) -> dict:
        return {
            "layer_dims": self.layer_dims,
            "final_activation": self.final_activation,
            "weights": [w.reshape(-1).tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        dims = d["layer_dims"]
        ws = [np.array(w).reshape(dims[i], dims[i + 1]) for i, w in enumerate(d["weights"])]
        return cls(dims, ws, d["biases"], d.get("final_activation", False))


def forward_scores(f: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != f.input_dim:
        raise DimensionMismatch(f"expected a vector of dim {f.input_dim}")
    return f.forward(x[None, :])[0][0]


class NoiseGenNet:
    """Trunk MLP followed by sigmoid-bounded mean and scale heads."""

    def __init__(self, trunk: Mlp, mean_head, scale_head, mean_bound: float = 1.0,
                 scale_range: tuple[float, float] = (0.05, 4.0), family: Family = Family.GAUSSIAN):
        lo, hi = scale_range
        if not (mean_bound > 0 and 0 < lo < hi):
            raise ConfigError("need mean_bound > 0 and 0 < scale_lo < scale_hi")
        self.trunk = trunk
        self.mean_w, self.mean_b = (np.array(a, dtype=np.float64) for a in mean_head)
        self.scale_w, self.scale_b = (np.array(a, dtype=np.float64) for a in scale_head)
        self.mean_bound = float(mean_bound)
        self.scale_range = (float(lo), float(hi))
        self.family = Family(family)

    @classmethod
    def create(cls, input_dim: int, hidden: int = 32, depth: int = 4, seed: int = 0,
               mean_bound: float = 1.0, scale_range=(0.05, 4.0), init_scale: float = 0.5,
               family: Family = Family.GAUSSIAN) -> "NoiseGenNet":
        trunk = Mlp.create([input_dim] + [hidden] * depth, seed, final_activation=True)
        rng = np.random.default_rng([seed, 1])
        lo, hi = scale_range
        if not lo < init_scale < hi:
            raise ConfigError("init_scale must lie strictly inside scale_range")
        frac = (init_scale - lo) / (hi - lo)
        mean_head = (rng.standard_normal((hidden, input_dim)) * 0.01, np.zeros(input_dim))
        scale_head = (rng.standard_normal((hidden, input_dim)) * 0.01,
                      np.full(input_dim, math.log(frac / (1.0 - frac))))
        return cls(trunk, mean_head, scale_head, mean_bound, scale_range, family)

    @property
    def input_dim(self) -> int:
        return self.trunk.input_dim

    def params(self) -> list[np.ndarray]:
        return self.trunk.params() + [self.mean_w, self.mean_b, self.scale_w, self.scale_b]

    def copy(self) -> "NoiseGenNet":
        return NoiseGenNet(self.trunk.copy(), (self.mean_w.copy(), self.mean_b.copy()),
                           (self.scale_w.copy(), self.scale_b.copy()), self.mean_bound,
                           self.scale_range, self.family)

    def forward(self, X):
        h, tcache = self.trunk.forward(X)
        sm = sigmoid(h @ self.mean_w + self.mean_b)
        ss = sigmoid(h @ self.scale_w + self.scale_b)
        lo, hi = self.scale_range
        mean = self.mean_bound * (2.0 * sm - 1.0)
        scale = lo + (hi - lo) * ss
        return mean, scale, (tcache, h, sm, ss)

    def backward(self, cache, dmean, dscale) -> list[np.ndarray]:
        tcache, h, sm, ss = cache
        lo, hi = self.scale_range
        da = dmean * (2.0 * self.mean_bound) * sm * (1.0 - sm)
        db = dscale * (hi - lo) * ss * (1.0 - ss)
        dh = da @ self.mean_w.T + db @ self.scale_w.T
        tgrads, _ = self.trunk.backward(tcache, dh)
        return tgrads + [h.T @ da, da.sum(axis=0), h.T @ db, db.sum(axis=0)]

    def noise_spec(self, x) -> NoiseSpec:
        mean, scale, _ = self.forward(np.asarray(x, dtype=np.float64)[None, :])
        return NoiseSpec(self.family, mean[0], scale[0])

    def to_dict(self) -> dict:
        return {
            "trunk": self.trunk.to_dict(),
            "mean_head": [self.mean_w.reshape(-1).tolist(), self.mean_b.tolist()],
            "scale_head": [self.scale_w.reshape(-1).tolist(), self.scale_b.tolist()],
            "bounds": {"mean_bound": self.mean_bound, "scale_range": list(self.scale_range)},
            "family": self.family.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseGenNet":
        trunk = Mlp.from_dict(d["trunk"])
        hidden, dim = trunk.layer_dims[-1], trunk.layer_dims[0]
        mw, mb = d["mean_head"]
        sw, sb = d["scale_head"]
        return cls(trunk, (np.array(mw).reshape(hidden, dim), mb), (np.array(sw).reshape(hidden, dim), sb),
                   d["bounds"]["mean_bound"], tuple(d["bounds"]["scale_range"]), d.get("family", "gaussian"))


NoiseSource = Union[NoiseGenNet, NoiseSpec]


@dataclass(frozen=True)
class TrainConfig:
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 0.01)
    sigma_target: float = 0.5
    samples_per_input: int = 5
    learning_rate: float = 0.05
    epochs: int = 30
    batch: int = 32
    seed: int = 0

    def __post_init__(self):
        ws = tuple(float(w) for w in self.loss_weights)
        if len(ws) != 3 or min(ws) < 0:
            raise ConfigError("loss_weights must be three non-negative reals")
        object.__setattr__(self, "loss_weights", ws)
        if not self.sigma_target > 0:
            raise ConfigError("sigma_target must be > 0")
        if self.samples_per_input < 1 or self.epochs < 1 or self.batch < 1:
            raise ConfigError("samples_per_input, epochs and batch must be positive")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")

    def check_generator(self, g: Optional[NoiseGenNet]) -> None:
        if max(self.loss_weights) <= 0:
            raise ConfigError("at least one loss weight must be positive")
        if isinstance(g, NoiseGenNet):
            lo, hi = g.scale_range
            if not lo <= self.sigma_target <= hi:
                raise ConfigError("sigma_target must lie inside the generator's scale_range")


def _noise_params(g: NoiseSource, X):
    if isinstance(g, NoiseGenNet):
        return g.forward(X)
    mean = np.broadcast_to(g.mean, X.shape)
    scale = np.broadcast_to(g.scale, X.shape)
    return mean, scale, None


def _family(g: NoiseSource) -> Family:
    return g.family


def smoothing_loss(f: Mlp, g: NoiseSource, x, y: int, samples: int, stream: RandomStream,
                   start: int = 0) -> float:
    """Mean cross-entropy of f at x + eps over ``samples`` noise draws."""
    x = np.asarray(x, dtype=np.float64)[None, :]
    y = check_label(y, f.num_classes)
    mean, scale, _ = _noise_params(g, x)
    xi = stream.base_draws(_family(g), samples, x.shape[1], start)
    logits = f.forward(x + mean + scale * xi)[0]
    return float(-log_softmax(logits)[:, y].mean())


def variance_loss(g: NoiseSource, x, sigma_target: float) -> float:
    """|min scale - sigma_target| / sigma_target."""
    _, scale, _ = _noise_params(g, np.asarray(x, dtype=np.float64)[None, :])
    return abs((float(scale.min()) - sigma_target) / sigma_target)


def mean_loss(g: NoiseSource, x) -> float:
    mean, _, _ = _noise_params(g, np.asarray(x, dtype=np.float64)[None, :])
    return float(np.sqrt(np.sum(mean[0] ** 2)))


@dataclass
class LossResult:
    total: float
    smoothing: float
    variance: float
    mean: float
    grads_f: list
    grads_g: list = field(default_factory=list)


def total_loss_and_grads(f: Mlp, g: NoiseSource, X, Y, cfg: TrainConfig, stream: RandomStream,
                         start: int = 0) -> LossResult:
    """Batch-mean weighted loss and its exact gradient for both networks.

    Draw ``s`` of example ``i`` uses sample index ``start + i * S + s``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0 or len(X) != len(Y):
        raise DimensionMismatch("need a non-empty (B, d) batch with B labels")
    B, d = X.shape
    S = cfg.samples_per_input
    ws, wv, wm = cfg.loss_weights
    s0 = cfg.sigma_target

    mean, scale, gcache = _noise_params(g, X)
    xi = stream.base_draws(_family(g), B * S, d, start).reshape(B, S, d)
    Z = (X + mean)[:, None, :] + scale[:, None, :] * xi
    logits, fcache = f.forward(Z.reshape(B * S, d))
    logp = log_softmax(logits)
    rows = np.arange(B * S)
    Yrep = np.repeat(Y, S)
    ls = float(-logp[rows, Yrep].mean())

    min_idx = np.argmin(scale, axis=1)
    min_val = scale[np.arange(B), min_idx]
    lv_each = np.abs((min_val - s0) / s0)
    norms = np.sqrt(np.sum(mean**2, axis=1))
    lv, lm = float(lv_each.mean()), float(norms.mean())
    total = ws * ls + wv * lv + wm * lm

    dlogits = np.exp(logp)
    dlogits[rows, Yrep] -= 1.0
    dlogits *= ws / (B * S)
    grads_f, dZ = f.backward(fcache, dlogits)

    grads_g = []
    if isinstance(g, NoiseGenNet):
        dZ = dZ.reshape(B, S, d)
        dmean = dZ.sum(axis=1)
        dscale = (dZ * xi).sum(axis=1)
        # subgradient 0 at the kink
        dscale[np.arange(B), min_idx] += wv / B * np.sign(min_val - s0) / s0
        safe = np.where(norms > 0, norms, 1.0)
        dmean += wm / B * np.where(norms[:, None] > 0, mean / safe[:, None], 0.0)
        grads_g = g.backward(gcache, dmean, dscale)
    return LossResult(total, ls, lv, lm, grads_f, grads_g)


@dataclass
class TrainResult:
    f: Mlp
    g: Optional[NoiseSource]
    trace: list[dict]


def _sgd(params, grads, lr):
    for p, gr in zip(params, grads):
        with np.errstate(over="ignore", invalid="ignore"):
            p -= lr * gr
        if not np.all(np.isfinite(p)):
            raise DivergenceDetected("non-finite parameter after update")


def train(f: Mlp, g: NoiseSource, X, Y, cfg: TrainConfig) -> TrainResult:
    """Plain minibatch SGD over both networks; returns per-epoch mean losses.

    A fixed ``NoiseSpec`` in place of ``g`` trains the classifier alone under
    that noise (the isotropic baseline).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.int64)
    if len(X) == 0 or len(X) != len(Y):
        raise DimensionMismatch("dataset must be non-empty with one label per input")
    cfg.check_generator(g if isinstance(g, NoiseGenNet) else None)
    f = f.copy()
    g = g.copy() if isinstance(g, NoiseGenNet) else g
    order_rng = np.random.default_rng(cfg.seed)
    S = cfg.samples_per_input
    trace = []
    for epoch in range(cfg.epochs):
        stream = rng_stream(cfg.seed, TRAIN_STREAM_BASE + epoch)
        perm = order_rng.permutation(len(X))
        sums = np.zeros(4)
        for b0 in range(0, len(X), cfg.batch):
            idx = perm[b0:b0 + cfg.batch]
            res = total_loss_and_grads(f, g, X[idx], Y[idx], cfg, stream, start=b0 * S)
            parts = np.array([res.total, res.smoothing, res.variance, res.mean])
            if not np.all(np.isfinite(parts)):
                raise DivergenceDetected(f"non-finite loss at epoch {epoch}")
            sums += parts * len(idx)
            _sgd(f.params(), res.grads_f, cfg.learning_rate)
            if res.grads_g:
                _sgd(g.params(), res.grads_g, cfg.learning_rate)
        t, s, v, m = sums / len(X)
        trace.append({"epoch": epoch, "total": float(t), "smoothing": float(s), "variance": float(v),
                      "mean": float(m)})
    return TrainResult(f, g, trace)


def pgd_attack(f: Mlp, x, y, eps_inf: float, iters: int = 10, step: Optional[float] = None,
               clip: Optional[tuple[float, float]] = None) -> np.ndarray:
    """l-inf PGD on the cross-entropy of f, starting at x; accepts one input or a batch."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    Y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if eps_inf < 0 or iters < 1:
        raise ConfigError("eps_inf must be >= 0 and iters >= 1")
    step = eps_inf / 4.0 if step is None else float(step)
    lo, hi = clip if clip is not None else (-np.inf, np.inf)
    adv = X.copy()
    for _ in range(iters):
        grad = f.input_gradient(adv, Y)
        adv = adv + step * np.sign(grad)
        adv = np.clip(adv, X - eps_inf, X + eps_inf)
        adv = np.clip(adv, lo, hi)
    return adv[0] if single else adv


def save_checkpoint(path, model: Union[Mlp, NoiseGenNet], seed: int = 0) -> None:
    kind = "mlp" if isinstance(model, Mlp) else "noisegen"
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "seed": int(seed), "model": model.to_dict()}
    if kind == "mlp":
        doc["layer_dims"] = model.layer_dims
    else:
        doc["layer_dims"] = model.trunk.layer_dims
        doc["bounds"] = model.to_dict()["bounds"]
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> Union[Mlp, NoiseGenNet]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported checkpoint schema_version {doc.get('schema_version')!r}")
    if doc["kind"] == "mlp":
        return Mlp.from_dict(doc["model"])
    if doc["kind"] == "noisegen":
        return NoiseGenNet.from_dict(doc["model"])
    raise ConfigError(f"unknown checkpoint kind {doc['kind']!r}")


def train_config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
