"""From-scratch classifiers: a dense MLP for privileged features and a
permutation-invariant point-set network for segmented clouds.

Both produce a probability via a sigmoid and train with binary cross
entropy. Everything is plain numpy with hand-written backprop so gradients
can be verified against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ShapeError

PROB_FLOOR = 1e-7


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _clip_prob(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    p = _clip_prob(np.asarray(probs, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _init_layer(rng, fan_in, fan_out, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = rng.uniform(-bound, bound, size=fan_out)
    return w.astype(dtype), b.astype(dtype)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    optimizer: str = "adam"  # or "sgd"
    seed: int = 0
    balance: bool = False  # oversample the rarer class per epoch

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate, epochs, batch_size must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer}")


class MlpModel:
    """Fully connected rectifier net with a scalar sigmoid output.

    `input_mask` carries the active privileged dimensions the model was
    trained with; inactive inputs are zeroed on every forward pass.
    """

    kind = "mlp"

    def __init__(self, input_dim=30, hidden=(256, 256, 256), seed=0, dtype=np.float64):
        rng = np.random.default_rng(seed)
        sizes = [input_dim] + list(hidden) + [1]
        self.dtype = np.dtype(dtype)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w, b = _init_layer(rng, fan_in, fan_out, self.dtype)
            self.weights.append(w)
            self.biases.append(b)
        self.input_mask: np.ndarray | None = None

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def params(self):
        return self.weights + self.biases

    def _prepare(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=self.dtype))
        if x.shape[1] != self.input_dim:
            raise ShapeError(f"expected input width {self.input_dim}, got {x.shape[1]}")
        if self.input_mask is not None:
            x = np.where(self.input_mask, x, 0.0).astype(self.dtype)
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._prepare(x)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            x = np.maximum(x @ w + b, 0.0)
        z = x @ self.weights[-1] + self.biases[-1]
        return _clip_prob(_sigmoid(z[:, 0].astype(np.float64)))

    def _forward_cache(self, x: np.ndarray):
        x = self._prepare(x)
        acts = [x]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            acts.append(np.maximum(acts[-1] @ w + b, 0.0))
        z = acts[-1] @ self.weights[-1] + self.biases[-1]
        probs = _clip_prob(_sigmoid(z[:, 0].astype(np.float64)))
        return acts, probs

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray):
        """Mean BCE and gradients in the same order as params()."""
        acts, probs = self._forward_cache(x)
        y = np.asarray(labels, dtype=np.float64)
        n = len(y)
        loss = bce_loss(probs, y)
        # d(mean BCE)/dz for a sigmoid output
        delta = ((probs - y) / n).astype(self.dtype)[:, None]
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        grads_w[-1] = acts[-1].T @ delta
        grads_b[-1] = delta.sum(axis=0)
        upstream = delta @ self.weights[-1].T
        for i in range(len(self.weights) - 2, -1, -1):
            upstream = upstream * (acts[i + 1] > 0)
            grads_w[i] = acts[i].T @ upstream
            grads_b[i] = upstream.sum(axis=0)
            if i > 0:
                upstream = upstream @ self.weights[i].T
        return loss, grads_w + grads_b


# Fixed per-channel standardization for camera-frame clouds: centers the
# typical viewing distance and maps the segment channel to +-1. Constant, so
# permutation and duplication invariance are untouched.
DEFAULT_INPUT_OFFSET = (0.0, 0.0, 1.25, 0.5)
DEFAULT_INPUT_SCALE = (0.5, 0.5, 0.5, 0.5)

# Scales for the derived per-point channels: offsets from the point's own
# object center (shape detail) and that center itself (scene placement).
_SHAPE_SCALE = 0.05
_CENTER_OFFSET = (0.0, 0.0, 1.25)
_CENTER_SCALE = 0.3


def _relational_channels(clouds: np.ndarray) -> np.ndarray:
    """(B, M, 4) xyz+segment -> (B, M, 7) derived per-point features.

    Each point is re-expressed as [offset from its own object's bounding-box
    center, that center, segment +-1]. Box centers are (min+max)/2 over the
    point's segment, so the transform is exactly invariant to point order
    and to duplicated points, unlike a centroid.
    """
    xyz = clouds[..., :3]
    seg = clouds[..., 3:4]
    is_moving = seg > 0.5
    big = np.array(np.inf, dtype=clouds.dtype)
    centers = []
    for mask in (~is_moving, is_moving):
        lo = np.min(np.where(mask, xyz, big), axis=1, keepdims=True)
        hi = np.max(np.where(mask, xyz, -big), axis=1, keepdims=True)
        centers.append(0.5 * (lo + hi))
    own = np.where(is_moving[..., None][..., 0], centers[1], centers[0])
    out = np.empty(clouds.shape[:-1] + (7,), dtype=clouds.dtype)
    out[..., 0:3] = (xyz - own) / _SHAPE_SCALE
    out[..., 3:6] = (own - np.asarray(_CENTER_OFFSET, dtype=clouds.dtype)) / _CENTER_SCALE
    out[..., 6] = (seg[..., 0] - 0.5) / 0.5
    return out


_LN_EPS = 1e-5


class PointSetModel:
    """Shared per-point encoder, max pool over all points, dense head.

    Encoder stages are linear -> per-point feature normalization (learned
    gain/shift) -> rectifier, as in the standard point-set classifier this
    follows. All per-point ops plus the max pool make the output exactly
    invariant to point order and to duplicated points. Pool ties route
    their subgradient to the first maximal point (numpy argmax order).
    """

    kind = "pointset"

    def __init__(
        self,
        point_dim=4,
        encoder=(64, 128, 256),
        head=(128,),
        seed=0,
        dtype=np.float64,
        relational_features=None,
        input_offset=None,
        input_scale=None,
    ):
        rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)
        self.point_dim = point_dim
        # xyz+segment clouds get the object-relative featurization by default
        self.relational_features = (
            point_dim == 4 if relational_features is None else relational_features
        )
        if input_offset is None:
            input_offset = DEFAULT_INPUT_OFFSET if point_dim == 4 else (0.0,) * point_dim
        if input_scale is None:
            input_scale = DEFAULT_INPUT_SCALE if point_dim == 4 else (1.0,) * point_dim
        self.input_offset = np.asarray(input_offset, dtype=self.dtype)
        self.input_scale = np.asarray(input_scale, dtype=self.dtype)
        in_width = 7 if self.relational_features else point_dim
        self.enc_w, self.enc_b, self.enc_gain, self.enc_shift = [], [], [], []
        sizes = [in_width] + list(encoder)
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w, b = _init_layer(rng, fan_in, fan_out, self.dtype)
            self.enc_w.append(w)
            self.enc_b.append(b)
            self.enc_gain.append(np.ones(fan_out, dtype=self.dtype))
            self.enc_shift.append(np.zeros(fan_out, dtype=self.dtype))
        self.head_w, self.head_b = [], []
        sizes = [encoder[-1]] + list(head) + [1]
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w, b = _init_layer(rng, fan_in, fan_out, self.dtype)
            self.head_w.append(w)
            self.head_b.append(b)
        self.input_mask = None  # parity with MlpModel serialization

    def params(self):
        return (
            self.enc_w
            + self.head_w
            + self.enc_b
            + self.head_b
            + self.enc_gain
            + self.enc_shift
        )

    def _prepare(self, clouds: np.ndarray) -> np.ndarray:
        clouds = np.asarray(clouds, dtype=self.dtype)
        if clouds.ndim == 2:
            clouds = clouds[None]
        if clouds.ndim != 3 or clouds.shape[2] != self.point_dim:
            raise ShapeError(
                f"expected clouds (B, M, {self.point_dim}), got {clouds.shape}"
            )
        if self.relational_features:
            return _relational_channels(clouds)
        return (clouds - self.input_offset) / self.input_scale

    def _forward_cache(self, clouds: np.ndarray):
        clouds = self._prepare(clouds)
        batch, m, d = clouds.shape
        acts = [clouds.reshape(batch * m, d)]
        norm_cache = []
        for w, b, g, s in zip(self.enc_w, self.enc_b, self.enc_gain, self.enc_shift):
            z = acts[-1] @ w
            z += b
            mu = z.mean(axis=1, keepdims=True)
            z -= mu
            var = np.einsum("ij,ij->i", z, z) / z.shape[1]
            inv = 1.0 / np.sqrt(var + _LN_EPS)[:, None]
            xhat = z
            xhat *= inv
            norm_cache.append((xhat, inv))
            acts.append(np.maximum(g * xhat + s, 0.0))
        feats = acts[-1].reshape(batch, m, -1)
        pool_idx = feats.argmax(axis=1)
        pooled = np.take_along_axis(feats, pool_idx[:, None, :], axis=1)[:, 0, :]
        head_acts = [pooled]
        for w, b in zip(self.head_w[:-1], self.head_b[:-1]):
            head_acts.append(np.maximum(head_acts[-1] @ w + b, 0.0))
        z = head_acts[-1] @ self.head_w[-1] + self.head_b[-1]
        probs = _clip_prob(_sigmoid(z[:, 0].astype(np.float64)))
        return clouds, acts, norm_cache, pool_idx, head_acts, probs

    def forward(self, clouds: np.ndarray) -> np.ndarray:
        return self._forward_cache(clouds)[-1]

    def loss_and_grads(self, clouds: np.ndarray, labels: np.ndarray):
        clouds, acts, norm_cache, pool_idx, head_acts, probs = self._forward_cache(clouds)
        batch, m, _ = clouds.shape
        y = np.asarray(labels, dtype=np.float64)
        loss = bce_loss(probs, y)
        delta = ((probs - y) / len(y)).astype(self.dtype)[:, None]

        grads_hw = [None] * len(self.head_w)
        grads_hb = [None] * len(self.head_b)
        grads_hw[-1] = head_acts[-1].T @ delta
        grads_hb[-1] = delta.sum(axis=0)
        upstream = delta @ self.head_w[-1].T
        for i in range(len(self.head_w) - 2, -1, -1):
            upstream = upstream * (head_acts[i + 1] > 0)
            grads_hw[i] = head_acts[i].T @ upstream
            grads_hb[i] = upstream.sum(axis=0)
            upstream = upstream @ self.head_w[i].T

        # scatter pooled gradient back to the argmax points
        feat_dim = self.enc_w[-1].shape[1]
        grad_feats = np.zeros((batch, m, feat_dim), dtype=self.dtype)
        np.put_along_axis(grad_feats, pool_idx[:, None, :], upstream[:, None, :], axis=1)
        upstream = grad_feats.reshape(batch * m, feat_dim)

        grads_ew = [None] * len(self.enc_w)
        grads_eb = [None] * len(self.enc_b)
        grads_eg = [None] * len(self.enc_gain)
        grads_es = [None] * len(self.enc_shift)
        for i in range(len(self.enc_w) - 1, -1, -1):
            xhat, inv = norm_cache[i]
            dpost = upstream * (acts[i + 1] > 0)
            grads_eg[i] = np.einsum("ij,ij->j", dpost, xhat)
            grads_es[i] = dpost.sum(axis=0)
            dxhat = dpost
            dxhat *= self.enc_gain[i]
            dim = xhat.shape[1]
            mean_d = dxhat.mean(axis=1, keepdims=True)
            proj = (np.einsum("ij,ij->i", dxhat, xhat) / dim)[:, None]
            dz = dxhat
            dz -= mean_d
            dz -= xhat * proj
            dz *= inv
            grads_ew[i] = acts[i].T @ dz
            grads_eb[i] = dz.sum(axis=0)
            if i > 0:
                upstream = dz @ self.enc_w[i].T
        return loss, grads_ew + grads_hw + grads_eb + grads_hb + grads_eg + grads_es


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------


def _epoch_order(labels, cfg: TrainConfig, rng) -> np.ndarray:
    n = len(labels)
    if not cfg.balance:
        return rng.permutation(n)
    # 50/50 epoch of ~n samples: subsample the common class (fresh each
    # epoch) and oversample the rare one with replacement
    pos = np.flatnonzero(labels > 0.5)
    neg = np.flatnonzero(labels <= 0.5)
    if len(pos) == 0 or len(neg) == 0:
        return rng.permutation(n)
    rare, common = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    half = max(len(rare), n // 2)
    common_take = common[rng.permutation(len(common))[:half]]
    rare_take = rare[rng.integers(0, len(rare), half)]
    order = np.concatenate([common_take, rare_take])
    return order[rng.permutation(len(order))]


def train_classifier(model, inputs, labels, cfg: TrainConfig):
    """Minibatch BCE training; returns (model, per-epoch mean loss).

    Deterministic for a fixed (seed, data, config). The model is retrained
    in place from its current weights. With cfg.balance the rarer class is
    oversampled so every epoch is roughly class-balanced.
    """
    inputs = np.asarray(inputs)
    labels = np.asarray(labels, dtype=np.float64)
    if len(inputs) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(cfg.seed)
    params = model.params()
    if cfg.optimizer == "adam":
        m_slots = [np.zeros_like(p) for p in params]
        v_slots = [np.zeros_like(p) for p in params]
        step = 0
    history = []
    n = len(inputs)
    for _ in range(cfg.epochs):
        order = _epoch_order(labels, cfg, rng)
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            take = order[start : start + cfg.batch_size]
            loss, grads = model.loss_and_grads(inputs[take], labels[take])
            if not np.isfinite(loss):
                raise DivergenceError(f"training loss became {loss}")
            epoch_loss += loss * len(take)
            if cfg.optimizer == "adam":
                step += 1
                b1, b2, eps = 0.9, 0.999, 1e-8
                scale = np.sqrt(1.0 - b2**step) / (1.0 - b1**step)
                for p, g, ms, vs in zip(params, grads, m_slots, v_slots):
                    ms += (1.0 - b1) * (g - ms)
                    vs += (1.0 - b2) * (g * g - vs)
                    p -= cfg.learning_rate * scale * ms / (np.sqrt(vs) + eps)
            else:
                for p, g in zip(params, grads):
                    p -= cfg.learning_rate * g
        history.append(epoch_loss / len(order))
    return model, history


def gradient_check(model, inputs, labels, step: float = 1e-5) -> float:
    """Worst relative error between analytic and central-difference grads.

    Relative error uses max(|analytic|, |numeric|, 1e-3) as denominator so
    near-zero components are compared absolutely.
    """
    _, grads = model.loss_and_grads(inputs, labels)
    worst = 0.0
    for p, g in zip(model.params(), grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g, dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lo_plus, _ = model.loss_and_grads(inputs, labels)
            flat[i] = orig - step
            lo_minus, _ = model.loss_and_grads(inputs, labels)
            flat[i] = orig
            numeric = (lo_plus - lo_minus) / (2.0 * step)
            denom = max(abs(gflat[i]), abs(numeric), 1e-3)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


# --------------------------------------------------------------------------
# Serialization: JSON with exact float64 round trip
# --------------------------------------------------------------------------


def model_to_json(model) -> str:
    if isinstance(model, MlpModel):
        doc = {
            "kind": "mlp",
            "dtype": model.dtype.name,
            "hidden": [w.shape[1] for w in model.weights[:-1]],
            "input_dim": model.input_dim,
            "weights": [w.astype(np.float64).tolist() for w in model.weights],
            "biases": [b.astype(np.float64).tolist() for b in model.biases],
            "input_mask": None
            if model.input_mask is None
            else [bool(v) for v in model.input_mask],
        }
    elif isinstance(model, PointSetModel):
        doc = {
            "kind": "pointset",
            "dtype": model.dtype.name,
            "point_dim": model.point_dim,
            "relational_features": model.relational_features,
            "encoder": [w.shape[1] for w in model.enc_w],
            "head": [w.shape[1] for w in model.head_w[:-1]],
            "input_offset": model.input_offset.astype(np.float64).tolist(),
            "input_scale": model.input_scale.astype(np.float64).tolist(),
            "enc_w": [w.astype(np.float64).tolist() for w in model.enc_w],
            "enc_b": [b.astype(np.float64).tolist() for b in model.enc_b],
            "enc_gain": [g.astype(np.float64).tolist() for g in model.enc_gain],
            "enc_shift": [s.astype(np.float64).tolist() for s in model.enc_shift],
            "head_w": [w.astype(np.float64).tolist() for w in model.head_w],
            "head_b": [b.astype(np.float64).tolist() for b in model.head_b],
        }
    else:
        raise TypeError(f"cannot serialize {type(model)}")
    return json.dumps(doc)


def model_from_json(text: str):
    doc = json.loads(text)
    dtype = np.dtype(doc["dtype"])
    if doc["kind"] == "mlp":
        model = MlpModel(input_dim=doc["input_dim"], hidden=tuple(doc["hidden"]), dtype=dtype)
        model.weights = [np.array(w, dtype=np.float64).astype(dtype) for w in doc["weights"]]
        model.biases = [np.array(b, dtype=np.float64).astype(dtype) for b in doc["biases"]]
        if doc["input_mask"] is not None:
            model.input_mask = np.array(doc["input_mask"], dtype=bool)
        return model
    if doc["kind"] == "pointset":
        model = PointSetModel(
            point_dim=doc["point_dim"],
            encoder=tuple(doc["encoder"]),
            head=tuple(doc["head"]),
            dtype=dtype,
            relational_features=doc["relational_features"],
            input_offset=np.array(doc["input_offset"], dtype=np.float64),
            input_scale=np.array(doc["input_scale"], dtype=np.float64),
        )
        model.enc_w = [np.array(w, dtype=np.float64).astype(dtype) for w in doc["enc_w"]]
        model.enc_b = [np.array(b, dtype=np.float64).astype(dtype) for b in doc["enc_b"]]
        model.enc_gain = [np.array(g, dtype=np.float64).astype(dtype) for g in doc["enc_gain"]]
        model.enc_shift = [np.array(s, dtype=np.float64).astype(dtype) for s in doc["enc_shift"]]
        model.head_w = [np.array(w, dtype=np.float64).astype(dtype) for w in doc["head_w"]]
        model.head_b = [np.array(b, dtype=np.float64).astype(dtype) for b in doc["head_b"]]
        return model
    raise ValueError(f"unknown model kind {doc['kind']}")
