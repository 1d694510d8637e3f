"""Scoring network: a fully-connected regressor trained with a pairwise hinge.

Both sides of a comparison pair pass through one shared weight store (a
Siamese arrangement), and the loss penalizes the preferred side scoring
less than the other side plus a margin.  Forward pass, backpropagation,
and the Adadelta update are written out by hand on numpy arrays; no
autograd framework is involved.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .params import LayoutParams, ParamGrid, encode_value

DEFAULT_HIDDEN = (64, 64, 32, 32, 16, 8)


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 0.12
    epochs: int = 200
    learning_rate: float = 1.0
    halve_every: int = 30
    rho: float = 0.9
    eps: float = 1e-6
    batch_size: int | None = None  # None: min(128, training pairs)
    dropout: float = 0.1
    weight_decay: float = 1e-3
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if not (0.0 <= self.val_fraction < 1.0):
            raise ValueError(f"val_fraction must be in [0, 1), got {self.val_fraction}")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


def pair_loss(s_plus: float, s_minus: float, margin: float = 0.12) -> float:
    """Hinge on the score gap: zero iff the preferred score wins by >= margin."""
    return max(0.0, s_minus - s_plus + margin)


class ScoringModel:
    """Weights, biases, and the feature scaling the network was trained with."""

    def __init__(
        self,
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        feature_names: tuple[str, ...],
        feature_bounds: dict[str, tuple[float, float]],
        dropout: float = 0.0,
        train_config: TrainConfig | None = None,
    ):
        if len(weights) != len(biases):
            raise ValueError("weights/biases length mismatch")
        for i in range(len(weights) - 1):
            if weights[i].shape[1] != weights[i + 1].shape[0]:
                raise ValueError(f"layer {i} -> {i + 1} shape mismatch")
        if weights[0].shape[0] != len(feature_names):
            raise ValueError("input width does not match feature names")
        if weights[-1].shape[1] != 1:
            raise ValueError("output layer must be scalar")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.feature_names = tuple(feature_names)
        self.feature_bounds = {k: (float(lo), float(hi)) for k, (lo, hi) in feature_bounds.items()}
        self.dropout = float(dropout)
        self.train_config = train_config

    # -- construction --------------------------------------------------------

    @classmethod
    def initialized(
        cls,
        grid: ParamGrid,
        cfg: TrainConfig,
        rng: np.random.Generator,
    ) -> "ScoringModel":
        """Fresh network with fan-in-scaled uniform init, seeded."""
        names = grid.feature_names()
        sizes = [len(names), *cfg.hidden, 1]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, names, grid.feature_bounds(), cfg.dropout, cfg)

    # -- inference -----------------------------------------------------------

    def features(self, params: LayoutParams) -> np.ndarray:
        feats = []
        for name in self.feature_names:
            lo, hi = self.feature_bounds[name]
            v = encode_value(name, params.value_of(name))
            if v < lo - 1e-12 or v > hi + 1e-12:
                raise ValueError(
                    f"{name}={params.value_of(name)!r} outside model bounds [{lo}, {hi}]"
                )
            feats.append((v - lo) / (hi - lo))
        return np.asarray(feats)

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Deterministic forward pass (dropout disabled); X is (n, d)."""
        A = np.atleast_2d(np.asarray(X, dtype=np.float64))
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            A = np.maximum(0.0, A @ W + b)
        out = A @ self.weights[-1] + self.biases[-1]
        return out[:, 0]

    def score(self, params: LayoutParams) -> float:
        s = float(self.forward(self.features(params)[None, :])[0])
        if not math.isfinite(s):
            raise RuntimeError("non-finite score")
        return s

    def score_many(self, params_list) -> np.ndarray:
        X = np.stack([self.features(p) for p in params_list])
        return self.forward(X)

    # -- training internals ----------------------------------------------------

    def _forward_train(self, X: np.ndarray, rng: np.random.Generator):
        """Forward with inverted dropout; returns score, pre-activations, masked activations."""
        keep = 1.0 - self.dropout
        A = X
        acts = [X]
        zs = []
        masks = []
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            Z = A @ W + b
            H = np.maximum(0.0, Z)
            if self.dropout > 0.0:
                M = (rng.random(H.shape) < keep) / keep
                H = H * M
            else:
                M = None
            zs.append(Z)
            masks.append(M)
            acts.append(H)
            A = H
        s = (A @ self.weights[-1] + self.biases[-1])[:, 0]
        return s, zs, masks, acts

    def _backward(self, ds: np.ndarray, zs, masks, acts):
        """Gradients of sum(ds * score) w.r.t. weights and biases."""
        grads_W = [np.zeros_like(W) for W in self.weights]
        grads_b = [np.zeros_like(b) for b in self.biases]
        dA = ds[:, None]
        grads_W[-1] = acts[-1].T @ dA
        grads_b[-1] = dA.sum(axis=0)
        dH = dA @ self.weights[-1].T
        for i in range(len(self.weights) - 2, -1, -1):
            if masks[i] is not None:
                dH = dH * masks[i]
            dZ = dH * (zs[i] > 0.0)
            grads_W[i] = acts[i].T @ dZ
            grads_b[i] = dZ.sum(axis=0)
            if i > 0:
                dH = dZ @ self.weights[i].T
        return grads_W, grads_b

    def snapshot(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [W.copy() for W in self.weights], [b.copy() for b in self.biases]

    def restore(self, snap) -> None:
        weights, biases = snap
        self.weights = [W.copy() for W in weights]
        self.biases = [b.copy() for b in biases]

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "feature_names": list(self.feature_names),
            "feature_bounds": {k: [lo, hi] for k, (lo, hi) in self.feature_bounds.items()},
            "dropout": self.dropout,
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "train_config": self.train_config.to_json_dict() if self.train_config else None,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "ScoringModel":
        if d.get("version") != 1:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        cfg = d.get("train_config")
        return cls(
            weights=[np.asarray(W) for W in d["weights"]],
            biases=[np.asarray(b) for b in d["biases"]],
            feature_names=tuple(d["feature_names"]),
            feature_bounds={k: (v[0], v[1]) for k, v in d["feature_bounds"].items()},
            dropout=d.get("dropout", 0.0),
            train_config=TrainConfig.from_json_dict(cfg) if cfg else None,
        )

    @classmethod
    def load(cls, path) -> "ScoringModel":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


class _Adadelta:
    """Per-tensor accumulators; update rule follows the classic formulation."""

    def __init__(self, tensors, rho: float, eps: float):
        self.rho = rho
        self.eps = eps
        self.eg2 = [np.zeros_like(t) for t in tensors]
        self.ed2 = [np.zeros_like(t) for t in tensors]

    def step(self, tensors, grads, lr: float) -> None:
        for i, (t, g) in enumerate(zip(tensors, grads)):
            self.eg2[i] = self.rho * self.eg2[i] + (1 - self.rho) * g * g
            delta = -np.sqrt(self.ed2[i] + self.eps) / np.sqrt(self.eg2[i] + self.eps) * g
            self.ed2[i] = self.rho * self.ed2[i] + (1 - self.rho) * delta * delta
            t += lr * delta


def _pair_feature_arrays(dataset, grid: ParamGrid):
    """(X_plus, X_minus) winner/loser feature matrices for labeled pairs."""
    from .params import normalize

    Xp, Xm = [], []
    for pair in dataset.labeled:
        Xp.append(normalize(pair.winner, grid))
        Xm.append(normalize(pair.loser, grid))
    return np.stack(Xp), np.stack(Xm)


def train(
    dataset,
    grid: ParamGrid,
    cfg: TrainConfig | None = None,
) -> tuple[ScoringModel, dict]:
    """Train the scoring network on labeled pairs; returns (model, history).

    Data splits 80/20 into train/validation.  Each step scores both pair
    sides through the shared weights (independent dropout masks per
    side), applies the hinge, and backpropagates through both branches.
    Adadelta updates with the learning rate halved every 30 epochs.  The
    returned model carries the weights with the best validation loss.
    """
    cfg = cfg or TrainConfig()
    labeled = dataset.labeled
    if not labeled:
        raise ValueError("dataset has no labeled pairs")
    Xp, Xm = _pair_feature_arrays(dataset, grid)
    n = len(labeled)

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = int(round(cfg.val_fraction * n))
    val_idx = perm[:n_val]
    train_idx = perm[n_val:]
    if len(train_idx) == 0:
        raise ValueError("no training pairs left after validation split")
    if n_val == 0:
        val_idx = train_idx  # tiny datasets validate on train

    batch = cfg.batch_size
    if batch is None:
        batch = min(128, len(train_idx))
    if len(train_idx) < batch:
        raise ValueError(
            f"dataset too small: {len(train_idx)} training pairs < batch size {batch}"
        )

    model = ScoringModel.initialized(grid, cfg, rng)
    opt = _Adadelta(model.weights + model.biases, cfg.rho, cfg.eps)

    def eval_loss(idx) -> float:
        sp = model.forward(Xp[idx])
        sm = model.forward(Xm[idx])
        return float(np.mean(np.maximum(0.0, sm - sp + cfg.margin)))

    history = {"train_loss": [], "val_loss": []}
    best_val = math.inf
    best_snap = model.snapshot()
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * 0.5 ** (epoch // cfg.halve_every)
        order = rng.permutation(len(train_idx))
        epoch_losses = []
        for start in range(0, len(order), batch):
            idx = train_idx[order[start : start + batch]]
            sp, zs_p, masks_p, acts_p = model._forward_train(Xp[idx], rng)
            sm, zs_m, masks_m, acts_m = model._forward_train(Xm[idx], rng)
            viol = sm - sp + cfg.margin
            active = (viol > 0.0).astype(np.float64)
            loss = float(np.mean(np.maximum(0.0, viol)))
            if not math.isfinite(loss):
                raise RuntimeError(f"loss became non-finite at epoch {epoch}")
            epoch_losses.append(loss)
            ds_p = -active / len(idx)
            ds_m = active / len(idx)
            gW_p, gb_p = model._backward(ds_p, zs_p, masks_p, acts_p)
            gW_m, gb_m = model._backward(ds_m, zs_m, masks_m, acts_m)
            grads = [gp + gm for gp, gm in zip(gW_p + gb_p, gW_m + gb_m)]
            if cfg.weight_decay > 0.0:
                # decay on weights only; biases stay unpenalized
                for i, W in enumerate(model.weights):
                    grads[i] = grads[i] + cfg.weight_decay * W
            opt.step(model.weights + model.biases, grads, lr)
        val = eval_loss(val_idx)
        history["train_loss"].append(float(np.mean(epoch_losses)))
        history["val_loss"].append(val)
        if val < best_val:
            best_val = val
            best_snap = model.snapshot()
    model.restore(best_snap)
    history["best_val_loss"] = best_val
    return model, history


def predict_pair(model: ScoringModel, a: LayoutParams, b: LayoutParams) -> str:
    """'a' or 'b', whichever scores strictly higher; exact ties go to 'a'."""
    return "b" if model.score(b) > model.score(a) else "a"
