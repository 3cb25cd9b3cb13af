"""Training machinery for the learnt aggregation models.

Both model classes are trained with Adam on a weighted MSE between the
model prediction and the noisy measurement, with gradients flowing through
the set summation.  Mixed neighbour counts are handled by padding to the
largest K and masking, which is exact: padded rows receive zero upstream
gradient.  Runs are bitwise deterministic given the config.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .mlp import Adam, weighted_mse
from .models import DeepSetModel, FEATURE_DIM, LinearAggModel, snapshot_features
from .rng import stream, substream_seed


class TrainingDivergence(RuntimeError):
    """Raised when a parameter goes non-finite during training."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite parameter detected after epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 256
    epochs: int = 200
    seed: int = 0
    # Per-axis loss weights are 1/std^2 of the targets, floored at the
    # measurement-noise band so axes that carry nothing but noise cannot
    # drown the gradient of the axes with real signal.
    sigma_floor: float = 0.05

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise ValueError("invalid Adam parameters")


def dataset_arrays(data):
    """Stack one or more datasets into padded training arrays.

    Returns (features (n, Kmax, 6), mask (n, Kmax), targets (n, 6)) where
    targets are the noisy measurements and features are canonically ordered
    per sample.
    """
    datasets = [data] if isinstance(data, Dataset) else list(data)
    records = [rec for d in datasets for rec in d.records]
    if not records:
        raise ValueError("no training records")
    kmax = max(rec.snapshot.k for rec in records)
    n = len(records)
    feats = np.zeros((n, max(kmax, 1), FEATURE_DIM))
    mask = np.zeros((n, max(kmax, 1)))
    targets = np.zeros((n, 6))
    for i, rec in enumerate(records):
        rows = snapshot_features(rec.snapshot)
        feats[i, : len(rows)] = rows
        mask[i, : len(rows)] = 1.0
        targets[i] = rec.measured.vec
    return feats, mask, targets


def loss_weights_for(targets: np.ndarray, sigma_floor: float = 0.05) -> np.ndarray:
    """Per-axis 1/std^2 normalization so N and N*m axes train comparably."""
    std = np.maximum(targets.std(axis=0), sigma_floor)
    return 1.0 / (std * std)


def _model_mlps(model):
    if isinstance(model, LinearAggModel):
        return [model.psi]
    if isinstance(model, DeepSetModel):
        return [model.phi, model.big_phi]
    raise TypeError(f"cannot train {type(model).__name__}")


def model_parameters(model) -> list:
    """All trainable parameter arrays of a model, in a defined order."""
    return [p for net in _model_mlps(model) for p in net.parameters()]


def batch_loss_and_gradients(model, feats, mask, targets, axis_weights):
    """Weighted-MSE loss and exact gradients through the set summation.

    ``feats`` is (B, K, 6) with ``mask`` (B, K); gradients are returned in
    :func:`model_parameters` order.
    """
    b, kmax, _ = feats.shape
    rows = feats.reshape(b * kmax, FEATURE_DIM)
    if isinstance(model, LinearAggModel):
        per_row, cache = model.psi.forward_cached(rows)
        pred = (per_row.reshape(b, kmax, 6) * mask[:, :, None]).sum(axis=1)
        loss, dpred = weighted_mse(pred, targets, axis_weights)
        drows = (np.broadcast_to(dpred[:, None, :], (b, kmax, 6)) * mask[:, :, None]).reshape(
            b * kmax, 6
        )
        gw, gb, _ = model.psi.backward(cache, drows)
        grads = [g for pair in zip(gw, gb) for g in pair]
        return loss, grads
    if isinstance(model, DeepSetModel):
        embed, cache_phi = model.phi.forward_cached(rows)
        h = model.phi.d_out
        pooled = (embed.reshape(b, kmax, h) * mask[:, :, None]).sum(axis=1)
        pred, cache_dec = model.big_phi.forward_cached(pooled)
        loss, dpred = weighted_mse(pred, targets, axis_weights)
        gw2, gb2, dpooled = model.big_phi.backward(cache_dec, dpred)
        drows = (np.broadcast_to(dpooled[:, None, :], (b, kmax, h)) * mask[:, :, None]).reshape(
            b * kmax, h
        )
        gw1, gb1, _ = model.phi.backward(cache_phi, drows)
        grads = [g for pair in zip(gw1, gb1) for g in pair]
        grads += [g for pair in zip(gw2, gb2) for g in pair]
        return loss, grads
    raise TypeError(f"cannot train {type(model).__name__}")


def train(model, data, cfg: TrainConfig):
    """Fit ``model`` in place on the noisy measurements; returns the per-epoch
    mean loss history and the axis weights used.

    Shuffling is driven by a dedicated substream of ``cfg.seed``, so two runs
    with identical config and data produce bitwise-identical parameters.
    Any non-finite parameter aborts with :class:`TrainingDivergence`.
    """
    feats, mask, targets = dataset_arrays(data)
    axis_weights = loss_weights_for(targets, cfg.sigma_floor)
    params = model_parameters(model)
    optimiser = Adam(
        params,
        learning_rate=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        epsilon=cfg.epsilon,
    )
    n = len(feats)
    shuffle_seed = substream_seed(cfg.seed, "shuffle")
    history = []
    for epoch in range(cfg.epochs):
        order = stream(shuffle_seed, epoch).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            pick = order[start : start + cfg.batch_size]
            loss, grads = batch_loss_and_gradients(
                model, feats[pick], mask[pick], targets[pick], axis_weights
            )
            optimiser.step(params, grads)
            total += loss * len(pick)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDivergence(epoch)
        history.append(total / n)
    model.metadata.update(
        {
            "axis_weights": axis_weights.tolist(),
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
            "final_loss": history[-1] if history else None,
            "training_samples": int(n),
        }
    )
    return history, axis_weights
