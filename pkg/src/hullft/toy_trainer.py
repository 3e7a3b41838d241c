"""
Desk-scale gradient reuse: Adam on a least-squares toy model.

Each example ``s`` has a target vector and loss ``0.5 * ||theta - target(s)||^2``,
so the gradient is exact and cheap and any difference between schedules
comes from the reuse mechanism alone.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import ContractError, NumericalError
from .schedule import Action, TrainingSchedule


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, dim: int, **hyper) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), **hyper)


def adam_step(state: AdamState, theta, g):
    """One bias-corrected Adam update. Returns ``(new_state, new_theta)``."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != theta.shape or g.shape != state.m.shape:
        raise ContractError(f"shape mismatch: theta {theta.shape}, grad {g.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NumericalError(f"non-finite gradient at coordinates {bad.tolist()}")

    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    theta = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), theta


class ToyModel:
    """Per-example least squares around fixed target vectors."""

    def __init__(self, targets: Mapping, theta0):
        self.theta0 = np.array(theta0, dtype=np.float64)
        self.targets = {k: np.asarray(v, dtype=np.float64) for k, v in targets.items()}
        for k, v in self.targets.items():
            if v.shape != self.theta0.shape:
                raise ContractError(f"target {k!r} has shape {v.shape}, theta has {self.theta0.shape}")

    # overflow surfaces as a non-finite gradient, which adam_step rejects
    def loss(self, theta, example_id) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            r = theta - self.targets[example_id]
            return 0.5 * float(r @ r)

    def gradient(self, theta, example_id) -> np.ndarray:
        with np.errstate(over="ignore"):
            return theta - self.targets[example_id]

    def mean_loss(self, theta) -> float:
        """Uniform mean of the per-example losses over all targets."""
        if not self.targets:
            return 0.0
        return float(np.mean([self.loss(theta, k) for k in self.targets]))


@dataclass
class CachedGradient:
    gradient: np.ndarray
    example_id: object
    age: int = 0


@dataclass(frozen=True)
class TrainResult:
    theta: np.ndarray
    loss_trace: tuple  # mean loss before the first step, then after every step
    fb_passes: int
    steps: int

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]


def _check_ids(model: ToyModel, ids):
    missing = sorted({str(ex) for ex in ids if ex not in model.targets})
    if missing:
        raise ContractError(f"no target for scheduled example ids: {', '.join(missing)}")


def grad_reuse_train(model: ToyModel, schedule: TrainingSchedule, lr: float = 0.05, **adam) -> TrainResult:
    """Follow ``schedule``: recompute the gradient on refresh steps, reuse it otherwise.

    One Adam state persists across every block, and its step counter
    advances on reuse steps too.
    """
    _check_ids(model, schedule.example_ids)
    r = schedule.refresh_interval
    theta = model.theta0.copy()
    state = AdamState.zeros(theta.size, lr=lr, **adam)
    cache = None
    fb = 0
    trace = [model.mean_loss(theta)]
    for ex, action in schedule.steps:
        if action is Action.REFRESH:
            cache = CachedGradient(model.gradient(theta, ex), ex)
            fb += 1
        else:
            cache.age += 1
            if cache.example_id != ex or cache.age >= r:
                raise RuntimeError(f"stale gradient cache for {ex!r} (age {cache.age}, r={r})")
        state, theta = adam_step(state, theta, cache.gradient)
        trace.append(model.mean_loss(theta))
    return TrainResult(theta, tuple(trace), fb, len(schedule))


def plain_train(model: ToyModel, sequence, lr: float = 0.05, **adam) -> TrainResult:
    """Reference loop: fresh gradient on every step."""
    sequence = list(sequence)
    _check_ids(model, sequence)
    theta = model.theta0.copy()
    state = AdamState.zeros(theta.size, lr=lr, **adam)
    trace = [model.mean_loss(theta)]
    for ex in sequence:
        state, theta = adam_step(state, theta, model.gradient(theta, ex))
        trace.append(model.mean_loss(theta))
    return TrainResult(theta, tuple(trace), len(sequence), len(sequence))
