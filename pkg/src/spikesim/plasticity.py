"""PSP kernels and learning rules (STDP, SAPR, winner-takes-all, perceptron)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ContractError

# Pairings further apart than this (ms) are ignored.
PAIRING_CUTOFF_MS = 100.0


@dataclass(frozen=True)
class AlphaKernel:
    """``k(t) = A (t/tau) exp(1 - t/tau)`` for t > 0, peaking at A when t = tau."""

    A: float = 1.0
    tau: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.A) and math.isfinite(self.tau)):
            raise ValueError("kernel parameters must be finite")
        if not self.tau > 0:
            raise ValueError(f"kernel tau must be > 0, got {self.tau}")

    def __call__(self, t):
        return kernel_value(self, t)


def kernel_value(k: AlphaKernel, t):
    t = np.asarray(t, dtype=float)
    x = np.where(t > 0, t / k.tau, 0.0)
    val = k.A * x * np.exp(1.0 - x)
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class StdpRule:
    A_plus: float = 0.005
    A_minus: float = 0.00525
    tau_plus: float = 20.0
    tau_minus: float = 20.0

    def __post_init__(self):
        if min(self.A_plus, self.A_minus, self.tau_plus, self.tau_minus) <= 0:
            raise ValueError("STDP amplitudes and time constants must be positive")

    def delta(self, dt_pair):
        return stdp_delta(self, dt_pair)


@dataclass(frozen=True)
class SaprRule:
    epsp: AlphaKernel = field(default_factory=lambda: AlphaKernel(0.01, 5.0))
    ipsp: AlphaKernel = field(default_factory=lambda: AlphaKernel(-0.01, 8.0))

    def __post_init__(self):
        if not self.epsp.A > 0:
            raise ValueError("SAPR excitatory kernel amplitude must be > 0")
        if not self.ipsp.A < 0:
            raise ValueError("SAPR inhibitory kernel amplitude must be < 0")

    def delta(self, dt_pair):
        return sapr_delta(self, dt_pair)


Rule = Union[StdpRule, SaprRule]


def stdp_delta(rule: StdpRule, dt_pair):
    """Static exponential window; ``dt_pair = t_post - t_pre``; zero at 0."""
    d = np.asarray(dt_pair, dtype=float)
    with np.errstate(over="ignore"):
        pos = rule.A_plus * np.exp(-np.abs(d) / rule.tau_plus)
        neg = -rule.A_minus * np.exp(-np.abs(d) / rule.tau_minus)
    out = np.where(d > 0, pos, np.where(d < 0, neg, 0.0))
    return float(out) if out.ndim == 0 else out


def sapr_delta(rule: SaprRule, dt_pair):
    """EPSP shape for pre-before-post, IPSP shape mirrored for post-before-pre."""
    d = np.asarray(dt_pair, dtype=float)
    out = np.where(d > 0, kernel_value(rule.epsp, d), kernel_value(rule.ipsp, -d))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightBounds:
    w_min: float = 0.0
    w_max: float = 1.0

    def __post_init__(self):
        if not self.w_min <= self.w_max:
            raise ValueError(f"w_min ({self.w_min}) must not exceed w_max ({self.w_max})")

    def contains(self, w) -> bool:
        w = np.asarray(w)
        return bool(np.all((w >= self.w_min) & (w <= self.w_max)))


def apply_pairing(w, dt_pair, rule: Rule, bounds: WeightBounds = WeightBounds()):
    """``clip(w + rule.delta(dt_pair), w_min, w_max)``; vectorized over w and dt."""
    if not bounds.contains(w):
        raise ContractError(f"weight {w!r} outside bounds [{bounds.w_min}, {bounds.w_max}]")
    out = np.clip(np.asarray(w, dtype=float) + rule.delta(dt_pair), bounds.w_min, bounds.w_max)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WtaRule:
    eta: float = 0.5
    neighborhood_radius: int = 0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.neighborhood_radius < 0:
            raise ValueError("neighborhood_radius must be >= 0")


def wta_winner(weights, x) -> int:
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    x = np.asarray(x, dtype=float)
    if W.shape[1] != x.shape[0]:
        raise ValueError(f"weight vectors have length {W.shape[1]}, input has {x.shape[0]}")
    # argmin returns the first minimum: ties go to the lowest index
    return int(np.argmin(np.sum((W - x) ** 2, axis=1)))


def wta_update(weights, x, rule: WtaRule = WtaRule()) -> tuple[int, np.ndarray]:
    """Move the closest weight vector (and 1-D index neighbours) toward ``x``.

    Returns the winner index and a new weight matrix; the input is not modified.
    """
    W = np.array(np.atleast_2d(weights), dtype=float)
    x = np.asarray(x, dtype=float)
    winner = wta_winner(W, x)
    lo = max(0, winner - rule.neighborhood_radius)
    hi = min(W.shape[0], winner + rule.neighborhood_radius + 1)
    W[lo:hi] += rule.eta * (x - W[lo:hi])
    return winner, W


@dataclass(frozen=True)
class PerceptronRule:
    eta: float = 1.0
    theta: float = 0.5

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("perceptron eta must be > 0")


def perceptron_output(w, x, theta: float) -> int:
    return int(float(np.dot(w, x)) >= theta)


def perceptron_update(w, x, target: int, rule: PerceptronRule = PerceptronRule()) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape:
        raise ValueError(f"weight length {w.shape} does not match input length {x.shape}")
    if target not in (0, 1):
        raise ValueError(f"target must be 0 or 1, got {target!r}")
    y = perceptron_output(w, x, rule.theta)
    return w + rule.eta * (target - y) * x


def train_perceptron(X, targets, rule: PerceptronRule = PerceptronRule(), max_epochs: int = 100):
    """Cycle through the samples until an epoch has no errors.

    Returns ``(weights, epochs_used, errors_in_last_epoch)``.
    """
    X = np.asarray(X, dtype=float)
    w = np.zeros(X.shape[1])
    errors = len(X)
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        errors = 0
        for x, t in zip(X, targets):
            if perceptron_output(w, x, rule.theta) != t:
                errors += 1
            w = perceptron_update(w, x, int(t), rule)
        if errors == 0:
            break
    return w, epoch, errors


KERNEL_HEADER = "dt_ms,stdp,sapr"


def kernel_table(stdp: StdpRule = StdpRule(), sapr: SaprRule = SaprRule(), lo=-50.0, hi=50.0, step=0.5):
    n = int(round((hi - lo) / step)) + 1
    dts = lo + step * np.arange(n)
    return dts, stdp_delta(stdp, dts), sapr_delta(sapr, dts)


def kernels_csv(stdp: StdpRule = StdpRule(), sapr: SaprRule = SaprRule()) -> str:
    dts, s, a = kernel_table(stdp, sapr)
    lines = [KERNEL_HEADER]
    lines += [f"{d:.6f},{x:.10e},{y:.10e}" for d, x, y in zip(dts, s, a)]
    return "\n".join(lines) + "\n"


def write_kernels_csv(path, stdp: StdpRule = StdpRule(), sapr: SaprRule = SaprRule()) -> None:
    Path(path).write_text(kernels_csv(stdp, sapr), encoding="utf-8")
