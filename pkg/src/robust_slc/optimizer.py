"""Ensemble objective, exact gradient and clamped gradient ascent.

Every ensemble member is propagated with exact step propagators
``exp(-i dt H_k)``. The derivative of a propagator with respect to a control
value goes through the eigendecomposition of ``H_k``:

    dU = V (Gamma * (V^H dH V)) V^H,
    Gamma_ij = (e^{-i dt l_i} - e^{-i dt l_j}) / (l_i - l_j)
             = -i dt e^{-i dt (l_i + l_j)/2} sinc(dt (l_i - l_j) / 2),

which stays exact (and smooth) for degenerate eigenvalues.

Per-sample results are computed in fixed-size chunks, optionally on a thread
pool, and averaged in sample-index order so the outcome does not depend on
the number of threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .models import QubitModel, hamiltonians

log = logging.getLogger(__name__)

CHUNK = 32


@dataclass(frozen=True, eq=False)
class ControlField:
    """Piecewise-constant controls, ``values[c, k]`` on interval k of channel c."""

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    horizon: float
    names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("control values must be a (channels, intervals) array")
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != (values.shape[0],) or upper.shape != lower.shape:
            raise ValueError("one (lower, upper) bound pair per channel is required")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def for_model(cls, model: QubitModel, values) -> "ControlField":
        lo, hi = model.bounds()
        return cls(values, lo, hi, model.horizon, tuple(c.name for c in model.channels))

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def intervals(self) -> int:
        return self.values.shape[1]

    @property
    def dt(self) -> float:
        return self.horizon / self.intervals

    def in_bounds(self) -> bool:
        return bool(np.all(self.values >= self.lower[:, None]) and np.all(self.values <= self.upper[:, None]))

    def with_values(self, values) -> "ControlField":
        return replace(self, values=values)


def clamp(field: ControlField) -> ControlField:
    """Project every value onto its channel's [lower, upper]."""
    if field.in_bounds():
        return field
    return field.with_values(np.clip(field.values, field.lower[:, None], field.upper[:, None]))


def initial_field(model: QubitModel) -> ControlField:
    """The model's starting field sampled at interval midpoints, clamped to bounds."""
    if len(model.initial_field) != model.n_channels:
        raise ValueError(f"model {model.name} has no initial field")
    t = model.midpoints()
    values = np.array([np.broadcast_to(f(t), t.shape) for f in model.initial_field], dtype=float)
    return clamp(ControlField.for_model(model, values))


@dataclass(frozen=True)
class OptimizationConfig:
    eta0: float | None = None
    initial_change: float = 0.01
    shrink: float = 0.5
    grow: float = 1.1
    epsilon: float = 1e-4
    window: int = 100
    max_iterations: int = 20000
    max_rejections: int = 60
    threads: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0 < self.shrink < 1 < self.grow:
            raise ValueError("need 0 < shrink < 1 < grow")
        if self.eta0 is not None and not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if self.max_iterations < 0 or self.threads < 1:
            raise ValueError("max_iterations must be >= 0 and threads >= 1")


@dataclass
class TrainingResult:
    field: ControlField
    J_history: list[float]
    iterations: int
    converged: bool
    sample_fidelities: np.ndarray
    stop_reason: str = ""
    rejections: int = 0
    step_sizes: list[float] = field(default_factory=list, repr=False)


def _check_shapes(field: ControlField, model: QubitModel, samples) -> np.ndarray:
    if field.values.shape != (model.n_channels, model.intervals):
        raise ValueError(f"field shape {field.values.shape} does not match model "
                         f"({model.n_channels}, {model.intervals})")
    if abs(field.horizon - model.horizon) > 1e-12:
        raise ValueError("field horizon does not match model horizon")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("ensemble is empty")
    if samples.shape[1] != len(model.fluctuations):
        raise ValueError(f"samples have {samples.shape[1]} columns, model has "
                         f"{len(model.fluctuations)} fluctuation parameters")
    return samples


def _chunk_eval(model: QubitModel, values: np.ndarray, samples: np.ndarray, want_grad: bool):
    """Per-sample overlaps (and gradients of |overlap|^2) for one chunk of samples."""
    n, k_steps, d, dt = samples.shape[0], model.intervals, model.dim, model.dt
    h, dh = hamiltonians(model, values, samples)
    w, v = np.linalg.eigh(h)
    vh = v.conj().swapaxes(-1, -2)
    u = (v * np.exp(-1j * dt * w)[..., None, :]) @ vh

    psi = np.empty((n, k_steps + 1, d), dtype=complex)
    psi[:, 0] = model.initial_state
    for k in range(k_steps):
        psi[:, k + 1] = (u[:, k] @ psi[:, k, :, None])[..., 0]
    overlap = psi[:, -1] @ model.target_state.conj()
    if not want_grad:
        return overlap, None

    # costates: lam[k] = U_{k}^H ... U_{K-1}^H |target>
    lam = np.empty((n, k_steps + 1, d), dtype=complex)
    lam[:, -1] = model.target_state
    uh = u.conj().swapaxes(-1, -2)
    for k in range(k_steps - 1, -1, -1):
        lam[:, k] = (uh[:, k] @ lam[:, k + 1, :, None])[..., 0]

    a = (vh @ lam[:, 1:, :, None])[..., 0]
    b = (vh @ psi[:, :-1, :, None])[..., 0]
    mean = 0.5 * (w[..., :, None] + w[..., None, :])
    half_gap = 0.5 * (w[..., :, None] - w[..., None, :])
    gamma = -1j * dt * np.exp(-1j * dt * mean) * np.sinc(dt * half_gap / np.pi)
    kern = a.conj()[..., :, None] * gamma * b[..., None, :]
    # y_ab = sum_ij conj(V_ai) kern_ij V_bj, so d<lam|U|psi> = sum_ab G_ab y_ab
    y = v.conj() @ kern @ v.swapaxes(-1, -2)
    gens = np.array([ch.generator for ch in model.channels])
    d_overlap = np.einsum("nkab,cab->nck", y, gens) * dh.transpose(0, 2, 1)
    grad = 2.0 * np.real(overlap.conj()[:, None, None] * d_overlap)
    return overlap, grad


def _evaluate(model: QubitModel, values: np.ndarray, samples: np.ndarray, want_grad: bool,
              threads: int = 1, chunk: int = CHUNK):
    starts = range(0, samples.shape[0], chunk)
    job = lambda s: _chunk_eval(model, values, samples[s:s + chunk], want_grad)  # noqa: E731
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, starts))
    else:
        parts = [job(s) for s in starts]
    overlap = np.concatenate([p[0] for p in parts])
    grad = np.concatenate([p[1] for p in parts]) if want_grad else None
    return overlap, grad


def sample_overlaps(field: ControlField, model: QubitModel, samples, threads: int = 1,
                    chunk: int = CHUNK) -> np.ndarray:
    """Complex final overlaps <target|psi_n(T)>, one per sample."""
    samples = _check_shapes(field, model, samples)
    overlap, _ = _evaluate(model, field.values, samples, False, threads, chunk)
    return overlap


def _ordered_mean(x: np.ndarray):
    """Mean over axis 0, accumulated strictly in index order."""
    total = x[0].copy()
    for row in x[1:]:
        total += row
    return total / x.shape[0]


def objective(field: ControlField, model: QubitModel, ensemble, threads: int = 1) -> float:
    """J = mean over the ensemble of |<psi_n(T)|target>|^2."""
    overlap = sample_overlaps(field, model, ensemble, threads)
    return float(_ordered_mean(np.abs(overlap) ** 2))


def value_and_gradient(field: ControlField, model: QubitModel, ensemble, threads: int = 1):
    """``(J, dJ/du, per-sample |overlap|)`` with dJ/du of shape (channels, intervals)."""
    samples = _check_shapes(field, model, ensemble)
    overlap, grad = _evaluate(model, field.values, samples, True, threads)
    j = float(_ordered_mean(np.abs(overlap) ** 2))
    return j, _ordered_mean(grad), np.abs(overlap)


def gradient(field: ControlField, model: QubitModel, ensemble, threads: int = 1) -> np.ndarray:
    return value_and_gradient(field, model, ensemble, threads)[1]


def _initial_step(grad: np.ndarray, field: ControlField, fraction: float) -> float:
    span = field.upper - field.lower
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(span > 0, np.abs(grad).max(axis=1) / span, 0.0)
    peak = float(rel.max(initial=0.0))
    return fraction / peak if peak > 0 else 1.0


def train(model: QubitModel, ensemble, init: ControlField, config: OptimizationConfig | None = None,
          callback=None) -> TrainingResult:
    """Clamped gradient ascent on the ensemble objective.

    A trial step ``clamp(u + eta * grad)`` is accepted when it does not lower J
    (eta then grows); otherwise eta shrinks and the same iteration is retried.
    Stops once ``|J_k - J_{k - window}| < epsilon`` or after ``max_iterations``
    accepted steps.
    """
    config = config or OptimizationConfig()
    if not init.in_bounds():
        raise ValueError("initial field violates channel bounds")
    samples = _check_shapes(init, model, ensemble)

    def evaluate(f):
        j, g, fid = value_and_gradient(f, model, samples, config.threads)
        if not (math.isfinite(j) and np.all(np.isfinite(g))):
            raise FloatingPointError(f"non-finite objective or gradient (J={j})")
        return j, g, fid

    u = init
    j, g, fid = evaluate(u)
    eta = config.eta0 if config.eta0 is not None else _initial_step(g, u, config.initial_change)
    history = [j]
    steps: list[float] = []
    rejections = 0
    streak = 0
    converged = False
    reason = "max_iterations"
    iterations = 0
    while True:
        if len(history) > config.window and abs(history[-1] - history[-1 - config.window]) < config.epsilon:
            converged, reason = True, "window"
            break
        if iterations >= config.max_iterations:
            break
        trial = clamp(u.with_values(u.values + eta * g))
        jt, gt, fidt = evaluate(trial)
        if jt >= j:
            u, j, g, fid = trial, jt, gt, fidt
            history.append(j)
            steps.append(eta)
            iterations += 1
            streak = 0
            eta *= config.grow
            if callback is not None:
                callback(iterations, j, eta)
        else:
            rejections += 1
            streak += 1
            eta *= config.shrink
            if streak > config.max_rejections:
                # no ascent even for a vanishing step: a (projected) stationary point
                converged, reason = True, "step_collapse"
                break
    log.info("%s: stopped after %d iterations (%s), J=%.6f", model.name, iterations, reason, j)
    return TrainingResult(u, history, iterations, converged, fid, reason, rejections, steps)
