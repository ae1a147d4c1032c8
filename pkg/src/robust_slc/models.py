"""Fluctuating Hamiltonian families for charge and phase qubits.

A model is a list of fixed drift terms plus bounded control channels. Any term
may carry a multiplicative fluctuation, referenced by index into
``QubitModel.fluctuations``. All values are H/hbar in 1/ns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .quantum import EXCITED, GROUND, as_operator, as_state, identity, pauli, tensor
from .sampling import COSINE, CONSTANT, TRUNCATED_GAUSSIAN, UNIFORM, FluctuationParameter, tie_groups

MODEL_IDS = ("single_charge_excited", "single_charge_superposition", "coupled_charge", "coupled_phase")

# g(Phi)/hbar for the charge qubits, taken from a measured E_J
CHARGE_TUNNELING = 9.1
# 1 / (6 sqrt(N1 N2)) with N1 = N2 = 5 levels per phase qubit
PHASE_ZZ_FACTOR = 1.0 / 30.0
PHASE_TRANSVERSE = 2.0


@dataclass(frozen=True)
class ControlChannel:
    name: str
    generator: np.ndarray
    lower: float
    upper: float
    sign: float = 1.0
    binding: int | None = None

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"channel {self.name}: lower bound exceeds upper bound")
        if self.sign not in (1.0, -1.0):
            raise ValueError(f"channel {self.name}: sign must be +1 or -1")
        object.__setattr__(self, "generator", as_operator(self.generator))

    @property
    def span(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class DriftTerm:
    generator: np.ndarray
    coefficient: float
    binding: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "generator", as_operator(self.generator))


@dataclass(frozen=True, eq=False)
class QubitModel:
    name: str
    dim: int
    drifts: tuple[DriftTerm, ...]
    channels: tuple[ControlChannel, ...]
    fluctuations: tuple[FluctuationParameter, ...]
    initial_state: np.ndarray
    target_state: np.ndarray
    horizon: float
    intervals: int
    # prescribed starting field as a function of time, one entry per channel
    initial_field: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.horizon <= 0 or self.intervals < 1:
            raise ValueError("horizon must be positive and intervals >= 1")
        for term in (*self.drifts, *self.channels):
            if term.generator.shape != (self.dim, self.dim):
                raise ValueError(f"{self.name}: generator of wrong dimension")
            if term.binding is not None and not 0 <= term.binding < len(self.fluctuations):
                raise ValueError(f"{self.name}: fluctuation binding {term.binding} out of range")
        bound = {t.binding for t in (*self.drifts, *self.channels)}
        for i, p in enumerate(self.fluctuations):
            if i not in bound:
                raise ValueError(f"{self.name}: fluctuation {p.name} is not attached to any term")
        for s in (self.initial_state, self.target_state):
            if as_state(s).shape[0] != self.dim:
                raise ValueError(f"{self.name}: state dimension mismatch")
        tie_groups(self.fluctuations)

    @property
    def dt(self) -> float:
        return self.horizon / self.intervals

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def midpoints(self) -> np.ndarray:
        """Interval midpoints (k - 1/2) dt, where time-varying multipliers are evaluated."""
        return (np.arange(self.intervals) + 0.5) * self.dt

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([c.lower for c in self.channels])
        hi = np.array([c.upper for c in self.channels])
        return lo, hi

    def groups(self) -> dict[str, list[int]]:
        return tie_groups(self.fluctuations)

    def with_bound(self, bound: float | dict[str, float], distribution: str | None = None) -> "QubitModel":
        """Copy with every fluctuation (or each named tie group) set to ``bound``."""
        params = []
        for p in self.fluctuations:
            b = bound.get(p.group, p.bound) if isinstance(bound, dict) else bound
            params.append(replace(p, bound=float(b), distribution=distribution or p.distribution))
        return replace(self, fluctuations=tuple(params))

    def multipliers(self, samples: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Fluctuation multipliers, shape (N, P, len(times)); ``samples`` is (N, P)."""
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        if samples.shape[1] != len(self.fluctuations):
            raise ValueError(f"sample has {samples.shape[1]} values, model expects {len(self.fluctuations)}")
        times = np.asarray(times, dtype=float)
        out = np.empty((samples.shape[0], len(self.fluctuations), times.shape[0]))
        for j, p in enumerate(self.fluctuations):
            if p.profile == CONSTANT:
                out[:, j, :] = samples[:, j, None]
            else:
                out[:, j, :] = 1.0 - samples[:, j, None] * np.cos(times)[None, :]
        return out

    def nominal_sample(self) -> np.ndarray:
        return np.array([p.center for p in self.fluctuations])


def _term_multiplier(binding, theta: np.ndarray) -> np.ndarray:
    """theta has shape (N, P, K); returns (N, K) multiplier for one term."""
    if binding is None:
        return np.ones((theta.shape[0], theta.shape[2]))
    return theta[:, binding, :]


def hamiltonians(model: QubitModel, values: np.ndarray, samples: np.ndarray,
                 times: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All step Hamiltonians for an ensemble, without bounds checks.

    ``values`` is (C, K) control values, ``samples`` is (N, P). Returns
    ``(H, dH)`` where ``H`` has shape (N, K, d, d) and ``dH`` is the per-channel
    coefficient (N, K, C) multiplying each generator, i.e. dH/du_{c,k} =
    dH[n, k, c] * generator_c.
    """
    values = np.asarray(values, dtype=float)
    if times is None:
        times = model.midpoints()
    theta = model.multipliers(samples, times)
    n, k = theta.shape[0], times.shape[0]
    if values.shape != (model.n_channels, k):
        raise ValueError(f"control shape {values.shape} does not match ({model.n_channels}, {k})")
    d = model.dim
    h = np.zeros((n, k, d, d), dtype=complex)
    for term in model.drifts:
        coef = term.coefficient * _term_multiplier(term.binding, theta)
        h += coef[:, :, None, None] * term.generator
    dh = np.empty((n, k, model.n_channels))
    for c, ch in enumerate(model.channels):
        dh[:, :, c] = ch.sign * _term_multiplier(ch.binding, theta)
        h += (dh[:, :, c] * values[c])[:, :, None, None] * ch.generator
    return h, dh


def assemble_hamiltonian(model: QubitModel, controls: Sequence[float], sample: Sequence[float],
                         t: float) -> np.ndarray:
    """H/hbar at time ``t`` for one set of channel values and one fluctuation sample."""
    controls = np.asarray(controls, dtype=float)
    lo, hi = model.bounds()
    if controls.shape != lo.shape:
        raise ValueError(f"expected {lo.shape[0]} control values, got {controls.shape}")
    if np.any(controls < lo) or np.any(controls > hi):
        raise ValueError(f"control values {controls} outside channel bounds")
    h, _ = hamiltonians(model, controls[:, None], np.asarray(sample, dtype=float)[None, :],
                        np.array([float(t)]))
    return h[0, 0]


def _charge_single(target: str) -> QubitModel:
    sz, sx = pauli("z"), pauli("x")
    if target == "excited":
        psi_t = EXCITED
    elif target == "superposition":
        psi_t = (GROUND + EXCITED) / np.sqrt(2)
    else:
        raise ValueError(f"target_choice must be 'excited' or 'superposition', got {target!r}")
    return QubitModel(
        name=f"single_charge_{target}",
        dim=2,
        drifts=(),
        channels=(
            ControlChannel("u_z", sz, 0.0, 40.0, +1.0, binding=0),
            ControlChannel("u_x", sx, 0.0, CHARGE_TUNNELING, -1.0, binding=1),
        ),
        fluctuations=(
            FluctuationParameter("theta_z", 0.0, UNIFORM, CONSTANT, tie_group="z"),
            FluctuationParameter("theta_x", 0.0, UNIFORM, CONSTANT, tie_group="x"),
        ),
        initial_state=GROUND.copy(),
        target_state=psi_t,
        horizon=1.0,
        intervals=100,
        initial_field=(
            lambda t: np.sin(t) + np.cos(t) + 20.0,
            lambda t: np.sin(t) + np.cos(t) + 5.0,
        ),
    )


def single_charge_qubit(target_choice: str = "excited") -> QubitModel:
    """H = theta_z u_z sigma_z - theta_x u_x sigma_x on [0, 1] ns, 100 intervals."""
    return _charge_single(target_choice)


def coupled_charge_qubits() -> QubitModel:
    """Two charge qubits with SQUID coupling chi(t); controlled-phase target."""
    sz, sx, i2 = pauli("z"), pauli("x"), identity(2)
    z1, z2 = tensor(sz, i2), tensor(i2, sz)
    x1, x2 = tensor(sx, i2), tensor(i2, sx)
    psi0 = np.array([0.7, 0.1, 0.7j, 0.1j])
    psi0 = psi0 / np.linalg.norm(psi0)
    target = psi0 * np.array([1, 1, 1, -1])
    return QubitModel(
        name="coupled_charge",
        dim=4,
        drifts=(
            DriftTerm(x1, -CHARGE_TUNNELING, binding=2),
            DriftTerm(x2, -CHARGE_TUNNELING, binding=3),
        ),
        channels=(
            ControlChannel("f_1", z1, 0.0, 40.0, +1.0, binding=0),
            ControlChannel("f_2", z2, 0.0, 40.0, +1.0, binding=1),
            # theta_5 is identically one, so chi carries no binding
            ControlChannel("chi", tensor(sx, sx), -0.5, 0.5, -1.0),
        ),
        fluctuations=(
            FluctuationParameter("theta_1", 0.0, UNIFORM, COSINE, tie_group="z"),
            FluctuationParameter("theta_2", 0.0, UNIFORM, COSINE, tie_group="z"),
            FluctuationParameter("theta_3", 0.0, UNIFORM, COSINE, tie_group="x"),
            FluctuationParameter("theta_4", 0.0, UNIFORM, COSINE, tie_group="x"),
        ),
        initial_state=psi0,
        target_state=target,
        horizon=2.0,
        intervals=200,
        initial_field=(
            lambda t: np.sin(t) + np.cos(t) + 5.0,
            lambda t: np.sin(t) + np.cos(t) + 5.0,
            lambda t: 0.25 * np.sin(t),
        ),
    )


def coupled_phase_qubits() -> QubitModel:
    """Two phase qubits with a tunable coupler; Bell-state target."""
    sz, sx, i2 = pauli("z"), pauli("x"), identity(2)
    z1, z2 = tensor(sz, i2), tensor(i2, sz)
    x1, x2 = tensor(sx, i2), tensor(i2, sx)
    coupling = tensor(sx, sx) + PHASE_ZZ_FACTOR * tensor(sz, sz)
    s = 1 / np.sqrt(2)
    return QubitModel(
        name="coupled_phase",
        dim=4,
        drifts=(
            DriftTerm(x1 / 2, PHASE_TRANSVERSE),
            DriftTerm(x2 / 2, PHASE_TRANSVERSE),
        ),
        channels=(
            ControlChannel("omega_1", z1 / 2, 0.0, 5.0, +1.0, binding=0),
            ControlChannel("omega_2", z2 / 2, 0.0, 5.0, +1.0, binding=1),
            ControlChannel("omega_c", coupling / 2, -0.1, 0.1, +1.0, binding=2),
        ),
        fluctuations=(
            # training always uses the uniform grid; this is the test distribution
            FluctuationParameter("theta_1", 0.0, TRUNCATED_GAUSSIAN, CONSTANT, tie_group="omega"),
            FluctuationParameter("theta_2", 0.0, TRUNCATED_GAUSSIAN, CONSTANT, tie_group="omega"),
            FluctuationParameter("theta_3", 0.0, TRUNCATED_GAUSSIAN, CONSTANT, tie_group="coupling"),
        ),
        # |gg>, |ge>, |eg>, |ee>
        initial_state=np.array([s, 0, s, 0], dtype=complex),
        target_state=np.array([s, 0, 0, s], dtype=complex),
        horizon=50.0,
        intervals=200,
        initial_field=(
            lambda t: np.sin(t) + np.cos(t) + 0.5,
            lambda t: np.sin(t) + np.cos(t) + 0.5,
            lambda t: 0.05 + 0.05 * np.sin(t),
        ),
    )


def build_model(model_id: str) -> QubitModel:
    if model_id == "single_charge_excited":
        return single_charge_qubit("excited")
    if model_id == "single_charge_superposition":
        return single_charge_qubit("superposition")
    if model_id == "coupled_charge":
        return coupled_charge_qubits()
    if model_id == "coupled_phase":
        return coupled_phase_qubits()
    raise ValueError(f"unknown model {model_id!r}; expected one of {', '.join(MODEL_IDS)}")
