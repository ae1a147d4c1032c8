"""Small dense linear algebra for one and two qubits.

States are 1-d complex arrays, operators are square complex arrays holding
H/hbar in 1/ns. Basis convention: |g> = (1, 0), |e> = (0, 1), sigma_z|g> = +|g>;
two-qubit kets are ordered |q1, q2> with qubit 1 as the left Kronecker factor.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-10

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

GROUND = np.array([1, 0], dtype=complex)
EXCITED = np.array([0, 1], dtype=complex)


def pauli(axis: str) -> np.ndarray:
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}; expected one of x, y, z") from None


def identity(dim: int = 2) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with ``a`` acting on the left (first) factor."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def is_hermitian(h: np.ndarray, atol: float = 0.0) -> bool:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        return False
    return bool(np.all(np.abs(h - h.conj().T) <= atol))


def as_operator(h, dim: int | None = None) -> np.ndarray:
    """Validate a Hermitian operator and return it as a complex array."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"operator must be square, got shape {h.shape}")
    if dim is not None and h.shape[0] != dim:
        raise ValueError(f"operator dimension {h.shape[0]} does not match {dim}")
    if not is_hermitian(h, atol=1e-12 * max(1.0, float(np.abs(h).max(initial=0.0)))):
        raise ValueError("operator is not Hermitian")
    return h


def as_state(amplitudes: Iterable[complex], normalize: bool = False) -> np.ndarray:
    """Validate a pure state; ``normalize=True`` rescales instead of rejecting."""
    psi = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes,
                     dtype=complex)
    if psi.ndim != 1 or psi.shape[0] not in (2, 4):
        raise ValueError(f"state must be a vector of dimension 2 or 4, got shape {psi.shape}")
    norm = np.linalg.norm(psi)
    if normalize:
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return psi / norm
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm {norm!r})")
    return psi


def step_propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) through the eigendecomposition of the Hermitian ``h``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    h = np.asarray(h, dtype=complex)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * dt * w)) @ v.conj().T


def evolve(psi0: np.ndarray, schedule: Sequence[tuple[np.ndarray, float]],
           return_path: bool = False):
    """Propagate ``psi0`` through piecewise-constant ``(h, dt)`` steps in order.

    With ``return_path=True`` also returns the array of intermediate states
    ``[psi0, psi1, ..., psiK]`` (shape ``(K + 1, dim)``).
    """
    psi = np.asarray(psi0, dtype=complex)
    path = [psi]
    for h, dt in schedule:
        h = np.asarray(h)
        if h.shape != (psi.shape[0], psi.shape[0]):
            raise ValueError(f"operator shape {h.shape} does not match state dimension {psi.shape[0]}")
        psi = step_propagator(h, dt) @ psi
        path.append(psi)
    if return_path:
        return psi, np.array(path)
    return psi


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|, clipped into [0, 1] against round-off."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(min(1.0, abs(np.vdot(a, b))))

