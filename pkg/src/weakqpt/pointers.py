"""Measurement pointers: initial state, readout pair (p, q) and derived constants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numkit import ContractViolation, ShapeError, embed, is_density, is_hermitian, kron, unitary_from_generator

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
UP = np.array([[1, 0], [0, 0]], dtype=complex)

MOMENT_TOL = 1e-12
SINGULAR_TOL = 1e-9
EIG_CLUSTER_TOL = 1e-10


class PointerError(ValueError):
    pass


@dataclass(frozen=True)
class PointerConstants:
    c1: complex
    c2: float

    @property
    def c1_sq(self) -> complex:
        return self.c1**2

    @property
    def im_c1_sq(self) -> float:
        """Imaginary part of c1**2; the r4-only inversion needs it nonzero."""
        return float(self.c1_sq.imag)

    @property
    def usable(self) -> bool:
        """Whether the four-r-value inversion is well posed (Im c1 != 0)."""
        return abs(self.c1.imag) > SINGULAR_TOL and self.c2 > 0


@dataclass(frozen=True)
class PointerSpec:
    sigma: np.ndarray
    p_obs: np.ndarray
    q_obs: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        for name in ("sigma", "p_obs", "q_obs"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        d = self.sigma.shape[0]
        if any(m.shape != (d, d) for m in (self.sigma, self.p_obs, self.q_obs)):
            raise ShapeError("sigma, p and q must be square matrices of one size")
        if not is_density(self.sigma):
            raise ContractViolation("pointer state sigma is not a density matrix")
        if not (is_hermitian(self.p_obs, 1e-10) and is_hermitian(self.q_obs, 1e-10)):
            raise ContractViolation("pointer observables must be Hermitian")
        for name, obs in (("p", self.p_obs), ("q", self.q_obs)):
            if abs(np.trace(obs @ self.sigma)) > MOMENT_TOL:
                raise ContractViolation(f"initial mean of {name} must vanish, got {np.trace(obs @ self.sigma):.3g}")

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def observable(self, which: str) -> np.ndarray:
        return {"p": self.p_obs, "q": self.q_obs}[which]

    @property
    def constants(self) -> PointerConstants:
        return pointer_constants(self)


def pointer_constants(spec: PointerSpec) -> PointerConstants:
    """c1 = tr(q p sigma), c2 = tr(p p sigma)."""
    c1 = complex(np.trace(spec.q_obs @ spec.p_obs @ spec.sigma))
    c2 = float(np.trace(spec.p_obs @ spec.p_obs @ spec.sigma).real)
    return PointerConstants(c1, c2)


def qubit_pointer() -> PointerSpec:
    """Spin-up pointer read out through sigma_x (as p) and sigma_y (as q)."""
    return PointerSpec(UP, SIGMA_X, SIGMA_Y, label="qubit")


def ladder(n: int) -> np.ndarray:
    """Truncated annihilation operator on n Fock levels."""
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


def gaussian_pointer(delta: float = 1.0, n_max: int = 20) -> PointerSpec:
    """Oscillator ground state of position width ``delta`` in a truncated Fock basis.

    q = delta (a + a^dag), p = i (a^dag - a) / (2 delta), so [q, p] = i away from
    the truncation edge.
    """
    if delta <= 0:
        raise PointerError("pointer width must be positive")
    if n_max < 8:
        raise PointerError("Fock truncation n_max must be at least 8")
    a = ladder(n_max)
    q = delta * (a + a.conj().T)
    p = 1j * (a.conj().T - a) / (2 * delta)
    sigma = np.zeros((n_max, n_max), dtype=complex)
    sigma[0, 0] = 1
    return PointerSpec(sigma, p, q, label=f"gaussian(delta={delta:g}, n_max={n_max})")


def custom_pointer(sigma, p_obs, q_obs, label: str = "custom") -> PointerSpec:
    return PointerSpec(sigma, p_obs, q_obs, label=label)


def tilted_qubit_pointer() -> PointerSpec:
    """Qubit pointer with q = (sigma_x + sigma_y)/sqrt(2): c1 = (1 - i)/sqrt(2), so Im(c1^2) = -1.

    The standard qubit and Gaussian pointers have real c1**2, which makes the
    r4-only inversion singular; this one does not.
    """
    return PointerSpec(UP, SIGMA_X, (SIGMA_X + SIGMA_Y) / np.sqrt(2), label="tilted-qubit")


def readout_eigensystem(obs: np.ndarray, tol: float = EIG_CLUSTER_TOL) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigen-decomposition with degenerate eigenvalues grouped.

    Returns ``(values, vectors, labels)`` where ``labels[k]`` is the cluster
    index of eigenvector k and ``values`` holds one representative eigenvalue
    per cluster.
    """
    w, v = np.linalg.eigh(obs)
    labels = np.zeros(len(w), dtype=int)
    reps = [w[0]]
    for k in range(1, len(w)):
        if w[k] - reps[-1] > tol:
            reps.append(w[k])
        labels[k] = len(reps) - 1
    return np.array(reps), v, labels


def coupling_generator(observable: np.ndarray, spec: PointerSpec) -> np.ndarray:
    return kron(observable, spec.p_obs)


def coupling_unitary(
    observable: np.ndarray,
    spec: PointerSpec,
    strength: float,
    dims: Sequence[int] | None = None,
    positions: tuple[int, int] = (0, 1),
) -> np.ndarray:
    """exp(-i s A (x) p) on (system, pointer), embedded into a joint space if ``dims`` is given."""
    observable = np.asarray(observable, dtype=complex)
    if not is_hermitian(observable, 1e-10):
        raise ContractViolation("coupled system observable must be Hermitian")
    u = unitary_from_generator(coupling_generator(observable, spec), strength)
    if dims is None:
        return u
    dims = list(dims)
    s, k = positions
    if dims[s] != observable.shape[0] or dims[k] != spec.dim:
        raise ShapeError("layout does not match the observable and pointer dimensions")
    if s < k:
        return embed(u, dims, [s, k])
    # embed expects ascending factor order; swap the operator's tensor legs
    a, b = observable.shape[0], spec.dim
    swapped = u.reshape(a, b, a, b).transpose(1, 0, 3, 2).reshape(a * b, a * b)
    return embed(swapped, dims, [k, s])
