"""Quantum processes in Kraus form and as four-basis chi tensors.

A process maps an input operator Omega to

    E(Omega) = sum chi[i1, i2, i3, i4] <alpha_i2|Omega|psi_i1> |beta_i3><phi_i4|

for four orthonormal bases (psi, alpha on the input space, beta, phi on the
output space). Ground truth is always held as Kraus operators; chi tensors are
derived from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numkit import ShapeError, is_unitary, kron

OVERLAP_TOL = 1e-9


class DegenerateOverlapError(ValueError):
    """A chi denominator <phi|beta><alpha|psi> is (numerically) zero."""


class ChannelError(ValueError):
    pass


# ---------------------------------------------------------------- bases ----

def computational_basis(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex)


def fourier_basis(d: int) -> np.ndarray:
    """Columns are the discrete-Fourier states; equals the Hadamard basis for d = 2."""
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return np.exp(2j * np.pi * j * k / d) / np.sqrt(d)


def real_basis(d: int) -> np.ndarray:
    """A real orthogonal basis with no vanishing overlap against the computational one.

    Sylvester-Hadamard (hence unbiased) when d is a power of two, otherwise the
    reflection I - 2J/d, which has no zero entries for d >= 3.
    """
    if d == 1:
        return np.ones((1, 1), dtype=complex)
    if d & (d - 1) == 0:
        h = np.array([[1.0]])
        while h.shape[0] < d:
            h = np.block([[h, h], [h, -h]])
        return (h / np.sqrt(d)).astype(complex)
    return (np.eye(d) - 2.0 * np.ones((d, d)) / d).astype(complex)


def hadamard_basis(d: int) -> np.ndarray:
    """Real Sylvester-Hadamard basis; needs a power-of-two dimension."""
    if d < 1 or d & (d - 1):
        raise ValueError("the hadamard basis needs a power-of-two dimension")
    return real_basis(d)


NAMED_BASES = {
    "computational": computational_basis,
    "fourier": fourier_basis,
    "hadamard": hadamard_basis,
    "real": real_basis,
}


def named_basis(name: str, d: int) -> np.ndarray:
    try:
        factory = NAMED_BASES[name]
    except KeyError:
        raise ValueError(f"unknown basis {name!r}; choose from {sorted(NAMED_BASES)}") from None
    return factory(d)


@dataclass(frozen=True)
class BasisQuartet:
    """Four bases, each stored with its kets as columns.

    ``psi`` and ``alpha`` live on the input space, ``beta`` and ``phi`` on the
    output space. Unitarity is enforced on construction; the non-degeneracy
    needed by the X-to-chi division is checked on demand, because some schemes
    (all-computational bases) never divide.
    """

    psi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        for name in ("psi", "alpha", "beta", "phi"):
            m = np.asarray(getattr(self, name), dtype=complex)
            if not is_unitary(m, 1e-10):
                raise ValueError(f"basis {name} is not unitary")
            object.__setattr__(self, name, m)
        if self.psi.shape != self.alpha.shape or self.beta.shape != self.phi.shape:
            raise ShapeError("psi/alpha and beta/phi must share dimensions")

    @property
    def d_in(self) -> int:
        return self.psi.shape[0]

    @property
    def d_out(self) -> int:
        return self.beta.shape[0]

    def input_overlaps(self) -> np.ndarray:
        """``ov[i1, i2] = <alpha_i2|psi_i1>``."""
        return (self.alpha.conj().T @ self.psi).T

    def output_overlaps(self) -> np.ndarray:
        """``ov[i3, i4] = <phi_i4|beta_i3>``."""
        return (self.phi.conj().T @ self.beta).T

    def denominators(self) -> np.ndarray:
        """``den[i1,i2,i3,i4] = <phi_i4|beta_i3> <alpha_i2|psi_i1>``."""
        return np.einsum("ab,cd->abcd", self.input_overlaps(), self.output_overlaps())

    def is_nondegenerate(self, tol: float = OVERLAP_TOL) -> bool:
        return bool(np.abs(self.input_overlaps()).min() > tol and np.abs(self.output_overlaps()).min() > tol)

    def check_nondegenerate(self, tol: float = OVERLAP_TOL) -> None:
        if not self.is_nondegenerate(tol):
            raise DegenerateOverlapError(
                "some overlap <alpha|psi> or <phi|beta> vanishes; chi cannot be divided out"
            )

    def swapped_output(self) -> "BasisQuartet":
        """Quartet with the roles of beta and phi exchanged."""
        return BasisQuartet(self.psi, self.alpha, self.phi, self.beta)

    def same_as(self, other: "BasisQuartet", tol: float = 1e-12) -> bool:
        return all(
            a.shape == b.shape and np.allclose(a, b, rtol=0, atol=tol)
            for a, b in zip(
                (self.psi, self.alpha, self.beta, self.phi),
                (other.psi, other.alpha, other.beta, other.phi),
            )
        )


def default_bases(d_in: int, d_out: int | None = None) -> BasisQuartet:
    """psi = phi = computational, alpha = beta = Fourier."""
    d_out = d_in if d_out is None else d_out
    return BasisQuartet(
        computational_basis(d_in), fourier_basis(d_in), fourier_basis(d_out), computational_basis(d_out)
    )


def product_bases(quartets: Sequence[BasisQuartet]) -> BasisQuartet:
    """Tensor-product quartet; global indices are row-major over the factors."""
    return BasisQuartet(
        kron(*[q.psi for q in quartets]),
        kron(*[q.alpha for q in quartets]),
        kron(*[q.beta for q in quartets]),
        kron(*[q.phi for q in quartets]),
    )


# -------------------------------------------------------------- channels ---

@dataclass(frozen=True)
class KrausChannel:
    kraus: tuple
    name: str = "custom"

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ChannelError("a channel needs at least one Kraus operator")
        shape = ks[0].shape
        if any(k.shape != shape or k.ndim != 2 for k in ks):
            raise ShapeError("all Kraus operators must share one 2-D shape")
        object.__setattr__(self, "kraus", ks)
        comp = sum(k.conj().T @ k for k in ks)
        if not np.allclose(comp, np.eye(shape[1]), rtol=0, atol=1e-10):
            raise ChannelError("Kraus operators are not trace preserving (sum K^dag K != I)")

    @property
    def d_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus[0].shape[0]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_kraus(self, rho)


def apply_kraus(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (ch.d_in, ch.d_in):
        raise ShapeError(f"input of shape {rho.shape} for a channel on dim {ch.d_in}")
    return sum(k @ rho @ k.conj().T for k in ch.kraus)


def _amplitude_damping(gamma: float) -> list[np.ndarray]:
    if not 0 <= gamma <= 1:
        raise ChannelError(f"damping gamma must lie in [0, 1], got {gamma}")
    return [
        np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def _depolarizing(p: float, d: int) -> list[np.ndarray]:
    """rho -> (1 - p) rho + p I/d, via the Weyl (clock-shift) operators."""
    if not 0 <= p <= 1:
        raise ChannelError(f"depolarizing p must lie in [0, 1], got {p}")
    w = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(w ** np.arange(d))
    ops = []
    for a in range(d):
        for b in range(d):
            u = np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            if a == 0 and b == 0:
                weight = 1 - p + p / d**2
            else:
                weight = p / d**2
            if weight > 0:
                ops.append(np.sqrt(weight) * u)
    return ops


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

CHANNEL_PARAMS = {
    "identity": "d (int, default 2)",
    "unitary": "u (matrix) or gate in {hadamard, cnot}",
    "amplitude_damping": "gamma in [0, 1] (qubit)",
    "depolarizing": "p in [0, 1], d (int, default 2)",
    "composite": "parts: list of channel specs, combined by tensor product",
}


def standard_channel(name: str, **params) -> KrausChannel:
    """Factory for the ground-truth channels used in tests and the CLI."""
    if name == "identity":
        d = int(params.get("d", 2))
        return KrausChannel((np.eye(d),), name="identity")
    if name == "unitary":
        if "gate" in params:
            gates = {"hadamard": HADAMARD, "cnot": CNOT}
            try:
                u = gates[params["gate"]]
            except KeyError:
                raise ChannelError(f"unknown gate {params['gate']!r}") from None
        else:
            u = np.asarray(params["u"], dtype=complex)
        if not is_unitary(u, 1e-10):
            raise ChannelError("unitary channel needs a unitary matrix")
        return KrausChannel((u,), name=params.get("gate", "unitary"))
    if name == "amplitude_damping":
        return KrausChannel(tuple(_amplitude_damping(float(params.get("gamma", 0.0)))), name="amplitude_damping")
    if name == "depolarizing":
        d = int(params.get("d", 2))
        return KrausChannel(tuple(_depolarizing(float(params.get("p", 0.0)), d)), name="depolarizing")
    if name == "composite":
        parts = params.get("parts")
        if not parts:
            raise ChannelError("composite channel needs a non-empty 'parts' list")
        chans = [p if isinstance(p, KrausChannel) else standard_channel(p["name"], **p.get("params", {}))
                 for p in parts]
        return tensor_channels(chans)
    raise ChannelError(f"unknown channel {name!r}; choose from {sorted(CHANNEL_PARAMS)}")


def tensor_channels(chans: Sequence[KrausChannel]) -> KrausChannel:
    ks = [np.eye(1)]
    for ch in chans:
        ks = [np.kron(a, b) for a in ks for b in ch.kraus]
    return KrausChannel(tuple(ks), name="(x)".join(c.name for c in chans))


def random_unitary_channel(d: int, rng: np.random.Generator) -> KrausChannel:
    from .numkit import random_unitary

    return KrausChannel((random_unitary(d, rng),), name="random_unitary")


# ------------------------------------------------------------ chi tensor ---

@dataclass(frozen=True)
class ChiTensor:
    bases: BasisQuartet
    chi: np.ndarray = field(repr=False)

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=complex)
        b = self.bases
        if chi.shape != (b.d_in, b.d_in, b.d_out, b.d_out):
            raise ShapeError(f"chi of shape {chi.shape} does not match the bases")
        object.__setattr__(self, "chi", chi)

    @property
    def d_in(self) -> int:
        return self.bases.d_in

    @property
    def d_out(self) -> int:
        return self.bases.d_out


def apply_chi(t: ChiTensor, omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega)
    b = t.bases
    if omega.shape != (b.d_in, b.d_in):
        raise ShapeError(f"input of shape {omega.shape} for a tensor on dim {b.d_in}")
    # amp[i1, i2] = <alpha_i2| omega |psi_i1>
    amp = (b.alpha.conj().T @ omega @ b.psi).T
    coeff = np.einsum("abcd,ab->cd", t.chi, amp)
    return b.beta @ coeff @ b.phi.conj().T


def x_value_analytic(ch: KrausChannel, rho_i, a, b, pf) -> tuple[complex, complex]:
    """(X, X~) = (tr[Pf B E(A rho)], tr[Pf E(A rho) B])."""
    rho_i, a, b, pf = (np.asarray(m) for m in (rho_i, a, b, pf))
    if rho_i.shape != (ch.d_in, ch.d_in) or a.shape != rho_i.shape:
        raise ShapeError("rho_i and A must be d_in x d_in")
    if b.shape != (ch.d_out, ch.d_out) or pf.shape != b.shape:
        raise ShapeError("B and Pi_f must be d_out x d_out")
    out = apply_kraus(ch, a @ rho_i)
    return complex(np.trace(pf @ b @ out)), complex(np.trace(pf @ out @ b))


def x_values_all(ch: KrausChannel, bases: BasisQuartet) -> tuple[np.ndarray, np.ndarray]:
    """X and X~ for every projector setting (i1, i2, i3, i4) of a quartet."""
    din, dout = bases.d_in, bases.d_out
    x = np.zeros((din, din, dout, dout), dtype=complex)
    xt = np.zeros_like(x)
    for i1 in range(din):
        rho = np.outer(bases.psi[:, i1], bases.psi[:, i1].conj())
        for i2 in range(din):
            a = np.outer(bases.alpha[:, i2], bases.alpha[:, i2].conj())
            for i3 in range(dout):
                b = np.outer(bases.beta[:, i3], bases.beta[:, i3].conj())
                for i4 in range(dout):
                    pf = np.outer(bases.phi[:, i4], bases.phi[:, i4].conj())
                    x[i1, i2, i3, i4], xt[i1, i2, i3, i4] = x_value_analytic(ch, rho, a, b, pf)
    return x, xt


def chi_from_channel(ch: KrausChannel, bases: BasisQuartet) -> ChiTensor:
    """Ground-truth tensor from analytic X-values divided by the basis overlaps."""
    if (ch.d_in, ch.d_out) != (bases.d_in, bases.d_out):
        raise ShapeError("channel and bases disagree on dimensions")
    bases.check_nondegenerate()
    x, _ = x_values_all(ch, bases)
    return ChiTensor(bases, x / bases.denominators())


def chi_matrix_elements(ch: KrausChannel, bases: BasisQuartet) -> ChiTensor:
    """chi[i1,i2,i3,i4] = <beta_i3| E(|alpha_i2><psi_i1|) |phi_i4>.

    Valid for any orthonormal quartet, including ones where the overlap
    division of :func:`chi_from_channel` is impossible.
    """
    din, dout = bases.d_in, bases.d_out
    chi = np.zeros((din, din, dout, dout), dtype=complex)
    for i1 in range(din):
        for i2 in range(din):
            out = apply_kraus(ch, np.outer(bases.alpha[:, i2], bases.psi[:, i1].conj()))
            chi[i1, i2] = bases.beta.conj().T @ out @ bases.phi
    return ChiTensor(bases, chi)


def tilde_from_x(xt: np.ndarray, bases: BasisQuartet) -> ChiTensor:
    """Tilde tensor from X~-values, expressed as an ordinary tensor on the beta/phi-swapped quartet.

    The tilde representation reads E(Omega) = sum chi~ <alpha|Omega|psi> |phi_i4><beta_i3|,
    so chi~[i1,i2,i3,i4] = X~ / (<beta_i3|phi_i4> <alpha_i2|psi_i1>). Transposing the last
    two indices turns it into a standard tensor for the swapped quartet.
    """
    den = np.einsum("ab,cd->abcd", bases.input_overlaps(), bases.output_overlaps().conj())
    chit = xt / den
    return ChiTensor(bases.swapped_output(), chit.transpose(0, 1, 3, 2))


@dataclass(frozen=True)
class ChiDistance:
    max_abs: float
    frobenius: float
    missing: int = 0


def chi_distance(a: ChiTensor, b: ChiTensor) -> ChiDistance:
    """Entrywise max and Frobenius norm of the difference; NaN entries are skipped and counted."""
    if not a.bases.same_as(b.bases, 1e-10):
        raise ValueError("chi tensors are expressed in different bases")
    diff = (a.chi - b.chi).ravel()
    ok = np.isfinite(diff)
    d = np.abs(diff[ok])
    if d.size == 0:
        return ChiDistance(float("nan"), float("nan"), int((~ok).sum()))
    return ChiDistance(float(d.max()), float(np.sqrt((d**2).sum())), int((~ok).sum()))
