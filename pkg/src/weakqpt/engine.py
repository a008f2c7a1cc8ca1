"""Joint system-pointer state evolution shared by every scheme.

A run is described as a sequence of steps acting on a joint density matrix:
couplings ``exp(-i s A (x) p)`` between a system factor and a pointer factor,
and the unknown channel acting on a group of system factors. The same step
list can be evolved exactly (full unitaries) or as a truncated power series in
the coupling strengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numkit import ShapeError, apply_local, kron, unitary_from_generator
from .pointers import PointerSpec, coupling_generator, readout_eigensystem
from .process import KrausChannel

DEFAULT_DIM_CAP = 4096


class ResourceError(RuntimeError):
    """Joint Hilbert space exceeds the configured dimension cap."""


@dataclass(frozen=True)
class Coupling:
    system: int
    pointer: int
    observable: np.ndarray
    spec: PointerSpec
    strength: float


@dataclass(frozen=True)
class ChannelStep:
    channel: KrausChannel
    targets: tuple = (0,)


def check_cap(dims: Sequence[int], cap: int = DEFAULT_DIM_CAP) -> None:
    n = int(np.prod(dims))
    if n > cap:
        raise ResourceError(f"joint dimension {n} exceeds the cap of {cap}")


def _channel_kraus(step: ChannelStep, dims: Sequence[int]) -> tuple[list[np.ndarray], list[int]]:
    """Kraus operators of a channel step, reshaped to act on a single merged target when needed."""
    targets = list(step.targets)
    din = int(np.prod([dims[t] for t in targets]))
    if din != step.channel.d_in:
        raise ShapeError(f"channel on dim {step.channel.d_in} applied to factors of total dim {din}")
    return list(step.channel.kraus), targets


def _apply_channel(rho, dims, step: ChannelStep):
    kraus, targets = _channel_kraus(step, dims)
    if len(targets) > 1 and step.channel.d_in != step.channel.d_out:
        raise ShapeError("dimension-changing channels must act on one factor")
    out = None
    new_dims = dims
    for k in kraus:
        term, new_dims = apply_local(k, rho, dims, targets)
        out = term if out is None else out + term
    return out, new_dims


def evolve_exact(rho0: np.ndarray, dims: Sequence[int], steps: Sequence, cap: int = DEFAULT_DIM_CAP):
    """Apply every step with its full unitary or channel; returns (rho, dims)."""
    dims = list(dims)
    check_cap(dims, cap)
    rho = rho0
    for st in steps:
        if isinstance(st, Coupling):
            u = unitary_from_generator(coupling_generator(st.observable, st.spec), st.strength)
            rho, dims = _ordered_local(u, rho, dims, st.system, st.pointer, st.observable.shape[0], st.spec.dim)
        else:
            rho, dims = _apply_channel(rho, dims, st)
            check_cap(dims, cap)
    return rho, dims


def _ordered_local(op, rho, dims, s, k, ds, dk, right=None):
    """Apply a two-factor operator written in (system, pointer) order to factors s, k."""
    def fix(m):
        if m is None or s < k:
            return m
        return m.reshape(ds, dk, ds, dk).transpose(1, 0, 3, 2).reshape(ds * dk, ds * dk)

    targets = [s, k] if s < k else [k, s]
    return apply_local(fix(op), rho, dims, targets, right=fix(right))


def evolve_series(rho0: np.ndarray, dims: Sequence[int], steps: Sequence, order: int, cap: int = DEFAULT_DIM_CAP):
    """Truncated power-series evolution.

    Every coupling unitary is expanded as I - i s G - (s G)^2 / 2 and only the
    terms whose total power of coupling strengths is at most ``order`` are
    kept. Returns (rho, dims) with the orders already summed.
    """
    dims = list(dims)
    check_cap(dims, cap)
    terms = [rho0] + [np.zeros_like(rho0) for _ in range(order)]
    for st in steps:
        if isinstance(st, Coupling):
            g = coupling_generator(st.observable, st.spec)
            n = g.shape[0]
            tops = [np.eye(n, dtype=complex), -1j * st.strength * g, -0.5 * st.strength**2 * (g @ g)]
            new = [np.zeros_like(terms[0]) for _ in range(order + 1)]
            for k, t in enumerate(terms):
                if not np.any(t):
                    continue
                for a in range(3):
                    for b in range(3):
                        if k + a + b > order:
                            continue
                        if a == 0 and b == 0:
                            new[k] = new[k] + t
                            continue
                        piece, _ = _ordered_local(tops[a], t, dims, st.system, st.pointer,
                                                  st.observable.shape[0], st.spec.dim, right=tops[b])
                        new[k + a + b] = new[k + a + b] + piece
            terms = new
        else:
            out = []
            new_dims = dims
            for t in terms:
                r, new_dims = _apply_channel(t, dims, st)
                out.append(r)
            terms, dims = out, new_dims
            check_cap(dims, cap)
    return sum(terms), dims


@dataclass
class ConditionalBlocks:
    """Unnormalized pointer states conditioned on every post-selection outcome."""

    blocks: np.ndarray  # shape (n_outcomes, P, P)
    pointer_dims: list

    @property
    def probabilities(self) -> np.ndarray:
        return np.real(np.einsum("fpp->f", self.blocks))

    def correlator(self, f: int, ops: dict[int, np.ndarray]) -> complex:
        """Unnormalized tr[(product of ops) M_f]; keys are positions among the pointers."""
        from .numkit import expect_local

        return expect_local(self.blocks[f], self.pointer_dims, ops)


def condition(rho: np.ndarray, dims: Sequence[int], post_targets: Sequence[int], basis: np.ndarray) -> ConditionalBlocks:
    from .numkit import post_select_blocks

    blocks, rdims = post_select_blocks(rho, dims, post_targets, basis)
    return ConditionalBlocks(blocks, rdims)


def initial_state(parts: Sequence[np.ndarray]) -> np.ndarray:
    return kron(*parts)


# --------------------------------------------------------------- sampling --

def readout_distribution(block: np.ndarray, pointer_dims: Sequence[int], observables: Sequence[np.ndarray]):
    """Joint Born weights of the clustered eigenvalues of one observable per pointer.

    Returns ``(weights, eigenvalue_products)`` flattened over the joint outcome
    grid; weights are unnormalized (they sum to the outcome probability).
    """
    vals, vecs, labels = zip(*(readout_eigensystem(o) for o in observables))
    v = kron(*vecs)
    diag = np.real(np.einsum("ij,ik,kj->j", v.conj(), block, v, optimize=True))
    diag = np.clip(diag, 0.0, None)
    shape = tuple(len(x) for x in vals)
    weights = np.zeros(shape)
    grid = np.stack(np.meshgrid(*[np.arange(d) for d in pointer_dims], indexing="ij"), -1).reshape(-1, len(pointer_dims))
    cl = tuple(np.asarray(labels[j])[grid[:, j]] for j in range(len(pointer_dims)))
    np.add.at(weights, cl, diag)
    prod = np.ones(shape)
    for j, x in enumerate(vals):
        sh = [1] * len(vals)
        sh[j] = len(x)
        prod = prod * x.reshape(sh)
    return weights.ravel(), prod.ravel()
