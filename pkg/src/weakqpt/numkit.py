"""Dense complex linear algebra on tensor-product spaces.

Joint spaces are described by a list of factor dimensions. Throughout the
package the factors are ordered as::

    (system, pointer u, pointer v, [extra pointers ...], [ancilla])

and every partial trace or local operator application refers to positions in
that list.
"""

from __future__ import annotations

import string
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_SLACK = 1e-10


class ShapeError(ValueError):
    """Matrix or tensor dimensions do not conform."""


class ContractViolation(ValueError):
    """An input breaks a documented precondition (e.g. non-Hermitian generator)."""


def kron(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices, left to right."""
    if not mats:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, (np.asarray(m) for m in mats))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, rtol=0, atol=tol)


def is_density(m: np.ndarray, tol: float = TRACE_TOL) -> bool:
    m = np.asarray(m)
    if not is_hermitian(m, 1e-10):
        return False
    if abs(np.trace(m) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -PSD_SLACK)


def is_unitary(u: np.ndarray, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.allclose(u.conj().T @ u, np.eye(u.shape[0]), rtol=0, atol=tol)


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> None:
    if any(d < 1 for d in dims):
        raise ShapeError(f"subsystem dimensions must be >= 1, got {list(dims)}")
    n = int(np.prod(dims))
    if m.shape != (n, n):
        raise ShapeError(f"matrix of shape {m.shape} does not match dims {list(dims)} (total {n})")


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Reduced matrix on the factors listed in ``keep`` (kept in ascending order)."""
    m = np.asarray(m)
    dims = list(dims)
    _check_dims(m, dims)
    keep = sorted(set(keep))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ShapeError(f"keep indices {keep} out of range for {n} factors")
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    t = m.reshape(dims + dims)
    res = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(dk, dk)


def unitary_from_generator(h: np.ndarray, s: float) -> np.ndarray:
    """exp(-i s h) for Hermitian ``h``, via its eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, 1e-10):
        raise ContractViolation("generator must be Hermitian")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-1j * s * w)) @ v.conj().T


def apply_local(
    op: np.ndarray,
    rho: np.ndarray,
    dims: Sequence[int],
    targets: Sequence[int],
    right: np.ndarray | None = None,
) -> tuple[np.ndarray, list[int]]:
    """Compute ``L rho R^dagger`` with L, R acting on the ``targets`` factors.

    ``R`` defaults to ``L``. Operators may be rectangular, in which case the
    target factor dimensions change; output dims are returned alongside.
    Multi-factor targets map onto a single output factor when the operator
    changes dimension (only single-factor rectangular maps are supported).
    """
    dims = list(dims)
    n = len(dims)
    rho = np.asarray(rho)
    _check_dims(rho, dims)
    targets = list(targets)
    right = op if right is None else right
    in_t = [dims[t] for t in targets]
    din = int(np.prod(in_t))
    if op.shape[1] != din or right.shape[1] != din:
        raise ShapeError(f"operator acts on dim {op.shape[1]}, targets have dim {din}")
    if op.shape[0] != right.shape[0]:
        raise ShapeError("left and right operators disagree on output dimension")
    dout = op.shape[0]
    if dout == din:
        out_t = in_t
    elif len(targets) == 1:
        out_t = [dout]
    else:
        raise ShapeError("dimension-changing maps must act on a single factor")
    k = len(targets)
    t = rho.reshape(dims + dims)
    lop = np.asarray(op).reshape(out_t + in_t)
    t = np.tensordot(lop, t, axes=(list(range(k, 2 * k)), targets))
    # new row axes for targets sit at the front; move them back into place
    t = np.moveaxis(t, list(range(k)), targets)
    rop = np.asarray(right).conj().reshape(out_t + in_t)
    col_axes = [n + x for x in targets]
    t = np.tensordot(t, rop, axes=(col_axes, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), col_axes)
    new_dims = dims.copy()
    for x, d in zip(targets, out_t):
        new_dims[x] = d
    tot = int(np.prod(new_dims))
    return t.reshape(tot, tot), new_dims


def embed(op: np.ndarray, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """Full joint-space matrix acting as ``op`` on ``targets`` and identity elsewhere."""
    dims = list(dims)
    n = int(np.prod(dims))
    # L = op (x) I acting on I_joint from the left only: use a right factor of identity
    eye = np.eye(n, dtype=complex)
    sub = int(np.prod([dims[t] for t in targets]))
    if op.shape != (sub, sub):
        raise ShapeError("embed requires a square operator matching the target dims")
    out, _ = apply_local(op, eye, dims, targets, right=np.eye(sub))
    return out


def expect_local(m: np.ndarray, dims: Sequence[int], ops: dict[int, np.ndarray]) -> complex:
    """tr[(O_1 (x) O_2 (x) ...) m] with O_k on the factors in ``ops``; identity elsewhere."""
    dims = list(dims)
    n = len(dims)
    t = np.asarray(m).reshape(dims + dims)
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    operands = [t]
    subs = []
    for i in range(n):
        if i in ops:
            operands.append(np.asarray(ops[i]))
            subs.append(cols[i] + rows[i])
        else:
            cols[i] = rows[i]
    spec = "".join(rows) + "".join(cols)
    expr = ",".join([spec] + subs) + "->"
    return complex(np.einsum(expr, *operands, optimize=True))


def post_select_blocks(
    rho: np.ndarray, dims: Sequence[int], targets: Sequence[int], basis: np.ndarray
) -> tuple[np.ndarray, list[int]]:
    """Unnormalized conditional states of the non-target factors.

    ``basis`` holds the post-selection vectors (on the joint target space) as
    columns. Returns an array ``M[f]`` with ``M[f] = <f| rho |f>`` (partial
    matrix element over the targets) and the dims of the remaining factors.
    """
    dims = list(dims)
    n = len(dims)
    targets = list(targets)
    rest = [i for i in range(n) if i not in targets]
    t = np.asarray(rho).reshape(dims + dims)
    perm = targets + rest
    t = np.transpose(t, perm + [n + p for p in perm])
    s = int(np.prod([dims[i] for i in targets]))
    rdims = [dims[i] for i in rest]
    p = int(np.prod(rdims)) if rdims else 1
    t = t.reshape(s, p, s, p)
    basis = np.asarray(basis)
    if basis.shape[0] != s:
        raise ShapeError(f"post-selection vectors of length {basis.shape[0]}, target dim {s}")
    blocks = np.einsum("sf,spSq,Sf->fpq", basis.conj(), t, basis, optimize=True)
    return blocks, rdims


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    z = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (z + z.conj().T) / 2
