"""Weak-measurement process tomography: simulation of single runs and reconstruction.

One run prepares rho_i, couples the system to pointer u through A, applies the
channel, couples to pointer v through B and post-selects on Pi_f. The four
conditional pointer correlators (r-values) together with the post-selection
probability determine the X-value tr[Pi_f B E(A rho_i)], and with projector
choices of A, B, rho_i and Pi_f that X-value fixes one chi entry.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import engine
from .engine import ChannelStep, Coupling
from .pointers import PointerConstants, PointerSpec, qubit_pointer
from .process import (
    BasisQuartet,
    ChiDistance,
    ChiTensor,
    KrausChannel,
    apply_kraus,
    chi_distance,
    chi_from_channel,
    chi_matrix_elements,
    tilde_from_x,
)

STARVED_P = 1e-12
READOUTS = (("p", "p"), ("p", "q"), ("q", "p"), ("q", "q"))
MODES = ("exact", "perturbative", "sampled")


class SingularInversionError(ValueError):
    pass


class PostSelectionStarved(RuntimeError):
    pass


def projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, np.conj(v))


@dataclass(frozen=True)
class Setting:
    """Input state, the two coupled observables, and the post-selection.

    ``post_vectors`` holds every post-selection outcome as a column; the run
    reports statistics for all of them and ``post_index`` picks the one this
    setting refers to.
    """

    rho: np.ndarray
    a: np.ndarray
    b: np.ndarray
    post_vectors: np.ndarray
    post_index: int = 0

    @classmethod
    def from_indices(cls, bases: BasisQuartet, i1: int, i2: int, i3: int, i4: int) -> "Setting":
        return cls(
            projector(bases.psi[:, i1]),
            projector(bases.alpha[:, i2]),
            projector(bases.beta[:, i3]),
            bases.phi,
            i4,
        )

    @classmethod
    def explicit(cls, rho, a, b, pf) -> "Setting":
        """Setting with an arbitrary rank-1 post-selection projector, completed to a basis."""
        pf = np.asarray(pf, dtype=complex)
        w, v = np.linalg.eigh(pf)
        if not np.allclose(np.sort(w)[::-1], np.r_[1.0, np.zeros(len(w) - 1)], atol=1e-10):
            raise ValueError("explicit post-selection must be a rank-1 projector")
        order = np.argsort(w)[::-1]
        return cls(np.asarray(rho, complex), np.asarray(a, complex), np.asarray(b, complex), v[:, order], 0)

    @property
    def pf(self) -> np.ndarray:
        return projector(self.post_vectors[:, self.post_index])


@dataclass(frozen=True)
class RValueRecord:
    r1: float
    r2: float
    r3: float
    r4: float
    p_f: float
    shots: int | str = "exact"
    shift_u: tuple = (0.0, 0.0)
    shift_v: tuple = (0.0, 0.0)
    r_stderr: tuple | None = None
    n_cond: tuple | None = None

    @property
    def r(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3, self.r4])

    @property
    def starved(self) -> bool:
        return not np.isfinite(self.r).all() or self.p_f < STARVED_P


@dataclass
class ReconstructionReport:
    chi_hat: ChiTensor
    truth_distance: ChiDistance | None
    setup_count: int
    values_per_parameter: int
    mode: str
    coupling: tuple
    runtime_ms: float
    scheme: str = "weak"
    missing: list = field(default_factory=list)
    aux_experiments_per_parameter: int = 0
    chi_tilde: ChiTensor | None = None
    truth: ChiTensor | None = None
    diagnostics: dict = field(default_factory=dict)


# ------------------------------------------------------------- simulation --

def _steps(ch: KrausChannel, s: Setting, pu: PointerSpec, pv: PointerSpec, g: float, lam: float):
    return [
        Coupling(0, 1, s.a, pu, g),
        ChannelStep(ch, (0,)),
        Coupling(0, 2, s.b, pv, lam),
    ]


def _check_setting(ch: KrausChannel, s: Setting) -> None:
    if s.rho.shape != (ch.d_in, ch.d_in) or s.a.shape != s.rho.shape:
        raise ValueError("input state and A must be d_in x d_in")
    if s.b.shape != (ch.d_out, ch.d_out) or s.post_vectors.shape[0] != ch.d_out:
        raise ValueError("B and post-selection must live on the output space")


def records_from_blocks(cb: engine.ConditionalBlocks, pu: PointerSpec, pv: PointerSpec, shots="exact") -> list[RValueRecord]:
    out = []
    probs = cb.probabilities
    for f, p in enumerate(probs):
        if p < STARVED_P:
            nan = float("nan")
            out.append(RValueRecord(nan, nan, nan, nan, float(max(p, 0.0)), shots, (nan, nan), (nan, nan)))
            continue
        rs = [
            cb.correlator(f, {0: pu.observable(x), 1: pv.observable(y)}).real / p
            for x, y in READOUTS
        ]
        su = tuple(cb.correlator(f, {0: pu.observable(x)}).real / p for x in "pq")
        sv = tuple(cb.correlator(f, {1: pv.observable(x)}).real / p for x in "pq")
        out.append(RValueRecord(*rs, p_f=float(p), shots=shots, shift_u=su, shift_v=sv))
    return out


def run_blocks_exact(ch, s: Setting, pu, pv, g, lam, cap=engine.DEFAULT_DIM_CAP) -> engine.ConditionalBlocks:
    _check_setting(ch, s)
    rho0 = engine.initial_state([s.rho, pu.sigma, pv.sigma])
    rho, dims = engine.evolve_exact(rho0, [ch.d_in, pu.dim, pv.dim], _steps(ch, s, pu, pv, g, lam), cap)
    return engine.condition(rho, dims, [0], s.post_vectors)


def _pick(recs: list[RValueRecord], s: Setting) -> RValueRecord:
    rec = recs[s.post_index]
    if rec.p_f < STARVED_P:
        raise PostSelectionStarved(f"post-selection probability {rec.p_f:.3g} is below {STARVED_P:g}")
    return rec


def simulate_outcomes_exact(ch, s, pu, pv, g, lam) -> list[RValueRecord]:
    return records_from_blocks(run_blocks_exact(ch, s, pu, pv, g, lam), pu, pv)


def simulate_run_exact(ch: KrausChannel, s: Setting, pu: PointerSpec, pv: PointerSpec | None, g: float, lam: float) -> RValueRecord:
    """Full (untruncated) coupling unitaries; statistics for ``s.post_index``."""
    pv = pu if pv is None else pv
    return _pick(simulate_outcomes_exact(ch, s, pu, pv, g, lam), s)


def second_order_terms(ch, s: Setting, pu: PointerSpec, pv: PointerSpec, g: float, lam: float):
    """Factored terms of the post-selected state truncated at second order in (g, lam).

    Each term is ``(coef, X_in, B_left, B_right, U, V)`` and stands for
    ``coef * Pi B_left E(X_in) B_right Pi (x) U (x) V``.
    """
    rho, a, b = s.rho, s.a, s.b
    su, sv = pu.sigma, pv.sigma
    p_u, p_v = pu.p_obs, pv.p_obs
    iout = np.eye(ch.d_out)
    a2, b2 = a @ a, b @ b
    return [
        (1.0, rho, iout, iout, su, sv),
        (-1j * g, a @ rho, iout, iout, p_u @ su, sv),
        (1j * g, rho @ a, iout, iout, su @ p_u, sv),
        (-1j * lam, rho, b, iout, su, p_v @ sv),
        (1j * lam, rho, iout, b, su, sv @ p_v),
        (-0.5 * g**2, a2 @ rho, iout, iout, p_u @ p_u @ su, sv),
        (-0.5 * g**2, rho @ a2, iout, iout, su @ p_u @ p_u, sv),
        (g**2, a @ rho @ a, iout, iout, p_u @ su @ p_u, sv),
        (-0.5 * lam**2, rho, b2, iout, su, p_v @ p_v @ sv),
        (-0.5 * lam**2, rho, iout, b2, su, sv @ p_v @ p_v),
        (lam**2, rho, b, b, su, p_v @ sv @ p_v),
        (-g * lam, a @ rho, b, iout, p_u @ su, p_v @ sv),
        (g * lam, a @ rho, iout, b, p_u @ su, sv @ p_v),
        (g * lam, rho @ a, b, iout, su @ p_u, p_v @ sv),
        (-g * lam, rho @ a, iout, b, su @ p_u, sv @ p_v),
    ]


def simulate_outcomes_perturbative(ch, s, pu, pv, g, lam) -> list[RValueRecord]:
    _check_setting(ch, s)
    terms = second_order_terms(ch, s, pu, pv, g, lam)
    out = []
    for f in range(s.post_vectors.shape[1]):
        pf = projector(s.post_vectors[:, f])
        sys_w = [c * np.trace(pf @ bl @ apply_kraus(ch, x) @ br) for c, x, bl, br, _, _ in terms]

        def acc(ou, ov):
            return sum(
                w * np.trace(ou @ u) * np.trace(ov @ v)
                for w, (_, _, _, _, u, v) in zip(sys_w, terms)
            )

        iu, iv = np.eye(pu.dim), np.eye(pv.dim)
        p = acc(iu, iv).real
        if p < STARVED_P:
            nan = float("nan")
            out.append(RValueRecord(nan, nan, nan, nan, float(max(p, 0.0)), "perturbative", (nan, nan), (nan, nan)))
            continue
        rs = [acc(pu.observable(x), pv.observable(y)).real / p for x, y in READOUTS]
        su = tuple(acc(pu.observable(x), iv).real / p for x in "pq")
        sv = tuple(acc(iu, pv.observable(x)).real / p for x in "pq")
        out.append(RValueRecord(*rs, p_f=float(p), shots="perturbative", shift_u=su, shift_v=sv))
    return out


def simulate_run_perturbative(ch, s: Setting, pu: PointerSpec, pv: PointerSpec | None, g: float, lam: float) -> RValueRecord:
    """Statistics of the second-order truncated final state (all g, lam, g^2, lam^2, g*lam terms)."""
    pv = pu if pv is None else pv
    return _pick(simulate_outcomes_perturbative(ch, s, pu, pv, g, lam), s)


def simulate_outcomes_series(ch, s, pu, pv, g, lam, order: int = 2) -> list[RValueRecord]:
    """Generic truncated-series route; order 2 reproduces the factored second-order state."""
    _check_setting(ch, s)
    rho0 = engine.initial_state([s.rho, pu.sigma, pv.sigma])
    rho, dims = engine.evolve_series(rho0, [ch.d_in, pu.dim, pv.dim], _steps(ch, s, pu, pv, g, lam), order)
    return records_from_blocks(engine.condition(rho, dims, [0], s.post_vectors), pu, pv, shots="perturbative")


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for one (seed, setting, readout) stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(x) for x in stream]]))


def sample_blocks(cb: engine.ConditionalBlocks, specs: Sequence[PointerSpec], configs: Sequence[Sequence[str]],
                  shots: int, seed: int, stream: Sequence[int] = ()):
    """Sample (outcome, pointer eigenvalues) jointly for each readout configuration.

    Shots are split evenly over ``configs`` (remainder to the first ones).
    Returns per-config lists of ``(counts[f, k], values[k, pointer])``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n_cfg = len(configs)
    per = [shots // n_cfg + (1 if c < shots % n_cfg else 0) for c in range(n_cfg)]
    nf = cb.blocks.shape[0]
    results = []
    for c, cfg in enumerate(configs):
        obs = [sp.observable(x) for sp, x in zip(specs, cfg)]
        ws, vals = [], None
        for f in range(nf):
            w, _ = engine.readout_distribution(cb.blocks[f], cb.pointer_dims, obs)
            ws.append(w)
        if vals is None:
            vals = _value_grid(obs)
        probs = np.concatenate(ws)
        probs = probs / probs.sum()
        counts = rng_for(seed, *stream, c).multinomial(per[c], probs) if per[c] else np.zeros(len(probs), int)
        results.append((counts.reshape(nf, -1), vals))
    return results


def _value_grid(obs: Sequence[np.ndarray]) -> np.ndarray:
    from .pointers import readout_eigensystem

    vals = [readout_eigensystem(o)[0] for o in obs]
    mesh = np.meshgrid(*vals, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _cond_mean(counts: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    n = counts.sum()
    if n == 0:
        return float("nan"), float("nan")
    m = float((counts * x).sum() / n)
    if n < 2:
        return m, float("nan")
    var = float((counts * (x - m) ** 2).sum() / (n - 1))
    return m, float(np.sqrt(var / n))


def simulate_outcomes_sampled(ch, s, pu, pv, g, lam, shots: int, seed: int, stream: Sequence[int] = ()) -> list[RValueRecord]:
    post = s.post_vectors
    if not np.allclose(post.conj().T @ post, np.eye(post.shape[1]), atol=1e-10) or post.shape[1] != ch.d_out:
        raise ValueError("sampling needs a complete orthonormal post-selection basis")
    cb = run_blocks_exact(ch, s, pu, pv, g, lam)
    return sampled_records(cb, pu, pv, shots, seed, stream)


def sampled_records(cb: engine.ConditionalBlocks, pu, pv, shots: int, seed: int, stream=()) -> list[RValueRecord]:
    """Records for every outcome of a two-pointer block set, by joint Born sampling."""
    samples = sample_blocks(cb, [pu, pv], READOUTS, shots, seed, stream)
    out = []
    for f in range(cb.blocks.shape[0]):
        rs, errs, ns = [], [], []
        for counts, vals in samples:
            m, e = _cond_mean(counts[f], vals[:, 0] * vals[:, 1])
            rs.append(m)
            errs.append(e)
            ns.append(int(counts[f].sum()))
        p = sum(int(c[f].sum()) for c, _ in samples) / shots
        su = []
        for x in range(2):  # u reads p in configs 0,1 and q in 2,3
            cs = [samples[2 * x], samples[2 * x + 1]]
            tot = sum(c[f] for c, _ in cs)
            su.append(_cond_mean(tot, cs[0][1][:, 0])[0])
        sv = []
        for y in range(2):
            cs = [samples[y], samples[y + 2]]
            tot = sum(c[f] for c, _ in cs)
            sv.append(_cond_mean(tot, cs[0][1][:, 1])[0])
        out.append(RValueRecord(*rs, p_f=p, shots=shots, shift_u=tuple(su), shift_v=tuple(sv),
                                r_stderr=tuple(errs), n_cond=tuple(ns)))
    return out


def simulate_run_sampled(ch, s: Setting, pu: PointerSpec, pv: PointerSpec | None, g: float, lam: float,
                         shots: int, seed: int = 0) -> RValueRecord:
    """Monte Carlo estimate of the record; deterministic for a fixed seed."""
    pv = pu if pv is None else pv
    return _pick(simulate_outcomes_sampled(ch, s, pu, pv, g, lam, shots, seed), s)


def simulate_outcomes(ch, s, pu, pv, g, lam, mode="exact", shots=None, seed=0, stream=()) -> list[RValueRecord]:
    if mode == "exact":
        return simulate_outcomes_exact(ch, s, pu, pv, g, lam)
    if mode == "perturbative":
        return simulate_outcomes_perturbative(ch, s, pu, pv, g, lam)
    if mode == "sampled":
        if shots is None:
            raise ValueError("sampled mode needs a shot count")
        return simulate_outcomes_sampled(ch, s, pu, pv, g, lam, shots, seed, stream)
    raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")


# -------------------------------------------------------------- inversion --

def s6_matrix(k: PointerConstants) -> np.ndarray:
    """Constant matrix linking (X, X~, X~*, X*) to (r1/c2^2, r2/c2, r3/c2, r4)."""
    c1 = k.c1
    cc = np.conj(c1)
    return np.array([
        [1, -1, -1, 1],
        [c1, -cc, -c1, cc],
        [c1, -c1, -cc, cc],
        [c1**2, -abs(c1) ** 2, -abs(c1) ** 2, cc**2],
    ], dtype=complex)


def s7_matrix(k: PointerConstants) -> np.ndarray:
    """Constant matrix of the inverse relation (before the -p/(g lam (c1 - c1*)^2) prefactor)."""
    c1, c2 = k.c1, k.c2
    cc = np.conj(c1)
    return np.array([
        [(cc / c2) ** 2, -cc / c2, -cc / c2, 1],
        [(abs(c1) / c2) ** 2, -cc / c2, -c1 / c2, 1],
        [(abs(c1) / c2) ** 2, -c1 / c2, -cc / c2, 1],
        [(c1 / c2) ** 2, -c1 / c2, -c1 / c2, 1],
    ], dtype=complex)


def forward_matrix(k: PointerConstants, g: float, lam: float, p_f: float, kv: PointerConstants | None = None) -> np.ndarray:
    """Linear map (X, X~, X~*, X*) -> (r1, r2, r3, r4) at leading order."""
    if kv is None:
        scale = np.diag([k.c2**2, k.c2, k.c2, 1.0])
        return (-g * lam / p_f) * scale @ s6_matrix(k)
    mu = np.array([[k.c2, -k.c2], [k.c1, -np.conj(k.c1)]])
    mv = np.array([[kv.c2, -kv.c2], [kv.c1, -np.conj(kv.c1)]])
    return (-g * lam / p_f) * np.kron(mu, mv)


def inverse_matrix(k: PointerConstants, g: float, lam: float, p_f: float, kv: PointerConstants | None = None) -> np.ndarray:
    """Linear map (r1..r4) -> (X, X~, X~*, X*); raises when Im c1 vanishes."""
    for kk in (k, kv):
        if kk is not None and abs(kk.c1.imag) <= 1e-9:
            raise SingularInversionError("Im c1 = 0: the r-value inversion is singular for this pointer")
    if kv is None:
        c1 = k.c1
        return (-p_f / (g * lam * (c1 - np.conj(c1)) ** 2)) * s7_matrix(k)

    def inv2(kk):
        c1, c2 = kk.c1, kk.c2
        return np.array([[-np.conj(c1), c2], [-c1, c2]]) / (c2 * (c1 - np.conj(c1)))

    return (-p_f / (g * lam)) * np.kron(inv2(k), inv2(kv))


def x_vector_from_r(rec: RValueRecord, k: PointerConstants, g: float, lam: float,
                    kv: PointerConstants | None = None) -> np.ndarray:
    if g == 0 or lam == 0:
        raise SingularInversionError("zero coupling carries no X information")
    return inverse_matrix(k, g, lam, rec.p_f, kv) @ rec.r


def x_from_r(rec: RValueRecord, k: PointerConstants, g: float, lam: float,
             kv: PointerConstants | None = None) -> tuple[complex, complex]:
    """(X, X~) from the four r-values and the post-selection probability."""
    v = x_vector_from_r(rec, k, g, lam, kv)
    return complex(v[0]), complex(v[1])


def chi_entry(x: complex, bases: BasisQuartet, idx: tuple[int, int, int, int]) -> complex:
    i1, i2, i3, i4 = idx
    den = np.vdot(bases.phi[:, i4], bases.beta[:, i3]) * np.vdot(bases.alpha[:, i2], bases.psi[:, i1])
    if abs(den) <= 1e-9:
        from .process import DegenerateOverlapError

        raise DegenerateOverlapError(f"vanishing denominator at index {idx}")
    return complex(x / den)


def chi_tilde_entry(xt: complex, bases: BasisQuartet, idx: tuple[int, int, int, int]) -> complex:
    i1, i2, i3, i4 = idx
    den = np.vdot(bases.beta[:, i3], bases.phi[:, i4]) * np.vdot(bases.alpha[:, i2], bases.psi[:, i1])
    if abs(den) <= 1e-9:
        from .process import DegenerateOverlapError

        raise DegenerateOverlapError(f"vanishing denominator at index {idx}")
    return complex(xt / den)


# --------------------------------------------------------- reconstruction --

def ground_truth(ch: KrausChannel, bases: BasisQuartet) -> ChiTensor:
    if bases.is_nondegenerate():
        return chi_from_channel(ch, bases)
    return chi_matrix_elements(ch, bases)


def parallel_map(fn, items, workers: int | None):
    if not workers or workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def reconstruct(
    ch: KrausChannel,
    bases: BasisQuartet,
    pu: PointerSpec | None = None,
    pv: PointerSpec | None = None,
    g: float = 1e-3,
    lam: float = 1e-3,
    mode: str = "perturbative",
    shots: int | None = None,
    seed: int = 0,
    with_truth: bool = True,
    workers: int | None = None,
    implemented: tuple | None = None,
) -> ReconstructionReport:
    """Full tomography loop: d_in setups, each covering every (i2, i3, i4).

    ``implemented`` optionally gives the (psi, alpha, beta, phi) vectors that
    are actually prepared and measured, e.g. slightly misaligned versions of
    the nominal quartet; the nominal quartet still supplies the denominators.
    """
    t0 = time.perf_counter()
    pu = qubit_pointer() if pu is None else pu
    pv = pu if pv is None else pv
    if (ch.d_in, ch.d_out) != (bases.d_in, bases.d_out):
        raise ValueError("channel and bases disagree on dimensions")
    bases.check_nondegenerate()
    ku, kv = pu.constants, pv.constants
    kv_arg = None if np.isclose(ku.c1, kv.c1) and np.isclose(ku.c2, kv.c2) else kv
    din, dout = bases.d_in, bases.d_out

    jobs = [(i1, i2, i3) for i1 in range(din) for i2 in range(din) for i3 in range(dout)]

    psi, alpha, beta, phi = implemented if implemented is not None else (bases.psi, bases.alpha, bases.beta, bases.phi)

    def run(job):
        i1, i2, i3 = job
        s = Setting(projector(psi[:, i1]), projector(alpha[:, i2]), projector(beta[:, i3]), phi, 0)
        stream = ((i1 * din + i2) * dout + i3,)
        return simulate_outcomes(ch, s, pu, pv, g, lam, mode, shots, seed, stream)

    results = parallel_map(run, jobs, workers)
    chi = np.full((din, din, dout, dout), np.nan + 1j * np.nan)
    xts = np.full_like(chi, np.nan + 1j * np.nan)
    missing = []
    records = {}
    for (i1, i2, i3), recs in zip(jobs, results):
        for i4, rec in enumerate(recs):
            idx = (i1, i2, i3, i4)
            records[idx] = rec
            if rec.starved:
                missing.append(idx)
                continue
            x, xt = x_from_r(rec, ku, g, lam, kv_arg)
            chi[idx] = chi_entry(x, bases, idx)
            xts[idx] = xt
    chi_hat = ChiTensor(bases, chi)
    truth = ground_truth(ch, bases) if with_truth else None
    dist = chi_distance(chi_hat, truth) if truth is not None else None
    report = ReconstructionReport(
        chi_hat=chi_hat,
        truth_distance=dist,
        setup_count=din,
        values_per_parameter=5,
        mode=mode,
        coupling=(g, lam),
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        scheme="weak",
        missing=missing,
        chi_tilde=tilde_from_x(xts, bases),
        truth=truth,
        diagnostics={"records": records},
    )
    return report


# ------------------------------------------------------------ parallelism --

def simulate_parallel_setup(
    ch: KrausChannel,
    bases: BasisQuartet,
    input_index: int,
    pointer_specs: Sequence[PointerSpec] | None = None,
    strengths: Sequence[float] | tuple[float, float] = (1e-3, 1e-3),
    mode: str = "exact",
    cap: int = engine.DEFAULT_DIM_CAP,
) -> dict:
    """One setup with every pre- and post-channel pointer coupled at once.

    Pointer j < d_in measures |alpha_j><alpha_j| before the channel; pointer
    d_in + k measures |beta_k><beta_k| after it. Returns the records for every
    (i2, i3, i4) read off the single final state.
    """
    din, dout = bases.d_in, bases.d_out
    n = din + dout
    specs = list(pointer_specs) if pointer_specs is not None else [qubit_pointer()] * n
    if len(specs) != n:
        raise ValueError(f"need {n} pointer specs, got {len(specs)}")
    strengths = list(strengths)
    if len(strengths) == 2 and n != 2:
        strengths = [strengths[0]] * din + [strengths[1]] * dout
    if len(strengths) != n:
        raise ValueError(f"need {n} coupling strengths")
    nz = [abs(x) for x in strengths if x != 0]
    if nz and max(nz) / min(nz) > 16:
        raise ValueError("all coupling strengths must lie within a factor 4 of a common scale")
    dims = [din] + [sp.dim for sp in specs]
    engine.check_cap(dims, cap)
    steps = [Coupling(0, 1 + j, projector(bases.alpha[:, j]), specs[j], strengths[j]) for j in range(din)]
    steps.append(ChannelStep(ch, (0,)))
    steps += [Coupling(0, 1 + din + k, projector(bases.beta[:, k]), specs[din + k], strengths[din + k]) for k in range(dout)]
    rho0 = engine.initial_state([projector(bases.psi[:, input_index])] + [sp.sigma for sp in specs])
    if mode == "exact":
        rho, dims = engine.evolve_exact(rho0, dims, steps, cap)
    elif mode == "perturbative":
        rho, dims = engine.evolve_series(rho0, dims, steps, 2, cap)
    else:
        raise ValueError("parallel setups are simulated in exact or perturbative mode")
    cb = engine.condition(rho, dims, [0], bases.phi)
    probs = cb.probabilities
    out = {}
    for i2 in range(din):
        for i3 in range(dout):
            su, sv = specs[i2], specs[din + i3]
            pos_u, pos_v = i2, din + i3
            for i4 in range(dout):
                p = probs[i4]
                if p < STARVED_P:
                    nan = float("nan")
                    out[(i2, i3, i4)] = RValueRecord(nan, nan, nan, nan, float(max(p, 0)), mode)
                    continue
                rs = [cb.correlator(i4, {pos_u: su.observable(x), pos_v: sv.observable(y)}).real / p
                      for x, y in READOUTS]
                out[(i2, i3, i4)] = RValueRecord(*rs, p_f=float(p), shots=mode)
    return out


def reconstruct_parallel(
    ch: KrausChannel,
    bases: BasisQuartet,
    pointer_specs: Sequence[PointerSpec] | None = None,
    strengths: Sequence[float] | tuple[float, float] = (1e-3, 1e-3),
    mode: str = "exact",
    cap: int = engine.DEFAULT_DIM_CAP,
) -> ReconstructionReport:
    """Reconstruction from d_in single-setup parallel runs."""
    t0 = time.perf_counter()
    din, dout = bases.d_in, bases.d_out
    n = din + dout
    specs = list(pointer_specs) if pointer_specs is not None else [qubit_pointer()] * n
    st = list(strengths)
    if len(st) == 2 and n != 2:
        st = [st[0]] * din + [st[1]] * dout
    chi = np.full((din, din, dout, dout), np.nan + 1j * np.nan)
    missing = []
    for i1 in range(din):
        recs = simulate_parallel_setup(ch, bases, i1, specs, st, mode, cap)
        for (i2, i3, i4), rec in recs.items():
            idx = (i1, i2, i3, i4)
            if rec.starved:
                missing.append(idx)
                continue
            ku, kv = specs[i2].constants, specs[din + i3].constants
            x, _ = x_from_r(rec, ku, st[i2], st[din + i3], kv)
            chi[idx] = chi_entry(x, bases, idx)
    chi_hat = ChiTensor(bases, chi)
    truth = ground_truth(ch, bases)
    return ReconstructionReport(
        chi_hat=chi_hat,
        truth_distance=chi_distance(chi_hat, truth),
        setup_count=din,
        values_per_parameter=5,
        mode=mode,
        coupling=(st[0], st[-1]),
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        scheme="weak-parallel",
        missing=missing,
        truth=truth,
    )
