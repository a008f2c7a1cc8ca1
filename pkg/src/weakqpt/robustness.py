"""Sensitivity of the reconstruction to misaligned preparation and measurement vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .pointers import PointerSpec, qubit_pointer
from .process import BasisQuartet, KrausChannel, default_bases, standard_channel
from .weak import reconstruct


def tilt(v: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate unit vector v by angle delta towards a random orthogonal unit direction."""
    d = len(v)
    w = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    w = w - np.vdot(v, w) * v
    nrm = np.linalg.norm(w)
    if nrm < 1e-14:
        return v.copy()
    return np.cos(delta) * v + np.sin(delta) * (w / nrm)


def perturb_quartet(bases: BasisQuartet, delta: float, rng: np.random.Generator) -> tuple:
    """Independently tilted copies of every vector of the four bases."""
    out = []
    for m in (bases.psi, bases.alpha, bases.beta, bases.phi):
        out.append(np.stack([tilt(m[:, k], delta, rng) for k in range(m.shape[1])], axis=1))
    return tuple(out)


@dataclass
class DimAccumulation:
    dim: int
    delta: float
    mean_abs_over_delta: float
    mean_max_over_delta: float
    trial_means: list = field(default_factory=list)
    trial_max: list = field(default_factory=list)


@dataclass
class ErrorAccumulation:
    per_dim: dict
    slope: float
    slope_points: list

    def ratio(self, metric: str = "mean_max_over_delta") -> float:
        """Largest over smallest per-dimension value of the chosen summary."""
        vals = [getattr(r, metric) for r in self.per_dim.values()]
        return max(vals) / min(vals)


def _mean_error(ch, bases, delta, trials, seed, pu, g, lam):
    means, worst = [], []
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, bases.d_in, t]))
        impl = perturb_quartet(bases, delta, rng)
        rep = reconstruct(ch, bases, pu, g=g, lam=lam, mode="perturbative", implemented=impl)
        diff = np.abs(rep.chi_hat.chi - rep.truth.chi)
        means.append(float(diff.mean()))
        worst.append(float(diff.max()))
    return means, worst


def error_accumulation(
    channel_for: Callable[[int], KrausChannel] | None = None,
    dims: Sequence[int] = (2, 4),
    delta: float = 1e-3,
    trials: int = 25,
    seed: int = 0,
    pointer: PointerSpec | None = None,
    g: float = 1e-3,
    lam: float = 1e-3,
    slope_factors: Sequence[float] = (0.5, 1.0, 2.0),
) -> ErrorAccumulation:
    """Chi error per unit misalignment angle, per dimension, plus a log-log slope in delta.

    Two summaries are kept per dimension: the mean |error| over all entries
    and trials, and the trial mean of the largest entry error.

    The slope is fitted on the first dimension using the same random tilt
    directions for every delta, so it isolates the response to the angle.
    """
    if delta < 0 or delta > 1e-2:
        raise ValueError("delta must lie in [0, 1e-2]")
    if trials < 1:
        raise ValueError("trials must be positive")
    channel_for = channel_for or (lambda d: standard_channel("identity", d=d))
    pu = qubit_pointer() if pointer is None else pointer
    per_dim = {}
    for d in dims:
        ch = channel_for(d)
        bases = default_bases(ch.d_in, ch.d_out)
        means, worst = _mean_error(ch, bases, delta, trials, seed, pu, g, lam)
        scale = delta if delta > 0 else 1.0
        per_dim[d] = DimAccumulation(d, delta, float(np.mean(means)) / scale, float(np.mean(worst)) / scale,
                                     means, worst)
    slope = float("nan")
    points = []
    if delta > 0 and len(slope_factors) >= 2:
        ch = channel_for(dims[0])
        bases = default_bases(ch.d_in, ch.d_out)
        for fct in slope_factors:
            means, _ = _mean_error(ch, bases, delta * fct, trials, seed, pu, g, lam)
            points.append((delta * fct, float(np.mean(means))))
        x = np.log([p[0] for p in points])
        y = np.log([p[1] for p in points])
        slope = float(np.polyfit(x, y, 1)[0])
    return ErrorAccumulation(per_dim, slope, points)
