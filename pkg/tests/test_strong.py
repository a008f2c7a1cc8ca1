import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from weakqpt import strong, weak
from weakqpt.pointers import gaussian_pointer, qubit_pointer
from weakqpt.process import (
    KrausChannel,
    computational_basis,
    default_bases,
    fourier_basis,
    hadamard_basis,
    standard_channel,
    x_value_analytic,
)
from weakqpt.strong import ProjectorRequired, StrongKnowns
from weakqpt.weak import RValueRecord, Setting

KET0 = np.diag([1.0, 0.0]).astype(complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)
QUBIT = qubit_pointer()
IDENTITY = standard_channel("identity")


def proj(v):
    return np.outer(v, v.conj())


# ----------------------------------------------------------------- moments --

def test_first_moment_vanishes():
    mt = strong.pointer_moments(QUBIT, 0.8)
    assert mt[("p", "I", "I")] == 0 and mt[("q", "I", "I")] == 0


@pytest.mark.parametrize("g", [0.1, 0.7, 1.3])
def test_qubit_moment_hand_value(g):
    assert np.isclose(strong.pointer_moments(QUBIT, g)[("q", "D", "I")], -np.sin(g))


@pytest.mark.parametrize("pointer", [QUBIT, gaussian_pointer(0.6)])
def test_moments_reduce_to_weak_constants(pointer):
    s = 1e-6
    mt = strong.pointer_moments(pointer, s)
    k = pointer.constants
    assert np.isclose(mt[("q", "D", "I")], -1j * s * k.c1, rtol=1e-5)
    assert np.isclose(mt[("p", "D", "I")], -1j * s * k.c2, rtol=1e-5)


# ----------------------------------------------------- auxiliary experiments

def test_transfer_probability_examples():
    c, h = computational_basis(2), hadamard_basis(2)
    for a in range(2):
        for b in range(2):
            assert np.isclose(strong.aux_transfer_prob(IDENTITY, proj(c[:, a]), proj(c[:, b])), float(a == b))
            assert np.isclose(strong.aux_transfer_prob(IDENTITY, proj(c[:, a]), proj(h[:, b])), 0.5)
            dep = standard_channel("depolarizing", p=1.0)
            assert np.isclose(strong.aux_transfer_prob(dep, proj(c[:, a]), proj(h[:, b])), 0.5)


def test_transfer_probability_sampled_is_deterministic():
    a = strong.aux_transfer_prob(IDENTITY, PLUS, KET0, shots=1000, seed=4)
    assert a == strong.aux_transfer_prob(IDENTITY, PLUS, KET0, shots=1000, seed=4)
    assert abs(a - 0.5) < 0.1


def test_pre_coupling_hand_example():
    for g in (0.3, 0.9):
        z = strong.aux_pre_coupling(IDENTITY, KET0, PLUS, PLUS, QUBIT, g)
        assert np.isclose(z, 0.5, atol=1e-12)


def test_pre_coupling_with_input_projector_is_real_transfer():
    ch = standard_channel("amplitude_damping", gamma=0.4)
    b = proj(fourier_basis(2)[:, 1])
    z = strong.aux_pre_coupling(ch, PLUS, PLUS, b, QUBIT, 0.6)
    assert np.isclose(z, np.trace(b @ ch(PLUS)), atol=1e-12)
    assert abs(z.imag) < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pre_coupling_matches_analytic_for_random_unitaries(seed):
    rng = np.random.default_rng(seed)
    ch = KrausChannel((oracles.random_unitary(2, rng),))
    rho = proj(oracles.random_unitary(2, rng)[:, 0])
    a = proj(oracles.random_unitary(2, rng)[:, 0])
    b = proj(oracles.random_unitary(2, rng)[:, 0])
    z = strong.aux_pre_coupling(ch, rho, a, b, QUBIT, 0.5)
    assert abs(z - np.trace(b @ ch(a @ rho))) <= 1e-10


def test_post_coupling_examples():
    ch = standard_channel("amplitude_damping", gamma=0.3)
    b = proj(fourier_basis(2)[:, 1])
    w = strong.aux_post_coupling(ch, PLUS, b, np.eye(2), QUBIT, 0.7)
    assert w == strong.aux_transfer_prob(ch, PLUS, b) and w.imag == 0
    assert np.isclose(strong.aux_post_coupling(IDENTITY, PLUS, PLUS, KET0, QUBIT, 0.7), 0.5, atol=1e-12)


def test_post_coupling_matches_analytic_for_damping():
    ch = standard_channel("amplitude_damping", gamma=0.3)
    a = proj(fourier_basis(2)[:, 1])
    b = proj(np.array([np.cos(0.4), np.sin(0.4) * 1j]))
    pf = proj(np.array([np.cos(1.1), np.sin(1.1)]))
    w = strong.aux_post_coupling(ch, a, b, pf, QUBIT, 0.7)
    assert abs(w - np.trace(pf @ b @ ch(a))) <= 1e-10


def test_non_projector_rejected():
    with pytest.raises(ProjectorRequired):
        strong.aux_transfer_prob(IDENTITY, np.eye(2), PLUS)
    with pytest.raises(ProjectorRequired):
        strong.aux_pre_coupling(IDENTITY, KET0, np.diag([1.0, 0.5]), PLUS, QUBIT, 0.3)


# --------------------------------------------------------------- main solve --

def test_zero_inputs_give_zero():
    mt = strong.pointer_moments(QUBIT, 0.7)
    sol = strong.solve_x_strong(RValueRecord(0, 0, 0, 0, 0.5), StrongKnowns(0, 0, 0), mt, mt, (0.5, 0.5))
    assert sol.x == 0 and sol.x_tilde == 0


def solve_setting(ch, s, g, lam):
    rec = weak.simulate_run_exact(ch, s, QUBIT, QUBIT, g, lam)
    pt = strong.aux_transfer_prob(ch, s.a, s.b)
    z = strong.aux_pre_coupling(ch, s.rho, s.a, s.b, QUBIT, g, pt)
    w = strong.aux_post_coupling(ch, s.a, s.b, s.pf, QUBIT, lam, pt)
    wa = np.trace(s.a @ s.rho).real
    wb = np.trace(s.pf @ s.b).real
    return rec, strong.solve_x_strong(rec, StrongKnowns(pt, z, w), strong.pointer_moments(QUBIT, g),
                                      strong.pointer_moments(QUBIT, lam), (wa, wb))


def test_strong_solution_exact_at_large_coupling():
    b = default_bases(2)
    s = Setting.from_indices(b, 0, 1, 1, 0)
    _, sol = solve_setting(IDENTITY, s, 0.7, 0.7)
    x, xt = x_value_analytic(IDENTITY, s.rho, s.a, s.b, s.pf)
    assert abs(sol.x - x) <= 1e-9 and abs(sol.x_tilde - xt) <= 1e-9
    assert sol.conjugation_gap < 1e-9


def test_strong_solution_reduces_to_weak_inversion():
    b = default_bases(2)
    ch = standard_channel("amplitude_damping", gamma=0.2)
    s = Setting.from_indices(b, 1, 0, 1, 1)
    rec, sol = solve_setting(ch, s, 1e-3, 1e-3)
    xw, _ = strong.weak_limit_check(rec, QUBIT, QUBIT, 1e-3, 1e-3)
    assert abs(sol.x - xw) <= 1e-6


# ----------------------------------------------------------- reconstruction --

def test_hadamard_at_strong_coupling():
    rep = strong.reconstruct_strong(standard_channel("unitary", gate="hadamard"), default_bases(2), g=0.7, lam=0.7)
    assert rep.truth_distance.max_abs <= 1e-9
    assert rep.aux_experiments_per_parameter == 3
    assert rep.diagnostics["max_conjugation_gap"] < 1e-9


def test_damping_at_unit_coupling_with_gaussian_pointer():
    ch = standard_channel("amplitude_damping", gamma=0.5)
    rep = strong.reconstruct_strong(ch, default_bases(2), gaussian_pointer(0.7, 24), g=1.0, lam=1.0)
    assert rep.truth_distance.max_abs <= 1e-9


def test_strong_agrees_with_weak_in_weak_limit():
    ch = standard_channel("amplitude_damping", gamma=0.3)
    st_rep = strong.reconstruct_strong(ch, default_bases(2), g=1e-3, lam=1e-3)
    wk_rep = weak.reconstruct(ch, default_bases(2), g=1e-3, lam=1e-3, mode="exact")
    assert np.abs(st_rep.chi_hat.chi - wk_rep.chi_hat.chi).max() <= 1e-5


def test_sampled_strong_is_deterministic_and_close():
    ch = IDENTITY
    a = strong.reconstruct_strong(ch, default_bases(2), g=0.8, lam=0.8, mode="sampled", shots=200_000, seed=1)
    b = strong.reconstruct_strong(ch, default_bases(2), g=0.8, lam=0.8, mode="sampled", shots=200_000, seed=1)
    assert np.array_equal(a.chi_hat.chi, b.chi_hat.chi)
    assert a.truth_distance.max_abs < 0.1


def test_mode_validation():
    with pytest.raises(ValueError):
        strong.reconstruct_strong(IDENTITY, default_bases(2), mode="perturbative")
    with pytest.raises(ValueError):
        strong.reconstruct_strong(IDENTITY, default_bases(2), mode="sampled")
