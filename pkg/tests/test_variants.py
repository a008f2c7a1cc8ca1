import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakqpt import variants, weak
from weakqpt.engine import ResourceError
from weakqpt.pointers import SIGMA_X, gaussian_pointer, qubit_pointer, tilted_qubit_pointer
from weakqpt.process import (
    chi_from_channel,
    computational_basis,
    default_bases,
    standard_channel,
    x_value_analytic,
)
from weakqpt.weak import SingularInversionError

QUBIT = qubit_pointer()
TILTED = tilted_qubit_pointer()
HADAMARD = standard_channel("unitary", gate="hadamard")
DAMPING = standard_channel("amplitude_damping", gamma=0.3)


def proj(v):
    return np.outer(v, v.conj())


# ------------------------------------------------------------ sigma_x scheme

def test_weak_value_from_zero_shifts():
    assert variants.weak_value_from_shifts((0.0, 0.0), QUBIT.constants, 1e-3) == 0


def test_weak_value_hand_example():
    g = 2e-3
    assert np.isclose(variants.weak_value_from_shifts((0.0, -2 * g), QUBIT.constants, g), 1)


def test_weak_value_singular_pointer():
    from weakqpt.pointers import SIGMA_Y, custom_pointer

    flat = custom_pointer(np.eye(2) / 2, SIGMA_X, SIGMA_Y).constants
    with pytest.raises(SingularInversionError):
        variants.weak_value_from_shifts((0.1, 0.1), flat, 1e-3)


@pytest.mark.parametrize("ch", [standard_channel("identity"), HADAMARD, DAMPING], ids=["identity", "hadamard", "damping"])
def test_pre_channel_weak_value_from_perturbative_run(ch):
    g = lam = 1e-3
    runs = variants.qubit_sigma_x_runs(ch, QUBIT, QUBIT, g, lam, "perturbative")
    c = computational_basis(2)
    for (i, f), run in runs.items():
        x = x_value_analytic(ch, proj(c[:, i]), SIGMA_X, np.eye(2), proj(c[:, f]))[0]
        w = variants.weak_value_from_shifts(run.shift_u, QUBIT.constants, g)
        assert abs(w - x / run.p_f) <= 1e-10 * max(1, abs(x / run.p_f))


def test_hadamard_transfer_entry():
    rep = variants.reconstruct_qubit_sigma_x(HADAMARD)
    assert np.isclose(rep.chi_hat.chi[0, 0, 0, 0], 0.5, atol=1e-10)


def test_identity_diagonal_entries():
    rep = variants.reconstruct_qubit_sigma_x(standard_channel("identity"))
    for i in range(2):
        for f in range(2):
            assert np.isclose(rep.chi_hat.chi[i, i, f, f], float(i == f), atol=1e-10)


@pytest.mark.parametrize("ch", [HADAMARD, DAMPING, standard_channel("depolarizing", p=0.6)])
def test_sigma_x_scheme_matches_oracle(ch):
    c = computational_basis(2)
    rep = variants.reconstruct_qubit_sigma_x(ch, mode="perturbative")
    truth = variants.ground_truth(ch, rep.chi_hat.bases)
    assert rep.chi_hat.bases.same_as(default_bases(2).__class__(c, c, c, c))
    assert np.abs(rep.chi_hat.chi - truth.chi).max() <= 1e-8
    assert rep.diagnostics["hermiticity_gap"] <= 1e-10
    assert rep.diagnostics["tilde_gap"] <= 1e-10


def test_sigma_x_exact_mode_close():
    rep = variants.reconstruct_qubit_sigma_x(DAMPING, mode="exact", g=1e-3, lam=1e-3)
    assert rep.truth_distance.max_abs <= 1e-2


def test_probability_correction_is_inverse_of_backaction():
    raw = {(i, f): 0.1 * (1 + i) + 0.05 * f for i in range(2) for f in range(2)}
    g, lam = 0.1, 0.2
    a, b = g**2, lam**2
    measured = {(i, f): raw[i, f] * (1 - a - b) + a * raw[1 - i, f] + b * raw[i, 1 - f]
                for i in range(2) for f in range(2)}
    runs = {k: variants.QubitSigmaXRun(*k, v, (0, 0), (0, 0), None) for k, v in measured.items()}
    got = variants.corrected_probabilities(runs, QUBIT.constants, QUBIT.constants, g, lam)
    assert all(np.isclose(got[k], raw[k]) for k in raw)


def test_sigma_x_needs_a_qubit():
    with pytest.raises(ValueError):
        variants.reconstruct_qubit_sigma_x(standard_channel("identity", d=3))


# ------------------------------------------------------------------ r4 only

def test_r4_zero_gives_zero():
    assert variants.x_from_r4_only([(0.0, 0.5)] * 4, TILTED.constants) == (0, 0)


def test_r4_qubit_pointer_rejected():
    with pytest.raises(SingularInversionError, match="determinant"):
        variants.x_from_r4_only([(0.1, 0.5)] * 4, QUBIT.constants)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.3, 3.0))
def test_r4_round_trip(a, b, c, d, phase):
    from weakqpt.pointers import SIGMA_Y, UP, custom_pointer

    q = np.cos(phase) * SIGMA_X + np.sin(phase) * SIGMA_Y
    k = custom_pointer(UP, SIGMA_X, q).constants
    if abs(k.im_c1_sq) < 0.1:
        return
    x1, x2 = complex(a, b), complex(c, d)
    w = variants.r4_forward(x1, x2, k, 1e-3, 1e-3)
    got = variants.x_from_r4_only([(v, 1.0) for v in w], k, 1e-3, 1e-3)
    assert abs(got[0] - x1) < 1e-12 and abs(got[1] - x2) < 1e-12


@pytest.mark.parametrize("ch", [HADAMARD, DAMPING])
def test_r4_only_reconstruction(ch):
    rep = variants.reconstruct_qubit_sigma_x(ch, TILTED, mode="perturbative", r4_only=True)
    assert rep.scheme == "sigma-x-r4"
    assert rep.truth_distance.max_abs <= 1e-8


# ---------------------------------------------------------- multi-particle --

def test_single_particle_reduces_to_main_scheme():
    b = default_bases(2)
    spec = variants.MultiPartiteSpec.uniform(1, b, pointer=gaussian_pointer(0.9, 12))
    one = variants.reconstruct_multiparticle(DAMPING, spec)
    main = weak.reconstruct(DAMPING, b, gaussian_pointer(0.9, 12))
    assert np.abs(one.chi_hat.chi - main.chi_hat.chi).max() <= 1e-12
    assert one.values_per_parameter == 5


def test_two_particle_cnot_exact_mode_shrinks_with_coupling():
    b = default_bases(2)
    cnot = standard_channel("unitary", gate="cnot")
    errs = []
    for g in (2e-3, 1e-3):
        rep = variants.reconstruct_multiparticle(cnot, variants.MultiPartiteSpec.uniform(2, b, g, g), mode="exact")
        errs.append(rep.truth_distance.max_abs)
    assert errs[1] <= 2e-2 and errs[1] < errs[0]
    assert rep.values_per_parameter == 17 and rep.setup_count == 4


def test_two_particle_product_channel_with_mixed_bases():
    b2 = default_bases(2)
    ch = standard_channel("composite", parts=[{"name": "amplitude_damping", "params": {"gamma": 0.4}},
                                              {"name": "unitary", "params": {"gate": "hadamard"}}])
    spec = variants.MultiPartiteSpec((b2, b2), ((1e-3, 2e-3), (2e-3, 1e-3)), ((QUBIT, QUBIT), (QUBIT, TILTED)))
    rep = variants.reconstruct_multiparticle(ch, spec)
    assert rep.truth_distance.max_abs <= 1e-8


def test_multi_particle_cap_and_validation():
    spec = variants.MultiPartiteSpec.uniform(2, default_bases(2))
    with pytest.raises(ResourceError):
        variants.reconstruct_multiparticle(standard_channel("identity", d=4), spec, cap=32)
    with pytest.raises(ValueError):
        variants.reconstruct_multiparticle(standard_channel("identity", d=2), spec)
    with pytest.raises(ValueError):
        variants.MultiPartiteSpec((default_bases(2),), (), ())


def test_multi_particle_sampled_is_deterministic():
    spec = variants.MultiPartiteSpec.uniform(1, default_bases(2), 0.3, 0.3)
    a = variants.reconstruct_multiparticle(DAMPING, spec, "sampled", shots=4000, seed=2)
    b = variants.reconstruct_multiparticle(DAMPING, spec, "sampled", shots=4000, seed=2)
    assert np.array_equal(a.chi_hat.chi, b.chi_hat.chi, equal_nan=True)


# ----------------------------------------------------------------- ancilla --

@pytest.mark.parametrize("d", [2, 3, 4])
def test_default_input_is_maximally_entangled(d):
    cfg = variants.ancilla_input(d=d)
    assert np.allclose(cfg.rho_sr, variants.maximally_entangled(d), atol=1e-12)
    assert np.isclose(np.trace(cfg.rho_sr), 1)


def test_vanishing_gamma_rejected():
    with pytest.raises(variants.InvalidGammaError):
        variants.ancilla_input(np.diag([0.5, 0.5]))
    with pytest.raises(variants.InvalidGammaError):
        variants.ancilla_input(np.full((3, 3), 1 / 3))
    with pytest.raises(variants.InvalidGammaError):
        variants.ancilla_input(np.full((2, 2), 1.0))


@pytest.mark.parametrize("ch", [standard_channel("identity"), DAMPING, standard_channel("depolarizing", p=0.5, d=3)],
                         ids=["identity", "damping", "depolarizing3"])
def test_ancilla_perturbative_matches_oracle(ch):
    rep = variants.reconstruct_ancilla(ch)
    assert rep.truth_distance.max_abs <= 1e-8
    assert rep.setup_count == 1 and not rep.missing
    assert np.allclose(rep.diagnostics["total_probability"], 1, atol=1e-10)


def test_ancilla_exact_mode_shrinks_with_coupling():
    errs = [variants.reconstruct_ancilla(DAMPING, mode="exact", g=g, lam=g).truth_distance.max_abs for g in (2e-3, 1e-3)]
    assert errs[1] <= 1e-2 and errs[1] < errs[0]


def test_ancilla_product_composition():
    chans = [DAMPING, HADAMARD]
    rep = variants.reconstruct_ancilla_product(chans)
    assert rep.truth_distance.max_abs <= 1e-8
    assert rep.chi_hat.chi.shape == (4, 4, 4, 4)
    direct = chi_from_channel(standard_channel("composite", parts=chans), rep.chi_hat.bases)
    assert np.allclose(rep.truth.chi, direct.chi)


def test_ancilla_sampled_is_deterministic():
    a = variants.reconstruct_ancilla(DAMPING, g=0.3, lam=0.3, mode="sampled", shots=5000, seed=9)
    b = variants.reconstruct_ancilla(DAMPING, g=0.3, lam=0.3, mode="sampled", shots=5000, seed=9)
    assert np.array_equal(a.chi_hat.chi, b.chi_hat.chi, equal_nan=True)
