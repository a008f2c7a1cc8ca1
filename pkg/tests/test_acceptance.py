"""End-to-end acceptance checks; each prints one PASS/FAIL line (run with -s to see them)."""

import time

import numpy as np

import oracles
from weakqpt import variants, weak
from weakqpt.numkit import random_density
from weakqpt.pointers import gaussian_pointer, qubit_pointer, tilted_qubit_pointer
from weakqpt.process import (
    KrausChannel,
    apply_chi,
    apply_kraus,
    chi_from_channel,
    default_bases,
    standard_channel,
)
from weakqpt.robustness import error_accumulation
from weakqpt.strong import reconstruct_strong


def verdict(label, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, f"{label}: {detail}"


def channels_at(d, rng):
    out = [
        standard_channel("identity", d=d),
        standard_channel("unitary", u=oracles.random_unitary(d, rng)),
        standard_channel("depolarizing", p=0.4, d=d),
    ]
    if d == 2:
        out.append(standard_channel("amplitude_damping", gamma=0.3))
    return out


def lifted_damping(d, gamma):
    """Qubit amplitude damping acting on the two lowest levels of a qudit."""
    k0 = np.eye(d, dtype=complex)
    k0[1, 1] = np.sqrt(1 - gamma)
    k1 = np.zeros((d, d), dtype=complex)
    k1[0, 1] = np.sqrt(gamma)
    return KrausChannel((k0, k1), name="amplitude_damping")


def test_oracle_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for d in (2, 3, 4):
        chans = channels_at(d, rng) + ([] if d == 2 else [lifted_damping(d, 0.3)])
        bases = default_bases(d)
        for ch in chans:
            t = chi_from_channel(ch, bases)
            for _ in range(10):
                rho = random_density(d, rng)
                worst = max(worst, float(np.abs(apply_chi(t, rho) - apply_kraus(ch, rho)).max()))
    dt = time.perf_counter() - t0
    verdict("1 oracle round trip", worst <= 1e-10 and dt < 5, f"max err {worst:.2e}, {dt:.2f} s")


def test_perturbative_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    worst, runs = 0.0, 0
    for d in (2, 3):
        for ch in channels_at(d, rng) + [standard_channel("unitary", gate="hadamard")] * (d == 2):
            rep = weak.reconstruct(ch, default_bases(d), mode="perturbative")
            worst = max(worst, rep.truth_distance.max_abs)
            assert not rep.missing
            runs += 1
    dt = time.perf_counter() - t0
    verdict("2 perturbative exactness", worst <= 1e-10 and dt < 30, f"{runs} channels, max err {worst:.2e}, {dt:.2f} s")


def test_inversion_matrix_identity():
    t0 = time.perf_counter()
    consts = [qubit_pointer().constants, tilted_qubit_pointer().constants]
    consts += [gaussian_pointer(delta).constants for delta in (0.5, 1.0, 2.0)]
    worst = 0.0
    for k in consts:
        scale = np.diag([k.c2**2, k.c2, k.c2, 1.0])
        prod = weak.s7_matrix(k) @ scale @ weak.s6_matrix(k) / (k.c1 - np.conj(k.c1)) ** 2
        worst = max(worst, float(np.abs(prod - np.eye(4)).max()))
        full = weak.inverse_matrix(k, 1e-3, 2e-3, 0.3) @ weak.forward_matrix(k, 1e-3, 2e-3, 0.3)
        worst = max(worst, float(np.abs(full - np.eye(4)).max()))
    dt = time.perf_counter() - t0
    verdict("3 inversion matrix identity", worst <= 1e-12 and dt < 1, f"max |S7 S6 - I| {worst:.2e}")


def test_weak_limit_convergence():
    t0 = time.perf_counter()
    ch = standard_channel("identity", d=2)
    errs = [weak.reconstruct(ch, default_bases(2), g=g, lam=g, mode="exact").truth_distance.max_abs
            for g in (8e-3, 4e-3, 2e-3, 1e-3)]
    dt = time.perf_counter() - t0
    ok = all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] <= 5e-3 and dt < 10
    verdict("4 weak-limit convergence", ok, "errors " + ", ".join(f"{e:.2e}" for e in errs))


def test_strong_coupling_exactness():
    t0 = time.perf_counter()
    chans = [standard_channel("unitary", gate="hadamard"), standard_channel("amplitude_damping", gamma=0.5)]
    worst = 0.0
    for ch in chans:
        for s in (0.7, 1.0):
            rep = reconstruct_strong(ch, default_bases(2), g=s, lam=s)
            worst = max(worst, rep.truth_distance.max_abs)
    dt = time.perf_counter() - t0
    verdict("5 strong-coupling exactness", worst <= 1e-9 and dt < 30, f"max err {worst:.2e}, {dt:.2f} s")


def test_resource_accounting():
    ok = True
    for d in (2, 3):
        rep = weak.reconstruct(standard_channel("identity", d=d), default_bases(d))
        ok &= rep.setup_count == d and rep.values_per_parameter == 5
    sx = variants.reconstruct_qubit_sigma_x(standard_channel("identity", d=2))
    ok &= sx.values_per_parameter == 5
    anc = variants.reconstruct_ancilla(standard_channel("identity", d=2))
    ok &= anc.setup_count == 1 and anc.values_per_parameter == 5
    st = reconstruct_strong(standard_channel("identity", d=2), default_bases(2))
    ok &= st.aux_experiments_per_parameter == 3
    verdict("6 resource accounting", bool(ok), "weak setups = d_in, ancilla setups = 1, 5 values per parameter")


def test_sampling_envelope():
    t0 = time.perf_counter()
    ch = standard_channel("identity", d=2)
    bases = default_bases(2)
    pu = qubit_pointer()
    g = lam = 0.1
    settings = [weak.Setting.from_indices(bases, i1, i2, i3, 0)
                for i1 in range(2) for i2 in range(2) for i3 in range(2)]
    exact = [weak.simulate_outcomes_exact(ch, s, pu, pu, g, lam) for s in settings]
    inside = total = 0
    mean_err = {}
    for shots in (10**4, 10**5, 10**6):
        errs = []
        for seed in range(20):
            for k, s in enumerate(settings):
                recs = weak.simulate_outcomes_sampled(ch, s, pu, pu, g, lam, shots, seed, (k,))
                for f, (rs, rx) in enumerate(zip(recs, exact[k])):
                    if rx.p_f < 1e-3:
                        continue
                    errs.extend(np.abs(rs.r - rx.r))
                    if shots == 10**6:
                        for j in range(4):
                            total += 1
                            # r = +-1 exactly gives a zero-variance sample; 1e-12 absorbs roundoff
                            inside += abs(rs.r[j] - rx.r[j]) <= 5 * rs.r_stderr[j] + 1e-12
        mean_err[shots] = float(np.mean(errs))
    xs = np.log(list(mean_err))
    ys = np.log(list(mean_err.values()))
    slope = float(np.polyfit(xs, ys, 1)[0])
    frac = inside / total
    dt = time.perf_counter() - t0
    ok = frac >= 0.95 and -0.6 <= slope <= -0.4 and dt < 180
    verdict("7 sampling envelope", ok, f"{inside}/{total} within 5 SE, exponent {slope:.3f}, {dt:.1f} s")


def test_sigma_x_scheme():
    t0 = time.perf_counter()
    chans = [standard_channel("unitary", gate="hadamard"), standard_channel("amplitude_damping", gamma=0.3)]
    pert = max(variants.reconstruct_qubit_sigma_x(ch, mode="perturbative").truth_distance.max_abs for ch in chans)
    exact = max(variants.reconstruct_qubit_sigma_x(ch, mode="exact").truth_distance.max_abs for ch in chans)
    herm = max(variants.reconstruct_qubit_sigma_x(ch).diagnostics["hermiticity_gap"] for ch in chans)
    dt = time.perf_counter() - t0
    ok = pert <= 1e-8 and exact <= 1e-2 and herm <= 1e-10 and dt < 10
    verdict("8 sigma_x scheme", ok, f"perturbative {pert:.2e}, exact {exact:.2e}, hermiticity {herm:.2e}")


def test_r4_only_mode():
    t0 = time.perf_counter()
    k = tilted_qubit_pointer().constants
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(20):
        x1, x2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        p = rng.uniform(0.1, 1, 4)
        w = variants.r4_forward(x1, x2, k, 1e-3, 2e-3)
        got = variants.x_from_r4_only(list(zip(w / p, p)), k, 1e-3, 2e-3)
        worst = max(worst, abs(got[0] - x1), abs(got[1] - x2))
    rejected = False
    try:
        variants.x_from_r4_only([(1.0, 1.0)] * 4, qubit_pointer().constants)
    except weak.SingularInversionError:
        rejected = True
    dt = time.perf_counter() - t0
    verdict("9 r4-only mode", worst <= 1e-12 and rejected and dt < 1,
            f"round trip {worst:.2e}, qubit pointer rejected: {rejected}")


def test_multiparticle_scheme():
    t0 = time.perf_counter()
    b2 = default_bases(2)
    spec = variants.MultiPartiteSpec.uniform(2, b2)
    errs = []
    for ch in (standard_channel("identity", d=4), standard_channel("unitary", gate="cnot")):
        rep = variants.reconstruct_multiparticle(ch, spec, mode="perturbative")
        assert rep.chi_hat.chi.size == 256 and not rep.missing
        errs.append(rep.truth_distance.max_abs)
    ch1 = standard_channel("amplitude_damping", gamma=0.3)
    one = variants.reconstruct_multiparticle(ch1, variants.MultiPartiteSpec.uniform(1, b2), mode="perturbative")
    main = weak.reconstruct(ch1, b2, mode="perturbative")
    red = float(np.abs(one.chi_hat.chi - main.chi_hat.chi).max())
    dt = time.perf_counter() - t0
    ok = max(errs) <= 1e-8 and red <= 1e-12 and dt < 120
    verdict("10 multi-particle scheme", ok, f"N=2 errors {errs[0]:.2e}, {errs[1]:.2e}; N=1 gap {red:.2e}, {dt:.1f} s")


def test_ancilla_scheme():
    t0 = time.perf_counter()
    errs = [variants.reconstruct_ancilla(ch).truth_distance.max_abs
            for ch in (standard_channel("identity", d=2), standard_channel("amplitude_damping", gamma=0.3))]
    cfg = variants.ancilla_input(d=2)
    ent = float(np.abs(cfg.rho_sr - variants.maximally_entangled(2)).max())
    dt = time.perf_counter() - t0
    ok = max(errs) <= 1e-8 and ent <= 1e-12 and dt < 30
    verdict("11 ancilla scheme", ok, f"errors {errs[0]:.2e}, {errs[1]:.2e}; default input vs maximally entangled {ent:.1e}")


def test_error_accumulation():
    t0 = time.perf_counter()
    res = error_accumulation(dims=(2, 4), delta=1e-3, trials=25, seed=0)
    r_mean = res.ratio("mean_abs_over_delta")
    r_max = res.ratio("mean_max_over_delta")
    dt = time.perf_counter() - t0
    ok = r_mean < 3 and r_max < 3 and 0.7 <= res.slope <= 1.3 and dt < 180
    per = ", ".join(f"d={d}: {a.mean_abs_over_delta:.2f}/{a.mean_max_over_delta:.2f}" for d, a in res.per_dim.items())
    verdict("12 error accumulation", ok, f"{per} (mean/max per delta); ratios {r_mean:.2f}, {r_max:.2f}; slope {res.slope:.3f}")
