"""The alternative schemes side by side on the same qubit channel.

    python3 demos/variants_tour.py
"""

from weakqpt import strong, variants, weak
from weakqpt.pointers import qubit_pointer, tilted_qubit_pointer
from weakqpt.process import default_bases, standard_channel

ch = standard_channel("amplitude_damping", gamma=0.3)
bases = default_bases(2)


def show(label, rep):
    print(f"{label:28s} setups={rep.setup_count:<3d} max error {rep.truth_distance.max_abs:.2e}")


show("weak, two couplings", weak.reconstruct(ch, bases))
show("strong coupling g = 0.8", strong.reconstruct_strong(ch, bases, g=0.8, lam=0.8))
show("sigma-x observables", variants.reconstruct_qubit_sigma_x(ch))
show("sigma-x, r4 only (tilted)", variants.reconstruct_qubit_sigma_x(ch, tilted_qubit_pointer(), r4_only=True))
show("entangled ancilla", variants.reconstruct_ancilla(ch))

spec = variants.MultiPartiteSpec.uniform(2, bases, 1e-3, 1e-3, qubit_pointer())
cnot = standard_channel("unitary", gate="cnot")
show("two particles, CNOT", variants.reconstruct_multiparticle(cnot, spec))
