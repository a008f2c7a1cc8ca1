"""How the reconstruction error depends on coupling strength and shot count.

Exact pointer dynamics leave a bias that shrinks with the coupling; finite
sampling adds noise that shrinks as one over the square root of the shots.

    python3 demos/coupling_and_shots.py
"""

import numpy as np

from weakqpt import weak
from weakqpt.pointers import qubit_pointer
from weakqpt.process import default_bases, standard_channel

ch = standard_channel("depolarizing", p=0.4)
bases = default_bases(2)
pointer = qubit_pointer()

print("coupling bias (exact dynamics)")
gs = [8e-3, 4e-3, 2e-3, 1e-3]
errs = []
for g in gs:
    rep = weak.reconstruct(ch, bases, pointer, g=g, lam=g, mode="exact")
    errs.append(rep.truth_distance.max_abs)
    print(f"  g = lambda = {g:.0e}   max error {errs[-1]:.3e}")
print(f"  fitted order {np.polyfit(np.log(gs), np.log(errs), 1)[0]:.2f}")

print("sampling noise at g = lambda = 0.3")
shots = [2_000, 20_000, 200_000]
errs = []
for n in shots:
    rep = weak.reconstruct(ch, bases, pointer, g=0.3, lam=0.3, mode="sampled", shots=n, seed=7)
    errs.append(rep.truth_distance.max_abs)
    print(f"  shots {n:>7d}   max error {errs[-1]:.3e}")
print(f"  fitted exponent {np.polyfit(np.log(shots), np.log(errs), 1)[0]:.2f}")
