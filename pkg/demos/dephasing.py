"""
Interference terms average away
===============================

Off-diagonal terms of a projector expectation oscillate at level
differences, so their time average decays like 1/T.
"""

import warnings

import numpy as np

from qeh.dephasing import (SpectrumSpec, amplitude_series, cesaro_average, coherent_state,
                           gaussian_interference, quasi_continuous_interference, random_spectrum)
from qeh.rng import make_rng

rng = make_rng(7)
spec = random_spectrum(rng, 32)
rho = coherent_state(rng, 32)
proj = coherent_state(rng, 32)
split = amplitude_series(spec, rho, proj, np.linspace(0, 50, 6))
print("P_diag", split.p_diag)
print("P_int(t)", np.round(split.p_int.real, 4))

for T in 10 / spec.min_gap * 2.0 ** np.arange(5):
    r = cesaro_average(split, T)
    print(f"T {T:10.0f}  residual {r.residual_vs_pdiag:.3e}  bound {r.bound:.3e}")

# Two equal levels leave a term that never averages out.
w = spec.energies.copy()
w[5] = w[4]
deg = amplitude_series(SpectrumSpec.from_energies(w), rho, proj, [0.0])
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    r = cesaro_average(deg, 1e8)
print(caught[0].message, r.residual_vs_pdiag)

# With a continuum of levels the same cancellation happens in space.
g = lambda k: np.exp(-k**2 / 2)
for x in (0, 1, 2, 5, 10):
    print(x, quasi_continuous_interference(g, x), gaussian_interference(x))
