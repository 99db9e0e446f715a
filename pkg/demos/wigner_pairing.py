"""
Weyl symbols on a small torus
=============================

For odd N the phase-point operators give an exact dictionary between
operators and functions on the N x N grid.
"""

import numpy as np

from qeh.rng import make_rng, random_hermitian
from qeh.wigner import indicator_correlation, inverse_weyl, pairing_check, quasi_projector, wigner_transform

rng = make_rng(0)
a, b = random_hermitian(rng, 15), random_hermitian(rng, 15)
print("pairing residual", pairing_check(a, b))
print("round trip", np.abs(inverse_weyl(wigner_transform(a)) - a).max())

# A quantized indicator is a projector only approximately.
N = 31
q, p = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
disk = (q - 15) ** 2 + (p - 15) ** 2 <= 100
qp = quasi_projector(disk)
print("idempotency residual", qp.idempotency_residual, "negativity", qp.negativity)

# Set correlations carry over to the quantized sets under Tr(xy)/N.
ic = indicator_correlation(disk, p < 15)
print(ic.set_value, ic.quantum_value, ic.literal_value)
