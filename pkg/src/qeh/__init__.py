"""Numerical testbench for the classical and quantum ergodic hierarchies."""

from ._version import __version__
from .classical import (
    ArcSet,
    CellSet,
    ClassifierParams,
    GridDensity,
    MapSpec,
    apply_map,
    cesaro_correlation,
    classify_set_level,
    density_correlation,
    frobenius_perron,
    generate_sigma_sample,
    koopman,
    set_correlation,
)
from .errors import *  # noqa: F401,F403
from .hierarchy import (
    EquilibriumState,
    Trajectory,
    estimate_equilibrium,
    independence_factorization_residual,
    quantum_verdict,
    test_quantum_bernoulli,
    test_quantum_ergodic,
    test_quantum_kolmogorov,
    test_quantum_mixing,
)
from .hilbert import (
    DensityState,
    EigenSystem,
    Observable,
    Unitary,
    eig_unitary,
    evolve,
    heisenberg,
    make_density,
    make_observable,
    make_unitary,
    quantum_correlation,
    trace_pair,
)
from .rotator import (
    RotatorSpec,
    build_floquet,
    cesaro_limit_check,
    momentum_distribution,
    regime_report,
    rotator_trajectory,
)
from .verdict import LEVELS, HierarchyVerdict, LevelResult
from .wigner import WeylSymbol, inverse_weyl, pairing_check, wigner_transform
from .dephasing import SpectrumSpec, AmplitudeSplit, amplitude_series, cesaro_average, quasi_continuous_interference
