"""Single-excitation cavity-QED models of molecular aggregates.

Builders for Jaynes-Cummings, Tavis-Cummings, Frenkel exciton and combined
TC-Kasha Hamiltonians, two eigensolvers, disorder sampling and polariton
analysis (branch classification, sign-flip scans).
"""

from .errors import (
    ClassificationError,
    ConvergenceError,
    InvalidInputError,
    PoleError,
    PolchainError,
    SampleError,
    SingularityError,
)
from .units import ANGSTROM_TO_BOHR, HARTREE_TO_EV, ev_to_hartree, hartree_to_ev
from .geometry import ChainGeometry, chain_geometry, dipole_dipole_coupling, rotate_dipole
from .model import (
    AggregateSpec,
    Arrangement,
    BasisLabel,
    CavitySpec,
    CouplingMode,
    DisorderRealization,
    ModelMatrix,
    Structure,
    build_disordered_tc,
    build_jc,
    build_kasha_exciton,
    build_replicated,
    build_tc,
    build_tc_impurity,
    build_tc_kasha,
    build_tc_kasha_disordered,
    coupling_strength,
)
from .geometry import rotated_dipoles
from .eig import (
    EigenDecomposition,
    arrowhead_eig,
    dense_symmetric_eig,
    diagonalize,
    perturbative_polariton_energies,
    secular_eval,
)
from .analysis import (
    LambdaRule,
    PolaritonReport,
    ScanRow,
    SignFlip,
    SpectrumData,
    State,
    avoided_crossing_gap,
    broadened_spectrum,
    brightest_exciton_energy,
    classify_states,
    coefficient_scan,
    detect_sign_flip,
    oscillator_strengths,
    rabi_splitting,
)
from .disorder import (
    DisorderSpec,
    EnsembleStats,
    Xoshiro256,
    disorder_scan,
    ensemble_polariton_stats,
    realization_from_angles,
    sample_realization,
)
from .config import RunConfig, parse_config, serialize

__all__ = [
    "ANGSTROM_TO_BOHR",
    "AggregateSpec",
    "Arrangement",
    "BasisLabel",
    "CavitySpec",
    "ChainGeometry",
    "ClassificationError",
    "ConvergenceError",
    "CouplingMode",
    "DisorderRealization",
    "DisorderSpec",
    "EigenDecomposition",
    "EnsembleStats",
    "HARTREE_TO_EV",
    "InvalidInputError",
    "LambdaRule",
    "ModelMatrix",
    "PolaritonReport",
    "PolchainError",
    "PoleError",
    "RunConfig",
    "SampleError",
    "ScanRow",
    "SignFlip",
    "SingularityError",
    "SpectrumData",
    "State",
    "Structure",
    "Xoshiro256",
    "arrowhead_eig",
    "avoided_crossing_gap",
    "brightest_exciton_energy",
    "broadened_spectrum",
    "build_disordered_tc",
    "build_jc",
    "build_kasha_exciton",
    "build_replicated",
    "build_tc",
    "build_tc_impurity",
    "build_tc_kasha",
    "build_tc_kasha_disordered",
    "chain_geometry",
    "classify_states",
    "coefficient_scan",
    "coupling_strength",
    "dense_symmetric_eig",
    "detect_sign_flip",
    "diagonalize",
    "dipole_dipole_coupling",
    "disorder_scan",
    "ensemble_polariton_stats",
    "ev_to_hartree",
    "hartree_to_ev",
    "oscillator_strengths",
    "parse_config",
    "perturbative_polariton_energies",
    "rabi_splitting",
    "realization_from_angles",
    "rotate_dipole",
    "rotated_dipoles",
    "sample_realization",
    "secular_eval",
    "serialize",
]

__version__ = "0.1.0"
