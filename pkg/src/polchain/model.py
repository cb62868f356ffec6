"""Domain types and builders for single-excitation model Hamiltonians.

Every builder returns a :class:`ModelMatrix` in the first-excitation
manifold: one basis state with the photon excited (``|G,1>``) and one per
excited emitter (``|e_k,0>``). Energies are in Hartree.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .geometry import ChainGeometry, chain_geometry, rotated_dipoles
from .units import DEFAULT_DIPOLE_AU, OMEGA_BULK_EV, OMEGA_IMPURITY_EV, ev_to_hartree

SYMMETRY_ATOL = 1e-14


class Arrangement(enum.Enum):
    H_AGGREGATE = "H"
    J_AGGREGATE = "J"


class CouplingMode(enum.Enum):
    NEAREST_NEIGHBOR = "nearest"
    ALL_PAIRS = "all"


class Structure(enum.Enum):
    ARROWHEAD = "arrowhead"
    ARROWHEAD_PLUS_TRIDIAGONAL = "arrowhead+tridiagonal"
    TRIDIAGONAL = "tridiagonal"
    DENSE = "dense"


@dataclass(frozen=True, order=True)
class BasisLabel:
    """One state of the single-excitation basis.

    ``k`` and ``replica`` are 1-based and only meaningful for emitters.
    """

    kind: str
    k: int = 0
    replica: int = 1

    @classmethod
    def photon(cls):
        return cls("photon")

    @classmethod
    def emitter(cls, k, replica=1):
        return cls("emitter", k, replica)

    @property
    def is_photon(self):
        return self.kind == "photon"

    def __str__(self):
        if self.is_photon:
            return "ph"
        if self.replica == 1:
            return f"e{self.k}"
        return f"e{self.k}_r{self.replica}"


@dataclass(frozen=True)
class AggregateSpec:
    n_emitters: int
    spacing: float = 5.0
    """Nearest-neighbour distance in angstrom."""
    arrangement: Arrangement = Arrangement.H_AGGREGATE
    impurity_index: int | None = None
    """1-based chain position of the impurity; ``None`` means ceil(N/2)."""
    omega_bulk: float = ev_to_hartree(OMEGA_BULK_EV)
    omega_impurity: float = ev_to_hartree(OMEGA_IMPURITY_EV)
    dipole_magnitude: float = DEFAULT_DIPOLE_AU
    dielectric: float = 1.0
    impurity_dipole_magnitude: float | None = None

    def __post_init__(self):
        if isinstance(self.arrangement, str):
            object.__setattr__(self, "arrangement", Arrangement(self.arrangement))
        if self.n_emitters < 1:
            raise InvalidInputError(f"n_emitters must be >= 1, got {self.n_emitters}")
        if not self.spacing > 0:
            raise InvalidInputError(f"spacing must be > 0, got {self.spacing}")
        if not self.omega_bulk > 0:
            raise InvalidInputError(f"omega_bulk must be > 0, got {self.omega_bulk}")
        if not self.omega_impurity > 0:
            raise InvalidInputError(f"omega_impurity must be > 0, got {self.omega_impurity}")
        if not self.dielectric >= 1.0:
            raise InvalidInputError(f"dielectric must be >= 1, got {self.dielectric}")
        if self.impurity_index is not None and not 1 <= self.impurity_index <= self.n_emitters:
            raise InvalidInputError(
                f"impurity_index must lie in [1, {self.n_emitters}], got {self.impurity_index}"
            )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def p_index(self):
        """0-based chain position of the impurity P."""
        if self.impurity_index is None:
            return -(-self.n_emitters // 2) - 1
        return self.impurity_index - 1

    @property
    def impurity_dipole(self):
        if self.impurity_dipole_magnitude is None:
            return self.dipole_magnitude
        return self.impurity_dipole_magnitude

    def shell_indices(self):
        """0-based positions of (P, A1, A2); missing shells are ``None``.

        A1 and A2 are taken on the same side of P, preferring the side
        towards the chain end with more room.
        """
        p, n = self.p_index, self.n_emitters
        if p + 2 < n:
            return p, p + 1, p + 2
        if p - 2 >= 0:
            return p, p - 1, p - 2
        a1 = p + 1 if p + 1 < n else (p - 1 if p >= 1 else None)
        return p, a1, None

    def site_energies(self):
        e = np.full(self.n_emitters, self.omega_bulk)
        e[self.p_index] = self.omega_impurity
        return e


@dataclass(frozen=True)
class CavitySpec:
    omega_ph: float
    lam: float
    """Fundamental coupling strength sqrt(1 / (eps0 V)) in atomic units."""
    polarization: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        pol = tuple(float(x) for x in self.polarization)
        object.__setattr__(self, "polarization", pol)
        if not self.omega_ph > 0:
            raise InvalidInputError(f"omega_ph must be > 0, got {self.omega_ph}")
        if not self.lam >= 0:
            raise InvalidInputError(f"lambda must be >= 0, got {self.lam}")
        _check_unit(pol)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _check_unit(pol):
    if len(pol) != 3 or abs(np.linalg.norm(pol) - 1.0) > 1e-12:
        raise InvalidInputError(f"polarization must be a unit 3-vector, got {pol}")


@dataclass(frozen=True)
class DisorderRealization:
    """Per-emitter energies, orientation angles and derived cavity couplings."""

    omegas: np.ndarray
    thetas: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        for name in ("omegas", "thetas", "couplings"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not len(self.omegas) == len(self.thetas) == len(self.couplings):
            raise InvalidInputError(
                "realization arrays differ in length: "
                f"{len(self.omegas)}, {len(self.thetas)}, {len(self.couplings)}"
            )
        if np.any(self.thetas < 0) or np.any(self.thetas > np.pi / 2):
            raise InvalidInputError("thetas must lie in [0, pi/2]")

    @classmethod
    def from_couplings(cls, omegas, couplings):
        """Realization without orientational information (all angles zero)."""
        omegas = np.asarray(omegas, dtype=float)
        return cls(omegas, np.zeros(len(omegas)), couplings)

    def __len__(self):
        return len(self.omegas)


@dataclass(frozen=True)
class ModelMatrix:
    entries: np.ndarray
    labels: tuple
    structure: Structure = Structure.DENSE
    _photon: int | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "labels", tuple(self.labels))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"matrix must be square, got shape {a.shape}")
        if a.shape[0] != len(self.labels):
            raise InvalidInputError(f"dim {a.shape[0]} != {len(self.labels)} labels")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidInputError("basis labels must be unique")
        photons = [i for i, lab in enumerate(self.labels) if lab.is_photon]
        if len(photons) > 1:
            raise InvalidInputError("at most one photon label is allowed")
        object.__setattr__(self, "_photon", photons[0] if photons else None)
        asym = np.max(np.abs(a - a.T)) if a.size else 0.0
        if asym > SYMMETRY_ATOL:
            raise InvalidInputError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
        if not _structure_consistent(a, self._photon, self.structure):
            raise InvalidInputError(f"sparsity pattern does not match {self.structure.value}")

    @property
    def dim(self):
        return len(self.labels)

    @property
    def photon_index(self):
        return self._photon

    @property
    def emitter_indices(self):
        return [i for i, lab in enumerate(self.labels) if not lab.is_photon]

    def index_of(self, label):
        return self.labels.index(label)

    def permuted(self, order):
        """Same operator in a reordered basis (``order[i]`` is the old index)."""
        order = np.asarray(order)
        labels = [self.labels[i] for i in order]
        return ModelMatrix(self.entries[np.ix_(order, order)], labels, Structure.DENSE)

    def __eq__(self, other):
        if not isinstance(other, ModelMatrix):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.structure == other.structure
            and np.array_equal(self.entries, other.entries)
        )

    __hash__ = None


def _structure_consistent(a, photon, structure):
    if structure is Structure.DENSE:
        return True
    if structure is Structure.TRIDIAGONAL:
        if photon is not None:
            return False
        block = a
    else:
        if photon != 0:
            return False
        block = a[1:, 1:]
    n = block.shape[0]
    i, j = np.indices((n, n))
    width = 0 if structure is Structure.ARROWHEAD else 1
    return not np.any(block[np.abs(i - j) > width])


def coupling_strength(omega_ph, lam, dipole, polarization=(1.0, 0.0, 0.0)):
    """Single-emitter light-matter coupling ``sqrt(omega_ph/2) lam (d . e)``.

    The sign follows the projection of the transition dipole on the field
    polarization.
    """
    if not omega_ph > 0:
        raise InvalidInputError(f"omega_ph must be > 0, got {omega_ph}")
    pol = np.asarray(polarization, dtype=float)
    _check_unit(pol)
    return float(np.sqrt(omega_ph / 2.0) * lam * (np.asarray(dipole, dtype=float) @ pol))


def _couplings(cavity: CavitySpec, dipoles):
    """Row-wise :func:`coupling_strength` for an (N, 3) dipole array."""
    return np.sqrt(cavity.omega_ph / 2.0) * cavity.lam * (np.asarray(dipoles, dtype=float) @ np.array(cavity.polarization))


def _arrowhead(omega_ph, omegas, couplings, labels, block=None):
    omegas = np.asarray(omegas, dtype=float)
    n = len(omegas)
    h = np.zeros((n + 1, n + 1))
    h[0, 0] = omega_ph
    h[0, 1:] = h[1:, 0] = couplings
    if block is None:
        h[1:, 1:] = np.diag(omegas)
        structure = Structure.ARROWHEAD
    else:
        h[1:, 1:] = block
        h[np.arange(1, n + 1), np.arange(1, n + 1)] = omegas
        structure = Structure.ARROWHEAD_PLUS_TRIDIAGONAL
    return ModelMatrix(h, [BasisLabel.photon(), *labels], structure)


def _emitter_labels(n, replica=1):
    return [BasisLabel.emitter(k, replica) for k in range(1, n + 1)]


def build_jc(omega_mol, omega_ph, g):
    """Jaynes-Cummings matrix ``[[omega_ph, g], [g, omega_mol]]``."""
    return _arrowhead(omega_ph, [omega_mol], [g], _emitter_labels(1))


def build_tc(n, omega, omega_ph, g):
    """Tavis-Cummings arrowhead for ``n`` identical emitters."""
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    return _arrowhead(omega_ph, np.full(n, float(omega)), np.full(n, float(g)), _emitter_labels(n))


def build_tc_impurity(spec: AggregateSpec, cavity: CavitySpec, g_bulk=None, g_impurity=None):
    """TC matrix for a chain with one spectrally shifted impurity.

    Couplings default to :func:`coupling_strength` for the bulk and impurity
    dipoles (both along X).
    """
    x = np.array([1.0, 0.0, 0.0])
    if g_bulk is None:
        g_bulk = coupling_strength(cavity.omega_ph, cavity.lam, x * spec.dipole_magnitude, cavity.polarization)
    if g_impurity is None:
        g_impurity = coupling_strength(
            cavity.omega_ph, cavity.lam, x * spec.impurity_dipole, cavity.polarization
        )
    g = np.full(spec.n_emitters, float(g_bulk))
    g[spec.p_index] = g_impurity
    return _arrowhead(cavity.omega_ph, spec.site_energies(), g, _emitter_labels(spec.n_emitters))


def build_disordered_tc(realization: DisorderRealization, omega_ph):
    """Arrowhead with per-emitter energies and couplings."""
    return _arrowhead(
        omega_ph, realization.omegas, realization.couplings, _emitter_labels(len(realization))
    )


def _exciton_block(geometry: ChainGeometry, site_energies, epsilon, mode=CouplingMode.NEAREST_NEIGHBOR):
    n = geometry.n_emitters
    if mode is CouplingMode.ALL_PAIRS:
        block = geometry.coupling_matrix(epsilon)
    else:
        block = np.zeros((n, n))
        if n > 1:
            v = geometry.nearest_neighbor_couplings(epsilon)
            idx = np.arange(n - 1)
            block[idx, idx + 1] = block[idx + 1, idx] = v
    block[np.arange(n), np.arange(n)] = site_energies
    return block


def build_kasha_exciton(spec: AggregateSpec, coupling_mode=CouplingMode.NEAREST_NEIGHBOR):
    """Cavity-free Frenkel exciton matrix (no photon label)."""
    if spec.n_emitters < 2:
        raise InvalidInputError("the exciton model needs at least two emitters")
    mode = CouplingMode(coupling_mode)
    block = _exciton_block(chain_geometry(spec), spec.site_energies(), spec.dielectric, mode)
    structure = Structure.TRIDIAGONAL if mode is CouplingMode.NEAREST_NEIGHBOR else Structure.DENSE
    return ModelMatrix(block, _emitter_labels(spec.n_emitters), structure)


def _tc_kasha(geometry, site_energies, cavity, epsilon, n_rep=1):
    n = geometry.n_emitters
    g = _couplings(cavity, geometry.dipole_vectors)
    block = _exciton_block(geometry, site_energies, epsilon)
    if n_rep > 1:
        block = np.kron(np.eye(n_rep), block)
    labels = [lab for r in range(1, n_rep + 1) for lab in _emitter_labels(n, r)]
    return _arrowhead(cavity.omega_ph, np.tile(site_energies, n_rep), np.tile(g, n_rep), labels, block)


def build_tc_kasha(spec: AggregateSpec, cavity: CavitySpec):
    """TC arrowhead plus nearest-neighbour dipole-dipole couplings.

    Bulk-bulk pairs couple through ``V`` and the impurity through ``V'``,
    both from the point-dipole formula on the chain geometry.
    """
    if spec.n_emitters < 2:
        raise InvalidInputError("the TC-Kasha model needs at least two emitters")
    return _tc_kasha(chain_geometry(spec), spec.site_energies(), cavity, spec.dielectric)


def build_tc_kasha_disordered(spec: AggregateSpec, cavity: CavitySpec, realization: DisorderRealization):
    """TC-Kasha matrix with disordered energies and in-plane dipole rotations.

    Each dipole is rotated by ``theta_k`` in the XZ plane, which scales its
    cavity coupling by ``cos(theta_k)`` and changes the neighbour couplings.
    """
    n = spec.n_emitters
    if n < 2:
        raise InvalidInputError("the TC-Kasha model needs at least two emitters")
    if len(realization) != n:
        raise InvalidInputError(f"realization has {len(realization)} emitters, spec has {n}")
    base = chain_geometry(spec)
    magnitudes = np.linalg.norm(base.dipole_vectors, axis=1)
    dipoles = rotated_dipoles(realization.thetas, magnitudes)
    geometry = base.with_dipoles(dipoles)
    model = _tc_kasha(geometry, realization.omegas, cavity, spec.dielectric)
    expected = model.entries[0, 1:]
    if not np.allclose(realization.couplings, expected, rtol=1e-12, atol=1e-15):
        raise InvalidInputError("realization couplings are inconsistent with its angles")
    return model


def build_replicated(spec: AggregateSpec, cavity: CavitySpec, n_rep):
    """``n_rep`` independent copies of the TC-Kasha chain in one cavity.

    There is no Coulomb coupling between replicas; the photon couples to
    every emitter of every copy.
    """
    if n_rep < 1:
        raise InvalidInputError(f"n_rep must be >= 1, got {n_rep}")
    if spec.n_emitters < 2:
        raise InvalidInputError("the TC-Kasha model needs at least two emitters")
    return _tc_kasha(chain_geometry(spec), spec.site_energies(), cavity, spec.dielectric, n_rep)
