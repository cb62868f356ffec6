"""Chain geometries and point-dipole couplings between transition dipoles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import InvalidInputError, SingularityError
from .units import ANGSTROM_TO_BOHR

if TYPE_CHECKING:
    from .model import AggregateSpec

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])


def dipole_dipole_coupling(mu_a, mu_b, r_ab, epsilon=1.0):
    """Point-dipole interaction between two transition dipoles (Hartree).

    ``[(mu_a.mu_b) R^2 - 3 (mu_a.R)(mu_b.R)] / (epsilon R^5)`` with all
    quantities in atomic units. Side-by-side parallel dipoles give a positive
    coupling (H-aggregate), head-to-tail dipoles a negative one
    (J-aggregate).
    """
    mu_a = np.asarray(mu_a, dtype=float)
    mu_b = np.asarray(mu_b, dtype=float)
    r = np.asarray(r_ab, dtype=float)
    if epsilon < 1.0:
        raise InvalidInputError(f"dielectric constant must be >= 1, got {epsilon}")
    r2 = float(r @ r)
    if r2 == 0.0:
        raise SingularityError("dipole-dipole coupling at zero separation")
    r5 = r2 * r2 * np.sqrt(r2)
    return float(((mu_a @ mu_b) * r2 - 3.0 * (mu_a @ r) * (mu_b @ r)) / (epsilon * r5))


def rotate_dipole(theta, magnitude=1.0):
    """Dipole of length ``magnitude`` at angle ``theta`` from X in the XZ plane."""
    if not 0.0 <= theta <= np.pi / 2:
        raise InvalidInputError(f"theta must lie in [0, pi/2], got {theta}")
    return np.array([magnitude * np.cos(theta), 0.0, magnitude * np.sin(theta)])


def rotated_dipoles(thetas, magnitudes):
    """Vectorised :func:`rotate_dipole`; returns an (N, 3) array."""
    thetas = np.asarray(thetas, dtype=float)
    magnitudes = np.broadcast_to(np.asarray(magnitudes, dtype=float), thetas.shape)
    if np.any(thetas < 0.0) or np.any(thetas > np.pi / 2):
        raise InvalidInputError("theta must lie in [0, pi/2]")
    return np.column_stack(
        [magnitudes * np.cos(thetas), np.zeros_like(thetas), magnitudes * np.sin(thetas)]
    )


@dataclass(frozen=True)
class ChainGeometry:
    positions: np.ndarray
    """(N, 3) emitter centres in bohr."""
    dipole_vectors: np.ndarray
    """(N, 3) transition dipoles in atomic units."""
    impurity: int
    """0-based position of the impurity in the chain."""

    def __post_init__(self):
        for arr in (self.positions, self.dipole_vectors):
            arr.setflags(write=False)

    @property
    def n_emitters(self):
        return len(self.positions)

    def with_dipoles(self, dipoles):
        return ChainGeometry(self.positions.copy(), np.array(dipoles, dtype=float), self.impurity)

    def nearest_neighbor_couplings(self, epsilon=1.0):
        """Couplings ``V(k, k+1)`` for consecutive emitters, length N-1."""
        mu = self.dipole_vectors
        return _pair_couplings(mu[:-1], mu[1:], np.diff(self.positions, axis=0), epsilon)

    def coupling_matrix(self, epsilon=1.0):
        """All-pairs coupling matrix with zero diagonal."""
        n = self.n_emitters
        a, b = np.triu_indices(n, 1)
        v = np.zeros((n, n))
        v[a, b] = v[b, a] = _pair_couplings(
            self.dipole_vectors[a], self.dipole_vectors[b], self.positions[b] - self.positions[a], epsilon
        )
        return v


def _pair_couplings(mu_a, mu_b, r, epsilon):
    """Row-wise :func:`dipole_dipole_coupling` for (M, 3) arrays."""
    if epsilon < 1.0:
        raise InvalidInputError(f"dielectric constant must be >= 1, got {epsilon}")
    r2 = np.einsum("ij,ij->i", r, r)
    if np.any(r2 == 0.0):
        raise SingularityError("dipole-dipole coupling at zero separation")
    dot = np.einsum("ij,ij->i", mu_a, mu_b)
    pa = np.einsum("ij,ij->i", mu_a, r)
    pb = np.einsum("ij,ij->i", mu_b, r)
    return (dot * r2 - 3.0 * pa * pb) / (epsilon * r2 * r2 * np.sqrt(r2))


def chain_geometry(spec: AggregateSpec) -> ChainGeometry:
    """Equidistant chain for ``spec``.

    H-aggregates stack along Y with dipoles on X; J-aggregates put both the
    chain and the dipoles on X. The impurity carries its own dipole
    magnitude (bulk value unless overridden).
    """
    from .model import Arrangement

    n = spec.n_emitters
    step = spec.spacing * ANGSTROM_TO_BOHR
    axis = _Y if spec.arrangement is Arrangement.H_AGGREGATE else _X
    positions = np.outer(np.arange(n) * step, axis)
    dipoles = np.tile(_X * spec.dipole_magnitude, (n, 1))
    p = spec.p_index
    dipoles[p] = _X * spec.impurity_dipole
    return ChainGeometry(positions, dipoles, p)
