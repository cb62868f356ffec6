"""Seeded disorder realizations and ensemble statistics.

Random numbers come from xoshiro256** seeded through splitmix64, written out
here so that a realization is a documented function of ``(seed,
stream_index)`` and can be reproduced bit for bit in another language.

Stream derivation::

    key   = mix(seed XOR mix(stream_index + C2))
    state = four successive splitmix64 outputs starting from key

with ``mix`` the splitmix64 finalizer applied to ``x + C1`` (C1 =
0x9E3779B97F4A7C15, C2 = 0xD1B54A32D192ED03). Uniforms are ``(x >> 11) *
2**-53`` in [0, 1). Normals use the cosine branch of Box-Muller with
``u1 = 1 - uniform`` so the logarithm never sees zero. For every emitter, in
chain order, the generator draws the energy normal (two uniforms) and then
the angle uniform (one), including protected emitters whose draws are
discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .analysis import ScanRow, classify_states, mark_sign_flips, summarize_report, FLAG_SOLVER_FAILURE
from .eig import diagonalize
from .errors import ClassificationError, InvalidInputError, PolchainError, SampleError
from .geometry import rotated_dipoles
from .model import (
    AggregateSpec,
    CavitySpec,
    DisorderRealization,
    build_disordered_tc,
    _couplings,
    build_tc_kasha_disordered,
)
from .units import ev_to_hartree

_MASK = (1 << 64) - 1
_C1 = 0x9E3779B97F4A7C15
_C2 = 0xD1B54A32D192ED03


def _mix(x):
    z = (x + _C1) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """xoshiro256** generator with splitmix64 seeding."""

    def __init__(self, seed, stream_index=0):
        seed = int(seed)
        stream_index = int(stream_index)
        if not 0 <= seed <= _MASK or not 0 <= stream_index <= _MASK:
            raise InvalidInputError("seed and stream_index must be unsigned 64-bit integers")
        x = _mix(seed ^ _mix((stream_index + _C2) & _MASK))
        self._s = []
        for _ in range(4):
            self._s.append(_mix(x))
            x = (x + _C1) & _MASK

    def next_u64(self):
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self):
        """Double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self):
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


DEFAULT_SIGMA = ev_to_hartree(0.02)


@dataclass(frozen=True)
class DisorderSpec:
    sigma_energy: float = DEFAULT_SIGMA
    """Gaussian width of the excitation energies (Hartree)."""
    angle_max: float = math.pi / 2
    protected_indices: frozenset | None = None
    """0-based emitters left untouched; ``None`` means P and its two neighbours."""
    seed: int = 0
    n_samples: int = 1

    def __post_init__(self):
        if not self.sigma_energy >= 0:
            raise InvalidInputError(f"sigma_energy must be >= 0, got {self.sigma_energy}")
        if not 0 <= self.angle_max <= math.pi / 2:
            raise InvalidInputError(f"angle_max must lie in [0, pi/2], got {self.angle_max}")
        if self.n_samples < 1:
            raise InvalidInputError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0 <= int(self.seed) <= _MASK:
            raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.protected_indices is not None:
            object.__setattr__(self, "protected_indices", frozenset(int(k) for k in self.protected_indices))

    def protected(self, spec: AggregateSpec):
        if self.protected_indices is not None:
            return self.protected_indices
        p = spec.p_index
        return frozenset(k for k in (p - 1, p, p + 1) if 0 <= k < spec.n_emitters)


def realization_from_angles(spec: AggregateSpec, cavity: CavitySpec, omegas, thetas):
    """Realization whose couplings follow from rotating each dipole by ``theta``."""
    mags = np.full(spec.n_emitters, spec.dipole_magnitude)
    mags[spec.p_index] = spec.impurity_dipole
    dipoles = rotated_dipoles(thetas, mags)
    couplings = _couplings(cavity, dipoles)
    return DisorderRealization(omegas, thetas, couplings)


def sample_realization(spec: AggregateSpec, cavity: CavitySpec, d: DisorderSpec, stream_index=0):
    """One disorder realization, fully determined by ``(d.seed, stream_index)``.

    Unprotected emitters get ``omega ~ Normal(site energy, sigma^2)`` and
    ``theta ~ Uniform[0, angle_max]``; protected ones keep their site energy
    and ``theta = 0``.
    """
    rng = Xoshiro256(d.seed, stream_index)
    protected = d.protected(spec)
    site = spec.site_energies()
    omegas = site.copy()
    thetas = np.zeros(spec.n_emitters)
    for k in range(spec.n_emitters):
        z = rng.normal()
        u = rng.uniform()
        if k in protected:
            continue
        omegas[k] = site[k] + d.sigma_energy * z
        thetas[k] = d.angle_max * u
    return realization_from_angles(spec, cavity, omegas, thetas)


@dataclass(frozen=True)
class SampleResult:
    stream_index: int
    energies: tuple
    """(E_LP, E_MP, E_UP); NaN for a missing MP."""
    lp: np.ndarray
    """Gauge-fixed LP emitter coefficients."""
    mp: np.ndarray
    shells_lp: tuple
    """(c_P, c_A1, c_A2) of the LP."""


@dataclass(frozen=True)
class EnsembleStats:
    samples: tuple
    lp_mean: np.ndarray
    lp_std: np.ndarray
    mp_mean: np.ndarray
    mp_std: np.ndarray
    histogram_edges: np.ndarray
    histograms: dict = field(default_factory=dict)
    """Counts per branch name over ``histogram_edges``."""


def _sample_model(spec, cavity, realization, coulomb):
    if coulomb:
        return build_tc_kasha_disordered(spec, cavity, realization)
    return build_disordered_tc(realization, cavity.omega_ph)


def run_sample(spec: AggregateSpec, cavity: CavitySpec, d: DisorderSpec, stream_index, coulomb=True):
    """Diagonalise and classify one realization."""
    try:
        r = sample_realization(spec, cavity, d, stream_index)
        m = _sample_model(spec, cavity, r, coulomb)
        report = classify_states(diagonalize(m), m.labels, spec)
        lp, mp, up = report.lp, report.mp, report.up
        if up is None:
            raise ClassificationError("fewer than two bright branches")
        shells = report.shell_coefficients("lp")
    except PolchainError as exc:
        raise SampleError(stream_index, exc) from exc
    nan = np.full(spec.n_emitters, math.nan)
    return SampleResult(
        stream_index,
        (lp.energy, mp.energy if mp else math.nan, up.energy),
        lp.coefficients[1:],
        mp.coefficients[1:] if mp else nan,
        tuple(shells),
    )


def ensemble_polariton_stats(
    spec: AggregateSpec, cavity: CavitySpec, d: DisorderSpec, coulomb=True, bins=40, workers=None
):
    """Run ``d.n_samples`` realizations and aggregate LP/MP coefficients.

    Stream ``i`` drives sample ``i``; aggregation is ordered by stream so the
    output does not depend on thread scheduling. Energy histograms share
    ``bins`` equal-width bins spanning all finite branch energies.
    """
    samples = ordered_map(
        lambda i: run_sample(spec, cavity, d, i, coulomb), range(d.n_samples), workers
    )
    lp = np.array([s.lp for s in samples])
    mp = np.array([s.mp for s in samples])
    energies = np.array([s.energies for s in samples])
    finite = energies[np.isfinite(energies)]
    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        lo, hi = lo - 0.5 * DEFAULT_SIGMA, hi + 0.5 * DEFAULT_SIGMA
    edges = np.linspace(lo, hi, bins + 1)
    hists = {}
    for j, name in enumerate(("lp", "mp", "up")):
        col = energies[:, j]
        hists[name] = np.histogram(col[np.isfinite(col)], bins=edges)[0]
    return EnsembleStats(
        tuple(samples), lp.mean(axis=0), lp.std(axis=0), mp.mean(axis=0), mp.std(axis=0), edges, hists
    )


def disorder_scan(
    spec: AggregateSpec, cavity: CavitySpec, d: DisorderSpec, n_values, stream_index=0,
    coulomb=True, flip_mode="first", workers=None,
):
    """LP shell coefficients versus chain length for one disorder stream.

    Each chain length redraws its realization from the start of the same
    stream, so emitter ``k`` sees the same random numbers at every ``N``.
    """
    n_values = sorted(set(int(n) for n in n_values))
    if not n_values:
        raise InvalidInputError("n_values must be non-empty")

    def run(n):
        s = spec.replace(n_emitters=n)
        try:
            r = sample_realization(s, cavity, d, stream_index)
            m = _sample_model(s, cavity, r, coulomb)
            return summarize_report(classify_states(diagonalize(m), m.labels, s), s, cavity.lam)
        except PolchainError as exc:
            return ScanRow(n, s.spacing, cavity.lam, n_star_flag=FLAG_SOLVER_FAILURE, error=str(exc))

    return mark_sign_flips(ordered_map(run, n_values, workers), flip_mode)
