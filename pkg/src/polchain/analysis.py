"""Polariton classification, observables and chain-length scans."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._parallel import ordered_map
from .eig import EigenDecomposition, dense_symmetric_eig, diagonalize
from .errors import ClassificationError, InvalidInputError, PolchainError
from .geometry import ChainGeometry, chain_geometry
from .model import AggregateSpec, BasisLabel, CavitySpec, build_kasha_exciton, build_replicated, build_tc_impurity
from .units import ev_to_hartree

BRIGHT_THRESHOLD = 1e-10
"""Photon character below which a state counts as dark."""
GAUGE_THRESHOLD = 1e-10
"""Photon coefficient below which the emitter fallback gauge is used."""
ZERO_COEFFICIENT = 1e-12
DEFAULT_WIDTH = ev_to_hartree(0.02)
"""Default Lorentzian FWHM (Hartree)."""

FLAG_N_STAR = 1
FLAG_GAUGE_FALLBACK = 2
FLAG_AMBIGUOUS = 4
FLAG_SOLVER_FAILURE = 8

@dataclass(frozen=True)
class State:
    """One gauge-fixed eigenstate."""

    index: int
    """Column in the source decomposition."""
    energy: float
    coefficients: np.ndarray
    photon_character: float
    oscillator_strength: float = math.nan
    gauge_fallback: bool = False


class ShellCoefficients(NamedTuple):
    c_p: float
    c_a1: float
    c_a2: float


@dataclass(frozen=True)
class PolaritonReport:
    branches: tuple
    """Bright states in ascending energy."""
    dark_states: tuple
    labels: tuple
    shells: tuple = (None, None, None)
    """Basis rows of (P, A1, A2) in the first replica; ``None`` if absent."""

    @property
    def lp(self):
        return self.branches[0] if self.branches else None

    @property
    def mp(self):
        return self.branches[1] if len(self.branches) == 3 else None

    @property
    def up(self):
        return self.branches[-1] if len(self.branches) >= 2 else None

    def branch(self, name):
        if name not in ("lp", "mp", "up"):
            raise InvalidInputError(f"unknown branch {name!r}")
        return getattr(self, name)

    def shell_coefficients(self, name="lp"):
        """Signed (c_P, c_A1, c_A2) of a branch; NaN where undefined."""
        state = self.branch(name)
        if state is None:
            raise ClassificationError(f"no {name.upper()} branch in this report")
        return ShellCoefficients(
            *(math.nan if row is None else float(state.coefficients[row]) for row in self.shells)
        )

    def states(self):
        """All states in ascending energy."""
        return tuple(sorted(self.branches + self.dark_states, key=lambda s: (s.energy, s.index)))


@dataclass(frozen=True)
class SpectrumData:
    stick_energies: np.ndarray
    """Transition energies (Hartree)."""
    stick_intensities: np.ndarray
    """Dimensionless oscillator strengths."""
    grid: np.ndarray | None = None
    intensity: np.ndarray | None = None
    """Broadened spectrum on ``grid`` (per Hartree)."""


def fix_gauge(vector, photon_row):
    """Return ``(v, fallback)`` with the global sign fixed.

    The photon coefficient is made non-negative. When it is below
    ``GAUGE_THRESHOLD`` the largest-magnitude emitter coefficient (first one
    on ties) is made positive instead and ``fallback`` is True.
    """
    v = np.array(vector, dtype=float)
    if photon_row is not None and abs(v[photon_row]) >= GAUGE_THRESHOLD:
        return (v if v[photon_row] > 0 else -v), False
    mags = np.abs(v)
    if photon_row is not None:
        mags[photon_row] = -1.0
    k = int(np.argmax(mags))
    return (v if v[k] >= 0 else -v), photon_row is not None


def fix_gauge_columns(vectors, photon_row):
    """:func:`fix_gauge` applied to every column; returns ``(V, fallback)``."""
    v = np.array(vectors, dtype=float)
    mags = np.abs(v)
    mags[photon_row] = -1.0
    lead = v[np.argmax(mags, axis=0), np.arange(v.shape[1])]
    fallback = np.abs(v[photon_row]) < GAUGE_THRESHOLD
    ref = np.where(fallback, lead, v[photon_row])
    sign = np.where(fallback, np.where(ref >= 0, 1.0, -1.0), np.where(ref > 0, 1.0, -1.0))
    v *= sign
    v.setflags(write=False)
    return v, fallback


def _resolve_shells(labels, shells):
    if shells is None:
        return (None, None, None)
    if isinstance(shells, AggregateSpec):
        shells = shells.shell_indices()
    index = {lab: i for i, lab in enumerate(labels)}
    rows = []
    for k in tuple(shells) + (None,) * (3 - len(shells)):
        if k is None:
            rows.append(None)
            continue
        label = BasisLabel.emitter(int(k) + 1)
        if label not in index:
            raise InvalidInputError(f"shell emitter {k} not present in the basis")
        rows.append(index[label])
    return tuple(rows)


def classify_states(eig: EigenDecomposition, labels=None, shells=None, dipoles=None, n_branches=None):
    """Split a decomposition into polariton branches and dark states.

    The branches are the (up to three) states with the largest photon
    character, ordered by energy. Photon-character ties go to the lower
    energy. Without ``n_branches`` the count is ``min(3, #states with photon
    character > BRIGHT_THRESHOLD)``.

    Parameters
    ----------
    eig : EigenDecomposition
    labels : sequence of BasisLabel, optional
        Defaults to ``eig.labels``. Exactly one photon label is required.
    shells : AggregateSpec or tuple of int, optional
        0-based chain positions of (P, A1, A2).
    dipoles : ChainGeometry or array_like, optional
        When given, oscillator strengths are attached to every state.
    n_branches : int, optional
    """
    labels = tuple(eig.labels if labels is None else labels)
    if len(labels) != len(eig):
        raise InvalidInputError(f"{len(labels)} labels for a {len(eig)}-state decomposition")
    photon_rows = [i for i, lab in enumerate(labels) if lab.is_photon]
    if len(photon_rows) != 1:
        raise ClassificationError(f"expected exactly one photon state, found {len(photon_rows)}")
    ph = photon_rows[0]
    energies = eig.eigenvalues
    vectors = eig.eigenvectors
    # a unit vector can overshoot 1 by an ulp
    pc = np.minimum(vectors[ph] ** 2, 1.0)
    if n_branches is None:
        n_branches = min(3, int(np.count_nonzero(pc > BRIGHT_THRESHOLD)))
    if not 0 <= n_branches <= min(3, len(eig)):
        raise InvalidInputError(f"n_branches must lie in [0, 3], got {n_branches}")
    order = np.lexsort((energies, -pc))
    bright = set(int(i) for i in order[:n_branches])

    f = np.full(len(eig), math.nan)
    if dipoles is not None:
        f = oscillator_strengths(eig, dipoles, labels=labels).stick_intensities

    fixed, fallback = fix_gauge_columns(vectors, ph)
    branches, dark = [], []
    for i in range(len(eig)):
        state = State(i, float(energies[i]), fixed[:, i], float(pc[i]), float(f[i]), bool(fallback[i]))
        (branches if i in bright else dark).append(state)
    branches.sort(key=lambda s: (s.energy, s.index))
    return PolaritonReport(tuple(branches), tuple(dark), labels, _resolve_shells(labels, shells))


def rabi_splitting(report: PolaritonReport):
    """UP minus LP energy."""
    if len(report.branches) < 2:
        raise ClassificationError(
            f"Rabi splitting needs two bright branches, found {len(report.branches)}"
        )
    return report.up.energy - report.lp.energy


def _dipole_rows(labels, dipoles):
    if isinstance(dipoles, ChainGeometry):
        dipoles = dipoles.dipole_vectors
    dipoles = np.asarray(dipoles, dtype=float)
    if dipoles.ndim != 2 or dipoles.shape[1] != 3:
        raise InvalidInputError(f"dipoles must have shape (n, 3), got {dipoles.shape}")
    rows = np.zeros((len(labels), 3))
    for i, lab in enumerate(labels):
        if lab.is_photon:
            continue
        if not 1 <= lab.k <= len(dipoles):
            raise InvalidInputError(f"no dipole for emitter {lab}")
        rows[i] = dipoles[lab.k - 1]
    return rows


def oscillator_strengths(eig: EigenDecomposition, dipoles, energies=None, labels=None):
    """Stick spectrum ``f_i = (2/3) E_i |sum_k c_ik mu_k|^2``.

    Replicas reuse the chain dipoles; the photon row carries no dipole.
    """
    labels = tuple(eig.labels if labels is None else labels)
    if len(labels) != len(eig):
        raise InvalidInputError("oscillator strengths need one label per basis state")
    e = eig.eigenvalues if energies is None else np.asarray(energies, dtype=float)
    if e.shape != eig.eigenvalues.shape:
        raise InvalidInputError("energies must match the number of states")
    mu = eig.eigenvectors.T @ _dipole_rows(labels, dipoles)
    f = (2.0 / 3.0) * e * np.sum(mu * mu, axis=1)
    return SpectrumData(np.array(e, dtype=float), f)


def broadened_spectrum(sticks: SpectrumData, width=DEFAULT_WIDTH, grid=None):
    """Sum of area-normalised Lorentzians (FWHM ``width``) on an energy grid.

    ``grid`` is an array of energies or a ``(start, stop, step)`` triple.
    The default spans 50 widths beyond the outermost sticks.
    """
    if not width > 0:
        raise InvalidInputError(f"width must be > 0, got {width}")
    e0 = np.asarray(sticks.stick_energies, dtype=float)
    f = np.asarray(sticks.stick_intensities, dtype=float)
    if grid is None:
        lo, hi = (float(e0.min()), float(e0.max())) if e0.size else (0.0, 0.0)
        grid = (lo - 50 * width, hi + 50 * width, width / 20)
    if isinstance(grid, tuple):
        start, stop, step = grid
        if not step > 0 or not stop > start:
            raise InvalidInputError(f"bad grid {grid}")
        grid = start + step * np.arange(int(np.floor((stop - start) / step)) + 1)
    grid = np.asarray(grid, dtype=float)
    half = 0.5 * width
    shape = (half / np.pi) / ((grid[:, None] - e0[None, :]) ** 2 + half * half)
    return SpectrumData(e0, f, grid, shape @ f)


def brightest_exciton_energy(spec: AggregateSpec):
    """Energy of the cavity-free exciton state with the largest oscillator strength."""
    model = build_kasha_exciton(spec)
    eig = dense_symmetric_eig(model)
    f = oscillator_strengths(eig, chain_geometry(spec), labels=model.labels).stick_intensities
    return float(eig.eigenvalues[int(np.argmax(f))])


class LambdaRule(enum.Enum):
    FIXED = "fixed"
    INVERSE_SQRT_N = "inv_sqrt_n"
    INVERSE_SQRT_NTOT = "inv_sqrt_ntot"

    def coupling(self, lam0, n, n_rep=1):
        if self is LambdaRule.FIXED:
            return lam0
        if self is LambdaRule.INVERSE_SQRT_N:
            return lam0 / math.sqrt(n)
        return lam0 / math.sqrt(n * n_rep)


SCAN_COLUMNS = (
    "n",
    "d_angstrom",
    "lambda",
    "e_lp",
    "e_mp",
    "e_up",
    "gap",
    "c_p",
    "c_a1",
    "c_a2",
    "photon_char_lp",
    "photon_char_mp",
    "n_star_flag",
)


@dataclass(frozen=True)
class ScanRow:
    n: int
    d_angstrom: float
    lam: float
    e_lp: float = math.nan
    e_mp: float = math.nan
    e_up: float = math.nan
    gap: float = math.nan
    c_p: float = math.nan
    c_a1: float = math.nan
    c_a2: float = math.nan
    photon_char_lp: float = math.nan
    photon_char_mp: float = math.nan
    n_star_flag: int = 0
    error: str = ""

    def values(self):
        """Row values in ``SCAN_COLUMNS`` order."""
        return (self.n, self.d_angstrom, self.lam, self.e_lp, self.e_mp, self.e_up, self.gap,
                self.c_p, self.c_a1, self.c_a2, self.photon_char_lp, self.photon_char_mp,
                self.n_star_flag)


def _scan_model(spec, cavity, n_rep, model):
    if model == "tc_kasha":
        return build_replicated(spec, cavity, n_rep)
    if model == "tc_impurity":
        if n_rep != 1:
            raise InvalidInputError("replicas need the tc_kasha model")
        return build_tc_impurity(spec, cavity)
    raise InvalidInputError(f"unknown scan model {model!r}")


def summarize_report(report: PolaritonReport, spec: AggregateSpec, lam):
    """Scan row for an already classified decomposition."""
    if len(report.branches) < 2:
        return ScanRow(spec.n_emitters, spec.spacing, lam, n_star_flag=FLAG_SOLVER_FAILURE,
                       error="fewer than two bright branches")
    lp, mp, up = report.lp, report.mp, report.up
    c = report.shell_coefficients("lp")
    return ScanRow(
        n=spec.n_emitters,
        d_angstrom=spec.spacing,
        lam=lam,
        e_lp=lp.energy,
        e_mp=mp.energy if mp else math.nan,
        e_up=up.energy,
        gap=(mp or up).energy - lp.energy,
        c_p=c.c_p,
        c_a1=c.c_a1,
        c_a2=c.c_a2,
        photon_char_lp=lp.photon_character,
        photon_char_mp=mp.photon_character if mp else math.nan,
        n_star_flag=FLAG_GAUGE_FALLBACK if lp.gauge_fallback else 0,
    )


def scan_point(spec: AggregateSpec, cavity: CavitySpec, n_rep=1, model="tc_kasha"):
    """Diagonalise one grid point and summarise its LP/MP/UP branches."""
    try:
        m = _scan_model(spec, cavity, n_rep, model)
        report = classify_states(diagonalize(m), m.labels, spec)
    except PolchainError as exc:
        return ScanRow(spec.n_emitters, spec.spacing, cavity.lam, n_star_flag=FLAG_SOLVER_FAILURE, error=str(exc))
    return summarize_report(report, spec, cavity.lam)


def mark_sign_flips(rows, flip_mode="first"):
    """Set ``FLAG_N_STAR`` (and ``FLAG_AMBIGUOUS``) on each spacing's flip row."""
    rows = list(rows)
    for d in sorted(set(r.d_angstrom for r in rows)):
        picked = sorted((i for i, r in enumerate(rows) if r.d_angstrom == d), key=lambda i: rows[i].n)
        flip = detect_sign_flip([rows[i] for i in picked], mode=flip_mode)
        if flip is None:
            continue
        for i in picked:
            if rows[i].n == flip.n_star:
                flag = rows[i].n_star_flag | FLAG_N_STAR | (FLAG_AMBIGUOUS if flip.flagged else 0)
                rows[i] = dataclasses.replace(rows[i], n_star_flag=flag)
    return rows


def coefficient_scan(
    spec: AggregateSpec,
    cavity: CavitySpec,
    n_values,
    d_values,
    lambda_rule=LambdaRule.FIXED,
    n_rep=1,
    model="tc_kasha",
    flip_mode="first",
    workers=None,
):
    """LP shell coefficients over a grid of chain lengths and spacings.

    ``cavity.lam`` is the base coupling ``lam0``; the rule maps it to the
    coupling used at each ``N``. Rows come back ordered by ``(N, d)``.
    Failed points are kept with ``FLAG_SOLVER_FAILURE`` set and NaN values.
    For every spacing the sign-flip row is marked with ``FLAG_N_STAR``.
    """
    n_values = sorted(set(int(n) for n in n_values))
    d_values = sorted(set(float(d) for d in d_values))
    if not n_values or not d_values:
        raise InvalidInputError("scan ranges must be non-empty")
    rule = LambdaRule(lambda_rule)
    grid = [(n, d) for n in n_values for d in d_values]

    def run(point):
        n, d = point
        lam = rule.coupling(cavity.lam, n, n_rep)
        try:
            s = spec.replace(n_emitters=n, spacing=d)
            c = cavity.replace(lam=lam)
        except PolchainError as exc:
            return ScanRow(n, d, lam, n_star_flag=FLAG_SOLVER_FAILURE, error=str(exc))
        return scan_point(s, c, n_rep, model)

    return mark_sign_flips(ordered_map(run, grid, workers), flip_mode)


class SignFlip(NamedTuple):
    n_star: int
    flagged: bool
    """True when the sign passes through a ``|c| < 1e-12`` plateau."""


def _signs(rows, field):
    pts = [(r.n, getattr(r, field)) for r in rows if math.isfinite(getattr(r, field))]
    ns = [n for n, _ in pts]
    if ns != sorted(ns):
        raise InvalidInputError("rows must be sorted by N")
    return ns, [0 if abs(c) < ZERO_COEFFICIENT else (1 if c > 0 else -1) for _, c in pts]


def detect_sign_flip(rows, field="c_a1", mode="first"):
    """Chain length at which a coefficient changes sign.

    ``mode="first"`` returns the smallest N whose sign differs from the
    sign at the smallest scanned N. ``mode="persistent"`` returns the start
    of the final constant-sign run, i.e. the last sign change, so that
    early excursions (e.g. weak-coupling branch swaps at small N) are
    ignored; it returns ``None`` when the sign never changes.
    Rows with NaN in ``field`` are skipped.
    """
    if mode not in ("first", "persistent"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    ns, signs = _signs(rows, field)
    nonzero = [i for i, s in enumerate(signs) if s != 0]
    if not nonzero:
        return None
    ref = signs[nonzero[0]]
    leading_zero = nonzero[0] > 0
    if mode == "first":
        for i in nonzero:
            if signs[i] != ref:
                return SignFlip(ns[i], leading_zero or signs[i - 1] == 0)
        return None
    last = signs[nonzero[-1]]
    i = nonzero[-1]
    while i > 0 and signs[i - 1] != -last:
        i -= 1
    if i == 0:
        return None
    while signs[i] == 0:
        i += 1
    return SignFlip(ns[i], signs[i - 1] == 0)


def avoided_crossing_gap(rows):
    """``(N, gap)`` at the smallest ``gap`` over rows with finite gaps."""
    pts = [(r.gap, r.n) for r in rows if math.isfinite(r.gap)]
    if len(pts) < 2:
        raise InvalidInputError("need at least two rows with a finite gap")
    gap, n = min(pts)
    return n, gap
