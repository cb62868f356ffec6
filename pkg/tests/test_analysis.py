import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from polchain import (
    AggregateSpec,
    BasisLabel,
    CavitySpec,
    ClassificationError,
    DisorderRealization,
    InvalidInputError,
    LambdaRule,
    ScanRow,
    SpectrumData,
    avoided_crossing_gap,
    broadened_spectrum,
    brightest_exciton_energy,
    build_disordered_tc,
    build_jc,
    build_kasha_exciton,
    build_tc,
    build_tc_impurity,
    build_tc_kasha,
    chain_geometry,
    classify_states,
    coefficient_scan,
    dense_symmetric_eig,
    detect_sign_flip,
    diagonalize,
    ev_to_hartree,
    oscillator_strengths,
    rabi_splitting,
)
from polchain.analysis import (
    FLAG_AMBIGUOUS,
    FLAG_N_STAR,
    FLAG_SOLVER_FAILURE,
    SCAN_COLUMNS,
    fix_gauge,
    scan_point,
)

WB = ev_to_hartree(12.498)
X = np.array([1.0, 0.0, 0.0])


def rows_from(ns, cs, field="c_a1"):
    return [ScanRow(n, 5.0, 0.01, **{field: c}) for n, c in zip(ns, cs)]


# -- classification -------------------------------------------------------------


def test_resonant_tc_branches():
    n, g = 5, 0.01
    m = build_tc(n, WB, WB, g)
    rep = classify_states(diagonalize(m), dipoles=np.tile(X, (n, 1)))
    assert len(rep.branches) == 2 and rep.mp is None
    assert rep.lp.photon_character == pytest.approx(0.5, rel=1e-14)
    assert rep.up.photon_character == pytest.approx(0.5, rel=1e-14)
    assert len(rep.dark_states) == 4
    assert all(s.photon_character <= 1e-12 for s in rep.dark_states)
    for s in (rep.lp, rep.up):
        assert s.coefficients[0] == pytest.approx(1 / math.sqrt(2), rel=1e-14)
        np.testing.assert_allclose(np.abs(s.coefficients[1:]), 1 / math.sqrt(2 * n), rtol=1e-13)
        assert len(set(np.sign(s.coefficients[1:]))) == 1


def test_jc_branches():
    rep = classify_states(diagonalize(build_jc(WB, WB, 0.002)))
    assert [round(s.photon_character, 14) for s in rep.branches] == [0.5, 0.5]
    assert rabi_splitting(rep) == pytest.approx(0.004, rel=1e-13)


def test_impurity_photon_character_trend():
    lp, mp = [], []
    for n in range(4, 12):
        spec = AggregateSpec(n)
        m = build_tc_impurity(spec, CavitySpec(WB, 0.005))
        rep = classify_states(diagonalize(m), shells=spec)
        assert len(rep.branches) == 3
        lp.append(rep.lp.photon_character)
        mp.append(rep.mp.photon_character)
    assert np.all(np.diff(mp) < 0)
    assert np.all(np.diff(lp) > 0)


def test_classification_needs_one_photon():
    m = build_kasha_exciton(AggregateSpec(3))
    with pytest.raises(ClassificationError):
        classify_states(dense_symmetric_eig(m))


def test_photon_character_ties_go_to_lower_energy():
    # decoupled photon: every emitter state has photon character 0
    rep = classify_states(diagonalize(build_tc(3, 0.5, 0.6, 0.0)), n_branches=2)
    assert [s.index for s in rep.branches] == [0, 3]


def test_shell_coefficients():
    spec = AggregateSpec(7)
    m = build_tc_kasha(spec, CavitySpec(WB, 0.005))
    rep = classify_states(diagonalize(m), shells=spec)
    c = rep.shell_coefficients("lp")
    np.testing.assert_allclose(c, [-0.856643290926483, 0.0137340899302457, -0.129930242740558], rtol=1e-9)
    with pytest.raises(InvalidInputError):
        rep.shell_coefficients("xp")
    two = classify_states(diagonalize(build_tc(3, 0.5, 0.5, 0.01)), shells=(1, 2))
    assert math.isnan(two.shell_coefficients("up").c_a2)
    with pytest.raises(ClassificationError):
        two.shell_coefficients("mp")


def test_fallback_gauge():
    v, fallback = fix_gauge([0.0, 0.3, -0.9, 0.3], 0)
    assert fallback and v[2] == 0.9
    v, fallback = fix_gauge([-1e-3, 0.3, -0.9, 0.3], 0)
    assert not fallback and v[0] == 1e-3


@st.composite
def tc_models(draw):
    n = draw(st.integers(2, 15))
    spec = AggregateSpec(
        n,
        spacing=draw(st.floats(3.0, 10.0)),
        arrangement=draw(st.sampled_from(["H", "J"])),
        omega_impurity=draw(st.floats(0.44, 0.47)),
    )
    return spec, CavitySpec(draw(st.floats(0.44, 0.47)), draw(st.floats(0.0, 0.03)))


@given(tc_models())
@example((AggregateSpec(8, spacing=4.0, arrangement="J", omega_impurity=0.4609375), CavitySpec(0.46875, 1e-15)))
def test_photon_character_completeness(model):
    spec, cav = model
    rep = classify_states(diagonalize(build_tc_kasha(spec, cav)))
    total = sum(s.photon_character for s in rep.states())
    assert total == pytest.approx(1.0, abs=1e-10)
    assert all(0 <= s.photon_character <= 1 for s in rep.states())
    e = [s.energy for s in rep.branches]
    assert e == sorted(e)


@given(tc_models())
def test_gauge_is_deterministic(model):
    spec, cav = model
    m = build_tc_kasha(spec, cav)
    a = classify_states(diagonalize(m), shells=spec)
    b = classify_states(diagonalize(m), shells=spec)
    for x, y in zip(a.states(), b.states()):
        np.testing.assert_array_equal(x.coefficients, y.coefficients)


@given(st.integers(2, 10), st.randoms())
def test_branch_signs_survive_dark_reordering(n, rnd):
    # shuffling degenerate dark vectors does not change the classified branches
    m = build_tc_impurity(AggregateSpec(n), CavitySpec(WB, 0.005))
    eig = diagonalize(m)
    cols = list(range(len(eig)))
    dark = [i for i in cols if abs(eig.eigenvalues[i] - WB) < 1e-15]
    shuffled = dark[:]
    rnd.shuffle(shuffled)
    for src, dst in zip(dark, shuffled):
        cols[dst] = src
    other = type(eig)(eig.eigenvalues[cols], eig.eigenvectors[:, cols], eig.residual_bound, eig.labels)
    a = classify_states(eig, shells=AggregateSpec(n))
    b = classify_states(other, shells=AggregateSpec(n))
    np.testing.assert_array_equal(a.lp.coefficients, b.lp.coefficients)
    np.testing.assert_array_equal(a.up.coefficients, b.up.coefficients)


@given(st.lists(st.floats(-0.03, 0.03).filter(lambda g: abs(g) > 1e-4), min_size=1, max_size=20))
def test_degenerate_disordered_weights(g):
    g = np.array(g)
    r = DisorderRealization.from_couplings(np.full(len(g), 0.5), g)
    rep = classify_states(diagonalize(build_disordered_tc(r, 0.5)))
    norm = math.sqrt(np.sum(g * g))
    for s in rep.branches:
        c = s.coefficients[1:] / np.linalg.norm(s.coefficients[1:])
        np.testing.assert_allclose(c * np.sign(c[0] * g[0]), g / norm, atol=1e-10)


# -- Rabi splitting -------------------------------------------------------------


def test_rabi_sqrt_n():
    g = 0.002
    base = rabi_splitting(classify_states(diagonalize(build_tc(1, WB, WB, g))))
    for n in range(1, 51):
        ratio = rabi_splitting(classify_states(diagonalize(build_tc(n, WB, WB, g)))) / base
        assert ratio == pytest.approx(math.sqrt(n), rel=1e-10)


def test_rabi_quadratic_average():
    g = np.array([0.01, 0.02, 0.005])
    r = DisorderRealization.from_couplings(np.full(3, 0.5), g)
    rep = classify_states(diagonalize(build_disordered_tc(r, 0.5)))
    assert rabi_splitting(rep) == pytest.approx(2 * math.sqrt(np.sum(g * g)), rel=1e-12)


def test_rabi_without_coupling_fails():
    rep = classify_states(diagonalize(build_tc(4, WB, WB, 0.0)))
    assert rep.branches == () or len(rep.branches) < 2
    with pytest.raises(ClassificationError):
        rabi_splitting(rep)


# -- spectra --------------------------------------------------------------------


def test_tc_dark_states_have_no_intensity():
    n = 6
    eig = diagonalize(build_tc(n, WB, WB, 0.004))
    f = oscillator_strengths(eig, np.tile(X, (n, 1))).stick_intensities
    dark = np.abs(eig.eigenvalues - WB) < 1e-15
    assert dark.sum() == n - 1
    assert np.all(f[dark] <= 1e-12)
    # bright intensity: 2/3 E |c|^2 N with |sum c_k| = sqrt(N/2)
    np.testing.assert_allclose(f[~dark], (2 / 3) * eig.eigenvalues[~dark] * n / 2, rtol=1e-12)


def test_h_dimer_intensity():
    spec = AggregateSpec(2, omega_impurity=WB)
    m = build_kasha_exciton(spec)
    eig = dense_symmetric_eig(m)
    f = oscillator_strengths(eig, chain_geometry(spec)).stick_intensities
    assert f[0] <= 1e-30
    assert f[1] == pytest.approx((2 / 3) * eig.eigenvalues[1] * 2, rel=1e-14)


def test_j_aggregate_lowest_state_gains_intensity():
    f0 = []
    for n in range(4, 8):
        spec = AggregateSpec(n, arrangement="J", omega_impurity=WB)
        eig = dense_symmetric_eig(build_kasha_exciton(spec))
        f0.append(oscillator_strengths(eig, chain_geometry(spec)).stick_intensities[0])
    assert np.all(np.diff(f0) > 0)


def test_photon_row_needs_labels():
    eig = dense_symmetric_eig(np.eye(2))
    with pytest.raises(InvalidInputError):
        oscillator_strengths(eig, np.tile(X, (2, 1)))


def test_single_lorentzian():
    s = broadened_spectrum(SpectrumData(np.array([0.5]), np.array([2.0])), width=0.01)
    assert s.grid[np.argmax(s.intensity)] == pytest.approx(0.5, abs=0.01 / 20)
    assert np.max(s.intensity) == pytest.approx(2.0 * 2 / (math.pi * 0.01), rel=1e-3)


def test_two_sticks_resolved():
    s = broadened_spectrum(SpectrumData(np.array([0.4, 0.5]), np.array([1.0, 1.0])), width=0.01)
    y = s.intensity
    peaks = [i for i in range(1, len(y) - 1) if y[i] > y[i - 1] and y[i] > y[i + 1]]
    assert len(peaks) == 2


def test_broadened_area():
    sticks = SpectrumData(np.array([0.45, 0.46, 0.47]), np.array([0.3, 1.0, 0.2]))
    w = ev_to_hartree(0.02)
    s = broadened_spectrum(sticks, w, grid=(0.0, 1.0, w / 20))
    assert np.trapezoid(s.intensity, s.grid) == pytest.approx(1.5, rel=0.01)


def test_broadening_rejects_bad_width():
    with pytest.raises(InvalidInputError):
        broadened_spectrum(SpectrumData(np.array([0.5]), np.array([1.0])), width=0.0)


def test_brightest_exciton():
    spec = AggregateSpec(2, omega_impurity=WB)
    e = dense_symmetric_eig(build_kasha_exciton(spec)).eigenvalues
    assert brightest_exciton_energy(spec) == e[1]
    assert brightest_exciton_energy(spec.replace(arrangement="J")) == pytest.approx(
        dense_symmetric_eig(build_kasha_exciton(spec.replace(arrangement="J"))).eigenvalues[0], rel=1e-15)


@given(st.integers(2, 20), st.sampled_from(["H", "J"]), st.floats(3.0, 10.0))
def test_kasha_shift_sign(n, arr, d):
    spec = AggregateSpec(n, spacing=d, arrangement=arr, omega_impurity=WB)
    e = brightest_exciton_energy(spec)
    assert (e > WB) if arr == "H" else (e < WB)


# -- sign flips and gaps --------------------------------------------------------


def test_sign_flip_examples():
    assert detect_sign_flip(rows_from([4, 5, 6, 7], [0.1, 0.2, 0.3, 0.4])) is None
    flip = detect_sign_flip(rows_from([4, 5, 6, 7], [-0.1, -0.2, 0.3, 0.4]))
    assert flip.n_star == 6 and not flip.flagged


def test_sign_flip_through_zero_plateau():
    flip = detect_sign_flip(rows_from([4, 5, 6, 7, 8], [-0.1, 1e-13, -1e-14, 0.2, 0.3]))
    assert flip.n_star == 7 and flip.flagged


def test_sign_flip_persistent_mode():
    rows = rows_from(range(4, 12), [0.1, -0.1, 0.1, 0.1, 0.2, -0.1, -0.2, -0.3])
    assert detect_sign_flip(rows).n_star == 5
    assert detect_sign_flip(rows, mode="persistent").n_star == 9
    assert detect_sign_flip(rows_from([4, 5, 6], [0.1, -0.1, 0.1]), mode="persistent").n_star == 6
    assert detect_sign_flip(rows_from([4, 5], [0.1, 0.1]), mode="persistent") is None


def test_sign_flip_checks_order():
    with pytest.raises(InvalidInputError):
        detect_sign_flip(rows_from([5, 4], [0.1, -0.1]))
    with pytest.raises(InvalidInputError):
        detect_sign_flip(rows_from([4, 5], [0.1, -0.1]), mode="last")


def test_sign_flip_skips_failed_rows():
    rows = rows_from([4, 5, 6], [0.1, math.nan, -0.1])
    assert detect_sign_flip(rows).n_star == 6


def test_gap_minimum():
    rows = [ScanRow(n, 5.0, 0.01, gap=g) for n, g in zip(range(4, 9), [5, 4, 3, 3.5, 4])]
    assert avoided_crossing_gap(rows) == (6, 3)
    with pytest.raises(InvalidInputError):
        avoided_crossing_gap(rows[:1])


def test_gap_without_impurity_is_monotone():
    spec = AggregateSpec(4, omega_impurity=WB)
    rows = coefficient_scan(spec, CavitySpec(WB, 0.005), range(4, 12), [5.0], model="tc_impurity")
    gaps = [r.gap for r in rows]
    assert np.all(np.diff(gaps) > 0)
    n, _ = avoided_crossing_gap(rows)
    assert n == 4


def test_gap_interior_minimum_with_impurity():
    rows = coefficient_scan(AggregateSpec(4), CavitySpec(WB, 0.005), range(4, 12), [5.0],
                            model="tc_impurity")
    n, _ = avoided_crossing_gap(rows)
    assert 4 < n < 11
    assert n == 8


def test_detuned_cavity_does_not_mix():
    spec = AggregateSpec(4)
    rows = coefficient_scan(spec, CavitySpec(2 * WB, 0.005), range(4, 12), [5.0])
    assert all(r.photon_char_lp < 1e-3 for r in rows)


# -- scans ----------------------------------------------------------------------


def test_single_point_scan_equals_direct_run():
    spec = AggregateSpec(9, spacing=6.0)
    cav = CavitySpec(WB, 0.004)
    (row,) = coefficient_scan(spec.replace(n_emitters=3), cav, [9], [6.0])
    rep = classify_states(diagonalize(build_tc_kasha(spec, cav)), shells=spec)
    c = rep.shell_coefficients("lp")
    assert (row.c_p, row.c_a1, row.c_a2) == tuple(c)
    assert row.e_lp == rep.lp.energy and row.gap == rep.mp.energy - rep.lp.energy
    assert len(row.values()) == len(SCAN_COLUMNS)


def test_scan_order_and_rules():
    cav = CavitySpec(WB, 0.01)
    rows = coefficient_scan(AggregateSpec(4), cav, [6, 4, 5], [5.0, 4.0], LambdaRule.INVERSE_SQRT_N)
    assert [(r.n, r.d_angstrom) for r in rows] == [(n, d) for n in (4, 5, 6) for d in (4.0, 5.0)]
    assert all(r.lam == pytest.approx(0.01 / math.sqrt(r.n), rel=1e-15) for r in rows)
    rows = coefficient_scan(AggregateSpec(4), cav, [4], [5.0], "inv_sqrt_ntot", n_rep=4)
    assert rows[0].lam == pytest.approx(0.01 / 4, rel=1e-15)


def test_scan_marks_flip_row():
    rows = coefficient_scan(AggregateSpec(4), CavitySpec(WB, 0.005), range(4, 13), [5.0])
    flagged = [r.n for r in rows if r.n_star_flag & FLAG_N_STAR]
    assert flagged == [8]
    assert not any(r.n_star_flag & FLAG_AMBIGUOUS for r in rows)


def test_scan_records_failures():
    rows = coefficient_scan(AggregateSpec(4), CavitySpec(WB, 0.005), [1, 4], [5.0])
    bad = rows[0]
    assert bad.n_star_flag & FLAG_SOLVER_FAILURE and math.isnan(bad.e_lp) and bad.error
    assert rows[1].n_star_flag & FLAG_SOLVER_FAILURE == 0
    with pytest.raises(InvalidInputError):
        coefficient_scan(AggregateSpec(4), CavitySpec(WB, 0.005), [], [5.0])


def test_scan_point_without_bright_states():
    row = scan_point(AggregateSpec(5), CavitySpec(WB, 0.0))
    assert row.n_star_flag & FLAG_SOLVER_FAILURE


def test_scan_threads_do_not_change_results(monkeypatch):
    args = (AggregateSpec(4), CavitySpec(WB, 0.005), range(4, 20), [4.0, 5.0])
    serial = coefficient_scan(*args, workers=1)
    parallel = coefficient_scan(*args, workers=4)
    assert serial == parallel
    monkeypatch.setenv("POLCHAIN_THREADS", "2")
    assert coefficient_scan(*args) == serial
    monkeypatch.setenv("POLCHAIN_THREADS", "zero")
    with pytest.raises(InvalidInputError):
        coefficient_scan(*args)


def test_basis_label_lookup_for_shells():
    eig = diagonalize(build_tc(3, 0.5, 0.5, 0.01))
    with pytest.raises(InvalidInputError):
        classify_states(eig, shells=(5,))
    assert classify_states(eig, labels=[BasisLabel.photon()] + [BasisLabel.emitter(k) for k in (1, 2, 3)])
