"""Command line entry point: ``polchain <command> --config FILE``."""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .analysis import (
    SCAN_COLUMNS,
    LambdaRule,
    broadened_spectrum,
    classify_states,
    coefficient_scan,
    fix_gauge_columns,
    oscillator_strengths,
)
from .config import ConfigError, RunConfig, load_config
from .disorder import disorder_scan, ensemble_polariton_stats
from .eig import dense_symmetric_eig, diagonalize
from .errors import PolchainError
from .geometry import chain_geometry
from .model import (
    CouplingMode,
    build_jc,
    build_kasha_exciton,
    build_replicated,
    build_tc,
    build_tc_impurity,
    coupling_strength,
)
from .units import ev_to_hartree, hartree_to_ev


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_csv(path, header, rows):
    """Write ``rows`` with a header; floats use 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _build_model(config: RunConfig):
    """Model matrix and per-emitter dipoles for the configured system."""
    s = config.system
    spec = config.aggregate_spec()
    if s.model == "kasha":
        return build_kasha_exciton(spec, CouplingMode(s.coupling)), chain_geometry(spec).dipole_vectors
    cavity = config.cavity_spec()
    x = np.array([1.0, 0.0, 0.0])
    uniform = np.tile(x * s.dipole_au, (s.n, 1))
    g = coupling_strength(cavity.omega_ph, cavity.lam, x * s.dipole_au, cavity.polarization)
    if s.model == "jc":
        return build_jc(spec.omega_bulk, cavity.omega_ph, g), uniform
    if s.model == "tc":
        return build_tc(s.n, spec.omega_bulk, cavity.omega_ph, g), uniform
    if s.model == "tc_impurity":
        return build_tc_impurity(spec, cavity), chain_geometry(spec).dipole_vectors
    return build_replicated(spec, cavity, s.replicas), chain_geometry(spec).dipole_vectors


def _photon_rows(labels):
    return [i for i, lab in enumerate(labels) if lab.is_photon]


def cmd_diagonalize(config, out, args):
    model, dipoles = _build_model(config)
    eig = diagonalize(model)
    labels = model.labels
    photon = _photon_rows(labels)
    f = oscillator_strengths(eig, dipoles, labels=labels).stick_intensities
    if photon:
        report = classify_states(eig, labels, config.aggregate_spec())
        names = {}
        for name in ("lp", "mp", "up"):
            state = report.branch(name)
            if state is not None:
                names[state.index] = name
        vectors, fallback = fix_gauge_columns(eig.eigenvectors, photon[0])
        pc = np.minimum(eig.eigenvectors[photon[0]] ** 2, 1.0)
    else:
        names = {}
        vectors, fallback = _emitter_gauge(eig.eigenvectors)
        pc = np.zeros(len(eig))
    write_csv(
        os.path.join(out, "eigenvalues.csv"),
        ["state", "energy_hartree", "energy_ev", "photon_character"],
        [(i, e, hartree_to_ev(e), pc[i]) for i, e in enumerate(eig.eigenvalues)],
    )
    header = ["state", "branch", "energy_hartree", "energy_ev", "photon_character",
              "oscillator_strength", "gauge_fallback"] + [f"c_{lab}" for lab in labels]
    rows = []
    for i, e in enumerate(eig.eigenvalues):
        rows.append([i, names.get(i, "dark" if photon else "exciton"), e, hartree_to_ev(e), pc[i],
                     f[i], bool(fallback[i]), *vectors[:, i]])
    write_csv(os.path.join(out, "report.csv"), header, rows)


def _emitter_gauge(vectors):
    lead = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    return vectors * np.where(lead < 0, -1.0, 1.0), np.zeros(vectors.shape[1], dtype=bool)


def _grid_step(config):
    sp = config.spectrum
    return ev_to_hartree(sp.step_ev if sp.step_ev is not None else sp.width_ev / 20)


def cmd_spectrum(config, out, args):
    model, dipoles = _build_model(config)
    eig = diagonalize(model)
    sticks = oscillator_strengths(eig, dipoles, labels=model.labels)
    width = ev_to_hartree(config.spectrum.width_ev)
    e = sticks.stick_energies
    grid = (float(e.min()) - 50 * width, float(e.max()) + 50 * width, _grid_step(config))
    spec = broadened_spectrum(sticks, width, grid)
    write_csv(
        os.path.join(out, "sticks.csv"),
        ["state", "energy_hartree", "energy_ev", "oscillator_strength"],
        [(i, x, hartree_to_ev(x), f) for i, (x, f) in enumerate(zip(e, sticks.stick_intensities))],
    )
    write_csv(
        os.path.join(out, "broadened.csv"),
        ["energy_hartree", "energy_ev", "intensity"],
        [(x, hartree_to_ev(x), y) for x, y in zip(spec.grid, spec.intensity)],
    )


def _scan_model_name(config):
    m = config.system.model
    if m not in ("tc_kasha", "tc_impurity"):
        raise ConfigError(f"scan needs model tc_kasha or tc_impurity, got {m}")
    return m


def cmd_scan(config, out, args):
    if config.scan is None:
        raise ConfigError("the scan command needs a [scan] section")
    rows = coefficient_scan(
        config.aggregate_spec(),
        config.cavity_spec(),
        config.scan.n_range,
        config.scan.d_range_angstrom,
        LambdaRule(config.cavity.lambda_rule),
        n_rep=config.system.replicas,
        model=_scan_model_name(config),
        flip_mode=config.scan.flip_mode,
    )
    for r in rows:
        if r.error:
            print(f"polchain: warning: N={r.n} d={r.d_angstrom}: {r.error}", file=sys.stderr)
    write_csv(os.path.join(out, "scan.csv"), SCAN_COLUMNS, [r.values() for r in rows])


def cmd_disorder(config, out, args):
    spec = config.aggregate_spec()
    if config.system.model not in ("tc_kasha", "tc_impurity"):
        raise ConfigError("disorder needs model tc_kasha or tc_impurity")
    cavity = config.cavity_spec()
    d = config.disorder_spec(seed=args.seed, samples=args.samples)
    coulomb = config.system.model == "tc_kasha" and (config.disorder is None or config.disorder.coulomb)
    stats = ensemble_polariton_stats(spec, cavity, d, coulomb=coulomb)
    write_csv(
        os.path.join(out, "samples.csv"),
        ["stream", "e_lp", "e_mp", "e_up", "c_p", "c_a1", "c_a2"],
        [(s.stream_index, *s.energies, *s.shells_lp) for s in stats.samples],
    )
    write_csv(
        os.path.join(out, "aggregate.csv"),
        ["emitter", "lp_mean", "lp_std", "mp_mean", "mp_std"],
        [(k + 1, *vals) for k, vals in
         enumerate(zip(stats.lp_mean, stats.lp_std, stats.mp_mean, stats.mp_std))],
    )
    edges = stats.histogram_edges
    write_csv(
        os.path.join(out, "histogram.csv"),
        ["bin_lo", "bin_hi", "lp", "mp", "up"],
        [(edges[i], edges[i + 1], *(int(stats.histograms[b][i]) for b in ("lp", "mp", "up")))
         for i in range(len(edges) - 1)],
    )
    if config.scan is not None:
        rows = []
        for stream in range(d.n_samples):
            scan = disorder_scan(spec, cavity, d, config.scan.n_range, stream, coulomb,
                                 config.scan.flip_mode)
            rows.extend((stream, *r.values()) for r in scan)
        write_csv(os.path.join(out, "disorder_scan.csv"), ("stream",) + SCAN_COLUMNS, rows)


def cmd_kasha(config, out, args):
    spec = config.aggregate_spec()
    model = build_kasha_exciton(spec, CouplingMode(config.system.coupling))
    eig = dense_symmetric_eig(model)
    f = oscillator_strengths(eig, chain_geometry(spec), labels=model.labels).stick_intensities
    write_csv(
        os.path.join(out, "exciton.csv"),
        ["state", "energy_hartree", "energy_ev", "shift_ev", "oscillator_strength"],
        [(i, e, hartree_to_ev(e), hartree_to_ev(e - spec.omega_bulk), f[i])
         for i, e in enumerate(eig.eigenvalues)],
    )


COMMANDS = {
    "diagonalize": cmd_diagonalize,
    "spectrum": cmd_spectrum,
    "scan": cmd_scan,
    "disorder": cmd_disorder,
    "kasha": cmd_kasha,
}


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="polchain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", help="output directory (overrides [output] directory)")
        p.add_argument("--seed", type=_u64, help="override the disorder seed")
        p.add_argument("--samples", type=_positive_int, help="override the number of disorder samples")
        p.add_argument("--format", choices=("csv",), default="csv")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out = args.out if args.out is not None else config.output.directory
        os.makedirs(out, exist_ok=True)
        COMMANDS[args.command](config, out, args)
    except ConfigError as exc:
        print(f"polchain: config error: {exc}", file=sys.stderr)
        return 2
    except (PolchainError, OSError) as exc:
        print(f"polchain: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
