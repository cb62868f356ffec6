"""Unit conventions. Energies are Hartree, lengths bohr, dipoles e*bohr."""

HARTREE_TO_EV = 27.211386
ANGSTROM_TO_BOHR = 1.8897259886

# Site energies of the hydrogen dimers (bulk and stretched impurity).
OMEGA_BULK_EV = 12.498
OMEGA_IMPURITY_EV = 12.337
DEFAULT_DIPOLE_AU = 1.0


def ev_to_hartree(e):
    return e / HARTREE_TO_EV


def hartree_to_ev(e):
    return e * HARTREE_TO_EV


def angstrom_to_bohr(x):
    return x * ANGSTROM_TO_BOHR
