"""Polariton-phonon hybrids in vibrating emitter arrays coupled to a waveguide.

Dense numerics for the bare and phonon-dressed single-excitation
Hamiltonians, the Schrieffer-Wolff effective model and the quasiperiodic
analyses built on it.
"""

__version__ = "0.1.0"
