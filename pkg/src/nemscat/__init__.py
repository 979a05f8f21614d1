"""Entangled coherent states of a nanomechanical resonator and a microwave cavity.

Closed-form qubit-conditioned dynamics, decoherence and readout probability,
cross-checked against a truncated-Fock-space Lindblad integration.
"""

__version__ = "0.1.0"
