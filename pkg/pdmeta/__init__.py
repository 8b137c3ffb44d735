"""Pseudo-Hermitian position-dependent-mass Hamiltonian toolkit."""
