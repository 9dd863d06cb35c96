"""Ground states of Schrodinger-Poisson systems with competing potentials and a
critical nonlinearity: Nehari-constrained solvers, the ground-energy landscape,
semiclassical scans and critical-level diagnostics."""

__version__ = "0.1.0"
