"""Numerical core: fields, operators, energies and time stepping."""
