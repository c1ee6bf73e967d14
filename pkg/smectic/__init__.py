"""Smectic-A Q-tensor/density solver with an exponential SAV time integrator."""
