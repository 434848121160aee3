"""Explicit solution families for Eikonal, Euler, Navier-Stokes and Allen-Cahn
equations, with numerical certificates for each."""
__version__ = "0.1.0"
