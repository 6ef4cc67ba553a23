"""Galerkin EFIE solver with OSRC preconditioning for PEC surfaces."""
__version__ = "0.1.0"
