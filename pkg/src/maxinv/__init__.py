"""Simultaneous reconstruction of permittivity and permeability from time-domain boundary data.

A stabilized Maxwell system for the electric field is integrated with an
explicit leapfrog scheme on a structured grid; the Tikhonov functional of
the boundary misfit is minimized by projected conjugate gradients with
gradients from an exact discrete adjoint.
"""
__version__ = "0.1.0"
