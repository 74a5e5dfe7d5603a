"""Planar spatial algebra for sagittal-plane rigid body dynamics.

Conventions used throughout the simulator:

* The plane is spanned by world axes x (horizontal) and z (vertical, up).
* Angles are measured counterclockwise in the x-z plane, i.e. a positive
  rotation turns +x toward +z.  ``rot(theta)`` maps child-frame vectors to
  parent-frame vectors.
* A planar motion vector is ``(omega, vx, vz)``: angular rate plus the linear
  velocity of the body-fixed point currently coincident with the frame
  origin.  A planar force vector is ``(tau, fx, fz)``: moment about the frame
  origin plus linear force.

These are the 3-dimensional planar restrictions of 6D spatial vectors; the
identities (cross products, transforms, rigid-body inertia) mirror the 6D
ones.  The numba kernels in :mod:`pushrec.bipedsim.dynamics` inline the same
formulas; this module is the readable reference and is used by the tests.
"""

from __future__ import annotations

import math

import numpy as np


def rot(theta: float) -> np.ndarray:
    """2x2 rotation, child axes -> parent axes."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def xform_motion(theta: float, px: float, pz: float) -> np.ndarray:
    """Motion transform A -> B where frame B sits at (px, pz) in A, rotated by theta.

    Applied to a motion vector expressed in A coordinates (about A's origin),
    yields the same motion expressed in B coordinates (about B's origin).
    """
    c, s = math.cos(theta), math.sin(theta)
    return np.array([
        [1.0, 0.0, 0.0],
        [s * px - c * pz, c, s],
        [c * px + s * pz, -s, c],
    ])


def xform_force(theta: float, px: float, pz: float) -> np.ndarray:
    """Force transform matching :func:`xform_motion` (i.e. X^{-T})."""
    return np.linalg.inv(xform_motion(theta, px, pz)).T


def crm(v: np.ndarray) -> np.ndarray:
    """Motion cross product matrix: crm(v) @ m = v x m."""
    w, vx, vz = v
    return np.array([
        [0.0, 0.0, 0.0],
        [vz, 0.0, -w],
        [-vx, w, 0.0],
    ])


def crf(v: np.ndarray) -> np.ndarray:
    """Force cross product matrix: crf(v) @ f = v x* f.  Equals -crm(v).T."""
    return -crm(v).T


def spatial_inertia(mass: float, inertia_com: float, cx: float, cz: float) -> np.ndarray:
    """Planar rigid-body inertia about the body frame origin.

    ``inertia_com`` is the rotational inertia about the center of mass, which
    sits at (cx, cz) in body coordinates.
    """
    return np.array([
        [inertia_com + mass * (cx * cx + cz * cz), -mass * cz, mass * cx],
        [-mass * cz, mass, 0.0],
        [mass * cx, 0.0, mass],
    ])


def point_force_to_spatial(px: float, pz: float, fx: float, fz: float) -> np.ndarray:
    """Pure force at point (px, pz) as a planar force vector about the origin."""
    return np.array([px * fz - pz * fx, fx, fz])
