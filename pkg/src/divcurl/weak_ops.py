"""Element-level weak Galerkin kernels for the lowest-order element.

A weak function on a tet carries an interior value and one trace value per
face.  Testing the defining integration-by-parts identities against
constant fields gives closed forms for the discrete weak gradient and
weak curl of piecewise-constant weak functions:

    grad_w v      =  (1/|T|) sum_F  v_b,F |F| n_F
    curl_w psi    = -(1/|T|) sum_F  |F| (psi_b,F x n_F)

with n_F the outward unit normal.  The interior value does not enter at
this order.  Face trace vectors live in the face plane and are stored as
global 3-vectors.

All kernels and projections are pure functions of their arguments and
safe to call concurrently.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import ElementGeometry
from .quadrature import (
    TET_REF_MEASURE,
    TRI_REF_MEASURE,
    map_to_tetrahedra,
    map_to_triangles,
    tetrahedron_rule,
    triangle_rule,
)

__all__ = [
    "ScalarWeakLocal",
    "VectorWeakLocal",
    "weak_gradient_p0",
    "weak_curl_p0",
    "l2_project_cell",
    "l2_project_face",
    "project_field",
    "TANGENT_TOL",
]

TANGENT_TOL = 1e-12


@dataclass
class ScalarWeakLocal:
    """Scalar weak function on one tet: cell value and 4 face values."""

    v0: float
    vb: np.ndarray  # (4,)


@dataclass
class VectorWeakLocal:
    """Vector weak function on one tet.

    ``psib[i]`` is the trace on local face i, a global 3-vector lying in
    the face plane (``psib[i] . n_i = 0``).
    """

    psi0: np.ndarray  # (3,)
    psib: np.ndarray  # (4, 3)


def weak_gradient_p0(geom: ElementGeometry, v: ScalarWeakLocal) -> np.ndarray:
    """Discrete weak gradient of a piecewise-constant scalar weak function."""
    vb = np.asarray(v.vb, dtype=float)
    return (geom.areas * vb) @ geom.normals / geom.volume


def weak_curl_p0(geom: ElementGeometry, psi: VectorWeakLocal) -> np.ndarray:
    """Discrete weak curl of a piecewise-constant vector weak function.

    Raises ``ValueError`` when a face trace has a normal component larger
    than ``TANGENT_TOL`` relative to its magnitude.
    """
    psib = np.asarray(psi.psib, dtype=float)
    normal_part = np.abs(np.einsum("fd,fd->f", psib, geom.normals))
    scale = np.maximum(np.linalg.norm(psib, axis=1), 1.0)
    if np.any(normal_part > TANGENT_TOL * scale):
        raise ValueError("face trace is not tangential to the face plane")
    return -np.einsum(
        "f,fd->d", geom.areas, np.cross(psib, geom.normals)
    ) / geom.volume


def l2_project_cell(f, verts: np.ndarray, degree: int = 4):
    """Cell average of a scalar or vector field over one tetrahedron.

    ``f`` maps (N, 3) points to (N,) or (N, 3) values.  Exact for
    polynomials up to the quadrature degree.
    """
    pts, wts = tetrahedron_rule(degree)
    phys = map_to_tetrahedra(pts, verts[None])[0]
    vals = np.asarray(f(phys), dtype=float)
    return np.tensordot(wts, vals, axes=1) / TET_REF_MEASURE


def l2_project_face(g, verts: np.ndarray, degree: int = 4, normal=None):
    """Face average of a field over one triangle.

    For vector fields with ``normal`` given, returns the tangential part
    of the mean: mean(g) - (mean(g).n) n.
    """
    pts, wts = triangle_rule(degree)
    phys = map_to_triangles(pts, verts[None])[0]
    vals = np.asarray(g(phys), dtype=float)
    mean = np.tensordot(wts, vals, axes=1) / TRI_REF_MEASURE
    if normal is not None and mean.shape == (3,):
        n = np.asarray(normal, dtype=float)
        mean = mean - (mean @ n) * n
    return mean


def project_field(u, mesh, degree: int = 4) -> np.ndarray:
    """Elementwise L2 projection of a vector field onto cell constants.

    Returns the (num_tets, 3) array of cell averages of ``u``.
    """
    pts, wts = tetrahedron_rule(degree)
    phys = map_to_tetrahedra(pts, mesh.vertices[mesh.tets])  # (nt, k, 3)
    vals = np.asarray(u(phys.reshape(-1, 3)), dtype=float)
    vals = vals.reshape(mesh.num_tets, len(wts), 3)
    return np.einsum("k,tkd->td", wts, vals) / TET_REF_MEASURE
