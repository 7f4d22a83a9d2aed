"""Degree-of-freedom maps and assembly of the primal-dual saddle system.

Unknowns per mesh entity (lowest-order element):

    block   entity   count   meaning
    -----   ------   -----   -------
    lam0    tet      1       scalar multiplier, interior value
    lamb    face     1       scalar multiplier, trace value
    q0      tet      3       vector multiplier, interior value
    qb      face     2       vector multiplier trace, coefficients on the
                             two unit tangent vectors of the face
    u       tet      3       primal vector field
    s0      tet      1       auxiliary scalar, interior value
    sb      face     1       auxiliary scalar, trace value

Raw numbering is deterministic: blocks in the order above, tets before
faces, both in mesh order.  The global matrix has the symmetric block
form

    [ S1   B  ]        S1 = face stabilizer on (lam, q)   (PSD)
    [ B^T  -S2]        S2 = face stabilizer on s          (PSD)

where B couples (u, s) into the multiplier test equations through the
weak gradient and weak curl kernels; the (u, u) block is identically
zero.

Constraints are recorded, not eliminated: trace values of q vanish on the
whole boundary, traces of s vanish on the exterior boundary component and
are held at zero on every cavity component during the base solve (cavity
indicator vectors are kept for the post-processing that recovers the
cavity constants), and one lam0 value is pinned to fix the mean.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .mesh import Mesh
from .problems import ProblemSpec
from .quadrature import (
    TET_REF_MEASURE,
    TRI_REF_MEASURE,
    map_to_tetrahedra,
    map_to_triangles,
    tetrahedron_rule,
    triangle_rule,
)

__all__ = [
    "DofMap",
    "GlobalSystem",
    "build_dof_map",
    "assemble_s1",
    "assemble_s2",
    "assemble_Bh",
    "assemble_rhs",
    "assemble_global",
]

_BLOCKS = ("lam0", "lamb", "q0", "qb", "u", "s0", "sb")
_PER_ENTITY = {"lam0": 1, "lamb": 1, "q0": 3, "qb": 2, "u": 3, "s0": 1, "sb": 1}
_TET_BLOCKS = ("lam0", "q0", "u", "s0")


@dataclass
class DofMap:
    """Raw numbering, face tangent bases, and constraint records."""

    num_tets: int
    num_faces: int
    offsets: dict
    total: int
    tangents: np.ndarray  # (nf, 2, 3) unit edge directions from vertex 0
    fixed: np.ndarray  # (total,) bool
    cavity_faces: dict  # component id -> face index array
    pinned_lam0: int
    free: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.free is None:
            self.free = np.flatnonzero(~self.fixed)

    @property
    def num_free(self) -> int:
        return len(self.free)

    def block(self, name: str) -> slice:
        start, stop = self.offsets[name]
        return slice(start, stop)

    def index(self, name: str, entity, comp=0):
        """Raw index of DoF ``comp`` of ``entity`` in block ``name``."""
        start, _ = self.offsets[name]
        return start + _PER_ENTITY[name] * np.asarray(entity) + comp

    def block_counts(self) -> dict:
        return {
            name: self.offsets[name][1] - self.offsets[name][0] for name in _BLOCKS
        }


def build_dof_map(mesh: Mesh) -> DofMap:
    """Number all degrees of freedom and record the boundary constraints."""
    nt, nf = mesh.num_tets, mesh.num_faces
    offsets = {}
    pos = 0
    for name in _BLOCKS:
        count = _PER_ENTITY[name] * (nt if name in _TET_BLOCKS else nf)
        offsets[name] = (pos, pos + count)
        pos += count
    total = pos

    fverts = mesh.vertices[mesh.faces]  # faces store sorted vertex triples
    t1 = fverts[:, 1] - fverts[:, 0]
    t2 = fverts[:, 2] - fverts[:, 0]
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 /= np.linalg.norm(t2, axis=1)[:, None]
    tangents = np.stack([t1, t2], axis=1)

    fixed = np.zeros(total, dtype=bool)
    bnd = mesh.face_tags >= 0
    qb0, _ = offsets["qb"]
    for j in (0, 1):
        fixed[qb0 + 2 * np.flatnonzero(bnd) + j] = True
    sb0, _ = offsets["sb"]
    fixed[sb0 + np.flatnonzero(bnd)] = True

    cavity_faces = {}
    for comp in range(1, mesh.domain.num_boundary_components):
        cavity_faces[comp] = np.flatnonzero(mesh.face_tags == comp)

    pinned = offsets["lam0"][0]
    fixed[pinned] = True

    return DofMap(nt, nf, offsets, total, tangents, fixed, cavity_faces, pinned)


def _csr_from_triplets(rows, cols, vals, n) -> sparse.csr_matrix:
    """Duplicate-summing COO -> CSR with a deterministic reduction order.

    ``lexsort`` is stable, so mirrored triplet pairs are summed in the
    same sequence at (i, j) and (j, i) and symmetry is exact in floating
    point.
    """
    rows = np.concatenate([r.ravel() for r in rows])
    cols = np.concatenate([c.ravel() for c in cols])
    vals = np.concatenate([v.ravel() for v in vals])
    order = np.lexsort((cols, rows))
    r, c, v = rows[order], cols[order], vals[order]
    fresh = np.empty(len(r), dtype=bool)
    fresh[0] = True
    fresh[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    head = np.flatnonzero(fresh)
    return sparse.csr_matrix(
        (np.add.reduceat(v, head), (r[head], c[head])), shape=(n, n)
    )


def _broadcast(rows, cols, vals):
    shape = np.broadcast_shapes(rows.shape, cols.shape, vals.shape)
    return (
        np.broadcast_to(rows, shape),
        np.broadcast_to(cols, shape),
        np.broadcast_to(vals, shape),
    )


def assemble_s1(
    mesh: Mesh, dofmap: DofMap, rho1: float = 1.0, rho2: float = 1.0
) -> sparse.csr_matrix:
    """Face stabilizer on the multiplier block (lam, q); symmetric PSD.

    Per element: h_T^-1 [ rho1 |F| (lam0-lamb)(phi0-phib)
                        + rho2 |F| ((q0-qb) x n).((psi0-psib) x n) ]
    summed over the 4 faces; the cross product with the unit normal acts
    as the tangential projector, so only tangential parts of q0 are
    penalized.
    """
    nt = mesh.num_tets
    tf = mesh.tet_faces
    area = mesh.face_areas[tf]  # (nt, 4)
    hinv = 1.0 / mesh.tet_diameters  # (nt,)
    tets = np.arange(nt)

    lam0 = dofmap.index("lam0", tets)  # (nt,)
    lamb = dofmap.index("lamb", tf)  # (nt, 4)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        r, c, v = _broadcast(r, c, v)
        rows.append(r), cols.append(c), vals.append(v)

    w = rho1 * hinv[:, None] * area  # (nt, 4)
    add(lam0, lam0, w.sum(axis=1))
    add(lam0[:, None], lamb, -w)
    add(lamb, lam0[:, None], -w)
    add(lamb, lamb, w)

    # q part: projector P = I - n n^T per face, tangent basis T (3x2)
    normals = mesh.face_normals  # canonical, sign-independent here
    P = np.eye(3)[None] - normals[:, :, None] * normals[:, None, :]
    T = dofmap.tangents.transpose(0, 2, 1)  # (nf, 3, 2)
    G = np.einsum("fdi,fdj->fij", T, T)  # (nf, 2, 2) Gram

    w2 = rho2 * hinv[:, None] * area  # (nt, 4)
    q0 = dofmap.index("q0", tets[:, None], np.arange(3)[None, :])  # (nt, 3)
    qb = dofmap.index(
        "qb", tf[:, :, None], np.arange(2)[None, None, :]
    )  # (nt, 4, 2)

    pq0 = np.einsum("tf,tfcd->tcd", w2, P[tf])  # (nt, 3, 3)
    add(q0[:, :, None], q0[:, None, :], pq0)

    cross = -w2[:, :, None, None] * T[tf]  # (nt, 4, 3, 2)
    add(q0[:, None, :, None], qb[:, :, None, :], cross)
    add(qb[:, :, None, :], q0[:, None, :, None], cross)

    gram = w2[:, :, None, None] * G[tf]  # (nt, 4, 2, 2)
    add(qb[:, :, :, None], qb[:, :, None, :], gram)

    return _csr_from_triplets(rows, cols, vals, dofmap.total)


def assemble_s2(
    mesh: Mesh, dofmap: DofMap, rho3: float = 1.0, gamma_exp: float = -1.0
) -> sparse.csr_matrix:
    """Face stabilizer on the s block; symmetric PSD.

    Per element: rho3 h_T^-gamma |F| (s0-sb)(r0-rb), gamma >= -1.
    The default gamma = -1 keeps the auxiliary-field error decaying at
    first order on smooth benchmarks (larger exponents over-damp it);
    the exponent is configurable.
    """
    nt = mesh.num_tets
    tf = mesh.tet_faces
    area = mesh.face_areas[tf]
    scale = rho3 * mesh.tet_diameters ** (-gamma_exp)
    tets = np.arange(nt)

    s0 = dofmap.index("s0", tets)
    sb = dofmap.index("sb", tf)
    w = scale[:, None] * area
    rows, cols, vals = [], [], []
    for r, c, v in (
        (s0, s0, w.sum(axis=1)),
        (s0[:, None], sb, -w),
        (sb, s0[:, None], -w),
        (sb, sb, w),
    ):
        r, c, v = _broadcast(r, c, v)
        rows.append(r), cols.append(c), vals.append(v)
    return _csr_from_triplets(rows, cols, vals, dofmap.total)


def assemble_Bh(mesh: Mesh, eps: np.ndarray, dofmap: DofMap) -> sparse.csr_matrix:
    """Coupling block B: rows on (lam, q), columns on (u, s).

    At lowest order the weak kernels reduce to per-face surface terms:

        (u, eps grad_w phi)_T   = sum_F |F| phib_F  u . (eps n_F)
        (u, curl_w psi)_T       = -sum_F |F| u . (psib_F x n_F)
        (psi0, eps grad_w s)_T  = sum_F |F| sb_F  psi0 . (eps n_F)

    with n_F the per-tet outward normal, so interior-face contributions
    cancel between the two incident tets.
    """
    nt = mesh.num_tets
    tf = mesh.tet_faces
    area = mesh.face_areas[tf]
    n_out = mesh.outward_normals()  # (nt, 4, 3)
    eps_n = np.einsum("cd,tfd->tfc", eps, n_out)  # (nt, 4, 3)
    tets = np.arange(nt)

    lamb = dofmap.index("lamb", tf)  # (nt, 4)
    u = dofmap.index("u", tets[:, None], np.arange(3)[None, :])  # (nt, 3)
    q0 = dofmap.index("q0", tets[:, None], np.arange(3)[None, :])
    qb = dofmap.index("qb", tf[:, :, None], np.arange(2)[None, None, :])
    sb = dofmap.index("sb", tf)

    rows, cols, vals = [], [], []

    v1 = area[:, :, None] * eps_n  # (nt, 4, 3)
    r, c, v = _broadcast(lamb[:, :, None], u[:, None, :], v1)
    rows.append(r), cols.append(c), vals.append(v)

    T = dofmap.tangents[tf]  # (nt, 4, 2, 3)
    txn = np.cross(T, n_out[:, :, None, :])  # (nt, 4, 2, 3)
    v2 = -area[:, :, None, None] * txn
    r, c, v = _broadcast(qb[:, :, :, None], u[:, None, None, :], v2)
    rows.append(r), cols.append(c), vals.append(v)

    r, c, v = _broadcast(q0[:, None, :], sb[:, :, None], v1)
    rows.append(r), cols.append(c), vals.append(v)

    return _csr_from_triplets(rows, cols, vals, dofmap.total)


def assemble_rhs(
    problem: ProblemSpec, mesh: Mesh, dofmap: DofMap, quad_degree: int = 4
) -> np.ndarray:
    """Load vector: g against psi0, -f against phi0, phi1 against phib on
    the boundary."""
    F = np.zeros(dofmap.total)
    tets = np.arange(mesh.num_tets)

    pts, wts = tetrahedron_rule(quad_degree)
    phys = map_to_tetrahedra(pts, mesh.vertices[mesh.tets])
    flat = phys.reshape(-1, 3)
    scale = mesh.volumes / TET_REF_MEASURE

    fvals = problem.f(flat).reshape(mesh.num_tets, -1)
    F[dofmap.index("lam0", tets)] = -scale * (fvals @ wts)

    gvals = problem.g(flat).reshape(mesh.num_tets, -1, 3)
    q0 = dofmap.index("q0", tets[:, None], np.arange(3)[None, :])
    F[q0] = scale[:, None] * np.einsum("k,tkd->td", wts, gvals)

    bfaces = mesh.boundary_faces
    if len(bfaces):
        tpts, twts = triangle_rule(quad_degree)
        fphys = map_to_triangles(tpts, mesh.vertices[mesh.faces[bfaces]])
        # canonical normal of a boundary face is the domain outward normal
        norms = np.repeat(mesh.face_normals[bfaces], len(twts), axis=0)
        p1 = problem.phi1(fphys.reshape(-1, 3), norms).reshape(len(bfaces), -1)
        fscale = mesh.face_areas[bfaces] / TRI_REF_MEASURE
        F[dofmap.index("lamb", bfaces)] = fscale * (p1 @ twts)
    return F


@dataclass
class GlobalSystem:
    """Assembled saddle-point system over the raw numbering.

    ``A`` keeps rows/columns for constrained DoFs; ``reduced`` hands the
    solver the free subsystem (all constraint values are zero, so no
    lifting is needed).  ``indicators[i]`` is the 0/1 vector over the sb
    trace DoFs of cavity component i, used to recover the cavity constant
    after the base solve.
    """

    A: sparse.csr_matrix
    F: np.ndarray
    S1: sparse.csr_matrix
    S2: sparse.csr_matrix
    dofmap: DofMap
    mesh: Mesh
    problem: ProblemSpec
    params: dict

    def __post_init__(self):
        free = self.dofmap.free
        n = self.dofmap.total
        self._R = sparse.csr_matrix(
            (np.ones(len(free)), (np.arange(len(free)), free)), shape=(len(free), n)
        )

    @property
    def indicators(self) -> dict:
        out = {}
        for comp, faces in self.dofmap.cavity_faces.items():
            vec = np.zeros(self.dofmap.total)
            vec[self.dofmap.index("sb", faces)] = 1.0
            out[comp] = vec
        return out

    def reduced(self):
        """Free-DoF system (A_ff, F_f)."""
        A_ff = self._R @ self.A @ self._R.T
        return A_ff.tocsr(), self.F[self.dofmap.free]

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        x = np.zeros(self.dofmap.total)
        x[self.dofmap.free] = x_free
        return x

    def export_matrix_market(self, path: str) -> None:
        """Write the free-DoF matrix in Matrix Market coordinate format."""
        from scipy.io import mmwrite

        A_ff, _ = self.reduced()
        mmwrite(path, A_ff, symmetry="symmetric")


def assemble_global(
    problem: ProblemSpec,
    mesh: Mesh,
    dofmap: DofMap | None = None,
    rho1: float = 1.0,
    rho2: float = 1.0,
    rho3: float = 1.0,
    gamma_exp: float = -1.0,
    quad_degree: int = 4,
) -> GlobalSystem:
    """Assemble the full system [[S1, B], [B^T, -S2]] and load vector."""
    if rho1 <= 0 or rho2 <= 0 or rho3 <= 0:
        raise ValueError("stabilization weights rho_i must be positive")
    if gamma_exp < -1:
        raise ValueError("stabilizer exponent gamma must be >= -1")
    if dofmap is None:
        dofmap = build_dof_map(mesh)
    S1 = assemble_s1(mesh, dofmap, rho1, rho2)
    S2 = assemble_s2(mesh, dofmap, rho3, gamma_exp)
    B = assemble_Bh(mesh, problem.eps, dofmap)
    A = (S1 - S2 + B + B.T).tocsr()
    F = assemble_rhs(problem, mesh, dofmap, quad_degree)
    params = {
        "rho1": rho1,
        "rho2": rho2,
        "rho3": rho3,
        "gamma_exp": gamma_exp,
        "quad_degree": quad_degree,
    }
    return GlobalSystem(A, F, S1, S2, dofmap, mesh, problem, params)
