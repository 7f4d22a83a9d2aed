"""Weak gradient/curl kernels and L2 projections on single elements."""

import numpy as np
import pytest

from divcurl.mesh import ElementGeometry, build_domain, build_structured_tet_mesh
from divcurl.weak_ops import (
    ScalarWeakLocal,
    VectorWeakLocal,
    l2_project_cell,
    l2_project_face,
    project_field,
    weak_curl_p0,
    weak_gradient_p0,
)

REF = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@pytest.fixture
def ref_geom():
    return ElementGeometry.from_vertices(REF)


def test_gradient_of_constant_trace_vanishes(ref_geom):
    grad = weak_gradient_p0(ref_geom, ScalarWeakLocal(1.0, np.ones(4)))
    assert np.abs(grad).max() < 1e-14


def test_gradient_single_face(ref_geom):
    # trace 1 on the face x=0 (opposite vertex (1,0,0), local index 1)
    vb = np.zeros(4)
    vb[1] = 1.0
    grad = weak_gradient_p0(ref_geom, ScalarWeakLocal(0.0, vb))
    assert np.allclose(grad, [-3.0, 0.0, 0.0])


def test_gradient_ignores_cell_value(ref_geom):
    vb = np.array([0.3, -1.2, 0.7, 2.0])
    g1 = weak_gradient_p0(ref_geom, ScalarWeakLocal(0.0, vb))
    g2 = weak_gradient_p0(ref_geom, ScalarWeakLocal(42.0, vb))
    assert np.allclose(g1, g2)


def test_gradient_commutes_for_affine(ref_geom):
    # traces of w = x + 2y + 3z are its face-centroid values
    coeff = np.array([1.0, 2.0, 3.0])
    fcent = np.array([REF[[j for j in range(4) if j != i]].mean(axis=0) for i in range(4)])
    v = ScalarWeakLocal(REF.mean(axis=0) @ coeff, fcent @ coeff)
    assert np.allclose(weak_gradient_p0(ref_geom, v), coeff, atol=1e-13)


def test_curl_zero_trace(ref_geom):
    curl = weak_curl_p0(ref_geom, VectorWeakLocal(np.zeros(3), np.zeros((4, 3))))
    assert np.abs(curl).max() == 0.0


def test_curl_single_face_basis_identity(ref_geom):
    # trace w tangent to face i gives curl 3 w x grad(zeta_i)
    rng = np.random.default_rng(3)
    for i in range(4):
        w = rng.standard_normal(3)
        w -= (w @ ref_geom.normals[i]) * ref_geom.normals[i]
        psib = np.zeros((4, 3))
        psib[i] = w
        got = weak_curl_p0(ref_geom, VectorWeakLocal(np.zeros(3), psib))
        assert np.allclose(got, 3.0 * np.cross(w, ref_geom.grad_bary[i]), atol=1e-12)


def test_curl_of_constant_field_vanishes(ref_geom):
    c = np.array([0.4, -0.2, 1.1])
    psib = c - np.einsum("fd,d->f", ref_geom.normals, c)[:, None] * ref_geom.normals
    curl = weak_curl_p0(ref_geom, VectorWeakLocal(c, psib))
    assert np.abs(curl).max() < 1e-13


def test_curl_rejects_non_tangential(ref_geom):
    psib = np.zeros((4, 3))
    psib[0] = ref_geom.normals[0]
    with pytest.raises(ValueError):
        weak_curl_p0(ref_geom, VectorWeakLocal(np.zeros(3), psib))


def test_sign_consistency(ref_geom):
    # flipping stored normals together with the orientation signs leaves
    # the kernels unchanged: outward normals are what enters
    flipped = ElementGeometry(
        vertices=ref_geom.vertices,
        volume=ref_geom.volume,
        grad_bary=ref_geom.grad_bary,
        areas=ref_geom.areas,
        normals=(-1.0) * -ref_geom.normals,  # canonical flip then sign -1
        diameter=ref_geom.diameter,
    )
    vb = np.array([0.5, 1.5, -0.25, 0.0])
    assert np.allclose(
        weak_gradient_p0(ref_geom, ScalarWeakLocal(0.0, vb)),
        weak_gradient_p0(flipped, ScalarWeakLocal(0.0, vb)),
    )


def test_kernels_linear_in_traces(ref_geom):
    rng = np.random.default_rng(11)
    a, b = rng.standard_normal(4), rng.standard_normal(4)
    ga = weak_gradient_p0(ref_geom, ScalarWeakLocal(0.0, a))
    gb = weak_gradient_p0(ref_geom, ScalarWeakLocal(0.0, b))
    gab = weak_gradient_p0(ref_geom, ScalarWeakLocal(0.0, 2.0 * a - 3.0 * b))
    assert np.allclose(gab, 2.0 * ga - 3.0 * gb)


def test_cell_projection_values():
    assert l2_project_cell(lambda p: np.full(len(p), 5.0), REF) == pytest.approx(5.0)
    assert l2_project_cell(lambda p: p[:, 0], REF) == pytest.approx(0.25)
    assert l2_project_cell(lambda p: p[:, 0] ** 2, REF, degree=4) == pytest.approx(0.1)


def test_face_projection_values():
    tri_x0 = REF[[0, 2, 3]]  # the x=0 face
    assert l2_project_face(lambda p: p[:, 0], tri_x0) == pytest.approx(0.0, abs=1e-15)
    got = l2_project_face(
        lambda p: np.tile([1.0, 0.0, 0.0], (len(p), 1)), tri_x0, normal=np.array([-1.0, 0, 0])
    )
    assert np.allclose(got, 0.0, atol=1e-14)
    got = l2_project_face(
        lambda p: np.tile([1.0, 1.0, 0.0], (len(p), 1)),
        REF[[0, 1, 2]],
        normal=np.array([0.0, 0.0, 1.0]),
    )
    assert np.allclose(got, [1.0, 1.0, 0.0])


def test_project_field_on_mesh():
    m = build_structured_tet_mesh(build_domain(1), 2)
    qu = project_field(lambda p: p, m)
    centroids = m.vertices[m.tets].mean(axis=1)
    assert np.allclose(qu, centroids, atol=1e-13)
    const = project_field(lambda p: np.tile([2.0, -1.0, 0.5], (len(p), 1)), m)
    assert np.allclose(const, [2.0, -1.0, 0.5])


def test_commutativity_property_random_affine():
    # weak kernels of projected affine fields equal the projected exact
    # derivative fields
    rng = np.random.default_rng(20240817)
    worst = 0.0
    for _ in range(200):
        verts = rng.uniform(-1.0, 1.0, (4, 3))
        try:
            geom = ElementGeometry.from_vertices(verts)
        except Exception:
            continue
        if geom.volume < 1e-3:
            continue
        verts = geom.vertices
        centroid = verts.mean(axis=0)
        fcent = np.array(
            [verts[[j for j in range(4) if j != i]].mean(axis=0) for i in range(4)]
        )
        a, b = rng.standard_normal(), rng.standard_normal(3)
        got = weak_gradient_p0(geom, ScalarWeakLocal(a + b @ centroid, a + fcent @ b))
        worst = max(worst, np.abs(got - b).max() / max(1.0, np.abs(b).max()))

        C, d = rng.standard_normal((3, 3)), rng.standard_normal(3)
        curl = np.array([C[2, 1] - C[1, 2], C[0, 2] - C[2, 0], C[1, 0] - C[0, 1]])
        psib = fcent @ C.T + d
        psib -= np.einsum("fd,fd->f", psib, geom.normals)[:, None] * geom.normals
        got = weak_curl_p0(geom, VectorWeakLocal(C @ centroid + d, psib))
        worst = max(worst, np.abs(got - curl).max() / max(1.0, np.abs(curl).max()))
    assert worst < 1e-12
