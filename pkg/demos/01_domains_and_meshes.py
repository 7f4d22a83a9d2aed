"""Tour of the built-in computational domains and their structured meshes.

Every domain is a box minus axis-aligned boxes, meshed by slicing into
cubes of edge 1/n and splitting each cube into the same six tetrahedra.
The script prints a census per domain, verifies two geometric identities
on the fly, and drops a VTK file per mesh next to this script for
inspection in ParaView.
"""

import pathlib

import numpy as np

from divcurl import build_domain, build_structured_tet_mesh, element_geometry, write_vtk

HERE = pathlib.Path(__file__).parent

print(f"{'problem':>7s} {'family':>18s} {'tets':>7s} {'faces':>7s} "
      f"{'boundary':>8s} {'components':>10s} {'tunnels':>7s}")
for example in range(1, 8):
    domain = build_domain(example)
    mesh = build_structured_tet_mesh(domain, 2)
    print(f"{example:>7d} {domain.family:>18s} {mesh.num_tets:>7d} "
          f"{mesh.num_faces:>7d} {len(mesh.boundary_faces):>8d} "
          f"{domain.num_boundary_components:>10d} {domain.betti1:>7d}")

# two identities every element satisfies:
#   sum over faces of area-weighted outward normals is zero (closed surface)
#   |F_i| n_i = -3 |T| grad(zeta_i) for the barycentric coordinates
mesh = build_structured_tet_mesh(build_domain(6), 2)
areas = mesh.face_areas[mesh.tet_faces]
normals = mesh.outward_normals()
closed = np.abs(np.einsum("tf,tfd->td", areas, normals)).max()
geom = element_geometry(mesh, 0)
simplex = np.abs(geom.areas[:, None] * geom.normals
                 + 3.0 * geom.volume * geom.grad_bary).max()
print(f"\nclosed-surface identity residual: {closed:.2e}")
print(f"simplex identity residual:        {simplex:.2e}")

for example, name in ((1, "cube"), (4, "cavity"), (6, "two_hole_toroid")):
    mesh = build_structured_tet_mesh(build_domain(example), 4)
    out = HERE / f"mesh_{name}.vtk"
    write_vtk(mesh, str(out), {"boundary_tag": mesh.face_tags[mesh.tet_faces[:, 0]].astype(float)})
    print(f"wrote {out}")
