import numpy as np
import pytest

from fieldtopo.errors import DegenerateTet, NonManifoldFace
from fieldtopo.generators import GridSpec, gen_grid
from fieldtopo.mesh import (
    Cochain,
    boundary_operator,
    build_complex,
    validate_complex,
)

REF_VERTS = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def test_single_tet_counts():
    cx = build_complex(REF_VERTS, [[0, 1, 2, 3]])
    assert cx.num_edges == 6
    assert cx.num_faces == 4
    assert cx.euler_characteristic == 1


def test_single_tet_d2_entries():
    cx = build_complex(REF_VERTS, [[0, 1, 2, 3]])
    d2 = boundary_operator(cx, 3).toarray()
    assert d2.shape == (1, 4)
    assert sorted(np.abs(d2).ravel()) == [1, 1, 1, 1]


def test_dd_zero_exact():
    cx = gen_grid(GridSpec(2, 3, 2))
    assert (cx.D1 @ cx.D0).count_nonzero() == 0
    assert (cx.D2 @ cx.D1).count_nonzero() == 0


def test_d0_rows():
    cx = gen_grid(GridSpec(2, 2, 2))
    d0 = cx.D0.toarray()
    assert np.all(np.sort(d0, axis=1)[:, 0] == -1)
    assert np.all(np.sort(d0, axis=1)[:, -1] == 1)
    assert np.all(d0.sum(axis=1) == 0)


def test_degenerate_tet_rejected():
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [2, 0, 0]])
    with pytest.raises(DegenerateTet):
        build_complex(verts, [[0, 1, 2, 3], [0, 1, 1, 4]])


def test_zero_volume_tet_rejected():
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]])
    with pytest.raises(DegenerateTet):
        build_complex(verts, [[0, 1, 2, 3]])


def test_nonmanifold_face_rejected():
    # three tets glued along one common face
    verts = np.array(
        [[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1], [1, 1, 1]]
    )
    with pytest.raises(NonManifoldFace):
        build_complex(verts, [[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]])


def test_duplicate_tets_rejected():
    with pytest.raises(ValueError):
        build_complex(REF_VERTS, [[0, 1, 2, 3], [1, 0, 3, 2]])


def test_negative_orientation_fixed():
    cx = build_complex(REF_VERTS, [[1, 0, 2, 3]])
    assert cx.volumes()[0] > 0
    assert validate_complex(cx).ok


def test_reorientation_invariance():
    """Swapping the input order of any tet leaves all checks passing."""
    spec = GridSpec(2, 2, 2)
    cx = gen_grid(spec)
    tets = cx.tets.copy()
    tets[5, [0, 1]] = tets[5, [1, 0]]
    cx2 = build_complex(cx.vertices, tets)
    r = validate_complex(cx2)
    assert r.ok
    assert (cx2.D1 @ cx2.D0).count_nonzero() == 0


def test_deterministic_rebuild():
    spec = GridSpec(2, 2, 3)
    a = gen_grid(spec)
    b = gen_grid(spec)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.faces, b.faces)
    assert (a.D0 != b.D0).nnz == 0
    assert (a.D1 != b.D1).nnz == 0
    assert (a.D2 != b.D2).nnz == 0


def test_validate_cube_passes():
    r = validate_complex(gen_grid(GridSpec(2, 2, 2)))
    assert r.ok
    assert r.euler_characteristic == 1
    assert r.boundary_components == 1
    assert r.boundary_genus == [0]


def test_validate_flags_corrupted_d1():
    cx = gen_grid(GridSpec(2, 2, 2))
    bad = cx.D1.tolil()
    bad[0, 0] += 1
    cx.D1 = bad.tocsr()
    r = validate_complex(cx)
    assert not r.ok
    assert any("D2@D1" in f or "D1@D0" in f for f in r.failures)
    with pytest.raises(AssertionError):
        r.raise_if_failed()


def test_two_disjoint_tets_two_components():
    verts = np.vstack([REF_VERTS, REF_VERTS + 10.0])
    cx = build_complex(verts, [[0, 1, 2, 3], [4, 5, 6, 7]])
    r = validate_complex(cx)
    assert r.num_components == 2


def test_boundary_surface_genus(solid_torus):
    r = validate_complex(solid_torus)
    assert r.boundary_components == 1
    assert r.boundary_genus == [1]


def test_boundary_surface_oriented_flag(cube4):
    from fieldtopo.surface import boundary_surface

    surf = boundary_surface(cube4)
    assert surf.oriented
    assert surf.genus == [0]


def test_open_boundary_detected(cube4):
    from fieldtopo.errors import OpenBoundary
    from fieldtopo.surface import boundary_surface

    broken = gen_grid(GridSpec(2, 2, 2))
    # drop one boundary face: the remaining set no longer closes up
    broken.boundary_faces = broken.boundary_faces[1:]
    with pytest.raises(OpenBoundary):
        boundary_surface(broken)


def test_closed_mesh_no_boundary(torus3_coarse):
    assert len(torus3_coarse.boundary_faces) == 0


def test_cochain_roundtrip(cube4):
    phi = np.arange(cube4.num_vertices, dtype=float)
    c = Cochain(cube4, 0, phi)
    g = c.d()
    assert g.degree == 1
    assert np.allclose(np.asarray(g.d()), 0.0)
    with pytest.raises(ValueError):
        Cochain(cube4, 1, phi)
