import numpy as np
import pytest

from fieldtopo.errors import EmptyMesh, ParseError, RingTouchesBoundary
from fieldtopo.generators import (
    GridSpec,
    default_ring,
    gen_box_minus_ring,
    gen_grid,
    read_msh,
)
from fieldtopo.homology import betti_numbers
from fieldtopo.mesh import validate_complex


def test_unit_cube_counts():
    # Kuhn subdivision of one hex: 12 cube edges + 6 face diagonals + 1 body
    # diagonal; 12 boundary + 6 interior faces
    cx = gen_grid(GridSpec(1, 1, 1))
    assert (cx.num_vertices, cx.num_edges, cx.num_faces, cx.num_tets) == (8, 19, 18, 6)
    assert cx.euler_characteristic == 1


@pytest.mark.parametrize("n", [3, 4])
def test_fully_periodic_counts(n):
    cx = gen_grid(GridSpec(n, n, n, periodic=(True, True, True)))
    assert cx.num_vertices == n**3
    assert cx.num_edges == 7 * n**3
    assert cx.num_faces == 12 * n**3
    assert cx.num_tets == 6 * n**3
    assert cx.euler_characteristic == 0
    assert len(cx.boundary_faces) == 0


def test_solid_torus_chi():
    cx = gen_grid(GridSpec(2, 2, 4, periodic=(False, False, True)))
    assert cx.euler_characteristic == 0
    assert validate_complex(cx).ok


def test_periodic_needs_three_cells():
    with pytest.raises(ValueError):
        gen_grid(GridSpec(2, 2, 2, periodic=(False, False, True)))


def test_generated_meshes_validate():
    for spec in [
        GridSpec(1, 2, 3),
        GridSpec(3, 3, 3, periodic=(True, True, True)),
        GridSpec(4, 4, 2, 2.0, 1.0, 3.0, periodic=(True, True, False)),
    ]:
        assert validate_complex(gen_grid(spec)).ok


def test_grid_boundary_structure():
    cube = gen_grid(GridSpec(2, 2, 2))
    r = validate_complex(cube)
    assert (r.boundary_components, r.boundary_genus) == (1, [0])
    closed = gen_grid(GridSpec(3, 3, 3, periodic=(True, True, True)))
    assert len(closed.boundary_faces) == 0


def test_refinement_preserves_topology():
    for a, b in [(GridSpec(1, 1, 1), GridSpec(2, 2, 2)),
                 (GridSpec(2, 2, 4, periodic=(False, False, True)),
                  GridSpec(4, 4, 8, periodic=(False, False, True)))]:
        ca, cb = gen_grid(a), gen_grid(b)
        assert ca.euler_characteristic == cb.euler_characteristic
        assert betti_numbers(ca).betti == betti_numbers(cb).betti


def test_box_ring_homology_and_chi():
    cx = gen_box_minus_ring(5)
    assert validate_complex(cx).ok
    # chi = (chi(S^2) + chi(T^2)) / 2
    assert cx.euler_characteristic == 1
    assert betti_numbers(cx).betti == (1, 1, 1, 0)


def test_box_ring_boundary_components():
    r = validate_complex(gen_box_minus_ring(5))
    assert r.boundary_components == 2
    assert sorted(r.boundary_genus) == [0, 1]


def test_ring_touching_wall_rejected():
    ring = [(0, 1, 2), (1, 1, 2), (1, 2, 2), (0, 2, 2)]
    with pytest.raises(RingTouchesBoundary):
        gen_box_minus_ring(5, ring=ring)


def test_ring_not_closed_rejected():
    ring = default_ring(5)[:-1]
    with pytest.raises(ValueError):
        gen_box_minus_ring(5, ring=ring)


MSH_MINIMAL = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
1
1 4 2 0 1 1 2 3 4
$EndElements
"""


def test_read_msh_minimal(tmp_path):
    path = tmp_path / "one.msh"
    path.write_text(MSH_MINIMAL)
    cx = read_msh(path)
    assert cx.num_tets == 1
    assert cx.num_edges == 6


def test_read_msh_ignores_non_tets(tmp_path):
    text = MSH_MINIMAL.replace(
        "$Elements\n1\n1 4 2 0 1 1 2 3 4\n",
        "$Elements\n2\n1 2 2 0 1 1 2 3\n2 4 2 0 1 1 2 3 4\n",
    )
    path = tmp_path / "mixed.msh"
    path.write_text(text)
    with pytest.warns(UserWarning, match="non-tet"):
        cx = read_msh(path)
    assert cx.num_tets == 1


@pytest.mark.filterwarnings("ignore:ignored 1 non-tet")
def test_read_msh_triangles_only_empty(tmp_path):
    text = MSH_MINIMAL.replace(
        "$Elements\n1\n1 4 2 0 1 1 2 3 4\n",
        "$Elements\n1\n1 2 2 0 1 1 2 3\n",
    )
    path = tmp_path / "tris.msh"
    path.write_text(text)
    with pytest.raises(EmptyMesh):
        read_msh(path)


def test_read_msh_bad_count(tmp_path):
    text = MSH_MINIMAL.replace("$Elements\n1\n", "$Elements\nnope\n")
    path = tmp_path / "bad.msh"
    path.write_text(text)
    with pytest.raises(ParseError) as err:
        read_msh(path)
    assert err.value.line is not None


def test_read_msh_short_node_list(tmp_path):
    text = MSH_MINIMAL.replace("$Nodes\n4\n", "$Nodes\n5\n")
    path = tmp_path / "short.msh"
    path.write_text(text)
    with pytest.raises(ParseError):
        read_msh(path)


def test_read_msh_binary_rejected(tmp_path):
    text = MSH_MINIMAL.replace("2.2 0 8", "2.2 1 8")
    path = tmp_path / "bin.msh"
    path.write_text(text)
    with pytest.raises(ParseError):
        read_msh(path)


def test_seam_cochains_closed():
    cx = gen_grid(GridSpec(3, 4, 5, periodic=(True, True, True)))
    seams = cx.meta["seam_crossings"]
    assert sorted(seams) == [0, 1, 2]
    for col in seams.values():
        assert np.abs(cx.D1 @ col).max() == 0
        assert np.abs(col).max() == 1
