"""Simplicial 3-complexes with exact integer boundary/coboundary operators.

Simplices are keyed canonically: edges and faces are stored as sorted vertex
tuples in lexicographic order, and every incidence sign is the permutation
parity between a simplex's intrinsic vertex order and the canonical key.
All incidence matrices are exact integer matrices and satisfy D1@D0 = 0 and
D2@D1 = 0 identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateTet, NonManifoldFace

# local vertex pairs/triples of a tet, in canonical local order
EDGE_LOCAL = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
FACE_LOCAL = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])

DEGENERACY_REL_VOLUME = 1e-14


def _parity_sorting(rows: np.ndarray) -> np.ndarray:
    """Permutation parity (+1/-1) that sorts each row of a (n,2) or (n,3) array."""
    if rows.shape[1] == 2:
        return np.where(rows[:, 0] < rows[:, 1], 1, -1)
    a, b, c = rows[:, 0], rows[:, 1], rows[:, 2]
    # parity = sign of the product of pairwise differences
    sign = np.sign((b - a) * (c - a) * (c - b))
    return sign.astype(np.int64)


def signed_volumes(tet_coords: np.ndarray) -> np.ndarray:
    """Signed volume of each tet from its per-tet coordinates (T,4,3)."""
    e = tet_coords[:, 1:, :] - tet_coords[:, :1, :]
    return np.linalg.det(e) / 6.0


@dataclass
class SimplicialComplex3:
    """A tetrahedral complex with canonical edge/face enumeration.

    ``tet_coords`` carries the true geometric shape of each tet; for periodic
    meshes it holds minimal-image (unwrapped) coordinates, so seam tets have
    honest shapes even though they reference wrapped vertex indices.
    """

    vertices: np.ndarray        # (V,3) float
    tets: np.ndarray            # (T,4) int, positively oriented
    tet_coords: np.ndarray      # (T,4,3) float
    edges: np.ndarray           # (E,2) int, sorted rows, lexicographic order
    faces: np.ndarray           # (F,3) int, sorted rows, lexicographic order
    D0: sp.csr_matrix           # (E,V) signed incidence, gradient/coboundary
    D1: sp.csr_matrix           # (F,E) signed incidence, curl/coboundary
    D2: sp.csr_matrix           # (T,F) signed incidence, divergence/coboundary
    tet_to_edge: np.ndarray     # (T,6) global edge ids per EDGE_LOCAL
    tet_edge_sign: np.ndarray   # (T,6) +-1, local vs canonical orientation
    tet_to_face: np.ndarray     # (T,4) global face ids per FACE_LOCAL
    tet_face_sign: np.ndarray   # (T,4) +-1, local triple vs sorted triple
    boundary_faces: np.ndarray  # indices of faces lying in exactly one tet
    meta: dict = field(default_factory=dict)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def num_tets(self) -> int:
        return len(self.tets)

    def simplex_count(self, k: int) -> int:
        return (self.num_vertices, self.num_edges, self.num_faces, self.num_tets)[k]

    @property
    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_edges + self.num_faces - self.num_tets

    def volumes(self) -> np.ndarray:
        return signed_volumes(self.tet_coords)

    def vertex_components(self) -> np.ndarray:
        """Connected-component label per vertex (edge graph)."""
        g = sp.csr_matrix(
            (np.ones(self.num_edges), (self.edges[:, 0], self.edges[:, 1])),
            shape=(self.num_vertices, self.num_vertices),
        )
        _, labels = sp.csgraph.connected_components(g, directed=False)
        return labels

    def edge_lengths(self) -> np.ndarray:
        """Length per edge, measured in the first tet containing it."""
        lengths = np.zeros(self.num_edges)
        p = self.tet_coords
        for k in range(6):
            a, b = EDGE_LOCAL[k]
            le = np.linalg.norm(p[:, b] - p[:, a], axis=1)
            lengths[self.tet_to_edge[:, k]] = le
        return lengths


@dataclass
class Cochain:
    """Coefficient vector indexed by the oriented k-simplices of a complex."""

    complex: SimplicialComplex3
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        n = self.complex.simplex_count(self.degree)
        if len(self.values) != n:
            raise ValueError(
                f"degree-{self.degree} cochain needs {n} values, got {len(self.values)}"
            )

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def d(self) -> "Cochain":
        """Coboundary: grad (k=0), curl (k=1) or div (k=2)."""
        op = boundary_operator(self.complex, self.degree + 1)
        return Cochain(self.complex, self.degree + 1, op @ self.values)


def build_complex(vertices, tets, tet_coords=None) -> SimplicialComplex3:
    """Build a validated complex from vertex coordinates and tet connectivity.

    Negative-volume tets are reoriented by swapping two vertices.  Raises
    DegenerateTet for tets below the relative volume threshold and
    NonManifoldFace if a face lies in more than two tets.
    """
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
    tets = np.array(tets, dtype=np.int64).reshape(-1, 4)
    if tets.size and (tets.min() < 0 or tets.max() >= len(vertices)):
        raise ValueError("tet vertex index out of range")
    sorted_tets = np.sort(tets, axis=1)
    if len(np.unique(sorted_tets, axis=0)) != len(tets):
        raise ValueError("duplicate tets")

    if tet_coords is None:
        tet_coords = vertices[tets]
    else:
        tet_coords = np.array(tet_coords, dtype=float).reshape(len(tets), 4, 3)

    vols = signed_volumes(tet_coords)
    mean_vol = np.mean(np.abs(vols)) if len(vols) else 0.0
    bad = np.abs(vols) <= DEGENERACY_REL_VOLUME * mean_vol
    if np.any(bad):
        raise DegenerateTet(f"tets {np.flatnonzero(bad).tolist()} have near-zero volume")
    flip = vols < 0
    if np.any(flip):
        tets = tets.copy()
        tets[flip, 1], tets[flip, 2] = tets[flip, 2].copy(), tets[flip, 1].copy()
        tet_coords = tet_coords.copy()
        tet_coords[flip, 1], tet_coords[flip, 2] = (
            tet_coords[flip, 2].copy(),
            tet_coords[flip, 1].copy(),
        )

    T = len(tets)

    # edges: canonical sorted pairs, deduplicated in lexicographic order
    raw_edges = tets[:, EDGE_LOCAL].reshape(-1, 2)          # (T*6,2) local order
    edge_sign_flat = _parity_sorting(raw_edges)
    edges, edge_inv = np.unique(np.sort(raw_edges, axis=1), axis=0, return_inverse=True)
    tet_to_edge = edge_inv.reshape(T, 6)
    tet_edge_sign = edge_sign_flat.reshape(T, 6)

    # faces: canonical sorted triples
    raw_faces = tets[:, FACE_LOCAL].reshape(-1, 3)
    face_sign_flat = _parity_sorting(raw_faces)
    faces, face_inv = np.unique(np.sort(raw_faces, axis=1), axis=0, return_inverse=True)
    tet_to_face = face_inv.reshape(T, 4)
    tet_face_sign = face_sign_flat.reshape(T, 4)

    face_count = np.bincount(face_inv, minlength=len(faces))
    if np.any(face_count > 2):
        raise NonManifoldFace(
            f"faces {np.flatnonzero(face_count > 2).tolist()} lie in more than 2 tets"
        )
    boundary_faces = np.flatnonzero(face_count == 1)

    E, F = len(edges), len(faces)
    V = len(vertices)

    rows = np.repeat(np.arange(E), 2)
    cols = edges.ravel()
    data = np.tile([-1, 1], E)
    D0 = sp.csr_matrix((data, (rows, cols)), shape=(E, V), dtype=np.int64)

    # boundary of sorted face (a,b,c): +(b,c) -(a,c) +(a,b), all keys sorted
    fa, fb, fc = faces[:, 0], faces[:, 1], faces[:, 2]
    edge_lookup = {tuple(e): i for i, e in enumerate(edges)}
    e_bc = np.array([edge_lookup[(b, c)] for b, c in zip(fb, fc)])
    e_ac = np.array([edge_lookup[(a, c)] for a, c in zip(fa, fc)])
    e_ab = np.array([edge_lookup[(a, b)] for a, b in zip(fa, fb)])
    rows = np.repeat(np.arange(F), 3)
    cols = np.column_stack([e_bc, e_ac, e_ab]).ravel()
    data = np.tile([1, -1, 1], F)
    D1 = sp.csr_matrix((data, (rows, cols)), shape=(F, E), dtype=np.int64)

    # boundary of tet in stored order: face omitting local vertex i enters with
    # (-1)^i times the parity sorting its triple
    rows = np.repeat(np.arange(T), 4)
    cols = tet_to_face.ravel()
    omit_sign = np.array([1, -1, 1, -1])
    data = (tet_face_sign * omit_sign[None, :]).ravel()
    D2 = sp.csr_matrix((data, (rows, cols)), shape=(T, F), dtype=np.int64)

    return SimplicialComplex3(
        vertices=vertices,
        tets=tets,
        tet_coords=tet_coords,
        edges=edges,
        faces=faces,
        D0=D0,
        D1=D1,
        D2=D2,
        tet_to_edge=tet_to_edge,
        tet_edge_sign=tet_edge_sign,
        tet_to_face=tet_to_face,
        tet_face_sign=tet_face_sign,
        boundary_faces=boundary_faces,
    )


def boundary_operator(complex: SimplicialComplex3, k: int) -> sp.csr_matrix:
    """Signed incidence matrix for degree k: 1 -> D0, 2 -> D1, 3 -> D2."""
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    return (complex.D0, complex.D1, complex.D2)[k - 1]


@dataclass
class ValidationReport:
    counts: tuple[int, int, int, int]
    euler_characteristic: int
    num_components: int
    boundary_components: int
    boundary_genus: list[int]
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures

    def raise_if_failed(self):
        if self.failures:
            raise AssertionError("; ".join(self.failures))


def validate_complex(complex: SimplicialComplex3) -> ValidationReport:
    """Check all structural invariants; failures are aggregated, never dropped."""
    failures = []

    vols = complex.volumes()
    if len(vols):
        mean_vol = np.mean(np.abs(vols))
        if np.any(vols <= DEGENERACY_REL_VOLUME * mean_vol):
            failures.append("non-positive or degenerate tet volumes")

    dd0 = (complex.D1 @ complex.D0).tocoo()
    if np.any(dd0.data != 0):
        failures.append("D1@D0 != 0")
    dd1 = (complex.D2 @ complex.D1).tocoo()
    if np.any(dd1.data != 0):
        failures.append("D2@D1 != 0")

    counts = np.bincount(complex.tet_to_face.ravel(), minlength=complex.num_faces)
    if np.any(counts > 2):
        failures.append("face shared by more than 2 tets")

    d0_rowsum = np.asarray(complex.D0.sum(axis=1)).ravel()
    if np.any(d0_rowsum != 0):
        failures.append("D0 row without one -1 and one +1")

    # boundary faces must close up: every boundary edge in exactly two of them
    bgenus: list[int] = []
    n_bcomp = 0
    if len(complex.boundary_faces):
        from .surface import boundary_surface

        try:
            surf = boundary_surface(complex)
            n_bcomp = surf.num_components
            bgenus = list(surf.genus)
            if not surf.oriented:
                failures.append("boundary surface orientation inconsistent")
        except Exception as exc:  # noqa: BLE001 - aggregate everything
            failures.append(f"boundary surface: {exc}")

    labels = complex.vertex_components()
    ncomp = int(labels.max()) + 1 if len(labels) else 0

    return ValidationReport(
        counts=(
            complex.num_vertices,
            complex.num_edges,
            complex.num_faces,
            complex.num_tets,
        ),
        euler_characteristic=complex.euler_characteristic,
        num_components=ncomp,
        boundary_components=n_bcomp,
        boundary_genus=bgenus,
        failures=failures,
    )
