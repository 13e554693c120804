"""Exact integer (co)homology: Betti numbers, torsion, H^1 generator bases.

Cohomology generators come from two routes.  Periodic grids carry seam
cochains (one per periodic axis) that are closed by construction.  For
everything else we use a tree gauge: every class of closed 1-cochains has a
unique representative vanishing on a spanning forest, so H^1(Z) is exactly
the integer kernel of the curl operator restricted to non-tree edges.  Dual
cycles are edge loops found by a breadth-first search over (vertex, partial
pairing) states, constrained to close up with a prescribed pairing vector.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import TrivialH1
from .mesh import SimplicialComplex3
from .snf import integer_kernel_basis, rank_mod_p, smith_normal_form
from .surface import SurfaceComplex, boundary_surface

EXACT_SNF_LIMIT = 20000


@dataclass
class BettiNumbers:
    betti: tuple[int, int, int, int]
    torsion: list[list[int]]  # invariant factors > 1, per degree
    exact: bool

    @property
    def torsion_free(self) -> bool:
        return not any(self.torsion)

    def flat_torsion(self) -> list[int]:
        return [f for deg in self.torsion for f in deg]


@dataclass
class DualCycle:
    """Integer 1-cycle realized as a closed edge walk."""

    chain: np.ndarray        # signed edge multiplicities
    vertices: list[int]      # closed vertex walk, first == last


@dataclass
class CohomologyBasis:
    cocycles: list[np.ndarray]     # integer closed 1-cochains
    dual_cycles: list[DualCycle]   # edge loops with pairing = identity
    pairing: np.ndarray            # integer period matrix

    @property
    def rank(self) -> int:
        return len(self.cocycles)


def _rank_and_torsion(A, exact: bool):
    if exact:
        r = smith_normal_form(A)
        return r.rank, [int(f) for f in r.invariant_factors if f > 1]
    return rank_mod_p(A), []


def _use_exact(counts) -> bool:
    if max(counts) <= EXACT_SNF_LIMIT:
        return True
    warnings.warn(
        f"complex exceeds {EXACT_SNF_LIMIT} simplices per degree; "
        "computing Betti numbers over GF(p), torsion not certified",
        stacklevel=3,
    )
    return False


def betti_numbers(cx: SimplicialComplex3) -> BettiNumbers:
    """Betti numbers and torsion of H_* from Smith normal form ranks."""
    counts = [cx.num_vertices, cx.num_edges, cx.num_faces, cx.num_tets]
    exact = _use_exact(counts)
    r1, t0 = _rank_and_torsion(cx.D0, exact)
    r2, t1 = _rank_and_torsion(cx.D1, exact)
    r3, t2 = _rank_and_torsion(cx.D2, exact)
    betti = (
        counts[0] - r1,
        counts[1] - r1 - r2,
        counts[2] - r2 - r3,
        counts[3] - r3,
    )
    return BettiNumbers(betti=betti, torsion=[t0, t1, t2, []], exact=exact)


def relative_betti(cx: SimplicialComplex3) -> BettiNumbers:
    """Betti numbers of (M, dM) from the quotient chain complex.

    Boundary simplices are deleted; for a closed mesh this returns the
    absolute homology.  Satisfies beta_k(M) = beta_{3-k}(M, dM).
    """
    if len(cx.boundary_faces) == 0:
        return betti_numbers(cx)
    surf = boundary_surface(cx)
    int_verts = np.setdiff1d(np.arange(cx.num_vertices), surf.vertex_ids())
    int_edges = np.setdiff1d(np.arange(cx.num_edges), surf.parent_edge_ids)
    int_faces = np.setdiff1d(np.arange(cx.num_faces), cx.boundary_faces)

    D0r = cx.D0[int_edges][:, int_verts]
    D1r = cx.D1[int_faces][:, int_edges]
    D2r = cx.D2[:, int_faces]

    counts = [len(int_verts), len(int_edges), len(int_faces), cx.num_tets]
    exact = _use_exact(counts)
    r1, t0 = _rank_and_torsion(D0r, exact)
    r2, t1 = _rank_and_torsion(D1r, exact)
    r3, t2 = _rank_and_torsion(D2r, exact)
    betti = (
        counts[0] - r1,
        counts[1] - r1 - r2,
        counts[2] - r2 - r3,
        counts[3] - r3,
    )
    return BettiNumbers(betti=betti, torsion=[t0, t1, t2, []], exact=exact)


def _adjacency(edges: np.ndarray) -> dict[int, list[tuple[int, int, int]]]:
    """vertex -> sorted list of (neighbour, edge index, sign along canonical)."""
    adj: dict[int, list[tuple[int, int, int]]] = {}
    for k, (a, b) in enumerate(edges):
        adj.setdefault(int(a), []).append((int(b), k, 1))
        adj.setdefault(int(b), []).append((int(a), k, -1))
    for v in adj:
        adj[v].sort()
    return adj


def _spanning_forest(edges: np.ndarray) -> set[int]:
    """Deterministic BFS spanning forest; returns the set of tree edge ids."""
    adj = _adjacency(edges)
    tree: set[int] = set()
    visited: set[int] = set()
    for root in sorted(adj):
        if root in visited:
            continue
        visited.add(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, k, _ in adj[u]:
                if v not in visited:
                    visited.add(v)
                    tree.add(k)
                    queue.append(v)
    return tree


def tree_gauge_cocycles(edges: np.ndarray, D1: sp.spmatrix) -> list[np.ndarray]:
    """Integer basis of H^1(Z) as closed 1-cochains vanishing on a forest.

    Gauging a closed cochain by an exact one makes it vanish on any spanning
    forest, uniquely; the gauged representatives form the integer kernel of
    D1 restricted to non-tree edge columns.
    """
    ne = D1.shape[1]
    tree = _spanning_forest(edges)
    nontree = np.array([k for k in range(ne) if k not in tree], dtype=np.int64)
    if len(nontree) == 0:
        return []
    K = integer_kernel_basis(D1.tocsc()[:, nontree])
    out = []
    for vec in K:
        full = np.zeros(ne, dtype=np.int64)
        full[nontree] = vec
        out.append(full)
    return out


def pairing_loop(
    edges: np.ndarray,
    cocycles: list[np.ndarray],
    target_index: int,
    max_offset: int = 4,
) -> DualCycle:
    """Closed edge walk whose pairing with the cocycle basis is e_j.

    Breadth-first search over (vertex, partial pairing offset) states with
    offsets clamped to |.|_inf <= bound; the bound is widened on failure.
    """
    b = len(cocycles)
    q = np.stack(cocycles, axis=1)  # (E, b) pairing increments
    adj = _adjacency(edges)
    target = tuple(int(i == target_index) for i in range(b))

    roots = []
    seen_roots: set[int] = set()
    for v in sorted(adj):
        if v not in seen_roots:
            roots.append(v)
            comp = {v}
            queue = deque([v])
            while queue:
                u = queue.popleft()
                for w, _, _ in adj[u]:
                    if w not in comp:
                        comp.add(w)
                        queue.append(w)
            seen_roots |= comp

    for bound in range(1, max_offset + 1):
        for root in roots:
            start = (root, (0,) * b)
            goal = (root, target)
            parents: dict = {start: None}
            queue = deque([start])
            found = False
            while queue:
                state = queue.popleft()
                if state == goal:
                    found = True
                    break
                u, off = state
                for v, k, s in adj[u]:
                    noff = tuple(o + s * int(q[k, i]) for i, o in enumerate(off))
                    if max(abs(o) for o in noff) > bound:
                        continue
                    nstate = (v, noff)
                    if nstate not in parents:
                        parents[nstate] = (state, k, s)
                        queue.append(nstate)
            if found:
                chain = np.zeros(len(edges), dtype=np.int64)
                verts = [root]
                state = goal
                while parents[state] is not None:
                    prev, k, s = parents[state]
                    chain[k] += s
                    verts.append(prev[0])
                    state = prev
                verts.reverse()
                return DualCycle(chain=chain, vertices=verts)
    raise RuntimeError(
        f"no dual loop with pairing e_{target_index} within offset bound {max_offset}"
    )


def _h1_cocycles(cx: SimplicialComplex3, b1: int) -> list[np.ndarray]:
    seams = cx.meta.get("seam_crossings") or {}
    if len(seams) == b1:
        cocycles = [np.asarray(seams[ax], dtype=np.int64) for ax in sorted(seams)]
        if all(np.abs(cx.D1 @ c).max(initial=0) == 0 for c in cocycles):
            return cocycles
    return tree_gauge_cocycles(cx.edges, cx.D1)


def h1_cocycles_auto(cx: SimplicialComplex3) -> list[np.ndarray]:
    """Integer H^1 basis cocycles without forcing a rank computation.

    Periodic grids carry one closed seam cochain per periodic axis and these
    generate H^1 for every grid product geometry, so the Smith normal form
    ranks are only computed when no seam data is available.
    """
    seams = cx.meta.get("seam_crossings")
    if seams is not None:
        cocycles = [np.asarray(seams[ax], dtype=np.int64) for ax in sorted(seams)]
        if all(np.abs(cx.D1 @ c).max(initial=0) == 0 for c in cocycles):
            return cocycles
    b1 = betti_numbers(cx).betti[1]
    if b1 == 0:
        return []
    out = tree_gauge_cocycles(cx.edges, cx.D1)
    if len(out) != b1:
        raise RuntimeError(f"found {len(out)} cocycles, expected {b1}")
    return out


def h1_basis(cx: SimplicialComplex3) -> CohomologyBasis:
    """Integer H^1 basis with dual edge loops; pairing is the identity."""
    b1 = betti_numbers(cx).betti[1]
    if b1 == 0:
        raise TrivialH1("H^1 is trivial")
    cocycles = _h1_cocycles(cx, b1)
    if len(cocycles) != b1:
        raise RuntimeError(f"found {len(cocycles)} cocycles, expected {b1}")
    cycles = [pairing_loop(cx.edges, cocycles, j) for j in range(b1)]
    pairing = np.array(
        [[int(c @ z.chain) for z in cycles] for c in cocycles], dtype=np.int64
    )
    if not np.array_equal(pairing, np.eye(b1, dtype=np.int64)):
        raise RuntimeError(f"period pairing is not the identity:\n{pairing}")
    return CohomologyBasis(cocycles=cocycles, dual_cycles=cycles, pairing=pairing)


def surface_h1_basis(surf: SurfaceComplex) -> CohomologyBasis:
    """H^1 basis of a closed triangulated surface (sum of 2g per component)."""
    cocycles = tree_gauge_cocycles(surf.edges, surf.D1s)
    if not cocycles:
        raise TrivialH1("surface H^1 is trivial")
    cycles = [pairing_loop(surf.edges, cocycles, j) for j in range(len(cocycles))]
    pairing = np.array(
        [[int(c @ z.chain) for z in cycles] for c in cocycles], dtype=np.int64
    )
    if not np.array_equal(pairing, np.eye(len(cocycles), dtype=np.int64)):
        raise RuntimeError("surface period pairing is not the identity")
    return CohomologyBasis(cocycles=cocycles, dual_cycles=cycles, pairing=pairing)
