"""Self-adjoint curl eigenproblem: linear force-free fields curl H = lambda H.

The edge-element pencil (S, M1) is reduced to a constrained DOF space in
which the boundary pairing vanishes:

* CLOSED_MESH  - no boundary, all edge DOFs;
* ZERO_TRACE   - boundary-edge DOFs forced to zero;
* CLOSED_TRACE - boundary-edge DOFs substituted by a boundary vertex
  potential (one pin per boundary component) plus a chosen isotropic set of
  harmonic boundary cochains; the choice is the Lagrangian data of the
  self-adjoint extension.

The huge curl kernel (gradients plus harmonic fields) is deflated
structurally: an explicit basis is assembled and the Krylov iteration is
projected onto its M1-orthogonal complement at every application of the
shift-inverted operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IncompatibleBC, NoConvergence
from .fem import FemMatrices, field_proxies
from .homology import h1_cocycles_auto, pairing_loop, surface_h1_basis
from .mesh import SimplicialComplex3
from .surface import SurfaceComplex, boundary_surface


class BCKind(Enum):
    CLOSED_MESH = "closed-mesh"
    ZERO_TRACE = "zero-trace"
    CLOSED_TRACE = "closed-trace"


@dataclass
class BoundaryCondition:
    """Boundary condition for the curl eigenproblem.

    ``lagrangian_choice`` indexes into the boundary surface's H^1 basis and
    selects which harmonic trace classes are admitted under CLOSED_TRACE;
    the selected classes must pairwise have vanishing intersection pairing.
    """

    kind: BCKind
    lagrangian_choice: tuple[int, ...] = ()

    @staticmethod
    def closed_mesh() -> "BoundaryCondition":
        return BoundaryCondition(BCKind.CLOSED_MESH)

    @staticmethod
    def zero_trace() -> "BoundaryCondition":
        return BoundaryCondition(BCKind.ZERO_TRACE)

    @staticmethod
    def closed_trace(*choice: int) -> "BoundaryCondition":
        return BoundaryCondition(BCKind.CLOSED_TRACE, tuple(choice))

    def describe(self) -> str:
        if self.kind is BCKind.CLOSED_TRACE:
            return f"closed-trace:{','.join(map(str, self.lagrangian_choice))}"
        return self.kind.value


@dataclass
class BoundaryData:
    """Boundary bookkeeping for trace substitution.

    The boundary H^1 basis is normalized against the mesh: the restriction
    pairing (traces of the mesh's H^1 generators against boundary cycles) is
    column-reduced over the integers, so basis elements whose dual cycles
    bound inside the mesh ("meridian-like") come first and carry zero
    columns.  On a solid torus this makes index 0 the meridian choice and
    index 1 the longitude choice.
    """

    surface: SurfaceComplex
    pins: list[int]                      # one vertex per boundary component
    alpha_verts: np.ndarray              # non-pinned boundary vertices (sorted)
    sigma_all: list[np.ndarray]          # normalized H^1 basis cocycles (surface edges)
    zeta_all: list[np.ndarray]           # dual 1-cycles as surface edge chains
    sigma: list[np.ndarray]              # the chosen subset
    restriction_pairing: np.ndarray      # <trace of M cocycles, zeta_all>


@dataclass
class ReducedPencil:
    """Constrained pencil (S_tilde, M1_tilde) plus the DOF embedding C."""

    complex: SimplicialComplex3
    fem: FemMatrices
    bc: BoundaryCondition
    C: sp.csr_matrix            # (E, ndof) embedding of DOFs into edge space
    S: sp.csr_matrix            # symmetrized reduced curl pairing
    S_raw: sp.csr_matrix        # C^T S C before symmetrization
    M1: sp.csr_matrix           # reduced mass
    interior_edges: np.ndarray
    boundary: BoundaryData | None
    symmetry_defect: float      # max|S_raw - S_raw^T| / max|S_raw|

    @property
    def ndof(self) -> int:
        return self.C.shape[1]

    def to_full(self, x: np.ndarray) -> np.ndarray:
        return self.C @ x

    def full_to_dof(self, h: np.ndarray) -> np.ndarray:
        """Coordinates of an admissible edge cochain; exact for exact input."""
        h = np.asarray(h)
        cx = self.complex
        if self.bc.kind is BCKind.CLOSED_MESH:
            return h.copy()
        if self.bc.kind is BCKind.ZERO_TRACE:
            return h[self.interior_edges].copy()
        bd = self.boundary
        surf = bd.surface
        trace = surf.restrict_edge_cochain(h)
        t = np.array(
            [trace @ bd.zeta_all[l] for l in self.bc.lagrangian_choice]
        ) if bd.sigma else np.zeros(0)
        rem = trace - sum(
            tl * sig for tl, sig in zip(t, bd.sigma)
        ) if len(t) else trace
        alpha = _integrate_on_surface(surf, rem, bd.pins)
        x = np.concatenate([h[self.interior_edges], alpha[bd.alpha_verts], t])
        back = self.C @ x
        if np.max(np.abs(back - h)) > 1e-8 * max(1.0, np.max(np.abs(h))):
            raise ValueError("cochain is not admissible under this boundary condition")
        return x


def _integrate_on_surface(surf: SurfaceComplex, cochain: np.ndarray, pins: list[int]):
    """Potential with d(potential) = cochain on a surface spanning forest."""
    from collections import deque

    adj: dict[int, list[tuple[int, int, int]]] = {}
    for k, (a, b) in enumerate(surf.edges):
        adj.setdefault(int(a), []).append((int(b), k, 1))
        adj.setdefault(int(b), []).append((int(a), k, -1))
    for v in adj:
        adj[v].sort()
    alpha = np.zeros(surf.parent.num_vertices)
    seen: set[int] = set()
    for pin in pins:
        alpha[pin] = 0.0
        seen.add(pin)
        queue = deque([pin])
        while queue:
            u = queue.popleft()
            for v, k, s in adj[u]:
                if v not in seen:
                    seen.add(v)
                    alpha[v] = alpha[u] + s * cochain[k]
                    queue.append(v)
    return alpha


def _boundary_data(cx: SimplicialComplex3, bc: BoundaryCondition) -> BoundaryData:
    surf = boundary_surface(cx)
    sverts = surf.vertex_ids()
    comp_of_vertex: dict[int, int] = {}
    for fidx, comp in enumerate(surf.face_component):
        for v in surf.oriented_tris[fidx]:
            comp_of_vertex.setdefault(int(v), int(comp))
    ncomp = surf.num_components
    pins = [
        min(v for v, c in comp_of_vertex.items() if c == comp) for comp in range(ncomp)
    ]
    alpha_verts = np.array(sorted(set(map(int, sverts)) - set(pins)), dtype=np.int64)

    sigma_all: list[np.ndarray] = []
    zeta_all: list[np.ndarray] = []
    sigma: list[np.ndarray] = []
    pairing = np.zeros((0, 0), dtype=np.int64)
    if sum(surf.genus) > 0:
        sbasis = surface_h1_basis(surf)
        nb = sbasis.rank
        sigma_all = [c.copy() for c in sbasis.cocycles]
        zeta_all = [z.chain.copy() for z in sbasis.dual_cycles]

        omegas = h1_cocycles_auto(cx)
        if omegas:
            T = np.array(
                [
                    [int(surf.restrict_edge_cochain(w) @ z) for z in zeta_all]
                    for w in omegas
                ],
                dtype=np.int64,
            )
            sigma_all, zeta_all, pairing = _normalize_boundary_basis(
                T, sigma_all, zeta_all
            )

        for l in bc.lagrangian_choice:
            if not (0 <= l < nb):
                raise IncompatibleBC(
                    f"lagrangian choice {l} out of range for boundary H^1 rank {nb}"
                )
        for l in bc.lagrangian_choice:
            for m in bc.lagrangian_choice:
                cup = surf.cup_integral(sigma_all[l], sigma_all[m])
                if cup != 0:
                    raise IncompatibleBC(
                        f"chosen classes {l},{m} are not isotropic (pairing {cup})"
                    )
        sigma = [sigma_all[l] for l in bc.lagrangian_choice]
    elif bc.lagrangian_choice:
        raise IncompatibleBC("lagrangian choice given but boundary has genus 0")

    return BoundaryData(
        surface=surf,
        pins=pins,
        alpha_verts=alpha_verts,
        sigma_all=sigma_all,
        zeta_all=zeta_all,
        sigma=sigma,
        restriction_pairing=pairing,
    )


def _normalize_boundary_basis(T, sigma_all, zeta_all):
    """Column-reduce the restriction pairing over Z and transform the basis.

    Returns (sigma', zeta', T') with T' = T V P, zeta' = zeta V P and
    sigma' = sigma V^{-T} P, where V is unimodular (from the Smith form of T)
    and P moves zero columns of T V to the front.  Duality <sigma'_i,
    zeta'_j> = delta_ij is preserved.
    """
    from .snf import smith_normal_form

    if T.size == 0:
        return sigma_all, zeta_all, T
    res = smith_normal_form(T, transforms=True)
    V = np.array(res.V.tolist(), dtype=np.int64)
    TV = T @ V
    zero_cols = [j for j in range(V.shape[1]) if not TV[:, j].any()]
    nonzero_cols = [j for j in range(V.shape[1]) if TV[:, j].any()]
    perm = zero_cols + nonzero_cols
    Vinv = np.linalg.inv(V.astype(float))
    Vinv_int = np.rint(Vinv).astype(np.int64)
    if not np.array_equal(Vinv_int @ V, np.eye(V.shape[0], dtype=np.int64)):
        raise RuntimeError("failed to invert unimodular transform exactly")
    new_zeta = [sum(int(V[l, j]) * zeta_all[l] for l in range(len(zeta_all))) for j in perm]
    new_sigma = [
        sum(int(Vinv_int[j, l]) * sigma_all[l] for l in range(len(sigma_all)))
        for j in perm
    ]
    return new_sigma, new_zeta, TV[:, perm]


def reduce_system(
    cx: SimplicialComplex3, fem: FemMatrices, bc: BoundaryCondition
) -> ReducedPencil:
    """Constrain the (S, M1) pencil so the boundary pairing vanishes."""
    has_boundary = len(cx.boundary_faces) > 0
    E = cx.num_edges

    if bc.kind is BCKind.CLOSED_MESH:
        if has_boundary:
            raise IncompatibleBC("CLOSED_MESH requires a mesh without boundary")
        C = sp.identity(E, format="csr")
        interior = np.arange(E)
        bd = None
    elif bc.kind in (BCKind.ZERO_TRACE, BCKind.CLOSED_TRACE):
        if not has_boundary:
            raise IncompatibleBC(f"{bc.kind.value} requires a mesh with boundary")
        bd = _boundary_data(cx, bc)
        surf = bd.surface
        interior = np.setdiff1d(np.arange(E), surf.parent_edge_ids)
        n_int = len(interior)
        rows = [interior]
        cols = [np.arange(n_int)]
        vals = [np.ones(n_int)]
        ncols = n_int
        if bc.kind is BCKind.CLOSED_TRACE:
            # alpha columns: gradient of a boundary vertex potential
            col_of_vertex = {int(v): ncols + i for i, v in enumerate(bd.alpha_verts)}
            r, c, v = [], [], []
            for k, (a, b) in enumerate(surf.edges):
                pe = surf.parent_edge_ids[k]
                if int(a) in col_of_vertex:
                    r.append(pe)
                    c.append(col_of_vertex[int(a)])
                    v.append(-1.0)
                if int(b) in col_of_vertex:
                    r.append(pe)
                    c.append(col_of_vertex[int(b)])
                    v.append(1.0)
            rows.append(np.array(r, dtype=np.int64))
            cols.append(np.array(c, dtype=np.int64))
            vals.append(np.array(v))
            ncols += len(bd.alpha_verts)
            for sig in bd.sigma:
                nz = np.flatnonzero(sig)
                rows.append(surf.parent_edge_ids[nz])
                cols.append(np.full(len(nz), ncols, dtype=np.int64))
                vals.append(sig[nz].astype(float))
                ncols += 1
        C = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(E, ncols),
        ).tocsr()
    else:
        raise IncompatibleBC(f"unknown boundary condition kind {bc.kind}")

    S_raw = (C.T @ fem.S @ C).tocsr()
    M1r = (C.T @ fem.M1 @ C).tocsr()
    defect_mat = (S_raw - S_raw.T).tocoo()
    smax = np.abs(S_raw.data).max() if S_raw.nnz else 1.0
    defect = (np.abs(defect_mat.data).max() / smax) if defect_mat.nnz else 0.0
    S_sym = ((S_raw + S_raw.T) * 0.5).tocsr()
    return ReducedPencil(
        complex=cx,
        fem=fem,
        bc=bc,
        C=C,
        S=S_sym,
        S_raw=S_raw,
        M1=M1r,
        interior_edges=interior,
        boundary=bd,
        symmetry_defect=float(defect),
    )


@dataclass
class KernelBasis:
    """Explicit basis of the curl kernel in DOF coordinates."""

    gradient: sp.csr_matrix      # (ndof, ng) constrained gradient injections
    harmonic: np.ndarray         # (ndof, nh) harmonic representatives

    @property
    def harmonic_dimension(self) -> int:
        return self.harmonic.shape[1]


def _gradient_columns(pencil: ReducedPencil) -> sp.csr_matrix:
    """Injection of every BC-admissible potential into the DOF space."""
    cx = pencil.complex
    bc = pencil.bc
    labels = cx.vertex_components()
    drop: set[int] = set()
    for comp in range(labels.max() + 1):
        drop.add(int(np.flatnonzero(labels == comp)[0]))

    D0 = cx.D0.tocsc()
    if bc.kind is BCKind.CLOSED_MESH:
        keep = [v for v in range(cx.num_vertices) if v not in drop]
        return D0[:, keep].tocsr()

    surf = pencil.boundary.surface
    interior_edges = pencil.interior_edges
    D0_int = D0[interior_edges, :]

    if bc.kind is BCKind.ZERO_TRACE:
        # admissible potentials: free on interior vertices, locally constant
        # on each boundary component; one parameter per mesh component is
        # redundant (global constants) and gets dropped
        sverts = set(map(int, surf.vertex_ids()))
        comp_of_vertex: dict[int, int] = {}
        for fidx, comp in enumerate(surf.face_component):
            for v in surf.oriented_tris[fidx]:
                comp_of_vertex.setdefault(int(v), int(comp))
        bcomp_rep: dict[int, int] = {}
        for v, c in comp_of_vertex.items():
            bcomp_rep.setdefault(c, v)
        drop_bcomp: set[int] = set()
        drop_ivert: set[int] = set()
        for mcomp in range(labels.max() + 1):
            owned = sorted(c for c, v in bcomp_rep.items() if labels[v] == mcomp)
            if owned:
                drop_bcomp.add(owned[0])
            else:
                drop_ivert.add(int(np.flatnonzero(labels == mcomp)[0]))
        cols = []
        for v in range(cx.num_vertices):
            if v in sverts or v in drop_ivert:
                continue
            cols.append(D0_int[:, v])
        for comp in range(surf.num_components):
            if comp in drop_bcomp:
                continue
            verts = [v for v, c in comp_of_vertex.items() if c == comp]
            combined = sum(D0_int[:, v] for v in verts)
            cols.append(sp.csc_matrix(combined))
        if not cols:
            return sp.csr_matrix((len(interior_edges), 0))
        return sp.hstack(cols, format="csr")

    # CLOSED_TRACE: phi on all vertices except one drop per mesh component
    bd = pencil.boundary
    n_int = len(interior_edges)
    nalpha = len(bd.alpha_verts)
    nt = len(bd.sigma)
    alpha_col = {int(v): n_int + i for i, v in enumerate(bd.alpha_verts)}
    comp_of_vertex = {}
    for fidx, comp in enumerate(surf.face_component):
        for v in surf.oriented_tris[fidx]:
            comp_of_vertex.setdefault(int(v), int(comp))
    pins = bd.pins
    rows, cols, vals = [], [], []
    ncol = 0
    for u in range(cx.num_vertices):
        if u in drop:
            continue
        block = D0_int[:, u].tocoo()
        rows.extend(block.row.tolist())
        cols.extend([ncol] * block.nnz)
        vals.extend(block.data.tolist())
        if u in comp_of_vertex:
            if u in pins:
                comp = comp_of_vertex[u]
                for v, c in comp_of_vertex.items():
                    if c == comp and v not in pins:
                        rows.append(alpha_col[v])
                        cols.append(ncol)
                        vals.append(-1.0)
            else:
                rows.append(alpha_col[u])
                cols.append(ncol)
                vals.append(1.0)
        ncol += 1
    ndof = n_int + nalpha + nt
    return sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ncol)).tocsr()


def _relative_cocycles(cx: SimplicialComplex3, surf: SurfaceComplex) -> list[np.ndarray]:
    """Integer basis of H^1(M, dM): closed cochains vanishing on the boundary.

    Tree gauge on the quotient graph in which the whole boundary is
    contracted to one node.
    """
    interior = np.setdiff1d(np.arange(cx.num_edges), surf.parent_edge_ids)
    sverts = set(map(int, surf.vertex_ids()))
    super_node = -1

    def q(v: int) -> int:
        return super_node if v in sverts else v

    qedges = np.array(
        [[q(int(a)), q(int(b))] for a, b in cx.edges[interior]], dtype=np.int64
    )
    # spanning forest over the quotient graph; self-loops at the supernode
    # can never be tree edges
    from collections import deque

    adj: dict[int, list[tuple[int, int]]] = {}
    for k, (a, b) in enumerate(qedges):
        if a == b:
            continue
        adj.setdefault(int(a), []).append((int(b), k))
        adj.setdefault(int(b), []).append((int(a), k))
    for v in adj:
        adj[v].sort()
    tree: set[int] = set()
    seenv: set[int] = set()
    for root in sorted(adj):
        if root in seenv:
            continue
        seenv.add(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, k in adj[u]:
                if v not in seenv:
                    seenv.add(v)
                    tree.add(k)
                    queue.append(v)
    nontree_local = np.array([k for k in range(len(interior)) if k not in tree], dtype=np.int64)
    if len(nontree_local) == 0:
        return []
    from .snf import integer_kernel_basis

    cols = interior[nontree_local]
    K = integer_kernel_basis(cx.D1.tocsc()[:, cols])
    out = []
    for vec in K:
        full = np.zeros(cx.num_edges, dtype=np.int64)
        full[cols] = vec
        out.append(full)
    return out


def _harmonic_columns(pencil: ReducedPencil) -> np.ndarray:
    """Curl-free non-gradient representatives in DOF coordinates."""
    cx = pencil.complex
    bc = pencil.bc

    if bc.kind is BCKind.CLOSED_MESH:
        cocycles = h1_cocycles_auto(cx)
        if not cocycles:
            return np.zeros((pencil.ndof, 0))
        return np.column_stack([c.astype(float) for c in cocycles])

    surf = pencil.boundary.surface
    if bc.kind is BCKind.ZERO_TRACE:
        reps = _relative_cocycles(cx, surf)
        if not reps:
            return np.zeros((pencil.ndof, 0))
        # keep only representatives with independent absolute classes; the
        # others are gradients of potentials that are constant per boundary
        # component (already in the gradient block)
        cocycles = h1_cocycles_auto(cx)
        if not cocycles:
            return np.zeros((pencil.ndof, 0))
        duals = [pairing_loop(cx.edges, cocycles, j) for j in range(len(cocycles))]
        classes = np.array([[int(r @ z.chain) for z in duals] for r in reps])
        keep: list[int] = []
        rank = 0
        for i in range(len(reps)):
            sub = classes[keep + [i]]
            r = np.linalg.matrix_rank(sub.astype(float))
            if r > rank:
                keep.append(i)
                rank = r
        cols = [pencil.full_to_dof(reps[i].astype(float)) for i in keep]
        return np.column_stack(cols) if cols else np.zeros((pencil.ndof, 0))

    # CLOSED_TRACE: combinations of absolute classes whose trace class lies
    # in the span of the chosen boundary classes
    bd = pencil.boundary
    cocycles = h1_cocycles_auto(cx)
    b1 = len(cocycles)
    if b1 == 0:
        return np.zeros((pencil.ndof, 0))
    T = bd.restriction_pairing  # (b1, boundary rank)
    chosen = set(pencil.bc.lagrangian_choice)
    non_chosen = [j for j in range(T.shape[1])] if T.size else []
    non_chosen = [j for j in non_chosen if j not in chosen]
    if non_chosen:
        Q = T[:, non_chosen]  # combos a with a @ Q = 0 are admissible
        from .snf import integer_kernel_basis

        combos = integer_kernel_basis(Q.T) if Q.size else []
        if Q.size and not combos:
            return np.zeros((pencil.ndof, 0))
        if not Q.size:
            combos = [np.eye(b1, dtype=np.int64)[i] for i in range(b1)]
    else:
        combos = [np.eye(b1, dtype=np.int64)[i] for i in range(b1)]
    cols = []
    for a in combos:
        c = sum(int(ak) * ck for ak, ck in zip(a, cocycles)).astype(float)
        cols.append(pencil.full_to_dof(c))
    return np.column_stack(cols) if cols else np.zeros((pencil.ndof, 0))


class KernelProjector:
    """M1-orthogonal projector onto the complement of the curl kernel.

    P v = v - W (W^T M1 W)^{-1} W^T M1 v with W = [gradients | harmonic].
    Idempotent and M1-self-adjoint by construction; applied at every
    iteration of the eigensolver.
    """

    def __init__(self, pencil: ReducedPencil, basis: KernelBasis):
        self.pencil = pencil
        self.basis = basis
        G = basis.gradient
        H = sp.csr_matrix(basis.harmonic)
        self.W = sp.hstack([G, H], format="csr") if H.shape[1] else G.tocsr()
        gram = (self.W.T @ pencil.M1 @ self.W).tocsc()
        self._gram_lu = spla.splu(gram)
        self._M1 = pencil.M1

    @property
    def harmonic_dimension(self) -> int:
        return self.basis.harmonic_dimension

    def apply(self, v: np.ndarray) -> np.ndarray:
        coeff = self._gram_lu.solve(self.W.T @ (self._M1 @ v))
        return v - self.W @ coeff

    def apply_dual(self, x: np.ndarray) -> np.ndarray:
        """Adjoint projector on momentum vectors: P_dual(M v) = M (P v)."""
        coeff = self._gram_lu.solve(self.W.T @ x)
        return x - self._M1 @ (self.W @ coeff)

    __call__ = apply


def kernel_projector(
    cx: SimplicialComplex3,
    fem: FemMatrices,
    bc: BoundaryCondition,
    pencil: ReducedPencil | None = None,
) -> KernelProjector:
    """Build the structural kernel deflation for the given boundary condition."""
    if pencil is None:
        pencil = reduce_system(cx, fem, bc)
    G = _gradient_columns(pencil)
    H = _harmonic_columns(pencil)
    # harmonic columns may contain gradient components; M1-orthogonalize and
    # drop anything that projects to (numerically) nothing
    if H.shape[1]:
        gram = spla.splu((G.T @ pencil.M1 @ G).tocsc())
        Hp = H - G @ gram.solve(G.T @ (pencil.M1 @ H))
        keep = []
        for j in range(Hp.shape[1]):
            nrm = np.sqrt(Hp[:, j] @ (pencil.M1 @ Hp[:, j]))
            ref = np.sqrt(H[:, j] @ (pencil.M1 @ H[:, j]))
            if nrm > 1e-8 * max(ref, 1.0):
                keep.append(j)
        H = Hp[:, keep]
    basis = KernelBasis(gradient=G, harmonic=H)
    return KernelProjector(pencil, basis)


@dataclass
class BeltramiSolution:
    """Eigenpairs of the constrained curl operator, sorted by |lambda|."""

    lambdas: np.ndarray          # (k,)
    cochains: np.ndarray         # (E, k) full edge cochains, M1-normalized
    dof_vectors: np.ndarray      # (ndof, k)
    residuals: np.ndarray        # ||S x - lambda M1 x||_{M1^{-1}}
    div_residuals: np.ndarray    # BC-admissible weak divergence norm
    helicities: np.ndarray       # 0.5 h^T S h
    energies: np.ndarray         # 0.5 h^T M1 h
    bc: BoundaryCondition
    shift: float
    pencil: ReducedPencil

    @property
    def pairs(self) -> list[tuple[float, np.ndarray]]:
        return [
            (float(l), self.cochains[:, i]) for i, l in enumerate(self.lambdas)
        ]


def default_shift(cx: SimplicialComplex3) -> float:
    """0.1 x (domain-scale estimate of the smallest nonzero |lambda|).

    The estimate is 2*pi over the largest bounding-box extent of the tet
    coordinates; shift-invert only needs the order of magnitude.
    """
    coords = cx.tet_coords.reshape(-1, 3)
    extent = float(np.max(coords.max(axis=0) - coords.min(axis=0)))
    return 0.1 * (2.0 * np.pi / extent)


def smallest_beltrami(
    pencil: ReducedPencil,
    projector: KernelProjector,
    k: int = 1,
    tol: float = 1e-8,
    shift: float | None = None,
    seed: int = 0,
    maxiter: int | None = None,
) -> BeltramiSolution:
    """k eigenpairs of smallest nonzero |lambda| of S x = lambda M1 x.

    Shift-inverted implicitly-restarted Lanczos on range(P): the kernel is
    removed from every operator application, so the zero eigenvalue of the
    pencil is invisible to the iteration.  Deterministic for a fixed seed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = pencil.ndof
    sigma = default_shift(pencil.complex) if shift is None else float(shift)

    A = pencil.S
    M = pencil.M1
    # A - sigma M is symmetric indefinite; symmetric-mode ordering keeps the
    # fill an order of magnitude below the default unsymmetric one
    op_lu = spla.splu(
        (A - sigma * M).tocsc(),
        permc_spec="MMD_AT_PLUS_A",
        options=dict(SymmetricMode=True, DiagPivotThresh=0.01),
    )
    # the Whitney mass matrix is uniformly well conditioned: Jacobi-CG
    # replaces a (costly) factorization for every M^{-1} application
    m_diag_inv = 1.0 / M.diagonal()
    m_pre = spla.LinearOperator(M.shape, matvec=lambda x: m_diag_inv * x)

    def m_solve(x):
        y, info = spla.cg(M, x, rtol=1e-13, atol=0.0, maxiter=500, M=m_pre)
        if info != 0:
            raise NoConvergence(f"mass solve CG failed (info={info})")
        return y

    def op_apply(v):
        # shift-inverted pencil operator restricted to range(P):
        # OP v = P (A - sigma M)^{-1} M P v; eigenvalue nu = 1/(lambda-sigma)
        return projector.apply(op_lu.solve(M @ projector.apply(v)))

    def filtered(v):
        # The mixed curl pairing has zero modes beyond gradients+harmonic
        # (curls falling in the dead space of the edge/face pairing), all
        # sharing pencil eigenvalue 0, i.e. OP eigenvalue -1/sigma.  The
        # polynomial OP^2 + OP/sigma sends that entire space to exactly 0
        # while boosting eigenvalues near sigma; with sigma well below
        # |lambda|_min, distinct lambdas cannot collide under the filter.
        u = op_apply(v)
        return op_apply(u) + u / sigma

    n_req = min(n - 2, max(2 * k + 4, 12))
    if n_req < k:
        raise NoConvergence(f"system too small for k={k} pairs")
    rng = np.random.default_rng(seed)
    v0 = projector.apply(rng.standard_normal(n))

    # euclidean-symmetric form of the filtered operator: M @ f(OP)
    A_lop = spla.LinearOperator((n, n), matvec=lambda v: M @ filtered(v))
    Minv = spla.LinearOperator((n, n), matvec=m_solve)
    ncv = min(n, max(4 * n_req, 40))
    try:
        _, vecs = spla.eigsh(
            A_lop,
            k=n_req,
            M=M,
            Minv=Minv,
            which="LM",
            v0=v0,
            ncv=ncv,
            maxiter=maxiter,
            tol=1e-12,
        )
    except spla.ArpackNoConvergence as exc:
        if getattr(exc, "eigenvectors", None) is not None and exc.eigenvectors.shape[1] >= k:
            vecs = exc.eigenvectors
        else:
            raise NoConvergence(f"ARPACK did not converge: {exc}") from exc

    rayleigh = np.array([v @ (A @ v) / (v @ (M @ v)) for v in vecs.T])
    order = np.argsort(np.abs(rayleigh))
    vecs = vecs[:, order]

    lams, xs, res, divs = [], [], [], []
    for i in range(vecs.shape[1]):
        x = projector.apply(vecs[:, i])
        nrm = np.sqrt(x @ (M @ x))
        if nrm < 1e-12:
            continue
        x = x / nrm
        # sign convention: largest-magnitude component positive
        jmax = int(np.argmax(np.abs(x)))
        if x[jmax] < 0:
            x = -x
        lam = float(x @ (A @ x))  # Rayleigh quotient; M-norm is 1
        r = A @ x - lam * (M @ x)
        rnorm = float(np.sqrt(r @ m_solve(r)))
        G = projector.basis.gradient
        div = float(np.linalg.norm(G.T @ (M @ x))) if G.shape[1] else 0.0
        lams.append(lam)
        xs.append(x)
        res.append(rnorm)
        divs.append(div)
        if len(lams) == k:
            break

    if len(lams) < k:
        raise NoConvergence(
            f"only {len(lams)} usable pairs of {k} requested",
            best_residual=min(res) if res else None,
        )
    worst = max(res)
    if worst > tol:
        raise NoConvergence(
            f"eigen residual {worst:.3e} above tol {tol:.1e}", best_residual=worst
        )

    X = np.column_stack(xs)
    H = pencil.C @ X
    Sfull = pencil.fem.S
    M1full = pencil.fem.M1
    hel = 0.5 * np.einsum("ek,ek->k", H, Sfull @ H)
    ene = 0.5 * np.einsum("ek,ek->k", H, M1full @ H)
    return BeltramiSolution(
        lambdas=np.array(lams),
        cochains=H,
        dof_vectors=X,
        residuals=np.array(res),
        div_residuals=np.array(divs),
        helicities=hel,
        energies=ene,
        bc=pencil.bc,
        shift=sigma,
        pencil=pencil,
    )


def cluster_align(
    solution: BeltramiSolution, target, rtol: float = 1e-6
) -> np.ndarray:
    """Combination of the leading (numerically degenerate) eigencluster that
    best matches a target edge cochain, M1-normalized.

    Any combination of eigenvectors sharing an eigenvalue is itself an
    eigenvector; this picks a well-conditioned representative (e.g. one with
    uniform magnitude) out of a cluster whose individual Ritz vectors are an
    arbitrary rotation of the eigenspace.
    """
    target = np.asarray(target, dtype=float)
    lam0 = solution.lambdas[0]
    members = [
        i
        for i, lam in enumerate(solution.lambdas)
        if abs(lam - lam0) <= rtol * max(abs(lam0), 1.0)
    ]
    B = solution.cochains[:, members]
    M1 = solution.pencil.fem.M1
    coeff = np.linalg.lstsq(B.T @ (M1 @ B), B.T @ (M1 @ target), rcond=None)[0]
    h = B @ coeff
    nrm = np.sqrt(h @ (M1 @ h))
    if nrm == 0:
        raise ValueError("target has no component in the leading cluster")
    return h / nrm


@dataclass
class PairDiagnostics:
    lam: float
    eigen_residual: float
    proxy_curl_residual: float   # ||curlH - lam H||_{L2 proxy} / ||H||_{L2 proxy}
    div_residual: float
    div_full: float              # ||D0^T M1 h||_2 on the full edge space
    helicity: float
    energy: float
    helicity_over_energy: float


def residual_report(solution: BeltramiSolution, fem: FemMatrices) -> list[PairDiagnostics]:
    """Per-pair strong-form and constraint diagnostics."""
    cx = solution.pencil.complex
    from .fem import tet_geometry

    _, vols, _ = tet_geometry(cx)
    out = []
    for i, lam in enumerate(solution.lambdas):
        h = solution.cochains[:, i]
        H, curlH = field_proxies(cx, h)
        num = np.sqrt(np.sum(np.sum((curlH - lam * H) ** 2, axis=1) * vols))
        den = np.sqrt(np.sum(np.sum(H**2, axis=1) * vols))
        div_full = float(np.linalg.norm(cx.D0.T @ (fem.M1 @ h)))
        out.append(
            PairDiagnostics(
                lam=float(lam),
                eigen_residual=float(solution.residuals[i]),
                proxy_curl_residual=float(num / den) if den else 0.0,
                div_residual=float(solution.div_residuals[i]),
                div_full=div_full,
                helicity=float(solution.helicities[i]),
                energy=float(solution.energies[i]),
                helicity_over_energy=float(solution.helicities[i] / solution.energies[i]),
            )
        )
    return out
