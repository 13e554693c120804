"""Whitney-form finite element matrices and pointwise vector proxies.

Lowest-order Whitney forms on tets, assembled with exact closed-form
barycentric integration (int lam_i lam_j dV = V/20, doubled on the
diagonal), so no quadrature tolerance enters the element matrices.
Edge form: w_ab = lam_a grad(lam_b) - lam_b grad(lam_a), with the constant
curl 2 grad(lam_a) x grad(lam_b).  All local contributions are mapped to the
canonical (sorted) simplex orientations through parity signs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SingularGeometry
from .mesh import EDGE_LOCAL, FACE_LOCAL, SimplicialComplex3

_FACE_TERM_SIGN = np.array([1, -1, 1])


def tet_geometry(cx: SimplicialComplex3):
    """Barycentric gradients (T,4,3), volumes (T,) and barycenters (T,3).

    Cached on the complex; uses per-tet (minimal image) coordinates.
    """
    cached = cx.meta.get("_tet_geometry")
    if cached is not None:
        return cached
    p = cx.tet_coords
    E = p[:, 1:, :] - p[:, :1, :]
    det = np.linalg.det(E)
    if np.any(det <= 0):
        raise SingularGeometry("non-positive tet Jacobian")
    try:
        G = np.linalg.inv(E)
    except np.linalg.LinAlgError as exc:
        raise SingularGeometry(str(exc)) from None
    grads = np.empty_like(p)
    grads[:, 1:, :] = np.transpose(G, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    vols = det / 6.0
    bary = p.mean(axis=1)
    cx.meta["_tet_geometry"] = (grads, vols, bary)
    return grads, vols, bary


@dataclass
class FemMatrices:
    """Assembled sparse matrices for one complex."""

    M0: sp.csr_matrix   # vertex mass
    M1: sp.csr_matrix   # edge (Whitney 1-form) mass
    M2: sp.csr_matrix   # face (Whitney 2-form) mass
    S: sp.csr_matrix    # curl pairing, S_ij = int (curl w_i) . w_j dV
    L0: sp.csr_matrix   # scalar stiffness D0^T M1 D0


def _scatter(rows, cols, vals, shape):
    return sp.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def mass_matrix(cx: SimplicialComplex3, k: int) -> sp.csr_matrix:
    """Whitney k-form mass matrix (k = 0, 1 or 2), symmetric positive definite."""
    grads, vols, _ = tet_geometry(cx)
    T = cx.num_tets
    g = np.einsum("tic,tjc->tij", grads, grads)  # (T,4,4) gradient Gram

    if k == 0:
        loc = (np.ones((4, 4)) + np.eye(4)) / 20.0 * vols[:, None, None]
        idx = cx.tets
        return _scatter(
            np.broadcast_to(idx[:, :, None], (T, 4, 4)),
            np.broadcast_to(idx[:, None, :], (T, 4, 4)),
            loc,
            (cx.num_vertices, cx.num_vertices),
        )

    if k == 1:
        a, b = EDGE_LOCAL[:, 0], EDGE_LOCAL[:, 1]
        d = np.eye(4)
        # int w_ab . w_cd = V/20 [(1+d_ac)g_bd - (1+d_ad)g_bc
        #                         - (1+d_bc)g_ad + (1+d_bd)g_ac]
        loc = (
            (1 + d[a[:, None], a[None, :]]) * g[:, b[:, None], b[None, :]]
            - (1 + d[a[:, None], b[None, :]]) * g[:, b[:, None], a[None, :]]
            - (1 + d[b[:, None], a[None, :]]) * g[:, a[:, None], b[None, :]]
            + (1 + d[b[:, None], b[None, :]]) * g[:, a[:, None], a[None, :]]
        ) * (vols[:, None, None] / 20.0)
        s = cx.tet_edge_sign
        loc = loc * s[:, :, None] * s[:, None, :]
        idx = cx.tet_to_edge
        return _scatter(
            np.broadcast_to(idx[:, :, None], (T, 6, 6)),
            np.broadcast_to(idx[:, None, :], (T, 6, 6)),
            loc,
            (cx.num_edges, cx.num_edges),
        )

    if k == 2:
        # W_abc = 2(lam_a n_bc - lam_b n_ac + lam_c n_ab), n_ij = grad_i x grad_j
        d = np.eye(4)
        N = np.empty((T, 4, 3, 3))  # per local face, per term, the cross vector
        for f in range(4):
            va, vb, vc = FACE_LOCAL[f]
            N[:, f, 0] = np.cross(grads[:, vb], grads[:, vc])
            N[:, f, 1] = np.cross(grads[:, va], grads[:, vc])
            N[:, f, 2] = np.cross(grads[:, va], grads[:, vb])
        lam_idx = FACE_LOCAL  # (4,3) the lambda index of each term
        loc = np.zeros((T, 4, 4))
        for p in range(3):
            for q in range(3):
                coeff = _FACE_TERM_SIGN[p] * _FACE_TERM_SIGN[q]
                lam = (
                    1 + d[lam_idx[:, p][:, None], lam_idx[:, q][None, :]]
                ) / 20.0
                dots = np.einsum("tic,tjc->tij", N[:, :, p], N[:, :, q])
                loc += coeff * lam[None, :, :] * dots
        loc *= 4.0 * vols[:, None, None]
        s = cx.tet_face_sign
        loc = loc * s[:, :, None] * s[:, None, :]
        idx = cx.tet_to_face
        return _scatter(
            np.broadcast_to(idx[:, :, None], (T, 4, 4)),
            np.broadcast_to(idx[:, None, :], (T, 4, 4)),
            loc,
            (cx.num_faces, cx.num_faces),
        )

    raise ValueError("k must be 0, 1 or 2")


def curl_pairing(cx: SimplicialComplex3) -> sp.csr_matrix:
    """S_ij = int (curl w_i) . w_j dV.

    S - S^T equals the discrete boundary pairing, which vanishes on closed
    meshes; S^T annihilates gradients exactly (curl of a gradient is zero).
    """
    grads, vols, _ = tet_geometry(cx)
    T = cx.num_tets
    a, b = EDGE_LOCAL[:, 0], EDGE_LOCAL[:, 1]
    n = 2.0 * np.cross(grads[:, a], grads[:, b])       # (T,6,3) curls
    w_int = (grads[:, b] - grads[:, a]) / 4.0          # (T,6,3) int w / V
    loc = np.einsum("tec,tfc->tef", n, w_int) * vols[:, None, None]
    s = cx.tet_edge_sign
    loc = loc * s[:, :, None] * s[:, None, :]
    idx = cx.tet_to_edge
    return _scatter(
        np.broadcast_to(idx[:, :, None], (T, 6, 6)),
        np.broadcast_to(idx[:, None, :], (T, 6, 6)),
        loc,
        (cx.num_edges, cx.num_edges),
    )


def laplacian0(cx: SimplicialComplex3, M1: sp.spmatrix | None = None) -> sp.csr_matrix:
    """Scalar stiffness L0 = D0^T M1 D0; kernel = constants per component."""
    if M1 is None:
        M1 = mass_matrix(cx, 1)
    D0 = cx.D0.astype(float)
    return (D0.T @ M1 @ D0).tocsr()


def build_fem(cx: SimplicialComplex3) -> FemMatrices:
    M1 = mass_matrix(cx, 1)
    return FemMatrices(
        M0=mass_matrix(cx, 0),
        M1=M1,
        M2=mass_matrix(cx, 2),
        S=curl_pairing(cx),
        L0=laplacian0(cx, M1),
    )


@dataclass
class TetProxy:
    """Pointwise vectors of an edge cochain in one tet (at the barycenter)."""

    tet: int
    H_vec: np.ndarray
    curlH_vec: np.ndarray


def field_proxies(cx: SimplicialComplex3, h) -> tuple[np.ndarray, np.ndarray]:
    """Barycenter field vector and (constant) curl vector in every tet.

    Both are linear in the cochain coefficients: H = sum h_e w_e(bc),
    curl H = sum h_e 2 grad_a x grad_b.
    """
    h = np.asarray(h, dtype=float)
    grads, _, _ = tet_geometry(cx)
    a, b = EDGE_LOCAL[:, 0], EDGE_LOCAL[:, 1]
    coeff = h[cx.tet_to_edge] * cx.tet_edge_sign  # (T,6)
    w_bc = (grads[:, b] - grads[:, a]) / 4.0
    curls = 2.0 * np.cross(grads[:, a], grads[:, b])
    H = np.einsum("te,tec->tc", coeff, w_bc)
    curlH = np.einsum("te,tec->tc", coeff, curls)
    return H, curlH


def proxy_eval(cx: SimplicialComplex3, h, tet: int) -> TetProxy:
    """Proxy vectors for a single tet."""
    H, curlH = field_proxies(cx, h)
    return TetProxy(tet=tet, H_vec=H[tet], curlH_vec=curlH[tet])


_GAUSS_5 = np.polynomial.legendre.leggauss(5)


def edge_interpolant(cx: SimplicialComplex3, func) -> np.ndarray:
    """Edge cochain of a vector field: line integral along each canonical edge.

    5-point Gauss quadrature per edge (exact for polynomial fields up to
    degree 9; near-exact for smooth benchmark fields at mesh scale).
    Periodic meshes integrate along the minimal-image segment of the first
    tet containing each edge.
    """
    xi, wi = _GAUSS_5
    p = cx.tet_coords
    vals = np.zeros(cx.num_edges)
    seen = np.zeros(cx.num_edges, dtype=bool)
    for k in range(6):
        a, b = EDGE_LOCAL[k]
        eids = cx.tet_to_edge[:, k]
        first = ~seen[eids]
        if not np.any(first):
            continue
        tsel = np.flatnonzero(first)
        # keep only the first occurrence of each edge id
        _, keep = np.unique(eids[tsel], return_index=True)
        tsel = tsel[keep]
        pa, pb = p[tsel, a], p[tsel, b]
        sgn = cx.tet_edge_sign[tsel, k]
        acc = np.zeros(len(tsel))
        for x, w in zip(xi, wi):
            pts = pa + (x + 1) / 2 * (pb - pa)
            acc += w * np.einsum("ic,ic->i", np.asarray(func(pts)), pb - pa) / 2
        vals[eids[tsel]] = sgn * acc
        seen[eids[tsel]] = True
    return vals


def face_flux_interpolant(cx: SimplicialComplex3, func) -> np.ndarray:
    """Face cochain of a vector field: flux through each canonical face.

    Centroid rule on each face (exact for affine fields), using the geometry
    of the first tet containing the face.
    """
    p = cx.tet_coords
    vals = np.zeros(cx.num_faces)
    seen = np.zeros(cx.num_faces, dtype=bool)
    for k in range(4):
        va, vb, vc = FACE_LOCAL[k]
        fids = cx.tet_to_face[:, k]
        first = ~seen[fids]
        if not np.any(first):
            continue
        tsel = np.flatnonzero(first)
        _, keep = np.unique(fids[tsel], return_index=True)
        tsel = tsel[keep]
        pa, pb, pc = p[tsel, va], p[tsel, vb], p[tsel, vc]
        # normal area vector of the local (ordered) triple, mapped to canonical
        normal = 0.5 * np.cross(pb - pa, pc - pa)
        centroid = (pa + pb + pc) / 3.0
        sgn = cx.tet_face_sign[tsel, k]
        flux = np.einsum("ic,ic->i", np.asarray(func(centroid)), normal)
        vals[fids[tsel]] = sgn * flux
        seen[fids[tsel]] = True
    return vals


def vertex_interpolant(cx: SimplicialComplex3, func) -> np.ndarray:
    """Vertex cochain: point values of a scalar function."""
    return np.asarray(func(cx.vertices))
