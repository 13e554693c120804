"""Helicity, twist density, contact/confoliation classification, force checks.

All pointwise quantities come from the barycenter proxies: B = H (unit
permeability), J = curl H, twist density m = H . curl H per tet.  Pointwise
the Lagrange identity |J|^2|B|^2 = |JxB|^2 + (J.B)^2 holds to round-off for
any cochain; the sign structure of m distinguishes foliations (m = 0),
contact structures (one strict sign) and confoliations (one weak sign).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import EmptySupport
from .fem import FemMatrices, field_proxies
from .mesh import SimplicialComplex3

DEFAULT_SUPPORT_EPS = 1e-3
LABEL_TOL_FACTOR = 1e-9


class TetLabel(Enum):
    CONTACT_POS = "contact+"
    CONTACT_NEG = "contact-"
    FOLIATION = "foliation"
    DEGENERATE = "degenerate"


class Verdict(Enum):
    CONTACT = "contact"
    CONFOLIATION_POS = "confoliation+"
    CONFOLIATION_NEG = "confoliation-"
    FOLIATION = "foliation"
    MIXED = "mixed"


def helicity(fem: FemMatrices, h) -> float:
    """Current helicity 0.5 int H . curl H dV = 0.5 h^T S h.

    Gauge invariant on closed meshes: adding a gradient changes nothing.
    """
    h = np.asarray(h, dtype=float)
    return float(0.5 * h @ (fem.S @ h))


def energy(fem: FemMatrices, h) -> float:
    """Field energy 0.5 int |H|^2 dV = 0.5 h^T M1 h."""
    h = np.asarray(h, dtype=float)
    return float(0.5 * h @ (fem.M1 @ h))


def twist_density(cx: SimplicialComplex3, fem: FemMatrices, h) -> np.ndarray:
    """Per-tet twist m = H . curl H from the barycenter proxies."""
    H, curlH = field_proxies(cx, h)
    return np.einsum("tc,tc->t", H, curlH)


def support_mask(
    cx: SimplicialComplex3, h, eps: float = DEFAULT_SUPPORT_EPS
) -> np.ndarray:
    """Tets where |H|^2 >= eps x mean |H|^2 (FEM fields never vanish exactly)."""
    H, _ = field_proxies(cx, h)
    mag2 = np.einsum("tc,tc->t", H, H)
    return mag2 >= eps * mag2.mean()


def twist_noise_floor(cx: SimplicialComplex3, h) -> float:
    """Round-off scale of the twist density for this field and mesh.

    m carries units field^2/length; the floor is 1e-12 x max|H|^2 divided by
    the shortest edge, far above accumulated round-off of an exact foliation
    but far below any physical twist at desk scale.
    """
    H, _ = field_proxies(cx, h)
    hmin = float(cx.edge_lengths().min(initial=1.0)) or 1.0
    mag2 = np.einsum("tc,tc->t", H, H).max(initial=0.0)
    return 1e-12 * mag2 / hmin


def classify(
    cx: SimplicialComplex3,
    m: np.ndarray,
    support: np.ndarray,
    tau_floor: float = 0.0,
) -> tuple[list[TetLabel], Verdict]:
    """Label each tet by the sign of m and reduce to a global verdict.

    Tolerance scales with max|m|, so the verdict is invariant under positive
    rescaling of the field; negating the field swaps the sign branches.
    ``tau_floor`` guards the degenerate case where the whole m array is
    floating-point noise (an exact foliation): without it the tolerance
    would compare noise against noise.
    """
    m = np.asarray(m, dtype=float)
    tau = max(LABEL_TOL_FACTOR * np.abs(m).max(initial=0.0), tau_floor)
    labels = []
    for mt, on in zip(m, support):
        if abs(mt) <= tau:
            labels.append(TetLabel.FOLIATION if on else TetLabel.DEGENERATE)
        elif mt > 0:
            labels.append(TetLabel.CONTACT_POS)
        else:
            labels.append(TetLabel.CONTACT_NEG)

    on_labels = {lab for lab, on in zip(labels, support) if on}
    if not on_labels or on_labels == {TetLabel.FOLIATION}:
        verdict = Verdict.FOLIATION
    elif on_labels == {TetLabel.CONTACT_POS} or on_labels == {TetLabel.CONTACT_NEG}:
        verdict = Verdict.CONTACT
    elif on_labels <= {TetLabel.CONTACT_POS, TetLabel.FOLIATION}:
        verdict = Verdict.CONFOLIATION_POS
    elif on_labels <= {TetLabel.CONTACT_NEG, TetLabel.FOLIATION}:
        verdict = Verdict.CONFOLIATION_NEG
    else:
        verdict = Verdict.MIXED
    return labels, verdict


def _tet_adjacency(cx: SimplicialComplex3) -> sp.csr_matrix:
    incidence = sp.csr_matrix(
        (
            np.ones(4 * cx.num_tets),
            (cx.tet_to_face.ravel(), np.repeat(np.arange(cx.num_tets), 4)),
        ),
        shape=(cx.num_faces, cx.num_tets),
    )
    return (incidence.T @ incidence).tocsr()


def masked_components(cx: SimplicialComplex3, mask: np.ndarray) -> list[np.ndarray]:
    """Connected components (face adjacency) of a tet subset."""
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return []
    adj = _tet_adjacency(cx)[idx][:, idx]
    n, labels = sp.csgraph.connected_components(adj, directed=False)
    return [idx[labels == c] for c in range(n)]


def near_forcefree_check(
    cx: SimplicialComplex3,
    fem: FemMatrices,
    h,
    eps_support: float = DEFAULT_SUPPORT_EPS,
) -> list[bool]:
    """Strict inequality |J|^2|B|^2 > |JxB|^2 on the joint support of B and J.

    Evaluated tetwise on every face-connected component of
    Supp(B) & Supp(J); a component passes only if all of its tets pass.
    The squared cross term keeps the comparison dimensionally consistent
    with the pointwise Lagrange identity.
    """
    H, curlH = field_proxies(cx, h)
    B2 = np.einsum("tc,tc->t", H, H)
    J2 = np.einsum("tc,tc->t", curlH, curlH)
    maskB = B2 >= eps_support * B2.mean() if B2.any() else np.zeros(len(B2), bool)
    maskJ = J2 >= eps_support * J2.mean() if J2.any() else np.zeros(len(J2), bool)
    V = maskB & maskJ
    comps = masked_components(cx, V)
    if not comps:
        raise EmptySupport("joint support of B and J is empty")
    cross2 = np.einsum("tc,tc->t", np.cross(curlH, H), np.cross(curlH, H))
    out = []
    for comp in comps:
        ok = bool(np.all(J2[comp] * B2[comp] > cross2[comp]))
        out.append(ok)
    return out


def identity_check(cx: SimplicialComplex3, fem: FemMatrices, h) -> float:
    """Max relative violation of |J|^2|B|^2 = |JxB|^2 + (J.B)^2 over tets.

    An exact algebraic identity of the proxy 3-vectors; the return value is
    floating-point noise (<= 1e-12) for any cochain.
    """
    H, curlH = field_proxies(cx, h)
    B2 = np.einsum("tc,tc->t", H, H)
    J2 = np.einsum("tc,tc->t", curlH, curlH)
    cross = np.cross(curlH, H)
    lhs = J2 * B2
    rhs = np.einsum("tc,tc->t", cross, cross) + np.einsum("tc,tc->t", curlH, H) ** 2
    scale = np.maximum(np.maximum(lhs, rhs), 1e-300)
    viol = np.abs(lhs - rhs) / scale
    viol[(lhs == 0.0) & (rhs == 0.0)] = 0.0
    return float(viol.max(initial=0.0))


@dataclass
class FieldReport:
    """Full pointwise and global diagnosis of an edge-cochain field."""

    helicity: float
    energy: float
    twist: np.ndarray                  # per-tet m
    labels: list[TetLabel]
    verdict: Verdict
    support: np.ndarray                # on-support mask used for the verdict
    near_forcefree: list[bool]         # per connected component of V
    identity_max_violation: float

    def to_dict(self) -> dict:
        counts: dict[str, int] = {}
        for lab in self.labels:
            counts[lab.value] = counts.get(lab.value, 0) + 1
        return {
            "helicity": self.helicity,
            "energy": self.energy,
            "verdict": self.verdict.value,
            "label_counts": counts,
            "support_tets": int(self.support.sum()),
            "near_forcefree": list(self.near_forcefree),
            "identity_max_violation": self.identity_max_violation,
            "twist_min": float(np.min(self.twist)) if len(self.twist) else 0.0,
            "twist_max": float(np.max(self.twist)) if len(self.twist) else 0.0,
        }


def analyze_field(
    cx: SimplicialComplex3,
    fem: FemMatrices,
    h,
    eps_support: float = DEFAULT_SUPPORT_EPS,
) -> FieldReport:
    """Assemble the complete FieldReport for one edge cochain."""
    h = np.asarray(h, dtype=float)
    m = twist_density(cx, fem, h)
    support = support_mask(cx, h, eps_support)
    labels, verdict = classify(cx, m, support, tau_floor=twist_noise_floor(cx, h))
    try:
        nff = near_forcefree_check(cx, fem, h, eps_support)
    except EmptySupport:
        nff = []
    return FieldReport(
        helicity=helicity(fem, h),
        energy=energy(fem, h),
        twist=m,
        labels=labels,
        verdict=verdict,
        support=support,
        near_forcefree=nff,
        identity_max_violation=identity_check(cx, fem, h),
    )
