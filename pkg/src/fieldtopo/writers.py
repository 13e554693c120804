"""Legacy VTK (ASCII 3.0) and reproducible JSON emission.

Floats are printed with 17 significant digits everywhere so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .cuts import CutSurface
from .mesh import SimplicialComplex3


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def dumps_json(obj, indent: int = 0) -> str:
    """JSON with fixed float formatting and insertion-ordered keys."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  "{k}": {dumps_json(v, indent + 1)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        flat = all(isinstance(v, (bool, int, float, np.integer, np.floating)) for v in seq)
        if flat and len(seq) <= 16:
            return "[" + ", ".join(dumps_json(v) for v in seq) + "]"
        items = [f"{pad}  {dumps_json(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if obj is None:
        return "null"
    s = str(obj).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{s}"'


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))
        fh.write("\n")


def write_mesh_vtk(
    path,
    cx: SimplicialComplex3,
    cell_scalars: dict[str, np.ndarray] | None = None,
    cell_vectors: dict[str, np.ndarray] | None = None,
    title: str = "fieldtopo mesh",
):
    """UNSTRUCTURED_GRID with per-tet data.

    Points are written per tet (4T points), so periodic meshes keep honest
    tet shapes instead of cells stretched across the fundamental domain.
    """
    T = cx.num_tets
    pts = cx.tet_coords.reshape(-1, 3)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(pts)} double\n")
        for p in pts:
            fh.write(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
        fh.write(f"CELLS {T} {5 * T}\n")
        for t in range(T):
            b = 4 * t
            fh.write(f"4 {b} {b + 1} {b + 2} {b + 3}\n")
        fh.write(f"CELL_TYPES {T}\n")
        for _ in range(T):
            fh.write("10\n")
        if cell_scalars or cell_vectors:
            fh.write(f"CELL_DATA {T}\n")
            for name, data in (cell_scalars or {}).items():
                fh.write(f"SCALARS {name} double 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for v in data:
                    fh.write(_fmt(v) + "\n")
            for name, data in (cell_vectors or {}).items():
                fh.write(f"VECTORS {name} double\n")
                for v in data:
                    fh.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")


def write_cut_vtk(path, cut: CutSurface, title: str = "fieldtopo cut"):
    """POLYDATA with the oriented triangle soup and source-tet provenance."""
    P = len(cut.points)
    K = cut.num_triangles
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\n")
        fh.write("DATASET POLYDATA\n")
        fh.write(f"POINTS {P} double\n")
        for p in cut.points:
            fh.write(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
        fh.write(f"POLYGONS {K} {4 * K}\n")
        for tri in cut.triangles:
            fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
        if K:
            fh.write(f"CELL_DATA {K}\n")
            fh.write("SCALARS source_tet int 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for t in cut.source_tet:
                fh.write(f"{int(t)}\n")
