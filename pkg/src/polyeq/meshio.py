"""Minimal OBJ and PLY (ascii / binary) triangle-mesh reading and writing."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import MeshFormatError


@dataclass
class TriangleMesh:
    vertices: NDArray
    faces: NDArray
    units: str = ""

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise MeshFormatError("face index out of range")

    def face_areas(self) -> NDArray:
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def check_faces(self, rel_tol: float = 1e-14) -> None:
        diam = float(np.ptp(self.vertices, axis=0).max()) if len(self.vertices) else 0.0
        bad = np.flatnonzero(self.face_areas() <= rel_tol * diam**2)
        if len(bad):
            raise MeshFormatError(f"degenerate (zero-area) face #{int(bad[0])}")


def _fan(poly: list[int], where: str) -> list[tuple]:
    if len(poly) < 3:
        raise MeshFormatError(f"{where}: face with fewer than 3 vertices")
    return [(poly[0], poly[k], poly[k + 1]) for k in range(1, len(poly) - 1)]


def read_obj(path) -> TriangleMesh:
    verts, faces = [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            tag = parts[0]
            where = f"{path}:{lineno}"
            if tag == "v":
                if len(parts) < 4:
                    raise MeshFormatError(f"{where}: vertex record needs 3 coordinates")
                try:
                    verts.append([float(x) for x in parts[1:4]])
                except ValueError as exc:
                    raise MeshFormatError(f"{where}: bad vertex coordinate") from exc
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/")[0]
                    try:
                        k = int(head)
                    except ValueError as exc:
                        raise MeshFormatError(f"{where}: bad face index {tok!r}") from exc
                    if k == 0:
                        raise MeshFormatError(f"{where}: OBJ indices are 1-based")
                    k = k - 1 if k > 0 else len(verts) + k
                    if not 0 <= k < len(verts):
                        raise MeshFormatError(f"{where}: face index {tok} out of range")
                    idx.append(k)
                faces += _fan(idx, where)
    if not verts:
        raise MeshFormatError(f"{path}: no vertices")
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3))


_PLY_TYPES = {
    "char": "b", "int8": "b", "uchar": "B", "uint8": "B", "short": "h", "int16": "h",
    "ushort": "H", "uint16": "H", "int": "i", "int32": "i", "uint": "I", "uint32": "I",
    "float": "f", "float32": "f", "double": "d", "float64": "d",
}


def read_ply(path) -> TriangleMesh:
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise MeshFormatError(f"{path}: not a PLY file (missing 'ply' magic or end_header)")
    nl = data.find(b"\n", end)
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[nl + 1:]
    fmt = None
    elements = []  # (name, count, [(prop, type) or (prop, ('list', ctype, itype))])
    for lineno, line in enumerate(header, 1):
        parts = line.split()
        if not parts or parts[0] in ("ply", "comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError(f"{path}: header line {lineno}: property before element")
            if parts[1] == "list":
                elements[-1][2].append((parts[4], ("list", parts[2], parts[3])))
            else:
                elements[-1][2].append((parts[2], parts[1]))
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise MeshFormatError(f"{path}: unsupported PLY format {fmt!r}")
    for _, _, props in elements:
        for _, t in props:
            types = t[1:] if isinstance(t, tuple) else (t,)
            for tt in types:
                if tt not in _PLY_TYPES:
                    raise MeshFormatError(f"{path}: unknown PLY type {tt!r}")

    verts, faces = None, []
    if fmt == "ascii":
        tokens = body.decode("ascii", errors="replace").split()
        pos = 0

        def take():
            nonlocal pos
            if pos >= len(tokens):
                raise MeshFormatError(f"{path}: unexpected end of ascii data (token {pos})")
            pos += 1
            return tokens[pos - 1]

        for name, count, props in elements:
            rows = []
            for _ in range(count):
                rec = {}
                for pname, t in props:
                    if isinstance(t, tuple):
                        k = int(take())
                        rec[pname] = [int(take()) for _ in range(k)]
                    else:
                        rec[pname] = float(take())
                rows.append(rec)
            verts, faces = _collect(path, name, rows, verts, faces)
    else:
        endian = "<" if fmt == "binary_little_endian" else ">"
        pos = 0
        for name, count, props in elements:
            simple = all(not isinstance(t, tuple) for _, t in props)
            if simple:
                dt = np.dtype([(p, endian + _PLY_TYPES[t]) for p, t in props])
                need = dt.itemsize * count
                if pos + need > len(body):
                    raise MeshFormatError(f"{path}: truncated binary data in element {name!r} (byte {pos})")
                arr = np.frombuffer(body, dtype=dt, count=count, offset=pos)
                pos += need
                rows = arr
            else:
                rows = []
                for r in range(count):
                    rec = {}
                    for pname, t in props:
                        try:
                            if isinstance(t, tuple):
                                cfmt, ifmt = _PLY_TYPES[t[1]], _PLY_TYPES[t[2]]
                                (k,) = struct.unpack_from(endian + cfmt, body, pos)
                                pos += struct.calcsize(cfmt)
                                rec[pname] = list(struct.unpack_from(endian + ifmt * k, body, pos))
                                pos += struct.calcsize(ifmt) * k
                            else:
                                f = _PLY_TYPES[t]
                                (rec[pname],) = struct.unpack_from(endian + f, body, pos)
                                pos += struct.calcsize(f)
                        except struct.error as exc:
                            raise MeshFormatError(f"{path}: truncated binary data at byte {pos} "
                                                  f"(element {name!r} #{r})") from exc
                    rows.append(rec)
            verts, faces = _collect(path, name, rows, verts, faces)
    if verts is None:
        raise MeshFormatError(f"{path}: no vertex element")
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces) and (faces.min() < 0 or faces.max() >= len(verts)):
        raise MeshFormatError(f"{path}: face index out of range")
    return TriangleMesh(verts, faces)


def _collect(path, name, rows, verts, faces):
    if name == "vertex":
        try:
            if isinstance(rows, np.ndarray):
                verts = np.column_stack([rows["x"], rows["y"], rows["z"]]).astype(float)
            else:
                verts = np.array([[r["x"], r["y"], r["z"]] for r in rows], dtype=float).reshape(-1, 3)
        except (KeyError, ValueError) as exc:
            raise MeshFormatError(f"{path}: vertex element lacks x/y/z") from exc
    elif name == "face":
        key = None
        sample = rows[0] if len(rows) else {}
        for k in ("vertex_indices", "vertex_index"):
            if k in sample:
                key = k
        if key is None and len(rows):
            raise MeshFormatError(f"{path}: face element lacks vertex_indices")
        for n, r in enumerate(rows):
            faces += _fan([int(x) for x in r[key]], f"{path}: face #{n}")
    return verts, faces


def load_mesh(path, format: Optional[str] = None) -> TriangleMesh:
    """Read an OBJ or PLY file (format from ``format`` or the file suffix)."""
    p = Path(path)
    if not p.is_file():
        raise MeshFormatError(f"{path}: no such file")
    fmt = (format or p.suffix.lstrip(".")).lower()
    if fmt == "obj":
        mesh = read_obj(p)
    elif fmt == "ply":
        mesh = read_ply(p)
    else:
        raise MeshFormatError(f"{path}: unknown mesh format {fmt!r} (expected obj or ply)")
    mesh.check_faces()
    return mesh


def write_obj(path, vertices, faces, comment: str = "", points=None) -> None:
    """Write an OBJ file; ``faces`` may be polygons of any size.  ``points``
    (k x 3) are appended as extra vertices (marker overlays)."""
    lines = [f"# {c}" for c in comment.splitlines()] if comment else []
    for x, y, z in np.asarray(vertices, dtype=float):
        lines.append(f"v {x:.17g} {y:.17g} {z:.17g}")
    for f in faces:
        lines.append("f " + " ".join(str(int(k) + 1) for k in f))
    if points is not None:
        for x, y, z in np.asarray(points, dtype=float).reshape(-1, 3):
            lines.append(f"v {x:.17g} {y:.17g} {z:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_ply(path, vertices, faces, binary: bool = False) -> None:
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    fmt = "binary_little_endian" if binary else "ascii"
    header = (f"ply\nformat {fmt} 1.0\nelement vertex {len(v)}\nproperty double x\nproperty double y\n"
              f"property double z\nelement face {len(f)}\nproperty list uchar int vertex_indices\nend_header\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(v.astype("<f8").tobytes())
            rec = np.zeros(len(f), dtype=[("n", "u1"), ("i", "<i4", (3,))])
            rec["n"] = 3
            rec["i"] = f
            fh.write(rec.tobytes())
        else:
            body = [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in v]
            body += [f"3 {a} {b} {c}" for a, b, c in f]
            fh.write(("\n".join(body) + "\n").encode("ascii"))


def write_patch_obj(path, patch, sidecar: bool = True) -> None:
    """Export a grid patch as OBJ with a JSON metadata sidecar."""
    write_obj(path, patch.vertices.reshape(-1, 3), patch.triangles())
    if sidecar:
        Path(str(path) + ".json").write_text(json.dumps(patch.metadata(), indent=2, sort_keys=True))
