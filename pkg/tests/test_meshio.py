import struct

import numpy as np
import pytest

from polyeq.errors import MeshFormatError
from polyeq.meshio import TriangleMesh, load_mesh, read_obj, read_ply, write_obj, write_ply

TETRA_OBJ = """# tetrahedron
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
f 1 3 2
f 1 2 4
f 1 4 3
f 2 3 4
"""


def test_obj_tetrahedron(tmp_path):
    p = tmp_path / "t.obj"
    p.write_text(TETRA_OBJ)
    m = load_mesh(p)
    assert m.vertices.shape == (4, 3) and m.faces.shape == (4, 3)
    assert m.faces.min() == 0


def test_obj_quad_fan_slashes_and_negative_indices(tmp_path):
    p = tmp_path / "q.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1 4//1\nf -4 -3 -1\n")
    m = read_obj(p)
    assert m.faces.tolist() == [[0, 1, 2], [0, 2, 3], [0, 1, 3]]


@pytest.mark.parametrize("text,needle", [
    ("v 0 0\n", ":1: vertex record"),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n", ":4: bad face index"),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n", ":4: face index 9 out of range"),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", "1-based"),
    ("v 0 0 0\nv 1 0 0\nf 1 2\n", "fewer than 3"),
    ("# empty\n", "no vertices"),
])
def test_obj_diagnostics(tmp_path, text, needle):
    p = tmp_path / "bad.obj"
    p.write_text(text)
    with pytest.raises(MeshFormatError, match=needle):
        read_obj(p)


def test_zero_area_face_rejected(tmp_path):
    p = tmp_path / "z.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n")
    with pytest.raises(MeshFormatError, match="zero-area"):
        load_mesh(p)


def test_missing_and_unknown_format(tmp_path):
    with pytest.raises(MeshFormatError, match="no such file"):
        load_mesh(tmp_path / "nope.obj")
    q = tmp_path / "m.stl"
    q.write_text("solid")
    with pytest.raises(MeshFormatError, match="unknown mesh format"):
        load_mesh(q)


def _random_mesh(seed=0):
    from polyeq.discretize import hull_of_samples
    x = np.random.default_rng(seed).normal(size=(200, 3))
    h = hull_of_samples(x)
    return h.vertices, h.faces


@pytest.mark.parametrize("binary", [False, True])
def test_ply_round_trip(tmp_path, binary):
    v, f = _random_mesh()
    p = tmp_path / "m.ply"
    write_ply(p, v, f, binary=binary)
    m = load_mesh(p)
    assert np.array_equal(m.vertices, v) and np.array_equal(m.faces, f)


def test_obj_round_trip_with_markers(tmp_path):
    v, f = _random_mesh(1)
    p = tmp_path / "m.obj"
    write_obj(p, v, f, comment="two\nlines", points=[[9, 9, 9]])
    m = read_obj(p)
    assert np.array_equal(m.vertices[:-1], v) and np.array_equal(m.faces, f)
    assert m.vertices[-1].tolist() == [9, 9, 9]
    assert p.read_text().startswith("# two\n# lines\n")


def test_ply_big_endian_float_and_extra_properties(tmp_path):
    header = ("ply\nformat binary_big_endian 1.0\ncomment x\nelement vertex 3\nproperty float x\n"
              "property float y\nproperty float z\nproperty uchar red\nelement face 1\n"
              "property list uchar int vertex_indices\nproperty int flags\nend_header\n")
    body = b"".join(struct.pack(">fffB", *v, 7) for v in [(0, 0, 0), (1, 0, 0), (0, 1, 0)])
    body += struct.pack(">Biiii", 3, 0, 1, 2, 42)
    p = tmp_path / "be.ply"
    p.write_bytes(header.encode() + body)
    m = read_ply(p)
    assert m.vertices.tolist() == [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    assert m.faces.tolist() == [[0, 1, 2]]


def test_ply_ascii_polygon_fan(tmp_path):
    p = tmp_path / "a.ply"
    p.write_text("ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\n"
                 "property double z\nelement face 1\nproperty list uchar int vertex_index\nend_header\n"
                 "0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
    assert read_ply(p).faces.tolist() == [[0, 1, 2], [0, 2, 3]]


@pytest.mark.parametrize("content,needle", [
    (b"solid x\n", "not a PLY"),
    (b"ply\nformat binary_middle_endian 1.0\nend_header\n", "unsupported PLY format"),
    (b"ply\nformat ascii 1.0\nelement vertex 1\nproperty quad x\nend_header\n", "unknown PLY type"),
    (b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
     b"end_header\n0 0 0\n1 1\n", "unexpected end"),
    (b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
     b"property float z\nend_header\n" + b"\0" * 12, "truncated binary data"),
    (b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
     b"property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
     + b"\0" * 36 + b"\x03\x00\x00", "truncated binary data at byte"),
    (b"ply\nformat ascii 1.0\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n",
     "no vertex element"),
    (b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
     b"element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n",
     "out of range"),
])
def test_ply_diagnostics(tmp_path, content, needle):
    p = tmp_path / "bad.ply"
    p.write_bytes(content)
    with pytest.raises(MeshFormatError, match=needle):
        read_ply(p)


def test_trianglemesh_validates_indices():
    with pytest.raises(MeshFormatError):
        TriangleMesh(np.zeros((3, 3)), [[0, 1, 3]])
