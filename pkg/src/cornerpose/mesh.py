"""Triangle meshes: OBJ/PLY loading, diameter, sharp edges, corner frames.

OBJ support covers vertex and face statements with 1-based or negative
indices; polygon faces are fan-triangulated; other statements are ignored.
PLY support covers ascii and binary_little_endian files with x/y/z vertex
properties and integer-list face properties; unknown scalar properties are
skipped, anything else is a ParseError.
"""

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParseError",
    "FaceIndexError",
    "TooFewVerticesError",
    "Mesh",
    "CornerFrame",
    "parse_obj",
    "parse_ply",
    "weld_vertices",
    "compute_diameter",
    "sharp_edges",
    "extract_corners",
    "frames_to_dicts",
    "frames_from_dicts",
]

WELD_TOL = 1e-7
DEFAULT_SHARP_ANGLE_TOL = 0.35
DEFAULT_ORTHO_TOL = 0.17
_FRAME_UNIT_TOL = 1e-6


class ParseError(ValueError):
    """Malformed mesh file.  Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FaceIndexError(ParseError):
    """Face references a vertex that does not exist."""


class TooFewVerticesError(ValueError):
    """Operation needs more vertices than the mesh has."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Indexed triangle mesh.

    ``vertices`` is (N, 3) float, ``triangles`` (M, 3) int with valid
    indices and no repeated index inside a triangle.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices contain non-finite values")
        if t.size:
            if t.min() < 0 or t.max() >= len(v):
                raise ValueError("triangle index out of range")
            degenerate = (
                (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
            )
            if np.any(degenerate):
                raise ValueError("degenerate triangle (repeated vertex index)")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)


@dataclass(frozen=True, eq=False)
class CornerFrame:
    """A trihedral corner: apex position plus three unit edge directions.

    ``axes`` rows are unit vectors forming a right-handed triple; they are
    pairwise close to orthogonal (enforced where frames are built).
    """

    apex: np.ndarray
    axes: np.ndarray

    def __post_init__(self):
        apex = np.array(self.apex, dtype=float).reshape(3)
        axes = np.array(self.axes, dtype=float).reshape(3, 3)
        norms = np.linalg.norm(axes, axis=1)
        if np.any(np.abs(norms - 1.0) > _FRAME_UNIT_TOL):
            raise ValueError("axes must be unit length")
        if float(np.linalg.det(axes)) <= 0.0:
            raise ValueError("axes must form a right-handed triple")
        apex.setflags(write=False)
        axes.setflags(write=False)
        object.__setattr__(self, "apex", apex)
        object.__setattr__(self, "axes", axes)


def _finish_faces(vertex_rows, face_rows):
    vertices = (
        np.asarray(vertex_rows, dtype=float)
        if vertex_rows
        else np.zeros((0, 3))
    )
    triangles = []
    for face in face_rows:
        for k in range(1, len(face) - 1):
            a, b, c = face[0], face[k], face[k + 1]
            if a == b or b == c or a == c:
                continue  # degenerate fan triangle, drop it
            triangles.append((a, b, c))
    tri = np.asarray(triangles, dtype=np.int64) if triangles else np.zeros((0, 3), dtype=np.int64)
    return Mesh(vertices, tri)


def parse_obj(data) -> Mesh:
    """Parse Wavefront OBJ text (bytes or str) into a Mesh."""
    if isinstance(data, bytes):
        text = data.decode("utf-8", errors="replace")
    else:
        text = data
    vertex_rows = []
    face_rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        key = tokens[0]
        if key == "v":
            if len(tokens) < 4:
                raise ParseError("vertex needs 3 coordinates", line=lineno)
            try:
                vertex_rows.append(tuple(float(t) for t in tokens[1:4]))
            except ValueError:
                raise ParseError("bad vertex coordinate", line=lineno) from None
        elif key == "f":
            if len(tokens) < 4:
                raise ParseError("face needs at least 3 vertices", line=lineno)
            face = []
            for token in tokens[1:]:
                first = token.split("/", 1)[0]
                try:
                    idx = int(first)
                except ValueError:
                    raise ParseError(f"bad face index {token!r}", line=lineno) from None
                if idx == 0:
                    raise FaceIndexError("face index 0 is invalid", line=lineno)
                # negative indices count back from the vertices defined so far
                resolved = idx - 1 if idx > 0 else len(vertex_rows) + idx
                if resolved < 0 or resolved >= len(vertex_rows):
                    raise FaceIndexError(
                        f"face index {idx} out of range", line=lineno
                    )
                face.append(resolved)
            face_rows.append(face)
        # vn / vt / g / o / s / usemtl / mtllib / l / p: ignored
    return _finish_faces(vertex_rows, face_rows)


_PLY_SCALARS = {
    "char": "b", "int8": "b",
    "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h",
    "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i",
    "uint": "I", "uint32": "I",
    "float": "f", "float32": "f",
    "double": "d", "float64": "d",
}


def _ply_scalar(type_name, line):
    fmt = _PLY_SCALARS.get(type_name)
    if fmt is None:
        raise ParseError(f"unsupported property type {type_name!r}", line=line)
    return fmt


def parse_ply(data: bytes) -> Mesh:
    """Parse a PLY file (ascii or binary_little_endian) into a Mesh."""
    if not isinstance(data, bytes):
        data = bytes(data)
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError("not a PLY file")
    body_start = data.find(b"\n", end)
    if body_start < 0:
        raise ParseError("missing header terminator")
    body_start += 1
    header = data[:end].decode("ascii", errors="replace")

    fmt = None
    elements = []  # (name, count, [(kind, ...) per property])
    for lineno, raw in enumerate(header.splitlines(), start=1):
        tokens = raw.strip().split()
        if not tokens or tokens[0] in ("ply", "comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2:
                raise ParseError("bad format line", line=lineno)
            if tokens[1] == "ascii":
                fmt = "ascii"
            elif tokens[1] == "binary_little_endian":
                fmt = "binary"
            else:
                raise ParseError(f"unsupported format {tokens[1]!r}", line=lineno)
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError("bad element line", line=lineno)
            elements.append([tokens[1], int(tokens[2]), []])
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            if len(tokens) >= 5 and tokens[1] == "list":
                count_fmt = _ply_scalar(tokens[2], lineno)
                item_fmt = _ply_scalar(tokens[3], lineno)
                elements[-1][2].append(("list", count_fmt, item_fmt, tokens[4]))
            elif len(tokens) == 3:
                elements[-1][2].append(("scalar", _ply_scalar(tokens[1], lineno), tokens[1], tokens[2]))
            else:
                raise ParseError("bad property line", line=lineno)
    if fmt is None:
        raise ParseError("missing format line")

    vertex_rows = []
    face_rows = []

    if fmt == "ascii":
        tokens = data[body_start:].decode("ascii", errors="replace").split()
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(tokens):
                raise ParseError("unexpected end of PLY data")
            out = tokens[pos:pos + n]
            pos += n
            return out

        for name, count, props in elements:
            for _ in range(count):
                row = {}
                for prop in props:
                    if prop[0] == "list":
                        n = int(take(1)[0])
                        row[prop[3]] = [int(float(t)) for t in take(n)]
                    else:
                        row[prop[3]] = float(take(1)[0])
                _ply_collect(name, row, props, vertex_rows, face_rows)
    else:
        offset = body_start
        for name, count, props in elements:
            for _ in range(count):
                row = {}
                for prop in props:
                    if prop[0] == "list":
                        _, count_fmt, item_fmt, pname = prop
                        (n,) = struct.unpack_from("<" + count_fmt, data, offset)
                        offset += struct.calcsize(count_fmt)
                        items = struct.unpack_from("<" + item_fmt * int(n), data, offset)
                        offset += struct.calcsize(item_fmt) * int(n)
                        row[pname] = [int(v) for v in items]
                    else:
                        _, fmt_char, _, pname = prop
                        (value,) = struct.unpack_from("<" + fmt_char, data, offset)
                        offset += struct.calcsize(fmt_char)
                        row[pname] = float(value)
                _ply_collect(name, row, props, vertex_rows, face_rows)

    for face in face_rows:
        worst = max(face)
        if worst >= len(vertex_rows):
            raise FaceIndexError(f"face index {worst} out of range")
    return _finish_faces(vertex_rows, face_rows)


def _ply_collect(name, row, props, vertex_rows, face_rows):
    if name == "vertex":
        for prop in props:
            if prop[0] == "list":
                raise ParseError("list property on vertex element is unsupported")
        try:
            vertex_rows.append((row["x"], row["y"], row["z"]))
        except KeyError:
            raise ParseError("vertex element lacks x/y/z properties") from None
    elif name == "face":
        indices = row.get("vertex_indices", row.get("vertex_index"))
        if indices is None:
            raise ParseError("face element lacks a vertex index list")
        if len(indices) < 3:
            raise ParseError("face needs at least 3 vertices")
        if min(indices) < 0:
            raise FaceIndexError(f"face index {min(indices)} out of range")
        face_rows.append(list(indices))
    # other elements are parsed for their size and discarded


def weld_vertices(mesh: Mesh, tol: float = WELD_TOL) -> Mesh:
    """Merge duplicate vertices within ``tol`` (grid quantization).

    Triangles that collapse after welding are dropped.
    """
    if len(mesh.vertices) == 0:
        return mesh
    keys = np.round(mesh.vertices / tol).astype(np.int64)
    seen = {}
    remap = np.empty(len(mesh.vertices), dtype=np.int64)
    kept = []
    for i, key in enumerate(map(tuple, keys)):
        j = seen.get(key)
        if j is None:
            seen[key] = len(kept)
            remap[i] = len(kept)
            kept.append(mesh.vertices[i])
        else:
            remap[i] = j
    tri = remap[mesh.triangles]
    ok = (tri[:, 0] != tri[:, 1]) & (tri[:, 1] != tri[:, 2]) & (tri[:, 0] != tri[:, 2])
    return Mesh(np.asarray(kept), tri[ok])


def compute_diameter(mesh: Mesh) -> float:
    """Largest pairwise vertex distance.

    Exact brute force up to 5000 vertices; above that the convex hull
    prunes the candidate set first (falling back to brute force if the
    hull is degenerate).
    """
    pts = mesh.vertices
    if len(pts) < 2:
        raise TooFewVerticesError("diameter needs at least 2 vertices")
    if len(pts) > 5000:
        try:
            from scipy.spatial import ConvexHull

            pts = pts[ConvexHull(pts).vertices]
        except Exception:
            pass  # degenerate hull, brute force below
    best = 0.0
    block = 256
    for i in range(0, len(pts), block):
        d = pts[i:i + block, None, :] - pts[None, :, :]
        best = max(best, float(np.sqrt((d * d).sum(axis=2)).max()))
    return best


def _face_normals(mesh: Mesh):
    v = mesh.vertices
    t = mesh.triangles
    n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    length = np.linalg.norm(n, axis=1)
    ok = length > 1e-12
    unit = np.zeros_like(n)
    unit[ok] = n[ok] / length[ok, None]
    return unit, ok


def sharp_edges(mesh: Mesh, angle_tol: float = DEFAULT_SHARP_ANGLE_TOL):
    """Feature edges of a welded copy of ``mesh``.

    An interior edge is sharp when its two face normals differ by more
    than ``angle_tol`` radians; boundary and non-manifold edges count as
    sharp.  Returns ``(welded_mesh, edges, edge_faces)`` where ``edges``
    is (E, 2) vertex indices into the welded mesh and ``edge_faces`` the
    matching list of adjacent-face index tuples.
    """
    welded = weld_vertices(mesh)
    normals, valid = _face_normals(welded)
    adjacency = {}
    for fi, tri in enumerate(welded.triangles):
        if not valid[fi]:
            continue  # zero-area face, unusable normal
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(a), int(b)) if a < b else (int(b), int(a))
            adjacency.setdefault(key, []).append(fi)
    cos_tol = np.cos(angle_tol)
    edges = []
    edge_faces = []
    for key in sorted(adjacency):
        faces = adjacency[key]
        if len(faces) == 2:
            c = float(np.dot(normals[faces[0]], normals[faces[1]]))
            if c >= cos_tol:
                continue  # nearly coplanar neighbors
        edges.append(key)
        edge_faces.append(tuple(faces))
    edges_arr = (
        np.asarray(edges, dtype=np.int64) if edges else np.zeros((0, 2), dtype=np.int64)
    )
    return welded, edges_arr, edge_faces


def extract_corners(
    mesh: Mesh,
    sharp_angle_tol: float = DEFAULT_SHARP_ANGLE_TOL,
    ortho_tol: float = DEFAULT_ORTHO_TOL,
) -> list:
    """Find trihedral corners: vertices where exactly 3 sharp edges meet
    at pairwise near-right angles.

    ``ortho_tol`` bounds the deviation of each pairwise edge angle from
    90 degrees (radians).  Vertices with more or fewer sharp edges, or
    with a skewed edge triple, are skipped.  Axes are ordered
    lexicographically and flipped to a right-handed triple; output is
    sorted by apex coordinates.
    """
    if len(mesh.vertices) < 4:
        return []
    welded, edges, _ = sharp_edges(mesh, sharp_angle_tol)
    incident = {}
    for a, b in edges:
        incident.setdefault(int(a), []).append(int(b))
        incident.setdefault(int(b), []).append(int(a))
    max_dot = np.sin(ortho_tol)
    frames = []
    for vid, neighbors in incident.items():
        if len(neighbors) != 3:
            continue
        apex = welded.vertices[vid]
        dirs = welded.vertices[neighbors] - apex
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(norms < 1e-12):
            continue
        dirs = dirs / norms[:, None]
        dots = (
            abs(float(dirs[0] @ dirs[1])),
            abs(float(dirs[0] @ dirs[2])),
            abs(float(dirs[1] @ dirs[2])),
        )
        if max(dots) > max_dot:
            continue
        ordered = np.asarray(sorted(map(tuple, dirs)))
        if float(np.linalg.det(ordered)) < 0.0:
            ordered = ordered[[0, 2, 1]]
        frames.append(CornerFrame(apex=apex, axes=ordered))
    frames.sort(key=lambda f: tuple(f.apex))
    return frames


def frames_to_dicts(frames) -> list:
    """JSON-ready corner list: [{"apex": [3], "axes": [[3],[3],[3]]}]."""
    return [
        {
            "apex": [float(v) for v in f.apex],
            "axes": [[float(v) for v in row] for row in f.axes],
        }
        for f in frames
    ]


def frames_from_dicts(data) -> list:
    return [
        CornerFrame(
            apex=np.asarray(d["apex"], dtype=float),
            axes=np.asarray(d["axes"], dtype=float),
        )
        for d in data
    ]
