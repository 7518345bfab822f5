"""Triangle-soup geometry: STL (binary/ASCII) and OBJ parsing, STL writing.

Meshes are stored as dense vertex arrays. STL is a float32 format; parsed
binary values survive a write round-trip bit-exactly because float32 embeds
losslessly in the float64 working arrays.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

STL_HEADER_BYTES = 80
STL_RECORD_BYTES = 50  # 12 float32 + uint16 attribute


class MeshError(ValueError):
    """Parse or validation failure, with a byte/line position where known."""


class SourceFormat(Enum):
    STL_BINARY = "stl_binary"
    STL_ASCII = "stl_ascii"
    OBJ = "obj"


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Triangle:
    v0: Vec3
    v1: Vec3
    v2: Vec3
    normal: Vec3

    @property
    def degenerate(self) -> bool:
        return _winding_normal(np.array([self.v0, self.v1, self.v2]))[1] == 0.0


@dataclass
class TriangleMesh:
    """Ordered triangle soup.

    vertices: (n, 3, 3) float64, [triangle, corner, xyz]
    normals:  (n, 3) float64, stored normal or (when the stored one is zero)
              the unit winding-order normal; zero for degenerate facets
    """

    vertices: np.ndarray
    normals: np.ndarray
    source_format: SourceFormat
    degenerate: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3, 3)
        if len(self.vertices) == 0:
            raise MeshError("mesh has zero triangles")
        if not np.isfinite(self.vertices).all():
            bad = int(np.argwhere(~np.isfinite(self.vertices).all(axis=(1, 2)))[0, 0])
            raise MeshError(f"non-finite vertex in facet {bad}")
        normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        if normals.shape[0] != self.vertices.shape[0]:
            raise MeshError("normal count does not match triangle count")
        self.normals = _fill_normals(self.vertices, normals)
        areas = _double_areas(self.vertices)
        self.degenerate = areas == 0.0

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def triangles(self) -> list[Triangle]:
        return [
            Triangle(Vec3(*v[0]), Vec3(*v[1]), Vec3(*v[2]), Vec3(*n))
            for v, n in zip(self.vertices, self.normals)
        ]

    def winding_normals(self) -> np.ndarray:
        """Unit normals recomputed from vertex winding; zero for degenerates.

        Exporters disagree on stored-normal conventions, so downstream
        geometry always uses these.
        """
        e1 = self.vertices[:, 1] - self.vertices[:, 0]
        e2 = self.vertices[:, 2] - self.vertices[:, 0]
        cross = np.cross(e1, e2)
        norms = np.linalg.norm(cross, axis=1)
        out = np.zeros_like(cross)
        ok = norms > 0.0
        out[ok] = cross[ok] / norms[ok, None]
        return out


def _double_areas(vertices: np.ndarray) -> np.ndarray:
    e1 = vertices[:, 1] - vertices[:, 0]
    e2 = vertices[:, 2] - vertices[:, 0]
    return np.linalg.norm(np.cross(e1, e2), axis=1)


def _winding_normal(verts: np.ndarray) -> tuple[np.ndarray, float]:
    cross = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    norm = float(np.linalg.norm(cross))
    if norm == 0.0:
        return np.zeros(3), 0.0
    return cross / norm, norm


def _fill_normals(vertices: np.ndarray, stored: np.ndarray) -> np.ndarray:
    """Keep nonzero stored normals, recompute the zero ones from winding."""
    normals = np.array(stored, dtype=np.float64)
    zero = (normals == 0.0).all(axis=1)
    if zero.any():
        e1 = vertices[zero, 1] - vertices[zero, 0]
        e2 = vertices[zero, 2] - vertices[zero, 0]
        cross = np.cross(e1, e2)
        norms = np.linalg.norm(cross, axis=1)
        ok = norms > 0.0
        cross[ok] /= norms[ok, None]
        cross[~ok] = 0.0
        normals[zero] = cross
    return normals


# --- STL ---------------------------------------------------------------

_ASCII_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?(?:nan|inf(?:inity)?)"


def parse_stl(data: bytes) -> TriangleMesh:
    """Parse STL bytes, auto-detecting ASCII vs binary.

    A file starting with "solid" is tried as ASCII first and falls back to
    binary on grammar failure; real-world binary exports sometimes begin
    with "solid".
    """
    if not data:
        raise MeshError("empty input")
    if data.lstrip()[:5] == b"solid":
        try:
            return _parse_stl_ascii(data)
        except MeshError as ascii_err:
            if len(data) >= STL_HEADER_BYTES + 4:
                try:
                    return _parse_stl_binary(data)
                except MeshError:
                    raise ascii_err from None
            raise
    return _parse_stl_binary(data)


def _parse_stl_binary(data: bytes) -> TriangleMesh:
    if len(data) < STL_HEADER_BYTES + 4:
        raise MeshError(f"binary STL truncated at byte {len(data)}: no triangle count")
    (count,) = struct.unpack_from("<I", data, STL_HEADER_BYTES)
    if count == 0:
        raise MeshError("binary STL declares zero triangles")
    expected = STL_HEADER_BYTES + 4 + count * STL_RECORD_BYTES
    if len(data) < expected:
        raise MeshError(
            f"binary STL truncated at byte {len(data)}: "
            f"{count} triangles need {expected} bytes"
        )
    if len(data) > expected:
        raise MeshError(
            f"triangle count mismatch: {len(data) - expected} trailing bytes "
            f"after {count} declared triangles"
        )
    records = np.frombuffer(
        data, dtype=np.dtype("<12f4, <u2"), count=count, offset=STL_HEADER_BYTES + 4
    )
    floats = records["f0"].astype(np.float64).reshape(count, 4, 3)
    stored_normals = floats[:, 0]
    vertices = floats[:, 1:4]
    if not np.isfinite(vertices).all():
        bad = int(np.argwhere(~np.isfinite(vertices).all(axis=(1, 2)))[0, 0])
        offset = STL_HEADER_BYTES + 4 + bad * STL_RECORD_BYTES
        raise MeshError(f"non-finite vertex in facet {bad} at byte {offset}")
    if not np.isfinite(stored_normals).all():
        stored_normals = np.where(
            np.isfinite(stored_normals).all(axis=1, keepdims=True), stored_normals, 0.0
        )
    return TriangleMesh(vertices, stored_normals, SourceFormat.STL_BINARY)


def _parse_stl_ascii(data: bytes) -> TriangleMesh:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MeshError(f"ASCII STL contains non-ASCII byte at {exc.start}") from None
    lines = text.splitlines()
    pos = 0

    def next_line() -> tuple[int, list[str]]:
        nonlocal pos
        while pos < len(lines):
            tokens = lines[pos].split()
            pos += 1
            if tokens:
                return pos, tokens
        raise MeshError(f"ASCII STL ended unexpectedly at line {len(lines)}")

    def parse_floats(tokens: list[str], lineno: int, what: str) -> list[float]:
        vals = []
        for tok in tokens:
            if not re.fullmatch(_ASCII_FLOAT, tok):
                raise MeshError(f"line {lineno}: bad {what} value {tok!r}")
            vals.append(float(tok))
        return vals

    lineno, tokens = next_line()
    if tokens[0] != "solid":
        raise MeshError(f"line {lineno}: expected 'solid', got {tokens[0]!r}")

    vertices, normals = [], []
    while True:
        lineno, tokens = next_line()
        if tokens[0] == "endsolid":
            break
        if tokens[0] != "facet" or len(tokens) < 5 or tokens[1] != "normal":
            raise MeshError(f"line {lineno}: expected 'facet normal nx ny nz'")
        normal = parse_floats(tokens[2:5], lineno, "normal")
        lineno, tokens = next_line()
        if tokens != ["outer", "loop"]:
            raise MeshError(f"line {lineno}: expected 'outer loop'")
        tri = []
        for _ in range(3):
            lineno, tokens = next_line()
            if tokens[0] != "vertex" or len(tokens) != 4:
                raise MeshError(f"line {lineno}: expected 'vertex x y z'")
            vert = parse_floats(tokens[1:4], lineno, "vertex")
            if not all(math.isfinite(v) for v in vert):
                raise MeshError(f"line {lineno}: non-finite vertex")
            tri.append(vert)
        lineno, tokens = next_line()
        if tokens != ["endloop"]:
            raise MeshError(f"line {lineno}: expected 'endloop'")
        lineno, tokens = next_line()
        if tokens != ["endfacet"]:
            raise MeshError(f"line {lineno}: expected 'endfacet'")
        vertices.append(tri)
        normals.append(normal if all(math.isfinite(v) for v in normal) else [0.0] * 3)

    if not vertices:
        raise MeshError("ASCII STL contains zero facets")
    vertices = np.array(vertices, dtype=np.float64)
    return TriangleMesh(vertices, np.array(normals), SourceFormat.STL_ASCII)


def write_stl(mesh: TriangleMesh, flavor: str = "binary") -> bytes:
    """Serialize to STL. Binary flavor round-trips facet records bit-exactly."""
    if flavor == "binary":
        out = bytearray(STL_HEADER_BYTES + 4 + STL_RECORD_BYTES * len(mesh))
        out[:STL_HEADER_BYTES] = b"voxscore binary stl".ljust(STL_HEADER_BYTES, b"\0")
        struct.pack_into("<I", out, STL_HEADER_BYTES, len(mesh))
        record = struct.Struct("<12fH")
        offset = STL_HEADER_BYTES + 4
        for verts, normal in zip(mesh.vertices, mesh.normals):
            record.pack_into(out, offset, *normal, *verts.ravel(), 0)
            offset += STL_RECORD_BYTES
        return bytes(out)
    if flavor == "ascii":
        chunks = ["solid voxscore\n"]
        f32 = lambda arr: np.asarray(arr, dtype=np.float32)
        for verts, normal in zip(mesh.vertices, mesh.normals):
            n = f32(normal)
            chunks.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
            chunks.append("    outer loop\n")
            for v in f32(verts):
                chunks.append(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
            chunks.append("    endloop\n  endfacet\n")
        chunks.append("endsolid voxscore\n")
        return "".join(chunks).encode("ascii")
    raise ValueError(f"unknown STL flavor {flavor!r}")


# --- OBJ ---------------------------------------------------------------


def parse_obj(text: str | bytes) -> TriangleMesh:
    """Parse wavefront OBJ text: v and f statements, fan triangulation.

    Polygonal faces are fan-triangulated from the first vertex; negative
    indices resolve against the vertex count at the point of use;
    texture/normal sub-indices in f tokens are ignored.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    if not text.strip():
        raise MeshError("empty input")
    verts: list[list[float]] = []
    tris: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        if tokens[0] == "v":
            if len(tokens) < 4:
                raise MeshError(f"line {lineno}: vertex needs 3 coordinates")
            try:
                xyz = [float(t) for t in tokens[1:4]]
            except ValueError:
                raise MeshError(f"line {lineno}: bad vertex coordinate") from None
            if not all(math.isfinite(v) for v in xyz):
                raise MeshError(f"line {lineno}: non-finite vertex")
            verts.append(xyz)
        elif tokens[0] == "f":
            if len(tokens) < 4:
                raise MeshError(f"line {lineno}: face with < 3 vertices")
            idx = []
            for tok in tokens[1:]:
                head = tok.split("/", 1)[0]
                try:
                    ref = int(head)
                except ValueError:
                    raise MeshError(f"line {lineno}: bad face index {tok!r}") from None
                if ref < 0:
                    ref = len(verts) + ref
                else:
                    ref = ref - 1
                if not 0 <= ref < len(verts):
                    raise MeshError(f"line {lineno}: index {head} out of range")
                idx.append(ref)
            for a, b in zip(idx[1:], idx[2:]):
                tris.append((idx[0], a, b))
    if not tris:
        raise MeshError("OBJ contains no faces")
    varr = np.array(verts, dtype=np.float64)
    vertices = varr[np.array(tris, dtype=np.intp)]
    return TriangleMesh(vertices, np.zeros((len(tris), 3)), SourceFormat.OBJ)


def bounding_box(mesh: TriangleMesh) -> tuple[Vec3, Vec3]:
    """Componentwise min/max over every vertex, degenerate facets included."""
    lo = mesh.vertices.min(axis=(0, 1))
    hi = mesh.vertices.max(axis=(0, 1))
    return Vec3(*lo), Vec3(*hi)
