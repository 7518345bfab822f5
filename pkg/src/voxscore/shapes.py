"""Procedural watertight test solids and the synthetic labeling rule.

The expert-annotated dataset behind the original assessment workflow is not
available, so desk-scale training and evaluation run on procedurally
generated parts (boxes, spheres, cylinders, L-brackets, open containers,
chamfered blocks) whose scores follow a deterministic geometric rule.
"""

from __future__ import annotations

import numpy as np

from .mesh import SourceFormat, TriangleMesh
from .voxel import VoxelGrid


def _mesh(tris) -> TriangleMesh:
    verts = np.asarray(tris, dtype=np.float64).reshape(-1, 3, 3)
    return TriangleMesh(verts, np.zeros((len(verts), 3)), SourceFormat.OBJ)


def _quad(a, b, c, d):
    return [(a, b, c), (a, c, d)]


def _box_tris(lo, hi):
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    tris = []
    tris += _quad((x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0))  # z=z0
    tris += _quad((x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1))  # z=z1
    tris += _quad((x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1))  # y=y0
    tris += _quad((x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0))  # y=y1
    tris += _quad((x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0))  # x=x0
    tris += _quad((x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1))  # x=x1
    return tris


def box_mesh(extent=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    half = np.asarray(extent, dtype=np.float64) / 2.0
    c = np.asarray(center, dtype=np.float64)
    return _mesh(_box_tris(c - half, c + half))


def sphere_mesh(radius=0.5, center=(0.0, 0.0, 0.0), rings=24, segments=48) -> TriangleMesh:
    """Watertight UV sphere."""
    cx, cy, cz = center
    theta = np.linspace(0.0, np.pi, rings + 1)
    phi = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    tris = []

    def point(t, p):
        return (
            cx + radius * np.sin(t) * np.cos(p),
            cy + radius * np.sin(t) * np.sin(p),
            cz + radius * np.cos(t),
        )

    for i in range(rings):
        for j in range(segments):
            p0, p1 = phi[j], phi[(j + 1) % segments]
            a = point(theta[i], p0)
            b = point(theta[i + 1], p0)
            c = point(theta[i + 1], p1)
            d = point(theta[i], p1)
            if i == 0:
                tris.append((a, b, c))  # pole fan, top
            elif i == rings - 1:
                tris.append((a, b, d))  # pole fan, bottom
            else:
                tris += _quad(a, b, c, d)
    return _mesh(tris)


def cylinder_mesh(radius=0.5, height=1.0, center=(0.0, 0.0, 0.0), segments=48) -> TriangleMesh:
    """Watertight z-axis cylinder with fan caps."""
    cx, cy, cz = center
    z0, z1 = cz - height / 2.0, cz + height / 2.0
    phi = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    ring = [(cx + radius * np.cos(p), cy + radius * np.sin(p)) for p in phi]
    tris = []
    for j in range(segments):
        (ax, ay), (bx, by) = ring[j], ring[(j + 1) % segments]
        tris += _quad((ax, ay, z0), (bx, by, z0), (bx, by, z1), (ax, ay, z1))
        tris.append(((cx, cy, z0), (bx, by, z0), (ax, ay, z0)))
        tris.append(((cx, cy, z1), (ax, ay, z1), (bx, by, z1)))
    return _mesh(tris)


def l_bracket_mesh(leg=1.0, thickness=0.35, width=0.6) -> TriangleMesh:
    """Two overlapping solid boxes forming an L profile."""
    tris = _box_tris((0.0, 0.0, 0.0), (leg, width, thickness))
    tris += _box_tris((0.0, 0.0, 0.0), (thickness, width, leg))
    return _mesh(tris)


def open_box_mesh(extent=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Five-sided container, open at +z; voxelizes to a hollow shell
    because the exterior flood leaks through the opening."""
    half = np.asarray(extent, dtype=np.float64) / 2.0
    (x0, y0, z0), (x1, y1, z1) = np.asarray(center) - half, np.asarray(center) + half
    tris = []
    tris += _quad((x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0))
    tris += _quad((x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1))
    tris += _quad((x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0))
    tris += _quad((x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0))
    tris += _quad((x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1))
    return _mesh(tris)


def chamfered_box_mesh(extent=(1.0, 1.0, 1.0), chamfer=0.25) -> TriangleMesh:
    """Box with the top-back edge cut at 45 degrees."""
    w, h, d = extent
    c = min(chamfer, h / 2.0, d / 2.0)
    # chamfer replaces the y=h, z=d edge
    tris = []
    tris += _quad((0, 0, 0), (0, h, 0), (w, h, 0), (w, 0, 0))  # z=0
    tris += _quad((0, 0, d), (w, 0, d), (w, h - c, d), (0, h - c, d))  # z=d
    tris += _quad((0, 0, 0), (w, 0, 0), (w, 0, d), (0, 0, d))  # y=0
    tris += _quad((0, h, 0), (0, h, d - c), (w, h, d - c), (w, h, 0))  # y=h
    tris += _quad((0, h, d - c), (0, h - c, d), (w, h - c, d), (w, h, d - c))  # bevel
    for x, flip in ((0.0, False), (w, True)):
        pent = [(x, 0, 0), (x, h, 0), (x, h, d - c), (x, h - c, d), (x, 0, d)]
        if flip:
            pent.reverse()
        for a, b in zip(pent[1:], pent[2:]):
            tris.append((pent[0], a, b))
    return _mesh(tris)


# --- synthetic dataset ----------------------------------------------------

PART_KINDS = ("box", "sphere", "cylinder", "l_bracket", "open_box", "chamfered_box")


def synthetic_part(rng: np.random.Generator) -> tuple[str, TriangleMesh]:
    """One random procedural part; geometry depends only on the rng state."""
    kind = PART_KINDS[int(rng.integers(len(PART_KINDS)))]
    u = lambda a, b: float(rng.uniform(a, b))
    if kind == "box":
        mesh = box_mesh((u(0.2, 1.0), u(0.2, 1.0), u(0.05, 1.0)))
    elif kind == "sphere":
        mesh = sphere_mesh(u(0.3, 0.5), rings=12, segments=24)
    elif kind == "cylinder":
        mesh = cylinder_mesh(u(0.1, 0.5), u(0.3, 1.0), segments=24)
    elif kind == "l_bracket":
        mesh = l_bracket_mesh(1.0, u(0.15, 0.45), u(0.3, 1.0))
    elif kind == "open_box":
        mesh = open_box_mesh((u(0.4, 1.0), u(0.4, 1.0), u(0.4, 1.0)))
    else:
        mesh = chamfered_box_mesh((u(0.3, 1.0), u(0.3, 1.0), u(0.3, 1.0)), u(0.1, 0.4))
    return kind, mesh


def occupancy_rule_score(grid: VoxelGrid) -> int:
    """Deterministic stand-in for an expert answer: the occupied-volume
    fraction of the normalized grid, clamped onto the 0..10 scale."""
    fraction = grid.occupied_count() / grid.occupancy.size
    return int(np.clip(round(fraction * 15.0), 0, 10))
