"""Training-set expansion by exact grid isometries and uniform rescaling.

The 24 proper rotations of the cube keep boolean occupancy exact (no
resampling), and uniform nearest-neighbor shrinking keeps it boolean. The
default plan (24 orientations x 5 scale factors) yields 120 variants per
model; 187 models give the 22,440-sample expansion the training recipe is
built around.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product

import numpy as np

from .voxel import VoxelError, VoxelGrid

DEFAULT_SCALE_FACTORS = (1.0, 0.9, 0.8, 0.7, 0.6)


@dataclass(frozen=True)
class Orientation:
    """One of the 24 proper cube rotations, as a signed permutation matrix."""

    index: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.int64)
        if m.shape != (3, 3) or not np.isin(m, (-1, 0, 1)).all():
            raise ValueError("orientation must be a signed permutation matrix")
        if (np.abs(m).sum(axis=0) != 1).any() or (np.abs(m).sum(axis=1) != 1).any():
            raise ValueError("orientation must have one nonzero per row/column")
        if round(np.linalg.det(m)) != 1:
            raise ValueError("orientation must be a proper rotation (det +1)")
        object.__setattr__(self, "matrix", m)

    def compose(self, other: "Orientation") -> np.ndarray:
        return self.matrix @ other.matrix

    def inverse_matrix(self) -> np.ndarray:
        return self.matrix.T


def _enumerate_rotations() -> list[np.ndarray]:
    mats = []
    for perm in permutations(range(3)):
        for signs in product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=np.int64)
            for row, (col, sign) in enumerate(zip(perm, signs)):
                m[row, col] = sign
            if round(np.linalg.det(m)) == 1:
                mats.append(m)
    # identity-first deterministic order
    mats.sort(key=lambda m: tuple(-v for v in m.ravel()))
    return mats


_ROTATIONS = _enumerate_rotations()


def all_orientations() -> list[Orientation]:
    return [Orientation(i, m) for i, m in enumerate(_ROTATIONS)]


def orientation(index: int) -> Orientation:
    if not 0 <= index < 24:
        raise ValueError(f"orientation index {index} out of range 0..23")
    return Orientation(index, _ROTATIONS[index])


def find_orientation(matrix: np.ndarray) -> Orientation:
    """Orientation whose matrix equals the given one; used by group tests."""
    for i, m in enumerate(_ROTATIONS):
        if np.array_equal(m, matrix):
            return Orientation(i, m)
    raise ValueError("matrix is not one of the 24 cube rotations")


@dataclass
class AugmentationPlan:
    orientations: list[Orientation] = field(default_factory=all_orientations)
    scale_factors: tuple[float, ...] = DEFAULT_SCALE_FACTORS

    def __post_init__(self):
        if not self.orientations or not self.scale_factors:
            raise ValueError("augmentation plan must be non-empty")
        if any(not 0.0 < s <= 1.0 for s in self.scale_factors):
            raise ValueError("scale factors must lie in (0, 1]")

    def __len__(self) -> int:
        return len(self.orientations) * len(self.scale_factors)

    def to_json_dict(self) -> dict:
        return {
            "orientations": [o.index for o in self.orientations],
            "scale_factors": list(self.scale_factors),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AugmentationPlan":
        return cls(
            [orientation(i) for i in d["orientations"]],
            tuple(float(s) for s in d["scale_factors"]),
        )


def rotate_grid(grid: VoxelGrid, o: Orientation) -> VoxelGrid:
    """Rotate occupancy by a cube rotation; exact cell permutation."""
    if not grid.is_cubic:
        raise VoxelError("rotation requires a cubic grid")
    # new[v] = old[R^-1 (v - c) + c]; realized as a transpose plus flips
    inv = o.inverse_matrix()
    occ = grid.occupancy
    perm = [0, 0, 0]
    flips = []
    for out_axis in range(3):
        in_axis = int(np.flatnonzero(inv[:, out_axis] != 0)[0])
        perm[out_axis] = in_axis
        if inv[in_axis, out_axis] < 0:
            flips.append(out_axis)
    rotated = occ.transpose(perm)
    if flips:
        rotated = np.flip(rotated, axis=flips)
    return VoxelGrid(np.ascontiguousarray(rotated), grid.translate, grid.scale)


def scale_grid(grid: VoxelGrid, factor: float) -> VoxelGrid:
    """Uniform nearest-neighbor rescale about the grid center; same dims."""
    if not 0.0 < factor <= 1.0:
        raise VoxelError(f"scale factor {factor} out of range (0, 1]")
    if factor == 1.0:
        return VoxelGrid(grid.occupancy.copy(), grid.translate, grid.scale)
    centers = [(d - 1) / 2.0 for d in grid.dim]
    coords = []
    for d, c in zip(grid.dim, centers):
        src = np.floor((np.arange(d) - c) / factor + c + 0.5).astype(np.intp)
        coords.append(src)
    valid = [
        (c >= 0) & (c < d) for c, d in zip(coords, grid.dim)
    ]
    ix = np.clip(coords[0], 0, grid.dim[0] - 1)
    iy = np.clip(coords[1], 0, grid.dim[1] - 1)
    iz = np.clip(coords[2], 0, grid.dim[2] - 1)
    sampled = grid.occupancy[np.ix_(ix, iy, iz)]
    mask = (
        valid[0][:, None, None] & valid[1][None, :, None] & valid[2][None, None, :]
    )
    out = sampled & mask
    return VoxelGrid(out, grid.translate, grid.scale)


def generate_invariants(grid: VoxelGrid, plan: AugmentationPlan | None = None) -> list[VoxelGrid]:
    """Orientation-major cartesian product of rotations then rescales."""
    if plan is None:
        plan = AugmentationPlan()
    if not grid.is_cubic:
        raise VoxelError("augmentation requires a cubic grid")
    out = []
    for o in plan.orientations:
        rotated = rotate_grid(grid, o)
        for s in plan.scale_factors:
            out.append(scale_grid(rotated, s))
    return out
