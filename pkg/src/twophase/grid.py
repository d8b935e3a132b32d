"""Structured Cartesian grids for cell-centred finite volumes.

Cells are numbered x-fastest: ``idx = i + nx * (j + ny * k)``.  When a
gravity axis is given, depth equals the cell-centre coordinate along that
axis, so index 0 on that axis is the top of the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

AXES = ("x", "y", "z")

NOFLOW_TAG = ""


def _axis_index(axis: str | int | None) -> int | None:
    if axis is None:
        return None
    if isinstance(axis, (int, np.integer)):
        if not 0 <= axis < 3:
            raise ValueError(f"axis index out of range: {axis}")
        return int(axis)
    key = str(axis).strip().lower()
    if key in ("", "none"):
        return None
    if key not in AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of x, y, z or none")
    return AXES.index(key)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform Cartesian grid with interior and boundary face tables.

    Interior faces are stored as parallel arrays: ``face_cells`` (nf, 2) with
    ``face_cells[:, 0] < face_cells[:, 1]``, ``face_area``, ``face_dist`` (the
    centre-to-centre distance) and ``face_axis``.  Boundary faces carry the
    owning cell, area, axis, side (0 = low, 1 = high), the distance from the
    cell centre to the face, the face-centre depth and a tag used to attach
    boundary conditions.
    """

    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float
    gravity_axis: int | None
    cell_depth: np.ndarray
    face_cells: np.ndarray
    face_area: np.ndarray
    face_dist: np.ndarray
    face_axis: np.ndarray
    bface_cell: np.ndarray
    bface_area: np.ndarray
    bface_axis: np.ndarray
    bface_side: np.ndarray
    bface_dist: np.ndarray
    bface_depth: np.ndarray
    bface_tag: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def num_cells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def num_faces(self) -> int:
        return len(self.face_area)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def lengths(self) -> tuple[float, float, float]:
        return (self.nx * self.dx, self.ny * self.dy, self.nz * self.dz)

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    def cell_index(self, i, j, k):
        return i + self.nx * (j + self.ny * k)

    def cell_ijk(self, idx):
        idx = np.asarray(idx)
        i = idx % self.nx
        j = (idx // self.nx) % self.ny
        k = idx // (self.nx * self.ny)
        return i, j, k

    def cell_centers(self) -> np.ndarray:
        i, j, k = self.cell_ijk(np.arange(self.num_cells))
        return np.column_stack(
            [(i + 0.5) * self.dx, (j + 0.5) * self.dy, (k + 0.5) * self.dz]
        )

    def bface_centers(self) -> np.ndarray:
        centers = self.cell_centers()[self.bface_cell].copy()
        h = np.array(self.spacing)
        rows = np.arange(len(self.bface_cell))
        sign = np.where(self.bface_side == 0, -0.5, 0.5)
        centers[rows, self.bface_axis] += sign * h[self.bface_axis]
        return centers

    def boundary_faces(self, tag: str) -> np.ndarray:
        """Indices of boundary faces carrying ``tag``."""
        return np.flatnonzero(self.bface_tag == tag)

    def tag_boundary(self, tag: str, side: str, lo=None, hi=None) -> "Grid":
        """Return a copy with matching boundary faces tagged.

        ``side`` names a domain side such as ``"xmin"`` or ``"zmax"``.
        ``lo``/``hi`` are optional (3,) bounding-box corners in metres; a face
        matches when its centre lies inside the box (inclusive).  Faces that
        already carry a different non-empty tag are retagged.
        """
        side = side.strip().lower()
        if len(side) != 4 or side[0] not in AXES or side[1:] not in ("min", "max"):
            raise ValueError(f"bad boundary side {side!r}; expected e.g. 'xmin' or 'zmax'")
        axis = AXES.index(side[0])
        which = 0 if side[1:] == "min" else 1
        mask = (self.bface_axis == axis) & (self.bface_side == which)
        centers = self.bface_centers()
        tol = 1e-9 * max(self.lengths)
        if lo is not None:
            mask &= np.all(centers >= np.asarray(lo, dtype=float) - tol, axis=1)
        if hi is not None:
            mask &= np.all(centers <= np.asarray(hi, dtype=float) + tol, axis=1)
        if not mask.any():
            raise ValueError(f"boundary region {tag!r} on {side} selects no faces")
        tags = self.bface_tag.copy()
        tags[mask] = tag
        return replace(self, bface_tag=tags)

    def adjacency_pattern(self):
        """Boolean cell adjacency (cell itself plus face neighbours) as CSR."""
        import scipy.sparse as sp

        n = self.num_cells
        a, b = self.face_cells[:, 0], self.face_cells[:, 1]
        rows = np.concatenate([np.arange(n), a, b])
        cols = np.concatenate([np.arange(n), b, a])
        data = np.ones(len(rows), dtype=bool)
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def interior_face_count(nx: int, ny: int, nz: int) -> int:
    return (nx - 1) * ny * nz + nx * (ny - 1) * nz + nx * ny * (nz - 1)


def build_grid(nx, ny, nz, lx, ly, lz, gravity_axis=None) -> Grid:
    """Uniform grid of ``nx*ny*nz`` cells on a ``lx*ly*lz`` box."""
    counts = (nx, ny, nz)
    lengths = (lx, ly, lz)
    if any(int(c) != c or c < 1 for c in counts):
        raise ValueError(f"cell counts must be positive integers, got {counts}")
    if any(not np.isfinite(l) or l <= 0 for l in lengths):
        raise ValueError(f"domain lengths must be positive, got {lengths}")
    nx, ny, nz = (int(c) for c in counts)
    h = (lx / nx, ly / ny, lz / nz)
    gaxis = _axis_index(gravity_axis)
    n = nx * ny * nz

    idx = np.arange(n).reshape(nz, ny, nx)  # [k, j, i]
    areas = (h[1] * h[2], h[0] * h[2], h[0] * h[1])

    cells, area, dist, axis = [], [], [], []
    pairs = (
        (idx[:, :, :-1], idx[:, :, 1:]),
        (idx[:, :-1, :], idx[:, 1:, :]),
        (idx[:-1, :, :], idx[1:, :, :]),
    )
    for ax, (lo, hi) in enumerate(pairs):
        m = lo.size
        cells.append(np.column_stack([lo.ravel(), hi.ravel()]))
        area.append(np.full(m, areas[ax]))
        dist.append(np.full(m, h[ax]))
        axis.append(np.full(m, ax, dtype=np.int64))

    bcell, barea, baxis, bside = [], [], [], []
    sides = (
        (idx[:, :, 0], idx[:, :, -1]),
        (idx[:, 0, :], idx[:, -1, :]),
        (idx[0, :, :], idx[-1, :, :]),
    )
    for ax, (low, high) in enumerate(sides):
        for side, block in ((0, low), (1, high)):
            m = block.size
            bcell.append(block.ravel())
            barea.append(np.full(m, areas[ax]))
            baxis.append(np.full(m, ax, dtype=np.int64))
            bside.append(np.full(m, side, dtype=np.int64))

    bface_cell = np.concatenate(bcell)
    bface_axis = np.concatenate(baxis)
    bface_side = np.concatenate(bside)
    hv = np.asarray(h)

    ijk = np.column_stack([idx.ravel() % nx, (idx.ravel() // nx) % ny, idx.ravel() // (nx * ny)])
    if gaxis is None:
        depth = np.zeros(n)
        bdepth = np.zeros(len(bface_cell))
    else:
        depth = (ijk[:, gaxis] + 0.5) * h[gaxis]
        bdepth = depth[bface_cell].copy()
        on_g = bface_axis == gaxis
        bdepth[on_g] += np.where(bface_side[on_g] == 0, -0.5, 0.5) * h[gaxis]

    return Grid(
        nx=nx,
        ny=ny,
        nz=nz,
        dx=h[0],
        dy=h[1],
        dz=h[2],
        gravity_axis=gaxis,
        cell_depth=depth,
        face_cells=np.concatenate(cells).astype(np.int64),
        face_area=np.concatenate(area),
        face_dist=np.concatenate(dist),
        face_axis=np.concatenate(axis),
        bface_cell=bface_cell.astype(np.int64),
        bface_area=np.concatenate(barea),
        bface_axis=bface_axis,
        bface_side=bface_side,
        bface_dist=0.5 * hv[bface_axis],
        bface_depth=bdepth,
        bface_tag=np.full(len(bface_cell), NOFLOW_TAG, dtype=object),
    )


def harmonic_face_permeability(k_i, k_j, dx_i, dx_j):
    """Distance-weighted harmonic average of two cell permeabilities.

    Works elementwise on arrays.  A zero permeability on either side gives a
    zero face value (the 0/0 case included).
    """
    k_i = np.asarray(k_i, dtype=float)
    k_j = np.asarray(k_j, dtype=float)
    denom = dx_i * k_j + dx_j * k_i
    num = (dx_i + dx_j) * k_i * k_j
    safe = np.where(denom > 0, denom, 1.0)
    out = np.where(denom > 0, num / safe, 0.0)
    return out if out.ndim else float(out)
