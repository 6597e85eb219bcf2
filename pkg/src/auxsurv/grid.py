"""Extended toroidal computational grid.

The observation bounding box is embedded in the lower-left corner of an
extended box, which is split into ``2**m1`` columns (x) by ``2**m2`` rows (y).
Cells are indexed row-major with x varying fastest, so a field stored as a
``(ny, nx)`` array flattens to the cell index directly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    m1: int
    m2: int
    bbox: tuple[float, float, float, float]  # (xmin, ymin, xmax, ymax)
    ext_bbox: tuple[float, float, float, float]
    ext_factor: float = 2.0
    centroids: np.ndarray = field(init=False, repr=False, compare=False)
    obs_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x0, y0, _, _ = self.ext_bbox
        xs = x0 + (np.arange(self.nx) + 0.5) * self.cell_w
        ys = y0 + (np.arange(self.ny) + 0.5) * self.cell_h
        cx, cy = np.meshgrid(xs, ys)
        cents = np.column_stack([cx.ravel(), cy.ravel()])
        cents.flags.writeable = False

        bx0, by0, bx1, by1 = self.bbox
        lo_x = x0 + np.arange(self.nx) * self.cell_w
        lo_y = y0 + np.arange(self.ny) * self.cell_h
        in_x = (lo_x < bx1) & (lo_x + self.cell_w > bx0)
        in_y = (lo_y < by1) & (lo_y + self.cell_h > by0)
        mask = (in_y[:, None] & in_x[None, :]).ravel()
        mask.flags.writeable = False

        object.__setattr__(self, "centroids", cents)
        object.__setattr__(self, "obs_mask", mask)

    @property
    def nx(self) -> int:
        return 2 ** self.m1

    @property
    def ny(self) -> int:
        return 2 ** self.m2

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(ny, nx)`` of a field on this grid."""
        return (self.ny, self.nx)

    @property
    def m(self) -> int:
        return self.nx * self.ny

    @property
    def ext_width(self) -> float:
        return self.ext_bbox[2] - self.ext_bbox[0]

    @property
    def ext_height(self) -> float:
        return self.ext_bbox[3] - self.ext_bbox[1]

    @property
    def cell_w(self) -> float:
        return self.ext_width / self.nx

    @property
    def cell_h(self) -> float:
        return self.ext_height / self.ny

    def lag_distances(self) -> np.ndarray:
        """Toroidal distance from cell 0 to every cell, as a ``(ny, nx)`` array."""
        kx = np.arange(self.nx)
        ky = np.arange(self.ny)
        dx = np.minimum(kx, self.nx - kx) * self.cell_w
        dy = np.minimum(ky, self.ny - ky) * self.cell_h
        return np.hypot(dy[:, None], dx[None, :])


def build_grid(locations, m1: int, m2: int, ext_factor: float = 2.0,
               bbox=None) -> Grid:
    """Build the extended grid over a set of planar locations.

    Parameters
    ----------
    locations : array_like, shape (n, 2)
        Observation coordinates.
    m1, m2 : int
        The grid has ``2**m1`` cells along x and ``2**m2`` along y.
    ext_factor : float
        Scale of the extended box relative to the bounding box, per axis.
        Must be at least 2 so that distances inside the bounding box are never
        shortened by wrapping.
    bbox : tuple, optional
        Explicit ``(xmin, ymin, xmax, ymax)``; must contain every location.
    """
    pts = np.asarray(locations, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 1:
        raise ValueError("at least one location is required")
    if not np.all(np.isfinite(pts)):
        raise ValueError("locations contain non-finite coordinates")
    if int(m1) < 1 or int(m2) < 1:
        raise ValueError("m1 and m2 must be >= 1")
    if not ext_factor >= 2.0:
        raise ValueError("ext_factor must be >= 2")
    m1, m2 = int(m1), int(m2)

    if bbox is None:
        x0, y0 = pts.min(axis=0)
        x1, y1 = pts.max(axis=0)
    else:
        x0, y0, x1, y1 = map(float, bbox)
        if not (x1 >= x0 and y1 >= y0):
            raise ValueError("bbox must be (xmin, ymin, xmax, ymax)")
        if np.any(pts < [x0, y0]) or np.any(pts > [x1, y1]):
            raise ValueError("bbox does not contain all locations")

    w, h = x1 - x0, y1 - y0
    if w <= 0 or h <= 0:
        # one nominal cell of the non-degenerate axis, or a unit box
        if w <= 0 and h <= 0:
            pad_w = pad_h = 1.0
        elif w <= 0:
            pad_w = h * ext_factor / 2 ** m2
            pad_h = 0.0
        else:
            pad_w = 0.0
            pad_h = w * ext_factor / 2 ** m1
        warnings.warn("degenerate bounding box; inflating by one nominal cell",
                      RuntimeWarning, stacklevel=2)
        x0, x1 = x0 - pad_w / 2, x1 + pad_w / 2
        y0, y1 = y0 - pad_h / 2, y1 + pad_h / 2
        w, h = x1 - x0, y1 - y0

    ext = (x0, y0, x0 + ext_factor * w, y0 + ext_factor * h)
    return Grid(m1=m1, m2=m2, bbox=(x0, y0, x1, y1), ext_bbox=ext,
                ext_factor=float(ext_factor))


def cell_of(grid: Grid, points) -> np.ndarray | int:
    """Row-major cell index of each point.

    Cells are half-open ``[lo, hi)``, so a point on a shared edge goes to the
    cell with the larger index coordinate. Points on the far edge of the
    extended box belong to the last cell.
    """
    p = np.asarray(points, dtype=float)
    scalar = p.ndim == 1
    p = p.reshape(-1, 2)
    x0, y0, x1, y1 = grid.ext_bbox
    if not np.all(np.isfinite(p)):
        raise ValueError("points contain non-finite coordinates")
    outside = (p[:, 0] < x0) | (p[:, 0] > x1) | (p[:, 1] < y0) | (p[:, 1] > y1)
    if np.any(outside):
        raise ValueError(f"{int(outside.sum())} point(s) outside the extended grid")
    col = np.minimum(np.floor((p[:, 0] - x0) / grid.cell_w).astype(np.int64), grid.nx - 1)
    row = np.minimum(np.floor((p[:, 1] - y0) / grid.cell_h).astype(np.int64), grid.ny - 1)
    idx = row * grid.nx + col
    return int(idx[0]) if scalar else idx


def toroidal_distance(grid: Grid, a, b):
    """Distance between cell centroids on the wrapped extended grid."""
    a = np.asarray(a)
    b = np.asarray(b)
    if np.any((a < 0) | (a >= grid.m)) or np.any((b < 0) | (b >= grid.m)):
        raise IndexError("cell index out of range")
    ra, ca = np.divmod(a, grid.nx)
    rb, cb = np.divmod(b, grid.nx)
    dx = np.abs(ca - cb) * grid.cell_w
    dy = np.abs(ra - rb) * grid.cell_h
    dx = np.minimum(dx, grid.ext_width - dx)
    dy = np.minimum(dy, grid.ext_height - dy)
    d = np.hypot(dx, dy)
    return float(d) if d.ndim == 0 else d
