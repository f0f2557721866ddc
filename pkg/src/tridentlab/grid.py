"""Discretization of the periodic strip quotient and finite differences on it.

The computational domain is the rectangle [-a, a] x [0, b] with the left and
right edges identified.  Grids are node-centered: the bottom (y = 0) and top
(y = b) rows are explicit nodes, the periodic seam in x stores no duplicate
column.  Node (i, j) sits at (-a + i*hx, j*hy) with i cyclic modulo nx.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Boundary mask codes for the partition of the strip boundary.
INTERIOR = 0
BOTTOM_P = 1   # bottom edge, 0 < x < a
BOTTOM_N = 2   # bottom edge, -a < x < 0
TOP = 3        # whole top edge y = b
CORNER = 4     # the two identified corner points (0,0) and (a,0) == (-a,0)

_DIFF_KINDS = ("x", "y", "xx", "yy", "xy")


@dataclass(frozen=True)
class StripSpec:
    """Periodic strip K_{a,b}: half-period a and width b, both positive.

    The bottom edge splits into P = {(x,0): 0 < x < a} and the bottom part of
    N = {(x,0): -a < x < 0}; the whole top edge belongs to N.  The two corner
    points (0,0) and (a,0) (the latter identified with (-a,0)) separate them.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and np.isfinite(self.a)):
            raise ValueError(f"half-period a must be positive, got {self.a}")
        if not (self.b > 0 and np.isfinite(self.b)):
            raise ValueError(f"strip width b must be positive, got {self.b}")


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid on a StripSpec with cyclic x-topology."""

    spec: StripSpec
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 8 or self.nx % 2 != 0:
            raise ValueError(f"nx must be even and >= 8, got {self.nx}")
        if self.ny < 5:
            raise ValueError(f"ny must be >= 5, got {self.ny}")

    @property
    def a(self) -> float:
        return self.spec.a

    @property
    def b(self) -> float:
        return self.spec.b

    @property
    def hx(self) -> float:
        return 2.0 * self.spec.a / self.nx

    @property
    def hy(self) -> float:
        return self.spec.b / (self.ny - 1)

    @cached_property
    def xs(self) -> np.ndarray:
        """x-coordinates of the nx cyclic columns, from -a to a - hx."""
        xs = -self.spec.a + self.hx * np.arange(self.nx)
        xs.setflags(write=False)
        return xs

    @cached_property
    def ys(self) -> np.ndarray:
        """y-coordinates of the ny rows, from 0 to b inclusive."""
        ys = self.hy * np.arange(self.ny)
        ys = ys.copy()
        ys[-1] = self.spec.b  # exact top edge
        ys.setflags(write=False)
        return ys

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Per-node flags (ny, nx): interior / bottom-P / bottom-N / top / corner."""
        mask = np.full((self.ny, self.nx), INTERIOR, dtype=np.int8)
        half = self.nx // 2
        mask[0, :half] = BOTTOM_N          # x in (-a, 0)
        mask[0, half:] = BOTTOM_P          # x in (0, a)
        mask[0, 0] = CORNER                # x = -a == a
        mask[0, half] = CORNER             # x = 0
        mask[-1, :] = TOP
        mask.setflags(write=False)
        return mask

    def column_at(self, x: float) -> int:
        """Index of the column nearest to x (taken cyclically)."""
        i = int(round((x + self.spec.a) / self.hx))
        return i % self.nx

    def row_at(self, y: float) -> int:
        """Index of the row nearest to y, clipped to [0, ny-1]."""
        j = int(round(y / self.hy))
        return min(max(j, 0), self.ny - 1)

    def meshes(self):
        """(X, Y) coordinate arrays of shape (ny, nx)."""
        return np.meshgrid(self.xs, self.ys)


def build_grid(spec: StripSpec, nx: int, ny: int) -> Grid:
    """Build the cyclic grid; nx must be even so the corners land on nodes."""
    return Grid(spec, nx, ny)


@dataclass(frozen=True)
class ScalarField:
    """Grid-sampled function: values[j, i] at node (i, j).  Immutable."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(
                f"values shape {v.shape} does not match grid "
                f"({self.grid.ny}, {self.grid.nx})")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite at every node")
        if v is self.values and v.flags.writeable:
            v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.grid.boundary_mask

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def shifted(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values + c)


def field_from_function(grid: Grid, fn) -> ScalarField:
    """Sample fn(x, y) (vectorized) at the grid nodes."""
    X, Y = grid.meshes()
    return ScalarField(grid, np.asarray(fn(X, Y), dtype=np.float64))


# ---------------------------------------------------------------------------
# Finite-difference stencils.
#
# Interior stencils are second-order centered; x wraps cyclically.  The
# explicit top/bottom rows get one-sided stencils (lower accuracy, flagged by
# convention: consumers that care work on interior rows only).  Groupings are
# kept symmetric, e.g. ((left + right) - 2*center), so that reflections of the
# input reflect the output bit-exactly.
# ---------------------------------------------------------------------------

def _dx(v: np.ndarray, hx: float) -> np.ndarray:
    return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2.0 * hx)


def _dxx(v: np.ndarray, hx: float) -> np.ndarray:
    return ((np.roll(v, -1, axis=1) + np.roll(v, 1, axis=1)) - 2.0 * v) / (hx * hx)


def _dy(v: np.ndarray, hy: float) -> np.ndarray:
    out = np.empty_like(v)
    out[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * hy)
    out[0, :] = (-3.0 * v[0, :] + 4.0 * v[1, :] - v[2, :]) / (2.0 * hy)
    out[-1, :] = (3.0 * v[-1, :] - 4.0 * v[-2, :] + v[-3, :]) / (2.0 * hy)
    return out


def _dyy(v: np.ndarray, hy: float) -> np.ndarray:
    out = np.empty_like(v)
    out[1:-1, :] = ((v[2:, :] + v[:-2, :]) - 2.0 * v[1:-1, :]) / (hy * hy)
    # one-sided 4-point second derivatives on the boundary rows
    out[0, :] = (2.0 * v[0, :] - 5.0 * v[1, :] + 4.0 * v[2, :] - v[3, :]) / (hy * hy)
    out[-1, :] = (2.0 * v[-1, :] - 5.0 * v[-2, :] + 4.0 * v[-3, :] - v[-4, :]) / (hy * hy)
    return out


def _dxy(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    out = np.empty_like(v)
    pp = np.roll(v, -1, axis=1)[2:, :]   # (i+1, j+1)
    mm = np.roll(v, 1, axis=1)[:-2, :]   # (i-1, j-1)
    pm = np.roll(v, -1, axis=1)[:-2, :]  # (i+1, j-1)
    mp = np.roll(v, 1, axis=1)[2:, :]    # (i-1, j+1)
    out[1:-1, :] = ((pp + mm) - (mp + pm)) / (4.0 * hx * hy)
    # boundary rows: x-derivative of the one-sided y-derivative
    dy = _dy(v, hy)
    dxy_edge = _dx(dy, hx)
    out[0, :] = dxy_edge[0, :]
    out[-1, :] = dxy_edge[-1, :]
    return out


def diff(f: ScalarField, which: str) -> ScalarField:
    """Finite-difference derivative of a field; which in {x, y, xx, yy, xy}."""
    if which not in _DIFF_KINDS:
        raise ValueError(f"unknown derivative kind {which!r}; expected one of {_DIFF_KINDS}")
    v = f.values
    hx, hy = f.grid.hx, f.grid.hy
    if which == "x":
        out = _dx(v, hx)
    elif which == "xx":
        out = _dxx(v, hx)
    elif which == "y":
        out = _dy(v, hy)
    elif which == "yy":
        out = _dyy(v, hy)
    else:
        out = _dxy(v, hx, hy)
    return ScalarField(f.grid, out)


# ---------------------------------------------------------------------------
# Serialization: flat CSV (i, j, x, y, value) and a binary format with header
# (a, b, nx, ny).  Both round-trip bit-exactly (CSV via shortest repr).
# ---------------------------------------------------------------------------

_BIN_MAGIC = b"TLF1"


def save_field_csv(f: ScalarField, path) -> None:
    g = f.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x", "y", "value"])
        for j in range(g.ny):
            y = g.ys[j]
            for i in range(g.nx):
                w.writerow([i, j, repr(g.xs[i]), repr(y), repr(f.values[j, i])])


def load_field_csv(path, grid: Grid) -> ScalarField:
    values = np.empty((grid.ny, grid.nx))
    seen = np.zeros((grid.ny, grid.nx), dtype=bool)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["i", "j"]:
            raise ValueError(f"not a field CSV: header {header}")
        for row in r:
            i, j = int(row[0]), int(row[1])
            values[j, i] = float(row[4])
            seen[j, i] = True
    if not seen.all():
        raise ValueError("field CSV does not cover every node of the grid")
    return ScalarField(grid, values)


def save_field_bin(f: ScalarField, path) -> None:
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<ddii", g.a, g.b, g.nx, g.ny))
        fh.write(np.ascontiguousarray(f.values).tobytes())


def load_field_bin(path) -> ScalarField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BIN_MAGIC:
            raise ValueError(f"bad magic {magic!r} in field file {path}")
        a, b, nx, ny = struct.unpack("<ddii", fh.read(24))
        data = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8").reshape(ny, nx)
    grid = Grid(StripSpec(a, b), nx, ny)
    return ScalarField(grid, data.copy())
