"""Pointwise and integral quantities attached to a graph over the strip.

The central object is the quasilinear residual

    R(u) = (1 + u_y^2) u_xx + (1 + u_x^2) u_yy - 2 u_x u_y u_xy + (1 + |Du|^2),

which vanishes exactly on translating-soliton graphs.  In divergence form the
same equation reads  Div xi = -(1 + |Du|^2)^(-1/2)  with the bounded flux
xi = Du / sqrt(1 + |Du|^2), which yields a discrete conservation check on
subrectangles of the strip.  The weighted area of a graph uses the conformal
weight e^(-u), so a vertical wall over heights [c, oo) above a curve of
length L carries weighted area L * e^(-c); that is the tail term below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grid import Grid, ScalarField, _dx, _dxx, _dy, _dyy, _dxy


def _derivatives(u: ScalarField):
    v = u.values
    hx, hy = u.grid.hx, u.grid.hy
    return (_dx(v, hx), _dy(v, hy), _dxx(v, hx), _dyy(v, hy), _dxy(v, hx, hy))


def residual(u: ScalarField) -> ScalarField:
    """Discrete translator residual at interior nodes; boundary rows are 0."""
    ux, uy, uxx, uyy, uxy = _derivatives(u)
    R = np.zeros_like(u.values)
    s = np.s_[1:-1, :]
    R[s] = ((1.0 + uy[s] * uy[s]) * uxx[s]
            + (1.0 + ux[s] * ux[s]) * uyy[s]
            - 2.0 * ux[s] * uy[s] * uxy[s]
            + (1.0 + ux[s] * ux[s] + uy[s] * uy[s]))
    return ScalarField(u.grid, R)


def linearize(u: ScalarField) -> sp.csr_matrix:
    """Exact Frechet derivative of the discrete residual at u.

    Returns an (nx*ny, nx*ny) sparse matrix acting on flattened fields
    (node n = j*nx + i).  Rows of boundary nodes are zero, matching the
    residual convention; interior rows have at most 9 entries on the compact
    3x3 stencil with cyclic x-coupling.
    """
    g = u.grid
    nx, ny = g.nx, g.ny
    hx, hy = g.hx, g.hy
    ux, uy, uxx, uyy, uxy = _derivatives(u)

    s = np.s_[1:-1, :]
    # partial derivatives of R with respect to (ux, uy, uxx, uyy, uxy)
    cx = 2.0 * (ux[s] * uyy[s] - uy[s] * uxy[s] + ux[s])
    cy = 2.0 * (uy[s] * uxx[s] - ux[s] * uxy[s] + uy[s])
    cxx = 1.0 + uy[s] * uy[s]
    cyy = 1.0 + ux[s] * ux[s]
    cxy = -2.0 * ux[s] * uy[s]

    jj, ii = np.meshgrid(np.arange(1, ny - 1), np.arange(nx), indexing="ij")
    row = (jj * nx + ii).ravel()
    ip = ((ii + 1) % nx).ravel()
    im = ((ii - 1) % nx).ravel()
    jp = (jj + 1).ravel()
    jm = (jj - 1).ravel()
    jc = jj.ravel()
    ic = ii.ravel()

    ax = (cx / (2.0 * hx)).ravel()
    ay = (cy / (2.0 * hy)).ravel()
    axx = (cxx / (hx * hx)).ravel()
    ayy = (cyy / (hy * hy)).ravel()
    axy = (cxy / (4.0 * hx * hy)).ravel()

    cols = [jc * nx + ip, jc * nx + im,          # east, west
            jp * nx + ic, jm * nx + ic,          # north, south
            jc * nx + ic,                        # center
            jp * nx + ip, jm * nx + im,          # NE, SW
            jp * nx + im, jm * nx + ip]          # NW, SE
    vals = [axx + ax, axx - ax,
            ayy + ay, ayy - ay,
            -2.0 * (axx + ayy),
            axy, axy,
            -axy, -axy]

    n = nx * ny
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.tile(row, 9), np.concatenate(cols))),
        shape=(n, n))
    return mat.tocsr()


@dataclass(frozen=True)
class FluxField:
    """Bounded flux xi = Du / sqrt(1 + |Du|^2); |xi| < 1 by construction."""

    grid: Grid
    xi1: np.ndarray
    xi2: np.ndarray

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.xi1 ** 2 + self.xi2 ** 2)


def flux_field(u: ScalarField) -> FluxField:
    v = u.values
    hx, hy = u.grid.hx, u.grid.hy
    ux = _dx(v, hx)
    uy = _dy(v, hy)
    w = np.sqrt(1.0 + ux * ux + uy * uy)
    return FluxField(u.grid, ux / w, uy / w)


@dataclass(frozen=True)
class FluxBalance:
    """Quadrature defect of the conservation identity on a subrectangle."""

    defect: float
    boundary_flux: float
    source_integral: float
    rect: tuple
    nx: int
    ny: int


def _cell_gradient(v: np.ndarray, hx: float, hy: float):
    """Cell-centered value and gradient on the nx * (ny-1) cells (cyclic x)."""
    ve = np.concatenate([v, v[:, :1]], axis=1)   # duplicate seam column
    v00 = ve[:-1, :-1]
    v10 = ve[:-1, 1:]
    v01 = ve[1:, :-1]
    v11 = ve[1:, 1:]
    vc = ((v00 + v11) + (v10 + v01)) / 4.0
    gx = ((v10 + v11) - (v00 + v01)) / (2.0 * hx)
    gy = ((v01 + v11) - (v00 + v10)) / (2.0 * hy)
    return vc, gx, gy


def flux_balance(u: ScalarField, rect: tuple) -> FluxBalance:
    """Check  oint xi . eta ds + int (1+|Du|^2)^(-1/2) dA = 0  on a rectangle.

    rect = (x0, x1, y0, y1) must be grid-aligned; a full-period x-extent
    (x1 - x0 == 2a) drops the side integrals, which cancel by periodicity.
    Boundary flux uses the trapezoid rule, the source integral the cell
    midpoint rule; the defect is O(h^2) on exact solutions.
    """
    g = u.grid
    x0, x1, y0, y1 = rect

    def snap(val, h, name):
        k = val / h
        if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
            raise ValueError(f"rect {name}={val} is not aligned to the grid")
        return int(round(k))

    i0 = snap(x0 + g.a, g.hx, "x0")
    i1 = snap(x1 + g.a, g.hx, "x1")
    j0 = snap(y0, g.hy, "y0")
    j1 = snap(y1, g.hy, "y1")
    if not (0 <= j0 < j1 <= g.ny - 1):
        raise ValueError(f"rect y-range [{y0}, {y1}] outside the strip")
    full_period = (i1 - i0) == g.nx
    if not full_period and not (0 <= i0 < i1 <= g.nx):
        raise ValueError("rect x-range must lie inside one period or span it")

    xi = flux_field(u)

    def x_line(arr, j):
        # integral of arr over the rect's x-extent along row j
        if full_period:
            return g.hx * float(np.sum(arr[j, :]))
        seg = arr[j, i0:i1 + 1]
        return g.hx * (float(np.sum(seg)) - 0.5 * (seg[0] + seg[-1]))

    flux = x_line(xi.xi2, j1) - x_line(xi.xi2, j0)
    if not full_period:
        col_hi = xi.xi1[j0:j1 + 1, i1 % g.nx]
        col_lo = xi.xi1[j0:j1 + 1, i0]
        flux += g.hy * (float(np.sum(col_hi)) - 0.5 * (col_hi[0] + col_hi[-1]))
        flux -= g.hy * (float(np.sum(col_lo)) - 0.5 * (col_lo[0] + col_lo[-1]))

    vc, gx, gy = _cell_gradient(u.values, g.hx, g.hy)
    dens = 1.0 / np.sqrt(1.0 + gx * gx + gy * gy)
    if full_period:
        block = dens[j0:j1, :]
    else:
        block = dens[j0:j1, i0:i1]
    source = g.hx * g.hy * float(np.sum(block))

    return FluxBalance(defect=flux + source, boundary_flux=flux,
                       source_integral=source, rect=rect, nx=g.nx, ny=g.ny)


@dataclass(frozen=True)
class AreaEstimate:
    """Weighted area of a graph plus the wall tail above the cap height."""

    interior: float
    tail: float
    total: float
    cap: float
    nx: int
    ny: int
    rule: str = "cell-midpoint"

    def to_json_dict(self) -> dict:
        return {"interior": self.interior, "tail": self.tail,
                "total": self.total, "cap": self.cap,
                "nx": self.nx, "ny": self.ny, "rule": self.rule}


def weighted_area(u: ScalarField, cap: float) -> AreaEstimate:
    """Midpoint-rule integral of e^(-u) sqrt(1 + |Du|^2) plus the tail a*e^(-cap).

    The tail is the weighted area of the vertical wall over the bottom-P
    segment above height cap and is always reported separately.  Requires
    u >= 0 (up to numerical slop), which the nonnegative boundary patterns
    guarantee via the comparison principle.
    """
    g = u.grid
    if float(np.min(u.values)) < -1e-6:
        raise ValueError("weighted_area requires u >= 0")
    vc, gx, gy = _cell_gradient(u.values, g.hx, g.hy)
    # overflow guard: 50 is far beyond any cap in use and never binds for u >= 0
    weight = np.exp(np.minimum(-vc, 50.0))
    interior = g.hx * g.hy * float(np.sum(weight * np.sqrt(1.0 + gx * gx + gy * gy)))
    tail = g.a * float(np.exp(-cap))
    return AreaEstimate(interior=interior, tail=tail, total=interior + tail,
                        cap=float(cap), nx=g.nx, ny=g.ny)


def gauss_sign_field(u: ScalarField) -> ScalarField:
    """det = u_xx u_yy - u_xy^2 at interior nodes (raw; only its sign is meaningful)."""
    v = u.values
    hx, hy = u.grid.hx, u.grid.hy
    uxx = _dxx(v, hx)
    uyy = _dyy(v, hy)
    uxy = _dxy(v, hx, hy)
    det = np.zeros_like(v)
    s = np.s_[1:-1, :]
    det[s] = uxx[s] * uyy[s] - uxy[s] * uxy[s]
    return ScalarField(u.grid, det)
