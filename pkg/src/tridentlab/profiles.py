"""Closed-form comparison profiles: grim reapers and 1D supersolution checks.

The grim reaper graph z = log(cos(y - y0)) + c is an exact translator on its
width-pi domain; restricted to an x-independent profile w(y) the translator
equation reduces to w'' + (w')^2 + 1 = 0, so the sign of that expression
classifies 1D profiles: zero margin is the exactly-critical (geodesic) case,
strictly negative margin is a strict supersolution, which forces the profile's
domain to be narrower than pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import Grid, ScalarField


@dataclass(frozen=True)
class GrimReaper:
    """Untilted grim reaper profile log(cos(y - y0)) + c on (y0 - pi/2, y0 + pi/2)."""

    y0: float = 0.0
    c: float = 0.0

    @property
    def domain(self) -> tuple:
        return (self.y0 - math.pi / 2.0, self.y0 + math.pi / 2.0)

    def _check(self, y):
        lo, hi = self.domain
        if np.any(y <= lo) or np.any(y >= hi):
            raise ValueError(
                f"y outside the open grim reaper domain ({lo}, {hi})")

    def __call__(self, y):
        self._check(y)
        return np.log(np.cos(np.asarray(y, dtype=float) - self.y0)) + self.c

    def slope(self, y):
        self._check(y)
        return -np.tan(np.asarray(y, dtype=float) - self.y0)

    def as_field(self, grid: Grid) -> ScalarField:
        """Sample on all grid rows (requires [0, b] inside the domain)."""
        row = self(grid.ys)
        return ScalarField(grid, np.tile(row[:, None], (1, grid.nx)))


def grim_reaper_eval(g: GrimReaper, y: float) -> float:
    return float(g(y))


def one_d_profile(b: float, bottom: float, top: float) -> Optional[GrimReaper]:
    """Exact x-independent solution on [0, b] with the given endpoint values.

    Solving log(cos(b - y0)) - log(cos(y0)) = top - bottom for the axis offset
    gives tan(y0) = (e^(top-bottom) - cos b) / sin b, which has a unique
    solution for every 0 < b < pi; no grim reaper arc spans b >= pi, so None
    is returned there.
    """
    if b <= 0:
        raise ValueError(f"profile width must be positive, got {b}")
    if b >= math.pi:
        return None
    delta = top - bottom
    y0 = math.atan((math.exp(delta) - math.cos(b)) / math.sin(b))
    c = bottom - math.log(math.cos(y0))
    return GrimReaper(y0=y0, c=c)


@dataclass(frozen=True)
class SupersolutionReport:
    """Discrete margins m = w'' + (w')^2 + 1 at the interior samples."""

    margins: np.ndarray
    max_margin: float
    tolerance: float
    strict: bool
    width: float

    @property
    def width_below_pi(self) -> bool:
        return self.width < math.pi

    def to_json_dict(self) -> dict:
        return {"max_margin": self.max_margin, "tolerance": self.tolerance,
                "strict": bool(self.strict), "width": self.width,
                "width_below_pi": self.width_below_pi,
                "n_samples": int(self.margins.size) + 2}


def supersolution_check(ys: np.ndarray, ws: np.ndarray,
                        tolerance: Optional[float] = None) -> SupersolutionReport:
    """Classify a uniformly sampled 1D profile by its discrete margin.

    Verdict strict requires every interior margin below -tolerance; the
    default tolerance 10 h^2 max|w''| separates the exactly-critical geodesic
    case (margins O(h^2) of either sign) from genuinely strict supersolutions
    at finite resolution.  Adding a constant to ws changes no margin.
    """
    ys = np.asarray(ys, dtype=float)
    ws = np.asarray(ws, dtype=float)
    if ys.ndim != 1 or ys.shape != ws.shape:
        raise ValueError("ys and ws must be matching 1D arrays")
    if ys.size < 5:
        raise ValueError(f"need at least 5 samples, got {ys.size}")
    steps = np.diff(ys)
    h = float(steps[0])
    if h <= 0 or np.any(np.abs(steps - h) > 1e-9 * max(abs(h), 1.0)):
        raise ValueError("samples must be uniformly spaced and increasing")

    wp = (ws[2:] - ws[:-2]) / (2.0 * h)
    wpp = ((ws[2:] + ws[:-2]) - 2.0 * ws[1:-1]) / (h * h)
    margins = wpp + wp * wp + 1.0
    if tolerance is None:
        tolerance = 10.0 * h * h * float(np.max(np.abs(wpp))) + 1e-12
    max_margin = float(np.max(margins))
    return SupersolutionReport(
        margins=margins, max_margin=max_margin, tolerance=float(tolerance),
        strict=bool(max_margin < -tolerance), width=float(ys[-1] - ys[0]))
