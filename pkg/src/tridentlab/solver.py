"""Damped Newton solver for the discrete translator equation.

A single solve imposes finite Dirichlet data on the bottom and top rows and
drives the interior residual to zero with Newton steps, Armijo backtracking
on ||R||_2^2 (damping factor 0.5, minimum step 2^-20) and direct sparse
factorizations of the exact linearization.  When the line search stalls --
which is the expected outcome in the degenerate regime, where the strip is
too wide for a solution and the Newton path ends at a fold -- the solver
falls back to pseudo-transient continuation: implicit Euler steps on the
parabolic flow u_t = R(u) with an adaptive time step.  That flow strictly
decreases the weighted area, so in the degenerate regime the returned best
iterate tracks the physical collapse toward the vertical wall instead of
freezing at the fold; the report still says converged=False there.

The infinite boundary values of the trident problem are reached by cap
continuation: solve with the data capped at +-cap_1, then warm-start each
larger cap from the previous solution.  With data that is nondecreasing in
the cap (the alpha variant) the comparison principle makes the iterates
nondecreasing as well, which is checked and reported.

Everything here is deterministic: identical inputs produce bit-identical
reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid import Grid, ScalarField
from .operators import linearize, residual

DEFAULT_CAPS = (4.0, 8.0, 12.0, 16.0)
MIN_STEP = 2.0 ** -20
ARMIJO_SLOPE = 1e-4


class LinearSolveFailure(RuntimeError):
    """Newton linear system was singular or produced non-finite values."""


def representable_cap(grid: Grid, margin: float = 0.5) -> float:
    """Largest boundary cap the grid can hold as a resolved layer.

    The infinite boundary values are approached logarithmically, so the value
    one row in from a capped edge saturates near -log(hy) + O(1); data beyond
    that drops across a single cell, where no centered-stencil solution
    exists (the exact profile's discrete residual there is O(cap^2/h^2)).
    Solving with caps above this ceiling adds nothing to the graph: the
    excess wall is sub-cell and belongs in the weighted-area tail term.
    """
    return float(-np.log(grid.hy) + margin)


def validate_caps(caps: Sequence[float]) -> tuple:
    caps = tuple(float(c) for c in caps)
    if not caps:
        raise ValueError("cap schedule must be nonempty")
    if any(c <= 0 for c in caps) or any(b <= a for a, b in zip(caps, caps[1:])):
        raise ValueError(f"cap schedule must be positive and strictly increasing, got {caps}")
    return caps


@dataclass(frozen=True)
class BoundaryData:
    """Finite Dirichlet data on the bottom (y=0) and top (y=b) rows."""

    bottom: np.ndarray
    top: np.ndarray

    def __post_init__(self):
        bot = np.asarray(self.bottom, dtype=np.float64).copy()
        top = np.asarray(self.top, dtype=np.float64).copy()
        if bot.ndim != 1 or top.shape != bot.shape:
            raise ValueError("bottom and top must be matching 1D arrays")
        if not (np.all(np.isfinite(bot)) and np.all(np.isfinite(top))):
            raise ValueError("boundary data must be finite everywhere")
        bot.setflags(write=False)
        top.setflags(write=False)
        object.__setattr__(self, "bottom", bot)
        object.__setattr__(self, "top", top)

    def __le__(self, other: "BoundaryData") -> bool:
        return bool(np.all(self.bottom <= other.bottom)
                    and np.all(self.top <= other.top))


def constant_boundary(grid: Grid, bottom: float = 0.0, top: float = 0.0) -> BoundaryData:
    return BoundaryData(np.full(grid.nx, float(bottom)),
                        np.full(grid.nx, float(top)))


BLEND_FRAC = 0.15


def _ramped_bottom(grid: Grid, n_value: float, p_value: float,
                   blend_frac: float) -> np.ndarray:
    """Bottom-row data: n_value on N, p_value on P, linear corner ramps.

    The ramp half-width is blend_frac * a (at least one cell), so the corner
    fan the data opens is a fixed physical feature the grid resolves; a jump
    confined to single cells would put the fan's curvature at 1/h^2 and make
    the corner cells discretely inconsistent at every resolution.  The corner
    nodes themselves sit at the midpoint of the ramp, i.e. they carry the
    average of the two adjacent segment values.
    """
    half = grid.nx // 2
    w = min(max(blend_frac * grid.a, grid.hx), 0.45 * grid.a)
    xs = grid.xs
    bottom = np.where(grid.boundary_mask[0] == 1, p_value, n_value).astype(float)
    # ramp centred at the corner x = 0 (N for x < 0, P for x > 0)
    ramp = np.abs(xs) <= w
    bottom[ramp] = n_value + (p_value - n_value) * (xs[ramp] + w) / (2.0 * w)
    # ramp centred at the identified corner x = +-a (P for x just below a,
    # N for x just above -a)
    d = grid.a - np.abs(xs)
    ramp = d <= w
    bottom[ramp] = n_value + (p_value - n_value) * (w + np.sign(xs[ramp]) * d[ramp]) / (2.0 * w)
    bottom[0] = 0.5 * (n_value + p_value)
    bottom[half] = 0.5 * (n_value + p_value)
    return bottom


def trident_boundary(grid: Grid, cap: float,
                     blend_frac: float = BLEND_FRAC) -> BoundaryData:
    """+cap on the bottom-P segment, -cap on bottom-N and on the whole top.

    Corner jumps are interpolated linearly across a blend_frac * a ramp; the
    corner nodes carry the average of their two segment values (here 0).
    """
    bottom = _ramped_bottom(grid, -float(cap), +float(cap), blend_frac)
    return BoundaryData(bottom, np.full(grid.nx, -float(cap)))


def alpha_boundary(grid: Grid, cap: float,
                   blend_frac: float = BLEND_FRAC) -> BoundaryData:
    """+cap on bottom-P, 0 on bottom-N and the top: the width-criterion variant.

    The data is nonnegative and nondecreasing in cap, so the solutions are
    nonnegative and increase monotonically along the cap schedule.
    """
    bottom = _ramped_bottom(grid, 0.0, float(cap), blend_frac)
    return BoundaryData(bottom, np.zeros(grid.nx))


def reaper_trace_boundary(grid: Grid, reaper) -> BoundaryData:
    """Sample a grim reaper's boundary values on the two horizontal rows."""
    return BoundaryData(np.full(grid.nx, float(reaper(grid.ys[0]))),
                        np.full(grid.nx, float(reaper(grid.ys[-1]))))


def apply_boundary(values: np.ndarray, bd: BoundaryData) -> np.ndarray:
    out = np.array(values, dtype=np.float64, copy=True)
    out[0, :] = bd.bottom
    out[-1, :] = bd.top
    return out


def column_profile_init(grid: Grid, bd: BoundaryData) -> Optional[ScalarField]:
    """Exact 1D profile fitted to the data of each column (None if b >= pi).

    Column i gets the x-independent solution log(cos(y - y0_i)) + c_i through
    its two boundary values.  The result already opens the logarithmic
    boundary fans, so Newton starts inside the physical branch's basin
    instead of having to build the layers from a flat state.
    """
    b = grid.b
    if b >= math.pi:
        return None
    delta = bd.top - bd.bottom
    y0 = np.arctan((np.exp(delta) - math.cos(b)) / math.sin(b))
    c = bd.bottom - np.log(np.cos(y0))
    vals = np.log(np.cos(grid.ys[:, None] - y0[None, :])) + c[None, :]
    return ScalarField(grid, vals)


@dataclass(frozen=True)
class StageTrace:
    """Diagnostics for one stage of a cap continuation."""

    cap: float                              # cap actually solved (after clamping)
    converged: bool
    iterations: int
    final_residual: float
    indicator: float
    min_increment: Optional[float] = None   # min over interior of u_k - u_{k-1}
    bootstrap: bool = False                 # warm-up sub-stage below the schedule
    cap_requested: Optional[float] = None   # schedule value before clamping

    def to_json_dict(self) -> dict:
        return {"cap": self.cap, "converged": bool(self.converged),
                "iterations": self.iterations,
                "final_residual": self.final_residual,
                "indicator": self.indicator,
                "min_increment": self.min_increment,
                "bootstrap": self.bootstrap,
                "cap_requested": self.cap_requested}


@dataclass(frozen=True)
class SolveReport:
    """Converged field plus Newton and continuation diagnostics."""

    solution: ScalarField
    converged: bool
    iterations: int
    final_residual: float
    tol: float
    damping_history: tuple
    residual_history: tuple
    stages: tuple = ()
    failed_stage: Optional[int] = None
    notes: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "tol": self.tol,
            "damping_history": list(self.damping_history),
            "residual_history": list(self.residual_history),
            "stages": [s.to_json_dict() for s in self.stages],
            "failed_stage": self.failed_stage,
            "notes": list(self.notes),
        }


def _interior_mask_diag(grid: Grid) -> sp.csr_matrix:
    d = np.zeros(grid.nx * grid.ny)
    d[:grid.nx] = 1.0
    d[-grid.nx:] = 1.0
    return sp.diags(d).tocsr()


def _factor(mat) -> "sp.linalg.SuperLU":
    try:
        return splu(mat.tocsc())
    except RuntimeError as exc:
        raise LinearSolveFailure(f"sparse factorization failed: {exc}") from exc


def solve_bvp(grid: Grid, bd: BoundaryData,
              init: Optional[ScalarField] = None,
              tol: float = 1e-6, max_iter: int = 60,
              watch_node: Optional[tuple] = None,
              watch_ceiling: Optional[float] = None,
              floor: Optional[np.ndarray] = None) -> SolveReport:
    """Damped Newton solve with the given finite boundary data.

    Returns the best iterate with converged=False when the iteration budget
    runs out (no exception: degenerate regimes are expected and reported).
    Raises LinearSolveFailure only on a singular or non-finite linear system.

    watch_node=(i, j) names a probe node; iteration also stops (unconverged)
    when the probe value exceeds watch_ceiling (used to halt the degenerate
    ascent at the grid's representable height), or when the residual sits at
    a floor while the whole field stands still.

    floor, if given, is a lower bound applied to every accepted iterate.  In
    monotone continuations the comparison principle orders the solutions, so
    flooring at (previous stage - slack) is harmless for the target yet
    blocks escapes to the spurious decoupled branch, which lies far below.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if bd.bottom.size != grid.nx:
        raise ValueError("boundary data does not match the grid")

    notes = []
    if grid.b >= math.pi:
        notes.append("b >= pi: no grim reaper upper barrier, solve may degenerate")

    if init is None:
        v = np.zeros((grid.ny, grid.nx))
    else:
        v = init.values
    v = apply_boundary(v, bd)
    if floor is not None:
        v[1:-1, :] = np.maximum(v[1:-1, :], floor[1:-1, :])

    eye_bd = _interior_mask_diag(grid)
    eye = sp.identity(grid.nx * grid.ny, format="csr")
    damping = []
    res_hist = []
    watch_hist = []
    snapshots = [v.copy()]

    def clip_floor(values):
        if floor is None:
            return values
        values[1:-1, :] = np.maximum(values[1:-1, :], floor[1:-1, :])
        return values

    def rmax_and_vec(values):
        R = residual(ScalarField(grid, values)).values
        return float(np.max(np.abs(R[1:-1, :]))), R

    def watch_value(values):
        if watch_node is None:
            return 0.0
        i, j = watch_node
        return float(values[j, i])

    rmax, R = rmax_and_vec(v)
    res_hist.append(rmax)
    watch_hist.append(watch_value(v))
    it = 0
    converged = rmax <= tol
    transient = False   # pseudo-transient fallback engaged
    dt = None

    if (watch_ceiling is not None and watch_node is not None
            and watch_hist[0] >= watch_ceiling):
        notes.append("watch value already at ceiling; nothing to do")
        max_iter = 0

    while not converged and it < max_iter:
        L = linearize(ScalarField(grid, v))
        accepted = False

        if not transient:
            lu = _factor(L + eye_bd)
            delta = lu.solve(-R.ravel())
            if not np.all(np.isfinite(delta)):
                raise LinearSolveFailure("Newton step contains non-finite values")
            delta = delta.reshape(grid.ny, grid.nx)
            delta[0, :] = 0.0
            delta[-1, :] = 0.0

            phi0 = float(np.sum(R[1:-1, :] ** 2))
            lam = 1.0
            while lam >= MIN_STEP:
                vt = clip_floor(v + lam * delta)
                rmax_t, Rt = rmax_and_vec(vt)
                phit = float(np.sum(Rt[1:-1, :] ** 2))
                if np.isfinite(phit) and phit <= (1.0 - ARMIJO_SLOPE * lam) * phi0:
                    v, R, rmax = vt, Rt, rmax_t
                    accepted = True
                    damping.append(lam)
                    break
                lam *= 0.5
            if not accepted:
                # Newton path ended (fold or rounding floor): follow the flow.
                transient = True
                dt = min(0.25, 1.0 / (1.0 + rmax))
                notes.append(f"line search stalled at iteration {it + 1}; "
                             "switching to pseudo-transient steps")

        if transient:
            # implicit Euler step on u_t = R(u):  (I/dt - L) delta = R.
            # dt stays bounded so the iterate tracks physical flow states
            # (the degenerate ascent) instead of jumping to fold garbage;
            # the flow is area-monotone, not residual-monotone, so mild
            # residual growth is accepted.
            while dt >= 1e-14:
                lu = _factor(eye.multiply(1.0 / dt) - L + eye_bd)
                delta = lu.solve(R.ravel())
                if np.all(np.isfinite(delta)):
                    delta = delta.reshape(grid.ny, grid.nx)
                    delta[0, :] = 0.0
                    delta[-1, :] = 0.0
                    vt = clip_floor(v + delta)
                    rmax_t, Rt = rmax_and_vec(vt)
                    if np.isfinite(rmax_t) and rmax_t <= 10.0 * rmax:
                        v, R, rmax = vt, Rt, rmax_t
                        accepted = True
                        dt = min(2.0 * dt, 0.5)
                        damping.append(-dt)   # negative marks a transient step
                        break
                dt *= 0.25
            if not accepted:
                notes.append(f"pseudo-transient step collapsed at iteration {it + 1}")
                it += 1
                break

        it += 1
        res_hist.append(rmax)
        watch_hist.append(watch_value(v))
        snapshots.append(v.copy())
        if len(snapshots) > 12:
            snapshots.pop(0)
        converged = rmax <= tol

        if not converged:
            if (watch_ceiling is not None and watch_node is not None
                    and watch_hist[-1] >= watch_ceiling):
                notes.append(f"watch value reached ceiling {watch_ceiling:.3f} "
                             f"at iteration {it}")
                break
            if it >= 12 and len(snapshots) == 12:
                recent = min(res_hist[-6:])
                earlier = min(res_hist[-12:-6])
                motion = float(np.max(np.abs(v - snapshots[0])))
                if recent > 0.95 * earlier and motion < 1e-3:
                    notes.append(f"stagnation at iteration {it}: residual "
                                 "floor with a motionless field")
                    break

    if not converged and it >= max_iter:
        notes.append(f"iteration cap {max_iter} reached")

    return SolveReport(solution=ScalarField(grid, v), converged=converged,
                       iterations=it, final_residual=rmax, tol=tol,
                       damping_history=tuple(damping),
                       residual_history=tuple(res_hist),
                       notes=tuple(notes))


PATTERNS = {"trident": trident_boundary, "alpha": alpha_boundary}


def cap_continuation(grid: Grid, pattern, schedule: Sequence[float],
                     tol: float = 1e-6, max_iter: int = 60,
                     indicator_xy: Optional[tuple] = None,
                     stop_on_failure: bool = False,
                     bootstrap: bool = True,
                     clamp: Optional[float] = None,
                     indicator_ceiling: Optional[float] = None,
                     init: Optional[ScalarField] = None,
                     monotone_floor: Optional[bool] = None) -> SolveReport:
    """Solve along an increasing cap schedule, warm-starting each stage.

    pattern is "trident", "alpha", or a callable (grid, cap) -> BoundaryData.
    The indicator (default: the value at the node nearest (-a/2, b/2)) and
    the minimum interior increment between consecutive stages are recorded
    per stage; monotonicity of the minimum increment is the discrete trace of
    the comparison-principle ordering when the data is nondecreasing in cap.

    bootstrap=True (default) prepends warm-up solves at cap_1/8, cap_1/4 and
    cap_1/2 before the schedule proper.  Starting Newton flat at a full-size
    cap can land on a spurious discrete branch in which the capped data
    collapses into a single-cell numerical layer instead of opening the
    logarithmic fan the continuum solution has; marching the cap up from
    small values keeps the warm-start path on the physical branch.  The
    warm-up stages are marked bootstrap in the trace and do not count in
    failed_stage indexing.

    clamp (typically representable_cap(grid)) limits the cap actually written
    into the boundary data; requested schedule values are recorded alongside.
    indicator_ceiling stops a stage once the indicator climbs past it, which
    bounds the degenerate ascent at the grid's representable height.

    Stages are initialized with a profile-delta warm start: the previous
    solution plus the change in the fitted per-column 1D profiles, which
    updates the boundary layers analytically and carries the 2D corner
    structure over unchanged.  For the alpha pattern (data nondecreasing in
    cap) each stage is also floored at the previous solution minus a small
    slack, the discrete trace of the comparison-principle ordering; override
    with monotone_floor.

    The index of the first schedule stage that fails to converge is reported
    in failed_stage.  By default later stages still run, warm-started from
    the best iterate (the degenerate regime never converges but its final
    iterate is the measurement the width criterion needs);
    stop_on_failure=True ends the continuation at the failing stage instead.
    """
    schedule = validate_caps(schedule)
    if callable(pattern):
        make_bd = pattern
    else:
        try:
            make_bd = PATTERNS[pattern]
        except KeyError:
            raise ValueError(f"unknown boundary pattern {pattern!r}") from None

    if indicator_xy is None:
        indicator_xy = (-grid.a / 2.0, grid.b / 2.0)
    i_ind = grid.column_at(indicator_xy[0])
    j_ind = grid.row_at(indicator_xy[1])

    if monotone_floor is None:
        monotone_floor = pattern == "alpha"

    stage_list = []
    if bootstrap:
        stage_list = [(schedule[0] / 8.0, True), (schedule[0] / 4.0, True),
                      (schedule[0] / 2.0, True)]
    stage_list.extend((cap, False) for cap in schedule)

    stages = []
    damping = []
    res_hist = []
    notes = []
    total_iters = 0
    prev = init
    base_prev = None
    report = None
    failed_stage = None
    k_sched = 0

    for cap_req, is_boot in stage_list:
        cap = cap_req if clamp is None else min(cap_req, clamp)
        bd = make_bd(grid, cap)
        base = column_profile_init(grid, bd)
        if prev is None:
            stage_init = base
        elif base is not None and base_prev is not None:
            stage_init = ScalarField(
                grid, prev.values + (base.values - base_prev.values))
        else:
            stage_init = prev
        floor_arr = None
        if monotone_floor and prev is not None:
            floor_arr = prev.values - 0.5
        report = solve_bvp(grid, bd, init=stage_init, tol=tol,
                           max_iter=max_iter, watch_node=(i_ind, j_ind),
                           watch_ceiling=indicator_ceiling, floor=floor_arr)
        total_iters += report.iterations
        damping.extend(report.damping_history)
        res_hist.extend(report.residual_history)
        notes.extend(f"cap {cap:g}: {n}" for n in report.notes)
        u = report.solution
        min_inc = None
        if prev is not None:
            min_inc = float(np.min(u.values[1:-1, :] - prev.values[1:-1, :]))
        stages.append(StageTrace(cap=cap, converged=report.converged,
                                 iterations=report.iterations,
                                 final_residual=report.final_residual,
                                 indicator=float(u.values[j_ind, i_ind]),
                                 min_increment=min_inc, bootstrap=is_boot,
                                 cap_requested=cap_req))
        if not report.converged and not is_boot and failed_stage is None:
            failed_stage = k_sched
            notes.append(f"first unconverged stage: {k_sched} (cap {cap:g})")
            if stop_on_failure:
                break
        if not is_boot:
            k_sched += 1
        prev = u
        base_prev = base

    return SolveReport(solution=report.solution,
                       converged=failed_stage is None and report.converged,
                       iterations=total_iters,
                       final_residual=report.final_residual, tol=tol,
                       damping_history=tuple(damping),
                       residual_history=tuple(res_hist),
                       stages=tuple(stages), failed_stage=failed_stage,
                       notes=tuple(notes))
