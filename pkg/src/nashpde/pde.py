"""Grid solver for the coupled value system in inverted time.

Both value functions satisfy, in the inverted time variable ``s`` with
``V_i(0, x)`` equal to the terminal payoff,

    dV_i/ds  -  sum_hk a_hk d2V_i/dx_h dx_k  =  p_i . f + h_i ,

where the right side is the player's Hamiltonian at the current feedback
pair.  The physical-time payoff surface is recovered through
``w_i(t, x) = V_i(T - t, x)``; :class:`ValueField` owns that inversion and
the solver reads every time-dependent coefficient at ``t = T - s`` while it
marches in ``s``.

Scheme: backward-Euler diffusion (tridiagonal in one dimension, Douglas
alternating-direction sweeps in two, the mixed second-order term explicit),
first-order upwind advection on the frozen drift sign, explicit source, and
box data clamped to the terminal payoff on the parabolic boundary.  The
frozen-coefficient solve is monotone under the advection time-step bound
``dt |f|_1 / h <= 1``, which is checked against the frozen drift field.

The nonlinear system is solved by freezing feedbacks at the previous
iterate's gradients and repeating the two linear solves until neither the
values nor the gradients move more than the tolerance.  Discontinuous
(bang-bang) feedbacks run through a shrinking-width smoothing schedule;
the solve finishes at the smallest width that still changes the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .feedback import FeedbackResolver, default_resolver, resolve_feedback_batch

__all__ = [
    "Grid", "ValueField", "SolveDiagnostics", "StabilityReport", "ResidualReport",
    "SolverError", "linear_parabolic_solve", "picard_solve",
    "expanding_domain_solve", "residual", "max_principle_check", "growth_check",
]


class SolverError(RuntimeError):
    pass


# ─── grid and fields ─────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform box lattice on [-radius, radius]^dim with time_steps equal
    steps of inverted time on [0, horizon].  nodes_per_axis must be odd so
    the origin is a node."""

    dim: int
    radius: float
    nodes_per_axis: int
    time_steps: int
    horizon: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise SolverError(f"grid supports dim 1 or 2, got {self.dim}")
        if self.radius <= 0.0:
            raise SolverError("radius must be > 0")
        if self.nodes_per_axis < 3 or self.nodes_per_axis % 2 == 0:
            raise SolverError("nodes_per_axis must be odd and >= 3")
        if self.time_steps < 1:
            raise SolverError("time_steps must be >= 1")
        if self.horizon <= 0.0:
            raise SolverError("horizon must be > 0")

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.nodes_per_axis - 1)

    @property
    def dt(self) -> float:
        return self.horizon / self.time_steps

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dim

    def axis(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.nodes_per_axis)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (*shape, dim)."""
        ax = self.axis()
        if self.dim == 1:
            return ax[:, None]
        m1, m2 = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([m1, m2], axis=-1)

    def s_levels(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.time_steps + 1)

    def interior(self) -> tuple[slice, ...]:
        return (slice(1, -1),) * self.dim


def _spatial_gradients(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Central differences inside, one-sided at the box edge, for every time
    level at once; shape (levels, *shape, dim)."""
    comps = [np.gradient(values, grid.h, axis=1 + k, edge_order=1)
             for k in range(grid.dim)]
    return np.stack(comps, axis=-1)


@dataclass(eq=False)
class ValueField:
    """Both players' value surfaces on a grid, stored in inverted time
    (level 0 holds the terminal payoffs).

    Attributes:
        grid: the lattice.
        values: per-player arrays of shape (time_steps + 1, *grid.shape).
        gradients: per-player arrays (time_steps + 1, *grid.shape, dim),
            recomputed from the values, never stored stale.
    """

    grid: Grid
    values: tuple[np.ndarray, np.ndarray]
    gradients: tuple[np.ndarray, np.ndarray]

    @staticmethod
    def from_values(grid: Grid, v1: np.ndarray, v2: np.ndarray) -> "ValueField":
        want = (grid.time_steps + 1,) + grid.shape
        for v in (v1, v2):
            if v.shape != want:
                raise SolverError(f"value array shape {v.shape} != {want}")
        return ValueField(grid, (v1, v2),
                          (_spatial_gradients(grid, v1), _spatial_gradients(grid, v2)))

    def level_of_s(self, s: float) -> int:
        lvl = int(round(s / self.grid.dt))
        return min(max(lvl, 0), self.grid.time_steps)

    # inverted-time accessors -------------------------------------------------

    def value(self, player: int, s: float, x) -> float:
        arr = self.values[player - 1][self.level_of_s(s)]
        return float(_interp(self.grid, arr[..., None],
                             np.asarray(x, float).reshape(1, -1))[0, 0])

    def gradient(self, player: int, s: float, x) -> np.ndarray:
        arr = self.gradients[player - 1][self.level_of_s(s)]
        return _interp(self.grid, arr, np.asarray(x, float).reshape(1, -1))[0]

    # physical-time accessors: the single inversion site t = horizon - s ------

    def value_phys(self, player: int, t: float, x) -> float:
        return self.value(player, self.grid.horizon - t, x)

    def gradient_phys(self, player: int, t: float, x) -> np.ndarray:
        return self.gradient(player, self.grid.horizon - t, x)

    def gradients_at_level(self, level: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized clamped-interpolation read of both players' gradients;
        ``x`` has shape (n, dim), results (n, dim)."""
        return (_interp(self.grid, self.gradients[0][level], x),
                _interp(self.grid, self.gradients[1][level], x))


def _interp(grid: Grid, arr: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of per-node data ``arr`` (*shape, c) at
    points ``x`` (n, dim); coordinates are clamped into the box first."""
    n = grid.nodes_per_axis
    coords = np.clip((x + grid.radius) / grid.h, 0.0, n - 1.0)
    i0 = np.minimum(coords.astype(np.intp), n - 2)
    w = coords - i0
    if grid.dim == 1:
        a0 = arr[i0[:, 0]]
        a1 = arr[i0[:, 0] + 1]
        return a0 + w[:, :1] * (a1 - a0)
    w1 = w[:, 0][:, None]
    w2 = w[:, 1][:, None]
    c00 = arr[i0[:, 0], i0[:, 1]]
    c10 = arr[i0[:, 0] + 1, i0[:, 1]]
    c01 = arr[i0[:, 0], i0[:, 1] + 1]
    c11 = arr[i0[:, 0] + 1, i0[:, 1] + 1]
    return (c00 * (1 - w1) * (1 - w2) + c10 * w1 * (1 - w2)
            + c01 * (1 - w1) * w2 + c11 * w1 * w2)


# ─── linear solve: one player, frozen coefficients ───────────────────────────

def _check_cfl(grid: Grid, drift_field: np.ndarray) -> float:
    speed = np.sum(np.abs(drift_field), axis=-1)
    worst = float(np.max(speed))
    cfl = grid.dt * worst / grid.h
    if cfl > 1.0 + 1e-12:
        flat = int(np.argmax(speed.reshape(speed.shape[0], -1).max(axis=0)))
        node = np.unravel_index(flat, grid.shape)
        coord = grid.nodes()[node]
        raise SolverError(
            f"advection time-step bound violated: dt*|f|_1/h = {cfl:.4g} > 1 "
            f"at node x={np.array2string(coord)} (|f|_1 = {worst:.4g}); "
            f"refine dt or coarsen the drift")
    return cfl


def _upwind(grid: Grid, v: np.ndarray, drift: np.ndarray) -> np.ndarray:
    """First-order upwind f . grad v on interior nodes (zero on the rim);
    forward difference where the drift component is positive."""
    out = np.zeros_like(v)
    inner = grid.interior()
    h = grid.h
    for k in range(grid.dim):
        b = drift[..., k][inner]
        up = (np.roll(v, -1, axis=k)[inner] - v[inner]) / h
        down = (v[inner] - np.roll(v, 1, axis=k)[inner]) / h
        out[inner] += np.maximum(b, 0.0) * up + np.minimum(b, 0.0) * down
    return out


def linear_parabolic_solve(grid: Grid, a_field, drift_field: np.ndarray,
                           source_field: np.ndarray, terminal_data: np.ndarray
                           ) -> np.ndarray:
    """March one player's linear equation with frozen drift and source.

    ``a_field`` is a DiffusionMatrixField (or any object with ``.a(t, x)``);
    it is read at physical time T - s.  ``drift_field`` has shape
    (time_steps + 1, *grid.shape, dim) and ``source_field``
    (time_steps + 1, *grid.shape); level m of both feeds the explicit side
    of the step m -> m+1.  ``terminal_data`` supplies level 0 and the box
    boundary at every level.  Returns values (time_steps + 1, *grid.shape).
    """
    a_of = a_field.a if hasattr(a_field, "a") else a_field
    levels = grid.time_steps + 1
    want_drift = (levels,) + grid.shape + (grid.dim,)
    if drift_field.shape != want_drift:
        raise SolverError(f"drift_field shape {drift_field.shape} != {want_drift}")
    if source_field.shape != (levels,) + grid.shape:
        raise SolverError(
            f"source_field shape {source_field.shape} != {(levels,) + grid.shape}")
    g = np.asarray(terminal_data, dtype=np.float64)
    if g.shape != grid.shape:
        raise SolverError(f"terminal_data shape {g.shape} != {grid.shape}")
    _check_cfl(grid, drift_field)

    nodes = grid.nodes()
    s = grid.s_levels()
    dt = grid.dt
    values = np.empty((levels,) + grid.shape)
    values[0] = g
    step = _step_1d if grid.dim == 1 else _step_2d
    for m in range(grid.time_steps):
        t_implicit = grid.horizon - s[m + 1]  # physical time of the new level
        a = np.asarray(a_of(t_implicit, nodes), dtype=np.float64)
        explicit = values[m] + dt * (_upwind(grid, values[m], drift_field[m])
                                     + source_field[m])
        values[m + 1] = step(grid, a, explicit, values[m], g, dt)
    return values


def _step_1d(grid: Grid, a: np.ndarray, explicit: np.ndarray,
             v_old: np.ndarray, g: np.ndarray, dt: float) -> np.ndarray:
    lam = dt * a[1:-1, 0, 0] / grid.h ** 2
    rhs = explicit[1:-1].copy()
    rhs[0] += lam[0] * g[0]
    rhs[-1] += lam[-1] * g[-1]
    n = rhs.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = -lam[:-1]
    ab[1] = 1.0 + 2.0 * lam
    ab[2, :-1] = -lam[1:]
    out = np.empty_like(g)
    out[0], out[-1] = g[0], g[-1]
    out[1:-1] = solve_banded((1, 1), ab, rhs)
    return out


def _tridiag_lines(lam: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve (I - D) x = rhs line by line; ``lam``/``rhs`` are (lines, n)
    arrays for the interior of each line."""
    out = np.empty_like(rhs)
    n = rhs.shape[1]
    ab = np.zeros((3, n))
    for j in range(rhs.shape[0]):
        ab[0, 1:] = -lam[j, :-1]
        ab[1] = 1.0 + 2.0 * lam[j]
        ab[2, :-1] = -lam[j, 1:]
        out[j] = solve_banded((1, 1), ab, rhs[j])
    return out


def _second_diff(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(v)
    sl = [slice(None)] * v.ndim
    sl[axis] = slice(1, -1)
    lo = [slice(None)] * v.ndim
    lo[axis] = slice(0, -2)
    hi = [slice(None)] * v.ndim
    hi[axis] = slice(2, None)
    out[tuple(sl)] = (v[tuple(hi)] - 2.0 * v[tuple(sl)] + v[tuple(lo)]) / h ** 2
    return out


def _mixed_diff(v: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4.0 * h ** 2)
    return out


def _step_2d(grid: Grid, a: np.ndarray, explicit: np.ndarray,
             v_old: np.ndarray, g: np.ndarray, dt: float) -> np.ndarray:
    """Douglas splitting: x1-implicit sweep, then x2-implicit correction;
    the mixed term rides on the explicit side (its size is limited by
    ellipticity, |a12|^2 < a11 a22)."""
    h = grid.h
    a11 = a[..., 0, 0]
    a22 = a[..., 1, 1]
    a12 = a[..., 0, 1]
    d22 = _second_diff(v_old, 1, h)
    rhs_star = explicit + dt * (a22 * d22 + 2.0 * a12 * _mixed_diff(v_old, h))

    # sweep 1: lines along x1 for each interior x2 column
    lam1 = dt * a11[1:-1, 1:-1] / h ** 2
    rhs1 = rhs_star[1:-1, 1:-1].copy()
    rhs1[0, :] += lam1[0, :] * g[0, 1:-1]
    rhs1[-1, :] += lam1[-1, :] * g[-1, 1:-1]
    star = np.array(np.broadcast_to(g, v_old.shape))
    star[1:-1, 1:-1] = _tridiag_lines(lam1.T, rhs1.T).T

    # sweep 2: remove the explicit a22 guess, lines along x2
    lam2 = dt * a22[1:-1, 1:-1] / h ** 2
    rhs2 = (star - dt * a22 * d22)[1:-1, 1:-1].copy()
    rhs2[:, 0] += lam2[:, 0] * g[1:-1, 0]
    rhs2[:, -1] += lam2[:, -1] * g[1:-1, -1]
    out = np.array(np.broadcast_to(g, v_old.shape))
    out[1:-1, 1:-1] = _tridiag_lines(lam2, rhs2)
    return out


# ─── nonlinear system: frozen-feedback iteration ─────────────────────────────

@dataclass(frozen=True)
class SolveDiagnostics:
    """Convergence record of one nonlinear solve.

    Attributes:
        converged: whether the final smoothing stage met the tolerance.
        iterations_used: linear-solve sweeps across all stages.
        picard_residuals: per-iteration (value, gradient) sup-norm changes.
        stage_starts: index into picard_residuals where each smoothing stage
            begins.
        epsilon_schedule: smoothing widths actually run.
        final_epsilon: width of the stage that produced the returned field.
        max_principle_margin: data bound minus sup |V|, minimum over players
            (NaN for growth-envelope scenarios where the bound is void).
        pde_residual_interior: (sup, mean_abs) of the interior consistency
            residual away from switching bands.
        cfl_number: largest dt |f|_1 / h seen in the frozen drift fields.
    """

    converged: bool
    iterations_used: int
    picard_residuals: tuple
    stage_starts: tuple
    epsilon_schedule: tuple
    final_epsilon: float
    max_principle_margin: float
    pde_residual_interior: tuple
    cfl_number: float


def _terminal_arrays(spec, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    nodes = grid.nodes()
    g1 = np.asarray(spec.terminal_payoff_1(nodes), dtype=np.float64)
    g2 = np.asarray(spec.terminal_payoff_2(nodes), dtype=np.float64)
    return g1, g2


def _phys_times(grid: Grid) -> np.ndarray:
    """Physical times of the stored levels, shaped to broadcast over nodes."""
    t = grid.horizon - grid.s_levels()
    return t.reshape((-1,) + (1,) * grid.dim)


def _frozen_coefficients(spec, grid: Grid, resolver: FeedbackResolver,
                         grads: tuple[np.ndarray, np.ndarray]):
    """Resolve feedbacks at every (level, node) from the given gradients and
    evaluate drift and running payoffs there."""
    nodes = grid.nodes()
    t = _phys_times(grid)
    u1, u2 = resolve_feedback_batch(resolver, spec, t, nodes, grads[0], grads[1])
    drift = np.asarray(spec.drift(t, nodes, u1, u2), dtype=np.float64)
    levels = grid.time_steps + 1
    drift = np.broadcast_to(drift, (levels,) + grid.shape + (grid.dim,))
    src1 = np.broadcast_to(np.asarray(spec.running_payoff_1(t, nodes, u1, u2), float),
                           (levels,) + grid.shape)
    src2 = np.broadcast_to(np.asarray(spec.running_payoff_2(t, nodes, u1, u2), float),
                           (levels,) + grid.shape)
    return np.array(drift), np.array(src1), np.array(src2)


def picard_step(spec, grid: Grid, resolver: FeedbackResolver,
                values: tuple[np.ndarray, np.ndarray],
                grads: tuple[np.ndarray, np.ndarray],
                terminal: tuple[np.ndarray, np.ndarray]):
    """One sweep of the fixed-point map: freeze feedbacks at the given
    gradients, run both decoupled linear solves.  Returns (values, grads,
    cfl)."""
    drift, src1, src2 = _frozen_coefficients(spec, grid, resolver, grads)
    cfl = grid.dt * float(np.max(np.sum(np.abs(drift), axis=-1))) / grid.h
    v1 = linear_parabolic_solve(grid, spec.sigma, drift, src1, terminal[0])
    v2 = linear_parabolic_solve(grid, spec.sigma, drift, src2, terminal[1])
    return (v1, v2), (_spatial_gradients(grid, v1), _spatial_gradients(grid, v2)), cfl


def picard_solve(spec, grid: Grid, resolver: FeedbackResolver,
                 tol: float = 1e-5, max_iter: int = 100,
                 epsilon_schedule: Optional[Sequence[float]] = None
                 ) -> tuple[ValueField, SolveDiagnostics]:
    """Solve the coupled system by frozen-feedback iteration.

    The first iterate is the terminal data copied to every level.  With an
    ``epsilon_schedule`` the whole iteration runs per smoothing width, warm
    starting each stage from the previous one and stopping once an extra
    refinement moves the converged field by less than 10 * tol; the field of
    the last stage is returned together with its width, never a forced
    zero-width resolve.
    """
    if tol <= 0.0:
        raise SolverError("tol must be > 0")
    schedule = list(epsilon_schedule) if epsilon_schedule else [resolver.smoothing_epsilon]
    if any(e < 0 for e in schedule):
        raise SolverError("smoothing widths must be >= 0")

    g1, g2 = _terminal_arrays(spec, grid)
    levels = grid.time_steps + 1
    values = (np.broadcast_to(g1, (levels,) + grid.shape).copy(),
              np.broadcast_to(g2, (levels,) + grid.shape).copy())
    grads = (_spatial_gradients(grid, values[0]), _spatial_gradients(grid, values[1]))

    residuals: list[tuple[float, float]] = []
    stage_starts: list[int] = []
    widths_run: list[float] = []
    worst_cfl = 0.0
    converged = False
    prev_stage_values = None

    for stage, eps in enumerate(schedule):
        stage_res = resolver.with_epsilon(eps)
        stage_starts.append(len(residuals))
        widths_run.append(eps)
        converged = False
        for _ in range(max_iter):
            new_values, new_grads, cfl = picard_step(
                spec, grid, stage_res, values, grads, (g1, g2))
            worst_cfl = max(worst_cfl, cfl)
            value_res = max(float(np.max(np.abs(new_values[i] - values[i])))
                            for i in (0, 1))
            grad_res = max(float(np.max(np.abs(new_grads[i] - grads[i])))
                           for i in (0, 1))
            residuals.append((value_res, grad_res))
            values, grads = new_values, new_grads
            if max(value_res, grad_res) <= tol:
                converged = True
                break
        if prev_stage_values is not None:
            stage_move = max(float(np.max(np.abs(values[i] - prev_stage_values[i])))
                             for i in (0, 1))
            if stage_move < 10.0 * tol:
                break
        prev_stage_values = (values[0].copy(), values[1].copy())

    field = ValueField(grid, values, grads)
    final_eps = widths_run[-1]
    final_resolver = resolver.with_epsilon(final_eps)

    if spec.structure == "affine-unbounded":
        margin = math.nan
    else:
        margin = max_principle_check(spec, field)
    rep = residual(spec, field, final_resolver)
    return field, SolveDiagnostics(
        converged=converged, iterations_used=len(residuals),
        picard_residuals=tuple(residuals), stage_starts=tuple(stage_starts),
        epsilon_schedule=tuple(widths_run), final_epsilon=final_eps,
        max_principle_margin=margin,
        pde_residual_interior=(rep.sup, rep.mean_abs), cfl_number=worst_cfl)


# ─── expanding domains ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class StabilityReport:
    """Domain-truncation study at fixed spacing.

    Attributes:
        radii: actual (spacing-aligned) radii solved.
        core_radius: half-width of the comparison box.
        core_sup_diffs: per consecutive radius pair, per player, the sup
            difference of the value surfaces on shared core nodes.
        growth_constants: per radius, per player, max |V| / (1 + |x|^beta).
        all_converged: every stage met its tolerance.
        diagnostics: per radius, the SolveDiagnostics of that box.
    """

    radii: tuple
    core_radius: float
    core_sup_diffs: tuple
    growth_constants: tuple
    all_converged: bool
    diagnostics: tuple = ()


def expanding_domain_solve(spec, base_grid: Grid, radii: Sequence[float],
                           resolver: FeedbackResolver, tol: float = 1e-5,
                           max_iter: int = 100,
                           epsilon_schedule: Optional[Sequence[float]] = None,
                           core_radius: Optional[float] = None
                           ) -> tuple[ValueField, StabilityReport]:
    """Re-solve on growing boxes at the spacing and time grid of
    ``base_grid`` and record how the core stops moving.  Returns the field
    of the largest box plus the stability report."""
    if len(radii) < 1:
        raise SolverError("radii must name at least one box")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise SolverError(f"radii must be strictly increasing, got {list(radii)}")
    h = base_grid.h
    core = float(core_radius) if core_radius is not None else float(radii[0])

    fields: list[ValueField] = []
    diags: list[SolveDiagnostics] = []
    actual: list[float] = []
    growth: list[tuple[float, float]] = []
    for r in radii:
        half = int(round(r / h))
        if half < 1:
            raise SolverError(f"radius {r} smaller than one spacing {h}")
        grid = Grid(base_grid.dim, half * h, 2 * half + 1,
                    base_grid.time_steps, base_grid.horizon)
        fld, dg = picard_solve(spec, grid, resolver, tol=tol, max_iter=max_iter,
                               epsilon_schedule=epsilon_schedule)
        fields.append(fld)
        diags.append(dg)
        actual.append(grid.radius)
        growth.append(growth_check(spec, fld))

    diffs = []
    for small, big in zip(fields, fields[1:]):
        diffs.append(_core_sup_diff(small, big, core))
    report = StabilityReport(
        radii=tuple(actual), core_radius=core, core_sup_diffs=tuple(diffs),
        growth_constants=tuple(growth),
        all_converged=all(d.converged for d in diags),
        diagnostics=tuple(diags))
    return fields[-1], report


def _core_mask(grid: Grid, core: float) -> np.ndarray:
    ax = grid.axis()
    keep = np.abs(ax) <= core + 1e-9 * grid.h
    if grid.dim == 1:
        return keep
    return keep[:, None] & keep[None, :]


def _core_sup_diff(small: ValueField, big: ValueField, core: float) -> tuple[float, float]:
    # shared nodes: both lattices are integer multiples of the same spacing
    off = int(round((big.grid.radius - small.grid.radius) / small.grid.h))
    mask = _core_mask(small.grid, core)
    out = []
    for i in (0, 1):
        a = small.values[i]
        if small.grid.dim == 1:
            b = big.values[i][:, off:off + small.grid.nodes_per_axis]
        else:
            n = small.grid.nodes_per_axis
            b = big.values[i][:, off:off + n, off:off + n]
        out.append(float(np.max(np.abs((a - b)[:, mask]))))
    return (out[0], out[1])


# ─── diagnostics ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ResidualReport:
    """Interior consistency residual of a solved field.

    ``res`` holds per-player arrays over interior time levels and all nodes
    (rim nodes zero); ``switching_mask`` marks nodes excluded as lying inside
    a player's switching band |p_i . f_i + h_i| < sqrt(h) sup|f_i|; ``sup``
    and ``mean_abs`` are taken off-band over interior nodes only.
    """

    res: tuple[np.ndarray, np.ndarray]
    switching_mask: tuple[np.ndarray, np.ndarray]
    band_width: tuple[float, float]
    sup: float
    mean_abs: float


def _affine_pieces(spec, t, nodes):
    """(f_i, h_i) coefficient surfaces of an affine-structure game."""
    zero = np.zeros(1)
    one = np.ones(1)
    base = np.asarray(spec.drift(t, nodes, zero, zero), float)
    f1 = np.asarray(spec.drift(t, nodes, one, zero), float) - base
    f2 = np.asarray(spec.drift(t, nodes, zero, one), float) - base
    h1 = np.asarray(spec.running_payoff_1(t, nodes, one, zero), float) \
        - np.asarray(spec.running_payoff_1(t, nodes, zero, zero), float)
    h2 = np.asarray(spec.running_payoff_2(t, nodes, zero, one), float) \
        - np.asarray(spec.running_payoff_2(t, nodes, zero, zero), float)
    return (f1, f2), (h1, h2)


def residual(spec, fields: ValueField, resolver: Optional[FeedbackResolver] = None
             ) -> ResidualReport:
    """Measure how well the solved surfaces satisfy the system: centered
    difference in s at interior levels, the solver's spatial stencils, and
    the Hamiltonian evaluated from the stored gradients.  Switching-band
    nodes of bang-bang games are masked out of the norms."""
    if resolver is None:
        resolver = default_resolver(spec)
    grid = fields.grid
    if grid.time_steps < 2:
        raise SolverError("residual needs at least two time steps")
    nodes = grid.nodes()
    t = _phys_times(grid)
    u1, u2 = resolve_feedback_batch(resolver, spec, t, nodes,
                                    fields.gradients[0], fields.gradients[1])
    drift = np.broadcast_to(np.asarray(spec.drift(t, nodes, u1, u2), float),
                            (grid.time_steps + 1,) + grid.shape + (grid.dim,))
    a = np.asarray(spec.sigma.a(t, nodes), dtype=np.float64)
    a = np.broadcast_to(a, (grid.time_steps + 1,) + grid.shape + (grid.dim, grid.dim))

    res_arrays = []
    masks = []
    widths = []
    inner = (slice(1, -1),) + grid.interior()
    affine = spec.structure in ("affine-bang-bang", "affine-unbounded")
    if affine:
        f_pieces, h_pieces = _affine_pieces(spec, t, nodes)
    for i, (values, grads, src_fn) in enumerate((
            (fields.values[0], fields.gradients[0], spec.running_payoff_1),
            (fields.values[1], fields.gradients[1], spec.running_payoff_2))):
        source = np.broadcast_to(np.asarray(src_fn(t, nodes, u1, u2), float),
                                 (grid.time_steps + 1,) + grid.shape)
        ham = np.einsum("...n,...n->...", grads, drift) + source
        diffusion = np.zeros_like(values)
        for hk in range(grid.dim):
            diffusion += a[..., hk, hk] * _second_diff(values, 1 + hk, grid.h)
        if grid.dim == 2:
            mixed = np.stack([_mixed_diff(values[m], grid.h)
                              for m in range(values.shape[0])])
            diffusion += 2.0 * a[..., 0, 1] * mixed
        ds = (values[2:] - values[:-2]) / (2.0 * grid.dt)
        res = np.zeros_like(values[1:-1])
        res[(slice(None),) + grid.interior()] = \
            (ds - diffusion[1:-1] - ham[1:-1])[(slice(None),) + grid.interior()]
        res_arrays.append(res)

        if affine:
            fi = f_pieces[i]
            hi = h_pieces[i]
            eta = np.einsum("...n,...n->...", grads, np.broadcast_to(
                fi, (grid.time_steps + 1,) + grid.shape + (grid.dim,))) + hi
            width = math.sqrt(grid.h) * float(np.max(np.abs(fi)))
            mask = np.abs(eta[1:-1]) < width
        else:
            width = 0.0
            mask = np.zeros_like(res, dtype=bool)
        masks.append(mask)
        widths.append(width)

    keep = []
    for res, mask in zip(res_arrays, masks):
        sel = np.zeros_like(res, dtype=bool)
        sel[(slice(None),) + grid.interior()] = True
        sel &= ~mask
        keep.append(res[sel])
    flat = np.concatenate(keep) if keep else np.zeros(0)
    sup = float(np.max(np.abs(flat))) if flat.size else 0.0
    mean_abs = float(np.mean(np.abs(flat))) if flat.size else 0.0
    return ResidualReport(res=(res_arrays[0], res_arrays[1]),
                          switching_mask=(masks[0], masks[1]),
                          band_width=(widths[0], widths[1]),
                          sup=sup, mean_abs=mean_abs)


def max_principle_check(spec, fields: ValueField, control_grid_points: int = 33
                        ) -> float:
    """Margin of sup|V_i| <= sup|g_i| + T sup|h_i| over the lattice, minimum
    across players; running-payoff sups scan the control grid."""
    if spec.structure == "affine-unbounded":
        raise SolverError(
            "sup bound needs bounded data; use growth_check for growth-envelope games")
    grid = fields.grid
    nodes = grid.nodes()
    t = _phys_times(grid)
    margins = []
    for player in (1, 2):
        g = np.asarray(spec.terminal_payoff(player)(nodes), dtype=np.float64)
        h_sup = _running_sup(spec, player, t, nodes, control_grid_points)
        bound = float(np.max(np.abs(g))) + grid.horizon * h_sup
        margins.append(bound - float(np.max(np.abs(fields.values[player - 1]))))
    return min(margins)


def _running_sup(spec, player: int, t, nodes, points: int) -> float:
    own = spec.control_set_1 if player == 1 else spec.control_set_2
    other = spec.control_set_2 if player == 1 else spec.control_set_1
    payoff = spec.running_payoff(player)
    own_grid = own.grid(points)
    if spec.structure == "general":
        other_grid = other.grid(points)
    else:
        other_grid = other.midpoint()[None, :]  # own-control dependence only
    sup = 0.0
    for j in range(own_grid.shape[0]):
        for k in range(other_grid.shape[0]):
            u1 = own_grid[j] if player == 1 else other_grid[k]
            u2 = other_grid[k] if player == 1 else own_grid[j]
            sup = max(sup, float(np.max(np.abs(payoff(t, nodes, u1, u2)))))
    return sup


def growth_check(spec, fields: ValueField) -> tuple[float, float]:
    """Fitted constants of |V_i| <= C (1 + |x|^beta) over the lattice."""
    grid = fields.grid
    absx = np.linalg.norm(grid.nodes(), axis=-1)
    envelope = 1.0 + absx ** spec.growth_exponent
    return tuple(float(np.max(np.abs(fields.values[i]) / envelope)) for i in (0, 1))
