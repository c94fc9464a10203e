"""Hamiltonians and feedback-control resolution.

Player ``i``'s Hamiltonian is ``H_i(t, x, p, u1, u2) = p . f(t, x, u1, u2)
+ h_i(t, x, u1, u2)`` with ``p`` the gradient of that player's value
function.  A feedback pair ``(u1*, u2*)`` is consistent when each player's
control maximizes their own Hamiltonian while the other's choice is held
fixed; :func:`check_gic` samples that condition, :func:`resolve_feedback`
produces candidate pairs by one of three modes:

* ``closed-form``   stored formulas, Heaviside steps smoothed at the
                    resolver's epsilon,
* ``separated-argmax``  per-player brute force over a control grid (valid
                    when cross terms are additively separated),
* ``best-response`` alternating argmax sweeps from the box midpoints.

Everything here broadcasts: ``x`` and ``p`` carry the state dimension on the
last axis, controls carry their own dimension on the last axis, and any
leading batch shape is shared.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "FeedbackResolver", "GicReport", "ResolveError",
    "smoothed_heaviside", "hamiltonian", "resolve_feedback",
    "resolve_feedback_batch", "check_gic", "default_resolver",
]


class ResolveError(ValueError):
    """Raised when a feedback pair cannot be produced; ``cycle`` carries the
    visited control pairs when best-response fails to reach a fixed point."""

    def __init__(self, message: str, cycle: list | None = None):
        super().__init__(message)
        self.cycle = cycle or []


def smoothed_heaviside(eta, eps):
    """Step selection ``1 if eta > 0, 0 if eta < 0`` with the midpoint value
    1/2 on the switching set; for ``eps > 0`` the jump is replaced by the
    piecewise-linear ramp ``clamp((eta + eps) / (2 eps), 0, 1)``."""
    if eps < 0.0:
        raise ValueError(f"smoothing width must be >= 0, got {eps}")
    eta = np.asarray(eta, dtype=np.float64)
    if eps == 0.0:
        out = np.where(eta > 0.0, 1.0, np.where(eta < 0.0, 0.0, 0.5))
    else:
        out = np.clip((eta + eps) / (2.0 * eps), 0.0, 1.0)
    return out if out.ndim else np.float64(out)


# ─── Hamiltonian ─────────────────────────────────────────────────────────────

def _dot(p, f):
    return np.einsum("...n,...n->...", np.asarray(p, float), np.asarray(f, float))


def hamiltonian(spec, player: int, t, x, p, u1, u2):
    """``p . f + h_player`` for one player, broadcast over any batch shape.

    ``x`` and ``p`` may be plain scalars when the state is one-dimensional;
    controls likewise carry their own last axis (or none when scalar)."""
    if player not in (1, 2):
        raise ValueError(f"player must be 1 or 2, got {player}")
    x = _ensure_last_axis(x, spec.dim_x)
    p = _ensure_last_axis(p, spec.dim_x)
    u1 = _ensure_last_axis(u1, spec.control_set_1.dim)
    u2 = _ensure_last_axis(u2, spec.control_set_2.dim)
    _require_in_box("u1", spec.control_set_1, u1)
    _require_in_box("u2", spec.control_set_2, u2)
    f = spec.drift(t, x, u1, u2)
    h = spec.running_payoff_1(t, x, u1, u2) if player == 1 else spec.running_payoff_2(t, x, u1, u2)
    out = _dot(p, f) + h
    return float(out) if np.ndim(out) == 0 else out


def _require_in_box(name: str, control_set, u: np.ndarray, tol: float = 1e-9) -> None:
    low = np.any(u < control_set.lower - tol, axis=-1)
    high = np.any(u > control_set.upper + tol, axis=-1)
    bad = low | high
    if np.any(bad):
        offender = u.reshape(-1, u.shape[-1])[int(np.argmax(bad.reshape(-1)))]
        raise ResolveError(
            f"{name}={np.array2string(offender)} lies outside its control set "
            f"[{np.array2string(control_set.lower)}, {np.array2string(control_set.upper)}]")


def _ensure_last_axis(arr, k: int) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 0:
        if k != 1:
            raise ValueError(f"scalar given where a length-{k} vector is needed")
        return arr.reshape(1)
    if arr.shape[-1] != k:
        raise ValueError(f"last axis must have length {k}, got shape {arr.shape}")
    return arr


# ─── resolver ────────────────────────────────────────────────────────────────

_MODES = ("closed-form", "separated-argmax", "best-response")


@dataclass(frozen=True)
class FeedbackResolver:
    """How candidate feedback pairs are produced.

    Attributes:
        mode: one of ``closed-form``, ``separated-argmax``, ``best-response``.
        smoothing_epsilon: ramp half-width routed into stored Heaviside
            formulas; ignored by the argmax modes.
        control_grids: per-player arrays of shape (points, control_dim) used
            by the argmax modes and by deviation sampling.
        max_br_iterations: sweep cap for best-response before the search is
            declared cyclic.
        tie_break: argmax tie policy; only ``lowest-index`` is implemented.
    """

    mode: str
    smoothing_epsilon: float = 0.0
    control_grids: tuple[np.ndarray, np.ndarray] = field(default=())  # type: ignore[assignment]
    max_br_iterations: int = 64
    tie_break: str = "lowest-index"

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown resolver mode {self.mode!r}; pick one of {_MODES}")
        if self.smoothing_epsilon < 0.0:
            raise ValueError("smoothing_epsilon must be >= 0")
        if self.tie_break != "lowest-index":
            raise ValueError(f"unsupported tie_break {self.tie_break!r}")

    @staticmethod
    def for_spec(spec, mode: str = "closed-form", smoothing_epsilon: float = 0.0,
                 grid_points: int = 33, max_br_iterations: int = 64) -> "FeedbackResolver":
        grids = (spec.control_set_1.grid(grid_points), spec.control_set_2.grid(grid_points))
        return FeedbackResolver(mode=mode, smoothing_epsilon=smoothing_epsilon,
                                control_grids=grids, max_br_iterations=max_br_iterations)

    def with_epsilon(self, eps: float) -> "FeedbackResolver":
        return replace(self, smoothing_epsilon=eps)

    def heav(self) -> Callable:
        eps = self.smoothing_epsilon
        fn = lambda eta: smoothed_heaviside(eta, eps)
        fn.epsilon = eps  # lets closed-form bodies read the active width
        return fn


def default_resolver(spec, smoothing_epsilon: float = 0.0,
                     grid_points: int = 33) -> FeedbackResolver:
    """Most informative mode the game supports: stored closed form first,
    then separated argmax, then the coupled best-response search."""
    if getattr(spec, "feedback_closed_form", None) is not None:
        mode = "closed-form"
    elif getattr(spec, "structure", "general") != "general":
        mode = "separated-argmax"
    else:
        mode = "best-response"
    return FeedbackResolver.for_spec(spec, mode=mode,
                                     smoothing_epsilon=smoothing_epsilon,
                                     grid_points=grid_points)


def resolve_feedback(resolver: FeedbackResolver, spec, t, x, p1, p2):
    """Feedback pair at a single point.  Returns floats for scalar controls,
    1-d arrays otherwise."""
    x = _ensure_last_axis(x, spec.dim_x)
    p1 = _ensure_last_axis(p1, spec.dim_x)
    p2 = _ensure_last_axis(p2, spec.dim_x)
    u1, u2 = resolve_feedback_batch(resolver, spec, t, x, p1, p2)
    u1 = u1.reshape(spec.control_set_1.dim)
    u2 = u2.reshape(spec.control_set_2.dim)
    out1 = float(u1[0]) if u1.size == 1 else u1
    out2 = float(u2[0]) if u2.size == 1 else u2
    return out1, out2


def resolve_feedback_batch(resolver: FeedbackResolver, spec, t, x, p1, p2):
    """Vectorized feedback pair; ``x``, ``p1``, ``p2`` are (..., dim) arrays
    sharing a batch shape, the result is a pair of (..., control_dim) arrays
    clipped into the admissible boxes."""
    x = np.asarray(x, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    batch = np.broadcast_shapes(x.shape[:-1], p1.shape[:-1], p2.shape[:-1], np.shape(t))
    if resolver.mode == "closed-form":
        pair = getattr(spec, "feedback_closed_form", None)
        if pair is None:
            raise ResolveError("closed-form mode needs feedback_closed_form on the game spec")
        heav = resolver.heav()
        u1 = _shape_control(pair[0](t, x, p1, p2, heav), batch, spec.control_set_1.dim)
        u2 = _shape_control(pair[1](t, x, p1, p2, heav), batch, spec.control_set_2.dim)
    elif resolver.mode == "separated-argmax":
        if getattr(spec, "structure", "general") == "general":
            raise ResolveError(
                "separated-argmax needs separated or affine structure; use best-response")
        mid1 = spec.control_set_1.midpoint()
        mid2 = spec.control_set_2.midpoint()
        u1 = _argmax_own(resolver, spec, 1, t, x, p1, resolver.control_grids[0], mid2)
        u2 = _argmax_own(resolver, spec, 2, t, x, p2, resolver.control_grids[1], mid1)
    else:
        u1, u2 = _best_response(resolver, spec, t, x, p1, p2)
    u1 = np.clip(u1, spec.control_set_1.lower, spec.control_set_1.upper)
    u2 = np.clip(u2, spec.control_set_2.lower, spec.control_set_2.upper)
    return u1, u2


def _shape_control(out, batch_shape: tuple, k: int) -> np.ndarray:
    # closed forms return batch-shaped values for scalar controls, or an
    # explicit trailing control axis otherwise
    out = np.asarray(out, dtype=np.float64)
    if k == 1:
        out = np.broadcast_to(out, batch_shape)[..., None]
    else:
        out = np.broadcast_to(out, batch_shape + (k,))
    return np.array(out)


def _ham_batch(spec, player: int, t, x, p, u1, u2):
    f = spec.drift(t, x, u1, u2)
    h = spec.running_payoff_1(t, x, u1, u2) if player == 1 else spec.running_payoff_2(t, x, u1, u2)
    return _dot(p, f) + h


def _argmax_own(resolver, spec, player: int, t, x, p, grid: np.ndarray, other_u):
    """Brute-force own-control argmax with the other control frozen; under a
    separated structure the frozen value shifts H by a constant and the
    argmax is independent of it."""
    scores = np.stack(
        [_ham_batch(spec, player, t, x, p,
                    grid[j] if player == 1 else other_u,
                    other_u if player == 1 else grid[j])
         for j in range(grid.shape[0])],
        axis=-1)
    idx = np.argmax(scores, axis=-1)  # first max == lowest-index tie break
    return grid[idx]


def _best_response(resolver, spec, t, x, p1, p2):
    grid1, grid2 = resolver.control_grids
    batch = np.broadcast_shapes(np.shape(x)[:-1], np.shape(p1)[:-1], np.shape(p2)[:-1])
    idx1 = np.full(batch, _nearest_index(grid1, spec.control_set_1.midpoint()), dtype=np.intp)
    idx2 = np.full(batch, _nearest_index(grid2, spec.control_set_2.midpoint()), dtype=np.intp)
    for _ in range(resolver.max_br_iterations):
        u2 = grid2[idx2]
        new1 = _argmax_indices(spec, 1, t, x, p1, grid1, u2)
        u1 = grid1[new1]
        new2 = _argmax_indices(spec, 2, t, x, p2, grid2, u1)
        if np.array_equal(new1, idx1) and np.array_equal(new2, idx2):
            return grid1[idx1], grid2[idx2]
        idx1, idx2 = new1, new2
    # rerun the first unconverged point alone to report its cycle
    cycle = _trace_cycle(resolver, spec, t, x, p1, p2, batch)
    raise ResolveError("no static Nash point found: best-response sweeps cycle", cycle=cycle)


def _argmax_indices(spec, player: int, t, x, p, grid: np.ndarray, other_u):
    scores = np.stack(
        [_ham_batch(spec, player, t, x, p,
                    grid[j] if player == 1 else other_u,
                    other_u if player == 1 else grid[j])
         for j in range(grid.shape[0])],
        axis=-1)
    return np.argmax(scores, axis=-1)


def _nearest_index(grid: np.ndarray, value: np.ndarray) -> int:
    return int(np.argmin(np.sum((grid - value) ** 2, axis=-1)))


def _trace_cycle(resolver, spec, t, x, p1, p2, batch) -> list:
    flat_x = np.broadcast_to(x, batch + x.shape[-1:]).reshape(-1, x.shape[-1])
    flat_p1 = np.broadcast_to(p1, batch + p1.shape[-1:]).reshape(-1, p1.shape[-1])
    flat_p2 = np.broadcast_to(p2, batch + p2.shape[-1:]).reshape(-1, p2.shape[-1])
    flat_t = np.broadcast_to(np.asarray(t, float), batch).reshape(-1) if np.ndim(t) else \
        np.full(flat_x.shape[0], float(t))
    grid1, grid2 = resolver.control_grids
    for n in range(flat_x.shape[0]):
        xi, p1i, p2i, ti = flat_x[n], flat_p1[n], flat_p2[n], flat_t[n]
        i1 = _nearest_index(grid1, spec.control_set_1.midpoint())
        i2 = _nearest_index(grid2, spec.control_set_2.midpoint())
        visited = [(i1, i2)]
        for _ in range(resolver.max_br_iterations):
            i1 = int(_argmax_indices(spec, 1, ti, xi, p1i, grid1, grid2[i2]))
            i2 = int(_argmax_indices(spec, 2, ti, xi, p2i, grid2, grid1[i1]))
            pair = (i1, i2)
            if pair == visited[-1]:
                break
            if pair in visited:
                start = visited.index(pair)
                return [(grid1[a].tolist(), grid2[b].tolist()) for a, b in visited[start:]]
            visited.append(pair)
        else:
            return [(grid1[a].tolist(), grid2[b].tolist()) for a, b in visited[-8:]]
    return []


# ─── sampled equilibrium condition ───────────────────────────────────────────

@dataclass(frozen=True)
class GicReport:
    """Sampled check that each player's feedback maximizes their own
    Hamiltonian against the other's.

    Attributes:
        samples_used: number of (t, x, p1, p2) draws.
        worst_violation: per-player minimum of H(feedback) - max H(deviation);
            nonnegative up to roundoff when the condition holds.
        violating_points: up to ``cap`` offending draws as
            (player, t, x, p, gap) tuples.
    """

    samples_used: int
    worst_violation: tuple[float, float]
    violating_points: tuple

    @property
    def ok(self) -> bool:
        return min(self.worst_violation) >= -1e-12


def check_gic(resolver: FeedbackResolver, spec, sample_count: int = 10_000,
              seed: int = 0, x_radius: float = 5.0, p_radius: float = 5.0,
              cap: int = 20) -> GicReport:
    """Monte-Carlo audit of the feedback pair over a box of states and
    gradients; deviations run over the resolver's control grids."""
    rng = np.random.default_rng(seed)
    n, dim = sample_count, spec.dim_x
    t = rng.uniform(0.0, spec.horizon, size=n)
    x = rng.uniform(-x_radius, x_radius, size=(n, dim))
    p1 = rng.uniform(-p_radius, p_radius, size=(n, dim))
    p2 = rng.uniform(-p_radius, p_radius, size=(n, dim))
    u1, u2 = resolve_feedback_batch(resolver, spec, t, x, p1, p2)

    worst = []
    violators: list[tuple] = []
    for player, p, grid in ((1, p1, resolver.control_grids[0]),
                            (2, p2, resolver.control_grids[1])):
        h_eq = _ham_batch(spec, player, t, x, p, u1, u2)
        best_dev = np.full(n, -np.inf)
        for j in range(grid.shape[0]):
            dev1 = grid[j] if player == 1 else u1
            dev2 = u2 if player == 1 else grid[j]
            best_dev = np.maximum(best_dev, _ham_batch(spec, player, t, x, p, dev1, dev2))
        gap = h_eq - best_dev
        worst.append(float(np.min(gap)))
        for k in np.flatnonzero(gap < 0.0):
            if len(violators) >= cap:
                break
            violators.append((player, float(t[k]), x[k].tolist(), p[k].tolist(), float(gap[k])))
    return GicReport(samples_used=n, worst_violation=(worst[0], worst[1]),
                     violating_points=tuple(violators))
