"""Game definitions: coefficients, control sets, and sampled validation.

A two-player game is described by a diffusion matrix field, a controlled
drift, running and terminal payoffs per player, admissible control sets, and
a structure tag that downstream modules use to pick feedback strategies:

* ``general``            nothing assumed beyond continuity,
* ``separated``          cross effects enter additively, so each player's
                         argmax ignores the other's choice,
* ``affine-bang-bang``   drift = f1(t,x) u1 + f2(t,x) u2, running payoffs
                         h_i(t,x) u_i, controls in [0,1]: optimal controls
                         are Heaviside steps of the switching arguments,
* ``affine-unbounded``   same drift plus an uncontrolled term phi(t,x), no
                         running payoffs, polynomially growing terminal data.

All coefficient callables broadcast: the state lives on the last axis of
``x``, controls on the last axis of ``u1``/``u2``, and any shared leading
batch shape is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ControlSet", "DiffusionMatrixField", "GameSpec", "ValidationReport",
    "GameSpecError", "validate_spec", "builtin_scenario", "scenario_names",
    "STRUCTURES",
]

STRUCTURES = ("general", "separated", "affine-bang-bang", "affine-unbounded")


class GameSpecError(ValueError):
    pass


# ─── control sets ────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ControlSet:
    """Admissible controls for one player: an interval, a box, or an explicit
    finite point set.  ``lower``/``upper`` always bound the set."""

    kind: str  # interval | box | finite-grid
    lower: np.ndarray
    upper: np.ndarray
    points: Optional[np.ndarray] = None  # finite-grid only, shape (m, dim)

    @staticmethod
    def interval(lo: float, hi: float) -> "ControlSet":
        if not hi > lo:
            raise GameSpecError(f"empty control interval [{lo}, {hi}]")
        return ControlSet("interval", np.array([float(lo)]), np.array([float(hi)]))

    @staticmethod
    def box(lower, upper) -> "ControlSet":
        lo = np.asarray(lower, dtype=np.float64).reshape(-1)
        hi = np.asarray(upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape or not np.all(hi > lo):
            raise GameSpecError("control box needs matching bounds with upper > lower")
        return ControlSet("box", lo, hi)

    @staticmethod
    def finite(points) -> "ControlSet":
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] == 0:
            raise GameSpecError("finite control set needs at least one point")
        return ControlSet("finite-grid", pts.min(axis=0), pts.max(axis=0), points=pts)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def midpoint(self) -> np.ndarray:
        mid = 0.5 * (self.lower + self.upper)
        if self.kind == "finite-grid":
            return self.points[int(np.argmin(np.sum((self.points - mid) ** 2, axis=-1)))]
        return mid

    def grid(self, points_per_axis: int = 33) -> np.ndarray:
        """Deviation/argmax grid of shape (m, dim)."""
        if self.kind == "finite-grid":
            return self.points
        axes = [np.linspace(self.lower[k], self.upper[k], points_per_axis)
                for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        if u.shape != self.lower.shape:
            return False
        if self.kind == "finite-grid":
            return bool(np.min(np.max(np.abs(self.points - u), axis=-1)) <= tol)
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))


# ─── diffusion ───────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class DiffusionMatrixField:
    """Noise matrix sigma(t, x) with the associated second-order coefficient
    a = sigma sigma^T / 2 and its uniform eigenvalue bounds.

    Attributes:
        matrix: callable (t, x) -> (..., dim, dim) noise matrix.
        ellipticity_lower: uniform lower eigenvalue bound of ``a`` (> 0).
        ellipticity_upper: uniform upper eigenvalue bound of ``a``.
    """

    matrix: Callable
    ellipticity_lower: float
    ellipticity_upper: float

    def __post_init__(self):
        if not (0.0 < self.ellipticity_lower <= self.ellipticity_upper):
            raise GameSpecError(
                f"ellipticity bounds must satisfy 0 < lower <= upper, got "
                f"({self.ellipticity_lower}, {self.ellipticity_upper})")

    def a(self, t, x) -> np.ndarray:
        """a = sigma sigma^T / 2; bitwise symmetric by construction."""
        sig = np.asarray(self.matrix(t, x), dtype=np.float64)
        return 0.5 * np.einsum("...ij,...kj->...ik", sig, sig)

    def inverse(self, t, x) -> np.ndarray:
        return np.linalg.inv(np.asarray(self.matrix(t, x), dtype=np.float64))

    @staticmethod
    def constant(matrix) -> "DiffusionMatrixField":
        m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        dim = m.shape[0]
        if m.shape != (dim, dim):
            raise GameSpecError(f"sigma must be square, got shape {m.shape}")
        a = 0.5 * (m @ m.T)
        eig = np.linalg.eigvalsh(a)
        if eig[0] <= 0.0:
            raise GameSpecError("constant sigma is singular")

        def matrix_fn(t, x, _m=m, _dim=dim):
            x = np.asarray(x, dtype=np.float64)
            return np.broadcast_to(_m, x.shape[:-1] + (_dim, _dim))

        return DiffusionMatrixField(matrix_fn, float(eig[0]), float(eig[-1]))

    @staticmethod
    def from_callable(matrix: Callable, dim: int, horizon: float,
                      x_radius: float = 5.0, samples: int = 256,
                      seed: int = 0) -> "DiffusionMatrixField":
        """Estimate eigenvalue bounds of ``a`` by sampling; raises when a
        sampled point is degenerate."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.0, horizon, size=samples)
        x = rng.uniform(-x_radius, x_radius, size=(samples, dim))
        sig = np.asarray(matrix(t, x), dtype=np.float64)
        a = 0.5 * np.einsum("...ij,...kj->...ik", sig, sig)
        eig = np.linalg.eigvalsh(a)
        low = float(np.min(eig))
        if low <= 1e-14:
            k = int(np.argmin(eig[..., 0]))
            raise GameSpecError(
                f"sigma not invertible at (t,x)=({t[k]:.6g}, {np.array2string(x[k])})")
        return DiffusionMatrixField(matrix, low, float(np.max(eig)))


# ─── game spec ───────────────────────────────────────────────────────────────

@dataclass(eq=False)
class GameSpec:
    """Complete description of one two-player game.

    Attributes:
        name: stable identifier (CLI-visible for built-ins).
        dim_x: state dimension (1 or 2 supported by the grid solver).
        horizon: terminal time T of the play interval [0, T].
        sigma: DiffusionMatrixField.
        drift: callable (t, x, u1, u2) -> (..., dim_x).
        running_payoff_1/2: callable (t, x, u1, u2) -> (...).
        terminal_payoff_1/2: callable (x) -> (...).
        control_set_1/2: admissible controls.
        structure: one of STRUCTURES.
        growth_exponent: beta in the |V| <= C (1 + |x|^beta) envelope used by
            growth diagnostics (bounded data: 1).
        feedback_closed_form: optional pair of callables
            (t, x, p1, p2, heav) -> control returning each player's optimal
            feedback; ``heav`` is a unary smoothed step at the caller's
            smoothing width.
        description: one line for listings.
    """

    name: str
    dim_x: int
    horizon: float
    sigma: DiffusionMatrixField
    drift: Callable
    running_payoff_1: Callable
    running_payoff_2: Callable
    terminal_payoff_1: Callable
    terminal_payoff_2: Callable
    control_set_1: ControlSet
    control_set_2: ControlSet
    structure: str = "general"
    growth_exponent: float = 1.0
    feedback_closed_form: Optional[tuple] = None
    description: str = ""

    def __post_init__(self):
        if self.dim_x < 1:
            raise GameSpecError(f"dim_x must be >= 1, got {self.dim_x}")
        if self.horizon <= 0.0:
            raise GameSpecError(f"horizon must be > 0, got {self.horizon}")
        if self.structure not in STRUCTURES:
            raise GameSpecError(f"unknown structure {self.structure!r}; pick one of {STRUCTURES}")
        if self.growth_exponent < 1.0:
            raise GameSpecError(
                f"growth_exponent must be >= 1, got {self.growth_exponent}")
        if self.structure in ("affine-bang-bang", "affine-unbounded"):
            for cs in (self.control_set_1, self.control_set_2):
                if cs.dim != 1 or abs(cs.lower[0]) > 1e-12 or abs(cs.upper[0] - 1.0) > 1e-12:
                    raise GameSpecError(
                        f"{self.structure} needs scalar [0,1] control sets")

    def running_payoff(self, player: int) -> Callable:
        return self.running_payoff_1 if player == 1 else self.running_payoff_2

    def terminal_payoff(self, player: int) -> Callable:
        return self.terminal_payoff_1 if player == 1 else self.terminal_payoff_2


# ─── validation ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ValidationReport:
    """Sampled health check of a game spec.

    Attributes:
        scenario: spec name.
        samples_used: number of (t, x, u1, u2) draws.
        ellipticity_ok/margin/bounds: smallest sampled eigenvalue of ``a``
            must stay positive and inside the declared bounds.
        boundedness_ok/sups: sampled sups of |f|, |h_i|, |g_i| are finite.
        growth_ok/constants: fitted constants of |f| <= C (1+|x|) and
            |g_i|, |h_i| <= C (1+|x|^beta); flagged when any exceeds 1e6.
        structure_ok/residual: sampled identity check matching the declared
            structure tag.
    """

    scenario: str
    samples_used: int
    ellipticity_ok: bool
    ellipticity_margin: float
    ellipticity_bounds: tuple[float, float]
    boundedness_ok: bool
    boundedness_sups: dict
    growth_ok: bool
    growth_constants: dict
    structure_ok: bool
    structure_residual: float
    messages: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return (self.ellipticity_ok and self.boundedness_ok
                and self.growth_ok and self.structure_ok)

    def flag_items(self) -> list[tuple[str, bool]]:
        return [("ellipticity_ok", self.ellipticity_ok),
                ("boundedness_ok", self.boundedness_ok),
                ("growth_ok", self.growth_ok),
                ("structure_ok", self.structure_ok)]


def _check_finite(name: str, arr, t, x) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    bad = ~np.isfinite(arr)
    if np.any(bad):
        k = int(np.argmax(bad.reshape(arr.shape[0], -1).any(axis=1)))
        raise GameSpecError(
            f"{name} returned a non-finite value at (t,x)=({float(np.ravel(t)[k]):.6g}, "
            f"{np.array2string(x[k])})")
    return arr


def validate_spec(spec: GameSpec, sample_count: int = 1000, seed: int = 0,
                  x_radius: float = 5.0) -> ValidationReport:
    """Sample coefficients over [0,T] x [-x_radius, x_radius]^dim and the
    control boxes; raises :class:`GameSpecError` on singular sigma or
    non-finite coefficient values, returns soft flags otherwise."""
    rng = np.random.default_rng(seed)
    n, dim = sample_count, spec.dim_x
    t = rng.uniform(0.0, spec.horizon, size=n)
    x = rng.uniform(-x_radius, x_radius, size=(n, dim))
    u1 = _sample_controls(rng, spec.control_set_1, n)
    u2 = _sample_controls(rng, spec.control_set_2, n)

    # ellipticity: eigenvalues of a at the sampled points
    a = _check_finite("sigma", spec.sigma.a(t, x), t, x)
    eig = np.linalg.eigvalsh(a)
    margin = float(np.min(eig))
    bounds = (margin, float(np.max(eig)))
    if margin <= 1e-14:
        k = int(np.argmin(eig[:, 0]))
        raise GameSpecError(
            f"sigma not invertible at (t,x)=({t[k]:.6g}, {np.array2string(x[k])})")
    tol = 1e-9 + 1e-9 * abs(spec.sigma.ellipticity_upper)
    ellipticity_ok = (bounds[0] >= spec.sigma.ellipticity_lower - tol
                      and bounds[1] <= spec.sigma.ellipticity_upper + tol)

    f = _check_finite("drift", spec.drift(t, x, u1, u2), t, x)
    h1 = _check_finite("running_payoff_1", spec.running_payoff_1(t, x, u1, u2), t, x)
    h2 = _check_finite("running_payoff_2", spec.running_payoff_2(t, x, u1, u2), t, x)
    g1 = _check_finite("terminal_payoff_1", spec.terminal_payoff_1(x), t, x)
    g2 = _check_finite("terminal_payoff_2", spec.terminal_payoff_2(x), t, x)

    sups = {"f": float(np.max(np.abs(f))),
            "h1": float(np.max(np.abs(h1))), "h2": float(np.max(np.abs(h2))),
            "g1": float(np.max(np.abs(g1))), "g2": float(np.max(np.abs(g2)))}
    boundedness_ok = all(math.isfinite(v) for v in sups.values())

    absx = np.linalg.norm(x, axis=-1)
    beta = spec.growth_exponent
    growth = {
        "f": float(np.max(np.max(np.abs(f), axis=-1) / (1.0 + absx))),
        "h1": float(np.max(np.abs(h1) / (1.0 + absx ** beta))),
        "h2": float(np.max(np.abs(h2) / (1.0 + absx ** beta))),
        "g1": float(np.max(np.abs(g1) / (1.0 + absx ** beta))),
        "g2": float(np.max(np.abs(g2) / (1.0 + absx ** beta))),
    }
    growth_ok = all(v < 1e6 for v in growth.values())

    structure_residual, structure_ok, messages = _structure_residual(
        spec, rng, t, x, u1, u2)

    return ValidationReport(
        scenario=spec.name, samples_used=n,
        ellipticity_ok=ellipticity_ok, ellipticity_margin=margin,
        ellipticity_bounds=bounds,
        boundedness_ok=boundedness_ok, boundedness_sups=sups,
        growth_ok=growth_ok, growth_constants=growth,
        structure_ok=structure_ok, structure_residual=structure_residual,
        messages=tuple(messages))


def _sample_controls(rng, cs: ControlSet, n: int) -> np.ndarray:
    if cs.kind == "finite-grid":
        return cs.points[rng.integers(0, cs.points.shape[0], size=n)]
    return rng.uniform(cs.lower, cs.upper, size=(n, cs.dim))


def _structure_residual(spec, rng, t, x, u1, u2):
    messages: list[str] = []
    if spec.structure == "general":
        return 0.0, True, messages
    n = x.shape[0]
    v1 = _sample_controls(rng, spec.control_set_1, n)
    v2 = _sample_controls(rng, spec.control_set_2, n)
    tol = 1e-9

    if spec.structure == "separated":
        # additive separation: mixed second difference of f vanishes, and
        # each h_i ignores the other player's control
        cross = (spec.drift(t, x, u1, u2) - spec.drift(t, x, u1, v2)
                 - spec.drift(t, x, v1, u2) + spec.drift(t, x, v1, v2))
        r = float(np.max(np.abs(cross)))
        r = max(r, float(np.max(np.abs(
            spec.running_payoff_1(t, x, u1, u2) - spec.running_payoff_1(t, x, u1, v2)))))
        r = max(r, float(np.max(np.abs(
            spec.running_payoff_2(t, x, u1, u2) - spec.running_payoff_2(t, x, v1, u2)))))
        if r > tol:
            messages.append(f"separated structure violated, residual {r:.3g}")
        return r, r <= tol, messages

    # affine structures: scalar [0,1] controls enforced at construction
    zero = np.zeros((n, 1))
    one = np.ones((n, 1))
    phi = spec.drift(t, x, zero, zero)
    f1 = spec.drift(t, x, one, zero) - phi
    f2 = spec.drift(t, x, zero, one) - phi
    recon = phi + f1 * u1[..., :1] + f2 * u2[..., :1]
    r = float(np.max(np.abs(spec.drift(t, x, u1, u2) - recon)))
    if spec.structure == "affine-bang-bang":
        r = max(r, float(np.max(np.abs(phi))))  # no uncontrolled drift term
        for player, payoff, u in ((1, spec.running_payoff_1, u1),
                                  (2, spec.running_payoff_2, u2)):
            base = payoff(t, x, zero, zero)
            own = payoff(t, x, one, zero) - base if player == 1 else \
                payoff(t, x, zero, one) - base
            other = payoff(t, x, zero, one) - base if player == 1 else \
                payoff(t, x, one, zero) - base
            r = max(r, float(np.max(np.abs(base))))       # h_i(.,0) = 0
            r = max(r, float(np.max(np.abs(other))))      # no cross control
            r = max(r, float(np.max(np.abs(payoff(t, x, u1, u2) - own * u[..., 0]))))
    else:  # affine-unbounded: running payoffs vanish
        r = max(r, float(np.max(np.abs(spec.running_payoff_1(t, x, u1, u2)))))
        r = max(r, float(np.max(np.abs(spec.running_payoff_2(t, x, u1, u2)))))
    if r > tol:
        messages.append(f"{spec.structure} structure violated, residual {r:.3g}")
    return r, r <= tol, messages


# ─── built-in scenarios ──────────────────────────────────────────────────────

def _x1(x):
    return np.asarray(x, dtype=np.float64)[..., 0]


def _stack1(values):
    return np.asarray(values, dtype=np.float64)[..., None]


def _scalar_u(u):
    return np.asarray(u, dtype=np.float64)[..., 0]


def _zero_payoff(t, x, u1, u2):
    x = np.asarray(x, dtype=np.float64)
    shape = np.broadcast_shapes(x.shape[:-1], np.shape(u1)[:-1], np.shape(u2)[:-1])
    return np.zeros(shape)


def _case1() -> GameSpec:
    def drift(t, x, u1, u2):
        return _stack1(np.sin(_x1(x)) - _scalar_u(u1) - _scalar_u(u2))

    def h1(t, x, u1, u2):
        out = -_scalar_u(u1) ** 2
        return np.broadcast_to(out, np.broadcast_shapes(out.shape, np.shape(x)[:-1]))

    def h2(t, x, u1, u2):
        out = -2.0 * _scalar_u(u2) ** 2
        return np.broadcast_to(out, np.broadcast_shapes(out.shape, np.shape(x)[:-1]))

    def fb1(t, x, p1, p2, heav):
        return np.clip(-0.5 * _x1(p1), 0.0, 1.0)

    def fb2(t, x, p1, p2, heav):
        return np.clip(-0.25 * _x1(p2), -1.0, 1.0)

    return GameSpec(
        name="case1-continuous", dim_x=1, horizon=1.0,
        sigma=DiffusionMatrixField.constant([[1.0]]),
        drift=drift, running_payoff_1=h1, running_payoff_2=h2,
        terminal_payoff_1=lambda x: np.cos(_x1(x)),
        terminal_payoff_2=lambda x: 1.0 / (1.0 + _x1(x) ** 2),
        control_set_1=ControlSet.interval(0.0, 1.0),
        control_set_2=ControlSet.interval(-1.0, 1.0),
        structure="separated", growth_exponent=1.0,
        feedback_closed_form=(fb1, fb2),
        description="quadratic control costs, interior argmax with an exact clipped-linear feedback pair")


def _case2_f1(x1):
    return 0.4 + 0.2 * np.sin(x1)


def _case2_f2(x1):
    return -0.4 - 0.2 * np.cos(x1)


def _case2_h1(x1):
    return 0.3 * np.cos(x1)


def _case2_h2(x1):
    return -0.3 * np.sin(x1)


def _case2() -> GameSpec:
    def drift(t, x, u1, u2):
        x1 = _x1(x)
        return _stack1(_case2_f1(x1) * _scalar_u(u1) + _case2_f2(x1) * _scalar_u(u2))

    def fb1(t, x, p1, p2, heav):
        x1 = _x1(x)
        return heav(_x1(p1) * _case2_f1(x1) + _case2_h1(x1))

    def fb2(t, x, p1, p2, heav):
        x1 = _x1(x)
        return heav(_x1(p2) * _case2_f2(x1) + _case2_h2(x1))

    return GameSpec(
        name="case2-bangbang", dim_x=1, horizon=1.0,
        sigma=DiffusionMatrixField.constant([[0.7]]),
        drift=drift,
        running_payoff_1=lambda t, x, u1, u2: _case2_h1(_x1(x)) * _scalar_u(u1),
        running_payoff_2=lambda t, x, u1, u2: _case2_h2(_x1(x)) * _scalar_u(u2),
        terminal_payoff_1=lambda x: np.cos(_x1(x)),
        terminal_payoff_2=lambda x: np.sin(_x1(x)),
        control_set_1=ControlSet.interval(0.0, 1.0),
        control_set_2=ControlSet.interval(0.0, 1.0),
        structure="affine-bang-bang", growth_exponent=1.0,
        feedback_closed_form=(fb1, fb2),
        description="drift affine in both controls, Heaviside switching feedback, bounded data")


def _case3() -> GameSpec:
    # linear drift growth against quadratic terminal data; the short horizon
    # keeps the truncation boxes from contaminating the growth fit
    def drift(t, x, u1, u2):
        x1 = _x1(x)
        return _stack1((1.0 + 0.1 * x1) * _scalar_u(u1)
                       + (1.0 - 0.1 * x1) * _scalar_u(u2) + 0.5 * x1)

    def fb1(t, x, p1, p2, heav):
        return heav(_x1(p1) * (1.0 + 0.1 * _x1(x)))

    def fb2(t, x, p1, p2, heav):
        return heav(_x1(p2) * (1.0 - 0.1 * _x1(x)))

    return GameSpec(
        name="case3-unbounded", dim_x=1, horizon=0.5,
        sigma=DiffusionMatrixField.constant([[1.0]]),
        drift=drift, running_payoff_1=_zero_payoff, running_payoff_2=_zero_payoff,
        terminal_payoff_1=lambda x: _x1(x) ** 2,
        terminal_payoff_2=lambda x: _x1(x) ** 2,
        control_set_1=ControlSet.interval(0.0, 1.0),
        control_set_2=ControlSet.interval(0.0, 1.0),
        structure="affine-unbounded", growth_exponent=2.0,
        feedback_closed_form=(fb1, fb2),
        description="linearly growing drift with quadratic terminal data; growth-envelope diagnostics")


def _const_half(t, x, p1, p2, heav):
    return np.full(np.shape(_x1(x)), 0.5)


def _heat_oracle() -> GameSpec:
    def drift(t, x, u1, u2):
        x = np.asarray(x, dtype=np.float64)
        shape = np.broadcast_shapes(x.shape[:-1], np.shape(u1)[:-1], np.shape(u2)[:-1])
        return np.zeros(shape + (x.shape[-1],))

    return GameSpec(
        name="heat-oracle", dim_x=1, horizon=1.0,
        sigma=DiffusionMatrixField.constant([[math.sqrt(2.0)]]),
        drift=drift, running_payoff_1=_zero_payoff, running_payoff_2=_zero_payoff,
        terminal_payoff_1=lambda x: np.cos(_x1(x)),
        terminal_payoff_2=lambda x: np.cos(_x1(x)),
        control_set_1=ControlSet.interval(0.0, 1.0),
        control_set_2=ControlSet.interval(0.0, 1.0),
        structure="separated", growth_exponent=1.0,
        feedback_closed_form=(_const_half, _const_half),
        description="driftless unit-diffusion benchmark with the exact value exp(-s) cos(x)")


def _linear_oracle() -> GameSpec:
    def drift(t, x, u1, u2):
        x = np.asarray(x, dtype=np.float64)
        shape = np.broadcast_shapes(x.shape[:-1], np.shape(u1)[:-1], np.shape(u2)[:-1])
        return np.zeros(shape + (x.shape[-1],))

    return GameSpec(
        name="linear-oracle", dim_x=1, horizon=1.0,
        sigma=DiffusionMatrixField.constant([[1.0]]),
        drift=drift, running_payoff_1=_zero_payoff, running_payoff_2=_zero_payoff,
        terminal_payoff_1=_x1, terminal_payoff_2=_x1,
        control_set_1=ControlSet.interval(0.0, 1.0),
        control_set_2=ControlSet.interval(0.0, 1.0),
        structure="separated", growth_exponent=1.0,
        feedback_closed_form=(_const_half, _const_half),
        description="linear terminal data annihilated by second differences; exact at machine precision")


_BUILTINS: dict[str, Callable[[], GameSpec]] = {
    "case1-continuous": _case1,
    "case2-bangbang": _case2,
    "case3-unbounded": _case3,
    "heat-oracle": _heat_oracle,
    "linear-oracle": _linear_oracle,
}


def scenario_names() -> list[str]:
    return list(_BUILTINS)


def builtin_scenario(name: str) -> GameSpec:
    """Construct one of the named built-in games."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise GameSpecError(
            f"unknown scenario {name!r}; available: {', '.join(_BUILTINS)}") from None
    return factory()
