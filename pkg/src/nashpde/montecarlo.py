"""Path simulation and equilibrium verification for solved games.

Payoffs are estimated two ways and must agree:

* ``controlled`` paths follow the controlled dynamics
  ``dX = f(t, X, u1, u2) dt + sigma(t, X) dB`` directly;
* ``girsanov`` paths are driftless, ``dX = sigma(t, X) dB``, and each path
  carries the exponential martingale weight
  ``exp(M_T - <M>_T / 2)`` with ``dM = (sigma^{-1} f) . dB`` so that weighted
  payoffs reproduce the controlled-measure expectations.

Controls along a path come from the solved value surfaces: the feedback pair
is resolved at zero smoothing width from the interpolated gradients
``p_i = grad V_i(T - t, X_t)``.  A deviation replaces one player's feedback
with an explicit open-loop staircase while the other keeps the feedback; the
same per-path noise streams (counter-based, keyed by seed and path index)
make deviation gaps paired differences with small variance.

Estimates carry a verdict tolerance ``3 stderr + allowance`` where the
allowance covers grid and time-step bias; it is configuration, not data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from numpy.random import Generator, Philox

from .feedback import FeedbackResolver, resolve_feedback_batch
from .pde import ValueField

__all__ = [
    "DeviationStrategy", "McOptions", "TrajectoryBatch", "PayoffEstimate",
    "ValueMatchReport", "GirsanovReport", "NashReport", "DeviationRow",
    "simulate_paths",
    "estimate_payoff", "girsanov_consistency", "deviation_test",
    "value_match_test", "default_deviations",
]


# ─── strategies and options ──────────────────────────────────────────────────

@dataclass(frozen=True)
class DeviationStrategy:
    """Open-loop staircase control for one player: constant value on each of
    ``len(values)`` equal slices of [0, horizon]."""

    player: int
    label: str
    horizon: float
    values: np.ndarray  # (pieces, control_dim)

    def __post_init__(self):
        if self.player not in (1, 2):
            raise ValueError("player must be 1 or 2")
        v = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", v)

    def control_at(self, t: float) -> np.ndarray:
        pieces = self.values.shape[0]
        idx = min(int(t / self.horizon * pieces), pieces - 1)
        return self.values[idx]

    @staticmethod
    def constant(player: int, value, horizon: float, label: str = "") -> "DeviationStrategy":
        v = np.atleast_1d(np.asarray(value, dtype=np.float64))
        return DeviationStrategy(player, label or f"u{player}={value:g}", horizon, v[None, :])

    @staticmethod
    def random_staircase(spec, player: int, pieces: int, seed: int,
                         label: str = "") -> "DeviationStrategy":
        cs = spec.control_set_1 if player == 1 else spec.control_set_2
        rng = np.random.default_rng(seed)
        vals = rng.uniform(cs.lower, cs.upper, size=(pieces, cs.dim))
        return DeviationStrategy(player, label or f"stair{pieces}:u{player}:seed{seed}",
                                 spec.horizon, vals)


def default_deviations(spec, seed: int = 0, pieces: int = 8) -> list[DeviationStrategy]:
    """Box corners for each player plus one seeded random staircase each."""
    out = []
    for player, cs in ((1, spec.control_set_1), (2, spec.control_set_2)):
        out.append(DeviationStrategy.constant(player, cs.lower, spec.horizon,
                                              f"u{player}={cs.lower[0]:g}"))
        out.append(DeviationStrategy.constant(player, cs.upper, spec.horizon,
                                              f"u{player}={cs.upper[0]:g}"))
    for player in (1, 2):
        out.append(DeviationStrategy.random_staircase(
            spec, player, pieces, seed + 101 * player))
    return out


@dataclass(frozen=True)
class McOptions:
    """Estimation run settings; ``discretization_allowance`` is added to the
    3-sigma band of every verdict to absorb grid bias."""

    x0: Sequence[float] | float = 0.0
    n_paths: int = 10_000
    n_steps: int = 200
    seed: int = 0
    discretization_allowance: float = 0.02
    exit_fraction_cap: float = 0.05

    def x0_array(self, dim: int) -> np.ndarray:
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=np.float64))
        if x0.shape != (dim,):
            raise ValueError(f"x0 must have shape ({dim},), got {x0.shape}")
        return x0


# ─── simulation ──────────────────────────────────────────────────────────────

@dataclass(eq=False)
class TrajectoryBatch:
    """One simulation run.

    Attributes:
        mode: ``controlled`` or ``girsanov``.
        x0, seed, dt: run inputs.
        states: (paths, steps + 1, dim); controls: per player
            (paths, steps, control_dim); log_weights: (paths,), identically
            zero for controlled runs; running/terminal payoffs:
            (paths, players).
        exit_flags: paths whose state left the value-surface box at some
            gradient read (reads are clamped to the box rim).
        warnings: human-readable notes, e.g. the exit fraction cap firing.
    """

    mode: str
    x0: np.ndarray
    seed: int
    dt: float
    states: np.ndarray
    controls: tuple[np.ndarray, np.ndarray]
    log_weights: np.ndarray
    running_payoffs: np.ndarray
    terminal_payoffs: np.ndarray
    exit_flags: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.states.shape[1] - 1

    @property
    def exit_fraction(self) -> float:
        return float(np.mean(self.exit_flags))

    def payoffs(self, player: int) -> np.ndarray:
        """Per-path payoff of one player under the batch's own measure
        convention (weighted for girsanov runs)."""
        raw = self.running_payoffs[:, player - 1] + self.terminal_payoffs[:, player - 1]
        if self.mode == "girsanov":
            return np.exp(self.log_weights) * raw
        return raw


def _path_normals(seed: int, n_paths: int, n_steps: int, dim: int) -> np.ndarray:
    """Per-path counter-based streams: path p draws from Philox keyed by
    (seed, p), so any path subset or worker split reproduces bitwise."""
    out = np.empty((n_paths, n_steps, dim))
    for p in range(n_paths):
        gen = Generator(Philox(key=np.array([seed, p], dtype=np.uint64)))
        out[p] = gen.standard_normal((n_steps, dim))
    return out


def _aligned_level(fields: ValueField, t: float) -> int:
    return fields.level_of_s(fields.grid.horizon - t)


def simulate_paths(spec, fields: ValueField, resolver: FeedbackResolver,
                   opts: McOptions, mode: str = "controlled",
                   deviation: Optional[DeviationStrategy | Sequence[DeviationStrategy]] = None
                   ) -> TrajectoryBatch:
    """Euler march of ``opts.n_paths`` paths from ``opts.x0``.

    The step count must nest with the value-surface time grid (one must
    divide the other) so every control read lands exactly on a stored level.
    Gradient reads outside the box are clamped to the rim and flagged.
    ``deviation`` replaces the feedback of the named player(s) with explicit
    staircases; naming both players makes the run fully open loop.
    """
    if mode not in ("controlled", "girsanov"):
        raise ValueError(f"mode must be 'controlled' or 'girsanov', got {mode!r}")
    deviations = ([] if deviation is None
                  else [deviation] if isinstance(deviation, DeviationStrategy)
                  else list(deviation))
    if len({d.player for d in deviations}) != len(deviations):
        raise ValueError("at most one explicit strategy per player")
    grid = fields.grid
    dim = grid.dim
    n_steps = opts.n_steps
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if n_steps % grid.time_steps and grid.time_steps % n_steps:
        raise ValueError(
            f"simulation steps ({n_steps}) must divide or be a multiple of the "
            f"value-surface time steps ({grid.time_steps}) so levels align")
    if abs(spec.horizon - grid.horizon) > 1e-12:
        raise ValueError("value surface was solved for a different horizon")
    x0 = opts.x0_array(dim)
    dt = spec.horizon / n_steps
    sqdt = math.sqrt(dt)
    zero_eps = resolver.with_epsilon(0.0)
    k1 = spec.control_set_1.dim
    k2 = spec.control_set_2.dim

    n = opts.n_paths
    states = np.empty((n, n_steps + 1, dim))
    controls = (np.empty((n, n_steps, k1)), np.empty((n, n_steps, k2)))
    log_w = np.zeros(n)
    running = np.zeros((n, 2))
    exited = np.zeros(n, dtype=bool)

    normals = _path_normals(opts.seed, n, n_steps, dim)
    x = np.broadcast_to(x0, (n, dim)).copy()
    states[:, 0] = x
    for k in range(n_steps):
        t = k * dt
        level = _aligned_level(fields, t)
        exited |= np.any(np.abs(x) > grid.radius + 1e-9, axis=-1)
        p1, p2 = fields.gradients_at_level(level, x)
        u1, u2 = resolve_feedback_batch(zero_eps, spec, t, x, p1, p2)
        for dev in deviations:
            uc = np.broadcast_to(dev.control_at(t), (n, dev.values.shape[1]))
            if dev.player == 1:
                u1 = np.array(uc)
            else:
                u2 = np.array(uc)
        controls[0][:, k] = u1
        controls[1][:, k] = u2
        f = np.asarray(spec.drift(t, x, u1, u2), dtype=np.float64)
        running[:, 0] += dt * np.asarray(spec.running_payoff_1(t, x, u1, u2), float)
        running[:, 1] += dt * np.asarray(spec.running_payoff_2(t, x, u1, u2), float)
        sig = np.broadcast_to(np.asarray(spec.sigma.matrix(t, x), float), (n, dim, dim))
        db = sqdt * normals[:, k]
        noise = np.einsum("nij,nj->ni", sig, db)
        if mode == "girsanov":
            try:
                theta = np.einsum("nij,nj->ni", np.linalg.inv(sig), f)
            except np.linalg.LinAlgError:
                dets = np.abs(np.linalg.det(sig))
                bad = int(np.argmin(dets))
                raise ValueError(
                    f"sigma is singular at step {k} on path {bad}") from None
            log_w += np.einsum("ni,ni->n", theta, db) - 0.5 * dt * np.einsum(
                "ni,ni->n", theta, theta)
            x = x + noise
        else:
            x = x + f * dt + noise
        states[:, k + 1] = x
    if not np.all(np.isfinite(log_w)):
        bad = int(np.argmax(~np.isfinite(log_w)))
        raise ValueError(f"non-finite measure-change weight on path {bad}")

    terminal = np.stack([np.asarray(spec.terminal_payoff_1(x), float),
                         np.asarray(spec.terminal_payoff_2(x), float)], axis=-1)
    warnings: list[str] = []
    frac = float(np.mean(exited))
    if frac > opts.exit_fraction_cap:
        warnings.append(
            f"exit fraction {frac:.4f} above cap {opts.exit_fraction_cap:g}: "
            f"gradient reads were clamped to the box rim")
    return TrajectoryBatch(mode=mode, x0=x0, seed=opts.seed, dt=dt, states=states,
                           controls=controls, log_weights=log_w,
                           running_payoffs=running, terminal_payoffs=terminal,
                           exit_flags=exited, warnings=tuple(warnings))


# ─── estimates ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PayoffEstimate:
    """Sample mean of one player's payoff.

    ``weight_mean``/``weight_stderr`` summarize the Girsanov martingale
    weights (exactly 1 and 0 for controlled runs); ``warnings`` inherit from
    the batch."""

    player: int
    mode: str
    mean: float
    stderr: float
    n_paths: int
    exit_fraction: float
    weight_mean: float
    weight_stderr: float
    warnings: tuple[str, ...] = ()


def estimate_payoff(batch: TrajectoryBatch, player: int) -> PayoffEstimate:
    y = batch.payoffs(player)
    n = y.shape[0]
    stderr = float(np.std(y, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    if batch.mode == "girsanov":
        w = np.exp(batch.log_weights)
        w_mean = float(np.mean(w))
        w_se = float(np.std(w, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    else:
        w_mean, w_se = 1.0, 0.0
    return PayoffEstimate(player=player, mode=batch.mode, mean=float(np.mean(y)),
                          stderr=stderr, n_paths=n,
                          exit_fraction=batch.exit_fraction,
                          weight_mean=w_mean, weight_stderr=w_se,
                          warnings=batch.warnings)


# ─── reports ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class GirsanovReport:
    """Agreement of the two estimation routes on independent seeds."""

    girsanov: tuple[PayoffEstimate, PayoffEstimate]
    controlled: tuple[PayoffEstimate, PayoffEstimate]
    differences: tuple[float, float]
    combined_stderr: tuple[float, float]
    weight_ok: bool

    @property
    def ok(self) -> bool:
        agree = all(abs(d) <= 3.0 * se for d, se in
                    zip(self.differences, self.combined_stderr))
        return agree and self.weight_ok


def girsanov_consistency(spec, fields: ValueField, resolver: FeedbackResolver,
                         opts: McOptions) -> GirsanovReport:
    """Driftless-weighted vs controlled-dynamics payoffs, independent seeds;
    also audits that the weights are a unit-mean martingale."""
    batch_g = simulate_paths(spec, fields, resolver, opts, mode="girsanov")
    opts_c = replace(opts, seed=opts.seed + 7_777_777)
    batch_c = simulate_paths(spec, fields, resolver, opts_c, mode="controlled")
    est_g = (estimate_payoff(batch_g, 1), estimate_payoff(batch_g, 2))
    est_c = (estimate_payoff(batch_c, 1), estimate_payoff(batch_c, 2))
    diffs = tuple(eg.mean - ec.mean for eg, ec in zip(est_g, est_c))
    ses = tuple(math.hypot(eg.stderr, ec.stderr) for eg, ec in zip(est_g, est_c))
    w_ok = abs(est_g[0].weight_mean - 1.0) <= 3.0 * est_g[0].weight_stderr
    return GirsanovReport(girsanov=est_g, controlled=est_c, differences=diffs,
                          combined_stderr=ses, weight_ok=bool(w_ok))


@dataclass(frozen=True)
class ValueMatchReport:
    """Solved surface at the play start vs the simulated equilibrium payoff;
    the verdict band is 3 stderr + allowance per player."""

    pde_values: tuple[float, float]
    estimates: tuple[PayoffEstimate, PayoffEstimate]
    tolerances: tuple[float, float]

    @property
    def gaps(self) -> tuple[float, float]:
        return tuple(e.mean - v for e, v in zip(self.estimates, self.pde_values))

    @property
    def ok(self) -> bool:
        return all(abs(g) <= tol for g, tol in zip(self.gaps, self.tolerances))


def value_match_test(spec, fields: ValueField, resolver: FeedbackResolver,
                     opts: McOptions) -> ValueMatchReport:
    batch = simulate_paths(spec, fields, resolver, opts, mode="controlled")
    x0 = opts.x0_array(fields.grid.dim)
    pde = tuple(fields.value(i, fields.grid.horizon, x0) for i in (1, 2))
    est = (estimate_payoff(batch, 1), estimate_payoff(batch, 2))
    tol = tuple(3.0 * e.stderr + opts.discretization_allowance for e in est)
    return ValueMatchReport(pde_values=pde, estimates=est, tolerances=tol)


@dataclass(frozen=True)
class DeviationRow:
    deviation_id: str
    player: int
    mean: float
    stderr: float
    gap: float
    gap_stderr: float
    verdict: bool


@dataclass(frozen=True)
class NashReport:
    """Unilateral-deviation audit of the solved feedback pair.

    Every deviation row compares the deviating player's payoff against the
    equilibrium run on the same noise streams; the verdict requires
    ``gap >= -(3 gap_stderr + allowance)``.
    """

    scenario: str
    seed: int
    n_paths: int
    n_steps: int
    allowance: float
    equilibrium: tuple[PayoffEstimate, PayoffEstimate]
    rows: tuple[DeviationRow, ...]
    value_match: Optional[ValueMatchReport] = None

    @property
    def ok(self) -> bool:
        rows_ok = all(r.verdict for r in self.rows)
        vm_ok = self.value_match.ok if self.value_match is not None else True
        return rows_ok and vm_ok

    def csv_lines(self) -> list[str]:
        lines = ["deviation_id,player,mean,stderr,gap,gap_stderr,verdict"]
        for r in self.rows:
            lines.append(",".join([
                r.deviation_id, str(r.player), repr(r.mean), repr(r.stderr),
                repr(r.gap), repr(r.gap_stderr), "pass" if r.verdict else "fail"]))
        return lines


def deviation_test(spec, fields: ValueField, resolver: FeedbackResolver,
                   opts: McOptions, deviations: Optional[Sequence[DeviationStrategy]] = None
                   ) -> NashReport:
    """Equilibrium run plus one run per deviation, all on the same per-path
    noise streams (common random numbers), controlled dynamics."""
    if deviations is None:
        deviations = default_deviations(spec, seed=opts.seed)
    eq_batch = simulate_paths(spec, fields, resolver, opts, mode="controlled")
    eq_est = (estimate_payoff(eq_batch, 1), estimate_payoff(eq_batch, 2))
    rows = []
    n = opts.n_paths
    for dev in deviations:
        batch = simulate_paths(spec, fields, resolver, opts, mode="controlled",
                               deviation=dev)
        i = dev.player
        y_dev = batch.payoffs(i)
        y_eq = eq_batch.payoffs(i)
        paired = y_eq - y_dev
        gap = float(np.mean(paired))
        gap_se = float(np.std(paired, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        est = estimate_payoff(batch, i)
        verdict = gap >= -(3.0 * gap_se + opts.discretization_allowance)
        rows.append(DeviationRow(deviation_id=dev.label, player=i, mean=est.mean,
                                 stderr=est.stderr, gap=gap, gap_stderr=gap_se,
                                 verdict=bool(verdict)))
    return NashReport(scenario=getattr(spec, "name", ""), seed=opts.seed,
                      n_paths=opts.n_paths, n_steps=opts.n_steps,
                      allowance=opts.discretization_allowance,
                      equilibrium=eq_est, rows=tuple(rows))
