"""Command-line front end: scenario configs in, field CSVs and reports out.

Commands
    scenarios  list the built-in games
    validate   sampled health check of the game coefficients
    solve      expanding-domain solve, dumps the largest value surface as CSV
    verify     value-match and measure-change agreement against a stored CSV
    deviate    unilateral-deviation audit of the solved feedback pair
    export     round-trips a stored field CSV (the CSV is the canonical store)

Configuration is a flat INI file; every value can also be forced from the
command line with ``--set section.key=value``.  Omitted keys fall back to
per-scenario defaults, so ``nashpde solve --scenario heat-oracle`` works bare.
Coefficients of non-builtin scenarios are expression strings (see the DSL
module and README for the grammar).

Exit codes: 0 all verdicts true, 2 configuration problem, 3 solver failure,
4 verification failure.  Reports start with the tool version, a hash of the
effective configuration, and the configuration echo; wall-clock timings go
to stdout only so reruns stay byte-identical.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .dsl import DslError, evaluate, evaluate_array, free_vars, parse
from .feedback import FeedbackResolver, ResolveError, default_resolver
from .games import (ControlSet, DiffusionMatrixField, GameSpec, GameSpecError,
                    builtin_scenario, scenario_names, validate_spec, _BUILTINS)
from .montecarlo import (DeviationStrategy, McOptions, default_deviations,
                         deviation_test, girsanov_consistency, value_match_test)
from .pde import Grid, SolverError, ValueField, expanding_domain_solve

__all__ = ["main", "ConfigError", "RunConfig", "load_field_csv", "field_csv_text"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVE = 3
EXIT_VERIFY = 4

FIELD_CSV = "field.csv"


class ConfigError(ValueError):
    """Configuration cannot be turned into a runnable setup."""


# ─── configuration ───────────────────────────────────────────────────────────

# every key the config format understands, per section; typos are errors
_KNOWN_KEYS = {
    "scenario": {"name", "structure", "dim", "horizon", "growth_exponent",
                 "description"},
    "controls": {"u1_lower", "u1_upper", "u2_lower", "u2_upper"},
    "coefficients": None,  # open set: drift_*, sigma_*, h1, h2, g1, g2, feedback_*
    "grid": {"radii", "nodes_per_axis", "time_steps"},
    "solver": {"tol", "max_iter", "epsilon_schedule", "feedback_mode",
               "grid_points", "core_radius"},
    "mc": {"x0", "n_paths", "n_steps", "seed", "allowance", "exit_cap",
           "deviations", "deviation_pieces"},
    "outputs": {"directory", "field_dump"},
}

_GENERIC_DEFAULTS = {
    "grid": {"radii": "4", "nodes_per_axis": "161", "time_steps": "200"},
    "solver": {"tol": "1e-5", "max_iter": "100", "epsilon_schedule": "none",
               "feedback_mode": "auto", "grid_points": "33",
               "core_radius": "none"},
    "mc": {"x0": "0", "n_paths": "10000", "n_steps": "200", "seed": "0",
           "allowance": "0.02", "exit_cap": "0.05", "deviations": "default",
           "deviation_pieces": "8"},
    "outputs": {"directory": "out", "field_dump": "true"},
}

# bare --scenario runs use these; chosen so the documented budgets hold
_SCENARIO_DEFAULTS = {
    "heat-oracle": {
        "grid": {"radii": "1.5707963267948966", "nodes_per_axis": "201",
                 "time_steps": "1000"},
        "mc": {"n_paths": "20000", "n_steps": "100", "seed": "1"},
    },
    "linear-oracle": {
        "grid": {"radii": "3", "nodes_per_axis": "121"},
        "mc": {"seed": "2"},
    },
    "case1-continuous": {
        "grid": {"radii": "4, 6"},
        "solver": {"core_radius": "2"},
        "mc": {"seed": "3"},
    },
    "case2-bangbang": {
        "grid": {"radii": "4, 6, 8"},
        "solver": {"epsilon_schedule": "0.5, 0.25, 0.125", "core_radius": "2"},
        "mc": {"seed": "7"},
    },
    "case3-unbounded": {
        "grid": {"radii": "4, 6, 8"},
        "solver": {"epsilon_schedule": "0.5, 0.25, 0.125", "core_radius": "2"},
        "mc": {"seed": "11", "exit_cap": "0.2"},
    },
}


@dataclass
class RunConfig:
    """One resolved run: the game plus every numeric knob, with the raw
    key-value view kept for the provenance echo."""

    spec: GameSpec
    radii: tuple[float, ...]
    nodes_per_axis: int
    time_steps: int
    tol: float
    max_iter: int
    epsilon_schedule: tuple[float, ...] | None
    feedback_mode: str
    grid_points: int
    core_radius: float | None
    mc: McOptions
    deviations: str
    deviation_pieces: int
    out_dir: str
    field_dump: bool
    sections: dict

    def effective_lines(self) -> list[str]:
        lines = []
        for sec in sorted(self.sections):
            for key in sorted(self.sections[sec]):
                lines.append(f"{sec}.{key} = {self.sections[sec][key]}")
        return lines

    @property
    def config_hash(self) -> str:
        text = "\n".join(self.effective_lines())
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def resolver(self) -> FeedbackResolver:
        if self.feedback_mode == "auto":
            return default_resolver(self.spec, grid_points=self.grid_points)
        return FeedbackResolver.for_spec(self.spec, mode=self.feedback_mode,
                                         grid_points=self.grid_points)

    def base_grid(self) -> Grid:
        return Grid(self.spec.dim_x, self.radii[0], self.nodes_per_axis,
                    self.time_steps, self.spec.horizon)


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _get_float(sections, sec, key, positive=False) -> float:
    raw = sections[sec][key]
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{sec}.{key}: not a number: {raw!r}") from None
    if positive and v <= 0.0:
        raise ConfigError(f"{sec}.{key} must be > 0, got {raw}")
    return v


def _get_int(sections, sec, key, positive=True) -> int:
    raw = sections[sec][key]
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"{sec}.{key}: not an integer: {raw!r}") from None
    if positive and v <= 0:
        raise ConfigError(f"{sec}.{key} must be > 0, got {raw}")
    return v


def _get_bool(sections, sec, key) -> bool:
    raw = sections[sec][key].strip().lower()
    if raw in ("true", "yes", "on", "1"):
        return True
    if raw in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{sec}.{key}: not a boolean: {sections[sec][key]!r}")


def _merge(base: dict, extra: dict) -> None:
    for sec, kv in extra.items():
        base.setdefault(sec, {}).update(kv)


def load_config(config_path: str | None, scenario_flag: str | None,
                overrides: list[str], out_dir_flag: str | None,
                seed_flag: int | None) -> RunConfig:
    """Defaults <- config file <- --set/--scenario/--seed/--out-dir flags."""
    file_sections: dict = {}
    if config_path:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keys are case-sensitive (DSL variable names)
        try:
            with open(config_path) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from None
        file_sections = {sec: dict(cp[sec]) for sec in cp.sections()}

    scenario = scenario_flag or file_sections.get("scenario", {}).get("name")
    if scenario is None:
        raise ConfigError("no scenario: pass --scenario or set scenario.name")

    sections: dict = {"scenario": {"name": scenario}}
    _merge(sections, _GENERIC_DEFAULTS)
    _merge(sections, _SCENARIO_DEFAULTS.get(scenario, {}))
    _merge(sections, file_sections)
    sections["scenario"]["name"] = scenario
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"--set wants section.key=value, got {ov!r}")
        target, value = ov.split("=", 1)
        sec, key = target.split(".", 1)
        sections.setdefault(sec.strip(), {})[key.strip()] = value.strip()
    if out_dir_flag:
        sections["outputs"]["directory"] = out_dir_flag
    if seed_flag is not None:
        sections["mc"]["seed"] = str(seed_flag)

    for sec, kv in sections.items():
        if sec not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section [{sec}]")
        known = _KNOWN_KEYS[sec]
        if known is not None:
            for key in kv:
                if key not in known:
                    raise ConfigError(f"unknown key {sec}.{key}")

    spec = _build_spec(sections)

    radii = tuple(_float_list(sections["grid"]["radii"], "grid.radii"))
    if not radii or any(r <= 0 for r in radii):
        raise ConfigError(f"grid.radii must be positive, got {sections['grid']['radii']!r}")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError(f"grid.radii must be strictly increasing, got {list(radii)}")

    eps_raw = sections["solver"]["epsilon_schedule"].strip().lower()
    if eps_raw in ("", "none"):
        schedule = None
    else:
        schedule = tuple(_float_list(sections["solver"]["epsilon_schedule"],
                                     "solver.epsilon_schedule"))
        if any(e < 0 for e in schedule):
            raise ConfigError("solver.epsilon_schedule widths must be >= 0")

    core_raw = sections["solver"]["core_radius"].strip().lower()
    core = None if core_raw in ("", "none") else _get_float(sections, "solver", "core_radius", positive=True)

    mode = sections["solver"]["feedback_mode"].strip()
    if mode not in ("auto", "closed-form", "separated-argmax", "best-response"):
        raise ConfigError(f"solver.feedback_mode: unknown mode {mode!r}")

    x0 = _float_list(sections["mc"]["x0"], "mc.x0")
    if len(x0) == 1 and spec.dim_x > 1:
        x0 = x0 * spec.dim_x
    if len(x0) != spec.dim_x:
        raise ConfigError(f"mc.x0 needs {spec.dim_x} coordinates, got {len(x0)}")
    seed = _get_int(sections, "mc", "seed", positive=False)
    if seed < 0:
        raise ConfigError("mc.seed must be >= 0")
    mc = McOptions(x0=tuple(x0),
                   n_paths=_get_int(sections, "mc", "n_paths"),
                   n_steps=_get_int(sections, "mc", "n_steps"),
                   seed=seed,
                   discretization_allowance=_get_float(sections, "mc", "allowance"),
                   exit_fraction_cap=_get_float(sections, "mc", "exit_cap"))

    return RunConfig(
        spec=spec, radii=radii,
        nodes_per_axis=_get_int(sections, "grid", "nodes_per_axis"),
        time_steps=_get_int(sections, "grid", "time_steps"),
        tol=_get_float(sections, "solver", "tol", positive=True),
        max_iter=_get_int(sections, "solver", "max_iter"),
        epsilon_schedule=schedule, feedback_mode=mode,
        grid_points=_get_int(sections, "solver", "grid_points"),
        core_radius=core, mc=mc,
        deviations=sections["mc"]["deviations"],
        deviation_pieces=_get_int(sections, "mc", "deviation_pieces"),
        out_dir=sections["outputs"]["directory"],
        field_dump=_get_bool(sections, "outputs", "field_dump"),
        sections=sections)


# ─── inline scenarios from expression strings ────────────────────────────────

def _build_spec(sections: dict) -> GameSpec:
    name = sections["scenario"]["name"]
    if name in _BUILTINS:
        if "coefficients" in sections:
            raise ConfigError(
                f"scenario {name!r} is built in; a [coefficients] section needs "
                f"a non-builtin scenario.name")
        return builtin_scenario(name)
    if "coefficients" not in sections:
        raise ConfigError(
            f"unknown scenario {name!r}; available: {', '.join(scenario_names())} "
            f"(or define a [coefficients] section)")
    try:
        return _custom_spec(sections)
    except DslError as exc:
        raise ConfigError(f"coefficient expression error: {exc}") from None
    except GameSpecError as exc:
        raise ConfigError(str(exc)) from None


def _parse_body(coeffs: dict, key: str, variables: set[str], required=True):
    if key not in coeffs:
        if required:
            raise ConfigError(f"coefficients.{key} is required")
        return None
    try:
        return parse(coeffs[key], variables)
    except DslError as exc:
        raise ConfigError(f"coefficients.{key}: {exc}") from None


def _custom_spec(sections: dict) -> GameSpec:
    scen = sections["scenario"]
    dim = int(scen.get("dim", "1"))
    if dim not in (1, 2):
        raise ConfigError(f"scenario.dim must be 1 or 2, got {scen.get('dim')}")
    horizon = float(scen.get("horizon", "1.0"))
    structure = scen.get("structure", "general")
    growth = float(scen.get("growth_exponent", "1.0"))

    ctrl = sections.get("controls", {})

    def control_set(i: int) -> ControlSet:
        lo = float(ctrl.get(f"u{i}_lower", "0"))
        hi = float(ctrl.get(f"u{i}_upper", "1"))
        return ControlSet.interval(lo, hi)

    cs1, cs2 = control_set(1), control_set(2)

    state = [f"x{k + 1}" for k in range(dim)]
    coeff_vars = {"t", "u1", "u2", *state}
    sigma_vars = {"t", *state}
    term_vars = set(state)
    fb_vars = {"t", "eps", *state,
               *(f"p1_{k + 1}" for k in range(dim)),
               *(f"p2_{k + 1}" for k in range(dim))}

    coeffs = dict(sections["coefficients"])
    drift_exprs = [_parse_body(coeffs, f"drift_{k + 1}", coeff_vars) for k in range(dim)]
    h_exprs = [_parse_body(coeffs, "h1", coeff_vars), _parse_body(coeffs, "h2", coeff_vars)]
    g_exprs = [_parse_body(coeffs, "g1", term_vars), _parse_body(coeffs, "g2", term_vars)]
    sigma_exprs = [[_parse_body(coeffs, f"sigma_{i + 1}{j + 1}", sigma_vars,
                                required=(i == j)) for j in range(dim)]
                   for i in range(dim)]
    fb_exprs = [_parse_body(coeffs, "feedback_1", fb_vars, required=False),
                _parse_body(coeffs, "feedback_2", fb_vars, required=False)]
    if (fb_exprs[0] is None) != (fb_exprs[1] is None):
        raise ConfigError("define both coefficients.feedback_1 and feedback_2 or neither")
    known = ({f"drift_{k + 1}" for k in range(dim)} | {"h1", "h2", "g1", "g2"}
             | {f"sigma_{i + 1}{j + 1}" for i in range(dim) for j in range(dim)}
             | {"feedback_1", "feedback_2"})
    for key in coeffs:
        if key not in known:
            raise ConfigError(f"unknown key coefficients.{key}")

    def state_bindings(x) -> dict:
        x = np.asarray(x, dtype=np.float64)
        return {nm: x[..., k] for k, nm in enumerate(state)}

    def coeff_fn(exprs, stacked: bool):
        # returns (t, x, u1, u2) -> batch array; scalar outputs broadcast to
        # the full batch shape so downstream code never special-cases constants
        def fn(t, x, u1, u2, _exprs=exprs):
            b = state_bindings(x)
            b["t"] = np.asarray(t, dtype=np.float64)
            b["u1"] = np.asarray(u1, dtype=np.float64)[..., 0]
            b["u2"] = np.asarray(u2, dtype=np.float64)[..., 0]
            batch = np.broadcast_shapes(*(np.shape(v) for v in b.values()))
            outs = [np.broadcast_to(evaluate_array(e, b), batch) for e in _exprs]
            return np.stack(outs, axis=-1) if stacked else outs[0]
        return fn

    def terminal_fn(expr):
        def fn(x, _e=expr):
            b = state_bindings(x)
            batch = np.broadcast_shapes(*(np.shape(v) for v in b.values()))
            return np.broadcast_to(evaluate_array(_e, b), batch)
        return fn

    flat_sigma = [e for row in sigma_exprs for e in row if e is not None]
    if all(not free_vars(e) for e in flat_sigma):
        m = [[evaluate(e, {}) if e is not None else 0.0 for e in row]
             for row in sigma_exprs]
        sigma = DiffusionMatrixField.constant(m)
    else:
        def matrix_fn(t, x):
            b = state_bindings(x)
            b["t"] = np.asarray(t, dtype=np.float64)
            batch = np.broadcast_shapes(*(np.shape(v) for v in b.values()))
            rows = [[np.broadcast_to(evaluate_array(e, b), batch) if e is not None
                     else np.zeros(batch) for e in row] for row in sigma_exprs]
            return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)
        sigma = DiffusionMatrixField.from_callable(matrix_fn, dim, horizon)

    closed_form = None
    if fb_exprs[0] is not None:
        def fb_fn(expr):
            def fn(t, x, p1, p2, heav, _e=expr):
                b = state_bindings(x)
                b["t"] = np.asarray(t, dtype=np.float64)
                p1 = np.asarray(p1, dtype=np.float64)
                p2 = np.asarray(p2, dtype=np.float64)
                for k in range(dim):
                    b[f"p1_{k + 1}"] = p1[..., k]
                    b[f"p2_{k + 1}"] = p2[..., k]
                b["eps"] = float(getattr(heav, "epsilon", 0.0))
                return evaluate_array(_e, b)
            return fn
        closed_form = (fb_fn(fb_exprs[0]), fb_fn(fb_exprs[1]))

    return GameSpec(
        name=scen["name"], dim_x=dim, horizon=horizon, sigma=sigma,
        drift=coeff_fn(drift_exprs, stacked=True),
        running_payoff_1=coeff_fn([h_exprs[0]], stacked=False),
        running_payoff_2=coeff_fn([h_exprs[1]], stacked=False),
        terminal_payoff_1=terminal_fn(g_exprs[0]),
        terminal_payoff_2=terminal_fn(g_exprs[1]),
        control_set_1=cs1, control_set_2=cs2, structure=structure,
        growth_exponent=growth, feedback_closed_form=closed_form,
        description=scen.get("description", "user-defined scenario"))


# ─── artifacts ───────────────────────────────────────────────────────────────

def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_text(cfg: RunConfig, body: list[str]) -> str:
    head = [f"# nashpde {__version__}", f"# config_hash = {cfg.config_hash}"]
    head += [f"# {line}" for line in cfg.effective_lines()]
    return "\n".join(head + body) + "\n"


def field_csv_text(field: ValueField) -> str:
    grid = field.grid
    dim = grid.dim
    cols = (["s"] + [f"x{k + 1}" for k in range(dim)] + ["V1", "V2"]
            + [f"dV{i}_dx{k + 1}" for i in (1, 2) for k in range(dim)])
    nodes = grid.nodes().reshape(-1, dim)
    out = [",".join(cols)]
    for m, s in enumerate(grid.s_levels()):
        v1 = field.values[0][m].reshape(-1)
        v2 = field.values[1][m].reshape(-1)
        d1 = field.gradients[0][m].reshape(-1, dim)
        d2 = field.gradients[1][m].reshape(-1, dim)
        s_txt = repr(float(s))
        for j in range(nodes.shape[0]):
            row = [s_txt]
            row += [repr(float(c)) for c in nodes[j]]
            row += [repr(float(v1[j])), repr(float(v2[j]))]
            row += [repr(float(c)) for c in d1[j]]
            row += [repr(float(c)) for c in d2[j]]
            out.append(",".join(row))
    return "\n".join(out) + "\n"


def load_field_csv(path: str) -> ValueField:
    """Rebuild a value surface from a dump; gradients are recomputed from the
    value columns (they are finite differences of them by construction)."""
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read field file {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"malformed field file {path}: {exc}") from None
    dim = sum(1 for c in header if c.startswith("x"))
    if dim not in (1, 2) or header[:dim + 3] != (
            ["s"] + [f"x{k + 1}" for k in range(dim)] + ["V1", "V2"]):
        raise ConfigError(f"field file {path} has an unexpected header: {header}")
    s_vals = np.unique(data[:, 0])
    x_vals = np.unique(data[:, 1])
    levels, nodes = len(s_vals), len(x_vals)
    if data.shape[0] != levels * nodes ** dim:
        raise ConfigError(
            f"field file {path}: {data.shape[0]} rows do not fill a "
            f"{levels} x {nodes}^{dim} lattice")
    grid = Grid(dim, float(x_vals[-1]), nodes, levels - 1, float(s_vals[-1]))
    shape = (levels,) + grid.shape
    v1 = data[:, dim + 1].reshape(shape)
    v2 = data[:, dim + 2].reshape(shape)
    return ValueField.from_values(grid, v1, v2)


# ─── report bodies ───────────────────────────────────────────────────────────

def _validate_body(report) -> list[str]:
    b = ["command = validate", f"scenario = {report.scenario}",
         f"samples_used = {report.samples_used}"]
    for key, okflag in report.flag_items():
        b.append(f"{key} = {_fmt(okflag)}")
    b.append(f"ellipticity_margin = {_fmt(report.ellipticity_margin)}")
    b.append(f"ellipticity_bounds = {_fmt(report.ellipticity_bounds[0])},"
             f"{_fmt(report.ellipticity_bounds[1])}")
    for name in sorted(report.boundedness_sups):
        b.append(f"sup.{name} = {_fmt(report.boundedness_sups[name])}")
    for name in sorted(report.growth_constants):
        b.append(f"growth.{name} = {_fmt(report.growth_constants[name])}")
    b.append(f"structure_residual = {_fmt(report.structure_residual)}")
    for i, msg in enumerate(report.messages):
        b.append(f"message_{i + 1} = {msg}")
    b.append(f"ok = {_fmt(report.ok)}")
    return b


def _solve_body(cfg: RunConfig, stability, wrote_field: bool) -> list[str]:
    b = ["command = solve", f"scenario = {cfg.spec.name}"]
    for r, diag in zip(stability.radii, stability.diagnostics):
        tag = f"radius_{r:g}"
        b.append(f"{tag}.converged = {_fmt(diag.converged)}")
        b.append(f"{tag}.iterations = {diag.iterations_used}")
        b.append(f"{tag}.final_epsilon = {_fmt(diag.final_epsilon)}")
        b.append(f"{tag}.epsilon_schedule = "
                 + ",".join(_fmt(e) for e in diag.epsilon_schedule))
        b.append(f"{tag}.max_principle_margin = {_fmt(diag.max_principle_margin)}")
        b.append(f"{tag}.residual_sup = {_fmt(diag.pde_residual_interior[0])}")
        b.append(f"{tag}.residual_mean_abs = {_fmt(diag.pde_residual_interior[1])}")
        b.append(f"{tag}.cfl = {_fmt(diag.cfl_number)}")
    b.append(f"stability.core_radius = {_fmt(stability.core_radius)}")
    for (r_small, r_big), pair in zip(zip(stability.radii, stability.radii[1:]),
                                      stability.core_sup_diffs):
        b.append(f"stability.core_sup_diff_{r_small:g}_to_{r_big:g} = "
                 f"{_fmt(pair[0])},{_fmt(pair[1])}")
    for r, gc in zip(stability.radii, stability.growth_constants):
        b.append(f"growth_constant_{r:g} = {_fmt(gc[0])},{_fmt(gc[1])}")
    b.append(f"all_converged = {_fmt(stability.all_converged)}")
    b.append(f"field_csv_written = {_fmt(wrote_field)}")
    return b


def _verify_body(cfg: RunConfig, vm, gc) -> list[str]:
    b = ["command = verify", f"scenario = {cfg.spec.name}"]
    for i in (1, 2):
        e = vm.estimates[i - 1]
        b.append(f"value_match.p{i}.surface = {_fmt(vm.pde_values[i - 1])}")
        b.append(f"value_match.p{i}.mc_mean = {_fmt(e.mean)}")
        b.append(f"value_match.p{i}.mc_stderr = {_fmt(e.stderr)}")
        b.append(f"value_match.p{i}.gap = {_fmt(vm.gaps[i - 1])}")
        b.append(f"value_match.p{i}.tolerance = {_fmt(vm.tolerances[i - 1])}")
    b.append(f"value_match.exit_fraction = {_fmt(vm.estimates[0].exit_fraction)}")
    b.append(f"value_match.ok = {_fmt(vm.ok)}")
    for i in (1, 2):
        b.append(f"girsanov.p{i}.weighted_mean = {_fmt(gc.girsanov[i - 1].mean)}")
        b.append(f"girsanov.p{i}.controlled_mean = {_fmt(gc.controlled[i - 1].mean)}")
        b.append(f"girsanov.p{i}.difference = {_fmt(gc.differences[i - 1])}")
        b.append(f"girsanov.p{i}.combined_stderr = {_fmt(gc.combined_stderr[i - 1])}")
    b.append(f"girsanov.weight_mean = {_fmt(gc.girsanov[0].weight_mean)}")
    b.append(f"girsanov.weight_stderr = {_fmt(gc.girsanov[0].weight_stderr)}")
    b.append(f"girsanov.weight_ok = {_fmt(gc.weight_ok)}")
    b.append(f"girsanov.ok = {_fmt(gc.ok)}")
    for est in (vm.estimates[0], gc.girsanov[0], gc.controlled[0]):
        for j, w in enumerate(est.warnings):
            b.append(f"warning.{est.mode}_{j + 1} = {w}")
    b.append(f"ok = {_fmt(vm.ok and gc.ok)}")
    return b


def _deviate_body(cfg: RunConfig, report) -> list[str]:
    b = ["command = deviate", f"scenario = {report.scenario}",
         f"seed = {report.seed}", f"n_paths = {report.n_paths}",
         f"n_steps = {report.n_steps}", f"allowance = {_fmt(report.allowance)}"]
    for i in (1, 2):
        e = report.equilibrium[i - 1]
        b.append(f"equilibrium.p{i}.mean = {_fmt(e.mean)}")
        b.append(f"equilibrium.p{i}.stderr = {_fmt(e.stderr)}")
    b.append(f"deviations = {len(report.rows)}")
    b.append(f"ok = {_fmt(report.ok)}")
    return b


# ─── deviation suite parsing ─────────────────────────────────────────────────

def _parse_deviations(cfg: RunConfig) -> list[DeviationStrategy]:
    text = cfg.deviations.strip()
    if text == "default":
        return default_deviations(cfg.spec, seed=cfg.mc.seed,
                                  pieces=cfg.deviation_pieces)
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part or not part.startswith("u"):
            raise ConfigError(
                f"mc.deviations: want 'default' or 'u1=<num>; u2=<num>; ...', got {part!r}")
        lhs, rhs = part.split("=", 1)
        if lhs.strip() not in ("u1", "u2"):
            raise ConfigError(f"mc.deviations: unknown control {lhs.strip()!r}")
        player = int(lhs.strip()[1])
        try:
            value = float(rhs)
        except ValueError:
            raise ConfigError(f"mc.deviations: not a number: {rhs!r}") from None
        out.append(DeviationStrategy.constant(player, value, cfg.spec.horizon))
    if not out:
        raise ConfigError("mc.deviations: empty suite")
    return out


# ─── commands ────────────────────────────────────────────────────────────────

def _emit(quiet: bool, text: str) -> None:
    if not quiet:
        print(text, end="" if text.endswith("\n") else "\n")


def _solve_fields(cfg: RunConfig):
    return expanding_domain_solve(
        cfg.spec, cfg.base_grid(), cfg.radii, cfg.resolver(), tol=cfg.tol,
        max_iter=cfg.max_iter, epsilon_schedule=cfg.epsilon_schedule,
        core_radius=cfg.core_radius)


def _cmd_scenarios(cfg, args) -> int:
    for name in scenario_names():
        _emit(args.quiet, f"{name:20s} {builtin_scenario(name).description}")
    return EXIT_OK


def _cmd_validate(cfg: RunConfig, args) -> int:
    try:
        report = validate_spec(cfg.spec, seed=cfg.mc.seed)
    except GameSpecError as exc:
        _emit(False, f"validation failed: {exc}")
        return EXIT_VERIFY
    text = report_text(cfg, _validate_body(report))
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_atomic(os.path.join(cfg.out_dir, "validate_report.txt"), text)
    _emit(args.quiet, text)
    return EXIT_OK if report.ok else EXIT_VERIFY


def _cmd_solve(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    fields, stability = _solve_fields(cfg)
    if not stability.all_converged:
        _emit(False, "solve did not converge within solver.max_iter; no artifacts written")
        return EXIT_SOLVE
    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.field_dump:
        _write_atomic(os.path.join(cfg.out_dir, FIELD_CSV), field_csv_text(fields))
    text = report_text(cfg, _solve_body(cfg, stability, cfg.field_dump))
    _write_atomic(os.path.join(cfg.out_dir, "solve_report.txt"), text)
    _emit(args.quiet, text)
    _emit(args.quiet, f"phase solve: {time.perf_counter() - t0:.2f} s")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, args) -> int:
    fields = load_field_csv(os.path.join(cfg.out_dir, FIELD_CSV))
    if fields.grid.dim != cfg.spec.dim_x:
        raise ConfigError("stored field dimension does not match the scenario")
    resolver = cfg.resolver()
    t0 = time.perf_counter()
    vm = value_match_test(cfg.spec, fields, resolver, cfg.mc)
    t1 = time.perf_counter()
    gc = girsanov_consistency(cfg.spec, fields, resolver, cfg.mc)
    t2 = time.perf_counter()
    text = report_text(cfg, _verify_body(cfg, vm, gc))
    _write_atomic(os.path.join(cfg.out_dir, "verify_report.txt"), text)
    _emit(args.quiet, text)
    _emit(args.quiet, f"phase value-match: {t1 - t0:.2f} s")
    _emit(args.quiet, f"phase measure-change: {t2 - t1:.2f} s")
    if not (vm.ok and gc.ok):
        _emit(False, "verification failed (see report above)")
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_deviate(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    fields, stability = _solve_fields(cfg)
    if not stability.all_converged:
        _emit(False, "solve did not converge within solver.max_iter; no artifacts written")
        return EXIT_SOLVE
    report = deviation_test(cfg.spec, fields, cfg.resolver(), cfg.mc,
                            deviations=_parse_deviations(cfg))
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_atomic(os.path.join(cfg.out_dir, "nash_report.csv"),
                  "\n".join(report.csv_lines()) + "\n")
    text = report_text(cfg, _deviate_body(cfg, report))
    _write_atomic(os.path.join(cfg.out_dir, "nash_report.txt"), text)
    _emit(args.quiet, text)
    _emit(args.quiet, f"phase deviate: {time.perf_counter() - t0:.2f} s")
    return EXIT_OK if report.ok else EXIT_VERIFY


def _cmd_export(cfg: RunConfig, args) -> int:
    fields = load_field_csv(os.path.join(cfg.out_dir, FIELD_CSV))
    out = os.path.join(cfg.out_dir, "field_export.csv")
    _write_atomic(out, field_csv_text(fields))
    _emit(args.quiet, f"re-emitted {fields.grid.time_steps + 1} levels x "
                      f"{fields.grid.nodes_per_axis}^{fields.grid.dim} nodes to {out}")
    return EXIT_OK


_COMMANDS = {
    "scenarios": _cmd_scenarios,
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "deviate": _cmd_deviate,
    "export": _cmd_export,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nashpde",
        description="solve two-player stochastic differential games and "
                    "verify the Nash property of the computed feedbacks")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("scenarios", "list built-in scenarios"),
            ("validate", "sampled health check of the scenario coefficients"),
            ("solve", "solve on expanding boxes and dump the value surface"),
            ("verify", "value-match and measure-change checks against a stored surface"),
            ("deviate", "unilateral-deviation audit of the solved feedbacks"),
            ("export", "round-trip a stored field CSV")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--scenario", help="built-in scenario name")
        p.add_argument("--config", help="INI config path")
        p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                       help="override one config value (repeatable)")
        p.add_argument("--out-dir", help="artifact directory (default: out)")
        p.add_argument("--seed", type=int, help="override mc.seed")
        p.add_argument("--quiet", action="store_true", help="suppress stdout reports")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = None
        if args.command != "scenarios":
            cfg = load_config(args.config, args.scenario, args.set,
                              args.out_dir, args.seed)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ResolveError, ValueError) as exc:
        print(f"solve error: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
