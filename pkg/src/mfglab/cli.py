"""Scenario runner: flat-key config files in, delimited tables (and figures) out.

Config format: one ``dotted.key = value`` per line, ``#`` comments allowed.
The model block is mandatory and has no defaults for q, T, x0 (figures in
the source material depend on them, so they must be stated explicitly):

    model.q = 0.5
    model.T = 1.0
    model.x0 = 1.0
    # model.sigma = 1.0        optional, default 1
    # grid.n_steps = 2000      optional
    # solver.tol = 1e-10       optional
    # output.path = out.csv    or --out
    # output.format = csv      csv | json, or --format

Each subcommand reads its own block (``solve.*``, ``sweep.*``, ``pstar.*``,
``deviate.*``, ``figures.*``). Outputs are deterministic: fixed column
order, 12 significant digits, LF line endings, and a provenance comment
line that re-parses into the resolved scenario.

Exit codes: 0 success, 2 configuration error, 3 solver error, 1 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import costs, deviation, equilibria
from .errors import ConfigError, EmptyRangeError, MfgLabError
from .model import ModelParams, TimeGrid

log = logging.getLogger("mfglab")

TASKS = ("solve", "sweep", "poi", "pstar", "deviate", "figures")
SOLVE_KINDS = ("mfg", "mfc", "lambda", "p_partial", "best_response")
SWEEP_AXES = ("p", "lambda", "q")


@dataclass(frozen=True)
class Scenario:
    """One resolved run: model, grid, a single task, and output routing."""

    params: ModelParams
    n_steps: int
    tol: float
    task: str
    task_args: tuple[tuple[str, str], ...]  # raw key/value pairs of the task block
    out_path: str
    out_format: str

    def grid(self) -> TimeGrid:
        return TimeGrid(n_steps=self.n_steps, T=self.params.T)

    def task_dict(self) -> dict[str, str]:
        return dict(self.task_args)


# ----------------------------------------------------------------- parsing

def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat ``key = value`` lines into a dict; duplicate keys rejected."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}", "empty key")
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = value
    return out


def _as_float(cfg: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(key, "required field is missing")
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(key, f"not a number: {cfg[key]!r}") from exc


def _as_int(cfg: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in cfg:
        if default is None:
            raise ConfigError(key, "required field is missing")
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(key, f"not an integer: {cfg[key]!r}") from exc


def _as_choice(cfg: dict[str, str], key: str, choices: tuple[str, ...],
               default: str | None = None) -> str:
    if key not in cfg:
        if default is None:
            raise ConfigError(key, "required field is missing")
        return default
    value = cfg[key]
    if value not in choices:
        raise ConfigError(key, f"must be one of {choices}, got {value!r}")
    return value


def _as_float_list(cfg: dict[str, str], key: str) -> list[float]:
    if key not in cfg:
        raise ConfigError(key, "required field is missing")
    try:
        return [float(tok) for tok in cfg[key].split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(key, f"not a comma-separated number list: {cfg[key]!r}") from exc


_KNOWN_GLOBAL = {"model.q", "model.T", "model.x0", "model.sigma", "grid.n_steps",
                 "solver.tol", "output.path", "output.format", "task"}
_KNOWN_TASK_KEYS = {
    "solve": {"solve.kind", "solve.p", "solve.lambda", "solve.env"},
    "sweep": {"sweep.axis", "sweep.from", "sweep.to", "sweep.points"},
    "poi": set(),
    "pstar": {"pstar.tol", "pstar.scan_points"},
    "deviate": {"deviate.mode", "deviate.p", "deviate.q_tilde",
                "deviate.iterations", "deviate.tol"},
    "figures": {"figures.q_list", "figures.points"},
}
_ALL_KNOWN = _KNOWN_GLOBAL | set().union(*_KNOWN_TASK_KEYS.values())


def build_scenario(cfg: dict[str, str], task: str,
                   overrides: dict[str, str] | None = None) -> Scenario:
    """Resolve a raw config dict plus CLI overrides into a Scenario."""
    if task not in TASKS:
        raise ConfigError("task", f"unknown task {task!r}")
    cfg = dict(cfg)
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    for key in cfg:
        if key not in _ALL_KNOWN:
            raise ConfigError(key, "unknown field")
    if "task" in cfg and cfg["task"] != task:
        raise ConfigError("task", f"config names task {cfg['task']!r} but "
                                  f"subcommand is {task!r}")

    try:
        params = ModelParams(
            q=_as_float(cfg, "model.q"),
            T=_as_float(cfg, "model.T"),
            x0=_as_float(cfg, "model.x0"),
            sigma=_as_float(cfg, "model.sigma", 1.0),
        )
    except MfgLabError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("model", str(exc)) from exc
    n_steps = _as_int(cfg, "grid.n_steps", 2000)
    if n_steps < 2:
        raise ConfigError("grid.n_steps", f"must be >= 2, got {n_steps}")
    tol = _as_float(cfg, "solver.tol", 1e-10)
    out_path = cfg.get("output.path")
    if not out_path:
        raise ConfigError("output.path", "required field is missing (or pass --out)")
    out_format = _as_choice(cfg, "output.format", ("csv", "json"), "csv")

    task_keys = _KNOWN_TASK_KEYS[task]
    task_args = tuple(sorted((k, v) for k, v in cfg.items() if k in task_keys))
    scenario = Scenario(params=params, n_steps=n_steps, tol=tol, task=task,
                        task_args=task_args, out_path=out_path,
                        out_format=out_format)
    _validate_task(scenario)  # fail fast on bad task blocks
    return scenario


def _validate_task(scenario: Scenario) -> None:
    cfg = scenario.task_dict()
    if scenario.task == "solve":
        kind = _as_choice(cfg, "solve.kind", SOLVE_KINDS)
        if kind == "p_partial":
            _as_float(cfg, "solve.p")
        elif kind == "lambda":
            _as_float(cfg, "solve.lambda")
        elif kind == "best_response":
            _as_float(cfg, "solve.env")
    elif scenario.task == "sweep":
        _as_choice(cfg, "sweep.axis", SWEEP_AXES)
        _as_float(cfg, "sweep.from")
        _as_float(cfg, "sweep.to")
        _as_int(cfg, "sweep.points")
    elif scenario.task == "deviate":
        mode = _as_choice(cfg, "deviate.mode", ("fixed_point", "fictitious"))
        if mode == "fixed_point":
            _as_float_list(cfg, "deviate.p")
        else:
            _as_float(cfg, "deviate.q_tilde")
    elif scenario.task == "figures":
        _as_float_list(cfg, "figures.q_list")


# ------------------------------------------------------------- provenance

def _fmt_value(v: float | int | str) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def scenario_config_dict(scenario: Scenario) -> dict[str, str]:
    """Canonical flat representation; parses back into an equal Scenario."""
    cfg = {
        "task": scenario.task,
        "model.q": _fmt_value(scenario.params.q),
        "model.T": _fmt_value(scenario.params.T),
        "model.x0": _fmt_value(scenario.params.x0),
        "model.sigma": _fmt_value(scenario.params.sigma),
        "grid.n_steps": str(scenario.n_steps),
        "solver.tol": _fmt_value(scenario.tol),
        "output.path": scenario.out_path,
        "output.format": scenario.out_format,
    }
    cfg.update(dict(scenario.task_args))
    return dict(sorted(cfg.items()))


def provenance_line(scenario: Scenario) -> str:
    pairs = " ".join(f"{k}={v}" for k, v in scenario_config_dict(scenario).items())
    return f"# scenario: {pairs}"


def parse_provenance_line(line: str) -> Scenario:
    """Rebuild the Scenario from an emitted provenance comment."""
    prefix = "# scenario: "
    if not line.startswith(prefix):
        raise ConfigError("provenance", f"not a provenance line: {line!r}")
    cfg: dict[str, str] = {}
    for token in line[len(prefix):].split(" "):
        if not token:
            continue
        key, _, value = token.partition("=")
        cfg[key] = value
    task = cfg.get("task")
    if task is None:
        raise ConfigError("task", "provenance line lacks a task")
    return build_scenario(cfg, task)


# ----------------------------------------------------------------- output

def _fmt_cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _json_cell(v):
    if isinstance(v, float):
        if math.isnan(v):
            return None
        return float(f"{v:.12g}")
    return v


def write_table(scenario: Scenario, path: Path, columns: list[str],
                rows: list[list], summary: dict | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if scenario.out_format == "csv":
        lines = [provenance_line(scenario), ",".join(columns)]
        lines += [",".join(_fmt_cell(v) for v in row) for row in rows]
        if summary:
            pairs = " ".join(f"{k}={_fmt_cell(v)}" for k, v in sorted(summary.items()))
            lines.append(f"# summary: {pairs}")
        path.write_text("\n".join(lines) + "\n", newline="\n")
    else:
        doc = {
            "scenario": scenario_config_dict(scenario),
            "columns": columns,
            "rows": [dict(zip(columns, (_json_cell(v) for v in row))) for row in rows],
        }
        if summary:
            doc["summary"] = {k: _json_cell(v) for k, v in sorted(summary.items())}
        path.write_text(json.dumps(doc, indent=1) + "\n", newline="\n")


# ------------------------------------------------------------------ tasks

def _run_solve(scenario: Scenario) -> tuple[list[str], list[list], dict | None]:
    cfg = scenario.task_dict()
    params, grid = scenario.params, scenario.grid()
    kind = _as_choice(cfg, "solve.kind", SOLVE_KINDS)
    if kind == "mfg":
        eq = equilibria.solve_mfg(params, grid, tol=scenario.tol)
        return ["kind", "xbar_T", "cost"], [[kind, eq.xbar_T, eq.cost]], None
    if kind == "mfc":
        eq = equilibria.solve_mfc(params, grid, tol=scenario.tol)
        return ["kind", "xbar_T", "cost"], [[kind, eq.xbar_T, eq.cost]], None
    if kind == "lambda":
        lam = _as_float(cfg, "solve.lambda")
        eq = equilibria.solve_lambda_interpolated(params, lam, grid, tol=scenario.tol)
        return (["kind", "lambda", "xbar_T", "cost"],
                [[kind, lam, eq.xbar_T, eq.cost]], None)
    if kind == "best_response":
        env = _as_float(cfg, "solve.env")
        eq = equilibria.best_response(params, equilibria.EnvironmentMean(env), grid,
                                      tol=scenario.tol)
        return (["kind", "env", "xbar_T", "cost"],
                [[kind, env, eq.xbar_T, eq.cost]], None)
    p = _as_float(cfg, "solve.p")
    part = equilibria.solve_p_partial(params, p, grid, tol=scenario.tol)
    return (["kind", "p", "deviator_xbar_T", "population_xbar_T", "hat_J_p", "star_J_p"],
            [[kind, p, part.deviator.xbar_T, part.population_xbar_T,
              part.hat_J_p, part.star_J_p]], None)


def _sweep_values(cfg: dict[str, str]) -> list[float]:
    lo = _as_float(cfg, "sweep.from")
    hi = _as_float(cfg, "sweep.to")
    points = _as_int(cfg, "sweep.points")
    if points < 1 or hi < lo:
        raise EmptyRangeError(f"sweep range [{lo}, {hi}] with {points} points is empty")
    if points == 1:
        return [lo]
    step = (hi - lo) / (points - 1)
    return [lo + i * step for i in range(points)]


def _run_sweep(scenario: Scenario) -> tuple[list[str], list[list], dict | None]:
    cfg = scenario.task_dict()
    params, grid = scenario.params, scenario.grid()
    axis = _as_choice(cfg, "sweep.axis", SWEEP_AXES)
    values = _sweep_values(cfg)
    rows: list[list] = []
    skipped = 0
    for v in values:
        try:
            if axis == "p":
                rep = costs.cost_report(params, v, grid)
                rows.append([v, rep.hat_J_p, rep.star_J_p, rep.J_star])
            elif axis == "lambda":
                eq = equilibria.solve_lambda_interpolated(params, v, grid, tol=scenario.tol)
                rows.append([v, eq.xbar_T, eq.cost])
            else:
                pv = ModelParams(q=v, T=params.T, x0=params.x0, sigma=params.sigma)
                res = costs.p_star(pv, grid)
                rep = costs.cost_report(pv, 0.0, grid)
                rows.append([v, res.value, res.status, rep.PoI, rep.PoA])
        except MfgLabError as exc:
            skipped += 1
            log.warning("sweep point %s=%g skipped: %s", axis, v, exc)
    columns = {"p": ["p", "hat_J_p", "star_J_p", "J_star"],
               "lambda": ["lambda", "xbar_T", "cost"],
               "q": ["q", "p_star", "status", "PoI", "PoA"]}[axis]
    summary = {"skipped": skipped} if skipped else None
    return columns, rows, summary


def _run_poi(scenario: Scenario) -> tuple[list[str], list[list], dict | None]:
    params, grid = scenario.params, scenario.grid()
    rep = costs.cost_report(params, 0.0, grid)
    diag = costs.poi_adjoint(params, grid)
    return (["J_star", "hat_J_0", "PoI", "PoA", "Y_value", "integral_Y_sq", "cancellation"],
            [[rep.J_star, rep.hat_J_0, rep.PoI, rep.PoA,
              float(diag.Y_path[0]), diag.integral_Y_sq, diag.cancellation]], None)


def _run_pstar(scenario: Scenario) -> tuple[list[str], list[list], dict | None]:
    cfg = scenario.task_dict()
    params, grid = scenario.params, scenario.grid()
    tol = _as_float(cfg, "pstar.tol", 1e-8)
    scan = _as_int(cfg, "pstar.scan_points", 101)
    res = costs.p_star(params, grid, tol=tol, scan_points=scan)
    return (["p_star", "status", "residual", "J_star", "hat_J_pstar"],
            [[res.value, res.status, res.residual, res.J_star, res.hat_at_value]], None)


def _run_deviate(scenario: Scenario) -> tuple[list[str], list[list], dict | None]:
    cfg = scenario.task_dict()
    params, grid = scenario.params, scenario.grid()
    mode = _as_choice(cfg, "deviate.mode", ("fixed_point", "fictitious"))
    n_iter = _as_int(cfg, "deviate.iterations", 200)
    tol = _as_float(cfg, "deviate.tol", 1e-10)
    if mode == "fixed_point":
        p_seq = _as_float_list(cfg, "deviate.p")
        seq = p_seq[0] if len(p_seq) == 1 else p_seq
        trace = deviation.run_fixed_point(params, seq, n_iter, tol, grid)
    else:
        trace = deviation.run_fictitious_play(params, _as_float(cfg, "deviate.q_tilde"),
                                              n_iter, grid)
    rows = [[int(n), q, pop, br, res] for n, q, pop, br, res in
            zip(trace.ns, trace.Q, trace.population_xbar_T,
                trace.best_response_xbar_T, trace.residuals)]
    summary = {"converged": trace.converged, "limit": trace.limit,
               "p_star_inf": trace.p_star_inf}
    if trace.distance_to_partial is not None:
        summary["distance_to_partial"] = trace.distance_to_partial
    return (["n", "Q_n", "population_xbar_T", "best_response_xbar_T", "residual"],
            rows, summary)


def _run_figures(scenario: Scenario, out_dir: Path) -> list[Path]:
    from . import plotting

    cfg = scenario.task_dict()
    params, grid = scenario.params, scenario.grid()
    q_list = _as_float_list(cfg, "figures.q_list")
    points = _as_int(cfg, "figures.points", 101)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    pstar_rows: list[list] = []
    for q in q_list:
        pv = ModelParams(q=q, T=params.T, x0=params.x0, sigma=params.sigma)
        try:
            ps = [i / (points - 1) for i in range(points)]
            table = [[p] for p in ps]
            rep0 = costs.cost_report(pv, 0.0, grid)
            for row, p in zip(table, ps):
                rep = costs.cost_report(pv, p, grid)
                row.extend([rep.hat_J_p, rep.star_J_p, rep.J_star])
            res = costs.p_star(pv, grid)
        except MfgLabError as exc:
            log.warning("figures point q=%g skipped: %s", q, exc)
            continue
        stem = f"costs_q{q:g}"
        csv_path = out_dir / f"{stem}.csv"
        write_table(scenario, csv_path, ["p", "hat_J_p", "star_J_p", "J_star"], table)
        png_path = out_dir / f"{stem}.png"
        plotting.render_cost_curves(
            png_path, ps, [r[1] for r in table], [r[2] for r in table],
            rep0.J_star, res.value if res.status == "root" else None, q)
        pstar_rows.append([q, res.value, res.status])
        written += [csv_path, png_path]
    if not pstar_rows:
        raise EmptyRangeError("no figure point could be evaluated")
    pstar_csv = out_dir / "pstar_vs_q.csv"
    write_table(scenario, pstar_csv, ["q", "p_star", "status"], pstar_rows)
    pstar_png = out_dir / "pstar_vs_q.png"
    plotting.render_pstar_curve(pstar_png, [r[0] for r in pstar_rows],
                                [r[1] for r in pstar_rows])
    return written + [pstar_csv, pstar_png]


def run_scenario(scenario: Scenario) -> list[Path]:
    """Execute one scenario and return the files written."""
    if scenario.task == "figures":
        return _run_figures(scenario, Path(scenario.out_path))
    runner = {"solve": _run_solve, "sweep": _run_sweep, "poi": _run_poi,
              "pstar": _run_pstar, "deviate": _run_deviate}[scenario.task]
    columns, rows, summary = runner(scenario)
    path = Path(scenario.out_path)
    write_table(scenario, path, columns, rows, summary)
    return [path]


# ------------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfglab",
        description="Equilibria, incentives and deviation dynamics for a "
                    "linear-quadratic mean field model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("solve", "solve one equilibrium concept"),
        ("sweep", "sweep a parameter axis (p, lambda or q)"),
        ("poi", "price of instability / anarchy report"),
        ("pstar", "free-rider threshold"),
        ("deviate", "iterative deviation process"),
        ("figures", "cost-curve and threshold tables plus rendered figures"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a flat key=value config file")
        p.add_argument("--out", default=None, help="output file (directory for figures)")
        p.add_argument("--format", default=None, choices=["csv", "json"])
        p.add_argument("--n-steps", default=None, type=int, dest="n_steps")
        p.add_argument("--tol", default=None, type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    overrides = {
        "output.path": args.out,
        "output.format": args.format,
        "grid.n_steps": str(args.n_steps) if args.n_steps is not None else None,
        "solver.tol": repr(args.tol) if args.tol is not None else None,
    }
    try:
        cfg = parse_config_text(text, source=args.config)
        scenario = build_scenario(cfg, args.command, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        written = run_scenario(scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MfgLabError as exc:
        print(f"solver error [{scenario.task}]: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
