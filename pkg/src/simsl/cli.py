"""Command-line interface: ``simsl <subcommand> [flags]``.

Exit status is 0 on success, 1 for invalid input (bad flags, config keys,
CSV content) and 2 for numerical failures inside the estimator.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .doserule import DEFAULT_GRID_SIZE, estimate_value_test, optimal_dose
from .errors import DataError, InputError, NumericalError, ParameterError
from .model import Dataset, SimslConfig, SimslModel, bootstrap_beta_ci, fit_simsl
from .simulation import ScenarioSpec, gen_scenario, run_benchmark

logger = logging.getLogger(__name__)

FAMILIES = ("gaussian", "bernoulli", "poisson")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


# ---------------------------------------------------------------------------
# output helpers


def fmt(v) -> str:
    """Shortest decimal that round-trips the double (never fewer digits than needed)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_atomic(path, text: str) -> None:
    """Write ``text`` to a sibling temp file and rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# input helpers


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV with a header row; errors name the line and column."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"--data: no such file: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if len(set(header)) != len(header) or any(not h for h in header):
            raise DataError(f"{path}: line 1: header has empty or duplicate column names")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: line {line}, column {name!r}: cannot parse {cell!r} as a number") from None
                if not np.isfinite(v):
                    raise DataError(f"{path}: line {line}, column {name!r}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def _column(header, table, name, flag):
    if name not in header:
        raise DataError(f"{flag}: column {name!r} not found; available: {', '.join(header)}")
    return table[:, header.index(name)]


def augment_columns(names, x, augment: str):
    if augment == "raw":
        return list(names), x
    if augment != "quadratic":
        raise ParameterError("--augment must be 'raw' or 'quadratic'")
    keep = [j for j in range(x.shape[1]) if np.unique(x[:, j]).size > 2]
    return list(names) + [f"{names[j]}^2" for j in keep], np.hstack([x, x[:, keep] ** 2])


def load_dataset(opts, need_outcome=True) -> Dataset:
    header, table = read_table(opts.data)
    outcome, dose = opts.outcome, opts.dose
    if need_outcome and not outcome:
        raise ParameterError("--outcome is required")
    if not dose:
        raise ParameterError("--dose is required")
    if opts.covariates:
        covs = [c.strip() for c in opts.covariates.split(",") if c.strip()]
    else:
        covs = [h for h in header if h not in (outcome, dose)]
    if not covs:
        raise ParameterError("--covariates: no covariate columns selected")
    x = np.column_stack([_column(header, table, c, "--covariates") for c in covs])
    names, x = augment_columns(covs, x, opts.augment)
    y = _column(header, table, outcome, "--outcome")
    a = _column(header, table, dose, "--dose")
    return Dataset(y, a, x, tuple(names))


def covariates_for_model(header, table, model: SimslModel) -> np.ndarray:
    """Model covariates from a table; ``name^2`` columns are rebuilt from ``name`` when absent."""
    cols = []
    for name in model.column_names:
        if name in header:
            cols.append(table[:, header.index(name)])
        elif name.endswith("^2") and name[:-2] in header:
            cols.append(table[:, header.index(name[:-2])] ** 2)
        else:
            raise DataError(f"--data: model covariate {name!r} not found")
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# options


_SHARED = {
    "seed": 0,
    "threads": None,
    "family": "gaussian",
    "augment": "raw",
    "num_basis_u": 8,
    "num_basis_a": 8,
    "max_outer_iter": 30,
    "beta_tol": 1e-4,
    "main_effects": False,
    "grid_size": DEFAULT_GRID_SIZE,
}

DEFAULTS = {
    "fit": {**_SHARED, "data": None, "outcome": None, "dose": None, "covariates": None, "out": None},
    "predict-dose": {"model": None, "data": None, "out": None, "grid_size": DEFAULT_GRID_SIZE,
                     "outcome": None, "dose": None, "value_out": None},
    "simulate": {"scenario": None, "n": None, "p": None, "seed": 0, "noise_sd": 1.0, "out": None},
    "benchmark": {**_SHARED, "scenario": None, "n": None, "p": None, "augment": None, "replicates": 20,
                  "test_size": 5000, "out": None, "summary": None, "timings": False},
    "export-surface": {"model": None, "grid": "50x50", "out": None},
    "bootstrap": {**_SHARED, "data": None, "outcome": None, "dose": None, "covariates": None,
                  "n_boot": 500, "level": 0.95, "out": None},
}

REQUIRED = {
    "fit": ("data", "outcome", "dose", "out"),
    "predict-dose": ("model", "data", "out"),
    "simulate": ("scenario", "n", "out"),
    "benchmark": ("scenario", "n", "out"),
    "export-surface": ("model", "out"),
    "bootstrap": ("data", "outcome", "dose", "out"),
}


def _add_model_flags(p):
    p.add_argument("--family", help="gaussian, bernoulli or poisson")
    p.add_argument("--augment", help="raw or quadratic (append squares of continuous covariates)")
    p.add_argument("--num-basis-u", type=int)
    p.add_argument("--num-basis-a", type=int)
    p.add_argument("--max-outer-iter", type=int)
    p.add_argument("--beta-tol", type=float)
    p.add_argument("--main-effects", action="store_const", const=True,
                   help="add additive covariate main effects to the surface fit")
    p.add_argument("--threads", type=int, help="worker processes (default: $SIMSL_THREADS or all cores)")
    p.add_argument("--seed", type=int)


def _add_data_flags(p):
    p.add_argument("--data", help="input CSV with a header row")
    p.add_argument("--outcome", help="outcome column name")
    p.add_argument("--dose", help="dose column name")
    p.add_argument("--covariates", help="comma-separated covariate columns (default: all others)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simsl", description="Single-index models with a surface link for dose rules.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def command(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of option values; flags take precedence")
        return p

    p = command("fit", "fit a model and save it as JSON")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", help="model JSON path")

    p = command("predict-dose", "recommend doses for covariate rows")
    p.add_argument("--model")
    p.add_argument("--data", help="CSV holding the model's covariate columns")
    p.add_argument("--grid-size", type=int)
    p.add_argument("--outcome", help="with --dose and --value-out, also estimate the rule's value")
    p.add_argument("--dose")
    p.add_argument("--value-out", help="JSON path for the test-set value estimate")
    p.add_argument("--out", help="CSV path: row,dose")

    p = command("simulate", "draw a simulation scenario dataset")
    p.add_argument("--scenario", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--noise-sd", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV path: Y,A,X1..Xp")

    p = command("benchmark", "run the replicate value benchmark")
    p.add_argument("--scenario", help="scenario id or comma list")
    p.add_argument("--n", help="training size or comma list")
    p.add_argument("--p", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--test-size", type=int)
    p.add_argument("--grid-size", type=int)
    _add_model_flags(p)
    p.add_argument("--timings", action="store_const", const=True,
                   help="record fit_seconds (makes output run-dependent)")
    p.add_argument("--out", help="per-replicate CSV")
    p.add_argument("--summary", help="per-cell summary CSV")

    p = command("export-surface", "write the fitted surface on a u-by-dose lattice")
    p.add_argument("--model")
    p.add_argument("--grid", help="GxH lattice size, e.g. 50x40")
    p.add_argument("--out", help="CSV path: u,a,g,mean")

    p = command("bootstrap", "normal-approximation bootstrap intervals for beta")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--n-boot", type=int)
    p.add_argument("--level", type=float)
    p.add_argument("--out", help="CSV path: column,estimate,lower,upper,sd")
    return parser


def resolve_options(args) -> argparse.Namespace:
    """Merge defaults, the JSON config and explicit flags (in increasing precedence)."""
    command = args.command
    defaults = DEFAULTS[command]
    opts = dict(defaults)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ParameterError(f"--config: no such file: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ParameterError(f"--config: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ParameterError("--config: top level must be an object")
        unknown = sorted(k for k in doc if k.replace("-", "_") not in defaults)
        if unknown:
            raise ParameterError(f"--config: unknown key(s) for {command}: {', '.join(unknown)}")
        opts.update({k.replace("-", "_"): v for k, v in doc.items()})
    for key in defaults:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    missing = [k for k in REQUIRED[command] if opts.get(k) in (None, "")]
    if missing:
        raise ParameterError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    if "family" in opts and opts["family"] not in FAMILIES:
        raise ParameterError(f"--family: unsupported family {opts['family']!r}; supported families: {', '.join(FAMILIES)}")
    opts["threads"] = resolve_threads(opts.get("threads"))
    return argparse.Namespace(command=command, **opts)


def resolve_threads(value) -> int:
    if value is None:
        env = os.environ.get("SIMSL_THREADS")
        if env:
            try:
                value = int(env)
            except ValueError:
                raise ParameterError(f"SIMSL_THREADS must be an integer, got {env!r}") from None
        else:
            value = os.cpu_count() or 1
    value = int(value)
    if value < 1:
        raise ParameterError("--threads must be at least 1")
    return value


def model_config(opts) -> SimslConfig:
    return SimslConfig(
        family=opts.family,
        num_basis_u=int(opts.num_basis_u),
        num_basis_a=int(opts.num_basis_a),
        max_outer_iter=int(opts.max_outer_iter),
        beta_tol=float(opts.beta_tol),
        include_main_effects=bool(opts.main_effects),
        seed=int(opts.seed),
    )


def _int_list(text, flag):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ParameterError(f"{flag}: expected an integer or comma list, got {text!r}") from None


def parse_grid(text) -> tuple[int, int]:
    try:
        g, h = (int(t) for t in str(text).lower().split("x"))
    except ValueError:
        raise ParameterError(f"--grid: expected GxH, got {text!r}") from None
    if g < 2 or h < 2:
        raise ParameterError("--grid: both lattice sizes must be at least 2")
    return g, h


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(opts) -> None:
    config = model_config(opts)
    data = load_dataset(opts)
    model = fit_simsl(data, config)
    write_atomic(opts.out, model.to_json() + "\n")
    logger.info("fit: converged=%s after %d iterations", model.converged, model.outer_iterations)


def cmd_predict_dose(opts) -> None:
    if opts.value_out and not (opts.outcome and opts.dose):
        raise ParameterError("--value-out needs --outcome and --dose")
    model = SimslModel.load(opts.model)
    header, table = read_table(opts.data)
    x = covariates_for_model(header, table, model)
    doses = optimal_dose(model, x, grid_size=int(opts.grid_size))
    write_atomic(opts.out, csv_text(["row", "dose"], [(i, doses[i]) for i in range(doses.size)]))
    if opts.value_out:
        y = _column(header, table, opts.outcome, "--outcome")
        a = _column(header, table, opts.dose, "--dose")
        ev = estimate_value_test(y, a, doses)
        report = ev.report()
        report["degenerate"] = ev.degenerate
        write_atomic(opts.value_out, json.dumps(report, indent=2) + "\n")


def cmd_simulate(opts) -> None:
    spec = ScenarioSpec(int(opts.scenario), int(opts.n), None if opts.p is None else int(opts.p),
                        augment="raw", noise_sd=float(opts.noise_sd))
    sim = gen_scenario(spec, int(opts.seed))
    x = sim.x_raw
    header = ["Y", "A"] + [f"X{j + 1}" for j in range(x.shape[1])]
    rows = (
        (sim.dataset.y[i], sim.dataset.a[i], *x[i]) for i in range(x.shape[0])
    )
    write_atomic(opts.out, csv_text(header, rows))


def cmd_benchmark(opts) -> None:
    scenarios = _int_list(opts.scenario, "--scenario")
    sizes = _int_list(opts.n, "--n")
    p = None if opts.p is None else int(opts.p)
    specs = [ScenarioSpec(s, n, p, opts.augment) for s in scenarios for n in sizes]
    result = run_benchmark(specs, int(opts.replicates), seed=int(opts.seed), test_size=int(opts.test_size),
                           config=model_config(opts), threads=opts.threads, grid_size=int(opts.grid_size))
    timings = bool(opts.timings)
    rows = [
        (r.scenario, r.n, r.replicate, r.value, r.converged, r.fit_seconds if timings else "")
        for r in result.replicates
    ]
    write_atomic(opts.out, csv_text(["scenario", "n", "replicate", "value", "converged", "fit_seconds"], rows))
    if opts.summary:
        srows = [(s.scenario, s.n, s.mean_value, s.sd_value, s.replicates, s.failures) for s in result.summary]
        write_atomic(opts.summary, csv_text(["scenario", "n", "mean_value", "sd_value", "replicates", "failures"], srows))


def cmd_export_surface(opts) -> None:
    model = SimslModel.load(opts.model)
    g, h = parse_grid(opts.grid)
    us = np.linspace(*model.u_range, g)
    doses = np.linspace(*model.a_range, h)
    surf = model.final.intercept + model.final.grid(us, doses)
    mean = model.family.inverse_link(surf)
    rows = ((us[i], doses[j], surf[i, j], mean[i, j]) for i in range(g) for j in range(h))
    write_atomic(opts.out, csv_text(["u", "a", "g", "mean"], rows))


def cmd_bootstrap(opts) -> None:
    config = model_config(opts)
    data = load_dataset(opts)
    res = bootstrap_beta_ci(data, config, n_boot=int(opts.n_boot), level=float(opts.level), threads=opts.threads)
    rows = [
        (name, res.estimate[j], res.lower[j], res.upper[j], res.sd[j])
        for j, name in enumerate(res.column_names)
    ]
    write_atomic(opts.out, csv_text(["column", "estimate", "lower", "upper", "sd"], rows))


COMMANDS = {
    "fit": cmd_fit,
    "predict-dose": cmd_predict_dose,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
    "export-surface": cmd_export_surface,
    "bootstrap": cmd_bootstrap,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
        opts = resolve_options(args)
        COMMANDS[opts.command](opts)
    except InputError as exc:
        print(f"simsl: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"simsl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
