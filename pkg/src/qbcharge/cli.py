"""Command line interface.

    qbcharge run --config scenario.json --out traj.csv
    qbcharge figure --panel f --out figs/
    qbcharge sweep --param gamma_up --values 0,1,2 --config base.json --out sweep.csv
    qbcharge equations --config scenario.json

Exit codes: 0 success, 2 invalid configuration, 3 integration failure,
4 system too large for the exact solver.
"""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema

from . import dynamics, panels
from .errors import CapacityError, IntegrationFailure, InvalidArgument, NotConverged, NotReached
from .moment_engine import generate_moment_system
from .scenario import ScenarioConfig

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_CAPACITY = 0, 2, 3, 4
SWEEP_PARAMS = ("gamma_up", "n_charger", "nbar", "m_reservoirs")

log = logging.getLogger("qbcharge")


class ConfigError(Exception):
    pass


def load_schema():
    text = resources.files("qbcharge").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def _field_name(err):
    path = "/".join(str(p) for p in err.absolute_path)
    if not path and err.validator == "additionalProperties":
        return "unknown key"
    return path or "<root>"


def load_config(path):
    """Read and validate a scenario file; returns ``(ScenarioConfig, method, label)``."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{path}: {_field_name(err)}: {err.message}")
    return config_from_dict(raw)


def config_from_dict(raw):
    raw = dict(raw)
    method = raw.pop("method", "meanfield")
    label = raw.pop("label", "")
    if "battery_sizes" in raw:
        raw["battery_sizes"] = tuple(raw["battery_sizes"])
    if "initial_levels" in raw:
        raw["initial_levels"] = tuple(raw["initial_levels"])
    try:
        return ScenarioConfig(**raw), method, label
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


def _overrides(args):
    return {
        "rtol": args.rtol,
        "atol": args.atol,
        "tau_max": args.tau_max,
    }


def _apply(scenario, args):
    changes = {k: v for k, v in _overrides(args).items() if v is not None}
    try:
        return scenario.replace(**changes) if changes else scenario
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


def _fmt(x):
    return f"{x:.9g}"


def write_trajectory_csv(traj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau"] + [f"E_{l}" for l in traj.labels])
        for tau, row in zip(traj.tau, traj.energies):
            w.writerow([_fmt(tau)] + [_fmt(v) for v in row])


def write_svg(traj, path, title=""):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "qbcharge"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    styles = ["-", "-", "--", "--"]
    for i, label in enumerate(traj.labels):
        ax.plot(traj.tau, traj.energies[:, i], styles[min(i, 3)], label=f"E_{label}")
    ax.set_xlabel("scaled time  N_C gamma_down t")
    ax.set_ylabel("energy density")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- commands ---------------------------------------------------------------


def cmd_run(args):
    scenario, method, _ = load_config(args.config)
    scenario = _apply(scenario, args)
    method = args.method or method
    traj = dynamics.integrate(scenario, method)
    write_trajectory_csv(traj, args.out)
    return EXIT_OK


def figure_trajectory(panel, rtol=None, atol=None, tau_max=None):
    """Trajectory for one panel; the inset reuses panel f's final horizon."""
    over = dict(rtol=rtol, atol=atol, tau_max=tau_max)
    if panel in panels.HORIZON_FROM:
        ref, _ = dynamics.run_to_steady(panels.panel_scenario(panels.HORIZON_FROM[panel], **over))
        scenario = panels.panel_scenario(panel, **{**over, "tau_max": ref.tau[-1]})
        return dynamics.integrate_meanfield(scenario)
    traj, _ = dynamics.run_to_steady(panels.panel_scenario(panel, **over))
    return traj


def cmd_figure(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chosen = list(panels.PANELS) if args.panel == "all" else [args.panel]
    for panel in chosen:
        traj = figure_trajectory(panel, args.rtol, args.atol, args.tau_max)
        write_trajectory_csv(traj, out / f"panel_{panel}.csv")
        write_svg(traj, out / f"panel_{panel}.svg", title=f"panel {panel}")
    return EXIT_OK


def _parse_values(param, text):
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            raise ConfigError(f"--values: {tok!r} is not a number") from None
        if param in ("n_charger", "m_reservoirs"):
            if v != int(v):
                raise ConfigError(f"--values: {param} needs integers, got {tok}")
            v = int(v)
        vals.append(v)
    if not vals:
        raise ConfigError("--values needs at least one value")
    return vals


def sweep_scenario(base, param, value):
    if param == "m_reservoirs":
        m = int(value)
        if m < 1:
            raise InvalidArgument("m_reservoirs must be at least 1")
        levels = (base.initial_levels[0],) + (base.initial_levels[1],) * m
        return base.replace(battery_sizes=(base.battery_sizes[0],) * m, initial_levels=levels)
    if param not in SWEEP_PARAMS:
        raise InvalidArgument(f"cannot sweep {param!r}")
    return base.replace(**{param: value})


def sweep_row(base, method, param, value):
    """One sweep point; failures are reported in the ``error`` field.

    Mean-field sweeps tolerate closure breaches (the charger undershoots
    by about one excitation, which exceeds 1e-6 in density units once
    N_C < 10^6); the breach is logged instead of discarding the row.
    """
    row = {"value": value, "steady": None, "labels": None, "tau_charge": None, "error": ""}
    kwargs = {"strict": False} if method == "meanfield" else {}
    try:
        scenario = sweep_scenario(base, param, value)
        traj, steady = dynamics.run_to_steady(scenario, method, **kwargs)
        row["steady"], row["labels"] = steady, traj.labels
        try:
            row["tau_charge"] = dynamics.charging_time(traj, "B1", steady=steady[1])
        except NotReached:
            pass
    except (InvalidArgument, IntegrationFailure, CapacityError, NotConverged) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def _sweep_worker(job):
    return sweep_row(*job)


def run_sweep(base, method, param, values, jobs=1):
    tasks = [(base, method, param, v) for v in values]
    if jobs <= 1 or len(tasks) == 1:
        return [_sweep_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_worker, tasks))


def write_sweep_csv(param, rows, path):
    width = max((len(r["labels"]) for r in rows if r["labels"]), default=2)
    labels = ["C"] + [f"B{m}" for m in range(1, width)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value"] + [f"E_{l}" for l in labels] + ["tau_charge", "error"])
        for r in rows:
            energies = [_fmt(v) for v in r["steady"]] if r["steady"] else []
            energies += [""] * (len(labels) - len(energies))
            tau = "NA" if r["tau_charge"] is None else _fmt(r["tau_charge"])
            w.writerow([param, _fmt(r["value"])] + energies + [tau, r["error"]])


def cmd_sweep(args):
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"--param must be one of {SWEEP_PARAMS}")
    base, method, _ = load_config(args.config)
    base = _apply(base, args)
    method = args.method or method
    values = _parse_values(args.param, args.values)
    jobs = args.jobs or os.cpu_count() or 1
    rows = run_sweep(base, method, args.param, values, jobs)
    write_sweep_csv(args.param, rows, args.out)
    for r in rows:
        if r["error"]:
            print(f"sweep {args.param}={r['value']}: {r['error']}", file=sys.stderr)
    return EXIT_OK if any(not r["error"] for r in rows) else EXIT_INTEGRATION


def cmd_equations(args):
    scenario, _, _ = load_config(args.config)
    text = generate_moment_system(scenario).dump()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qbcharge", description="Collective charging of spin quantum batteries.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def tolerances(sp):
        sp.add_argument("--rtol", type=float)
        sp.add_argument("--atol", type=float)
        sp.add_argument("--tau-max", dest="tau_max", type=float)

    run = sub.add_parser("run", help="integrate one scenario file and write a CSV trajectory")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--method", choices=dynamics.METHODS)
    tolerances(run)
    run.set_defaults(func=cmd_run)

    fig = sub.add_parser("figure", help="reproduce a figure panel as CSV + SVG")
    fig.add_argument("--panel", required=True, choices=list(panels.PANELS) + ["all"])
    fig.add_argument("--out", required=True, help="output directory")
    tolerances(fig)
    fig.set_defaults(func=cmd_figure)

    sw = sub.add_parser("sweep", help="steady states over a range of one parameter")
    sw.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--config", required=True, help="base scenario file")
    sw.add_argument("--out", required=True)
    sw.add_argument("--method", choices=dynamics.METHODS)
    sw.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    tolerances(sw)
    sw.set_defaults(func=cmd_sweep)

    eq = sub.add_parser("equations", help="print the generated mean-field equations")
    eq.add_argument("--config", required=True)
    eq.add_argument("--out")
    eq.set_defaults(func=cmd_equations)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (IntegrationFailure, NotConverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
