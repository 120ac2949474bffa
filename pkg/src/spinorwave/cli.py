"""Command-line entry points: check, evolve, converge.

Configuration is an INI file with sections [scenario], [grid],
[evolution], [output]; every key has a flag-independent default and the
flags --resolution, --order, --cfl, --t-end, --out override the file.

Exit codes: 0 success, 2 bad configuration or usage, 3 constraint
failure of the initial data, 4 evolution halt or convergence verdict
failure.  Failures write a machine-readable error.json into the output
directory; constraint failures write nothing else.
"""

import argparse
import configparser
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import reporting
from .constraints import InitialSurfaceData, check_initial_data, f_on_slice
from .diagnostics import REPORT_COLUMNS, monitor_row, write_rows_csv
from .evolution import EvolutionConfig, build_initial_state, evolve
from .scenarios import SCENARIOS, get_scenario

__all__ = ["RunConfig", "load_config", "main"]

# final-time norms compared across resolutions by `converge`
CONVERGE_NORMS = ["sup_grad_phi", "sup_grad_E", "sup_V_phi", "sup_E",
                  "sup_g_VV", "l2_grad_phi", "l2_grad_E", "l2_V_phi",
                  "l2_E", "l2_g_VV"]


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    scenario: str = "minkowski"
    params: dict = field(default_factory=dict)
    corrupt: dict = field(default_factory=dict)
    check_tol: float = 0.0      # 0: use the scenario's declared tolerance
    resolution: int = 0         # 0: use the scenario's default
    resolutions: tuple = ()     # converge only; empty: (32, 64, 128)
    order: int = 4
    cfl: float = 0.25
    t_end: float = 1.0
    dt: float = 0.0
    monitor_every: int = 1
    history_len: int = 6
    max_gauge: float = math.inf
    min_eig: float = 1e-10
    out: str = ""
    figures: bool = True
    checkpoint_every: int = 0   # 0: first and last slice only

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"available: {', '.join(sorted(SCENARIOS))}")
        if self.order not in (2, 4):
            raise ConfigError("order must be 2 or 4")
        if self.resolution < 0 or self.resolution == 1:
            raise ConfigError("resolution must be 0 (default) or >= 2")
        if not 0 < self.cfl <= 1:
            raise ConfigError("cfl must be in (0, 1]")
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")
        if self.dt < 0:
            raise ConfigError("dt must be >= 0")
        if self.monitor_every < 0 or self.checkpoint_every < 0:
            raise ConfigError("cadences must be >= 0")
        if self.history_len < 2:
            raise ConfigError("history_len must be >= 2")
        if self.min_eig <= 0 or self.max_gauge <= 0:
            raise ConfigError("halt thresholds must be positive")
        if any(r < 2 for r in self.resolutions):
            raise ConfigError("resolutions must each be >= 2")
        if self.check_tol < 0:
            raise ConfigError("check_tol must be >= 0")

    def evolution_config(self):
        return EvolutionConfig(
            t_end=self.t_end, cfl=self.cfl, dt=self.dt,
            monitor_every=self.monitor_every,
            slice_every=self.checkpoint_every,
            history_len=self.history_len,
            max_gauge=self.max_gauge, min_eig=self.min_eig)


def _coerce(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    return text


def _parse_corrupt(text):
    """'field:factor[,field:factor...]' with fields g, w, phi, lapse, f."""
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            name, factor = part.split(":")
            out[name.strip()] = float(factor)
        except ValueError:
            raise ConfigError(f"bad corruption spec {part!r}; "
                              "expected field:factor") from None
    bad = set(out) - {"g", "w", "phi", "lapse", "f"}
    if bad:
        raise ConfigError(f"unknown corruption fields: {sorted(bad)}")
    return out


def load_config(path=None):
    """RunConfig from an INI file; missing file or no path gives defaults."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    known = {sec: True for sec in ("scenario", "grid", "evolution", "output")}
    for sec in parser.sections():
        if sec not in known:
            raise ConfigError(f"unknown config section [{sec}]")

    if parser.has_section("scenario"):
        for key, val in parser.items("scenario"):
            if key == "name":
                cfg.scenario = val.strip()
            elif key == "check_tol":
                cfg.check_tol = float(val)
            elif key == "corrupt":
                cfg.corrupt = _parse_corrupt(val)
            else:
                cfg.params[key] = _coerce(val)
    if parser.has_section("grid"):
        for key, val in parser.items("grid"):
            if key == "resolution":
                cfg.resolution = int(val)
            elif key == "resolutions":
                cfg.resolutions = tuple(int(v) for v in val.split(","))
            elif key == "order":
                cfg.order = int(val)
            else:
                raise ConfigError(f"unknown [grid] key {key!r}")
    if parser.has_section("evolution"):
        floats = {"cfl", "t_end", "dt", "max_gauge", "min_eig"}
        ints = {"monitor_every", "history_len"}
        for key, val in parser.items("evolution"):
            if key in floats:
                setattr(cfg, key, float(val))
            elif key in ints:
                setattr(cfg, key, int(val))
            else:
                raise ConfigError(f"unknown [evolution] key {key!r}")
    if parser.has_section("output"):
        for key, val in parser.items("output"):
            if key == "dir":
                cfg.out = val.strip()
            elif key == "figures":
                cfg.figures = bool(_coerce(val))
            elif key == "checkpoint_every":
                cfg.checkpoint_every = int(val)
            else:
                raise ConfigError(f"unknown [output] key {key!r}")
    return cfg


def _apply_flags(cfg, args):
    if args.resolution is not None:
        cfg.resolution = args.resolution
    if getattr(args, "resolutions", None):
        cfg.resolutions = tuple(int(v) for v in args.resolutions.split(","))
    if args.order is not None:
        cfg.order = args.order
    if args.cfl is not None:
        cfg.cfl = args.cfl
    if args.t_end is not None:
        cfg.t_end = args.t_end
    if args.out is not None:
        cfg.out = args.out
    if getattr(args, "corrupt", None):
        cfg.corrupt = _parse_corrupt(args.corrupt)
    cfg.validate()
    return cfg


def _corrupted(data, corrupt, f_init):
    """Multiplies the named fields; returns (data, f_init)."""
    if not corrupt:
        return data, f_init
    g = data.g_sigma * corrupt.get("g", 1.0)
    w = data.w_mixed * corrupt.get("w", 1.0)
    phi = data.phi * corrupt.get("phi", 1.0)
    lapse = data.lapse * corrupt.get("lapse", 1.0)
    data = InitialSurfaceData(data.grid, g, w, phi, lapse)
    if f_init is not None and "f" in corrupt:
        f_init = f_init * corrupt["f"]
    return data, f_init


def _build(cfg):
    """(scenario, system, data, extras, tol) from a validated config."""
    scenario = get_scenario(cfg.scenario)
    try:
        system, data, extras = scenario.build(
            cfg.resolution or None, order=cfg.order, **cfg.params)
    except TypeError as err:
        raise ConfigError(f"bad scenario parameters: {err}") from None
    data, f_init = _corrupted(data, cfg.corrupt, extras.get("f_init"))
    extras = dict(extras, f_init=f_init)
    tol = cfg.check_tol or scenario.check_tol
    return scenario, system, data, extras, tol


def _f_deviation(data, extras, order):
    """Sup distance between the declared source term and the one the
    slice data implies; None when the scenario declares no source."""
    f_init = extras.get("f_init")
    if f_init is None:
        return None
    return float(np.max(np.abs(f_init - f_on_slice(data, order))))


def _write_error(out, kind, message, detail=None):
    if not out:
        return
    os.makedirs(out, exist_ok=True)
    record = {"error": kind, "message": message}
    if detail:
        record["detail"] = detail
    with open(os.path.join(out, "error.json"), "w") as fh:
        json.dump(record, fh, indent=2)
        fh.write("\n")


def _report_rows(report, data, extras, order):
    rows = list(report.rows())
    dev = _f_deviation(data, extras, order)
    if dev is not None:
        rows.append(("f_consistency", dev))
    return rows


def _data_ok(report, rows, tol):
    dev = dict(rows).get("f_consistency", 0.0)
    return report.admissible(tol) and dev <= tol


def _print_report(report, rows, tol):
    for name, value in rows:
        print(f"  {name:<22} {value: .6e}")
    status = "PASS" if _data_ok(report, rows, tol) else "FAIL"
    print(f"  admissible (tol {tol:.1e}): {status}")
    flat = report.codazzi <= tol
    note = "Ricci-flat development expected" if flat \
        else "source term f active"
    print(f"  divergence criterion: {'PASS' if flat else 'not satisfied'}"
          f" ({note})")


def cmd_check(cfg):
    scenario, system, data, extras, tol = _build(cfg)
    report = check_initial_data(data, system.rep, system.order)
    rows = _report_rows(report, data, extras, system.order)
    print(f"check: scenario {scenario.name}, resolution "
          f"{data.grid.shape}, order {system.order}")
    _print_report(report, rows, tol)
    if not _data_ok(report, rows, tol):
        _write_error(cfg.out, "constraint",
                     "initial data fails declared thresholds", dict(rows))
        return 3
    return 0


def _write_checkpoint(out, system, state, step):
    path = os.path.join(out, f"checkpoint_{step:06d}.npz")
    grid = system.grid
    np.savez(path,
             n=grid.n, shape=np.array(grid.shape),
             spacing=np.array(grid.spacing), t=state.t,
             order=system.order,
             g=state.g, dgs=state.dgs, k=state.k, f=state.f,
             phi_re=state.phi.real, phi_im=state.phi.imag)
    return path


def _run(cfg, system, data, extras, tol, with_artifacts):
    """Shared evolve path; returns (result, exit_code)."""
    report = check_initial_data(data, system.rep, system.order)
    rows = _report_rows(report, data, extras, system.order)
    if not _data_ok(report, rows, tol):
        _write_error(cfg.out, "constraint",
                     "initial data fails declared thresholds", dict(rows))
        print("constraint failure:", file=sys.stderr)
        for name, value in rows:
            print(f"  {name:<22} {value: .6e}", file=sys.stderr)
        return None, 3

    state = build_initial_state(system, data, f_init=extras.get("f_init"),
                                check="off")
    out = cfg.out
    slice_cb = None
    if with_artifacts and out:
        os.makedirs(out, exist_ok=True)
        slice_cb = lambda st, step: _write_checkpoint(out, system, st, step)
    result = evolve(system, state, cfg.evolution_config(),
                    monitor=monitor_row, slice_cb=slice_cb)

    if with_artifacts and out:
        if result.rows:
            write_rows_csv(result.rows, os.path.join(out, "diagnostics.csv"))
            if cfg.figures:
                reporting.plot_diagnostics(
                    result.rows, os.path.join(out, "diagnostics.png"),
                    title=cfg.scenario)
    if result.halt != "completed":
        _write_error(out, "halt", result.halt,
                     {"t": result.state.t, "steps": result.steps})
        print(f"halted: {result.halt}", file=sys.stderr)
        return result, 4
    return result, 0


def cmd_evolve(cfg):
    scenario, system, data, extras, tol = _build(cfg)
    result, code = _run(cfg, system, data, extras, tol, with_artifacts=True)
    if code:
        return code
    last = result.rows[-1] if result.rows else {}
    print(f"evolve: scenario {scenario.name}, {result.steps} steps, "
          f"dt {result.dt:.3e}, t {result.state.t:.6f}")
    for name in ("sup_E", "sup_grad_phi", "ricci_residual"):
        if name in last and not math.isnan(last[name]):
            print(f"  {name:<14} {last[name]: .6e}")
    if cfg.out:
        print(f"  artifacts in {cfg.out}")
    return 0


def cmd_converge(cfg):
    resolutions = cfg.resolutions or (32, 64, 128)
    if len(resolutions) < 3:
        raise ConfigError("converge needs at least 3 resolutions")
    scenario = get_scenario(cfg.scenario)
    errors = {name: [] for name in CONVERGE_NORMS}
    has_oracle = None
    for res in resolutions:
        run_cfg = dataclasses.replace(cfg, resolution=res, monitor_every=0,
                                      checkpoint_every=0, figures=False)
        _, system, data, extras, tol = _build(run_cfg)
        result, code = _run(run_cfg, system, data, extras, tol,
                            with_artifacts=False)
        if code:
            return code
        last = result.rows[-1]
        for name in CONVERGE_NORMS:
            errors[name].append(abs(last[name]))
        oracle = extras.get("metric_oracle")
        if has_oracle is None:
            has_oracle = oracle is not None
            if has_oracle:
                errors["metric_error"] = []
        if oracle is not None:
            exact = oracle.metric(result.state.t, system.grid)
            errors["metric_error"].append(
                float(np.max(np.abs(result.state.g - exact))))

    threshold = cfg.order - 0.5
    table = reporting.convergence_table(resolutions, errors,
                                        declared_order=cfg.order,
                                        threshold=threshold)
    print(f"converge: scenario {scenario.name}, order {cfg.order}, "
          f"t_end {cfg.t_end:g}")
    print(table, end="")
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "convergence.txt"), "w") as fh:
            fh.write(table)
        reporting.write_convergence_csv(
            os.path.join(cfg.out, "convergence.csv"), resolutions, errors)
        if cfg.figures:
            reporting.plot_convergence(
                resolutions, errors, os.path.join(cfg.out, "convergence.png"),
                declared_order=cfg.order, title=cfg.scenario)
        print(f"  artifacts in {cfg.out}")
    verdicts = reporting.convergence_verdicts(resolutions, errors, threshold)
    if not all(verdicts.values()):
        failed = sorted(name for name, ok in verdicts.items() if not ok)
        _write_error(cfg.out, "convergence",
                     "observed order below declared order - 0.5",
                     {"failed": failed})
        return 4
    return 0


def _parser():
    parser = argparse.ArgumentParser(
        prog="spinorwave",
        description="Evolve initial data for metrics with parallel "
                    "spinors and monitor the constraint quantities.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--scenario", choices=sorted(SCENARIOS),
                        help="scenario name (overrides the config file)")
    common.add_argument("--resolution", type=int,
                        help="grid points per active dimension")
    common.add_argument("--order", type=int, choices=(2, 4),
                        help="finite-difference stencil order")
    common.add_argument("--cfl", type=float, help="CFL number in (0, 1]")
    common.add_argument("--t-end", type=float, dest="t_end",
                        help="final coordinate time")
    common.add_argument("--out", help="output directory for artifacts")

    sub = parser.add_subparsers(dest="command", required=True)
    check = sub.add_parser("check", parents=[common],
                           help="evaluate initial-data constraints")
    evolve_p = sub.add_parser("evolve", parents=[common],
                              help="run an evolution and write artifacts")
    evolve_p.add_argument("--corrupt",
                          help="field:factor[,field:factor] multiplicative "
                               "corruption of the initial data "
                               "(fields g, w, phi, lapse, f)")
    conv = sub.add_parser("converge", parents=[common],
                          help="refinement study over several resolutions")
    conv.add_argument("--resolutions",
                      help="comma-separated list, at least 3 (default "
                           "32,64,128)")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.scenario:
            cfg.scenario = args.scenario
        cfg = _apply_flags(cfg, args)
        handler = {"check": cmd_check, "evolve": cmd_evolve,
                   "converge": cmd_converge}[args.command]
        return handler(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
