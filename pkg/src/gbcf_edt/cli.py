"""Command-line front end.

Every option can come from three places, highest precedence first: a
command-line flag, a ``key = value`` config file given with ``--config``, or
a packaged preset given with ``--preset``; anything left unset falls back to
the built-in default.  Config keys are the long flag names with dashes
replaced by underscores.  Data goes to stdout (or ``--output``), diagnostics
go to stderr as one JSON object per line.

Exit codes: 0 success, 1 invalid input (usage, config, parameter domain),
2 non-termination or numeric degeneracy of the OL recursion.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable

from . import bounds as bd
from . import experiments as ex
from .model import DomainError, validate_params
from .montecarlo import McConfig, NonTerminationError, default_threads, mse_trajectory, simulate
from .olscheme import DegeneracyError, run_to_distortion, threshold_crossing

__all__ = ["ConfigError", "UsageError", "Invocation", "load_config", "parse_invocation", "run", "main"]

COMMANDS = ("bounds", "curve", "ol-run", "ol-mc", "gap", "convergence")


class UsageError(Exception):
    pass


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _float_list(text: str) -> list[float]:
    items = [t.strip() for t in str(text).split(",")]
    if not items or any(not t for t in items):
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}")
    return [float(t) for t in items]


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def convert(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    convert.__name__ = "choice"
    return convert


@dataclass(frozen=True)
class Option:
    convert: Callable[[str], Any]
    default: Any
    help: str
    commands: tuple[str, ...] = COMMANDS
    metavar: str | None = None


_D_CMDS = ("bounds", "ol-run", "ol-mc", "convergence")
_POWER_CMDS = ("ol-run", "ol-mc")
_GAP_RHO_S = [round(0.05 * i, 2) for i in range(20)]

OPTIONS: dict[str, Option] = {
    "sigma_s2": Option(float, 1.0, "source variance sigma_s^2 [source-units^2]"),
    "rho_s": Option(float, 0.0, "source correlation rho_s, |rho_s| < 1 [dimensionless]"),
    "sigma_z2": Option(float, 1.0, "noise variance sigma_z^2 [channel-units^2]"),
    "rho_z": Option(float, 0.0, "noise correlation rho_z, |rho_z| < 1 [dimensionless]"),
    "d": Option(float, 0.5, "target per-user MSE, 0 < d <= sigma_s2 [source-units^2]", _D_CMDS),
    "power": Option(float, 1e-3, "power per channel use P > 0 [channel-units^2]", _POWER_CMDS),
    "max_steps": Option(
        int,
        None,
        "cap on channel uses (default: ceil(8 sigma_z2 ln(sigma_s2/d) / P)) [channel uses]",
        ("ol-run", "ol-mc", "convergence"),
    ),
    "samples": Option(int, 100000, "number of simulated source pairs m [samples]", ("ol-mc",)),
    "seed": Option(int, 0, "master seed of the per-sample random streams [integer]", ("ol-mc",)),
    "threads": Option(
        int,
        None,
        "worker threads (default: $GBCF_EDT_THREADS, else CPU count) [threads]",
        ("ol-mc",),
    ),
    "trajectory": Option(
        _bool, False, "emit the per-step trajectory instead of the summary report [flag]", ("ol-mc",)
    ),
    "d_min": Option(
        float, None, "smallest distortion of the grid (default: 0.05 sigma_s2) [source-units^2]",
        ("curve", "gap"),
    ),
    "d_max": Option(
        float, None, "largest distortion of the grid (default: sigma_s2) [source-units^2]",
        ("curve", "gap"),
    ),
    "d_points": Option(int, 96, "number of log-spaced distortion points [points]", ("curve", "gap")),
    "rho_s_grid": Option(
        _float_list,
        None,
        "comma list of rho_s values (curve default: the single rho_s; "
        "gap default: 0,0.05,...,0.95) [dimensionless]",
        ("curve", "gap"),
        "LIST",
    ),
    "rho_z_grid": Option(
        _float_list, None, "comma list of rho_z values (default: the single rho_z) [dimensionless]",
        ("curve",), "LIST",
    ),
    "kind": Option(
        _choice(*ex.GAP_KINDS), "ol_minus_sep_rho_s",
        f"gap to tabulate: {' or '.join(ex.GAP_KINDS)} [energy-per-sample]", ("gap",),
    ),
    "powers": Option(
        _float_list, [1e-2, 1e-3, 1e-4],
        "strictly decreasing comma list of powers P (default: 0.01,0.001,0.0001) [channel-units^2]",
        ("convergence",), "LIST",
    ),
    "format": Option(_choice("csv", "json"), None, "output format: csv or json (default: csv; json for ol-mc reports) [csv|json]"),
    "output": Option(str, None, "write data to this file (default: stdout) [path]", metavar="PATH"),
}

PRESETS = ("curves_vs_rho_s", "curves_vs_rho_z", "gap_ol_minus_sep_rho_s", "gap_sep_rho_z_minus_ol")


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _convert(key: str, raw, source: str):
    opt = OPTIONS[key]
    try:
        return opt.convert(raw)
    except (TypeError, ValueError) as exc:
        raise DomainError(key, f"invalid value {raw!r} from {source}: {exc}") from None


def load_config(path: str) -> dict[str, Any]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config_text(text, source=path)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    settings: dict[str, Any] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in OPTIONS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in settings:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ConfigError(f"missing value for {key!r}", lineno)
        settings[key] = _convert(key, value, f"{source}:{lineno}")
    return settings


def load_preset(name: str) -> dict[str, Any]:
    if name not in PRESETS:
        raise DomainError("preset", f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    text = resources.files("gbcf_edt").joinpath("configs", f"{name}.cfg").read_text("utf-8")
    return parse_config_text(text, source=f"preset:{name}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_EPILOG = (
    "Built-in defaults: sigma_s2 = sigma_z2 = 1, rho_s = rho_z = 0. "
    "Precedence: flag > --config file > --preset > built-in default. "
    "Exit codes: 0 ok, 1 invalid input, 2 non-termination/degeneracy."
)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gbcf-edt",
        description="Energy-distortion tradeoff bounds and Ozarow-Leung scheme simulation "
        "for the two-user Gaussian broadcast channel with feedback.",
        epilog=_EPILOG,
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    summaries = {
        "bounds": "all closed-form energy bounds at one distortion",
        "curve": "bounds over a distortion grid (CSV d,e_lb,e_sep_rho_s,e_sep_rho_z,e_ol)",
        "ol-run": "deterministic OL recursion trace (CSV step,alpha,rho_tilde,cum_energy)",
        "ol-mc": "Monte-Carlo simulation of the OL scheme (JSON report)",
        "gap": "energy gap surface over distortion and |rho_s| (CSV d,abs_rho_s,gap)",
        "convergence": "P*K_OL(P,d) against the closed-form limit "
        "(CSV power,k,energy,e_ol_closed,rel_gap)",
    }
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=summaries[name], description=summaries[name], epilog=_EPILOG)
        cmd.add_argument(
            "--config", metavar="PATH", default=argparse.SUPPRESS,
            help="flat key = value file with option defaults (default: none) [path]",
        )
        if name in ("curve", "gap"):
            cmd.add_argument(
                "--preset", choices=PRESETS, metavar="NAME", default=argparse.SUPPRESS,
                help=f"packaged sweep configuration, overridden by the config file: "
                f"{', '.join(PRESETS)} (default: none) [name]",
            )
        for key, opt in OPTIONS.items():
            if name not in opt.commands:
                continue
            default = opt.default
            if isinstance(default, list):
                default = ",".join(ex.format_number(v) for v in default)
            text = opt.help if "default:" in opt.help else f"{opt.help} (default: {default})"
            if key == "trajectory":
                cmd.add_argument(
                    _flag(key), action="store_const", const="true", default=argparse.SUPPRESS,
                    help=text,
                )
            else:
                cmd.add_argument(
                    _flag(key), metavar=opt.metavar or key.upper(), default=argparse.SUPPRESS,
                    help=text,
                )
    return parser


@dataclass
class Invocation:
    command: str
    settings: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.settings[key]


def parse_invocation(argv: list[str]) -> Invocation:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command", None)
    if command is None:
        raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
    merged = {k: o.default for k, o in OPTIONS.items() if command in o.commands}
    layers = []
    if "preset" in ns:
        layers.append(load_preset(ns.pop("preset")))
    if "config" in ns:
        layers.append(load_config(ns.pop("config")))
    flags = {k: _convert(k, v, _flag(k)) for k, v in ns.items()}
    layers.append(flags)
    for layer in layers:
        for key, value in layer.items():
            # keys for other commands are allowed in shared config files and ignored here
            if command in OPTIONS[key].commands:
                merged[key] = value
    return Invocation(command, merged)


def _jsonable(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(out, obj) -> None:
    out.write(json.dumps(_jsonable(obj), indent=2) + "\n")


def _report(err, kind: str, message: str, **extra) -> None:
    err.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def _params(inv: Invocation):
    return validate_params(inv["sigma_s2"], inv["rho_s"], inv["sigma_z2"], inv["rho_z"])


def _d_grid(inv: Invocation, sigma_s2: float) -> list[float]:
    d_min = inv["d_min"] if inv["d_min"] is not None else 0.05 * sigma_s2
    d_max = inv["d_max"] if inv["d_max"] is not None else sigma_s2
    return ex.log_grid(d_min, d_max, inv["d_points"])


def _cmd_bounds(inv, out, err) -> int:
    p = _params(inv)
    b = bd.bounds_bundle(p, inv["d"])
    record = {"d": inv["d"], **b.as_dict()}
    if inv["format"] == "json":
        _write_json(out, record)
    else:
        cols = list(record)
        ex.write_csv(out, cols, [tuple(record[c] for c in cols)])
    return 0


def _cmd_curve(inv, out, err) -> int:
    p = _params(inv)
    spec = ex.SweepSpec(
        base=p,
        d_grid=tuple(_d_grid(inv, p.sigma_s2)),
        rho_s_grid=inv["rho_s_grid"],
        rho_z_grid=inv["rho_z_grid"],
    )
    rows = ex.curve_sweep(spec)
    cols = ["d", "e_lb", "e_sep_rho_s", "e_sep_rho_z", "e_ol"]
    if spec.multi:
        cols = ["rho_s", "rho_z"] + cols
    if inv["format"] == "json":
        _write_json(out, [{c: getattr(r, c) for c in cols} for r in rows])
    else:
        ex.write_csv(out, cols, (ex.row_values(r, cols) for r in rows))
    return 0


def _cmd_gap(inv, out, err) -> int:
    p = _params(inv)
    rho_s_grid = inv["rho_s_grid"] if inv["rho_s_grid"] is not None else _GAP_RHO_S
    grid = ex.gap_surface(
        p.rho_z, _d_grid(inv, p.sigma_s2), rho_s_grid, inv["kind"], p.sigma_s2, p.sigma_z2
    )
    if inv["format"] == "json":
        _write_json(
            out,
            {
                "kind": grid.kind,
                "rho_z": grid.rho_z,
                "d_axis": grid.d_axis,
                "abs_rho_s_axis": grid.abs_rho_s_axis,
                "values": grid.values,
            },
        )
    else:
        ex.write_csv(out, ["d", "abs_rho_s", "gap"], grid.rows())
    return 0


def _cmd_ol_run(inv, out, err) -> int:
    p = _params(inv)
    run = run_to_distortion(p, inv["power"], inv["d"], inv["max_steps"])
    if inv["format"] == "json":
        crossing = threshold_crossing(run.trace) if p.rho_s > 0 else None
        _write_json(
            out,
            {
                "power": run.power,
                "d": inv["d"],
                "k_ol": run.k_ol,
                "total_energy": run.total_energy,
                "terminated": run.terminated,
                "final_alpha": run.final.alpha,
                "final_rho_tilde": run.final.rho_tilde,
                "d_th": bd.distortion_threshold(p),
                "crossing_step": crossing.step if crossing else None,
                "crossing_alpha": crossing.alpha if crossing else None,
                "e_ol_closed": bd.energy_ol_closed(p, inv["d"]),
            },
        )
    else:
        ex.write_csv(out, ["step", "alpha", "rho_tilde", "cum_energy"], run.trace)
    if not run.terminated:
        _report(err, "non_termination", f"alpha did not reach d within {run.k_ol} steps",
                steps=run.k_ol)
        return 2
    return 0


def _cmd_ol_mc(inv, out, err) -> int:
    p = _params(inv)
    cfg = McConfig(
        params=p,
        power=inv["power"],
        distortion=inv["d"],
        n_samples=inv["samples"],
        seed=inv["seed"],
        max_steps=inv["max_steps"],
    )
    threads = inv["threads"]
    if threads is not None and threads < 1:
        raise DomainError("threads", f"threads must be >= 1, got {threads}")
    threads = threads or default_threads()
    if inv["trajectory"]:
        rows = mse_trajectory(cfg, threads=threads)
        cols = ["step", "empirical_alpha", "analytic_alpha", "empirical_rho", "analytic_rho",
                "empirical_power"]
        if inv["format"] == "json":
            _write_json(out, [{c: getattr(r, c) for c in cols} for r in rows])
        else:
            ex.write_csv(out, cols, (ex.row_values(r, cols) for r in rows))
    else:
        if inv["format"] == "csv":
            raise DomainError("format", "the ol-mc report is JSON only; use --trajectory for CSV")
        _write_json(out, simulate(cfg, threads=threads).as_dict())
    return 0


def _cmd_convergence(inv, out, err) -> int:
    p = _params(inv)
    rows = ex.convergence_study(p, inv["d"], inv["powers"], inv["max_steps"])
    cols = ["power", "k", "energy", "e_ol_closed", "rel_gap"]
    if inv["format"] == "json":
        _write_json(out, [{c: getattr(r, c) for c in cols + ["terminated"]} for r in rows])
    else:
        ex.write_csv(out, cols, (ex.row_values(r, cols) for r in rows))
    stuck = [r.power for r in rows if not r.terminated]
    for power in stuck:
        _report(err, "non_termination", f"power {power!r} hit max_steps", power=power)
    return 2 if stuck else 0


_HANDLERS = {
    "bounds": _cmd_bounds,
    "curve": _cmd_curve,
    "ol-run": _cmd_ol_run,
    "ol-mc": _cmd_ol_mc,
    "gap": _cmd_gap,
    "convergence": _cmd_convergence,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    """Execute one invocation and return its exit code."""
    out = stdout if stdout is not None else sys.stdout
    err = stderr if stderr is not None else sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        inv = parse_invocation(argv)
        if inv.command == "ol-mc" and inv["format"] is None and not inv["trajectory"]:
            inv.settings["format"] = "json"
        elif inv["format"] is None:
            inv.settings["format"] = "csv"
        handler = _HANDLERS[inv.command]
        if inv["output"]:
            # buffer so that a failing run leaves no partial file
            buf = io.StringIO()
            code = handler(inv, buf, err)
            with open(inv["output"], "w", encoding="utf-8", newline="\n") as fh:
                fh.write(buf.getvalue())
            return code
        return handler(inv, out, err)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        _report(err, "usage", str(exc))
        return 1
    except ConfigError as exc:
        _report(err, "config", str(exc), line=exc.line)
        return 1
    except DomainError as exc:
        _report(err, "validation", str(exc), field=exc.field)
        return 1
    except (NonTerminationError, DegeneracyError) as exc:
        kind = "non_termination" if isinstance(exc, NonTerminationError) else "degeneracy"
        _report(err, kind, str(exc))
        return 2


def main() -> None:
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(newline="\n")
    sys.exit(run())


if __name__ == "__main__":
    main()
