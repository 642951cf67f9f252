"""Command line front end: ``qstail <command> [options]``.

Every artifact starts with the tool version and the fully resolved config
(``# tool:`` / ``# config:`` lines in CSV, a ``meta`` block in JSON).
Feeding an artifact back through ``qstail --config ARTIFACT`` recomputes it
byte for byte; no timestamps or host data are written.

Exit codes: 0 ok, 2 config error, 3 numeric error, 4 verification failure.
Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .exact_engine import exact_pmf, mean_comparisons, normalize, pmf_tail
from .mgf_solver import ConvergenceError, SolverConfig, find_lemma_constant, solve_mgf
from .sampler import (
    DEFAULT_IS_DEPTH,
    DEFAULT_PRUNE,
    estimate_left_tail_is,
    estimate_right_tail_is,
    estimates_csv,
    plain_estimates,
    sample_values,
    slope_diagnostic,
    tune_spine,
)
from .tail_bounds import BOUND_NAMES, bound_curve_rows, make_bound

ENV_OUTPUT_DIR = "QSTAIL_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

_MGF_DEFAULTS = {"t_max": 10.0, "grid_points": 2001, "quad_nodes": 256, "tol": 1e-10, "max_iter": 200}

DEFAULTS: dict[str, dict] = {
    "exact": {"n": 10, "exact": None, "x": []},
    "mgf": dict(_MGF_DEFAULTS),
    "bounds": {
        "side": "right",
        "name": ["closed_form", "fj"],
        "x": [1.0, 2.0, 3.0, 4.0, 5.0],
        "a": 0.0,
        "offsets": [0.0, 0.0],
        "c1": None,
        "c2": None,
        **_MGF_DEFAULTS,
    },
    "simulate": {"side": "right", "x": [0.0], "n": 100_000, "depth": 30, "prune": DEFAULT_PRUNE},
    "tails": {
        "side": "left",
        "x": [2.0, 3.0, 4.0, 5.0],
        "n": 4000,
        "eps": None,
        "generations": None,
        "delta": None,
        "spine": None,
        "b": None,
        "two_sided": False,
        "tune": False,
        "n_pilot": 10_000,
        "min_hits": 10,
        "depth": DEFAULT_IS_DEPTH,
        "prune": DEFAULT_PRUNE,
    },
    "verify": {"quick": False, "only": None},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved run: command, seed, output format and command parameters.

    The output path is not part of the config; it does not affect content.
    """

    command: str
    seed: int = 0
    output_format: str = "csv"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in DEFAULTS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(DEFAULTS)}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        if self.output_format not in ("csv", "json"):
            raise ConfigError("output_format must be 'csv' or 'json'")
        unknown = set(self.params) - set(DEFAULTS[self.command])
        if unknown:
            raise ConfigError(f"unknown {self.command} parameter(s): {', '.join(sorted(unknown))}")

    @classmethod
    def build(cls, command: str, seed: int = 0, output_format: str = "csv", params: dict | None = None):
        if command not in DEFAULTS:
            raise ConfigError(f"unknown command {command!r}; choose from {', '.join(DEFAULTS)}")
        params = dict(params or {})
        unknown = set(params) - set(DEFAULTS[command])
        if unknown:
            raise ConfigError(f"unknown {command} parameter(s): {', '.join(sorted(unknown))}")
        return cls(command, seed, output_format, {**DEFAULTS[command], **params})

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - {"command", "seed", "output_format", "params"}
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        if "command" not in data:
            raise ConfigError("config needs a 'command'")
        return cls.build(data["command"], data.get("seed", 0), data.get("output_format", "csv"), data.get("params"))

    def to_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed, "output_format": self.output_format,
                "params": self.params}


def load_config(path: str) -> RunConfig:
    """Read a config or an artifact (JSON ``meta.config`` or CSV ``# config:`` line)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if "meta" in data:
            data = data["meta"].get("config")
        return RunConfig.from_dict(data)
    for line in text.splitlines():
        if line.startswith("# config: "):
            return RunConfig.from_dict(json.loads(line[len("# config: ") :]))
    raise ConfigError(f"{path} holds neither a JSON config nor a '# config:' header")


# ---------------------------------------------------------------------------
# commands; each returns (summary dict, csv header or None for estimates, rows)

def _solver_config(p) -> SolverConfig:
    return SolverConfig(**{k: p[k] for k in _MGF_DEFAULTS})


def _cmd_exact(cfg: RunConfig):
    p = cfg.params
    pmf = exact_pmf(int(p["n"]), exact=p["exact"])
    mean = pmf.mean()
    summary = {"n": pmf.n, "exact": pmf.exact, "mean": str(mean), "mean_float": float(mean),
               "mean_closed_form": str(mean_comparisons(pmf.n)), "variance": float(pmf.variance())}
    if p["x"]:
        z = normalize(pmf)
        summary["tails"] = [
            {"x": float(x), "side": side, "p": float(pmf_tail(z, x, side))}
            for x in p["x"] for side in ("left", "right")
        ]
    rows = [{"value": k, "probability": pr, "fraction": fr} for k, pr, fr in pmf.to_rows()]
    return summary, ["value", "probability", "fraction"], rows


def _cmd_mgf(cfg: RunConfig):
    table = solve_mgf(_solver_config(cfg.params))
    d1, d2 = table.psi_derivatives()
    lemmas = {}
    for side in ("left", "right"):
        lc = find_lemma_constant(side, table)
        lemmas[side] = {"a": lc.a, "slack_min": lc.slack_min, "t_argmax": lc.t_argmax}
    summary = {"residual": table.residual, "iterations": table.iteration_count,
               "psi_prime_0": d1, "psi_second_0": d2, "lemma": lemmas}
    rows = [{"t": float(t), "log_psi": float(v)} for t, v in zip(table.t_grid, table.log_psi)]
    return summary, ["t", "log_psi"], rows


def _cmd_bounds(cfg: RunConfig):
    p = cfg.params
    names = p["name"] if isinstance(p["name"], list) else [p["name"]]
    for nm in names:
        if nm not in BOUND_NAMES:
            raise ConfigError(f"unknown bound {nm!r}; choose from {', '.join(BOUND_NAMES)}")
    table = solve_mgf(_solver_config(p)) if "chernoff" in names else None
    bounds = [
        make_bound(nm, p["side"], table, a=p["a"], offsets=p["offsets"], c1=p["c1"], c2=p["c2"]) for nm in names
    ]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = bound_curve_rows(p["x"], bounds)
    summary = {"warnings": sorted({str(w.message) for w in caught})}
    return summary, ["x", "bound_name", "value", "log_value", "t_opt", "valid"], rows


def _cmd_simulate(cfg: RunConfig):
    p = cfg.params
    if p["n"] < 1:
        raise ConfigError("n must be >= 1")
    values = sample_values(int(p["n"]), int(p["depth"]), cfg.seed, float(p["prune"]))
    params = {"depth": p["depth"], "prune": p["prune"], "seed": cfg.seed}
    ests = plain_estimates(values, p["x"], p["side"], params)
    summary = {"sample_mean": float(values.mean()), "sample_variance": float(values.var()), "n": len(values)}
    return summary, None, ests


def _cmd_tails(cfg: RunConfig):
    p = cfg.params
    ests = []
    for x in p["x"]:
        if p["side"] == "left":
            ests.append(estimate_left_tail_is(x, int(p["n"]), cfg.seed, eps=p["eps"],
                                              generations=p["generations"], depth=p["depth"], prune=p["prune"]))
            continue
        delta, spine = p["delta"], p["spine"]
        if p["tune"]:
            delta, spine = tune_spine(x, int(p["n_pilot"]), cfg.seed + 1, two_sided=p["two_sided"],
                                      min_hits=int(p["min_hits"]), depth=p["depth"])
        ests.append(estimate_right_tail_is(x, int(p["n"]), cfg.seed, delta=delta, spine=spine, b=p["b"],
                                           two_sided=p["two_sided"], depth=p["depth"], prune=p["prune"]))
    summary = {}
    usable = [e for e in ests if math.isfinite(e.log_p_hat) and e.log_p_hat < 0]
    if len(usable) >= 3:
        slope, intercept, r2 = slope_diagnostic(usable, p["side"])
        summary["slope"] = {"slope": slope, "intercept": intercept, "r2": r2}
    return summary, None, ests


_COMMANDS = {"exact": _cmd_exact, "mgf": _cmd_mgf, "bounds": _cmd_bounds, "simulate": _cmd_simulate,
             "tails": _cmd_tails}


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def render(cfg: RunConfig) -> str:
    """Run ``cfg`` and return the artifact text."""
    summary, header, rows = _COMMANDS[cfg.command](cfg)
    config = cfg.to_dict()
    if header is None:  # TailEstimate rows
        body_csv = estimates_csv(rows)
        rows = [e.to_dict() for e in rows]
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        body_csv = buf.getvalue()
    if cfg.output_format == "json":
        doc = {"meta": {"tool": "qstail", "version": __version__, "config": config, "seed": cfg.seed},
               "summary": summary, "rows": rows}
        return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"
    lines = [f"# tool: qstail {__version__}", f"# config: {json.dumps(config, sort_keys=True)}",
             f"# seed: {cfg.seed}"]
    lines += [f"# {k}: {json.dumps(_json_safe(v), sort_keys=True)}" for k, v in sorted(summary.items())]
    return "\n".join(lines) + "\n" + body_csv


def _verify(cfg: RunConfig, out) -> int:
    from .verify import VerifyConfig, VerifyContext, run_all

    vc = VerifyConfig.quick(cfg.seed) if cfg.params["quick"] else VerifyConfig(seed=cfg.seed)
    only = cfg.params["only"]
    results = run_all(VerifyContext(vc), ids=set(only) if only else None, echo=lambda s: print(s, flush=True))
    failed = [r.id for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", flush=True)
    if out is not None:
        doc = {"meta": {"tool": "qstail", "version": __version__, "config": cfg.to_dict(), "seed": cfg.seed},
               "results": [r.__dict__ for r in results]}
        _write(out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_VERIFY if failed else EXIT_OK


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


# ---------------------------------------------------------------------------
# argument parsing

def _eps_arg(s):
    return s if s == "optimize" else float(s)


def _parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=S, help="64-bit seed (default 0)")
    common.add_argument("--format", dest="output_format", choices=["csv", "json"], default=S)
    common.add_argument("--output", "-o", default=S, help=f"output file (default stdout or ${ENV_OUTPUT_DIR})")

    top = argparse.ArgumentParser(prog="qstail", description=__doc__.splitlines()[0], parents=[common])
    top.add_argument("--config", default=S, help="re-run a config JSON or an emitted artifact")
    top.add_argument("--version", action="version", version=f"qstail {__version__}")
    sub = top.add_subparsers(dest="command")

    p = sub.add_parser("exact", parents=[common], help="exact law of the comparison count")
    p.add_argument("--n", type=int, default=S)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rational", dest="exact", action="store_const", const=True, default=S)
    g.add_argument("--float", dest="exact", action="store_const", const=False, default=S)
    p.add_argument("--x", type=float, nargs="+", default=S, help="report normalised tails at these x")

    def mgf_args(p):
        p.add_argument("--t-max", dest="t_max", type=float, default=S)
        p.add_argument("--grid-points", dest="grid_points", type=int, default=S)
        p.add_argument("--quad-nodes", dest="quad_nodes", type=int, default=S)
        p.add_argument("--tol", type=float, default=S)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=S)

    mgf_args(sub.add_parser("mgf", parents=[common], help="solve for log psi and the lemma constants"))

    p = sub.add_parser("bounds", parents=[common], help="evaluate tail bounds over an x grid")
    p.add_argument("--side", choices=["left", "right"], default=S)
    p.add_argument("--name", nargs="+", choices=BOUND_NAMES, default=S)
    p.add_argument("--x", type=float, nargs="+", default=S)
    p.add_argument("--a", type=float, default=S, help="lemma constant for the closed forms")
    p.add_argument("--offsets", type=float, nargs=2, default=S, metavar=("C_LO", "C_HI"))
    p.add_argument("--c1", type=float, default=S)
    p.add_argument("--c2", type=float, default=S)
    mgf_args(p)

    p = sub.add_parser("simulate", parents=[common], help="plain Monte Carlo of the truncated recursion")
    p.add_argument("--side", choices=["left", "right"], default=S)
    p.add_argument("--x", type=float, nargs="+", default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--depth", type=int, default=S)
    p.add_argument("--prune", type=float, default=S)

    p = sub.add_parser("tails", parents=[common], help="importance-sampling sweeps with slope diagnostics")
    p.add_argument("--side", choices=["left", "right"], default=S)
    p.add_argument("--x", type=float, nargs="+", default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--eps", type=_eps_arg, default=S, help="float or 'optimize'")
    p.add_argument("--generations", type=int, default=S)
    p.add_argument("--delta", type=float, default=S)
    p.add_argument("--spine", type=int, default=S)
    p.add_argument("--b", type=float, default=S)
    p.add_argument("--two-sided", dest="two_sided", action="store_true", default=S)
    p.add_argument("--tune", action="store_true", default=S, help="pick delta and spine by a pilot run")
    p.add_argument("--n-pilot", dest="n_pilot", type=int, default=S)
    p.add_argument("--min-hits", dest="min_hits", type=int, default=S)
    p.add_argument("--depth", type=int, default=S)
    p.add_argument("--prune", type=float, default=S)

    p = sub.add_parser("verify", parents=[common], help="run the consistency suite")
    p.add_argument("--quick", action="store_true", default=S)
    p.add_argument("--only", type=int, nargs="+", default=S)
    return top


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = _parser()
    try:
        ns = vars(parser.parse_args(argv))
    except SystemExit as exc:  # argparse already printed usage
        if exc.code in (0, None):
            return EXIT_OK
        return _error("ConfigError", "invalid command line", EXIT_CONFIG)
    output = ns.pop("output", None)
    try:
        if "config" in ns:
            cfg = load_config(ns.pop("config"))
            if "output_format" in ns:
                cfg = RunConfig(cfg.command, cfg.seed, ns["output_format"], cfg.params)
        else:
            command = ns.pop("command", None)
            if command is None:
                parser.print_help(sys.stderr)
                return _error("ConfigError", "no command given", EXIT_CONFIG)
            seed = ns.pop("seed", 0)
            fmt = ns.pop("output_format", "csv")
            cfg = RunConfig.build(command, seed, fmt, ns)
        if output is None and os.environ.get(ENV_OUTPUT_DIR):
            output = os.path.join(os.environ[ENV_OUTPUT_DIR], f"{cfg.command}.{cfg.output_format}")
        if cfg.command == "verify":
            return _verify(cfg, output)
        text = render(cfg)
    except (ConvergenceError, ArithmeticError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_NUMERIC)
    except (ValueError, TypeError, KeyError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_CONFIG)
    if output is None:
        sys.stdout.write(text)
    else:
        _write(output, text)
    return EXIT_OK


def rerun_matches(args: list[str], fmt: str = "csv") -> bool:
    """Run ``args``, re-run from the emitted artifact, and compare bytes."""
    with tempfile.TemporaryDirectory() as d:
        first, second = os.path.join(d, "first"), os.path.join(d, "second")
        if main(list(args) + ["--format", fmt, "--output", first]) != EXIT_OK:
            return False
        if main(["--config", first, "--output", second]) != EXIT_OK:
            return False
        return Path(first).read_bytes() == Path(second).read_bytes()


if __name__ == "__main__":
    sys.exit(main())
