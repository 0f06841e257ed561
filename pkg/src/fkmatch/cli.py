"""Command-line front end: ``fkmatch {laplace,joint,simulate,verify,suite}``.

Exit codes: 0 success, 1 an identity failed, 2 usage or config error,
3 numerical/runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import replace
from importlib import resources

import jsonschema

from . import __version__
from .errors import DomainError, ExpressionError, FkmatchError
from .identities import (
    check_identity,
    default_config,
    normalize_id,
    suite_entries,
)
from .joint import joint_laplace
from .numerics.timefunc import parse_time_function
from .processes import (
    BAff,
    CoshBM,
    GBesqI,
    GBesqII,
    GeomAssoc,
    Jacobi,
    Pgsce,
    SquaredBesselBridge,
    SquaredRadialOU,
    TransformQuery,
    laplace_marginal,
)
from .sde import PathFunctional, SimConfig, default_scheme, mc_expectation

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
FAMILIES = ("gbesq1", "gbesq2", "srou", "bridge", "pgsce", "baff", "cosh", "geom", "jacobi")

_PROCESS_KEYS = ("x", "delta", "theta", "alpha", "a", "b", "c")
_QUERY_KEYS = {"t": "t", "lambda": "lam", "gamma": "gamma"}
_SIM_KEYS = ("dt", "paths", "seed", "scheme", "workers")
# identity parameter names fed from the shared flags
_IDENTITY_FLAGS = {"x": "x", "delta": "delta", "alpha": "alpha", "a": "a", "b": "b", "c": "c",
                   "t": "t", "lam": "lam", "gamma": "gamma"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fkmatch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fkmatch {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in ("laplace", "joint", "simulate", "verify", "suite"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration (validated; flags override it)")
        p.add_argument("--process", choices=FAMILIES)
        p.add_argument("--x", type=float)
        p.add_argument("--delta", help="number or expression in t")
        p.add_argument("--theta", help="number or expression in t (must be <= 0)")
        for flag in ("alpha", "a", "b", "c", "t", "gamma"):
            p.add_argument(f"--{flag}", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--paths", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--scheme")
        p.add_argument("--workers", type=int)
        p.add_argument("--identity")
        p.add_argument("--out")
        p.add_argument("--format", choices=("json", "csv"))
        p.add_argument("--json-errors", action="store_true")
    return parser


# config -------------------------------------------------------------------------


def load_schema() -> dict:
    text = resources.files("fkmatch").joinpath("schemas/run_config.json").read_text()
    return json.loads(text)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path!r} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config {path!r} invalid at {where}: {exc.message}") from exc
    return data


def resolve(args) -> dict:
    """Merge the config file (if any) with flags; flags win."""
    cfg = load_config(args.config) if args.config else {}
    if cfg.get("command") not in (None, args.command):
        raise UsageError(f"config is for command {cfg['command']!r}, not {args.command!r}")
    process = dict(cfg.get("process", {}))
    query = dict(cfg.get("query", {}))
    sim = dict(cfg.get("sim", {}))
    output = dict(cfg.get("output", {}))
    if args.process is not None:
        process["family"] = args.process
    for key in _PROCESS_KEYS:
        val = getattr(args, key)
        if val is not None:
            process[key] = val
    for key, attr in _QUERY_KEYS.items():
        val = getattr(args, attr)
        if val is not None:
            query[key] = val
    for key in _SIM_KEYS:
        val = getattr(args, key)
        if val is not None:
            sim[key] = val
    if args.format is not None:
        output["format"] = args.format
    if args.out is not None:
        output["path"] = args.out
    identity = args.identity if args.identity is not None else cfg.get("identity")
    return {"command": args.command, "identity": identity, "process": process, "query": query,
            "sim": sim, "output": output}


def _need(block: dict, key: str, what: str):
    if key not in block:
        raise UsageError(f"missing {what} --{key}")
    return block[key]


def build_spec(process: dict):
    family = process.get("family")
    if family is None:
        raise UsageError("missing --process")
    x = float(process.get("x", 1.0))
    p = process

    def num(key, default=None):
        if key not in p:
            if default is None:
                raise UsageError(f"process {family!r} needs --{key}")
            return default
        try:
            return float(p[key])
        except (TypeError, ValueError) as exc:
            raise UsageError(f"--{key} must be a number for {family!r}") from exc

    def tf(key, role, default=None):
        if key not in p:
            if default is None:
                raise UsageError(f"process {family!r} needs --{key}")
            return parse_time_function(default, role)
        return parse_time_function(str(p[key]), role)

    if family == "gbesq1":
        return GBesqI(x, tf("delta", "nonnegative"))
    if family == "gbesq2":
        return GBesqII(x, tf("delta", "nonnegative"), tf("theta", "nonpositive"))
    if family == "srou":
        return SquaredRadialOU(x, num("delta"), num("alpha"))
    if family == "bridge":
        return SquaredBesselBridge(x, num("delta"))
    if family == "pgsce":
        return Pgsce(x, num("c"))
    if family == "baff":
        return BAff(x, num("a"), num("b"))
    if family == "cosh":
        return CoshBM()
    if family == "geom":
        return GeomAssoc.sqrt_example(x)
    if family == "jacobi":
        return Jacobi(x, num("a"), num("b"))
    raise UsageError(f"unknown process {family!r}")


def _query(query: dict, gamma_default=0.0) -> TransformQuery:
    t = _need(query, "t", "query time")
    lam = query.get("lambda")
    if lam is None:
        raise UsageError("missing --lambda")
    return TransformQuery(float(t), float(lam), float(query.get("gamma", gamma_default)))


# commands -----------------------------------------------------------------------


def _fmt(value: float) -> str:
    return f"{value:.15g}"


def cmd_laplace(conf):
    spec = build_spec(conf["process"])
    q = _query(conf["query"])
    if q.gamma != 0:
        raise UsageError("laplace is the gamma = 0 transform; use the joint command")
    value = laplace_marginal(spec, q)
    result = {"family": spec.family, "t": q.t, "lambda": q.lam, "value": value}
    return [result], [], _fmt(value), EXIT_OK


def cmd_joint(conf):
    spec = build_spec(conf["process"])
    q = _query(conf["query"])
    value = joint_laplace(spec, q)
    result = {"family": spec.family, "t": q.t, "lambda": q.lam, "gamma": q.gamma, "value": value}
    return [result], [], _fmt(value), EXIT_OK


def cmd_simulate(conf):
    spec = build_spec(conf["process"])
    q = _query(conf["query"])
    if q.t <= 0:
        raise UsageError("simulate needs --t > 0")
    sim = conf["sim"]
    cfg = SimConfig(
        q.t,
        float(sim.get("dt", 1e-3)),
        int(sim.get("paths", 100_000)),
        int(sim.get("seed", 0)),
        sim.get("scheme", default_scheme(spec)),
        workers=int(sim.get("workers", 1)),
    )
    if q.gamma:
        functional = PathFunctional(integrand=lambda u, v: v, lam=q.lam, weight=q.gamma)
    else:
        functional = PathFunctional(lam=q.lam)
    est = mc_expectation(spec, functional, cfg)
    result = {"family": spec.family, "t": q.t, "lambda": q.lam, "gamma": q.gamma, **est.to_dict()}
    return [result], [], f"{_fmt(est.mean)} +/- {_fmt(est.stderr)}", EXIT_OK


def _identity_cfg(name: str, sim: dict) -> SimConfig:
    cfg = default_config(name, int(sim.get("seed", 42)), int(sim.get("workers", 1)))
    if "paths" in sim:
        cfg = replace(cfg, n_paths=int(sim["paths"]))
    if "dt" in sim:
        cfg = replace(cfg, dt=float(sim["dt"]))
    return cfg


def _identity_params(conf) -> dict:
    params = {}
    merged = {**conf["process"], **{_QUERY_KEYS[k]: v for k, v in conf["query"].items()}}
    for key, target in _IDENTITY_FLAGS.items():
        if key in merged:
            params[target] = float(merged[key])
    if "family" in conf["process"]:
        params["family"] = conf["process"]["family"]
    return params


def _exit_for(reports) -> int:
    verdicts = [r.verdict for r in reports]
    if "fail" in verdicts:
        return EXIT_FAIL
    if "failed-to-run" in verdicts:
        return EXIT_NUMERIC
    return EXIT_OK


def _split(reports):
    results = [r.to_dict() for r in reports if r.verdict != "ledger"]
    ledger = [r.to_dict() for r in reports if r.verdict == "ledger"]
    return results, ledger


def _summary(reports) -> str:
    width = max(len(r.id) for r in reports)
    lines = [f"{'identity':<{width}}  {'verdict':<13}  {'statistic':>12}  tolerance"]
    for r in reports:
        stat = "-" if r.statistic is None else f"{r.statistic:.4g}"
        extra = f"  winner={r.evidence['winner']}" if r.verdict == "ledger" else ""
        lines.append(f"{r.id:<{width}}  {r.verdict:<13}  {stat:>12}  {r.tolerance:.3g}{extra}")
    return "\n".join(lines)


def cmd_verify(conf):
    if not conf["identity"]:
        raise UsageError("verify needs --identity")
    name = normalize_id(conf["identity"])
    report = check_identity(name, _identity_cfg(name, conf["sim"]), _identity_params(conf))
    results, ledger = _split([report])
    return results, ledger, _summary([report]), _exit_for([report])


def cmd_suite(conf):
    reports = []
    for name, override in suite_entries():
        reports.append(check_identity(name, _identity_cfg(name, conf["sim"]), override))
    results, ledger = _split(reports)
    return results, ledger, _summary(reports), _exit_for(reports)


COMMANDS = {"laplace": cmd_laplace, "joint": cmd_joint, "simulate": cmd_simulate,
            "verify": cmd_verify, "suite": cmd_suite}


# output -------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def render_report(conf, results, ledger, started: float) -> str:
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": conf["command"],
        "config": {k: conf[k] for k in ("identity", "process", "query", "sim") if conf.get(k)},
        "results": results,
        "ledger": ledger,
        "metadata": {
            "fkmatch_version": __version__,
            "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "elapsed_seconds": round(time.time() - started, 3),
        },
    }
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(obj, list):
        out[prefix] = json.dumps(obj)
    else:
        out[prefix] = obj


def render_csv(results, ledger) -> str:
    rows = []
    for section, items in (("results", results), ("ledger", ledger)):
        for item in items:
            flat = {"section": section}
            _flatten("", item, flat)
            rows.append(flat)
    keys = []
    for row in rows:
        keys.extend(k for k in row if k not in keys)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _report_error(exc, code, json_errors):
    if json_errors:
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(payload), file=sys.stderr)
    else:
        print(f"fkmatch: error: {exc}", file=sys.stderr)
    return code


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in argv
    started = time.time()
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("choose a command: laplace, joint, simulate, verify or suite")
        conf = resolve(args)
        results, ledger, text, code = COMMANDS[args.command](conf)
        out = conf["output"]
        fmt = out.get("format", "json")
        body = render_csv(results, ledger) if fmt == "csv" else render_report(conf, results, ledger, started)
        if out.get("path"):
            with open(out["path"], "w") as fh:
                fh.write(body)
        elif args.format is not None:
            sys.stdout.write(body)
        print(text)
        return code
    except UsageError as exc:
        return _report_error(exc, EXIT_USAGE, json_errors)
    except (DomainError, ExpressionError) as exc:
        return _report_error(exc, EXIT_USAGE, json_errors)
    except (FkmatchError, ArithmeticError) as exc:
        return _report_error(exc, EXIT_NUMERIC, json_errors)
    except OSError as exc:
        return _report_error(exc, EXIT_USAGE, json_errors)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
