"""Command-line front end.

    strongcoupling run --config run.json --out results/ [--kind compare] [--set g=2.5]
    strongcoupling validate run.json
    strongcoupling schema

Exit status: 0 success, 1 invalid configuration, 2 numerical failure. Errors
are also written to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__, models, oracle, qamp, rg, specfun
from .errors import ConfigError, NumericalError
from .freepicture import free_propagator
from .operators import Operator, State

KINDS = ("free", "perturbative", "resummed", "oracle", "compare", "secular_demo", "qamp_scan")

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "strongcoupling run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {"enum": ["two_level", "rabi", "dicke"]},
        "kind": {"enum": list(KINDS)},
        "delta": {"type": "number"},
        "omega": {"type": "number", "exclusiveMinimum": 0},
        "g": {"type": "number"},
        "N": {"type": "integer", "minimum": 1},
        "n_max": {"type": "integer", "minimum": 2},
        "representation": {"enum": ["block", "dense"]},
        "t_final": {"type": "number", "minimum": 0},
        "steps": {"type": "integer", "minimum": 1},
        "initial_state": {"enum": ["plus", "minus", "up", "down", "max_dicke"]},
        "dressed": {"type": "boolean"},
        "seed": {"type": "integer"},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "local_tol": {"type": "number", "exclusiveMinimum": 0},
                "resonance_tol": {"type": "number", "exclusiveMinimum": 0},
                "bessel_order": {"type": "integer", "minimum": 0},
            },
        },
        "N_list": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "g0": {"type": "number"},
        "limit_modes": {"type": "array", "items": {"enum": list(qamp.LIMIT_MODES)}, "minItems": 1},
        "prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
    },
    "required": ["omega"],
    "allOf": [
        {
            "if": {"properties": {"kind": {"const": "qamp_scan"}}, "required": ["kind"]},
            "then": {"required": ["N_list", "g0"]},
            "else": {"required": ["model", "delta", "g"]},
        },
        {"if": {"properties": {"model": {"const": "dicke"}}, "required": ["model"]}, "then": {"required": ["N"]}},
    ],
}


# ---------------------------------------------------------------- configuration


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``key=value`` pairs; dotted keys reach into nested objects, values parse as JSON."""
    cfg = json.loads(json.dumps(cfg))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        target = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        target[parts[-1]] = _parse_value(value)
    return cfg


def validate_config(cfg: dict) -> None:
    """Raise ConfigError naming the offending field."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {e.message}")
    if cfg.get("kind") == "secular_demo" and cfg.get("model") != "two_level":
        raise ConfigError("kind: secular_demo is defined for the two_level model only")


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


# ---------------------------------------------------------------- runs


def _times(cfg: dict, model) -> np.ndarray:
    period = 2 * math.pi / cfg["omega"]
    t_final = cfg.get("t_final", 10 * period)
    steps = cfg.get("steps", 200)
    return np.linspace(0.0, t_final, steps + 1)


def _observables(model) -> dict:
    if model.name == "two_level":
        plus = np.array([1.0, 1.0]) / math.sqrt(2)
        up = np.array([1.0, 0.0])
        return {
            "P+": Operator(np.outer(plus, plus), model.basis),
            "P_up": Operator(np.outer(up, up), model.basis),
        }
    sx, _, sz = models.spin_operators(model)
    return {"photons": models.number_operator(model), "Sx": sx, "Sz": sz}


def _expect(op: Operator, state: State) -> float:
    v = state.amplitudes
    return float(np.real(np.vdot(v, op.matrix @ v)) / np.vdot(v, v).real)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{float(x):.17g}" for x in row])


def _envelope(cfg, model):
    tols = cfg.get("tolerances", {})
    return rg.build_envelope(
        model,
        dressed=cfg.get("dressed", False),
        tol=tols.get("resonance_tol"),
        bessel_order=tols.get("bessel_order"),
    )


def _state_rows(model, times, states):
    obs = _observables(model)
    header = ["t", *obs, "norm"]
    rows = [[t, *(_expect(op, s) for op in obs.values()), s.norm()] for t, s in zip(times, states)]
    return header, rows


def run_config(cfg: dict, out_dir: Path) -> dict:
    """Execute a validated configuration, returning a map of written files."""
    kind = cfg.get("kind")
    if kind is None:
        raise ConfigError("kind: no run kind given (config key or --kind)")
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.get("prefix", kind)
    tols = cfg.get("tolerances", {})
    local_tol = tols.get("local_tol", oracle.DEFAULT_LOCAL_TOL)
    written = {}
    summary: dict = {}

    if kind == "qamp_scan":
        reports = []
        for mode in cfg.get("limit_modes", list(qamp.LIMIT_MODES)):
            reports += qamp.qamp_scan(cfg["N_list"], cfg["g0"], cfg["omega"], mode, cfg.get("n_max"))
        path = out_dir / f"{prefix}.csv"
        qamp.write_qamp_csv(reports, path)
        written["csv"] = path
        (out_dir / f"{prefix}.json").write_text(json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True))
        written["json"] = out_dir / f"{prefix}.json"
    else:
        model = models.build_model(cfg)
        default_init = "minus" if kind == "secular_demo" else None
        psi0 = models.default_initial_state(model, cfg.get("initial_state", default_init))
        times = _times(cfg, model)

        if kind == "free":
            decomp = model.decompose()
            states = [State(free_propagator(decomp, t).matrix @ psi0.amplitudes, model.basis) for t in times]
            header, rows = _state_rows(model, times, states)
        elif kind == "perturbative":
            env = _envelope(cfg, model)
            states = [State(env.unresummed(t).matrix @ psi0.amplitudes, model.basis) for t in times]
            header, rows = _state_rows(model, times, states)
        elif kind == "resummed":
            env = _envelope(cfg, model)
            states = env.apply(psi0, times)
            header, rows = _state_rows(model, times, states)
        elif kind == "oracle":
            res = oracle.propagate_exact(model, psi0, float(times[-1]), times, local_tol)
            _check_health(res)
            header, rows = _state_rows(model, times, res.states)
            summary["oracle"] = {"norm_drift": res.norm_drift, **res.stats.to_json()}
        elif kind == "compare":
            env = _envelope(cfg, model)
            approx = env.apply(psi0, times)
            res = oracle.propagate_exact(model, psi0, float(times[-1]), times, local_tol)
            _check_health(res)
            name, op = next(iter(_observables(model).items()))
            a = np.array([_expect(op, s) for s in approx])
            b = np.array([_expect(op, s) for s in res.states])
            fid = np.array([oracle.fidelity(x, y) for x, y in zip(approx, res.states)])
            header = ["t", f"{name}_resummed", f"{name}_oracle", "fidelity"]
            rows = np.column_stack([times, a, b, fid])
            summary.update(
                {
                    "min_fidelity": float(fid.min()),
                    "oracle": {"norm_drift": res.norm_drift, **res.stats.to_json()},
                }
            )
            if model.name == "two_level":
                cf = model.closed_form
                summary["predicted_rabi_frequency"] = abs(cf.rabi_frequency)
                summary["fitted_rabi_frequency_resummed"] = _safe_fit(times, a)
                summary["fitted_rabi_frequency_oracle"] = _safe_fit(times, b)
        elif kind == "secular_demo":
            env = _envelope(cfg, model)
            labels = [lab.get("sx") for lab in env.decomp.labels]
            ip = labels.index(1)
            cu = np.abs(env.amplitudes(psi0, times, resummed=False)[:, ip])
            cr = np.abs(env.amplitudes(psi0, times, resummed=True)[:, ip])
            header = ["t", "|c+|_unresummed", "|c+|_resummed"]
            rows = np.column_stack([times, cu, cr])
            cf = model.closed_form
            summary.update(
                {
                    "predicted_slope": abs(cf.delta / 2 * specfun.bessel_j(0, cf.z)),
                    "fitted_slope_unresummed": float(np.polyfit(times, cu, 1)[0]),
                    "max_resummed": float(cr.max()),
                }
            )
        else:
            raise ConfigError(f"kind: unknown run kind {kind!r}")
        path = out_dir / f"{prefix}.csv"
        _write_csv(path, header, rows)
        written["csv"] = path

    if summary:
        spath = out_dir / f"{prefix}.summary.json"
        spath.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        written["summary"] = spath
    meta = {
        "config": cfg,
        "versions": {
            "strongcoupling": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "tolerances": {
            "local_tol": local_tol,
            "resonance_tol": tols.get("resonance_tol"),
            "bessel_order": tols.get("bessel_order"),
            "norm_drift_limit": oracle.NORM_DRIFT_LIMIT,
        },
        "outputs": sorted(p.name for p in written.values()),
    }
    mpath = out_dir / f"{prefix}.meta.json"
    mpath.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written["meta"] = mpath
    return written


def _safe_fit(times, signal):
    try:
        return oracle.fit_frequency(times, signal)
    except (RuntimeError, ValueError):
        return None


def _check_health(res) -> None:
    if res.failed:
        raise NumericalError(f"oracle norm drift {res.norm_drift:.3e} exceeds {oracle.NORM_DRIFT_LIMIT:g}")


# ---------------------------------------------------------------- entry point


def _fail(exc: Exception, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strongcoupling", description="Strong-coupling expansion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a run configuration")
    p_run.add_argument("--config", required=True, help="JSON run configuration")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--kind", choices=KINDS, help="run kind (overrides the config)")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
    p_val = sub.add_parser("validate", help="check a configuration against the schema")
    p_val.add_argument("config", nargs="?", help="JSON run configuration")
    p_val.add_argument("--config", dest="config_opt", help=argparse.SUPPRESS)
    p_val.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sub.add_parser("schema", help="print the configuration JSON schema")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return 0
    try:
        if args.command == "validate":
            path = args.config or args.config_opt
            if path is None:
                raise ConfigError("no config path given")
            cfg = apply_overrides(load_config(path), args.set)
            validate_config(cfg)
            print("ok")
            return 0
        cfg = apply_overrides(load_config(args.config), args.set)
        if args.kind:
            cfg["kind"] = args.kind
        validate_config(cfg)
        written = run_config(cfg, Path(args.out))
    except ConfigError as exc:
        return _fail(exc, 1)
    except NumericalError as exc:
        return _fail(exc, 2)
    except ValueError as exc:
        # domain errors surfacing from user parameters
        return _fail(exc, 1)
    for key in sorted(written):
        print(f"{key}: {written[key]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
