"""Batch command line front end.

Usage::

    spinmono <command> [--config cfg.json] [--out DIR] [--replicas N] [--seed S]
             [--mode MODE] [--workers K]

Exit codes: 0 success/pass, 1 violation found, 2 invalid input,
3 inconclusive (independent mode only).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from . import __version__
from .engine import plan_window, run_replicas, simulate_gillespie
from .lattice import Configuration, make_initial
from .rates import (
    BUILTIN_MODELS,
    MODEL_NAMES,
    RateSpec,
    build_model,
    check_attractive,
    check_coupling_monotone,
    uniformization_bound,
)
from .verify import (
    MODES,
    estimate_occupation_profile,
    sweep_remark2,
    verify_theorem,
    window_self_check,
)

EXIT_OK, EXIT_VIOLATION, EXIT_INVALID, EXIT_INCONCLUSIVE = 0, 1, 2, 3
COMMANDS = ("models", "check", "simulate", "profile", "verify", "verify-remark2", "self-check")

DEFAULT_PARAMS = {
    "contact": {"birth": 1.0, "death": 1.0},
    "voter": {"speed": 1.0},
    "glauber_ising": {"beta": 1.0},
    "pure_death": {},
}

_bits = {"type": "string", "pattern": "^[01]+$"}
_spin = {"enum": [0, 1]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": list(MODEL_NAMES)},
                "params": {"type": "object", "additionalProperties": {"type": "number"}},
                "radius": {"type": "integer", "minimum": 0},
                "rates": {"type": "object", "propertyNames": _bits,
                          "additionalProperties": {"type": "number", "minimum": 0}},
            },
        },
        "init": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["step", "interval", "custom"]},
                "N": {"type": "integer", "minimum": 0},
                "leftTail": _spin,
                "rightTail": _spin,
                "lo": {"type": "integer"},
                "core": _bits,
            },
        },
        "t": {"type": "number", "minimum": 0},
        "zRange": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "m": {"type": "integer", "minimum": 1, "maximum": 5},
        "replicas": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**63 - 1},
        "epsilonTrunc": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "mode": {"enum": list(MODES)},
        "backend": {"enum": ["uniformized", "gillespie"]},
        "N": {"oneOf": [{"type": "integer", "minimum": 0},
                        {"type": "array", "items": {"type": "integer", "minimum": 0},
                         "minItems": 1}]},
        "window": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "workers": {"type": "integer", "minimum": 1},
    },
}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    model: dict = field(default_factory=lambda: {"name": "contact", "params": {"birth": 2.0, "death": 1.0}})
    init: dict = field(default_factory=lambda: {"kind": "step"})
    t: float = 1.0
    zRange: tuple[int, int] = (0, 4)
    m: int = 3
    replicas: int = 1000
    seed: int = 0
    epsilonTrunc: float = 1e-3
    mode: str = "coupled"
    backend: str = "uniformized"
    N: int | list[int] | None = None
    window: tuple[int, int] | None = None
    workers: int | None = None

    def echo(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            if value is None:
                continue
            out[key] = list(value) if isinstance(value, tuple) else value
        return out


def load_config(raw: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        if exc.validator == "additionalProperties":
            path = (path + "." if path != "<root>" else "") + "<unknown key>"
        raise ConfigError(path, exc.message) from None
    cfg = ExperimentConfig(**{k: (tuple(v) if k in ("zRange", "window") else v) for k, v in raw.items()})
    if cfg.zRange[0] > cfg.zRange[1]:
        raise ConfigError("zRange", "zMin must be <= zMax")
    if cfg.window is not None and cfg.window[0] > cfg.window[1]:
        raise ConfigError("window", "lo must be <= hi")
    return cfg


def spec_from_config(model: dict) -> RateSpec:
    name = model["name"]
    try:
        if name == "custom":
            if "radius" not in model or "rates" not in model:
                raise ConfigError("model", "custom model needs 'radius' and 'rates'")
            return build_model("custom", radius=model["radius"], rates=model["rates"])
        return build_model(name, **model.get("params", {}))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None


def init_from_config(init: dict) -> Configuration:
    try:
        if init["kind"] == "custom":
            missing = [k for k in ("leftTail", "rightTail", "core") if k not in init]
            if missing:
                raise ConfigError("init", f"custom init needs {', '.join(missing)}")
            return make_initial("custom", left_tail=init["leftTail"], right_tail=init["rightTail"],
                                lo=init.get("lo", 0), core=init["core"])
        return make_initial(init["kind"], init.get("N"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("init", str(exc)) from None


def model_entry(spec: RateSpec) -> dict:
    """Custom-model document that rebuilds ``spec``'s table."""
    return {"name": "custom", "radius": spec.radius, "rates": spec.table()}


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, float):
        # shortest repr that parses back to the same double
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, command: str, cfg: ExperimentConfig | None, artifacts: list[str]):
    write_json(out / "manifest.json", {
        "command": command,
        "version": __version__,
        "seed": cfg.seed if cfg else None,
        "config": cfg.echo() if cfg else None,
        "artifacts": artifacts,
    })


# ---------------------------------------------------------------------------
# commands


def cmd_models(cfg, out: Path):
    catalog = []
    rows = []
    for name in BUILTIN_MODELS:
        spec = build_model(name, **DEFAULT_PARAMS[name])
        catalog.append({"name": name, "params": spec.params, "attractive": check_attractive(spec).attractive,
                        "cMax": uniformization_bound(spec), "table": model_entry(spec)})
        rows.extend((name, pattern, rate) for pattern, rate in spec.table().items())
    write_json(out / "models.json", catalog)
    write_csv(out / "models.csv", ["model", "pattern", "rate"], rows)
    for entry in catalog:
        print(f"{entry['name']}: params={entry['params']} cMax={entry['cMax']:g} "
              f"attractive={str(entry['attractive']).lower()}")
    return EXIT_OK, ["models.json", "models.csv"]


def cmd_check(cfg, out: Path):
    spec = spec_from_config(cfg.model)
    report = check_attractive(spec)
    payload = {"model": spec.name, "attractive": report.attractive,
               "violations": [list(v.as_tuple()) for v in report.violations]}
    print(f"attractive: {str(report.attractive).lower()}")
    for v in report.violations:
        print(f"violation: {v.low} <= {v.high} but rates {v.rate_low:g} vs {v.rate_high:g}")
    code = EXIT_OK if report.attractive else EXIT_VIOLATION
    if report.attractive and spec.rates.any():
        coupling = check_coupling_monotone(spec, uniformization_bound(spec))
        payload["cMax"] = coupling.c_max
        payload["couplingMonotone"] = coupling.monotone
        payload["couplingViolations"] = [list(v.as_tuple()) for v in coupling.violations]
        print(f"coupling monotone: {str(coupling.monotone).lower()} (c_max={coupling.c_max:g})")
        if not coupling.monotone:
            code = EXIT_VIOLATION
    write_json(out / "check.json", payload)
    return code, ["check.json"]


def _sim_window(spec, cfg, init):
    if cfg.window is not None:
        lo, hi = cfg.window
    else:
        lo, hi = plan_window(spec, cfg.t, *cfg.zRange, cfg.epsilonTrunc).window
    return init.embed(min(lo, init.lo), max(hi, init.hi))


def cmd_simulate(cfg, out: Path):
    spec = spec_from_config(cfg.model)
    config = _sim_window(spec, cfg, init_from_config(cfg.init))
    if cfg.backend == "gillespie":
        final = simulate_gillespie(spec, config, cfg.t, cfg.seed)
    else:
        core = run_replicas(spec, config, cfg.t, cfg.seed, 1, workers=1)[0]
        final = Configuration.from_core(config.left_tail, config.lo, core.tolist(), config.right_tail)
    write_csv(out / "simulate.csv", ["site", "spin"],
              ((x, final.value(x)) for x in range(final.lo, final.hi + 1)))
    write_json(out / "simulate.json", {"leftTail": final.left_tail, "rightTail": final.right_tail,
                                       "lo": final.lo, "hi": final.hi, "core": final.core_str()})
    print(final)
    return EXIT_OK, ["simulate.csv", "simulate.json"]


def cmd_profile(cfg, out: Path):
    spec = spec_from_config(cfg.model)
    init = init_from_config(cfg.init)
    profile = estimate_occupation_profile(spec, init, cfg.t, *cfg.zRange, cfg.replicas, cfg.seed,
                                          epsilon_trunc=cfg.epsilonTrunc, backend=cfg.backend,
                                          workers=cfg.workers)
    write_csv(out / "profile.csv", ["z", "p_hat", "ci_low", "ci_high", "n"],
              ((r.z, r.p_hat, r.ci_low, r.ci_high, r.n) for r in profile.rows))
    return EXIT_OK, ["profile.csv"]


def _report_exit(overall: str) -> int:
    return {"pass": EXIT_OK, "fail": EXIT_VIOLATION, "inconclusive": EXIT_INCONCLUSIVE}[overall]


def _margin_rows(report):
    return ((v.z, report.mode, v.verdict, v.witness, v.margin) for v in report.per_z)


MARGIN_HEADER = ["z", "mode", "verdict", "witness", "margin"]


def _verify_kwargs(cfg):
    return dict(z_min=cfg.zRange[0], z_max=cfg.zRange[1], m=cfg.m, replicas=cfg.replicas,
                seed=cfg.seed, mode=cfg.mode, epsilon_trunc=cfg.epsilonTrunc,
                window=cfg.window, workers=cfg.workers)


def cmd_verify(cfg, out: Path):
    spec = spec_from_config(cfg.model)
    if cfg.zRange[0] < 0:
        raise ConfigError("zRange", "zMin must be >= 0")
    try:
        report = verify_theorem(spec, cfg.t, **_verify_kwargs(cfg))
    except ValueError as exc:
        raise ConfigError("model" if "attractive" in str(exc) else "<config>", str(exc)) from None
    write_json(out / "report.json", report.to_dict())
    write_csv(out / "margins.csv", MARGIN_HEADER, _margin_rows(report))
    print(f"{report.mode} ({report.evidence}): {report.overall}")
    return _report_exit(report.overall), ["report.json", "margins.csv"]


def cmd_verify_remark2(cfg, out: Path):
    spec = spec_from_config(cfg.model)
    if cfg.N is None:
        if cfg.init.get("kind") == "interval" and "N" in cfg.init:
            Ns = [cfg.init["N"]]
        else:
            raise ConfigError("N", "verify-remark2 needs N (integer or list)")
    else:
        Ns = cfg.N if isinstance(cfg.N, list) else [cfg.N]
    try:
        sweep = sweep_remark2(spec, Ns, cfg.t, **_verify_kwargs(cfg))
    except ValueError as exc:
        raise ConfigError("<config>", str(exc)) from None
    reports = sweep.reports
    write_json(out / "report.json", {
        "smallestPassingN": sweep.smallest_passing_N,
        "reports": {str(n): r.to_dict() for n, r in reports.items()},
    })
    rows = []
    for n, report in reports.items():
        rows.extend((n,) + row for row in _margin_rows(report))
        print(f"N={n} {report.mode} ({report.evidence}): {report.overall}")
    write_csv(out / "margins.csv", ["N"] + MARGIN_HEADER, rows)
    overalls = [r.overall for r in reports.values()]
    worst = "fail" if "fail" in overalls else "inconclusive" if "inconclusive" in overalls else "pass"
    return _report_exit(worst), ["report.json", "margins.csv"]


def cmd_self_check(cfg, out: Path):
    spec = spec_from_config(cfg.model)
    init = init_from_config(cfg.init)
    report = window_self_check(spec, cfg.t, *cfg.zRange, cfg.replicas, cfg.seed,
                               epsilon_trunc=cfg.epsilonTrunc, init=init, workers=cfg.workers)
    write_json(out / "self_check.json", report.to_dict())
    write_csv(out / "self_check.csv", ["z", "p_margin", "p_doubled", "abs_diff", "combined_se"],
              ((r.z, r.p_default, r.p_doubled, r.diff, r.se) for r in report.rows))
    print(f"margin {report.margin} vs {report.doubled_margin}: max |diff| = "
          f"{report.max_abs_diff:.3g}, within 3 SE: {str(report.within).lower()}")
    return (EXIT_OK if report.within else EXIT_VIOLATION), ["self_check.json", "self_check.csv"]


HANDLERS = {
    "models": cmd_models,
    "check": cmd_check,
    "simulate": cmd_simulate,
    "profile": cmd_profile,
    "verify": cmd_verify,
    "verify-remark2": cmd_verify_remark2,
    "self-check": cmd_self_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinmono", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON experiment configuration")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--replicas", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--workers", type=int, help="worker threads (default: $SPINMONO_WORKERS)")
    return parser


def run(command: str, raw: dict, out: Path) -> int:
    cfg = load_config(raw)
    out.mkdir(parents=True, exist_ok=True)
    code, artifacts = HANDLERS[command](cfg, out)
    _manifest(out, command, cfg, artifacts)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    raw = {}
    try:
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except OSError as exc:
                raise ConfigError("--config", f"cannot read {args.config}: {exc.strerror}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError("--config", f"invalid JSON: {exc}") from None
            if not isinstance(raw, dict):
                raise ConfigError("<root>", "configuration must be a JSON object")
        for key in ("replicas", "seed", "mode", "workers"):
            value = getattr(args, key)
            if value is not None:
                raw[key] = value
        return run(args.command, raw, args.out)
    except ConfigError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
