"""Command-line front end.

Settings come from flags, then ``RAYLANDER_*`` environment variables, then
a key=value config file (``--config`` or ``RAYLANDER_CONFIG``), then
built-in defaults.  Exit codes: 0 success, 1 failed verification, 2 bad
configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

from . import convlab, family, landing, planes, rays, verify
from .angles import AngleError, RationalAngle

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
ENV_PREFIX = "RAYLANDER_"

COMMANDS = ("render-param", "render-dyn", "trace-ray", "trace-pray", "land", "verify", "convlab")
EXPERIMENTS = ("basin-convergence", "precompactness", "potential-bound")


class ConfigError(ValueError):
    pass


def parse_complex(text: str) -> complex:
    s = text.strip().replace(" ", "").replace("i", "j").replace("I", "j")
    try:
        z = complex(s)
    except ValueError:
        raise ConfigError(f"not a complex number: {text!r}") from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ConfigError(f"complex number must be finite: {text!r}")
    return z


def parse_view(text: str) -> tuple:
    try:
        x0, x1, y0, y1 = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"view must be x0,x1,y0,y1, got {text!r}") from None
    if not all(math.isfinite(v) for v in (x0, x1, y0, y1)) or not (x1 > x0 and y1 > y0):
        raise ConfigError(f"empty or non-finite viewport {text!r}")
    return (x0, x1, y0, y1)


def parse_res(text: str) -> tuple:
    try:
        parts = [int(v) for v in str(text).split(",")]
    except ValueError:
        raise ConfigError(f"resolution must be N or N,M, got {text!r}") from None
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2 or min(parts) < 1:
        raise ConfigError(f"resolution must be positive, got {text!r}")
    return tuple(parts)


def _positive_int(name):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise ConfigError(f"{name} must be an integer, got {text!r}") from None
        if v < 1:
            raise ConfigError(f"{name} must be positive")
        return v
    return conv


def _positive_float(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"{name} must be a number, got {text!r}") from None
        if not v > 0:
            raise ConfigError(f"{name} must be positive")
        return v
    return conv


def _angle(text):
    try:
        return RationalAngle.parse(text)
    except AngleError as exc:
        raise ConfigError(str(exc)) from None


def _precision(text):
    if text not in ("double", "extended"):
        raise ConfigError(f"precision must be double or extended, got {text!r}")
    return text


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _unit_interval(name):
    def conv(text):
        v = _positive_float(name)(text)
        if not v < 1:
            raise ConfigError(f"{name} must lie in (0, 1)")
        return v
    return conv


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# name -> (converter, default); defaults are in string form so they go
# through the same validation as user input
SETTINGS = {
    "a": (parse_complex, None),
    "angle": (_angle, None),
    "view": (parse_view, "-10,10,-10,10"),
    "res": (parse_res, "600"),
    "budget": (_positive_int("budget"), str(family.DEFAULT_BUDGET)),
    "tol": (_positive_float("tol"), repr(rays.DEFAULT_TOL)),
    "precision": (_precision, "double"),
    "threads": (_positive_int("threads"), "1"),
    "out": (str, None),
    "seed": (_int, "0"),
    "palette": (str, "classic"),
    "main_only": (_bool, "false"),
    "r_end": (_unit_interval("r_end"), None),
    "n_min": (_positive_int("n_min"), "3"),
    "n_max": (_positive_int("n_max"), "8"),
    "cases": (_positive_int("cases"), "1000"),
    "L": (_positive_float("L"), repr(convlab.DEFAULT_L)),
    "convention": (str, "main"),
}


# recorded in config files but left out of reports, which must not depend on them
EXECUTION_ONLY = ("threads", "out")


@dataclass
class RunConfig:
    command: str
    target: str | None = None  # suite or experiment name
    values: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def to_dict(self) -> dict:
        """Settings that determine the results; thread count and output path do not."""
        out = {"command": self.command, "target": self.target}
        for k, v in sorted(self.values.items()):
            if k in EXECUTION_ONLY:
                continue
            if isinstance(v, complex):
                v = [v.real, v.imag]
            elif isinstance(v, RationalAngle):
                v = str(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[k] = v
        return out

    def to_keyvalue(self) -> str:
        """Config-file form; reading it back reproduces the same settings."""
        lines = []
        for k, v in sorted(self.values.items()):
            if v is None:
                continue
            if isinstance(v, complex):
                v = repr(v).strip("()")
            elif isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def resolve(command: str, flags: dict, env=None, target=None, defaults=None) -> RunConfig:
    """Merge settings with precedence flags > environment > config file > defaults."""
    env = os.environ if env is None else env
    cfg_path = flags.get("config") or env.get(ENV_PREFIX + "CONFIG")
    file_values = {}
    if cfg_path:
        try:
            file_values = convlab.read_config(cfg_path)
        except OSError as exc:
            raise ConfigError(str(exc)) from None
        except Exception as exc:  # configparser errors
            raise ConfigError(f"malformed config {cfg_path}: {exc}") from None
        unknown = set(file_values) - set(SETTINGS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    defaults = dict(defaults or {})
    values, sources = {}, {}
    for name, (conv, default) in SETTINGS.items():
        default = defaults.get(name, default)
        raw, src = flags.get(name), "flag"
        if raw is None:
            raw, src = env.get(ENV_PREFIX + name.upper()), "env"
        if raw is None:
            raw, src = file_values.get(name), "config"
        if raw is None:
            raw, src = default, "default"
        values[name] = None if raw is None else conv(raw)
        sources[name] = src
    return RunConfig(command, target, values, sources)


# --- commands --------------------------------------------------------------

def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    try:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, RationalAngle):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _grid_spec(cfg: RunConfig) -> planes.GridSpec:
    nx, ny = cfg.res
    return planes.GridSpec.from_view(*cfg.view, nx, ny)


def cmd_render(cfg: RunConfig) -> int:
    spec = _grid_spec(cfg)
    if cfg.palette not in planes.PALETTES:
        raise ConfigError(f"unknown palette {cfg.palette!r}")
    if cfg.command == "render-dyn":
        if cfg.a is None:
            raise ConfigError("render-dyn needs --a")
        if cfg.a == 0:
            raise ConfigError("parameter a must be nonzero")
        grid = planes.render_dynamical(cfg.a, spec, cfg.budget, threads=cfg.threads)
    else:
        grid = planes.render_parameter(spec, cfg.budget, threads=cfg.threads,
                                       main_only=cfg.main_only)
    out = cfg.out or ("param.ppm" if cfg.command == "render-param" else "dyn.ppm")
    planes.write_image(grid, cfg.palette, out)
    meta = planes.sidecar(grid, cfg.palette)
    meta["config"] = cfg.to_dict()
    _write_text(out + ".json", _dump(meta))
    return EXIT_OK


def cmd_trace(cfg: RunConfig) -> int:
    if cfg.angle is None:
        raise ConfigError(f"{cfg.command} needs --angle")
    if cfg.command == "trace-ray":
        if cfg.a is None or cfg.a == 0:
            raise ConfigError("trace-ray needs a nonzero --a")
        trace = rays.trace_dynamic_ray(cfg.a, cfg.angle, tol=cfg.tol, budget=cfg.budget)
    else:
        r_end = cfg.r_end if cfg.r_end is not None else 1 - 2.0**-10
        trace = rays.trace_parameter_ray(cfg.angle, r_end=r_end, tol=cfg.tol, budget=cfg.budget)
    if cfg.out and cfg.out.endswith(".csv"):
        _write_text(cfg.out, trace.to_csv())
    else:
        _write_text(cfg.out, trace.to_json())
    return EXIT_OK if trace.complete else EXIT_RUNTIME


LAND_R_END = 1 - 2.0**-24


def land_transcript(cfg: RunConfig) -> dict:
    r_end = cfg.r_end if cfg.r_end is not None else LAND_R_END
    trace = rays.trace_parameter_ray(cfg.angle, r_end=r_end, tol=cfg.tol, budget=cfg.budget)
    if len(trace.points) < 4:
        raise rays.RayStalled(f"parameter ray {cfg.angle} stalled early: {trace.reason}")
    result = landing.solve(cfg.angle, trace, cfg.precision, cfg.convention)
    report = landing.verify_landing(cfg.angle, result, trace)
    last = trace.points[-1]
    return {
        "config": cfg.to_dict(),
        "trace": {"status": trace.status, "reason": trace.reason, "points": len(trace.points),
                  "last_potential": last.potential, "last_point": last.point},
        "result": result.to_dict(),
        "verification": report,
    }


def cmd_land(cfg: RunConfig) -> int:
    if cfg.angle is None:
        raise ConfigError("land needs an angle")
    if cfg.convention not in ("main", "section"):
        raise ConfigError("convention must be main or section")
    doc = land_transcript(cfg)
    _write_text(cfg.out, _dump(doc))
    return EXIT_OK if doc["verification"]["passed"] else EXIT_FAIL


def cmd_verify(cfg: RunConfig) -> int:
    suite = verify.SUITES.get(cfg.target)
    if suite is None:
        raise ConfigError(f"unknown suite {cfg.target!r}; choose from {', '.join(verify.SUITES)}")
    kwargs = {"seed": cfg.seed, "threads": cfg.threads}
    if cfg.sources["res"] != "default":
        kwargs["res"] = cfg.res[0]
    if cfg.sources["budget"] != "default":
        kwargs["budget"] = cfg.budget
    res = suite(**kwargs)
    res["config"] = cfg.to_dict()
    _write_text(cfg.out, _dump(res))
    return EXIT_OK if res["passed"] else EXIT_FAIL


def cmd_convlab(cfg: RunConfig) -> int:
    exp = cfg.target
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    if exp == "potential-bound":
        doc = convlab.potential_bound_sweep(cfg.cases, seed=cfg.seed)
        doc["config"] = cfg.to_dict()
        _write_text(cfg.out, _dump(doc))
        return EXIT_OK if doc["passed"] == doc["cases"] else EXIT_FAIL
    if cfg.n_max - cfg.n_min < 2:
        raise ConfigError("need n_max - n_min >= 2")
    theta = cfg.angle or RationalAngle(1, 2)
    nx, ny = cfg.res
    spec = planes.GridSpec.from_view(*cfg.view, nx, ny, axis_row=True)
    marked = "zero" if exp == "basin-convergence" else "parameter"
    seq, params = convlab.basin_sequence(theta, range(cfg.n_min, cfg.n_max + 1), spec,
                                         cfg.budget, marked=marked, threads=cfg.threads)
    rep = convlab.cara_limit_probe(seq, cfg.L)
    doc = rep.to_dict()
    doc["parameters"] = params
    doc["config"] = cfg.to_dict()
    _write_text(cfg.out, _dump(doc))
    return EXIT_OK


HANDLERS = {
    "render-param": cmd_render, "render-dyn": cmd_render, "trace-ray": cmd_trace,
    "trace-pray": cmd_trace, "land": cmd_land, "verify": cmd_verify, "convlab": cmd_convlab,
}

# per-command defaults that differ from the global ones
COMMAND_DEFAULTS = {
    "convlab": {"view": ",".join(map(str, verify.CONVERGENCE_VIEW)), "res": "400",
                "budget": "2000"},
    "verify": {"res": "400"},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--a", help="parameter, e.g. 0.4+0.6i")
    common.add_argument("--angle", help="rational angle p/q")
    common.add_argument("--view", help="x0,x1,y0,y1")
    common.add_argument("--res", help="N or N,M pixels")
    common.add_argument("--budget", help="iteration budget")
    common.add_argument("--tol", help="solver tolerance")
    common.add_argument("--precision", help="double or extended")
    common.add_argument("--threads", help="worker threads")
    common.add_argument("--out", help="output path")
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--seed", help="random seed for sweeps")
    common.add_argument("--palette", help="mono or classic")
    common.add_argument("--main-only", dest="main_only", action="store_const", const="true",
                        help="mark Basin0 pixels cut off from a = 0 as capture")
    common.add_argument("--r-end", dest="r_end", help="last radius on parameter rays")
    common.add_argument("--cases", help="sweep size for potential-bound")

    p = _Parser(prog="raylander", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("render-param", "render-dyn", "trace-ray", "trace-pray"):
        sub.add_parser(name, parents=[common])
    land = sub.add_parser("land", parents=[common])
    land.add_argument("theta", nargs="?")
    ver = sub.add_parser("verify", parents=[common])
    ver.add_argument("suite", choices=sorted(verify.SUITES))
    conv = sub.add_parser("convlab", parents=[common])
    conv.add_argument("experiment", choices=EXPERIMENTS)
    return p


def main(argv=None, env=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if v is not None}
    if getattr(args, "theta", None):
        flags["angle"] = args.theta
    target = getattr(args, "suite", None) or getattr(args, "experiment", None)
    try:
        cfg = resolve(args.command, flags, env, target, COMMAND_DEFAULTS.get(args.command))
        return HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"raylander: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 3
        print(f"raylander: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
