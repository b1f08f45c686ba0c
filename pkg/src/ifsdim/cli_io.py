"""Command-line front end, system files and deterministic report output.

System file (JSON)::

    {"type": "affine1d", "maps": [{"a": 0.5, "b": 0}], "seed": [0, 1]}
    {"type": "cubic1d", "lambda": 0.25, "epsilon": 0.001}
    {"type": "cubic1d", "maps": [{"lambda": .25, "epsilon": 0, "offset": 0}, ...], "seed": [0, 1.1]}
    {"type": "julia2d", "maps": [{"degree": 2, "gamma": [1, 0], "c": [0.05, 0]}],
     "seed": {"r_lo": 0.8, "r_hi": 1.25}}

Optional keys: ``weights`` (Bernoulli vector), ``potential`` (``{"k", "table"}``
with row-major k-word indexing) and ``partition`` (``{"q", "groups"}``).
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dimension as dm
from . import overlap as ov
from . import thermo
from .ifs_core import AffineMap, AnnulusSeed, CubicMap, IfsSystem, IntervalSeed, ValidationError
from .systems import JuliaMap, JuliaSpec, cubic_family, mixed_julia

EXIT_OK, EXIT_INVALID, EXIT_FLAGGED = 0, 1, 2
COMMANDS = ("dimension", "overlap", "lyapunov", "pressure", "bound", "verify", "cloud")
REPORT_HEAD = ("h", "chi", "log_o", "log_o_err", "hd", "hd_naive", "bound", "drop", "separated", "flags")


class UsageError(Exception):
    pass


# -- system files --------------------------------------------------------------


@dataclass(frozen=True)
class SystemFile:
    system: IfsSystem
    weights: thermo.BernoulliWeights
    potential: thermo.LocalPotential | None
    partition: dm.PartitionScheme | None
    raw: dict


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValidationError(f"complex numbers are [re, im] pairs, got {v}")
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ValidationError(f"{where}: missing field '{key}'")
    return d[key]


def build_system(spec: dict) -> IfsSystem:
    kind = _need(spec, "type", "system")
    if kind == "affine1d":
        maps = [AffineMap(float(_need(m, "a", "map")), float(_need(m, "b", "map"))) for m in _need(spec, "maps", kind)]
        lo, hi = spec.get("seed", [0.0, 1.0])
        return IfsSystem(maps, IntervalSeed(float(lo), float(hi)), name=spec.get("name", ""))
    if kind == "cubic1d":
        if "maps" not in spec:
            seed = tuple(map(float, spec["seed"])) if "seed" in spec else None
            return cubic_family(float(_need(spec, "lambda", kind)), float(spec.get("epsilon", 0.0)), seed)
        maps = [
            CubicMap(float(_need(m, "lambda", "map")), float(m.get("epsilon", 0.0)), float(m.get("offset", 0.0)))
            for m in spec["maps"]
        ]
        lo, hi = _need(spec, "seed", kind)
        return IfsSystem(maps, IntervalSeed(float(lo), float(hi)), name=spec.get("name", ""))
    if kind == "julia2d":
        jm = [
            JuliaMap(
                int(_need(m, "degree", "map")),
                _complex(m.get("gamma", 1.0)),
                _complex(m.get("c", 0.0)),
                tuple(_complex(v) for v in m.get("lower", ())),
            )
            for m in _need(spec, "maps", kind)
        ]
        seed = spec.get("seed", {})
        js = JuliaSpec(tuple(jm), float(seed.get("r_lo", 0.8)), float(seed.get("r_hi", 1.25)))
        return mixed_julia(js)
    raise ValidationError(f"unknown system type {kind!r}")


def parse_system(spec: dict) -> SystemFile:
    if not isinstance(spec, dict):
        raise ValidationError("system file must hold a JSON object")
    system = build_system(spec)
    w = spec.get("weights")
    weights = thermo.BernoulliWeights(tuple(map(float, w))) if w is not None else thermo.BernoulliWeights.uniform(system.m)
    if weights.m != system.m:
        raise ValidationError(f"{weights.m} weights for {system.m} maps")
    pot = None
    if "potential" in spec:
        p = spec["potential"]
        pot = thermo.LocalPotential(system.m, int(_need(p, "k", "potential")), np.array(_need(p, "table", "potential"), float))
    part = None
    if "partition" in spec:
        p = spec["partition"]
        part = dm.PartitionScheme(int(p.get("q", 1)), tuple(tuple(tuple(w) if isinstance(w, list) else (w,) for w in g) for g in p["groups"]), system.m)
    return SystemFile(system, weights, pot, part, spec)


def load_system(path: str | Path) -> SystemFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read system file: {exc}") from exc
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return parse_system(spec)


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    command: str
    system: str
    seed: int
    n: int = 12
    samples: int = 2000
    cover_depth: int = ov.DEFAULT_COVER_DEPTH
    tau: float | None = None
    q: int | None = None
    format: str = "json"
    out: str | None = None
    psi: str = "weights"
    topological: bool = False
    points: int = 10_000
    lyap_n: int = 1000
    lyap_samples: int = 200
    burn_in: int = ov.DEFAULT_BURN_IN
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        checks = [
            (self.seed >= 0, "seed must be a non-negative integer"),
            (self.seed < 2**64, "seed must fit in 64 bits"),
            (self.n >= 1, "n must be >= 1"),
            (self.samples >= 1, "samples must be >= 1"),
            (self.cover_depth >= 0, "cover depth must be >= 0"),
            (self.tau is None or self.tau > 0, "tau must be positive"),
            (self.q is None or self.q >= 1, "q must be >= 1"),
            (self.format in ("json", "csv"), "format must be json or csv"),
            (self.psi in ("weights", "zero", "file"), "psi must be weights, zero or file"),
            (self.points >= 1, "points must be >= 1"),
            (self.lyap_n >= 1 and self.lyap_samples >= 1, "Lyapunov sizes must be >= 1"),
            (self.burn_in >= 0, "burn-in must be >= 0"),
            (self.workers >= 1, "workers must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise UsageError(msg)

    def to_argv(self) -> list[str]:
        argv = [self.command]
        for f in fields(self):
            if f.name == "command":
                continue
            v = getattr(self, f.name)
            if v is None or (f.name != "system" and f.name != "seed" and v == f.default):
                continue
            flag = "--" + f.name.replace("_", "-")
            if isinstance(v, bool):
                argv.append(flag)
            else:
                argv += [flag, repr(v) if isinstance(v, float) else str(v)]
        return argv

    @classmethod
    def parse(cls, argv: Sequence[str]) -> "RunConfig":
        ns = _parser().parse_args(list(argv))
        return cls(**{f.name: getattr(ns, f.name) for f in fields(cls)})

    def echo(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in ("out",)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ifsdim", description="Dimensions of self-conformal and Gibbs projection measures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--system", required=True, help="system file (JSON)")
        s.add_argument("--seed", type=int, required=True, help="master seed (u64)")
        s.add_argument("--n", type=int, default=12, help="word length for overlap counts")
        s.add_argument("--samples", type=int, default=2000)
        s.add_argument("--cover-depth", type=int, default=ov.DEFAULT_COVER_DEPTH)
        s.add_argument("--tau", type=float, default=None, help="genericity tolerance (default 0.1*spread)")
        s.add_argument("--q", type=int, default=None, help="block length of the partition scheme")
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--out", default=None, help="output path (default stdout)")
        s.add_argument("--psi", choices=("weights", "zero", "file"), default="weights",
                       help="potential: log weights, zero, or the file's 'potential'")
        s.add_argument("--topological", action="store_true", help="overlap: use beta_n instead of b_n")
        s.add_argument("--points", type=int, default=10_000, help="cloud/verify sample size")
        s.add_argument("--lyap-n", type=int, default=1000)
        s.add_argument("--lyap-samples", type=int, default=200)
        s.add_argument("--burn-in", type=int, default=ov.DEFAULT_BURN_IN)
        s.add_argument("--workers", type=int, default=1)
    return p


# -- serialisation -----------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _dump(v, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_dump(x, indent + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple)) for x in v):
            return "[" + ", ".join(_fmt(x) for x in v) + "]"
        return "[\n" + ",\n".join(inner + _dump(x, indent + 1) for x in v) + "\n" + pad + "]"
    return _fmt(v)


def ordered(report: dict) -> dict:
    """Report keys in the documented order: the head fields, the rest, then ``config``."""
    head = {k: report[k] for k in REPORT_HEAD if k in report}
    rest = {k: v for k, v in report.items() if k not in head and k != "config"}
    out = {**head, **rest}
    if "config" in report:
        out["config"] = report["config"]
    return out


def write_report(report: dict, format: str = "json", path: str | Path | None = None) -> str:
    """Serialise ``report`` (dict, or ``{"points": array}`` for clouds) and write it."""
    if format == "json":
        text = _dump(ordered(report)) + "\n"
    elif format == "csv":
        text = _csv(report)
    else:
        raise ValueError(f"unknown format {format!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _csv(report: dict) -> str:
    buf = io.StringIO()
    if "points" in report:
        pts = np.asarray(report["points"])
        if np.iscomplexobj(pts):
            buf.write("x,y\n")
            for z in pts:
                buf.write(f"{_fmt(z.real)},{_fmt(z.imag)}\n")
        else:
            buf.write("x\n")
            for x in pts:
                buf.write(f"{_fmt(x)}\n")
        return buf.getvalue()
    flat = {k: v for k, v in ordered(report).items() if not isinstance(v, (dict, list, tuple))}
    buf.write(",".join(flat) + "\n")
    buf.write(",".join(_fmt(v) for v in flat.values()) + "\n")
    return buf.getvalue()


# -- commands ------------------------------------------------------------------


def _potential(cfg: RunConfig, sf: SystemFile) -> thermo.LocalPotential:
    if cfg.psi == "zero":
        return thermo.LocalPotential.zero(sf.system.m)
    if cfg.psi == "file":
        if sf.potential is None:
            raise ValidationError("--psi file needs a 'potential' entry in the system file")
        return sf.potential
    return sf.potential if sf.potential is not None else sf.weights.potential()


def _scheme(cfg: RunConfig, sf: SystemFile):
    if sf.partition is not None and (cfg.q is None or cfg.q == sf.partition.q):
        return sf.partition
    if cfg.q is None:
        return None
    return dm.default_partition(sf.system, cfg.q)


def _dimension(cfg: RunConfig, sf: SystemFile) -> dm.DimensionReport:
    kw = dict(n=cfg.n, samples=cfg.samples, seed=cfg.seed, tau=cfg.tau, cover_depth=cfg.cover_depth,
              burn_in=cfg.burn_in, lyap_n=cfg.lyap_n, lyap_samples=cfg.lyap_samples, workers=cfg.workers)
    pot = _potential(cfg, sf)
    scheme = _scheme(cfg, sf)
    if scheme is not None:
        ok, bad = dm.verify_partition(sf.system, scheme)
        if not ok:
            raise ValidationError(f"partition fails separation for {len(bad)} pairs, e.g. {bad[0]}")
    if pot.k == 1 and cfg.psi != "file":
        w = np.exp(pot.table - thermo.pressure(pot))
        return dm.self_conformal_dimension(sf.system, w / w.sum(), scheme=scheme, **kw)
    return dm.gibbs_dimension(sf.system, pot, scheme=scheme, **kw)


def _cmd_dimension(cfg, sf):
    return _dimension(cfg, sf).to_dict()


def _cmd_verify(cfg, sf):
    rep = _dimension(cfg, sf)
    pot = _potential(cfg, sf)
    if pot.k != 1:
        raise ValidationError("verify compares against Bernoulli self-conformal measures only")
    emp = dm.empirical_pointwise_dimension(sf.system, thermo.equilibrium_measure(pot).transition[0],
                                           cfg.points, cfg.seed)
    d = rep.with_(empirical=emp).to_dict()
    d["difference"] = emp.median - rep.hd
    return d


def _cmd_overlap(cfg, sf):
    if cfg.topological:
        est = ov.topological_overlap(sf.system, cfg.n, cfg.samples, cfg.seed, cover_depth=cfg.cover_depth,
                                     burn_in=cfg.burn_in, workers=cfg.workers)
    else:
        est = ov.measure_overlap(sf.system, _potential(cfg, sf), cfg.n, cfg.samples, cfg.seed, tau=cfg.tau,
                                 cover_depth=cfg.cover_depth, burn_in=cfg.burn_in, workers=cfg.workers)
    return est.to_dict()


def _cmd_lyapunov(cfg, sf):
    mu = thermo.equilibrium_measure(_potential(cfg, sf))
    est = dm.lyapunov(sf.system, mu, cfg.lyap_n, cfg.lyap_samples, cfg.seed, cfg.workers)
    b = sf.system.contraction_bounds()
    return {"chi": est.chi, "chi_err": est.stderr, "chi_exact": est.exact,
            "log_kappa_min": math.log(b.kappa_min), "log_kappa_max": math.log(b.kappa_max),
            "distortion": b.distortion, "flags": []}


def _cmd_pressure(cfg, sf):
    pot = _potential(cfg, sf)
    mu = thermo.equilibrium_measure(pot)
    return {"pressure": mu.pressure, "h": thermo.entropy(mu), "integral": mu.integral(pot),
            "residual": thermo.variational_residual(pot, mu), "k": pot.k,
            "marginal": [float(v) for v in mu.symbol_marginal], "flags": []}


def _cmd_bound(cfg, sf):
    scheme = _scheme(cfg, sf) or dm.default_partition(sf.system, 1)
    ok, bad = dm.verify_partition(sf.system, scheme)
    pot = _potential(cfg, sf)
    mu = thermo.equilibrium_measure(pot)
    lyap = dm.lyapunov(sf.system, mu, cfg.lyap_n, cfg.lyap_samples, cfg.seed, cfg.workers)
    chi = lyap.exact if lyap.exact is not None else lyap.chi
    h = thermo.entropy(mu)
    out = {"h": h, "chi": chi, "hd_naive": h / abs(chi), "bound": None, "verified": ok,
           "violations": [[list(u), list(v)] for u, v in bad[:20]], "scheme": scheme.to_dict(), "flags": []}
    if ok:
        out["bound"] = (dm.scm_lower_bound(scheme, mu.transition[0], chi) if pot.k == 1
                        else dm.qint_lower_bound(scheme, pot, mu, chi))
    else:
        out["flags"] = ["unverified_partition"]
    return out


def _cmd_cloud(cfg, sf):
    mu = thermo.equilibrium_measure(_potential(cfg, sf))
    return {"points": dm.sample_cloud(sf.system, mu, cfg.points, cfg.seed)}


HANDLERS = {
    "dimension": _cmd_dimension,
    "overlap": _cmd_overlap,
    "lyapunov": _cmd_lyapunov,
    "pressure": _cmd_pressure,
    "bound": _cmd_bound,
    "verify": _cmd_verify,
    "cloud": _cmd_cloud,
}


def execute(cfg: RunConfig) -> tuple[dict, int]:
    """Run one command; returns the report and its exit code."""
    sf = load_system(cfg.system)
    report = HANDLERS[cfg.command](cfg, sf)
    if cfg.command == "cloud":
        return report, EXIT_OK
    report["config"] = {**cfg.echo(), "system_spec": sf.system.to_dict()}
    return report, EXIT_FLAGGED if report.get("flags") else EXIT_OK


def run(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = RunConfig.parse(argv)
        report, code = execute(cfg)
    except (UsageError, ValidationError, ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if cfg.command == "cloud" and cfg.format == "json":
        report = {"points": [[z.real, z.imag] if isinstance(z, complex) else z for z in report["points"].tolist()]}
    try:
        write_report(report, cfg.format, cfg.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return code


def main() -> None:
    sys.exit(run())
