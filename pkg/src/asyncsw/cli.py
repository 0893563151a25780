"""Command-line front end: region | exponent | simulate | verify.

Every command writes a table (CSV with header, or JSON records) and is
deterministic given its arguments, so re-runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds, codec, delaysource, probcore, typesys
from .bounds import SourceClass
from .delaysource import DelaySpec
from .probcore import JointPmf

NORMALIZE_TOL = 1e-9
EXACT_PAIRS = 2 ** 12
SAMPLE_CONFIGS = ("dsbs_0.1.json", "two_member.json", "binary_ternary.json")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config

def _number(v) -> float:
    if isinstance(v, bool):
        raise ConfigError(f"not a probability: {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Decimal(v.strip()))
        except InvalidOperation:
            raise ConfigError(f"not a decimal number: {v!r}") from None
    raise ConfigError(f"not a probability: {v!r}")


def parse_source_class(doc: dict, origin: str = "<config>") -> SourceClass:
    """Source-class document -> SourceClass.

    Members are row-major |X| x |Y| matrices, flat or nested.  A member
    summing to within 1e-9 of one is renormalized; anything else is rejected.
    """
    try:
        kx, ky = int(doc["alphabet_x"]), int(doc["alphabet_y"])
        raw = doc["members"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{origin}: needs integer alphabet_x, alphabet_y and a members list ({exc})") from None
    if kx < 1 or ky < 1:
        raise ConfigError(f"{origin}: alphabet sizes must be positive")
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{origin}: members must be a non-empty list")
    members = []
    for i, m in enumerate(raw):
        flat = [c for row in m for c in row] if m and isinstance(m[0], list) else list(m)
        if len(flat) != kx * ky:
            raise ConfigError(f"{origin}: member {i} has {len(flat)} entries, expected {kx * ky}")
        p = np.array([_number(v) for v in flat], dtype=float)
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ConfigError(f"{origin}: member {i} has a negative or non-finite entry")
        total = float(p.sum())
        if abs(total - 1.0) > NORMALIZE_TOL:
            raise ConfigError(f"{origin}: member {i} sums to {total:.12g}, not 1")
        members.append(JointPmf((p / total).reshape(kx, ky)))
    return SourceClass(tuple(members))


def load_source_class(path: str) -> SourceClass:
    if path.startswith("sample:"):
        name = path.split(":", 1)[1]
        text = resources.files("asyncsw").joinpath("data", name).read_text()
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"source-class file not found: {path}")
        text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_source_class(doc, path)


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad {what} list: {text!r}") from None


def _ints(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad {what} list: {text!r}") from None


def _delay_specs(args) -> list[DelaySpec]:
    try:
        if args.delay_seq:
            p = Path(args.delay_seq)
            if not p.is_file():
                raise ConfigError(f"delay sequence file not found: {args.delay_seq}")
            return [DelaySpec.explicit(json.loads(p.read_text()))]
        if args.delay_bound is not None:
            return [DelaySpec.constant(c) for c in _ints(args.delay_bound, "delay bound")]
        ratios = _floats(args.delay_ratio, "delay ratio") if args.delay_ratio is not None else [0.0]
        return [DelaySpec.linear(a) for a in ratios]
    except (TypeError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad delay specification: {exc}") from None


@dataclass
class RunConfig:
    command: str
    sources: list[str]
    classes: list[SourceClass]
    delays: list[DelaySpec]
    rates: list[tuple[float, float]]
    n_list: list[int]
    rho_grid: int
    trials: int
    seeds: list[int]
    out: str | None
    fmt: str
    args: argparse.Namespace


def build_config(args) -> RunConfig:
    sources = args.source or ([f"sample:{s}" for s in SAMPLE_CONFIGS] if args.command == "verify" else [])
    if not sources:
        raise ConfigError("--source is required")
    classes = [load_source_class(s) for s in sources]
    rates = []
    for r in args.rates or []:
        vals = _floats(r, "rates")
        if len(vals) != 2 or min(vals) < 0:
            raise ConfigError(f"--rates takes two non-negative numbers R1,R2, got {r!r}")
        rates.append((vals[0], vals[1]))
    if args.sweep:
        lo, hi, count = _floats(args.sweep, "sweep")
        if int(count) != count or count < 2 or lo < 0 or hi < lo:
            raise ConfigError("--sweep takes LO,HI,COUNT with 0 <= LO <= HI and COUNT >= 2")
        rates += [(float(r), float(r)) for r in np.linspace(lo, hi, int(count))]
    n_list = _ints(args.n_list, "n") if args.n_list else []
    if any(n < 1 for n in n_list):
        raise ConfigError("blocklengths must be positive")
    if args.rho_grid < 11:
        raise ConfigError("--rho-grid must be at least 11")
    if args.trials < 1:
        raise ConfigError("--trials must be positive")
    seeds = _ints(args.seed, "seed")
    if not seeds or any(s < 0 or s >= 2 ** 64 for s in seeds):
        raise ConfigError("seeds must be 64-bit unsigned integers")
    return RunConfig(args.command, sources, classes, _delay_specs(args), rates, n_list,
                     args.rho_grid, args.trials, seeds, args.out, args.format, args)


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.9g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(f"{v:.9g}") if math.isfinite(v) else _fmt(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{k: _json_value(v) for k, v in r.items()} for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def cmd_region(cfg: RunConfig) -> list[dict]:
    rows = []
    for src, cls in zip(cfg.sources, cfg.classes):
        for spec in cfg.delays:
            delta = spec.limit_ratio
            reg = bounds.rate_region(cls, delta)
            for k, (r1, r2) in enumerate(reg.boundary(cfg.args.points)):
                rows.append({"source": src, "delta": delta, "r1_star": reg.r1_star,
                             "r2_star": reg.r2_star, "r3_star": reg.r3_star,
                             "point": k, "R1": r1, "R2": r2})
    return rows


def cmd_exponent(cfg: RunConfig) -> list[dict]:
    if not cfg.rates:
        raise ConfigError("exponent needs --rates or --sweep")
    rows = []
    for src, cls in zip(cfg.sources, cfg.classes):
        for spec in cfg.delays:
            delta = spec.limit_ratio
            reg = bounds.rate_region(cls, delta)
            for r1, r2 in cfg.rates:
                res = bounds.best_exponent(r1, r2, cls, delta, cfg.rho_grid)
                rows.append({"source": src, "R1": r1, "R2": r2, "delta": delta,
                             "exponent": res.value, "rho1": res.argmax_rho[0],
                             "rho2": res.argmax_rho[1], "rho3": res.argmax_rho[2],
                             "binding_index": res.binding_index,
                             "inside_region": reg.contains(r1, r2)})
    return rows


def _check_budget(cls: SourceClass, n: int):
    kx, ky = cls.shape
    if kx ** n > codec.SEQUENCE_BUDGET or ky ** n > codec.SEQUENCE_BUDGET:
        raise ConfigError(f"n={n} needs {max(kx, ky)}^{n} sequences per encoder; the limit is "
                          f"{codec.SEQUENCE_BUDGET}")


def _simulate_rows(src, cls, spec, n, r1, r2, seed, decoder, trials):
    kx, ky = cls.shape
    delays = spec.delay_set(n)
    if decoder == "dummy":
        code, rule = codec.dummy_bound_code(n, r1, r2, cls, seed)
    else:
        code = codec.build_code(n, r1, r2, seed, kx, ky)
        rule = None if decoder == "oracle" else codec.DecodeRule.mixed(
            typesys.mixed_source(cls.members, n, delays))
    exact = kx ** n * ky ** n <= EXACT_PAIRS
    table = codec.decoding_table(code, rule) if exact and rule is not None else None
    base = {"source": src, "decoder": decoder, "n": n, "R1": r1, "R2": r2, "seed": seed}
    rows = []
    for mi, j in enumerate(cls.members):
        for d in delays:
            cell_rule = codec.DecodeRule.oracle(j, d, n) if rule is None else rule
            if exact:
                est = codec.exact_error_probability(code, cell_rule, (j, d),
                                                    table if rule is not None else None)
                lo = hi = est
            else:
                res = codec.monte_carlo_error(code, cell_rule, (j, d), trials, [seed, mi, d + n])
                est, (lo, hi) = res.estimate, res.wilson_95_interval
            rows.append({**base, "member": mi, "d": d, "mode": "exact" if exact else "mc",
                         "estimate": est, "ci_low": lo, "ci_high": hi})
    worst = max(rows, key=lambda r: r["estimate"])
    rows.append({**worst, "member": "", "d": "sup-max"})
    return rows


def cmd_simulate(cfg: RunConfig) -> list[dict]:
    if not cfg.rates:
        raise ConfigError("simulate needs --rates")
    if not cfg.n_list:
        raise ConfigError("simulate needs --n-list")
    decoders = [d.strip() for d in cfg.args.decoders.split(",") if d.strip()]
    for d in decoders:
        if d not in ("oracle", "mixed", "dummy"):
            raise ConfigError(f"unknown decoder {d!r}; choose from oracle, mixed, dummy")
    rows = []
    for src, cls in zip(cfg.sources, cfg.classes):
        for n in cfg.n_list:
            _check_budget(cls, n)
        for spec in cfg.delays:
            for n in cfg.n_list:
                for r1, r2 in cfg.rates:
                    for seed in cfg.seeds:
                        for dec in decoders:
                            rows += _simulate_rows(src, cls, spec, n, r1, r2, seed, dec, cfg.trials)
    return rows


def cmd_verify(cfg: RunConfig) -> list[dict]:
    from . import checks
    n_list = cfg.n_list or [12]
    a = cfg.args
    given = a.delay_ratio is not None or a.delay_bound is not None or a.delay_seq
    delay = cfg.delays[0] if given else DelaySpec.constant(1)
    rows = []
    for src, cls in zip(cfg.sources, cfg.classes):
        for res in checks.run_suite(cls, n_list, cfg.seeds, delay):
            rows.append({"source": src, **res})
    return rows


COMMANDS = {"region": cmd_region, "exponent": cmd_exponent,
            "simulate": cmd_simulate, "verify": cmd_verify}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asyncsw", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--source", action="append",
                        help="source-class JSON file (repeatable; 'sample:NAME' for shipped samples)")
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--delay-ratio", help="linear delay bound ratio(s), comma separated")
        g.add_argument("--delay-bound", help="constant delay bound(s), comma separated")
        g.add_argument("--delay-seq", help="JSON file with [lo, hi] pairs for n = 1, 2, ...")
        sp.add_argument("--rates", action="append", help="R1,R2 in bits (repeatable)")
        sp.add_argument("--sweep", help="LO,HI,COUNT: diagonal rate sweep R1 = R2")
        sp.add_argument("--n-list", help="comma-separated blocklengths")
        sp.add_argument("--rho-grid", type=int, default=101)
        sp.add_argument("--trials", type=int, default=10000)
        sp.add_argument("--seed", default="1", help="seed or comma-separated seeds")
        sp.add_argument("--decoders", default="mixed", help="simulate: oracle,mixed,dummy")
        sp.add_argument("--points", type=int, default=5, help="region: samples on the sum-rate face")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        rows = COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"asyncsw {args.command}: error: {exc}", file=sys.stderr)
        return 2
    text = render(rows, cfg.fmt)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.command == "verify" and any(r["status"] == "fail" for r in rows):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
