"""Command-line entry point.

Every subcommand prints one report (JSON by default) and exits with 0 when
all checks pass, 1 when a check fails and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass

from . import __version__
from .hitting import (ExactHitting, estimate_from_batch, interval_semiring,
                      inner_outer_sandwich, renyi_verify)
from .laws import (ALPHA, FidiSpec, closed_set_compare, decompose, f_difference_is_null,
                   fidi_compare, grid_cells, hitting_compare_on_ring,
                   independent_increments_poisson_check, recover_intensity)
from .models import ModelSpecError, load_model, sample_batch
from .partition import FinitePointSet, canonical_point, enumerate_finite, leadbetter_count, take
from .rng import check_seed, derive_seed
from .setalg import CLOSED, IntervalSet, dyadic_sets, dyadic_sibling_pairs, parse_family
from .sigma import exhaustive_theorem_checks, random_trials


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str | None
    seed: int
    n: int
    depth: int
    alpha: float
    out: str
    canonical: bool
    threads: int
    extra: dict


# -- argument parsing helpers ------------------------------------------------------

def parse_sets(spec: str) -> list[IntervalSet]:
    """``dyadic:<k>``, ``grid:<lo>,<hi>,<count>`` or a JSON array of interval sets."""
    name, _, arg = spec.partition(":")
    try:
        if name == "dyadic":
            return dyadic_sets(int(arg))
        if name == "grid":
            lo, hi, count = arg.split(",")
            return grid_cells(float(lo), float(hi), int(count))
        obj = json.loads(spec)
        if not isinstance(obj, list):
            raise ValueError("expected a JSON array of interval sets")
        return [IntervalSet.from_json(x) for x in obj]
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"--sets: cannot parse {spec!r}: {exc}") from None


def _model(text: str | None, flag: str = "--model"):
    if text is None:
        raise ConfigError(f"{flag} is required for this command")
    try:
        return load_model(text)
    except ModelSpecError as exc:
        raise ConfigError(f"{flag}: {exc}") from None


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


# -- subcommands ---------------------------------------------------------------------

def cmd_sigma_check(cfg: RunConfig) -> tuple[bool, dict]:
    m, trials = cfg.extra["m"], cfg.extra["trials"]
    if not 1 <= m <= 8:
        raise ConfigError("--m must lie in 1..8")
    rnd = random_trials(m, trials, cfg.seed)
    exh = exhaustive_theorem_checks(min(m, 4))
    failures = len(rnd["failures"]) + exh["selfdissecting_violations"] + exh["membership_violations"]
    return failures == 0, {"random": rnd,
                           "exhaustive": exh, "failures": failures}


def cmd_enumerate(cfg: RunConfig) -> tuple[bool, dict]:
    try:
        family = parse_family(cfg.extra["family"])
    except ValueError as exc:
        raise ConfigError(f"--family: {exc}") from None
    if cfg.extra["points"] is not None:
        try:
            pts = FinitePointSet.of(float(v) for v in cfg.extra["points"].split(",") if v.strip())
        except ValueError as exc:
            raise ConfigError(f"--points: {exc}") from None
    else:
        real = sample_batch(_model(cfg.model), 1, cfg.depth, cfg.seed).realization(0)
        pts = real.points
    count = cfg.extra["count"] or len(pts) + 2
    result: dict = {"points": sorted(pts.points)}
    if pts:
        result["canonical_point"] = canonical_point(pts, family)
        result["enumeration"] = take(enumerate_finite(pts, None, family), count)
    else:
        result["canonical_point"] = None
        result["enumeration"] = []
    if cfg.extra["set"]:
        a = parse_sets(cfg.extra["set"])[0]
        counts = [leadbetter_count(pts, a, family, d) for d in range(cfg.extra["max_depth"] + 1)]
        result["leadbetter"] = {"set": a.to_json(), "counts": counts,
                                "points_in_set": len(pts.within(a))}
    return True, result


def _analytic_or_none(model, a):
    try:
        return float(model.hitting(a))
    except (ValueError, NotImplementedError):
        return None


def cmd_hitting(cfg: RunConfig) -> tuple[bool, dict]:
    model = _model(cfg.model)
    sets = parse_sets(cfg.extra["sets"])
    batch = sample_batch(model, cfg.n, cfg.depth, cfg.seed, cfg.threads)
    rows = []
    for a in sets:
        est = estimate_from_batch(model, batch, a)
        analytic = _analytic_or_none(model, a)
        ok = True if analytic is None else est.brackets(analytic)
        rows.append({**est.to_json(), "analytic": analytic, "pass": ok})
    return all(r["pass"] for r in rows), {"rows": rows}


def cmd_renyi(cfg: RunConfig) -> tuple[bool, dict]:
    model = _model(cfg.model)
    sets = parse_sets(cfg.extra["sets"])
    if not model.is_poisson:
        raise ConfigError("--model: the avoidance identity needs a Poisson-type model")
    rep = renyi_verify(model, sets, cfg.n, cfg.seed, cfg.depth, threads=cfg.threads)
    return rep["passed"], rep


def cmd_sandwich(cfg: RunConfig) -> tuple[bool, dict]:
    m = cfg.extra["m"]
    if not 1 <= m <= 10:
        raise ConfigError("--m must lie in 1..10")
    t = ExactHitting.random(m, cfg.seed)
    rep = inner_outer_sandwich(t, interval_semiring(m))
    return rep["passed"] and rep["preconditions_ok"], rep


def _batches(cfg: RunConfig, m1, m2):
    s1, s2 = derive_seed(cfg.seed, 1), derive_seed(cfg.seed, 2)
    return (sample_batch(m1, cfg.n, cfg.depth, s1, cfg.threads),
            sample_batch(m2, cfg.n, cfg.depth, s2, cfg.threads))


def cmd_laws(cfg: RunConfig) -> tuple[bool, dict]:
    sub = cfg.extra["laws_command"]
    if sub == "fidi":
        m1, m2 = _model(cfg.model), _model(cfg.extra["model2"], "--model2")
        spec = FidiSpec(tuple(parse_sets(cfg.extra["sets"])), cfg.extra["cap"])
        rep = fidi_compare(*_batches(cfg, m1, m2), spec, cfg.alpha)
        return rep["pass"], rep
    if sub == "ring":
        m1, m2 = _model(cfg.model), _model(cfg.extra["model2"], "--model2")
        rep = hitting_compare_on_ring(m1, m2, parse_sets(cfg.extra["sets"]), cfg.n, cfg.depth,
                                      cfg.seed, cfg.alpha, batches=_batches(cfg, m1, m2))
        return rep["pass"], rep
    if sub == "closed":
        m1, m2 = _model(cfg.model), _model(cfg.extra["model2"], "--model2")
        closed = [IntervalSet(a.components, CLOSED) for a in parse_sets(cfg.extra["sets"])]
        chains = [[IntervalSet.open((a.lo - 2.0 ** -k, a.hi + 2.0 ** -k)) for k in range(1, 12)]
                  for a in closed if a]
        probes = [IntervalSet.of((x, x + 0.05)) for x in (-2.0, -0.5, 0.2, 0.9, 2.5)]
        spec = FidiSpec(tuple(parse_sets(cfg.extra["fidi_sets"])), cfg.extra["cap"])
        rep = closed_set_compare(m1, m2, closed, chains, probes, spec, cfg.n, cfg.depth, cfg.seed, cfg.alpha)
        return rep["pass"], rep
    if sub == "recover":
        model = _model(cfg.model)
        batch = sample_batch(model, cfg.n, cfg.depth, cfg.seed, cfg.threads)
        pairs = dyadic_sibling_pairs(cfg.extra["pairs"])
        rep = recover_intensity(lambda a: estimate_from_batch(model, batch, a),
                                parse_sets(cfg.extra["sets"]), pairs)
        return rep["pass"], rep
    if sub == "incr":
        model = _model(cfg.model)
        sets = parse_sets(cfg.extra["sets"])
        batch = sample_batch(model, cfg.n, cfg.depth, cfg.seed, cfg.threads)
        try:
            rep = independent_increments_poisson_check(batch, sets, cfg.alpha)
        except ValueError as exc:
            raise ConfigError(f"--sets: {exc}") from None
        return rep["pass"], rep
    if sub == "decompose":
        model = _model(cfg.model)
        cells = parse_sets(cfg.extra["sets"])
        kw = dict(method=cfg.extra["method"], n=cfg.n, depth=cfg.depth, seed=cfg.seed)
        rep = decompose(model, cells, **kw)
        out = rep.to_json()
        ok = rep.residual_ok
        if cfg.extra["refine"]:
            finer = decompose(model, [h for c in cells for h in _split_cell(c, cfg.extra["refine"])], **kw)
            out["refined"] = finer.to_json()
            out["refinement"] = f_difference_is_null(model, rep, finer)
            ok = ok and finer.residual_ok and out["refinement"]["pass"]
        return ok, out
    raise ConfigError(f"unknown laws command {sub!r}")


def _split_cell(c: IntervalSet, parts: int) -> list[IntervalSet]:
    return [p for a, b in c.components for p in grid_cells(a, b, parts)]


COMMANDS = {"sigma-check": cmd_sigma_check, "enumerate": cmd_enumerate, "hitting": cmd_hitting,
            "renyi": cmd_renyi, "sandwich": cmd_sandwich, "laws": cmd_laws}


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="preset name, inline JSON or path to a JSON model spec")
    common.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed (default 0)")
    common.add_argument("--n", type=int, default=10_000, help="number of replicates")
    common.add_argument("--depth", type=int, default=1000, help="components sampled per replicate")
    common.add_argument("--alpha", type=float, default=ALPHA, help="test level before Bonferroni")
    common.add_argument("--out", choices=("json", "csv"), default="json")
    common.add_argument("--canonical", action="store_true", help="omit wall-clock fields")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = argparse.ArgumentParser(prog="crsets", description="Experiments on countable random sets.")
    p.add_argument("--version", action="version", version=f"crsets {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sigma-check", parents=[common], help="hit-or-miss vs counting σ-fields")
    s.add_argument("--m", type=int, default=6)
    s.add_argument("--trials", type=int, default=100)

    s = sub.add_parser("enumerate", parents=[common], help="canonical selection and enumeration")
    s.add_argument("--points", help="comma-separated points (else one sampled realization)")
    s.add_argument("--family", default="dyadic:0,1")
    s.add_argument("--count", type=int, default=0)
    s.add_argument("--set", help="set for Leadbetter counts (same syntax as --sets)")
    s.add_argument("--max-depth", type=int, default=10)

    for name, help_ in (("hitting", "estimate hitting probabilities"),
                        ("renyi", "check P(hit) = 1 - exp(-intensity)")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--sets", default="dyadic:20")

    s = sub.add_parser("sandwich", parents=[common], help="exact inner/outer approximation on a finite space")
    s.add_argument("--m", type=int, default=5)

    laws = sub.add_parser("laws", help="law-comparison harness")
    lsub = laws.add_subparsers(dest="laws_command", required=True)
    for name in ("fidi", "ring", "closed"):
        s = lsub.add_parser(name, parents=[common])
        s.add_argument("--model2", required=True)
        s.add_argument("--sets", default="dyadic:6")
        s.add_argument("--cap", type=int, default=3)
        if name == "closed":
            s.add_argument("--fidi-sets", default="[[[0.1,0.3]],[[0.3,0.6]],[[-0.5,-0.2]]]")
    s = lsub.add_parser("recover", parents=[common])
    s.add_argument("--sets", default="dyadic:6")
    s.add_argument("--pairs", type=int, default=20)
    s = lsub.add_parser("incr", parents=[common])
    s.add_argument("--sets", default="grid:0,1,4")
    s = lsub.add_parser("decompose", parents=[common])
    s.add_argument("--sets", default="grid:-3,3,60", help="candidate cells")
    s.add_argument("--method", choices=("analytic", "detector"), default="analytic")
    s.add_argument("--refine", type=int, default=0, help="also rerun with each cell split in this many parts")
    return p


def make_config(args: argparse.Namespace) -> RunConfig:
    base = {"command", "model", "seed", "n", "depth", "alpha", "out", "canonical", "threads"}
    extra = {k: v for k, v in vars(args).items() if k not in base}
    try:
        seed = check_seed(args.seed)
    except ValueError as exc:
        raise ConfigError(f"--seed: {exc}") from None
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    if args.depth < 1:
        raise ConfigError("--depth must be >= 1")
    if not 0 < args.alpha < 1:
        raise ConfigError("--alpha must lie in (0, 1)")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return RunConfig(args.command, args.model, seed, args.n, args.depth, args.alpha, args.out,
                     args.canonical, args.threads, extra)


def render(cfg: RunConfig, passed: bool, result: dict, elapsed: float) -> str:
    echo = asdict(cfg)
    # the worker count never changes results, so it is left out of canonical reports
    if cfg.canonical:
        echo.pop("threads")
    report = {"tool": "crsets", "version": __version__, "config": echo, "seed": cfg.seed,
              "pass": passed, "result": result}
    if not cfg.canonical:
        report["wall_clock_s"] = round(elapsed, 3)
    report = _clean(report)
    if cfg.out == "json":
        return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
    rows = result.get("rows")
    if not rows or "p_hat" not in rows[0]:
        raise ConfigError("--out csv is available for tabular reports (hitting, renyi)")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["set", "p_hat", "ci_low", "ci_high", "analytic", "tail_bound", "verdict"])
    for r in _clean(rows):
        w.writerow([json.dumps(r["set"]), r["p_hat"], r["ci"][0], r["ci"][1], r.get("analytic"),
                    r["truncation_bias_bound"], "pass" if r["pass"] else "fail"])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = make_config(args)
        start = time.perf_counter()
        passed, result = COMMANDS[cfg.command](cfg)
        text = render(cfg, passed, result, time.perf_counter() - start)
    except ConfigError as exc:
        print(f"crsets: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
