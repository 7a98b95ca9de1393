"""``twolevel`` command line.

Every verb can write a run manifest (``--manifest PATH``; automatic next to
``--out``) recording the exact argv, input and output digests.  ``twolevel
replay MANIFEST --check`` re-runs it and compares outputs byte for byte.

Exit codes: 0 success, 1 domain failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import STRATEGIES, get_strategy
from .construct import (
    ConstructionParams,
    build_random_two_level,
    draw_offsets,
    integral_weight,
    min_distances,
    offset_pair_diagnostics,
    users_for_rate,
)
from .core import TwoLevelCode, UsageError, UserId
from .decode import TieBreak, md_decode
from .rates import SearchConfig, emit_region, parse_grid
from .rng import stream
from .sim import ADVERSARIAL, ENGINES, TIE_POLICIES, SweepTemplate, TrialSpec, coalition_pattern, estimate_errors, sweep_blocklength
from .verify import DEFAULT_WORK_LIMIT, WorkLimitExceeded, verify_ta_exhaustive

STDOUT = "<stdout>"


@dataclass
class Result:
    code: int = 0
    stdout: str = ""
    files: dict = field(default_factory=dict)  # path -> text
    inputs: list = field(default_factory=list)
    seed: int | None = None


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _digest(text: str | bytes) -> str:
    data = text.encode() if isinstance(text, str) else text
    return hashlib.sha256(data).hexdigest()


def _load_code(path) -> TwoLevelCode:
    if not Path(path).exists():
        raise UsageError(f"no such code file: {path}")
    return TwoLevelCode.load(path)


def _parse_users(text: str) -> tuple[UserId, ...]:
    return tuple(UserId.parse(p.strip()) for p in text.split(",") if p.strip())


def _parse_symbols(args) -> np.ndarray:
    if args.y is not None:
        try:
            return np.array([int(v) for v in args.y.replace(" ", "").split(",") if v != ""], dtype=np.int64)
        except ValueError:
            raise UsageError(f"--y must be comma-separated integers, got {args.y!r}") from None
    try:
        return np.frombuffer(bytes.fromhex(args.y_hex), dtype=np.uint8).astype(np.int64)
    except ValueError:
        raise UsageError("--y-hex must be an even-length hex string, one byte per symbol") from None


def _sizes(args, n):
    if args.M1 is not None and args.M2 is not None:
        return args.M1, args.M2
    if args.R1 is not None and args.R2 is not None:
        return users_for_rate(args.q, n, args.R1), users_for_rate(args.q, n, args.R2)
    raise UsageError("give either --M1/--M2 or --R1/--R2")


# -- verbs -----------------------------------------------------------------


def cmd_gen(args) -> Result:
    M1, M2 = _sizes(args, args.n)
    code = build_random_two_level(ConstructionParams(args.q, args.n, M1, M2, args.omega, args.seed))
    return Result(files={args.out: code.dumps()}, seed=args.seed)


def cmd_distances(args) -> Result:
    prof = min_distances(_load_code(args.code))
    return Result(stdout=_json(prof.to_dict()), inputs=[args.code])


def cmd_verify_ta(args) -> Result:
    code = _load_code(args.code)
    try:
        verdict = verify_ta_exhaustive(code, args.t1, args.t2, work_limit=args.work_limit, workers=args.workers)
    except WorkLimitExceeded as exc:
        raise UsageError(f"{exc}; raise --work-limit to proceed") from None
    rc = 1 if (args.expect_holds and not verdict.holds) else 0
    return Result(code=rc, stdout=_json(verdict.to_dict()), inputs=[args.code])


def cmd_decode(args) -> Result:
    code = _load_code(args.code)
    res = md_decode(code, _parse_symbols(args), TieBreak(args.tiebreak))
    return Result(stdout=_json(res.to_dict()), inputs=[args.code])


def cmd_attack(args) -> Result:
    code = _load_code(args.code)
    coalition = _parse_users(args.coalition)
    if not coalition:
        raise UsageError("--coalition is empty")
    fps = code.fingerprints(coalition)
    y = get_strategy(args.strategy)(fps, stream(args.seed, "attack"), code=code, coalition=coalition)
    out = {"strategy": args.strategy, "coalition": [list(u) for u in coalition], "y": y.tolist()}
    return Result(stdout=_json(out), inputs=[args.code], seed=args.seed)


def cmd_simulate(args) -> Result:
    if args.n_list:
        if args.R1 is None or args.R2 is None:
            raise UsageError("--n-list needs --R1 and --R2")
        if args.coalition:
            raise UsageError("--n-list takes --coalition-size/--layout, not --coalition")
        template = SweepTemplate(
            q=args.q, R1=args.R1, R2=args.R2, omega=args.omega, seed=args.seed,
            coalition_size=args.coalition_size, layout=args.layout, strategy=args.strategy,
            tiebreak=args.tiebreak, trials=args.trials, engine=args.engine,
        )
        try:
            n_list = [int(v) for v in args.n_list.split(",")]
        except ValueError:
            raise UsageError("--n-list must be comma-separated integers") from None
        table, _ = sweep_blocklength(template, n_list, workers=args.workers)
        if args.out:
            return Result(files={args.out: table}, seed=args.seed)
        return Result(stdout=table, seed=args.seed)
    if args.n is None:
        raise UsageError("give --n or --n-list")
    M1, M2 = _sizes(args, args.n)
    params = ConstructionParams(args.q, args.n, M1, M2, args.omega, args.seed)
    coalition = _parse_users(args.coalition) if args.coalition else coalition_pattern(args.coalition_size, args.layout)
    spec = TrialSpec(params, coalition, strategy=args.strategy, tiebreak=args.tiebreak, trials=args.trials, engine=args.engine)
    est = estimate_errors(spec, workers=args.workers)
    doc = {
        "q": args.q, "n": args.n, "M1": M1, "M2": M2, "omega": args.omega, "w": params.w,
        "coalition": [list(u) for u in coalition], "strategy": args.strategy, "tiebreak": args.tiebreak,
        "engine": spec.resolved_engine, "seed": args.seed, **est.to_dict(),
    }
    text = _json(doc)
    if args.out:
        return Result(files={args.out: text}, seed=args.seed)
    return Result(stdout=text, seed=args.seed)


def cmd_region(args) -> Result:
    cfg = SearchConfig(step=args.step, refine_rounds=args.refine_rounds)
    table = emit_region(args.q, args.t1, args.t2, parse_grid(args.omega_grid), cfg)
    if args.out:
        return Result(files={args.out: table})
    return Result(stdout=table)


def cmd_diagnostics(args) -> Result:
    w = args.w if args.w is not None else integral_weight(args.omega, args.n)
    samples = draw_offsets(args.n, w, args.q, args.samples, args.seed)
    rep = offset_pair_diagnostics(samples, args.n, w, args.q, eps=args.eps)
    if not args.full:
        rep.pop("marginals")
    return Result(stdout=_json(rep), seed=args.seed)


def cmd_replay(args) -> Result:
    man = json.loads(Path(args.manifest).read_text())
    argv = list(man["argv"])
    if args.workers is not None:
        if "--workers" in argv:
            argv[argv.index("--workers") + 1] = str(args.workers)
        elif man["verb"] in ("verify-ta", "simulate"):
            argv += ["--workers", str(args.workers)]
    res = _run(argv)
    if not args.check:
        return res
    stale = [p for p, digest in man.get("inputs", {}).items() if not Path(p).exists() or _digest(Path(p).read_bytes()) != digest]
    mismatches = []
    produced = dict(res.files)
    if res.stdout:
        produced[STDOUT] = res.stdout
    for path, digest in man["outputs"].items():
        if _digest(produced.get(path, "")) != digest:
            mismatches.append(path)
    ok = not mismatches and not stale
    report = {"manifest": args.manifest, "identical": ok, "mismatched": mismatches, "changed_inputs": stale}
    return Result(code=0 if ok else 1, stdout=_json(report))


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twolevel", description="Two-level fingerprinting codes toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)

    def verb(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--manifest", help="write a run manifest to this path")
        return sp

    def construction(sp, need_n=True):
        sp.add_argument("--q", type=int, required=True)
        sp.add_argument("--n", type=int, required=need_n)
        sp.add_argument("--M1", type=int)
        sp.add_argument("--M2", type=int)
        sp.add_argument("--R1", type=float, help="rate; sets M1 = floor(q^(n R1))")
        sp.add_argument("--R2", type=float, help="rate; sets M2 = floor(q^(n R2))")
        sp.add_argument("--omega", type=float, required=True)
        sp.add_argument("--seed", type=int, required=True)

    sp = verb("gen", cmd_gen, "draw a random center-plus-offset code")
    construction(sp)
    sp.add_argument("--out", required=True)

    sp = verb("distances", cmd_distances, "d1, d2 and d of a code")
    sp.add_argument("--code", required=True)

    sp = verb("verify-ta", cmd_verify_ta, "exhaustive (t1, t2)-traceability check")
    sp.add_argument("--code", required=True)
    sp.add_argument("--t1", type=int, required=True)
    sp.add_argument("--t2", type=int, required=True)
    sp.add_argument("--work-limit", type=int, default=DEFAULT_WORK_LIMIT)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--expect-holds", action="store_true", help="exit 1 if a counterexample is found")

    sp = verb("decode", cmd_decode, "minimum-distance decode a forgery")
    sp.add_argument("--code", required=True)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--y", help="comma-separated symbols")
    g.add_argument("--y-hex", help="hex string, one byte per symbol")
    sp.add_argument("--tiebreak", choices=[t.value for t in TieBreak], default=TieBreak.LEX_FIRST.value)

    sp = verb("attack", cmd_attack, "forge with a registered strategy")
    sp.add_argument("--code", required=True)
    sp.add_argument("--coalition", required=True, help="users as G:M,G:M,...")
    sp.add_argument("--strategy", choices=sorted(STRATEGIES), default="interleave-uniform")
    sp.add_argument("--seed", type=int, required=True)

    sp = verb("simulate", cmd_simulate, "Monte Carlo error estimates")
    construction(sp, need_n=False)
    sp.add_argument("--n-list", help="comma-separated block lengths (sweep; needs --R1/--R2)")
    sp.add_argument("--coalition", help="explicit users G:M,G:M,...")
    sp.add_argument("--coalition-size", type=int, default=2)
    sp.add_argument("--layout", choices=["distinct", "same"], default="distinct")
    sp.add_argument("--strategy", choices=sorted(STRATEGIES), default="interleave-uniform")
    sp.add_argument("--tiebreak", choices=TIE_POLICIES, default=ADVERSARIAL)
    sp.add_argument("--engine", choices=ENGINES, default="auto")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")

    sp = verb("region", cmd_region, "achievable-region boundary as CSV")
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--t1", type=int, required=True)
    sp.add_argument("--t2", type=int, required=True)
    sp.add_argument("--omega-grid", required=True, help="start:stop:step or a comma list")
    sp.add_argument("--step", type=float, default=1e-3, help="grid step of the phi maximization")
    sp.add_argument("--refine-rounds", type=int, default=2)
    sp.add_argument("--out")

    sp = verb("diagnostics", cmd_diagnostics, "statistics of constant-weight offsets")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--q", type=int, required=True)
    wg = sp.add_mutually_exclusive_group(required=True)
    wg.add_argument("--w", type=int)
    wg.add_argument("--omega", type=float)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--full", action="store_true", help="include the per-coordinate marginal table")

    sp = sub.add_parser("replay", help="re-run a manifest", description="re-run a manifest")
    sp.set_defaults(func=cmd_replay)
    sp.add_argument("manifest")
    sp.add_argument("--check", action="store_true", help="compare outputs with the recorded digests")
    sp.add_argument("--workers", type=int)
    return p


def _run(argv) -> Result:
    args = build_parser().parse_args(argv)
    return args.func(args)


def _manifest(argv, args, res: Result) -> dict:
    clean = list(argv)
    if "--manifest" in clean:
        i = clean.index("--manifest")
        del clean[i : i + 2]
    outputs = {path: _digest(text) for path, text in res.files.items()}
    if res.stdout:
        outputs[STDOUT] = _digest(res.stdout)
    resolved = {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}
    return {
        "verb": args.verb,
        "argv": clean,
        "args": resolved,
        "version": __version__,
        "seed": res.seed,
        "inputs": {p: _digest(Path(p).read_bytes()) for p in res.inputs},
        "outputs": outputs,
    }


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        res = args.func(args)
    except UsageError as exc:
        print(f"twolevel {args.verb}: error: {exc}", file=sys.stderr)
        return 2
    for path, text in res.files.items():
        Path(path).write_text(text)
    if res.stdout:
        sys.stdout.write(res.stdout)
    if args.verb != "replay":
        man_path = args.manifest or (getattr(args, "out", None) and f"{args.out}.manifest.json")
        if man_path:
            Path(man_path).write_text(_json(_manifest(argv, args, res)))
    return res.code


if __name__ == "__main__":
    sys.exit(main())
