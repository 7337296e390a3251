"""Command-line front end.

Every run writes one record per experiment cell, either as JSON lines or as
CSV, and is a pure function of its flags, input file and seed.  Failures
produce a single error record and a nonzero exit status specific to the
error class.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import unitary_group

from . import __version__
from .errors import ConfigError, InputParseError, LabError
from .fracpow import (
    frac_power_eig,
    frac_power_iterate,
    frac_power_pe,
    rotation_generator,
)
from .grover import (
    SEARCH_METHODS,
    classical_scan,
    grover_standard,
    make_instance,
    random_instance,
    scaling_study,
    search_lcu,
)
from .lcu import METHODS as LCU_COMBINE_METHODS
from .lcu import (
    coefficient_profile,
    combine2_hadamard,
    combine2_rotation,
    combine_multi_v1,
    combine_multi_v2,
    combine_recursive,
    random_real_states,
    table1_bench,
)
from .prep import (
    PREP_METHODS,
    ClassicalVector,
    bin_count,
    log_uniform_vector,
    prep_thm2,
    prepare,
    spike_vector,
)
from .qcore import DenseOp, RandomSource, measure

LEDGER_COLUMNS = ("oracle_queries", "input_preps", "elementary_ops", "estimator_samples")
COMMANDS = ("lcu", "fracpow", "grover", "prep", "bench")
MAX_SEED = 2**64 - 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# input files


_NUMBER = re.compile(r"\S+")


def _parse_float(token: str, line: int, position: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise InputParseError(f"not a number: {token!r}", line=line, position=position) from None
    if not math.isfinite(value):
        raise InputParseError(f"non-finite value {token!r}", line=line, position=position)
    return value


def parse_vector(path) -> ClassicalVector:
    """Read a JSON number array or whitespace-separated decimals."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputParseError(f"cannot read {path}: {exc.strerror}") from None
    if text.lstrip().startswith("["):
        try:
            data = json.loads(text, parse_constant=lambda c: c)
        except json.JSONDecodeError as exc:
            raise InputParseError(f"malformed array: {exc.msg}", line=exc.lineno, position=exc.colno) from None
        if not isinstance(data, list):
            raise InputParseError("expected a flat array of numbers", line=1, position=1)
        values = []
        for i, item in enumerate(data):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise InputParseError(f"entry {i} is not a finite number: {item!r}", line=None, position=i)
            if not math.isfinite(item):
                raise InputParseError(f"entry {i} is not finite", line=None, position=i)
            values.append(float(item))
    else:
        values = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            for m in _NUMBER.finditer(line):
                values.append(_parse_float(m.group(), lineno, m.start() + 1))
    if not values:
        raise InputParseError("no numbers found", line=1, position=1)
    try:
        return ClassicalVector(values)
    except LabError as exc:
        raise InputParseError(str(exc)) from None


# ---------------------------------------------------------------------------
# argument handling


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--eps", type=float, default=None, help="precision target")
    common.add_argument("--bits", type=int, default=None, help="phase-estimation bits")
    common.add_argument("--shots", type=int, default=None, help="measurement shots for a histogram")
    common.add_argument("--method", default=None)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--cost-model", choices=("sampling", "paper"), default="sampling")
    common.add_argument("--out", default=None, help="write records here instead of stdout")
    common.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identical output)")

    parser = _Parser(prog="lculab", description="Linear combination of quantum states: simulations and benchmarks")
    parser.add_argument("--version", action="version", version=f"lculab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lcu", parents=[common], help="combine random states")
    p.add_argument("--m", type=int, default=2, help="number of states")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--coeffs", type=_float_list, default=None, help="comma-separated weights (default all 1)")
    p.add_argument("--orthonormal", action="store_true")
    p.add_argument("--amplify", action="store_true")
    p.add_argument("--angles", choices=("exact", "estimated"), default="exact")
    p.add_argument("--variant", choices=("eig", "pe", "iterate"), default="pe", help="rotation route inside the recursive tree")

    p = sub.add_parser("fracpow", parents=[common], help="fractional powers of a random unitary")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--t", type=float, default=0.25)

    p = sub.add_parser("grover", parents=[common], help="search one instance")
    p.add_argument("--n", type=int, default=1024, help="search-space size N")
    p.add_argument("--marked", type=_int_list, default=None, help="marked items (default: one, drawn from the seed)")

    p = sub.add_parser("prep", parents=[common], help="prepare a classical vector")
    p.add_argument("--file", default=None, help="vector file (JSON array or plain text)")
    p.add_argument("--n", type=int, default=64, help="length of a random vector when no file is given")
    p.add_argument("--kappa", type=float, default=16.0, help="uniformity ratio of a random vector")
    p.add_argument("--variant", choices=("eig", "pe", "iterate"), default="pe")
    p.add_argument("--amplify", action="store_true")

    p = sub.add_parser("bench", parents=[common], help="benchmark grids")
    p.add_argument("suite", choices=("table1", "grover", "prep"))
    p.add_argument("--m", type=_int_list, default=[2, 4, 8])
    p.add_argument("--profiles", type=_str_list, default=["uniform", "ratio:1e6", "random"])
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--orthonormal", action="store_true")
    p.add_argument("--ns", type=_int_list, default=[16, 64, 256, 1024, 4096])
    p.add_argument("--seeds", type=int, default=4, help="seeds per cell")
    p.add_argument("--kappas", type=_float_list, default=[2.0, 32.0, 1024.0, 32768.0])
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--profile", choices=("spike", "random"), default="spike")
    p.add_argument("--amplify", action="store_true")
    return parser


_DEFAULT_METHOD = {"lcu": "multi-v2", "fracpow": "eig", "grover": "standard", "prep": "thm2", "bench": None}
_METHOD_CHOICES = {
    "lcu": LCU_COMBINE_METHODS,
    "fracpow": ("eig", "pe", "iterate"),
    "grover": SEARCH_METHODS,
    "prep": PREP_METHODS,
}


def validate(args) -> None:
    """Check every numeric parameter before any simulation starts."""
    if not 0 <= args.seed <= MAX_SEED:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    if args.eps is not None and not 0.0 < args.eps < 1.0:
        raise ConfigError("--eps must lie in (0, 1)")
    if args.bits is not None and not 1 <= args.bits <= 20:
        raise ConfigError("--bits must lie in [1, 20]")
    if args.shots is not None and args.shots < 1:
        raise ConfigError("--shots must be at least 1")
    cmd = args.command
    if args.method is None:
        args.method = _DEFAULT_METHOD[cmd]
    if cmd == "bench":
        if args.method is not None and args.suite != "grover" and args.method not in PREP_METHODS + LCU_COMBINE_METHODS:
            raise ConfigError(f"unknown method {args.method!r}")
    elif args.method not in _METHOD_CHOICES[cmd]:
        raise ConfigError(f"--method for {cmd} must be one of {', '.join(_METHOD_CHOICES[cmd])}")

    if cmd == "lcu":
        if args.m < 2:
            raise ConfigError("--m must be at least 2")
        if args.dim < 2:
            raise ConfigError("--dim must be at least 2")
        if args.orthonormal and args.m > args.dim:
            raise ConfigError("--orthonormal needs m <= dim")
        if args.coeffs is not None and len(args.coeffs) != args.m:
            raise ConfigError("--coeffs must list exactly m weights")
        if args.coeffs is not None and not all(math.isfinite(c) for c in args.coeffs):
            raise ConfigError("--coeffs must be finite")
        two_state = args.method == "hadamard" or args.method.startswith("rotation-")
        if two_state and args.m != 2:
            raise ConfigError(f"{args.method} combines exactly two states")
        if args.eps is not None and args.method == "recursive" and args.eps >= 0.5:
            raise ConfigError("--eps for the recursive method must lie in (0, 1/2)")
    elif cmd == "fracpow":
        if args.dim < 2:
            raise ConfigError("--dim must be at least 2")
        if not 0.0 < args.t < 1.0:
            raise ConfigError("--t must lie in (0, 1)")
    elif cmd == "grover":
        if args.n < 2:
            raise ConfigError("--n must be at least 2")
        if args.marked is not None and any(not 0 <= k < args.n for k in args.marked):
            raise ConfigError("--marked indices must lie in [0, N)")
    elif cmd == "prep":
        if args.file is None and (args.n < 1 or args.kappa < 1.0 or not math.isfinite(args.kappa)):
            raise ConfigError("--n must be positive and --kappa at least 1")
    elif cmd == "bench":
        if args.seeds < 1:
            raise ConfigError("--seeds must be at least 1")
        if args.suite == "grover":
            if len(args.ns) < 4 or any(n < 2 or n & (n - 1) for n in args.ns):
                raise ConfigError("--ns needs at least four powers of two")
            if args.method is not None and args.method not in SEARCH_METHODS:
                raise ConfigError(f"unknown search method {args.method!r}")
        if args.suite == "table1":
            if any(m < 2 for m in args.m):
                raise ConfigError("--m values must be at least 2")
            for prof in args.profiles:
                try:
                    coefficient_profile(prof, 2, 0)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
        if args.suite == "prep" and (args.n < 2 or any(k < 1 for k in args.kappas)):
            raise ConfigError("--n must be at least 2 and --kappas at least 1")


def config_echo(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "format", "timing")}
    return cfg


# ---------------------------------------------------------------------------
# commands


def _record(command, args, ledger, metrics, cell=None):
    rec = {"command": command, "config": config_echo(args), "ledger": ledger, "metrics": metrics, "version": __version__}
    if cell is not None:
        rec["cell"] = cell
    return rec


def _histogram(state, shots, rng):
    return {str(k): v for k, v in sorted(measure(state, shots, rng).items())}


def run_lcu(args, rng: RandomSource) -> list[dict]:
    m = args.m
    states = random_real_states(m, args.dim, rng.child(0), args.orthonormal)
    coeffs = args.coeffs if args.coeffs is not None else [1.0] * m
    eps = args.eps if args.eps is not None else 0.01
    run_rng = rng.child(1)
    method = args.method
    if method == "hadamard":
        if coeffs[0] != coeffs[1]:
            raise ConfigError("the Hadamard method needs equal weights")
        a, b = (s if c >= 0 else -s for s, c in zip(states, coeffs))
        rep = combine2_hadamard(a, b, run_rng, args.amplify)
    elif method.startswith("rotation-"):
        rep = combine2_rotation(
            states[0], states[1], coeffs[0], coeffs[1], eps, method.split("-", 1)[1], run_rng,
            angles=args.angles, bits=args.bits, cost_model=args.cost_model,
        )
    elif method == "multi-v1":
        rep = combine_multi_v1(states, coeffs, run_rng, args.amplify)
    elif method == "multi-v2":
        rep = combine_multi_v2(states, coeffs, run_rng, args.amplify)
    else:
        rep = combine_recursive(states, coeffs, eps, args.variant, run_rng, angles=args.angles, cost_model=args.cost_model)
    metrics = {
        "fidelity": rep.target_fidelity,
        "success_prob": rep.success_probability,
        "expected_attempts": rep.expected_attempts,
        "attempts": rep.attempts,
        "rounds": rep.rounds,
        "details": rep.details,
    }
    if rep.tree_trace:
        metrics["tree_trace"] = rep.tree_trace
    if args.shots:
        metrics["histogram"] = _histogram(rep.output, args.shots, rng.child(2))
    return [_record("lcu", args, rep.ledger.as_dict(), metrics)]


def run_fracpow(args, rng: RandomSource) -> list[dict]:
    t = args.t
    eps = args.eps if args.eps is not None else 0.01
    if args.method == "iterate":
        gen = rng.child(0).generator
        a, b = (ClassicalVector(gen.normal(size=args.dim)).state() for _ in range(2))
        spec = rotation_generator(a, b)
        tol = math.asin(math.sqrt(eps))
        k, err = frac_power_iterate(spec, t, tol, max(64, math.ceil(8 * math.pi / tol)))
        metrics = {"k": k, "angle_error": err, "tolerance": tol, "rotation_angle": spec.angle}
        return [_record("fracpow", args, {c: 0 for c in LEDGER_COLUMNS}, metrics)]
    U = DenseOp(unitary_group.rvs(args.dim, random_state=rng.child(0).generator))
    exact = frac_power_eig(U, t)
    if args.method == "eig":
        V = frac_power_eig(U, t, eps)
        metrics = {"error_vs_exact": 0.0}
        q = round(1.0 / t)
        if abs(q * t - 1.0) < 1e-12:
            metrics["roundtrip_error"] = float(np.linalg.norm(np.linalg.matrix_power(V.matrix, q) - U.matrix, 2))
    else:
        bits = args.bits if args.bits is not None else 8
        V = frac_power_pe(U, t, bits)
        metrics = {
            "bits": bits,
            "error_vs_exact": float(np.linalg.norm(V.matrix - exact.matrix, 2)),
            "error_bound": 2 * math.pi * t / 2**bits,
        }
    metrics["unitarity_error"] = V.unitarity_error()
    return [_record("fracpow", args, V.cost.as_dict(), metrics)]


def run_grover(args, rng: RandomSource) -> list[dict]:
    if args.marked is not None:
        inst = make_instance(args.n, args.marked)
    else:
        inst = random_instance(args.n, rng.child(0))
    if args.method == "standard":
        res = grover_standard(inst, rng.child(1))
    elif args.method == "classical":
        res = classical_scan(inst, rng.child(1))
    else:
        res = search_lcu(inst, args.method, rng.child(1), **({"guard_bits": args.bits} if args.bits else {}))
    metrics = {
        "marked": sorted(inst.marked),
        "found": res.found,
        "success": res.success,
        "queries": res.queries,
        "iterations": res.iterations,
        "success_probability": res.success_probability,
        "details": res.details,
    }
    return [_record("grover", args, res.ledger.as_dict(), metrics)]


def run_prep(args, rng: RandomSource) -> list[dict]:
    if args.file is not None:
        v = parse_vector(args.file)
    else:
        v = ClassicalVector(log_uniform_vector(args.n, args.kappa, rng.child(0)))
    eps = args.eps if args.eps is not None else 0.01
    if args.method == "thm2":
        rep = prep_thm2(v, eps, args.variant, rng.child(1), angles="exact")
    else:
        rep = prepare(v, args.method, rng.child(1), eps, args.variant, args.amplify)
    metrics = {
        "n": v.n,
        "kappa": v.kappa,
        "q": bin_count(v.max_abs, v.min_abs_nonzero),
        "fidelity": rep.target_fidelity,
        "success_prob": rep.success_probability,
        "expected_attempts": rep.expected_attempts,
        "attempts": rep.attempts,
        "rounds": rep.rounds,
    }
    if "bound_check" in rep.details:
        for key in ("bound_check", "bound_ratio", "bound_limit", "bound_tight", "kappa_z"):
            metrics[key] = rep.details[key]
    return [_record("prep", args, rep.ledger.as_dict(), metrics)]


def _bench_cells(args) -> list[tuple[str, object]]:
    if args.suite == "table1":
        return [
            (f"m={m:04d}/profile={p}", {"m": m, "profile": p, "dim": max(args.dim, m), "orthonormal": args.orthonormal})
            for m in args.m
            for p in args.profiles
        ]
    if args.suite == "grover":
        methods = [args.method] if args.method else list(SEARCH_METHODS)
        return [(f"method={m}", m) for m in methods]
    methods = [args.method] if args.method else list(PREP_METHODS)
    return [(f"kappa={k:012.1f}/method={m}", (k, m)) for k in args.kappas for m in methods]


def _run_cell(args, index, key, cell):
    rng = RandomSource(args.seed).child(index)
    eps = args.eps if args.eps is not None else 0.01
    if args.suite == "table1":
        rows = table1_bench([cell], epsilon=eps, seed=rng)
        out = []
        for row in rows:
            ledger = row.pop("ledger", {c: 0 for c in LEDGER_COLUMNS})
            row["instance"] = row.pop("cell")
            out.append(_record("bench", args, ledger, row, cell=f"{key}/method={row['method']}"))
        return out
    if args.suite == "grover":
        seeds = [int(rng.child(s).generator.integers(0, 2**32)) for s in range(args.seeds)]
        if cell == "classical":
            seeds = seeds * max(1, 32 // len(seeds))
        fit = scaling_study(cell, args.ns, seeds)
        return [_record("bench", args, {c: 0 for c in LEDGER_COLUMNS}, fit, cell=key)]
    kappa, method = cell
    x = spike_vector(args.n, kappa) if args.profile == "spike" else log_uniform_vector(args.n, kappa, rng.child(0))
    v = ClassicalVector(x)
    rep = prepare(v, method, rng.child(1), eps, use_amplification=args.amplify)
    metrics = {
        "kappa": v.kappa,
        "q": bin_count(v.max_abs, v.min_abs_nonzero),
        "method": method,
        "fidelity": rep.target_fidelity,
        "success_prob": rep.success_probability,
        "expected_attempts": rep.expected_attempts,
        "attempts": rep.attempts,
        "rounds": rep.rounds,
    }
    return [_record("bench", args, rep.ledger.as_dict(), metrics, cell=key)]


def run_bench(args, rng: RandomSource) -> list[dict]:
    cells = _bench_cells(args)
    threads = _thread_cap()
    jobs = [(args, i, key, cell) for i, (key, cell) in enumerate(cells)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: _run_cell(*j), jobs))
    else:
        results = [_run_cell(*j) for j in jobs]
    records = [r for rs in results for r in rs]
    return sorted(records, key=lambda r: r["cell"])


def _thread_cap() -> int:
    raw = os.environ.get("LCULAB_THREADS")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("LCULAB_THREADS must be a positive integer") from None
    if n < 1:
        raise ConfigError("LCULAB_THREADS must be a positive integer")
    return n


RUNNERS = {"lcu": run_lcu, "fracpow": run_fracpow, "grover": run_grover, "prep": run_prep, "bench": run_bench}


# ---------------------------------------------------------------------------
# output


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def format_records(records, fmt: str) -> str:
    records = [_plain(r) for r in records]
    if fmt == "json":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    metric_keys = sorted(
        {
            k
            for r in records
            for k, v in r.get("metrics", {}).items()
            if not isinstance(v, (dict, list)) and k not in ("cell", "method")
        }
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["command", "cell", "method", *LEDGER_COLUMNS, *metric_keys, "wall_time_s", "version"])
    for r in records:
        writer.writerow(
            [
                r["command"],
                r.get("cell", ""),
                r["config"].get("method") or r["metrics"].get("method", ""),
                *(r["ledger"].get(c, 0) for c in LEDGER_COLUMNS),
                *(r["metrics"].get(k, "") for k in metric_keys),
                "" if r.get("wall_time_s") is None else r["wall_time_s"],
                r["version"],
            ]
        )
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def run(argv=None) -> int:
    args = None
    try:
        args = build_parser().parse_args(argv)
        validate(args)
        start = time.perf_counter()
        records = RUNNERS[args.command](args, RandomSource(args.seed))
        elapsed = time.perf_counter() - start if args.timing else None
        for r in records:
            r["wall_time_s"] = elapsed
        _emit(format_records(records, args.format), args.out)
        return 0
    except LabError as exc:
        err = exc.payload()
        err.update(command=getattr(args, "command", None), exit_code=exc.exit_code, version=__version__)
        sys.stdout.write(json.dumps(_plain(err), sort_keys=True) + "\n")
        return exc.exit_code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
