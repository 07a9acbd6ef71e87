#!/usr/bin/env python3
"""
Thin Sets CLI - every module behind one entry point.

Set specs come from a YAML/JSON config (see configs/); command parameters
come from flags. CSV is the canonical output (header row, LF endings);
--json switches a command to its JSON summary and --svg adds a line chart.

Exit codes: 0 ok, 2 config error, 3 assertion failure, 4 I/O error.

Usage:
    python thinsets_cli.py gen --config configs/nh15.yaml --N 20
    python thinsets_cli.py gen --config configs/pow105.yaml --N 1000000 --out b.csv
    python thinsets_cli.py count --config configs/pow105.yaml --t 1000,100000,1000000
    python thinsets_cli.py stats --config configs/pow105.yaml --N 1000000
    python thinsets_cli.py expsum scan --config configs/pow105.yaml --nmin 1024 --nmax 1048576 --out report.csv
    python thinsets_cli.py expsum sawtooth --config configs/pow125.yaml --lo 1 --hi 100000 --M 64
    python thinsets_cli.py kernels autocorr --config configs/pow102.yaml --N 65536 --out ac.csv
    python thinsets_cli.py kernels scan --config configs/pow102.yaml --kmin 8 --kmax 14
    python thinsets_cli.py ops maximal --config configs/pow125.yaml --f input.csv --plan dyadic --out m.csv
    python thinsets_cli.py ops oscillation --config configs/pow125.yaml --f input.csv --cuts 1,16,256,4096
    python thinsets_cli.py ops lambda --config configs/pow125.yaml --k 1000 --out lambda.csv
    python thinsets_cli.py czd decompose --f input.csv --alpha 0.25
    python thinsets_cli.py czd hypotheses --config configs/pow102.yaml --nmin 8 --nmax 14
    python thinsets_cli.py weaktype --config configs/pow102.yaml --trials 20 --horizon 1048576 --out wt.csv
    python thinsets_cli.py ergodic trace --config configs/pow105.yaml --theta sqrt2m1 --f "indicator:0,0.5" --N 1000000
    python thinsets_cli.py suite --quick
"""
import argparse
import sys
from typing import Any, Dict, List, Optional

import numpy as np

import report_io
from czd import cz_decompose, refine, threshold_scale, verify_absthm_hypotheses, weaktype_trials
from ergodic import RotationSystem, birkhoff_average, convergence_trace, parse_observable
from errors import EXIT_ASSERTION, EXIT_IO, EXIT_OK, ConfigError, ThinSetsError
from expsum import sawtooth_split, trest_scan, xi_grid
from kernels import autocorr_scan, gn_en_split
from operators import OPS, PLAN_KINDS, ScalePlan, lambda_weights, maximal, oscillation, sandwich_ratio
from run_config import DEFAULT_SEED, RunConfig, load_config
from run_criteria import CRITERIA_DIR, format_human_output, run_suite, summary_json
from signals import Signal
from thinset import count, enumerate_set, run_stats


def log(tag: str, message: str) -> None:
    print(f"[{tag}] {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _config(args) -> RunConfig:
    if not getattr(args, "config", None):
        raise ConfigError("--config: required for this command")
    return load_config(args.config)


def _horizon(args, cfg: RunConfig, fallback: Optional[int] = None) -> int:
    N = getattr(args, "N", None) or cfg.horizon or fallback
    if N is None:
        raise ConfigError("--N: required (the config sets no horizon)")
    return int(N)


def _thinset(args, cfg: RunConfig, N: int, tag: str):
    threads = args.threads or cfg.threads
    log(tag, f"enumerating B on [1, {N}] ({threads} thread(s))")
    ts = enumerate_set(cfg.spec, N, threads=threads)
    log(tag, f"|B_N| = {count(ts, N)}, high-precision points: {ts.hp_count}")
    return ts


def _signal(path: Optional[str]) -> Signal:
    """Signal from an (x, value) CSV; delta_0 when no file is given."""
    if not path:
        return Signal.delta(0)
    try:
        return Signal.from_csv_rows(report_io.read_signal_rows(path))
    except (ValueError, IndexError) as e:
        raise ConfigError(f"{path}: expected rows 'x,value' ({e})") from e


def _ints(text: str, flag: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"{flag}: expected comma-separated integers (got '{text}')") from e


def _dyadic_grid(nmin: int, nmax: int) -> List[int]:
    if nmin < 1 or nmax < nmin:
        raise ConfigError(f"--nmin/--nmax: need 1 <= nmin <= nmax (got {nmin}, {nmax})")
    grid = []
    N = nmin
    while N <= nmax:
        grid.append(N)
        N *= 2
    return grid


def _emit(args, rows: List[Dict[str, Any]], columns: List[str], summary: Dict[str, Any]) -> None:
    """CSV rows to --out (or stdout), or the JSON summary under --json."""
    if args.json:
        report_io.write_text(args.out, report_io.dumps_pretty(summary))
    else:
        report_io.write_csv(args.out, rows, columns)


def _svg(args, series, title: str, xlabel: str, ylabel: str, logx: bool = True, logy: bool = True) -> None:
    if getattr(args, "svg", None):
        report_io.write_text(args.svg, report_io.render_svg(series, title, xlabel, ylabel, logx, logy))


# ---------------------------------------------------------------------------
# thinset
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    cfg = _config(args)
    N = _horizon(args, cfg)
    ts = _thinset(args, cfg, N, "gen")
    if args.stats:
        report_io.write_text(args.out, report_io.dumps_pretty(run_stats(ts)))
        return EXIT_OK
    rows = ({"n": int(n), "block": int(m)} for n, m in zip(ts.elements, ts.labels))
    report_io.write_csv(args.out, rows, ["n", "block"])
    return EXIT_OK


def cmd_count(args) -> int:
    cfg = _config(args)
    ts_points = _ints(args.t, "--t")
    if not ts_points or min(ts_points) < 0:
        raise ConfigError("--t: need nonnegative scales")
    ts = _thinset(args, cfg, max(max(ts_points), 1), "count")
    rows = []
    for t in ts_points:
        c = count(ts, t)
        phi2 = float(ts.phi2(float(t))) if t > 0 else 0.0
        rows.append({"t": t, "count": c, "phi2": phi2, "ratio": c / phi2 if phi2 > 0 else None})
    _emit(args, rows, ["t", "count", "phi2", "ratio"], {"counts": rows})
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _config(args)
    ts = _thinset(args, cfg, _horizon(args, cfg), "stats")
    stats = run_stats(ts)
    stats["hp_points"] = ts.hp_count
    stats["identity_disagreements"] = ts.identity_disagreements
    stats["blocks_contiguous"] = ts.blocks_contiguous
    report_io.write_text(args.out, report_io.dumps_pretty(stats))
    return EXIT_OK


# ---------------------------------------------------------------------------
# expsum
# ---------------------------------------------------------------------------

def cmd_expsum_scan(args) -> int:
    cfg = _config(args)
    grid = _dyadic_grid(args.nmin, args.nmax)
    ts = _thinset(args, cfg, grid[-1], "expsum")
    xis = xi_grid(args.farey, args.multiples, args.vdc)
    log("expsum", f"{len(xis)} frequencies x {len(grid)} horizons")
    rep = trest_scan(ts, grid, xis)
    phi2 = np.atleast_1d(ts.phi2(np.asarray(grid, dtype=float)))
    for w in rep.warnings:
        log("expsum", f"warning: {w}")
    _emit(args, rep.rows(phi2), ["N", "xi", "abs_error", "normalized_error"], rep.summary())
    _svg(args, {"sup_error": list(zip(grid, rep.sup_error)), "median_error": list(zip(grid, rep.median_error))},
         "normalised exponential-sum error", "N", "error")
    return EXIT_OK


def cmd_expsum_sawtooth(args) -> int:
    cfg = _config(args)
    ts = _thinset(args, cfg, args.hi, "expsum")
    split = sawtooth_split(ts, (args.lo, args.hi), args.M)
    summary = {
        "M": split.M,
        "range": [args.lo, args.hi],
        "max_residual": split.max_residual,
        "max_imag": split.max_imag,
        "max_abs_pi": split.max_abs_pi,
        "pi_bounded": split.pi_bounded,
    }
    report_io.write_text(args.out, report_io.dumps_pretty(summary))
    return EXIT_OK


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def cmd_kernels_autocorr(args) -> int:
    cfg = _config(args)
    ts = _thinset(args, cfg, 4 * args.N, "kernels")
    rep = gn_en_split(ts, args.N, chi=args.chi)
    log("kernels", f"chi={rep.chi:.4f} ({rep.chi_source})")
    for w in rep.warnings:
        log("kernels", f"warning: {w}")
    rows = rep.rows()
    _emit(args, rows, ["x", "kk", "g", "e"], rep.summary())
    _svg(args, {"kk": [(r["x"], r["kk"]) for r in rows], "g": [(r["x"], r["g"]) for r in rows]},
         f"K_N * K~_N at N={args.N}", "x", "value", logx=False, logy=False)
    return EXIT_OK


def cmd_kernels_scan(args) -> int:
    cfg = _config(args)
    ts = _thinset(args, cfg, 4 << args.kmax, "kernels")
    scan = autocorr_scan(ts, range(args.kmin, args.kmax + 1), chi=args.chi)
    report_io.write_text(args.out, report_io.dumps_pretty(scan))
    _svg(args, {"E_max": [(r["N"], r["E_max"]) for r in scan["reports"]]}, "max |E_N| beyond phi1(N)", "N", "E_max")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ops
# ---------------------------------------------------------------------------

def _plan(args) -> ScalePlan:
    return ScalePlan(args.plan, tau=args.tau, t_max=args.tmax, p0=args.p0)


def cmd_ops_maximal(args) -> int:
    cfg = _config(args)
    ts = _thinset(args, cfg, _horizon(args, cfg), "ops")
    f = _signal(args.f)
    mf = maximal(ts, f, _plan(args), op=args.op)
    rows = [{"x": int(x), "value": float(v)} for x, v in zip(mf.xs, mf.values)]
    summary = {"op": args.op, "plan": args.plan, "norm_inf": mf.norm_inf(), "norm1": mf.norm1()}
    if args.sandwich:
        summary["sandwich"] = sandwich_ratio(ts, f)
    _emit(args, rows, ["x", "value"], summary)
    return EXIT_OK


def cmd_ops_oscillation(args) -> int:
    cfg = _config(args)
    ts = _thinset(args, cfg, _horizon(args, cfg), "ops")
    f = _signal(args.f)
    plan = _plan(args) if args.plan != "all_t" or args.tmax else None
    rep = oscillation(ts, f, _ints(args.cuts, "--cuts"), plan=plan, op=args.op,
                      t_end=args.t_end, with_variation=args.variation)
    xs = rep.values.xs
    rows = []
    for i, x in enumerate(xs):
        row = {"x": int(x), "O2": float(rep.values.values[i])}
        if rep.variation is not None:
            row["V2"] = float(rep.variation.value_at(np.array([x]))[0])
            row["l1"] = float(rep.l1_bound.value_at(np.array([x]))[0])
        rows.append(row)
    columns = ["x", "O2"] + (["V2", "l1"] if rep.variation is not None else [])
    _emit(args, rows, columns, rep.summary())
    return EXIT_OK


def cmd_ops_lambda(args) -> int:
    cfg = _config(args)
    ts = _thinset(args, cfg, args.k + 1, "ops")
    lam = lambda_weights(ts, args.k)
    rows = [{"s": s + 1, "lambda": float(v)} for s, v in enumerate(lam)]
    _emit(args, rows, ["s", "lambda"], {"k": args.k, "sum": float(np.sum(lam)), "support": int(np.count_nonzero(lam))})
    return EXIT_OK


# ---------------------------------------------------------------------------
# czd
# ---------------------------------------------------------------------------

def cmd_czd_decompose(args) -> int:
    f = _signal(args.f)
    dec = cz_decompose(f, args.alpha)
    summary = {
        "alpha": dec.alpha,
        "root": list(dec.root),
        "cubes": [list(c) for c in dec.cubes],
        "total_measure": dec.total_measure(),
        "g_norm1": dec.g.norm1(),
        "g_norm_inf": dec.g.norm_inf(),
    }
    if args.d_n is not None and args.D_n is not None:
        split = refine(dec, args.n, args.d_n, args.D_n)
        summary["refined"] = {
            "n": split.n,
            "s_n": threshold_scale(args.D_n),
            "reconstruction_error": split.reconstruction_error,
            "large_norm1": split.large.norm1(),
            "short_norm1": split.short.norm1(),
            "long_norm1": split.long.norm1(),
        }
    report_io.write_text(args.out, report_io.dumps_pretty(summary))
    return EXIT_OK


def cmd_czd_hypotheses(args) -> int:
    cfg = _config(args)
    ts = _thinset(args, cfg, 4 << args.nmax, "czd")
    harness = verify_absthm_hypotheses(ts, range(args.nmin, args.nmax + 1))
    for w in harness.warnings:
        log("czd", f"warning: {w}")
    report_io.write_text(args.out, report_io.dumps_pretty(harness.summary()))
    return EXIT_OK


def cmd_weaktype(args) -> int:
    cfg = _config(args)
    N = args.horizon or _horizon(args, cfg)
    ts = _thinset(args, cfg, N, "weaktype")
    seed = cfg.seed if args.seed is None else args.seed
    plan = ScalePlan("all_t", t_max=args.tmax)
    trials = weaktype_trials(ts, args.trials, seed, atoms=args.atoms, spread=args.spread, plan=plan)
    worst = max(t["exact_stat"] for t in trials)
    log("weaktype", f"max statistic {worst:.6g} over {len(trials)} trial(s)")
    _emit(args, trials, ["trial", "exact_stat", "norm1"], {"seed": seed, "max_stat": worst, "trials": trials})
    return EXIT_OK


# ---------------------------------------------------------------------------
# ergodic
# ---------------------------------------------------------------------------

def cmd_ergodic_trace(args) -> int:
    cfg = _config(args)
    N = _horizon(args, cfg)
    ts = _thinset(args, cfg, N, "ergodic")
    sys_ = RotationSystem((args.theta,), (parse_observable(args.f),))
    grid = sorted({int(v) for v in np.unique(np.geomspace(max(args.nstart, 1), N, args.points).astype(np.int64))})
    grid = [n for n in grid if count(ts, n) > 0]
    trace = convergence_trace(ts, sys_, args.x0, grid)
    summary = trace.summary()
    if args.birkhoff:
        summary["birkhoff"] = birkhoff_average(sys_, args.x0, N)
    for w in trace.warnings:
        log("ergodic", f"warning: {w}")
    _emit(args, trace.rows(), ["N", "average", "deviation"], summary)
    _svg(args, {"deviation": [(r["N"], r["deviation"]) for r in trace.rows() if r["deviation"]]},
         f"|average - {sys_.integral:g}|", "N", "deviation")
    return EXIT_OK


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------

def cmd_suite(args) -> int:
    summary = run_suite(
        args.criteria,
        seed=DEFAULT_SEED if args.seed is None else args.seed,
        threads=args.threads or 1,
        quick=args.quick,
        criterion_filter=set(args.criterion) if args.criterion else None,
        witness_filter=set(args.witness) if args.witness else None,
        verbose=args.verbose,
    )
    print(format_human_output(summary), file=sys.stderr)
    report_io.write_text(args.out, summary_json(summary))
    return EXIT_OK if summary["status"] == "GREEN" else EXIT_ASSERTION


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, config: bool = True, N: bool = True) -> None:
    if config:
        p.add_argument("--config", help="Set spec (YAML or JSON)")
    if N:
        p.add_argument("--N", type=int, help="Horizon (default: the config's horizon)")
    p.add_argument("--threads", type=int, help="Enumeration threads (default: the config's, else 1)")
    p.add_argument("--out", help="Output file (default: stdout)")
    p.add_argument("--json", action="store_true", help="Emit the JSON summary instead of CSV")


def _plan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--f", help="Input signal as an 'x,value' CSV (default: delta at 0)")
    p.add_argument("--plan", choices=PLAN_KINDS, default="all_t", help="Scale plan. Default: %(default)s")
    p.add_argument("--tau", type=float, help="tau for the tau_dyadic plan")
    p.add_argument("--tmax", type=int, help="Largest scale")
    p.add_argument("--p0", type=float, help="Exponent p0 bounding tau by (p0 - 1) / 2")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="Enumerate B on [1, N]")
    _common(p)
    p.add_argument("--stats", action="store_true", help="Emit run statistics as JSON")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("count", help="|B cap [1, t]| against phi2(t)")
    _common(p, N=False)
    p.add_argument("--t", required=True, help="Comma-separated scales")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("stats", help="Runs, blocks and gaps of B as JSON")
    _common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("expsum", help="Exponential sums over B")
    act = p.add_subparsers(dest="action", required=True)
    q = act.add_parser("scan", help="Sup-error scan over a frequency grid")
    _common(q, N=False)
    q.add_argument("--nmin", type=int, default=1024)
    q.add_argument("--nmax", type=int, default=1 << 20)
    q.add_argument("--farey", type=int, default=16, help="Farey order. Default: %(default)s")
    q.add_argument("--multiples", type=int, default=4, help="Multiples of each irrational. Default: %(default)s")
    q.add_argument("--vdc", type=int, default=64, help="van der Corput points. Default: %(default)s")
    q.add_argument("--svg", help="Also write a chart of the sup error")
    q.set_defaults(func=cmd_expsum_scan)
    q = act.add_parser("sawtooth", help="1_B = psi + Delta_M + Pi_M on a range")
    _common(q, N=False)
    q.add_argument("--lo", type=int, default=1)
    q.add_argument("--hi", type=int, required=True)
    q.add_argument("--M", type=int, default=64)
    q.set_defaults(func=cmd_expsum_sawtooth)

    p = sub.add_parser("kernels", help="Kernel autocorrelation")
    act = p.add_subparsers(dest="action", required=True)
    q = act.add_parser("autocorr", help="K_N * K~_N, G_N and E_N at one N")
    _common(q, N=False)
    q.add_argument("--N", type=int, required=True)
    q.add_argument("--chi", type=float,
                   help="Decay exponent used in E_bound (default: fitted exponential-sum decay of the set)")
    q.add_argument("--svg")
    q.set_defaults(func=cmd_kernels_autocorr)
    q = act.add_parser("scan", help="Autocorrelation metrics over N = 2^k")
    _common(q, N=False)
    q.add_argument("--kmin", type=int, default=8)
    q.add_argument("--kmax", type=int, default=14)
    q.add_argument("--chi", type=float, help="As for kernels autocorr")
    q.add_argument("--svg")
    q.set_defaults(func=cmd_kernels_scan)

    p = sub.add_parser("ops", help="Maximal functions, oscillation, lambda weights")
    act = p.add_subparsers(dest="action", required=True)
    q = act.add_parser("maximal", help="Pointwise maximal function of |f|")
    _common(q)
    _plan_args(q)
    q.add_argument("--op", choices=OPS, default="M")
    q.add_argument("--sandwich", action="store_true", help="Also report max M_B f / M^(sd) f")
    q.set_defaults(func=cmd_ops_maximal)
    q = act.add_parser("oscillation", help="2-oscillation over cut windows")
    _common(q)
    _plan_args(q)
    q.add_argument("--op", choices=("M", "A", "D", "H"), default="M")
    q.add_argument("--cuts", required=True, help="Comma-separated increasing cut points")
    q.add_argument("--t-end", type=int, help="Close the last window at this scale")
    q.add_argument("--variation", action="store_true", help="Also compute V^2 and the l1 bound")
    q.set_defaults(func=cmd_ops_oscillation)
    q = act.add_parser("lambda", help="Weights lambda_s^k writing D_k through H_s")
    _common(q, N=False)
    q.add_argument("--k", type=int, required=True)
    q.set_defaults(func=cmd_ops_lambda)

    p = sub.add_parser("czd", help="Calderon-Zygmund decomposition and kernel hypotheses")
    act = p.add_subparsers(dest="action", required=True)
    q = act.add_parser("decompose", help="CZ decomposition of f at level alpha")
    q.add_argument("--f", help="Input signal as an 'x,value' CSV (default: delta at 0)")
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--n", type=int, default=0)
    q.add_argument("--d-n", dest="d_n", type=float, help="Height factor of the refined split")
    q.add_argument("--D-n", dest="D_n", type=float, help="Scale threshold of the refined split")
    q.add_argument("--out")
    q.set_defaults(func=cmd_czd_decompose)
    q = act.add_parser("hypotheses", help="Kernel hypotheses at N = 2^n")
    _common(q, N=False)
    q.add_argument("--nmin", type=int, default=8)
    q.add_argument("--nmax", type=int, default=14)
    q.set_defaults(func=cmd_czd_hypotheses)

    for name, parent in (("weaktype", sub), ("weaktype", act)):
        q = parent.add_parser(name, help="Weak (1,1) statistic over random signed deltas")
        _common(q)
        q.add_argument("--horizon", type=int, help="Horizon (alias of --N)")
        q.add_argument("--trials", type=int, default=20)
        q.add_argument("--atoms", type=int, default=100)
        q.add_argument("--spread", type=int, default=4096)
        q.add_argument("--tmax", type=int)
        q.add_argument("--seed", type=int)
        q.set_defaults(func=cmd_weaktype)

    p = sub.add_parser("ergodic", help="Ergodic averages along B")
    act = p.add_subparsers(dest="action", required=True)
    q = act.add_parser("trace", help="Convergence trace on a rotation")
    _common(q)
    q.add_argument("--theta", default="sqrt2m1", help="sqrt2m1, golden or a float")
    q.add_argument("--f", default="indicator:0,0.5", help="indicator:a,b | cos | const:c")
    q.add_argument("--x0", type=float, default=0.0)
    q.add_argument("--nstart", type=int, default=1024)
    q.add_argument("--points", type=int, default=16)
    q.add_argument("--birkhoff", action="store_true", help="Also report the plain Birkhoff average")
    q.add_argument("--svg")
    q.set_defaults(func=cmd_ergodic_trace)

    p = sub.add_parser("suite", help="Run the acceptance criteria; JSON summary on stdout")
    p.add_argument("--criteria", default=CRITERIA_DIR, help="Criterion file or directory")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--criterion", action="append")
    p.add_argument("--witness", action="append")
    p.add_argument("--out", help="Write the JSON summary here instead of stdout")
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(func=cmd_suite)
    return ap


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_IO
    except ThinSetsError as e:
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
