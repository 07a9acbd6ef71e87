#!/usr/bin/env python3
"""
Checks behind the acceptance criteria in criteria/*.yaml.

Every check has the signature

    check(ctx: SuiteContext, params: dict, threshold) -> {"passed", "measured", "detail"}

`measured` must be JSON-native and deterministic for a given seed, since
the suite summary is digested byte for byte. Randomised checks draw from
ctx.rng(<check name>), which depends on the suite seed and the name only,
so filtering criteria does not change the draws of the ones that remain.
"""
from __future__ import annotations

import itertools
import math
import os
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Tuple

import numpy as np

from czd import cube_bounds, cz_decompose, random_deltas, refine, weaktype_scan
from ergodic import (
    Observable,
    RotationSystem,
    ShiftSystem,
    ergodic_average,
    multiparam_average,
)
from errors import IdentityViolation, InvalidParameter
from expsum import trest_scan, xi_grid
from kernels import autocorr_scan
from operators import (
    ScalePlan,
    apply_D,
    apply_M,
    dk_via_hk,
    integrate_H_over_Nk,
    lambda_weights,
    oscillation,
    rearrangement_Nk,
    variation2,
)
from regvar import block_construction_psi, invert, make_function
from report_io import digest
from run_config import load_config
from signals import Signal, max_deviation
from thinset import ThinSet, ThinSetSpec, count, enumerate_set, run_stats

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS_DIR = os.path.join(ROOT, "configs")

CheckResult = Dict[str, Any]


@dataclass
class SuiteContext:
    """Shared state of one suite run: seed, thread count, enumeration cache."""

    seed: int
    threads: int = 1
    quick: bool = False
    configs_dir: str = CONFIGS_DIR
    _specs: Dict[str, ThinSetSpec] = field(default_factory=dict, repr=False)
    _sets: Dict[Tuple[str, int], ThinSet] = field(default_factory=dict, repr=False)
    _memo: Dict[Any, Any] = field(default_factory=dict, repr=False)

    def spec(self, name: str) -> ThinSetSpec:
        if name not in self._specs:
            self._specs[name] = load_config(os.path.join(self.configs_dir, f"{name}.yaml")).spec
        return self._specs[name]

    def thinset(self, name: str, N: int) -> ThinSet:
        key = (name, int(N))
        if key not in self._sets:
            self._sets[key] = enumerate_set(self.spec(name), int(N), threads=self.threads)
        return self._sets[key]

    def rng(self, label: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(label.encode("utf-8"))])

    def memo(self, key: Any, build: Callable[[], Any]) -> Any:
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]


def result(passed: bool, measured: Any, detail: str = "") -> CheckResult:
    return {"passed": bool(passed), "measured": measured, "detail": detail}


def _random_signal(rng: np.random.Generator, support: int, spread: int, integer: bool = False) -> Signal:
    pos = rng.choice(spread, size=support, replace=False)
    if integer:
        vals = rng.integers(-5, 6, size=support).astype(float)
    else:
        vals = rng.normal(size=support)
    return Signal.from_points({int(p): float(v) for p, v in zip(pos, vals)})


# ---------------------------------------------------------------------------
# thin set
# ---------------------------------------------------------------------------

def check_dual_membership(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """Fractional-part test against the floor-difference identity, off the flagged points."""
    measured = {}
    for name in params["configs"]:
        ts = ctx.thinset(name, params["N"])
        measured[name] = {"disagreements": ts.identity_disagreements, "hp_points": ts.hp_count}
    total = sum(m["disagreements"] for m in measured.values())
    return result(total <= threshold, measured, f"{total} disagreement(s) up to N={params['N']}")


def check_nh_reduction(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """B_- on [lo, hi] against {floor(m^1.5)}, computed as isqrt(m^3)."""
    lo, hi = int(params["lo"]), int(params["hi"])
    ts = ctx.thinset(params["config"], hi)
    got = {int(n) for n in ts.elements if n >= lo}
    oracle = set()
    m = 1
    while True:
        v = math.isqrt(m ** 3)
        if v > hi:
            break
        if v >= lo:
            oracle.add(v)
        m += 1
    missing = sorted(oracle - got)
    extra = sorted(got - oracle)
    mismatches = len(missing) + len(extra)
    detail = f"missing={missing[:5]} extra={extra[:5]}" if mismatches else f"{len(oracle)} elements match"
    return result(mismatches <= threshold, {"mismatches": mismatches, "size": len(got)}, detail)


def check_counting_ratio(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    N = int(params["N"])
    ts = ctx.thinset(params["config"], N)
    ratio = count(ts, N) / float(ts.phi2(float(N)))
    lo, hi = threshold
    return result(lo <= ratio <= hi, {"ratio": ratio}, f"|B_N| / phi2(N) = {ratio:.6f} at N={N}")


def check_counting_trend(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """|ratio - 1| should shrink along the N grid; count the grid points where it grows."""
    grid = [1 << k for k in range(params["k_min"], params["k_max"] + 1)]
    ts = ctx.thinset(params["config"], grid[-1])
    ratios = [count(ts, N) / float(ts.phi2(float(N))) for N in grid]
    dev = [abs(r - 1.0) for r in ratios]
    violations = sum(1 for a, b in zip(dev, dev[1:]) if b > a)
    return result(violations <= threshold, {"ratios": ratios, "violations": violations},
                  f"{violations} violation(s) over {len(grid)} grid points")


def check_block_runs(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """Scaled-psi construction: long runs of consecutive integers appear."""
    inv = invert(make_function("pow", c=params["c"]))
    spec = ThinSetSpec(phi1=inv, phi2=inv, psi=block_construction_psi(inv, params["width"]), sign="plus")
    ts = enumerate_set(spec, int(params["N"]), threads=ctx.threads)
    max_run = run_stats(ts)["max_run"]
    return result(max_run >= threshold, {"max_run": max_run, "kappa": spec.psi.kappa},
                  f"max_run={max_run} on [1, {params['N']}]")


def check_bounded_runs(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    small = run_stats(ctx.thinset(params["config"], 1 << params["k_small"]))["max_run"]
    large = run_stats(ctx.thinset(params["config"], 1 << params["k_large"]))["max_run"]
    return result(large <= small + threshold, {"max_run_small": small, "max_run_large": large},
                  f"max_run 2^{params['k_small']}: {small}, 2^{params['k_large']}: {large}")


# ---------------------------------------------------------------------------
# exponential sums
# ---------------------------------------------------------------------------

def check_expsum_decay(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    grid = [1 << k for k in range(params["k_min"], params["k_max"] + 1)]
    ts = ctx.thinset(params["config"], grid[-1])
    xis = xi_grid(params["farey_order"], params["multiples"], params["vdc_points"])
    rep = trest_scan(ts, grid, xis)
    slope = rep.slope
    passed = slope is not None and slope <= threshold
    return result(passed, {"slope": slope, "sup_error": [float(v) for v in rep.sup_error]},
                  f"fitted slope {slope} over {len(xis)} frequencies")


def check_xi0_identity(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """At xi = 0 the normalised error is exactly |B_N - Psi(N)| / phi2(N)."""
    grid = [1 << k for k in range(params["k_min"], params["k_max"] + 1)]
    ts = ctx.thinset(params["config"], grid[-1])
    rep = trest_scan(ts, grid, [Fraction(0)])
    worst = 0.0
    for i, N in enumerate(grid):
        expected = abs(count(ts, N) - ts.Psi(N)) / float(ts.phi2(float(N)))
        worst = max(worst, abs(float(rep.sup_error[i]) - expected))
    return result(worst <= threshold, {"max_deviation": worst}, f"max deviation {worst:.3e}")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

AUTOCORR_METRICS = ("symmetric", "max_mass_error", "C_small_spread", "E_slope", "lipschitz_spread")


def check_autocorr(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """One metric of the autocorrelation scan; the scan itself is shared between witnesses."""
    metric = params["metric"]
    if metric not in AUTOCORR_METRICS:
        raise InvalidParameter(f"metric must be one of {AUTOCORR_METRICS} (got '{metric}')")
    k_min, k_max = params["k_min"], params["k_max"]
    name = params["config"]

    def build():
        ts = ctx.thinset(name, 4 << k_max)
        return autocorr_scan(ts, range(k_min, k_max + 1))

    scan = ctx.memo(("autocorr", name, k_min, k_max), build)
    value = scan[metric]
    if metric == "symmetric":
        passed = bool(value)
    else:
        passed = value is not None and value <= threshold
    return result(passed, {metric: value}, f"{metric}={value} for k in [{k_min}, {k_max}]")


# ---------------------------------------------------------------------------
# lambda weights
# ---------------------------------------------------------------------------

def check_lambda_partition(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    ts = ctx.thinset(params["config"], params["N"])
    worst = 0.0
    negatives = 0
    for k in params["ks"]:
        lam = lambda_weights(ts, k)
        worst = max(worst, abs(math.fsum(lam) - 1.0))
        negatives += int(np.count_nonzero(lam < 0))
    passed = worst <= threshold and negatives == 0
    return result(passed, {"max_sum_error": worst, "negatives": negatives},
                  f"max |sum - 1| = {worst:.3e}, {negatives} negative weight(s)")


def check_lambda_partial_monotone(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """sum_{s <= N} lambda_s^k does not increase with k."""
    ts = ctx.thinset(params["config"], params["N"])
    rng = ctx.rng("lambda_partial_monotone")
    k_max = int(params["k_max"])
    failures = []
    for _ in range(params["pairs"]):
        k = int(rng.integers(1, k_max))
        k2 = int(rng.integers(k + 1, k_max + 1))
        N = int(rng.integers(1, k2 + 1))
        a = math.fsum(lambda_weights(ts, k)[:N])
        b = math.fsum(lambda_weights(ts, k2)[:N])
        if b > a + threshold:
            failures.append([N, k, k2])
    return result(not failures, {"failures": len(failures)},
                  f"first failure (N, k, k'): {failures[0]}" if failures else "")


def check_dk_routes(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """D_k through sum lambda H_s and through int H_{N_k(t)} dt, both against direct D_k."""
    ts = ctx.thinset(params["config"], params["N"])
    rng = ctx.rng("dk_routes")
    worst = 0.0
    violations = 0
    for _ in range(params["signals"]):
        f = _random_signal(rng, int(params["support"]), int(params["spread"]))
        k = int(rng.integers(1, params["k_max"] + 1))
        direct = apply_D(ts, f, k)
        scale = max(f.norm_inf(), 1e-300)
        try:
            dk_via_hk(ts, f, k, tol=threshold)
        except IdentityViolation:
            violations += 1
        dev = max_deviation(integrate_H_over_Nk(f, rearrangement_Nk(ts, k)), direct) / scale
        worst = max(worst, dev)
        if dev > threshold:
            violations += 1
    return result(violations == 0, {"violations": violations, "max_rel_deviation_Nk": worst},
                  f"{violations} violation(s) over {params['signals']} signals")


# ---------------------------------------------------------------------------
# CZ decomposition and weak type
# ---------------------------------------------------------------------------

def check_cz_random(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """cz_decompose and refine assert their invariants; count the trials that raise."""
    rng = ctx.rng("cz_random")
    failures = []
    cubes = 0
    for i in range(params["trials"]):
        support = int(rng.integers(1, params["max_support"] + 1))
        f = _random_signal(rng, support, int(rng.integers(support, 4 * support + 1)))
        alpha = float(f.norm1() / max(f.size, 1) * np.exp(rng.normal(0.0, 1.5)))
        try:
            dec = cz_decompose(f, alpha)
            refine(dec, 0, float(rng.uniform(1.0, 8.0)), float(rng.uniform(1.0, 64.0)))
            cubes += len(dec.cubes)
        except IdentityViolation as e:
            failures.append(f"trial {i}: {e}")
    return result(len(failures) <= threshold, {"failures": len(failures), "cubes": cubes},
                  failures[0] if failures else f"{params['trials']} trials clean")


def check_cz_delta(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """delta_0 at alpha = 1/4 selects the single cube [0, 2) with g = 1/2 on it."""
    dec = cz_decompose(Signal.delta(0), 0.25)
    g = dec.g.to_dense(0, 1)
    b = dec.b.to_dense(0, 1)
    passed = dec.cubes == [(1, 0)] and list(g) == [0.5, 0.5] and list(b) == [0.5, -0.5]
    return result(passed, {"cubes": [list(c) for c in dec.cubes],
                           "bounds": [list(cube_bounds(c)) for c in dec.cubes]},
                  "" if passed else f"g={list(g)} b={list(b)}")


def check_weaktype_random(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    ts = ctx.thinset(params["config"], params["N"])
    rng = ctx.rng("weaktype_random")
    plan = ScalePlan("all_t", t_max=params.get("t_max"))
    stats = []
    for _ in range(params["trials"]):
        f = random_deltas(rng, params["atoms"], params["spread"])
        stats.append(weaktype_scan(ts, f, plan=plan)["exact_stat"])
    worst = max(stats)
    return result(worst <= threshold, {"max_stat": worst, "stats": stats},
                  f"max statistic {worst:.4f} over {len(stats)} trials")


def check_weaktype_invariance(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """Statistic unchanged (bit for bit) under f -> 2^j f and integer translation."""
    ts = ctx.thinset(params["config"], params["N"])
    rng = ctx.rng("weaktype_invariance")
    plan = ScalePlan("all_t", t_max=params.get("t_max"))
    broken = []
    for _ in range(params["trials"]):
        f = random_deltas(rng, params["atoms"], params["spread"])
        base = weaktype_scan(ts, f, plan=plan)["exact_stat"]
        for j in params["scale_exponents"]:
            if weaktype_scan(ts, f.scale(2.0 ** j), plan=plan)["exact_stat"] != base:
                broken.append(f"scale 2^{j}")
        shift = int(rng.integers(-10 ** 6, 10 ** 6))
        if weaktype_scan(ts, f.shift(shift), plan=plan)["exact_stat"] != base:
            broken.append(f"shift {shift}")
    return result(len(broken) <= threshold, {"broken": len(broken)}, ", ".join(broken[:5]))


# ---------------------------------------------------------------------------
# oscillation / variation
# ---------------------------------------------------------------------------

def check_oscillation_constant(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """O^2 vanishes wherever every window only sees the constant part of f."""
    ts = ctx.thinset(params["config"], params["N"])
    cuts = params["cuts"]
    t_end = params["t_end"]
    length = params["length"]
    f = Signal(0, np.ones(length))
    worst = {}
    for op in params["ops"]:
        rep = oscillation(ts, f, cuts, op=op, t_end=t_end)
        interior = np.arange(t_end, length + 1)
        worst[op] = float(np.max(rep.values.value_at(interior)))
    top = max(worst.values())
    return result(top <= threshold, worst, f"max O^2 on the interior {top:.3e}")


def check_oscillation_sandwich(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """O^2 <= V^2 <= l1 bound pointwise on random signals."""
    ts = ctx.thinset(params["config"], params["N"])
    rng = ctx.rng("oscillation_sandwich")
    violations = 0
    exact = 0
    for _ in range(params["signals"]):
        f = _random_signal(rng, params["support"], params["spread"])
        rep = oscillation(ts, f, params["cuts"], op="M", t_end=params["t_end"], with_variation=True)
        if not rep.variation_exact:
            continue
        exact += 1
        o2 = rep.values.values
        v2 = rep.variation.value_at(rep.values.xs)
        l1 = rep.l1_bound.value_at(rep.values.xs)
        slack = threshold * max(f.norm_inf(), 1.0)
        violations += int(np.count_nonzero(o2 > v2 + slack))
        violations += int(np.count_nonzero(v2 > l1 + slack))
    passed = violations == 0 and exact > 0
    return result(passed, {"violations": violations, "exact_runs": exact},
                  f"{violations} pointwise violation(s) in {exact} exact run(s)")


def _variation_brute(seq: np.ndarray) -> float:
    best = 0.0
    idx = range(seq.size)
    for r in range(2, seq.size + 1):
        for sub in itertools.combinations(idx, r):
            vals = seq[list(sub)]
            best = max(best, float(np.sum(np.diff(vals) ** 2)))
    return math.sqrt(best)


def check_variation_dp(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    rng = ctx.rng("variation_dp")
    worst = 0.0
    for _ in range(params["sequences"]):
        seq = rng.normal(size=params["length"])
        worst = max(worst, abs(variation2(seq)["value"] - _variation_brute(seq)))
    return result(worst <= threshold, {"max_deviation": worst},
                  f"max |DP - brute force| = {worst:.3e}")


# ---------------------------------------------------------------------------
# ergodic
# ---------------------------------------------------------------------------

def _observable(spec: Dict[str, Any]) -> Observable:
    return Observable(spec.get("kind", "indicator"), spec.get("a", 0.0), spec.get("b", 1.0))


def check_ergodic_rotation(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    N = int(params["N"])
    ts = ctx.thinset(params["config"], N)
    sys_ = RotationSystem((params["theta"],), (_observable(params["observable"]),))
    rng = ctx.rng("ergodic_rotation")
    starts = rng.uniform(0.0, 1.0, size=params["starts"])
    devs = [abs(ergodic_average(ts, sys_, float(x0), N) - sys_.integral) for x0 in starts]
    worst = max(devs)
    return result(worst <= threshold, {"max_deviation": worst},
                  f"max |average - {sys_.integral}| = {worst:.4f} over {len(devs)} starts")


def _rotation_2d(ctx: SuiteContext, params: Dict[str, Any]):
    sets = [ctx.thinset(name, params["N"]) for name in params["configs"]]
    sys_ = RotationSystem(tuple(params["thetas"]), tuple(_observable(o) for o in params["observables"]))
    return sets, sys_


def check_ergodic_2d(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    sets, sys_ = _rotation_2d(ctx, params)
    x0 = list(ctx.rng("ergodic_2d").uniform(0.0, 1.0, size=len(sets)))
    avg = multiparam_average(sets, sys_, x0, [params["N"]] * len(sets))
    dev = abs(avg - sys_.integral)
    return result(dev <= threshold, {"average": avg, "deviation": dev},
                  f"|average - {sys_.integral:.6f}| = {dev:.4f}")


def check_ergodic_factorization(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    sets, sys_ = _rotation_2d(ctx, params)
    x0 = list(ctx.rng("ergodic_factorization").uniform(0.0, 1.0, size=len(sets)))
    Ns = [params["N"]] * len(sets)
    a = multiparam_average(sets, sys_, x0, Ns, method="factorized")
    b = multiparam_average(sets, sys_, x0, Ns, method="direct")
    return result(abs(a - b) <= threshold, {"deviation": abs(a - b)}, f"|factorized - direct| = {abs(a - b):.3e}")


def check_transference(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """Shift-system ergodic average against apply_M, integer data so both are exact."""
    ts = ctx.thinset(params["config"], params["N"])
    rng = ctx.rng("transference")
    mismatches = []
    for _ in range(params["cases"]):
        f = _random_signal(rng, params["support"], params["spread"], integer=True)
        t = int(ts.elements[int(rng.integers(0, min(ts.elements.size, count(ts, params["t_max"]))))])
        x = int(rng.integers(f.offset, f.end + t))
        lhs = ergodic_average(ts, ShiftSystem(f), x, t)
        rhs = float(apply_M(ts, f, t).value_at(np.array([x]))[0])
        if lhs != rhs:
            mismatches.append([x, t, lhs, rhs])
    return result(len(mismatches) <= threshold, {"mismatches": len(mismatches)},
                  f"first mismatch (x, t, ergodic, M_t): {mismatches[0]}" if mismatches else "")


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------

def check_determinism(ctx: SuiteContext, params: Dict[str, Any], threshold) -> CheckResult:
    """Enumeration independent of the thread count; repeated scans digest identically."""
    spec = ctx.spec(params["config"])
    N = int(params["N"])
    single = enumerate_set(spec, N, threads=1)
    pooled = enumerate_set(spec, N, threads=max(2, params.get("threads", 4)))
    same_set = bool(np.array_equal(single.bitmap, pooled.bitmap)) and single.hp_points == pooled.hp_points

    grid = [1 << k for k in range(params["k_min"], params["k_max"] + 1)]
    xis = xi_grid(params["farey_order"], 1, 8)
    digests = {digest(trest_scan(ts, grid, xis).summary()) for ts in (single, pooled)}
    passed = same_set and len(digests) == 1
    return result(passed, {"same_set": same_set, "scan_digests": len(digests)},
                  "" if passed else "runs diverged")


CHECKS: Dict[str, Callable[[SuiteContext, Dict[str, Any], Any], CheckResult]] = {
    "dual_membership": check_dual_membership,
    "nh_reduction": check_nh_reduction,
    "counting_ratio": check_counting_ratio,
    "counting_trend": check_counting_trend,
    "block_runs": check_block_runs,
    "bounded_runs": check_bounded_runs,
    "expsum_decay": check_expsum_decay,
    "xi0_identity": check_xi0_identity,
    "autocorr": check_autocorr,
    "lambda_partition": check_lambda_partition,
    "lambda_partial_monotone": check_lambda_partial_monotone,
    "dk_routes": check_dk_routes,
    "cz_random": check_cz_random,
    "cz_delta": check_cz_delta,
    "weaktype_random": check_weaktype_random,
    "weaktype_invariance": check_weaktype_invariance,
    "oscillation_constant": check_oscillation_constant,
    "oscillation_sandwich": check_oscillation_sandwich,
    "variation_dp": check_variation_dp,
    "ergodic_rotation": check_ergodic_rotation,
    "ergodic_2d": check_ergodic_2d,
    "ergodic_factorization": check_ergodic_factorization,
    "transference": check_transference,
    "determinism": check_determinism,
}
