"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) or through pytest.  The
last criterion-8 point is the expensive one (~10 minutes on one core).
"""
from __future__ import annotations

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from omtsp.adversaries import (
    adversary_plan,
    comb_instance,
    comb_stream,
    far_point_probability,
    oblivious_random_adversary,
    random_stream,
    rng_for,
    trial_seed,
    validate_comb,
)
from omtsp.arrays import cost, gaps
from omtsp.harness import _random_matrix, random_small_instance
from omtsp.metric import REL_TOL, euclidean_space, validate_matrix_metric
from omtsp.nets import Net, increase_net, net_size_slack, slack_ok, verify_net
from omtsp.oracles import brute_force_opt, exact_opt, mst_weight, sandwich_holds
from omtsp.placers import FillMostBlocks, Leftmost, RecursiveFillMostBlocks, doubling_holds

SHARP = 15 * (2 + math.sqrt(2))
MASTER = 20240611


def _line(tag: str, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} {tag}: {detail}"


@pytest.fixture
def say(capsys):
    def emit(tag, ok, detail):
        with capsys.disabled():
            print("\n" + _line(tag, ok, detail), flush=True)
        return ok

    return emit


def _le(value, bound):
    return value <= bound + REL_TOL * abs(bound)


def _small_matrix_ok(inst):
    spec = inst.space.to_json()
    return "matrix" not in spec or validate_matrix_metric(spec["matrix"]).ok


# -- criterion 1 ---------------------------------------------------------------


def test_criterion_1_sandwich(say):
    rng = rng_for(MASTER + 1)
    started, bad, kinds = time.perf_counter(), [], set()
    for t in range(1000):
        seed = int(rng.integers(0, 2**32))
        r = rng_for(seed)
        inst = random_small_instance(r, int(r.integers(1, 11)))
        kinds.add(inst.space.kind)
        assert _small_matrix_ok(inst)
        mst, opt = mst_weight(inst.space, inst.order), exact_opt(inst.space, inst.order)
        if not sandwich_holds(mst, opt):
            bad.append((seed, mst, opt))
    elapsed = time.perf_counter() - started
    ok = not bad and kinds == {"euclidean", "uniform", "matrix"} and elapsed < 10
    say("criterion 1 (MST <= OPT <= 2 MST, 1000 instances)", ok, f"violations={len(bad)} kinds={sorted(kinds)} {elapsed:.1f}s")
    assert ok, bad[:3]


# -- criterion 2 ---------------------------------------------------------------


def test_criterion_2_held_karp_vs_brute_force(say):
    rng = rng_for(MASTER + 2)
    started, worst, bad = time.perf_counter(), 0.0, []
    for t in range(500):
        seed = int(rng.integers(0, 2**32))
        r = rng_for(seed)
        inst = random_small_instance(r, int(r.integers(1, 9)))
        hk, bf = exact_opt(inst.space, inst.order), brute_force_opt(inst.space, inst.order)
        rel = abs(hk - bf) / max(hk, bf) if max(hk, bf) > 0 else 0.0
        worst = max(worst, rel)
        if rel > 1e-12:
            bad.append((seed, hk, bf))
    elapsed = time.perf_counter() - started
    ok = not bad and elapsed < 10
    say("criterion 2 (Held-Karp == brute force, 500 instances)", ok, f"max rel diff={worst:.2e} {elapsed:.1f}s")
    assert ok, bad[:3]


# -- criterion 3 ---------------------------------------------------------------


def _net_stream(r: np.random.Generator):
    n = int(np.exp(r.uniform(0, math.log(2000))))
    n = min(max(n, 1), 2000)
    kind = int(r.integers(0, 6))
    seed = int(r.integers(0, 2**32))
    if kind <= 2:
        return random_stream("euclidean", n, seed, dim=kind + 1), 1.0
    if kind == 3:
        return random_stream("uniform", n, seed, k=int(r.integers(1, n + 1))), 1.0
    if kind == 4:
        return _random_matrix(n, seed, k=int(r.integers(1, 31))), 4.0
    return oblivious_random_adversary(n, seed), 1.0


def _checkpoint(i: int) -> bool:
    return i < 64 or (i & (i - 1)) == 0


def test_criterion_3_net_laws(say):
    rng = rng_for(MASTER + 3)
    started, bad, full_checks, worst_slack = time.perf_counter(), [], 0, math.inf
    biggest = 0
    for t in range(500):
        inst, scale = _net_stream(rng)
        space, X = inst.space, inst.order
        biggest = max(biggest, len(X))
        radius = 0.0 if rng.random() < 0.2 else float(rng.exponential(0.4 * scale))
        net, thr = Net(radius, []), space.threshold(radius)
        for i, x in enumerate(X, 1):
            before = list(net.centers)
            inserted = increase_net(net, x, space)
            # the new point is covered, and a new center packs against the old ones
            d = space.distances_from(x, before) if before else np.empty(0)
            if inserted:
                step_ok = net.centers == before + [x] and bool(np.all(d > radius))
            else:
                step_ok = net.centers == before and bool(np.any(d <= thr))
            if step_ok and (_checkpoint(i) or i == len(X)):
                full_checks += 1
                step_ok = verify_net(net, X[:i], space)
            if not step_ok:
                bad.append((t, i, radius))
                break
        mst = mst_weight(space, X)
        slack = net_size_slack(net, X, space)
        worst_slack = min(worst_slack, slack / (2 * mst) if mst > 0 else slack)
        if not slack_ok(slack, mst):
            bad.append((t, "slack", slack, mst))
    elapsed = time.perf_counter() - started
    ok = not bad and elapsed < 60
    say(
        "criterion 3 (net laws, 500 streams)",
        ok,
        f"failures={len(bad)} full verify_net calls={full_checks} max n={biggest} "
        f"min slack/2MST={worst_slack:.3g} {elapsed:.1f}s",
    )
    assert ok, bad[:3]


# -- criteria 4-6 -------------------------------------------------------------


def _stream_for(gen: str, n: int, seed: int):
    if gen == "euclidean":
        return random_stream("euclidean", n, seed, dim=1 + seed % 3)
    if gen == "uniform":
        return random_stream("uniform", n, seed, k=max(1, int(rng_for(seed).integers(1, n + 2))))
    if gen == "matrix":
        return _random_matrix(n, seed, k=max(1, min(n // 2, 60)))
    if gen == "comb":
        return comb_stream(n, seed)
    return oblivious_random_adversary(n, seed)


@pytest.fixture(scope="module")
def half_runs():
    """Criterion-4 runs of the half algorithm; FMB states are kept for criterion 6."""
    started = time.perf_counter()
    rows, states = [], []
    gens = ["euclidean", "uniform", "matrix", "comb", "adversary"]
    for n in range(1, 15):
        for t in range(100):
            seed = trial_seed(MASTER + 4, n * 1000 + t)
            inst = _stream_for(gens[t % len(gens)], (n + 1) // 2, seed)
            p = FillMostBlocks(n, inst.space, check_doubling=False)
            p.run(inst.order)
            opt = exact_opt(inst.space, inst.order)
            c, g = cost(p.array, inst.space), gaps(p.array)
            rows.append((n, g, c, opt, "opt", seed))
            states.append(p.state)
    for n in (10**2, 10**3, 10**4):
        for t in range(20):
            seed = trial_seed(MASTER + 4, n + t)
            inst = _stream_for(gens[t % len(gens)], (n + 1) // 2, seed)
            p = FillMostBlocks(n, inst.space, check_doubling=False)
            p.run(inst.order)
            mst = mst_weight(inst.space, inst.order)
            c, g = cost(p.array, inst.space), gaps(p.array)
            rows.append((n, g, c, mst, "mst", seed))
            states.append(p.state)
    return rows, states, time.perf_counter() - started


@pytest.fixture(scope="module")
def full_runs():
    started = time.perf_counter()
    rows, states = [], []
    gens = ["euclidean", "uniform", "comb", "adversary"]
    for n in range(1, 15):
        for t in range(100):
            seed = trial_seed(MASTER + 5, n * 1000 + t)
            inst = _stream_for(gens[t % len(gens)], n, seed)
            p = RecursiveFillMostBlocks(n, inst.space, check_doubling=False)
            p.run(inst.order)
            rows.append((n, p.array.full, cost(p.array, inst.space), exact_opt(inst.space, inst.order), "opt", seed))
            states.extend(p.levels)
    for n, per_gen in ((10**2, 5), (10**3, 5), (10**4, 3), (10**5, 1)):
        for gen in gens:
            for t in range(per_gen):
                seed = trial_seed(MASTER + 5, n + t)
                inst = _stream_for(gen, n, seed)
                p = RecursiveFillMostBlocks(n, inst.space, check_doubling=False)
                p.run(inst.order)
                mst = mst_weight(inst.space, inst.order)
                rows.append((n, p.array.full, cost(p.array, inst.space), mst, "mst", seed))
                states.extend(p.levels)
    return rows, states, time.perf_counter() - started


def _exact_constant_inequality(limit: int) -> bool:
    """N2 + 4n/N1 + 2 N2 <= 11 sqrt(n), squared and cleared of denominators."""
    n = np.arange(1, limit + 1, dtype=np.int64)
    n1 = np.array([math.isqrt(int(v)) for v in n], dtype=np.int64)
    lhs = 6 * n1 * n1 + 4 * n  # N1 * (3 N2 + 4n/N1)
    return bool(np.all(lhs * lhs <= 121 * n1 * n1 * n))


def test_criterion_4_half_algorithm(say, half_runs):
    rows, _, elapsed = half_runs
    bad = []
    worst = 0.0
    for n, g, c, ref, which, seed in rows:
        factor = 11 if which == "opt" else 22
        bound = factor * math.sqrt(n) * ref
        worst = max(worst, c / (math.sqrt(n) * ref) if ref > 0 else 0.0)
        if g > 2 * math.sqrt(n) or not _le(c, bound) or (ref == 0 and c > 0):
            bad.append((n, seed, g, c, ref))
    constant_ok = _exact_constant_inequality(10**6)
    ok = not bad and constant_ok and elapsed < 120
    say(
        "criterion 4 (half algorithm: gaps <= 2 sqrt n, cost bounds, constant <= 11)",
        ok,
        f"runs={len(rows)} violations={len(bad)} max cost/(sqrt(n) ref)={worst:.3f} "
        f"constant ok={constant_ok} {elapsed:.1f}s",
    )
    assert ok, bad[:3]


def test_criterion_5_full_algorithm(say, full_runs):
    rows, _, elapsed = full_runs
    bad, worst_sharp, worst_mst = [], 0.0, 0.0
    for n, full, c, ref, which, seed in rows:
        root = math.sqrt(n)
        if which == "opt":
            ok_row = _le(c, 52 * root * ref) and _le(c, SHARP * root * ref)
            if ref > 0:
                worst_sharp = max(worst_sharp, c / (root * ref))
        else:
            ok_row = _le(c, 104 * root * ref)
            if ref > 0:
                worst_mst = max(worst_mst, c / (root * ref))
        if not full or not ok_row or (ref == 0 and c > 0):
            bad.append((n, seed, c, ref))
    ok = not bad and elapsed < 300
    say(
        "criterion 5 (full algorithm: 52 sqrt n OPT, 15(2+sqrt 2) sqrt n OPT, 104 sqrt n MST)",
        ok,
        f"runs={len(rows)} violations={len(bad)} max c/(sqrt(n) OPT)={worst_sharp:.3f} "
        f"max c/(sqrt(n) MST)={worst_mst:.3f} {elapsed:.1f}s",
    )
    assert ok, bad[:3]


def test_criterion_6_reset_doubling(say, half_runs, full_runs):
    events, bad = 0, []
    for state in half_runs[1] + full_runs[1]:
        prev = 0.0
        for ev in state.resets:
            events += 1
            if ev.previous_mst != prev or not doubling_holds(ev.mst, ev.previous_mst):
                bad.append(ev)
            prev = ev.mst
    ok = not bad and events > 0
    say("criterion 6 (reset MST doubling)", ok, f"reset events={events} violations={len(bad)}")
    assert ok, bad[:3]


# -- criterion 7 ---------------------------------------------------------------


def test_criterion_7_adversary_statistics(say):
    n, trials = 10**5, 10**4
    started = time.perf_counter()
    plans = [adversary_plan(n, trial_seed(MASTER + 7, t)) for t in range(trials)]
    hits = sum(p.x_served for p in plans)
    # the generated streams agree with their plans
    for t in range(0, trials, 100):
        inst = oblivious_random_adversary(n, trial_seed(MASTER + 7, t))
        assert inst.meta["x_served"] == plans[t].x_served
    p = far_point_probability(n)
    freq = hits / trials
    sigma = math.sqrt(p * (1 - p) / trials)
    elapsed = time.perf_counter() - started
    ok = abs(freq - p) <= 3 * sigma and freq <= 1e-2 + 3 * sigma and abs(p - 0.00996) < 5e-5 and elapsed < 60
    say(
        "criterion 7 (Pr[x served] at n=1e5, 1e4 seeds)",
        ok,
        f"hits={hits} freq={freq:.5f} closed form={p:.5f} sigma={sigma:.5f} {elapsed:.1f}s",
    )
    assert ok


# -- criterion 8 ---------------------------------------------------------------

SCALING_NS = (10**5, 10**6)
SCALING_SEEDS = 50
SCALING_MIN_EXPONENT = 0.85


def test_criterion_8_cost_growth(say):
    started = time.perf_counter()
    means = {"rfmb": [], "leftmost": []}
    opt_means = []
    for n in SCALING_NS:
        totals = {"rfmb": 0.0, "leftmost": 0.0}
        opt_total = 0.0
        for t in range(SCALING_SEEDS):
            inst = oblivious_random_adversary(n, trial_seed(MASTER + 8, t))
            u = inst.meta["u_size"]
            served_u = min(n, inst.meta["x_start"] if inst.meta["x_served"] else n)
            distinct_u = min(u, served_u)
            opt_total += max(distinct_u - 1, 0) + (u if inst.meta["x_served"] and distinct_u else 0)
            for name, cls in (("rfmb", RecursiveFillMostBlocks), ("leftmost", Leftmost)):
                placer = cls(n, inst.space)
                placer.run(inst.order)
                totals[name] += cost(placer.array, inst.space)
        for name in totals:
            means[name].append(totals[name] / SCALING_SEEDS)
        opt_means.append(opt_total / SCALING_SEEDS)
    decades = math.log10(SCALING_NS[1] / SCALING_NS[0])
    exps = {name: math.log10(m[1] / m[0]) / decades for name, m in means.items()}
    opt_exp = math.log10(opt_means[1] / opt_means[0]) / decades
    elapsed = time.perf_counter() - started
    ok = all(e >= SCALING_MIN_EXPONENT and e > opt_exp for e in exps.values()) and elapsed < 1800
    detail = " ".join(f"{k}: mean cost {m[0]:.0f} -> {m[1]:.0f}, exponent {exps[k]:.3f};" for k, m in means.items())
    say(
        f"criterion 8 (adversary cost growth, n in {SCALING_NS}, {SCALING_SEEDS} seeds)",
        ok,
        f"{detail} OPT exponent {opt_exp:.3f} {elapsed:.0f}s",
    )
    assert ok


# -- criterion 9 ---------------------------------------------------------------


def test_criterion_9_comb(say):
    started = time.perf_counter()
    valid = all(validate_comb(comb_instance(m)) for m in range(1, 65))
    exact_ell = True
    for m in range(1, 17):
        inst = comb_instance(m)
        pts = [inst.a0, inst.a1, *inst.X]
        # float oracle on the unit comb, and exactly on the comb scaled by m
        unit = exact_opt(inst.space, pts)
        scaled = euclidean_space([[float(inst.positions[p] * m)] for p in pts])
        exact_ell &= abs(unit - 1.0) <= 1e-12 and exact_opt(scaled, range(len(pts))) == m
    elapsed = time.perf_counter() - started
    ok = valid and exact_ell and elapsed < 5
    say("criterion 9 (comb configurations m=1..64, ell=1 for m<=16)", ok, f"valid={valid} ell=1: {exact_ell} {elapsed:.1f}s")
    assert ok


# -- criterion 10 --------------------------------------------------------------


def _cli(*args) -> bytes:
    return subprocess.run(
        [sys.executable, "-m", "omtsp.cli", *args], check=True, capture_output=True
    ).stdout


def test_criterion_10_determinism_and_online(say, tmp_path):
    started = time.perf_counter()
    argv = ["sweep", "--algorithm", "rfmb", "leftmost", "--n", "64", "500", "--trials", "3",
            "--generator", "adversary", "--seed", "9", "--no-time"]
    first, second = _cli(*argv), _cli(*argv)
    jsonl_same = first == second and len(first.splitlines()) == 12
    run_argv = ["run", "--algorithm", "rfmb", "--n", "300", "--generator", "uniform", "--seed", "4", "--no-time"]
    jsonl_same &= _cli(*run_argv) == _cli(*run_argv)

    rng = rng_for(MASTER + 10)
    mismatches = []
    for t in range(100):
        n = int(rng.integers(2, 600))
        i = int(rng.integers(0, n + 1))
        kind = t % 3
        total = i + 2 * (n - i)
        seed = int(rng.integers(0, 2**32))
        if kind == 0:
            space = random_stream("euclidean", total, seed, dim=2).space
        elif kind == 1:
            space = random_stream("uniform", total, seed, k=int(rng.integers(1, 40))).space
        else:
            space = _random_matrix(total, seed, k=12).space
        a = list(range(i)) + list(range(i, n))
        b = list(range(i)) + list(range(n, total))
        pa, pb = RecursiveFillMostBlocks(n, space), RecursiveFillMostBlocks(n, space)
        ia, ib = [pa.next(x) for x in a], [pb.next(x) for x in b]
        if ia[:i] != ib[:i]:
            mismatches.append((t, n, i))
    elapsed = time.perf_counter() - started
    ok = jsonl_same and not mismatches and elapsed < 30
    say(
        "criterion 10 (byte-identical JSONL; online prefix property, 100 pairs)",
        ok,
        f"jsonl identical={jsonl_same} prefix mismatches={len(mismatches)} {elapsed:.1f}s",
    )
    assert ok, mismatches[:3]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
