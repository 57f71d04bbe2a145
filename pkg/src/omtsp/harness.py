"""Experiment harness: single runs, sweeps, verification suites, plot data."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .adversaries import (
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
from .arrays import PlacementArray, cost, gaps
from .metric import EuclideanSpace, Instance, MatrixSpace, load_instance
from .nets import Net, increase_net, net_size_slack, slack_ok, verify_net
from .oracles import EXACT_CAP, exact_opt, mst_weight, opt_bounds, sandwich_holds, within_ratio
from .placers import PLACERS, doubling_holds, fill_most_blocks, make_placer, recursively_fill_most_blocks

SHARP_FULL_CONSTANT = 15 * (2 + math.sqrt(2))


class ConfigError(ValueError):
    pass


def _line_sorted(n, seed, **_):
    rng = rng_for(seed)
    coords = np.sort(rng.random(n))[:, None]
    return Instance(EuclideanSpace(coords), list(range(n)), {"generator": "line-sorted", "n": n, "seed": seed})


def _alternating(n, seed, D=1.0, **_):
    coords = np.where(np.arange(n) % 2 == 0, 0.0, float(D))[:, None]
    return Instance(EuclideanSpace(coords), list(range(n)), {"generator": "alternating", "n": n, "D": D})


def _random_matrix(n, seed, k=6, **_):
    """Shortest-path closure of random integer weights on ``k`` rows."""
    rng = rng_for(seed)
    w = rng.integers(1, 10, (k, k)).astype(float)
    w = np.minimum(w, w.T)
    np.fill_diagonal(w, 0.0)
    for mid in range(k):
        w = np.minimum(w, w[:, mid][:, None] + w[mid, :][None, :])
    rows = rng.integers(0, k, n)
    meta = {"generator": "matrix", "n": n, "seed": seed, "k": k}
    return Instance(MatrixSpace(w, rows), list(range(n)), meta)


GENERATORS = {
    "euclidean": lambda n, seed, dim=2, **_: random_stream("euclidean", n, seed, dim=int(dim)),
    "uniform": lambda n, seed, k=8, **_: random_stream("uniform", n, seed, k=int(k)),
    "matrix": _random_matrix,
    "adversary": lambda n, seed, **_: oblivious_random_adversary(n, seed),
    "comb": lambda n, seed, **_: comb_stream(n, seed),
    "line-sorted": _line_sorted,
    "alternating": _alternating,
    "file": lambda n, seed, path=None, **_: load_instance(path),
}


def generate(generator: str, n: int, seed: int, params: dict | None = None) -> Instance:
    if generator not in GENERATORS:
        raise ConfigError(f"unknown generator {generator!r}; choose from {sorted(GENERATORS)}")
    params = dict(params or {})
    if generator == "file":
        if "path" not in params:
            raise ConfigError("the file generator needs a path parameter")
        inst = GENERATORS["file"](n, seed, **params)
        if inst.n != n:
            raise ConfigError(f"instance streams {inst.n} points but n={n}")
        return inst
    if n < 1:
        raise ConfigError("generators need n >= 1")
    return GENERATORS[generator](n, seed, **params)


@dataclass
class RunConfig:
    algorithm: str
    generator: str
    n: int
    seed: int = 0
    params: dict = field(default_factory=dict)
    want_exact: bool = False
    out: str | None = None
    trials: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise ConfigError("n must be non-negative")
        if self.trials < 1:
            raise ConfigError("trial count must be at least 1")

    def echo(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "generator": self.generator,
            "n": self.n,
            "seed": self.seed,
            "params": dict(self.params),
            "want_exact": self.want_exact,
        }


@dataclass
class RunRecord:
    config: dict
    cost: float
    bounds: dict | None
    ratio_lower: float | None
    ratio_upper: float | None
    gap_trace: list
    resets: dict
    wall_time: float = 0.0

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time")
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True)


def _ratio(cost_value: float, reference: float) -> float:
    if reference > 0:
        return cost_value / reference
    return 1.0 if cost_value == 0 else math.inf


def run_instance(algorithm: str, inst: Instance, want_exact: bool = False, config: dict | None = None) -> RunRecord:
    """Feed ``inst`` to the named placer and measure it against the offline oracles."""
    n = inst.n
    if algorithm not in PLACERS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {sorted(PLACERS)}")
    config = config if config is not None else {"algorithm": algorithm, "n": n}
    if n == 0:
        return RunRecord(config, 0.0, None, None, None, [], {"count": 0, "mst": [], "level": []})
    space = inst.space
    placer = make_placer(algorithm, n, space)
    feed = inst.order[: placer.capacity]
    if want_exact and len(space.distinct(feed)) > EXACT_CAP:
        raise ConfigError(f"exact OPT requested but the input has more than {EXACT_CAP} distinct points")
    started = time.perf_counter()
    array = placer.array
    trace = []
    for x in feed:
        placer.next(x)
        trace.append(array.gaps)
    value = cost(array, space)
    bounds = opt_bounds(space, feed, want_exact=want_exact)
    wall = time.perf_counter() - started
    if bounds.exact is not None:
        lo = hi = _ratio(value, bounds.exact)
    else:
        lo, hi = _ratio(value, bounds.upper), _ratio(value, bounds.lower)
    levels = getattr(placer, "levels", None) or [getattr(placer, "state", None)]
    resets, level_of = [], []
    for depth, state in enumerate(levels):
        for ev in getattr(state, "resets", []):
            resets.append(ev)
            level_of.append(depth)
    return RunRecord(
        config,
        value,
        bounds.to_dict(),
        lo,
        hi,
        trace,
        {"count": len(resets), "mst": [ev.mst for ev in resets], "level": level_of},
        wall,
    )


def run_single(config: RunConfig) -> RunRecord:
    if config.algorithm not in PLACERS:
        raise ConfigError(f"unknown algorithm {config.algorithm!r}; choose from {sorted(PLACERS)}")
    if config.n == 0:
        return RunRecord(config.echo(), 0.0, None, None, None, [], {"count": 0, "mst": [], "level": []})
    inst = generate(config.generator, config.n, config.seed, config.params)
    return run_instance(config.algorithm, inst, config.want_exact, config.echo())


def expand_trials(config: RunConfig) -> list[RunConfig]:
    """One config per trial, seeded by :func:`trial_seed` from the master seed."""
    if config.trials == 1:
        return [config]
    out = []
    for t in range(config.trials):
        c = RunConfig(**{**asdict(config), "trials": 1, "seed": trial_seed(config.seed, t)})
        out.append(c)
    return out


def _run_row(config: RunConfig) -> dict:
    try:
        return run_single(config).to_dict()
    except Exception as exc:  # noqa: BLE001 - one bad row must not abort a sweep
        return {"config": config.echo(), "error": f"{type(exc).__name__}: {exc}"}


@dataclass
class SweepResult:
    rows: list
    aggregates: list


def aggregate(rows: list) -> list:
    groups: dict = {}
    for row in rows:
        cfg = row["config"]
        groups.setdefault((cfg["algorithm"], cfg["generator"], cfg["n"]), []).append(row)
    out = []
    for (alg, gen, n), members in groups.items():
        ok = [r for r in members if "error" not in r and r["ratio_upper"] is not None]
        entry = {
            "algorithm": alg,
            "generator": gen,
            "n": n,
            "runs": len(members),
            "errors": len(members) - len([r for r in members if "error" not in r]),
        }
        if ok:
            entry.update(
                mean_cost=statistics.fmean(r["cost"] for r in ok),
                mean_ratio_lower=statistics.fmean(r["ratio_lower"] for r in ok),
                mean_ratio_upper=statistics.fmean(r["ratio_upper"] for r in ok),
                max_ratio_upper=max(r["ratio_upper"] for r in ok),
            )
        out.append(entry)
    return out


def sweep(configs: list, workers: int = 1) -> SweepResult:
    if not configs:
        raise ConfigError("sweep needs at least one config")
    expanded = [c for cfg in configs for c in expand_trials(cfg)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_row, expanded))
    else:
        rows = [_run_row(c) for c in expanded]
    return SweepResult(rows, aggregate(rows))


CSV_COLUMNS = [
    "algorithm", "generator", "n", "seed", "cost", "mst", "opt_exact",
    "ratio_lower", "ratio_upper", "gaps_max", "resets",
]


def summary_row(row: dict) -> dict:
    cfg = row["config"]
    base = {"algorithm": cfg["algorithm"], "generator": cfg["generator"], "n": cfg["n"], "seed": cfg["seed"]}
    if "error" in row:
        return {**base, "cost": "", "mst": "", "opt_exact": "", "ratio_lower": "", "ratio_upper": "",
                "gaps_max": "", "resets": row["error"]}
    bounds = row["bounds"] or {}
    return {
        **base,
        "cost": row["cost"],
        "mst": bounds.get("mst", ""),
        "opt_exact": "" if bounds.get("exact") is None else bounds["exact"],
        "ratio_lower": "" if row["ratio_lower"] is None else row["ratio_lower"],
        "ratio_upper": "" if row["ratio_upper"] is None else row["ratio_upper"],
        "gaps_max": max(row["gap_trace"], default=0),
        "resets": row["resets"]["count"],
    }


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(summary_row(row))
    return buf.getvalue()


def rows_to_jsonl(rows: list, timing: bool = True) -> str:
    lines = []
    for row in rows:
        row = dict(row)
        if not timing:
            row.pop("wall_time", None)
        lines.append(json.dumps(row, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def plot_rows(algorithm: str, generator: str, ns: list, trials: int, seed: int, params=None) -> list:
    """Mean and max ratio per n, keyed for a ratio-vs-sqrt(n) plot."""
    out = []
    for n in ns:
        cfg = RunConfig(algorithm, generator, n, seed, dict(params or {}), trials=trials)
        res = sweep([cfg])
        agg = res.aggregates[0]
        out.append({
            "algorithm": algorithm,
            "generator": generator,
            "n": n,
            "sqrt_n": math.sqrt(n),
            "mean_ratio_upper": agg.get("mean_ratio_upper", ""),
            "max_ratio_upper": agg.get("max_ratio_upper", ""),
            "mean_ratio_lower": agg.get("mean_ratio_lower", ""),
        })
    return out


# -- verification suites ---------------------------------------------------


@dataclass
class VerifyReport:
    suite: str
    trials: int
    seed: int
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def random_small_instance(rng: np.random.Generator, n: int) -> Instance:
    """A random instance of ``n`` points from one of the three metric kinds."""
    kind = rng.integers(0, 5)
    seed = int(rng.integers(0, 2**32))
    if kind <= 2:
        return random_stream("euclidean", n, seed, dim=int(kind) + 1)
    if kind == 3:
        return random_stream("uniform", n, seed, k=int(rng.integers(1, n + 2)))
    return _random_matrix(n, seed, k=int(rng.integers(1, n + 2)))


def _fail(report: VerifyReport, seed: int, inst: Instance, message: str) -> None:
    report.failures.append({"seed": seed, "message": message, "instance": inst.to_json()})


def _verify_sandwich(report, rng):
    for _ in range(report.trials):
        seed = int(rng.integers(0, 2**32))
        r = rng_for(seed)
        inst = random_small_instance(r, int(r.integers(1, 11)))
        mst = mst_weight(inst.space, inst.order)
        opt = exact_opt(inst.space, inst.order)
        if not sandwich_holds(mst, opt):
            _fail(report, seed, inst, f"MST={mst} OPT={opt}")


def _verify_nets(report, rng):
    for _ in range(report.trials):
        seed = int(rng.integers(0, 2**32))
        r = rng_for(seed)
        inst = random_small_instance(r, int(r.integers(1, 200)))
        radius = 0.0 if r.random() < 0.2 else float(r.exponential(0.5))
        net = Net(radius, [])
        space = inst.space
        for i, x in enumerate(inst.order):
            increase_net(net, x, space)
            if not verify_net(net, inst.order[: i + 1], space):
                _fail(report, seed, inst, f"net fails after {i + 1} points at r={radius}")
                break
        else:
            mst = mst_weight(space, inst.order)
            slack = net_size_slack(net, inst.order, space)
            if not slack_ok(slack, mst):
                _fail(report, seed, inst, f"net-size slack {slack} < 0 (MST={mst})")


def _verify_half(report, rng):
    ns = [k * k for k in range(2, 15)]
    for t in range(report.trials):
        seed = int(rng.integers(0, 2**32))
        n = ns[t % len(ns)]
        inst = random_small_instance(rng_for(seed), (n + 1) // 2)
        A = PlacementArray(n)
        state = fill_most_blocks(n, A, inst.order, inst.space)
        g, c = gaps(A), cost(A, inst.space)
        if len(inst.space.distinct(inst.order)) <= EXACT_CAP:
            ok = within_ratio(c, 11 * math.sqrt(n), exact_opt(inst.space, inst.order))
        else:
            ok = within_ratio(c, 22 * math.sqrt(n), mst_weight(inst.space, inst.order))
        if g > 2 * math.sqrt(n) or not ok:
            _fail(report, seed, inst, f"n={n}: gaps={g} cost={c}")
        for ev in state.resets:
            if not doubling_holds(ev.mst, ev.previous_mst):
                _fail(report, seed, inst, f"reset MST {ev.mst} < 2 * {ev.previous_mst}")


def _verify_full(report, rng):
    for _ in range(report.trials):
        seed = int(rng.integers(0, 2**32))
        r = rng_for(seed)
        n = int(r.integers(1, 15)) if r.random() < 0.5 else int(r.integers(15, 400))
        inst = random_small_instance(r, n)
        A = PlacementArray(n)
        recursively_fill_most_blocks(n, A, inst.order, inst.space)
        c = cost(A, inst.space)
        if n <= 14:
            opt = exact_opt(inst.space, inst.order)
            ok = within_ratio(c, SHARP_FULL_CONSTANT * math.sqrt(n), opt)
        else:
            ok = within_ratio(c, 104 * math.sqrt(n), mst_weight(inst.space, inst.order))
        if not (A.full and ok):
            _fail(report, seed, inst, f"n={n}: cost={c} full={A.full}")


def _verify_adversary(report, rng, n=10**5):
    hits = 0
    master = int(rng.integers(0, 2**32))
    for t in range(report.trials):
        hits += adversary_plan(n, trial_seed(master, t)).x_served
    p = far_point_probability(n)
    freq = hits / report.trials
    sigma = math.sqrt(p * (1 - p) / report.trials)
    report.notes.update(n=n, hits=hits, frequency=freq, expected=p, sigma=sigma)
    if abs(freq - p) > 3 * sigma or freq > n ** (-2 / 5) + 3 * sigma:
        report.failures.append({"seed": master, "message": f"frequency {freq} vs {p} +- 3*{sigma}"})


def _verify_comb(report, rng):
    for m in range(1, min(report.trials, 64) + 1):
        inst = comb_instance(m)
        if not validate_comb(inst):
            report.failures.append({"seed": None, "message": f"comb m={m} fails", "m": m})


SUITES = {
    "lemma3": _verify_sandwich,
    "lemma4": _verify_nets,
    "lemma6": _verify_half,
    "theorem8": _verify_full,
    "adversary": _verify_adversary,
    "comb": _verify_comb,
}


def verify(suite: str, budget: int, seed: int = 0) -> VerifyReport:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    report = VerifyReport(suite, budget, seed)
    SUITES[suite](report, rng_for(seed))
    return report
