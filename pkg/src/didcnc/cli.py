"""Command line: single runs, experiment sweeps and the LP oracle.

    didcnc run <scenario> [--policy P] [--slots N] [--seed S]
    didcnc sweep lambda|alpha|cache <spec-file> [--force]
    didcnc oracle lp <scenario> [--exact] [--witness]

``<scenario>`` is a scenario JSON file or ``default`` for the built-in grid.
Outputs go to ``--out``, else ``$DIDCNC_OUT``, else ``./didcnc-out``.
Every simulated grid point is stored as its own CSV under ``points/`` and
reused on later runs unless ``--force`` is given, so sweeps can be
interrupted and resumed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .model import (
    POLICIES, Scenario, ScenarioError, default_grid_scenario, load_scenario, scenario_to_dict, with_cache_index,
)
from .oracle import max_throughput_lp
from .simulator import MIN_STABILITY_SLOTS, Simulation, summary_row, write_summary

OUT_ENV = "DIDCNC_OUT"
DEFAULT_OUT = "didcnc-out"
SWEEP_KINDS = ("lambda", "alpha", "cache_index")
POINT_FIELDS = ["policy", "lambda", "alpha_proc", "alpha_tx", "seed", "slots", "slots_run", "mean_delay",
                "stable", "throughput", "seconds"]


def output_dir(explicit=None) -> Path:
    path = Path(explicit or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    path.mkdir(parents=True, exist_ok=True)
    return path


def resolve_scenario(arg) -> Scenario:
    if arg is None or arg == "default":
        return default_grid_scenario()
    return load_scenario(arg)


def _alpha(x) -> Fraction:
    return Fraction(x).limit_denominator(1 << 20)


# ---------------------------------------------------------------------------
# sweep specification


@dataclass
class SweepSpec:
    """One experiment: what to vary, which policies, seeds and horizon.

    ``grid`` holds arrival rates (lambda), transmission fractions alpha_tx at
    which the minimal processing fraction is searched (alpha), or cache
    indices (cache_index).  ``rate`` is the arrival rate of the alpha and
    cache-index studies.
    """

    kind: str
    grid: tuple
    policies: tuple = POLICIES
    seeds: tuple = (1, 2, 3)
    output_dir: str | None = None
    scenario: str | None = None
    slots: int = 100_000
    warmup: int | None = None
    rate: float = 4.0
    delay_bound: float = 20.0
    iterations: int = 8
    boundaries: bool = True
    alpha_search: bool = True
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "cache":
            self.kind = "cache_index"
        if self.kind not in SWEEP_KINDS:
            raise ScenarioError(f"sweep kind must be one of {SWEEP_KINDS}, got {self.kind!r}", "kind")
        self.grid = tuple(self.grid)
        self.policies = tuple(self.policies)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.grid:
            raise ScenarioError("sweep grid is empty", "grid")
        if not self.seeds:
            raise ScenarioError("at least one seed is needed", "seeds")
        for p in self.policies:
            if p not in POLICIES:
                raise ScenarioError(f"unknown policy {p!r}", "policies")
        if self.kind == "lambda" and any(x < 0 for x in self.grid):
            raise ScenarioError("arrival rates must be non-negative", "grid")
        if self.kind == "alpha" and any(not 0 < x <= 1 for x in self.grid):
            raise ScenarioError("alpha values must lie in (0, 1]", "grid")
        if self.kind == "cache_index":
            n = len(self.base_scenario().graph.nodes)
            if any(int(x) != x or not 1 <= x <= n for x in self.grid):
                raise ScenarioError(f"cache indices must be integers in 1..{n}", "grid")
            self.grid = tuple(int(x) for x in self.grid)
        if self.slots < MIN_STABILITY_SLOTS:
            raise ScenarioError(f"slots must be at least {MIN_STABILITY_SLOTS} for the stability test", "slots")
        if self.iterations < 1:
            raise ScenarioError("iterations must be positive", "iterations")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown sweep fields: {sorted(unknown)}", sorted(unknown)[0])
        if "kind" not in data or "grid" not in data:
            raise ScenarioError("sweep spec needs 'kind' and 'grid'", "kind")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SweepSpec":
        with open(path) as fh:
            data = json.load(fh)
        # relative scenario paths are taken from the spec file's directory
        sc = data.get("scenario") if isinstance(data, dict) else None
        if sc not in (None, "default") and not Path(sc).is_absolute():
            data["scenario"] = str(Path(path).parent / sc)
        return cls.from_dict(data)

    def base_scenario(self) -> Scenario:
        sc = resolve_scenario(self.scenario)
        return replace(sc, slot_count=max(self.slots, sc.slot_count), warmup=self.warmup)


# ---------------------------------------------------------------------------
# resumable point store


def _read_row(path: Path) -> dict:
    with open(path, newline="") as fh:
        row = next(csv.DictReader(fh))
    out = dict(row)
    for k in ("lambda", "alpha_proc", "alpha_tx", "mean_delay", "throughput", "seconds"):
        out[k] = float(row[k])
    for k in ("seed", "slots", "slots_run", "stable"):
        out[k] = int(row[k])
    return out


def _simulate_point(scenario: Scenario, policy: str, seed: int, slots: int) -> dict:
    t0 = time.perf_counter()
    sc = replace(scenario, seed=seed, slot_count=max(slots, scenario.slot_count))
    rec = Simulation(sc, policy).run(slots)
    stable = rec.slots == slots and rec.stable
    return {
        "policy": policy,
        "lambda": float(sc.clients[0].arrival_rate) if sc.clients else 0.0,
        "alpha_proc": float(sc.alpha_proc),
        "alpha_tx": float(sc.alpha_tx),
        "seed": seed,
        "slots": slots,
        "slots_run": rec.slots,
        "mean_delay": rec.mean_delay if stable else math.inf,
        "stable": int(stable),
        "throughput": rec.throughput,
        "seconds": time.perf_counter() - t0,
    }


class PointStore:
    """Per-point CSV cache keyed by the full scenario, policy, seed and horizon."""

    def __init__(self, directory, force: bool = False, log=None):
        self.dir = Path(directory) / "points"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.force = force
        self.log = log
        self._fresh: set[str] = set()  # points recomputed in this session (with force)
        self._lp: dict[str, float] = {}

    @staticmethod
    def key(scenario: Scenario, *parts) -> str:
        data = scenario_to_dict(replace(scenario, seed=0, slot_count=1, warmup=None, policy="DI-DCNC"))
        data["warmup"] = scenario.warmup
        blob = json.dumps([data, [str(p) for p in parts]], sort_keys=True, default=str)
        return hashlib.sha1(blob.encode()).hexdigest()[:16]

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.csv"

    def cached(self, scenario, policy, seed, slots):
        key = self.key(scenario, policy, seed, slots)
        path = self._path(key)
        if path.exists() and (not self.force or key in self._fresh):
            return _read_row(path)
        return None

    def save(self, scenario, policy, seed, slots, row) -> None:
        key = self.key(scenario, policy, seed, slots)
        tmp = self._path(key).with_suffix(".tmp")
        with open(tmp, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=POINT_FIELDS)
            w.writeheader()
            w.writerow(row)
        tmp.replace(self._path(key))
        self._fresh.add(key)

    def point(self, scenario: Scenario, policy: str, seed: int, slots: int) -> dict:
        row = self.cached(scenario, policy, seed, slots)
        if row is None:
            row = _simulate_point(scenario, policy, seed, slots)
            self.save(scenario, policy, seed, slots, row)
            if self.log:
                self.log(f"{policy} lambda={row['lambda']:.4g} alpha=({row['alpha_proc']:.4g},{row['alpha_tx']:.4g}) "
                         f"seed={seed} stable={row['stable']} delay={row['mean_delay']:.4g} [{row['seconds']:.1f}s]")
        return row

    def lp_bound(self, scenario: Scenario, policy: str) -> float:
        """theta* times the base rate; the L2S bound restricts processing to cache nodes."""
        local = policy == "L2S"
        key = self.key(scenario, "lp", local)
        if key in self._lp:
            return self._lp[key]
        path = self.dir / f"lp-{key}.txt"
        if path.exists() and not self.force:
            value = float(path.read_text())
        else:
            value = max_throughput_lp(scenario, static_local=local).boundary
            path.write_text(repr(value))
        self._lp[key] = value
        return value


def vote(store: PointStore, scenario: Scenario, policy: str, seeds, slots: int, accept) -> bool:
    """Majority of ``accept(row)`` over the seeds, stopping once it is decided."""
    need = len(seeds) // 2 + 1
    yes = no = 0
    for seed in seeds:
        if accept(store.point(scenario, policy, seed, slots)):
            yes += 1
        else:
            no += 1
        if yes >= need or no > len(seeds) - need:
            break
    return yes >= need


def is_stable(row) -> bool:
    return bool(row["stable"])


def bisect_boundary(store: PointStore, scenario: Scenario, policy: str, upper: float, seeds, slots: int,
                    iterations: int = 8):
    """Largest rate judged stable by bisection over [0, upper]; returns (boundary, probes)."""
    lo, hi = 0.0, float(upper)
    probes = []
    for _ in range(iterations):
        mid = (lo + hi) / 2
        ok = vote(store, scenario.with_rates(Fraction(mid)), policy, seeds, slots, is_stable)
        probes.append((mid, ok))
        if ok:
            lo = mid
        else:
            hi = mid
    return lo, probes


def min_alpha(store: PointStore, scenario: Scenario, policy: str, seeds, slots: int, delay_bound: float,
              iterations: int = 8, axis: str = "diagonal", other: float = 1.0):
    """Smallest capacity fraction meeting the delay bound (NaN if even full capacity misses it).

    ``axis`` is ``diagonal`` (alpha_proc = alpha_tx), ``proc`` (alpha_tx fixed
    to ``other``) or ``tx`` (alpha_proc fixed to ``other``).
    """
    def at(a):
        a = _alpha(a)
        if axis == "diagonal":
            return replace(scenario, alpha_proc=a, alpha_tx=a)
        if axis == "proc":
            return replace(scenario, alpha_proc=a, alpha_tx=_alpha(other))
        return replace(scenario, alpha_proc=_alpha(other), alpha_tx=a)

    def feasible(row):
        return bool(row["stable"]) and row["mean_delay"] <= delay_bound

    if not vote(store, at(1.0), policy, seeds, slots, feasible):
        return math.nan
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if vote(store, at(mid), policy, seeds, slots, feasible):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# sweeps


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf"
        return f"{x:.6g}"
    return str(x)


def _prefetch(store: PointStore, jobs, tasks) -> None:
    """Run independent grid points concurrently; results land in the store."""
    todo = [t for t in tasks if store.cached(*t) is None]
    if jobs <= 1 or len(todo) < 2:
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [(t, pool.submit(_simulate_point, *t)) for t in todo]
        for t, fut in futures:
            store.save(*t, fut.result())


def sweep_lambda(spec: SweepSpec, out: Path | None = None, force: bool = False, log=None) -> dict:
    """Delay per (policy, rate) plus a bisection boundary per policy.

    Files: ``lambda_points.csv`` (every seed), ``lambda_delay.csv`` (mean
    delay, ``inf`` when the majority of seeds is unstable),
    ``lambda_boundaries.csv`` and the plot ``lambda_delay.png``.
    """
    out = output_dir(out or spec.output_dir)
    store = PointStore(out, force, log)
    base = spec.base_scenario()
    _prefetch(store, spec.jobs, [(base.with_rates(Fraction(lam).limit_denominator(1 << 20)), p, s, spec.slots)
                                 for p in spec.policies for lam in spec.grid for s in spec.seeds])
    points, delay_rows = [], []
    for p in spec.policies:
        for lam in spec.grid:
            sc = base.with_rates(Fraction(lam).limit_denominator(1 << 20))
            rows = [store.point(sc, p, s, spec.slots) for s in spec.seeds]
            points += [[p, lam, r["seed"], _fmt(r["mean_delay"]), r["stable"], _fmt(r["throughput"])] for r in rows]
            stable = sum(r["stable"] for r in rows) * 2 > len(rows)
            delays = [r["mean_delay"] for r in rows if r["stable"]]
            mean = sum(delays) / len(delays) if stable and delays else math.inf
            delay_rows.append([p, lam, _fmt(mean), int(stable)])
    _write_csv(out / "lambda_points.csv", ["policy", "lambda", "seed", "mean_delay", "stable", "throughput"], points)
    _write_csv(out / "lambda_delay.csv", ["policy", "lambda", "mean_delay", "stable"], delay_rows)
    result = {"delay": delay_rows, "boundaries": {}}
    if spec.boundaries:
        rows = []
        for p in spec.policies:
            bound = store.lp_bound(base, p)
            b, _ = bisect_boundary(store, base, p, bound, spec.seeds, spec.slots, spec.iterations)
            result["boundaries"][p] = b
            rows.append([p, _fmt(b), _fmt(bound)])
        _write_csv(out / "lambda_boundaries.csv", ["policy", "boundary", "lp_bound"], rows)
    render_plot("lambda", out)
    return result


def sweep_alpha(spec: SweepSpec, out: Path | None = None, force: bool = False, log=None) -> dict:
    """Feasible-region border and saving ratios at rate ``spec.rate``.

    For every alpha_tx in the grid the smallest alpha_proc meeting the delay
    bound is searched (``alpha_border.csv``); ``alpha_savings.csv`` has the
    diagonal saving ``1 - alpha`` and the largest single-axis savings.
    """
    out = output_dir(out or spec.output_dir)
    store = PointStore(out, force, log)
    sc = spec.base_scenario().with_rates(Fraction(spec.rate).limit_denominator(1 << 20))
    args = (spec.seeds, spec.slots, spec.delay_bound, spec.iterations)
    border, savings = [], []
    result = {}
    for p in spec.policies:
        for a_tx in spec.grid:
            border.append([p, a_tx, _fmt(min_alpha(store, sc, p, *args, axis="proc", other=a_tx))])
        diag = min_alpha(store, sc, p, *args)
        proc = min_alpha(store, sc, p, *args, axis="proc", other=1.0)
        tx = min_alpha(store, sc, p, *args, axis="tx", other=1.0)
        result[p] = {"diagonal_alpha": diag, "diagonal_saving": 1 - diag, "processing_saving": 1 - proc,
                     "transmission_saving": 1 - tx}
        savings.append([p, _fmt(diag), _fmt(1 - diag), _fmt(1 - proc), _fmt(1 - tx)])
    _write_csv(out / "alpha_border.csv", ["policy", "alpha_tx", "alpha_proc"], border)
    _write_csv(out / "alpha_savings.csv",
               ["policy", "diagonal_alpha", "diagonal_saving", "processing_saving", "transmission_saving"], savings)
    render_plot("alpha", out)
    return result


def sweep_cache_index(spec: SweepSpec, out: Path | None = None, force: bool = False, log=None) -> dict:
    """Boundary throughput and minimal diagonal alpha per (policy, cache index).

    ``cache_index.csv`` columns: policy, cache_index, boundary, lp_bound,
    min_alpha (``nan`` when the delay bound is missed at full capacity or the
    alpha search is switched off).
    """
    out = output_dir(out or spec.output_dir)
    store = PointStore(out, force, log)
    base = spec.base_scenario()
    rows = []
    result: dict = {p: {} for p in spec.policies}
    for p in spec.policies:
        for k in spec.grid:
            sc = with_cache_index(base, k)
            bound = store.lp_bound(sc, p)
            b = math.nan
            if spec.boundaries:
                b, _ = bisect_boundary(store, sc, p, bound, spec.seeds, spec.slots, spec.iterations)
            a = math.nan
            if spec.alpha_search:
                a = min_alpha(store, sc.with_rates(Fraction(spec.rate).limit_denominator(1 << 20)), p, spec.seeds,
                              spec.slots, spec.delay_bound, spec.iterations)
            result[p][k] = {"boundary": b, "lp_bound": bound, "min_alpha": a}
            rows.append([p, k, _fmt(b), _fmt(bound), _fmt(a)])
    _write_csv(out / "cache_index.csv", ["policy", "cache_index", "boundary", "lp_bound", "min_alpha"], rows)
    render_plot("cache_index", out)
    return result


SWEEPS = {"lambda": sweep_lambda, "alpha": sweep_alpha, "cache_index": sweep_cache_index}


# ---------------------------------------------------------------------------
# plots (read the data files only)


def _num(x: str) -> float:
    return float(x) if x not in ("", "nan") else math.nan


def render_plot(kind: str, out: Path) -> Path | None:
    """Render the figure of a finished sweep from its CSV table into a PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out)
    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "lambda":
        rows = _read_csv(out / "lambda_delay.csv")
        for p in dict.fromkeys(r["policy"] for r in rows):
            pts = [(float(r["lambda"]), _num(r["mean_delay"])) for r in rows if r["policy"] == p]
            pts = [(x, y) for x, y in pts if math.isfinite(y)]
            ax.plot([x for x, _ in pts], [y for _, y in pts], marker="o", label=p)
        ax.set_xlabel("arrival rate per client (packets/slot)")
        ax.set_ylabel("mean request delay (slots)")
        name = "lambda_delay.png"
    elif kind == "alpha":
        rows = _read_csv(out / "alpha_border.csv")
        for p in dict.fromkeys(r["policy"] for r in rows):
            pts = [(_num(r["alpha_proc"]), float(r["alpha_tx"])) for r in rows if r["policy"] == p]
            ax.plot([x for x, _ in pts], [y for _, y in pts], marker="o", label=p)
        ax.set_xlabel("processing fraction alpha_proc")
        ax.set_ylabel("transmission fraction alpha_tx")
        ax.set_xlim(0, 1.02)
        ax.set_ylim(0, 1.02)
        name = "alpha_border.png"
    elif kind == "cache_index":
        rows = _read_csv(out / "cache_index.csv")
        ax2 = ax.twinx()
        for p in dict.fromkeys(r["policy"] for r in rows):
            sel = [r for r in rows if r["policy"] == p]
            ax.plot([int(r["cache_index"]) for r in sel], [_num(r["boundary"]) for r in sel], marker="o", label=p)
            ax2.plot([int(r["cache_index"]) for r in sel], [_num(r["min_alpha"]) for r in sel], ls="--")
        ax.set_xlabel("cache index")
        ax.set_ylabel("boundary throughput (packets/slot)")
        ax2.set_ylabel("minimal alpha (dashed)")
        name = "cache_index.png"
    else:
        plt.close(fig)
        raise ValueError(f"unknown plot kind {kind!r}")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out / name
    fig.savefig(path)
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    sc = resolve_scenario(args.scenario)
    policy = args.policy or sc.policy
    slots = args.slots or sc.slot_count
    sc = replace(sc, seed=sc.seed if args.seed is None else args.seed, slot_count=max(slots, sc.slot_count))
    stem = "default" if args.scenario in (None, "default") else Path(args.scenario).stem
    out = output_dir(args.out) / f"run-{stem}-{policy}-s{sc.seed}"
    out.mkdir(parents=True, exist_ok=True)
    routes = open(out / "routes.txt", "w") if args.trace_routes else None
    queues = open(out / "queues.csv", "w", newline="") if args.trace_queues else None
    try:
        if queues is not None:
            csv.writer(queues).writerow(["slot", "entity", "q_virtual", "q_normalized"])
        rec = Simulation(sc, policy, debug=args.debug, route_trace=routes, queue_trace=queues).run(slots)
    finally:
        for fh in (routes, queues):
            if fh is not None:
                fh.close()
    rec.to_csv(out / "timeseries.csv")
    row = summary_row(sc, rec)
    write_summary([row], out / "summary.csv")
    for k, v in row.items():
        print(f"{k}: {v}")
    print(f"output: {out}")
    return 0


def cmd_sweep(args) -> int:
    spec = SweepSpec.load(args.spec)
    kind = {"cache": "cache_index"}.get(args.kind, args.kind)
    if spec.kind != kind:
        raise ScenarioError(f"spec file describes a {spec.kind} sweep, not {kind}", "kind")
    log = (lambda msg: print(msg, file=sys.stderr, flush=True)) if args.verbose else None
    out = output_dir(args.out or spec.output_dir)
    result = SWEEPS[kind](spec, out, force=args.force, log=log)
    print(json.dumps(result, default=_fmt, indent=1))
    print(f"output: {out}")
    return 0


def cmd_oracle(args) -> int:
    sc = resolve_scenario(args.scenario)
    lp = max_throughput_lp(sc, exact=args.exact, static_local=args.static_local)
    print(f"theta*: {lp.theta}")
    print(f"boundary (theta* x base rate): {lp.boundary:.6g}")
    print(f"simplex iterations: {lp.iterations}")
    if args.witness:
        out = output_dir(args.out)
        path = out / "lp_witness.csv"
        lp.write_witness(path)
        print(f"witness: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="didcnc", description=__doc__.split("\n")[0])
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("scenario", help="scenario JSON file or 'default'")
    run.add_argument("--policy", choices=POLICIES)
    run.add_argument("--slots", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--debug", action="store_true", help="check engine invariants every slot")
    run.add_argument("--trace-routes", action="store_true", help="write the selected route of every batch")
    run.add_argument("--trace-queues", action="store_true", help="write the virtual queues of every slot")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="run an experiment sweep")
    sw.add_argument("kind", choices=("lambda", "alpha", "cache"))
    sw.add_argument("spec", help="sweep spec JSON file")
    sw.add_argument("--force", action="store_true", help="recompute grid points that already have results")
    sw.add_argument("-v", "--verbose", action="store_true", help="log every simulated point")
    sw.set_defaults(func=cmd_sweep)

    orc = sub.add_parser("oracle", help="ground-truth checkers")
    osub = orc.add_subparsers(dest="oracle", required=True)
    lp = osub.add_parser("lp", help="maximum common throughput scale (LP)")
    lp.add_argument("scenario", help="scenario JSON file or 'default'")
    lp.add_argument("--exact", action="store_true", help="solve with exact rational arithmetic")
    lp.add_argument("--static-local", action="store_true", help="restrict processing to cache nodes")
    lp.add_argument("--witness", action="store_true", help="write per-edge flows as CSV")
    lp.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
