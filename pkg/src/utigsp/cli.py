"""Command-line front end: ``simulate``, ``learn`` and ``sweep``.

Exit codes: 0 on success, 2 for configuration errors, 3 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from utigsp.bundle import ConfigError, Manifest, check_writable, read_json, write_bundle, write_json
from utigsp.graphs import Dag
from utigsp.learners import ProblemInput, SearchOptions, gsp, jci_gsp, ut_igsp
from utigsp.metrics import evaluate
from utigsp.sem import (
    InterventionSpec,
    SemModel,
    SimConfig,
    apply_intervention,
    population_cov,
    sample,
    sample_er_dag,
    sample_targets,
    sample_weights,
)
from utigsp.stats import DataError, TestConfig, make_testers, population_suff_stat, suff_stat

logger = logging.getLogger("utigsp")

LEARNERS = ("ut-igsp", "gsp", "jci-gsp")
JOBS_ENV = "UTIGSP_JOBS"
METRIC_COLUMNS = [
    "replicate", "learner", "n", "l", "shd", "correct_imec", "target_fp", "target_fn",
    "edge_tp", "edge_fp", "edge_fn", "skeleton_tp", "skeleton_fp", "skeleton_fn", "runtime_s", "error",
]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_SIM_FIELDS = {f.name for f in fields(SimConfig)}


def _sim_config(d: dict, **override) -> SimConfig:
    kw = {k: v for k, v in d.items() if k in _SIM_FIELDS}
    kw.update(override)
    if "weight_range" in kw:
        kw["weight_range"] = tuple(kw["weight_range"])
    try:
        cfg = SimConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.intervention not in ("shift", "perfect"):
        raise ConfigError(f"unknown intervention kind {cfg.intervention!r}")
    return cfg


def _replicates(d: dict) -> int:
    reps = d.get("replicates", 1)
    if not isinstance(reps, int) or reps < 1:
        raise ConfigError(f"replicates must be a positive integer, got {reps!r}")
    return reps


@dataclass(frozen=True)
class ExperimentConfig:
    """A sweep over sample sizes, off-target counts, learners and replicates."""

    base: SimConfig
    replicates: int
    ns: tuple
    offtargets: tuple
    learners: tuple
    alpha: float = 1e-5
    depth: Optional[int] = 4
    restarts: int = 10
    jobs: int = 1

    @classmethod
    def from_dict(cls, d: dict, jobs: Optional[int] = None) -> "ExperimentConfig":
        known = _SIM_FIELDS | {"replicates", "ns", "offtargets", "learners", "alpha", "depth", "restarts", "jobs"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        ns = tuple(int(n) for n in d.get("ns", [d.get("n", 1000)]))
        offs = tuple(int(v) for v in d.get("offtargets", [d.get("num_offtarget", 0)]))
        if not ns or not offs:
            raise ConfigError("ns and offtargets must be nonempty")
        base = _sim_config(d)
        for n in ns:
            for ell in offs:
                _sim_config(d, n=n, num_offtarget=ell)
        learners = tuple(d.get("learners", ["ut-igsp"]))
        bad = [name for name in learners if name not in LEARNERS]
        if bad or not learners:
            raise ConfigError(f"unknown learners {bad}; choose from {list(LEARNERS)}")
        alpha = float(d.get("alpha", 1e-5))
        if not 0 < alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
        if jobs is None:
            jobs = int(d.get("jobs", os.environ.get(JOBS_ENV, 1)))
        if jobs < 1:
            raise ConfigError("jobs must be positive")
        return cls(base, _replicates(d), ns, offs, learners, alpha, d.get("depth", 4), int(d.get("restarts", 10)), jobs)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

# Independent RNG streams are keyed by (seed, replicate, purpose, ...).
_STRUCTURE, _TARGETS, _DATA = 0, 1, 2


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def simulate_replicate(cfg: SimConfig, replicate: int):
    """Draw one model, its settings, and data for all of them.

    The graph and weights depend only on ``(seed, replicate)`` so every
    sample size and off-target count of a sweep shares the same model.
    """
    rng = _rng(cfg.seed, replicate, _STRUCTURE)
    g = sample_er_dag(cfg.p, cfg.s, rng)
    model = sample_weights(g, cfg.weight_range, rng)
    drawn = sample_targets(cfg.p, cfg.K, cfg.num_offtarget, _rng(cfg.seed, replicate, _TARGETS, cfg.num_offtarget))
    specs = [InterventionSpec(cfg.intervention, kn | un) for kn, un in drawn]
    known = [kn for kn, _ in drawn]
    data_key = (cfg.seed, replicate, _DATA, cfg.n, cfg.num_offtarget)
    obs = sample(model, cfg.n, _rng(*data_key, 0))
    ints = [sample(apply_intervention(model, spec), cfg.n, _rng(*data_key, k + 1)) for k, spec in enumerate(specs)]
    return model, specs, known, obs, ints


# ---------------------------------------------------------------------------
# Learning
# ---------------------------------------------------------------------------

@dataclass
class RunOutput:
    g: Dag
    est_targets: list
    score: dict
    runtime_s: float
    ci_tests: int
    invariance_tests: int


def run_learner(learner: str, s_obs, s_int: list, known: list, alpha: float, opts: SearchOptions) -> RunOutput:
    """Run one learner on sufficient statistics.

    GSP uses only the observational data and reports the known targets as
    its target estimate.
    """
    if learner not in LEARNERS:
        raise ConfigError(f"unknown learner {learner!r}")
    ci, inv = make_testers(s_obs, s_int, TestConfig(alpha=alpha))
    p = s_obs.p
    t0 = time.perf_counter()
    if learner == "gsp":
        res = gsp(ci, p, opts=opts)
        targets = [frozenset(k) for k in known]
    else:
        problem = ProblemInput(p, ci, inv, known)
        res = (ut_igsp if learner == "ut-igsp" else jci_gsp)(problem, opts=opts)
        targets = res.est_targets
    runtime = time.perf_counter() - t0
    return RunOutput(res.g, [frozenset(t) for t in targets], res.score.to_dict(), runtime, ci.calls, inv.calls)


def _population_stats(model: SemModel, specs: list):
    obs = population_suff_stat(*population_cov(model))
    return obs, [population_suff_stat(*population_cov(apply_intervention(model, s))) for s in specs]


# ---------------------------------------------------------------------------
# Sweep cells
# ---------------------------------------------------------------------------

def run_cell(cfg: ExperimentConfig, replicate: int, n: int, ell: int) -> list[dict]:
    """All learners on one simulated dataset; failures become rows with ``error`` set."""
    rows = []
    try:
        sim = _sim_config(asdict(cfg.base), n=n, num_offtarget=ell)
        model, specs, known, obs, ints = simulate_replicate(sim, replicate)
        s_obs, s_int = suff_stat(obs), [suff_stat(x) for x in ints]
    except Exception as exc:  # recorded per cell; the sweep continues
        return [_failed_row(replicate, name, n, ell, exc) for name in cfg.learners]
    true_targets = [s.targets for s in specs]
    opts = SearchOptions(depth=cfg.depth, restarts=cfg.restarts, seed=replicate)
    for name in cfg.learners:
        try:
            out = run_learner(name, s_obs, s_int, known, cfg.alpha, opts)
            rep = evaluate(out.g, out.est_targets, model.g, true_targets)
            rows.append({"replicate": replicate, "learner": name, "n": n, "l": ell, **rep.to_dict(),
                         "runtime_s": round(out.runtime_s, 4), "error": ""})
        except Exception as exc:
            rows.append(_failed_row(replicate, name, n, ell, exc))
    return rows


def _failed_row(replicate, learner, n, ell, exc) -> dict:
    row = {c: "" for c in METRIC_COLUMNS}
    row.update(replicate=replicate, learner=learner, n=n, l=ell, error=f"{type(exc).__name__}: {exc}")
    return row


def _run_cell_star(args):
    return run_cell(*args)


def run_sweep(cfg: ExperimentConfig) -> list[dict]:
    """Every (replicate, n, l) cell; rows are returned in a fixed order regardless of scheduling."""
    tasks = [(cfg, r, n, ell) for n in cfg.ns for ell in cfg.offtargets for r in range(cfg.replicates)]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_cell_star, tasks))
    else:
        results = [run_cell(*t) for t in tasks]
    rows = [row for cell in results for row in cell]
    order = {name: k for k, name in enumerate(cfg.learners)}
    rows.sort(key=lambda r: (r["n"], r["l"], order[r["learner"]], r["replicate"]))
    return rows


def summarize(rows: list[dict]) -> list[dict]:
    """Per (learner, n, l): mean SHD, proportion of correct I-MECs, mean target errors."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["learner"], row["n"], row["l"]), []).append(row)
    out = []
    for (learner, n, ell), grp in groups.items():
        ok = [r for r in grp if not r["error"]]
        mean = (lambda key: float(np.mean([r[key] for r in ok]))) if ok else (lambda key: None)
        out.append({
            "learner": learner, "n": n, "l": ell, "runs": len(ok), "failures": len(grp) - len(ok),
            "mean_shd": mean("shd"),
            "prop_correct_imec": float(np.mean([bool(r["correct_imec"]) for r in ok])) if ok else None,
            "mean_target_fp": mean("target_fp"),
            "mean_target_fn": mean("target_fn"),
        })
    return out


def write_metrics(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (int(v) if isinstance(v, bool) else v) for k, v in row.items()})


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    d = read_json(args.config, "config")
    reps = _replicates(d)
    cfg = _sim_config(d)
    unknown = set(d) - _SIM_FIELDS - {"replicates"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = Path(args.out)
    check_writable(out)
    for r in range(reps):
        model, specs, known, obs, ints = simulate_replicate(cfg, r)
        path = write_bundle(out / f"rep_{r:03d}", model, specs, known, obs, ints, seed=cfg.seed)
        logger.info("wrote %s", path)
    write_json(out / "config.json", {**asdict(cfg), "weight_range": list(cfg.weight_range), "replicates": reps})
    return 0


def cmd_learn(args) -> int:
    if not 0 < args.alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {args.alpha}")
    m = Manifest.load(args.manifest)
    known = [frozenset(s.known_targets) for s in m.settings]
    if args.oracle:
        model, specs = m.load_model()
        s_obs, s_int = _population_stats(model, specs)
        sizes = [s_obs.n] * (1 + m.K)
    else:
        obs, ints = m.load_data()
        s_obs, s_int = suff_stat(obs), [suff_stat(x) for x in ints]
        sizes = [len(obs)] + [len(x) for x in ints]
    opts = SearchOptions(depth=None if args.depth < 0 else args.depth, restarts=args.restarts, seed=args.seed)
    out = run_learner(args.learner, s_obs, s_int, known, args.alpha, opts)
    result = {
        "learner": args.learner,
        "p": m.p,
        "K": m.K,
        "edges": sorted([list(e) for e in out.g.edges]),
        "est_targets": [sorted(t) for t in out.est_targets],
        "score": out.score,
        "runtime_s": out.runtime_s,
        "tests": {"ci": out.ci_tests, "invariance": out.invariance_tests},
        "settings": {
            "manifest": str(args.manifest), "alpha": args.alpha, "oracle": args.oracle,
            "depth": opts.depth, "restarts": opts.restarts, "seed": opts.seed,
            "known_targets": [sorted(k) for k in known], "sample_sizes": sizes,
        },
    }
    truth = m.load_truth()
    if truth is not None and m.settings and all(s.true_targets is not None for s in m.settings):
        true_targets = [frozenset(s.true_targets) for s in m.settings]
        result["metrics"] = evaluate(out.g, out.est_targets, truth, true_targets).to_dict()
    elif truth is not None and not m.settings:
        result["metrics"] = evaluate(out.g, [], truth, []).to_dict()
    out_path = Path(args.out)
    if out_path.parent and not out_path.parent.exists():
        check_writable(out_path.parent)
    write_json(out_path, result)
    return 0


def cmd_sweep(args) -> int:
    d = read_json(args.config, "config")
    cfg = ExperimentConfig.from_dict(d, jobs=args.jobs)
    out = Path(args.out)
    check_writable(out)
    rows = run_sweep(cfg)
    write_metrics(out / "metrics.csv", rows)
    summary = {"cells": summarize(rows), "failures": sum(bool(r["error"]) for r in rows), "config": d}
    write_json(out / "summary.json", summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="utigsp", description="Causal structure learning with unknown intervention targets.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="write simulated dataset bundles")
    sp.add_argument("--config", required=True, help="JSON simulation config")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_simulate)

    lp = sub.add_parser("learn", help="learn a graph from a dataset manifest")
    lp.add_argument("--manifest", required=True)
    lp.add_argument("--learner", choices=LEARNERS, default="ut-igsp")
    lp.add_argument("--alpha", type=float, default=1e-5)
    lp.add_argument("--out", required=True, help="result JSON path")
    lp.add_argument("--depth", type=int, default=4, help="DFS depth limit; negative for unbounded")
    lp.add_argument("--restarts", type=int, default=10)
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--oracle", action="store_true", help="use exact population moments of the simulated model")
    lp.set_defaults(func=cmd_learn)

    wp = sub.add_parser("sweep", help="run an experiment grid and write metrics")
    wp.add_argument("--config", required=True)
    wp.add_argument("--out", required=True)
    wp.add_argument("--jobs", type=int, default=None, help=f"worker processes (default: ${JOBS_ENV} or 1)")
    wp.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
