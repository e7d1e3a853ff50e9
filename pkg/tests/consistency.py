"""Exhaustive population-oracle consistency sweeps shared by the test suites."""

import itertools as itr
import time

import numpy as np

from oracles import all_dags, target_lists
from utigsp.graphs import IDag, i_markov_equivalent, markov_equivalent
from utigsp.learners import ProblemInput, SearchOptions, start_runner
from utigsp.stats import population_ci_oracle, population_invariance_oracle


def random_dags(p, count, seed):
    """``count`` distinct DAGs drawn uniformly from all labelled DAGs on ``p`` nodes."""
    pool = all_dags(p)
    idx = np.random.default_rng(seed).choice(len(pool), size=count, replace=False)
    return [pool[i] for i in sorted(idx)]


def sweep(learner, dags, lists, starts=None, stop_after=5):
    """Run ``learner`` from every start on every (DAG, target list) instance.

    Returns ``(runs, failures, seconds)`` where ``failures`` holds up to
    ``stop_after`` descriptions of wrong outputs.
    """
    t0 = time.perf_counter()
    runs, failures = 0, []
    opts = SearchOptions(depth=None)
    for g in dags:
        ci = population_ci_oracle(g)
        perms = starts if starts is not None else list(itr.permutations(range(g.p)))
        for targets in lists:
            idag = IDag(g, targets)
            inv = population_invariance_oracle(idag)
            K = len(targets)
            prob = ProblemInput(g.p, ci, inv, [frozenset()] * K)
            run = start_runner(prob, learner, opts)
            checked = {}
            for start in perms:
                res = run(start)
                runs += 1
                key = (res.g.edges, tuple(res.est_targets))
                ok = checked.get(key)
                if ok is None:
                    if learner == "gsp":
                        ok = markov_equivalent(res.g, g)
                    else:
                        ok = list(res.est_targets) == list(targets) and i_markov_equivalent(IDag(res.g, res.est_targets), idag)
                    checked[key] = ok
                if not ok and len(failures) < stop_after:
                    failures.append(f"{learner} g={sorted(g.edges)} targets={[sorted(t) for t in targets]} start={start} got {sorted(res.g.edges)}")
    return runs, failures, time.perf_counter() - t0


def exhaustive_lists(p):
    """Every ordered list of K <= 2 target sets with 0 <= |I^k| <= 2."""
    return list(target_lists(p, min_size=0))
