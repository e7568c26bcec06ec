#!/usr/bin/env python3
"""
rdbn Benchmarks

Measures hill-climbing accuracy against exhaustive enumeration, search
time on the study-shaped network, and bootstrap throughput per worker count.
"""

import time
from typing import List, Tuple

import numpy as np

from rdbn.bootstrap import bootstrap_strength
from rdbn.config import BootstrapConfig, SearchConfig
from rdbn.search import constraints_for_columns, hill_climb
from rdbn.synthetic import enumerate_dags, generate_from_network, random_network, study_mimic_scenario


def benchmark_hit_rate(n_graphs: int, n_rows: int, n_nodes: int, restarts: int) -> Tuple[float, float]:
    """Share of random truths where the climb reaches the enumerated optimum."""
    labels = [chr(ord("a") + i) for i in range(n_nodes)]
    hits = 0
    gaps: List[float] = []
    start = time.perf_counter()
    for g in range(n_graphs):
        truth = random_network(labels, seed=g)
        data = generate_from_network(truth, n_rows, seed=1000 + g)
        best = enumerate_dags(data)
        found = hill_climb(data, config=SearchConfig(restarts=restarts, seed=g))
        gap = best.score - found.score
        gaps.append(gap)
        if gap <= 1e-6:
            hits += 1
    elapsed = time.perf_counter() - start

    rate = hits / n_graphs
    print(
        f"[{n_nodes} nodes, restarts={restarts}] optimum reached {hits}/{n_graphs} "
        f"({rate * 100:.1f}%), worst BIC gap {max(gaps):.4f}, {elapsed:.2f}s"
    )
    return rate, max(gaps)


def benchmark_study_search(n_rows: int, restarts: int) -> float:
    """Wall time of one constrained search over Y and 18 yearly predictors."""
    spec = study_mimic_scenario(n=n_rows)
    data = generate_from_network(spec.truth, n_rows, seed=7)
    constraints = constraints_for_columns(data.columns)

    start = time.perf_counter()
    result = hill_climb(data, constraints, SearchConfig(restarts=restarts, seed=1))
    elapsed = time.perf_counter() - start

    print(
        f"[study-mimic n={n_rows}, restarts={restarts}] {len(result.dag.edges)} edges, "
        f"{len(result.trace)} moves, {elapsed:.3f}s"
    )
    return elapsed


def benchmark_bootstrap(n_rows: int, replicates: int, jobs: int) -> float:
    """Replicates per second of the bootstrap on the study-shaped network."""
    spec = study_mimic_scenario(n=n_rows)
    data = generate_from_network(spec.truth, n_rows, seed=11)
    config = BootstrapConfig(replicates=replicates, seed=0, jobs=jobs)

    start = time.perf_counter()
    bootstrap_strength(data, constraints_for_columns(data.columns), config)
    elapsed = time.perf_counter() - start

    throughput = replicates / elapsed
    print(f"[bootstrap R={replicates}, jobs={jobs}] {elapsed:.3f}s ({throughput:.1f} replicates/s)")
    return throughput


def run_benchmarks():
    """Run all benchmarks."""
    print("=" * 60)
    print("rdbn Benchmark Suite")
    print("=" * 60)

    print("\n--- Hill-climb vs exhaustive enumeration ---")
    for n_nodes in (3, 4):
        for restarts in (0, 5):
            benchmark_hit_rate(n_graphs=20, n_rows=200, n_nodes=n_nodes, restarts=restarts)

    print("\n--- Constrained search on the study-shaped network ---")
    for n_rows in (57, 200):
        benchmark_study_search(n_rows, restarts=10)

    print("\n--- Bootstrap throughput ---")
    serial = benchmark_bootstrap(57, replicates=40, jobs=1)
    parallel = benchmark_bootstrap(57, replicates=40, jobs=4)
    print(f"4-worker speedup: {parallel / serial:.2f}x")

    print("\n" + "=" * 60)
    print("Benchmarks complete")
    print("=" * 60)


if __name__ == "__main__":
    np.seterr(all="ignore")
    run_benchmarks()
