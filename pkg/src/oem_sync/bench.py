"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the same seeded trajectory workload (reference parameter set, full
model) once per available backend and reports wall time plus the largest
observable deviation between the two results.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels, model, solvers
from .linalg import SpaceConfig

__all__ = ["BenchResult", "run_benchmark", "format_benchmark"]


@dataclass
class BenchResult:
    n_mech: int
    n_cav: int
    t_max: float
    seed: int
    seconds: dict[str, float]
    max_deviation: float | None

    @property
    def speedup(self) -> float | None:
        if "numba" in self.seconds and "numpy" in self.seconds:
            return self.seconds["numpy"] / self.seconds["numba"]
        return None


def _workload(backend_name: str, space, params, grid, seed: int):
    hamiltonian = model.build_total_hamiltonian(params, space)
    channels = model.collapse_channels(params, space)
    psi0 = model.initial_state(space)
    with kernels.use_backend(backend_name):
        kernels.ensure_ready()
        start = time.perf_counter()
        record = solvers.evolve_trajectory(
            hamiltonian, [op for _, op in channels], psi0, grid, seed,
            space=space, channel_names=[name for name, _ in channels],
        )
        elapsed = time.perf_counter() - start
    return elapsed, record


def run_benchmark(n_mech: int = 10, n_cav: int = 6, t_max: float = 20.0, seed: int = 7) -> BenchResult:
    space = SpaceConfig(n_mech=n_mech, n_cav=n_cav)
    params = model.ModelParams.paper_fig2()
    grid = solvers.TimeGrid(t_end=t_max, dt_out=0.1, rel_tol=1e-8, abs_tol=1e-10)

    seconds: dict[str, float] = {}
    records: dict[str, object] = {}
    for name in ("numba", "numpy"):
        try:
            kernels.load_backend(name)
        except kernels.BackendUnavailable:
            continue
        seconds[name], records[name] = _workload(name, space, params, grid, seed)

    deviation = None
    if len(records) == 2:
        a, b = records["numba"], records["numpy"]
        deviation = 0.0
        for key in a.expectations:
            deviation = max(deviation, float(np.abs(a.expectations[key] - b.expectations[key]).max()))
    return BenchResult(n_mech, n_cav, t_max, seed, seconds, deviation)


def format_benchmark(result: BenchResult) -> str:
    lines = [
        f"benchmark: dims=(2,{result.n_mech},{result.n_cav}) t_max={result.t_max} seed={result.seed}"
    ]
    for name in ("numba", "numpy"):
        if name in result.seconds:
            lines.append(f"  {name:<6} {result.seconds[name]:8.3f} s")
        else:
            lines.append(f"  {name:<6} unavailable")
    if result.speedup is not None:
        lines.append(f"  speedup numba vs numpy: {result.speedup:.2f}x")
    if result.max_deviation is not None:
        lines.append(f"  max observable deviation between backends: {result.max_deviation:.3e}")
    return "\n".join(lines)
