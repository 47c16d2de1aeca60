"""Time evolution: master equation, quantum trajectories, seeded ensembles.

Both solvers run on one adaptive Dormand-Prince segment integrator supplied
by the active kernel backend.  The master equation is integrated on the
vectorized density matrix (the Liouvillian is assembled once as a sparse
superoperator); trajectories integrate the state vector under the
non-Hermitian effective Hamiltonian and apply collapse jumps.

Trajectory algorithm: draw r uniform in (0, 1]; evolve until the squared
norm of the unnormalized state crosses r; locate the crossing by bisection;
pick a collapse channel with probability proportional to <c'c>; apply it,
renormalize, redraw r and continue.  Observables are always taken on a
normalized copy at the output times.

Randomness: one counter-based Philox stream per trajectory, keyed by the
trajectory seed.  Draw order is fixed (r, then per jump: channel, next r),
so a record is bitwise reproducible from its seed alone, independent of how
many workers run the ensemble.  Ensemble reduction happens in ascending
seed order after all trajectories finish.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from . import analysis, kernels
from .linalg import DensityMatrix, DimensionError, PureState, SpaceConfig, SparseOperator, kron
from .model import (
    ModelParams,
    TimeDependentHamiltonian,
    build_total_hamiltonian,
    collapse_channels,
    initial_state,
    standard_observables,
)

__all__ = [
    "SolverError",
    "EnsembleError",
    "TimeGrid",
    "ObservableRecord",
    "TrajectoryRecord",
    "MasterRecord",
    "EnsembleRecord",
    "TruncationReport",
    "effective_hamiltonian",
    "evolve_master",
    "evolve_trajectory",
    "schroedinger_reference",
    "run_trajectories",
    "run_ensemble",
    "validate_truncation",
]

THREADS_ENV_VAR = "OEM_SYNC_THREADS"

_STATUS_REACHED = 0
_STATUS_JUMP = 1
_STATUS_UNDERFLOW = 2


class SolverError(RuntimeError):
    pass


class EnsembleError(SolverError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Output sampling grid and integrator tolerances (time unit 1/omega_m)."""

    t_end: float
    dt_out: float
    t_start: float = 0.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf

    def __post_init__(self) -> None:
        if not (self.t_end >= self.t_start):
            raise ValueError(f"t_end {self.t_end} must be >= t_start {self.t_start}")
        if not (self.dt_out > 0):
            raise ValueError(f"dt_out must be > 0, got {self.dt_out}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("integrator tolerances must be > 0")
        if not (self.max_step > 0):
            raise ValueError(f"max_step must be > 0, got {self.max_step}")

    def times(self) -> np.ndarray:
        n = int(math.floor((self.t_end - self.t_start) / self.dt_out + 1e-9)) + 1
        return self.t_start + self.dt_out * np.arange(n)


@dataclass
class ObservableRecord:
    """Named expectation-value series sampled on the output grid."""

    times: np.ndarray
    expectations: dict[str, np.ndarray]
    bloch: np.ndarray | None = None
    quadratures: np.ndarray | None = None
    cavity: np.ndarray | None = None
    mech_occupation: np.ndarray | None = None


@dataclass
class TrajectoryRecord(ObservableRecord):
    seed: int = 0
    jumps: list[tuple[float, str]] = field(default_factory=list)
    branch: np.ndarray | None = None


@dataclass
class MasterRecord(ObservableRecord):
    states: list[DensityMatrix] | None = None


@dataclass
class EnsembleRecord:
    """Seed-ordered arithmetic means and standard errors over trajectories."""

    n_traj: int
    seeds: np.ndarray
    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]

    def mean_record(self) -> ObservableRecord:
        rec = ObservableRecord(times=self.times, expectations=dict(self.mean))
        _derive_standard_fields(rec)
        return rec


def _derive_standard_fields(rec: ObservableRecord) -> None:
    e = rec.expectations
    if all(k in e for k in ("sx", "sy", "sz")):
        rec.bloch = np.stack([e["sx"].real, e["sy"].real, e["sz"].real], axis=1)
    if "b" in e:
        q, p = analysis.quadratures(e["b"])
        rec.quadratures = np.stack([q, p], axis=1)
    if "a" in e and "n_cav" in e:
        rec.cavity = np.stack([e["a"].real, e["a"].imag, e["n_cav"].real], axis=1)
    if "n_mech" in e:
        rec.mech_occupation = e["n_mech"].real


# ---------------------------------------------------------------------------
# Problem packing: operators to raw CSR arrays in generator form.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Pack:
    """y' = G y with G = static + sum_k amp_k exp(i freq_k t) term_k."""

    dim: int
    gd: np.ndarray
    gi: np.ndarray
    gp: np.ndarray
    dd: np.ndarray
    di: np.ndarray
    dp2: np.ndarray
    damp: np.ndarray
    dfreq: np.ndarray


def _pack_generator(static: SparseOperator, drive_terms) -> _Pack:
    dim = static.dim
    gd, gi, gp = static.csr()
    n_drv = len(drive_terms)
    dp2 = np.zeros((n_drv, dim + 1), dtype=np.int64)
    dd_parts, di_parts = [], []
    damp = np.zeros(n_drv, dtype=np.complex128)
    dfreq = np.zeros(n_drv, dtype=np.float64)
    offset = 0
    for k, (op, amp, freq) in enumerate(drive_terms):
        if op.dim != dim:
            raise DimensionError("drive term dimension differs from static generator")
        data, indices, indptr = op.csr()
        dp2[k] = indptr + offset
        dd_parts.append(data)
        di_parts.append(indices)
        damp[k] = amp
        dfreq[k] = freq
        offset += data.size
    dd = np.concatenate(dd_parts) if dd_parts else np.empty(0, dtype=np.complex128)
    di = np.concatenate(di_parts) if di_parts else np.empty(0, dtype=np.int64)
    return _Pack(dim, gd, gi, gp, dd, di, dp2, damp, dfreq)


def effective_hamiltonian(
    h: TimeDependentHamiltonian, c_ops: list[SparseOperator]
) -> TimeDependentHamiltonian:
    """H_eff = H - (i/2) sum_k c_k' c_k (non-Hermitian by design)."""
    static = h.static
    for c in c_ops:
        static = static + (-0.5j) * (c.dagger() @ c)
    return TimeDependentHamiltonian(static, h.pairs)


def _trajectory_pack(h: TimeDependentHamiltonian, c_ops: list[SparseOperator]) -> _Pack:
    heff = effective_hamiltonian(h, c_ops)
    generator = (-1j) * heff.static
    drives = [(pair.op, -1j * pair.coefficient.amplitude, pair.coefficient.frequency) for pair in h.pairs]
    return _pack_generator(generator, drives)


def _super_commutator(op: SparseOperator) -> SparseOperator:
    ident = SparseOperator.identity(op.dim)
    return kron(op, ident) - kron(ident, op.transpose())


def _master_pack(h: TimeDependentHamiltonian, c_ops: list[SparseOperator]) -> _Pack:
    """Liouvillian on vec(rho) in row-major convention: vec(A rho B) = (A x B^T) vec(rho)."""
    dim = h.dim
    ident = SparseOperator.identity(dim)
    liouvillian = (-1j) * _super_commutator(h.static)
    for c in c_ops:
        cdc = c.dagger() @ c
        liouvillian = liouvillian + kron(c, c.conj())
        liouvillian = liouvillian + (-0.5) * kron(cdc, ident)
        liouvillian = liouvillian + (-0.5) * kron(ident, cdc.transpose())
    drives = [
        (_super_commutator(pair.op), -1j * pair.coefficient.amplitude, pair.coefficient.frequency)
        for pair in h.pairs
    ]
    return _pack_generator(liouvillian, drives)


def _resolve_observables(observables, space):
    if observables is not None:
        return list(observables.items()) if isinstance(observables, dict) else list(observables)
    if space is not None:
        return standard_observables(space)
    return []


# ---------------------------------------------------------------------------
# Drivers.
# ---------------------------------------------------------------------------


def _run_mcwf(pack: _Pack, c_ops, psi0, grid: TimeGrid, seed: int, obs_items, channel_names):
    backend = kernels.active()
    times = grid.times()
    n_obs = len(obs_items)
    values = np.zeros((times.size, n_obs), dtype=np.complex128)
    jumps: list[tuple[float, int]] = []

    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    r = 1.0 - rng.random()

    y = psi0.astype(np.complex128, copy=True)
    ops = [op for _, op in obs_items]

    def observe(idx: int) -> None:
        norm = math.sqrt(float(np.vdot(y, y).real))
        if norm == 0.0:
            raise SolverError(f"state vanished at t={times[idx]:.6g} (seed {seed})")
        yn = y / norm
        for j, op in enumerate(ops):
            values[idx, j] = np.vdot(yn, op.matvec(yn))

    observe(0)
    t = float(times[0])
    h = 1e-4
    for idx in range(1, times.size):
        target = float(times[idx])
        while True:
            status, t, y, h, _ = backend.integrate_segment(
                t, target, y, r, h,
                pack.gd, pack.gi, pack.gp,
                pack.dd, pack.di, pack.dp2, pack.damp, pack.dfreq,
                grid.rel_tol, grid.abs_tol, grid.max_step,
            )
            if status == _STATUS_REACHED:
                break
            if status == _STATUS_UNDERFLOW:
                raise SolverError(
                    f"integrator step size underflow at t={t:.6g} (seed {seed}); "
                    "the problem may be too stiff for the requested tolerances"
                )
            # Quantum jump: pick the channel with probability ~ <c'c>.
            candidates = [c.matvec(y) for c in c_ops]
            weights = np.array([float(np.vdot(cy, cy).real) for cy in candidates])
            total = float(weights.sum())
            if total <= 0.0 or not math.isfinite(total):
                raise SolverError(f"no collapse channel available at t={t:.6g} (seed {seed})")
            u = rng.random()
            channel = int(np.searchsorted(np.cumsum(weights) / total, u, side="right"))
            channel = min(channel, len(c_ops) - 1)
            y = candidates[channel] / math.sqrt(weights[channel])
            jumps.append((t, channel))
            r = 1.0 - rng.random()
        observe(idx)
    named_jumps = [(tj, channel_names[c]) for tj, c in jumps]
    return times, values, named_jumps


def evolve_trajectory(
    h: TimeDependentHamiltonian,
    c_ops: list[SparseOperator],
    psi0: PureState,
    grid: TimeGrid,
    seed: int,
    *,
    observables=None,
    space: SpaceConfig | None = None,
    channel_names: list[str] | None = None,
) -> TrajectoryRecord:
    """One stochastic unraveling run; bitwise reproducible from its seed."""
    psi0.validate(normalized=True)
    if psi0.dim != h.dim:
        raise DimensionError(f"state dim {psi0.dim} vs Hamiltonian dim {h.dim}")
    obs_items = _resolve_observables(observables, space)
    names = channel_names if channel_names is not None else [f"c{k}" for k in range(len(c_ops))]
    if len(names) != len(c_ops):
        raise ValueError("channel_names must match c_ops in length")
    kernels.ensure_ready()
    pack = _trajectory_pack(h, c_ops)
    times, values, jumps = _run_mcwf(pack, c_ops, psi0.amplitudes, grid, seed, obs_items, names)
    rec = TrajectoryRecord(
        times=times,
        expectations={name: values[:, j].copy() for j, (name, _) in enumerate(obs_items)},
        seed=seed,
        jumps=jumps,
    )
    _derive_standard_fields(rec)
    return rec


def evolve_master(
    h: TimeDependentHamiltonian,
    c_ops: list[SparseOperator],
    rho0,
    grid: TimeGrid,
    *,
    observables=None,
    space: SpaceConfig | None = None,
    store_states: bool = False,
) -> MasterRecord:
    """Deterministic Lindblad integration on the vectorized density matrix."""
    if isinstance(rho0, PureState):
        rho0 = DensityMatrix.from_pure(rho0)
    if rho0.dim != h.dim:
        raise DimensionError(f"state dim {rho0.dim} vs Hamiltonian dim {h.dim}")
    obs_items = _resolve_observables(observables, space)
    kernels.ensure_ready()
    pack = _master_pack(h, c_ops)
    backend = kernels.active()

    dim = h.dim
    times = grid.times()
    values = np.zeros((times.size, len(obs_items)), dtype=np.complex128)
    states: list[DensityMatrix] | None = [] if store_states else None

    y = rho0.matrix.reshape(dim * dim).astype(np.complex128, copy=True)

    def observe(idx: int) -> None:
        rho = y.reshape(dim, dim)
        for j, (_, op) in enumerate(obs_items):
            values[idx, j] = np.sum(op.data * rho[op.cols, op.rows]) if op.nnz else 0.0
        if states is not None:
            states.append(DensityMatrix(rho.copy()))

    observe(0)
    t = float(times[0])
    h_step = 1e-4
    for idx in range(1, times.size):
        status, t, y, h_step, _ = backend.integrate_segment(
            t, float(times[idx]), y, 0.0, h_step,
            pack.gd, pack.gi, pack.gp,
            pack.dd, pack.di, pack.dp2, pack.damp, pack.dfreq,
            grid.rel_tol, grid.abs_tol, grid.max_step,
        )
        if status == _STATUS_UNDERFLOW:
            raise SolverError(
                f"master-equation step size underflow at t={t:.6g}; "
                "the problem may be too stiff for the requested tolerances"
            )
        observe(idx)
    rec = MasterRecord(
        times=times,
        expectations={name: values[:, j].copy() for j, (name, _) in enumerate(obs_items)},
        states=states,
    )
    _derive_standard_fields(rec)
    return rec


def schroedinger_reference(
    h: TimeDependentHamiltonian | SparseOperator,
    psi0: PureState,
    grid: TimeGrid,
    *,
    observables=None,
    space: SpaceConfig | None = None,
) -> ObservableRecord:
    """Closed-system oracle via dense eigendecomposition; exact per sample.

    Only static Hamiltonians are supported: the propagator is
    V exp(-i E (t - t0)) V' applied directly at every output time, so this
    path shares nothing with the step-based integrators it cross-checks.
    """
    if isinstance(h, TimeDependentHamiltonian):
        if h.pairs:
            raise SolverError("schroedinger_reference handles static Hamiltonians only")
        static = h.static
    else:
        static = h
    if static.hermiticity_defect() > 1e-9:
        raise SolverError("schroedinger_reference requires a Hermitian generator")
    psi0.validate(normalized=True)
    obs_items = _resolve_observables(observables, space)

    dense = static.to_dense()
    energies, basis = np.linalg.eigh(dense)
    coeffs = basis.conj().T @ psi0.amplitudes

    times = grid.times()
    values = np.zeros((times.size, len(obs_items)), dtype=np.complex128)
    for idx, t in enumerate(times):
        psi_t = basis @ (np.exp(-1j * energies * (t - times[0])) * coeffs)
        for j, (_, op) in enumerate(obs_items):
            values[idx, j] = np.vdot(psi_t, op.matvec(psi_t))
    rec = ObservableRecord(
        times=times,
        expectations={name: values[:, j].copy() for j, (name, _) in enumerate(obs_items)},
    )
    _derive_standard_fields(rec)
    return rec


# ---------------------------------------------------------------------------
# Ensembles.
# ---------------------------------------------------------------------------

_TASK_CONTEXT: dict | None = None


def _trajectory_task(seed: int):
    ctx = _TASK_CONTEXT
    times, values, jumps = _run_mcwf(
        ctx["pack"], ctx["c_ops"], ctx["psi0"], ctx["grid"], seed, ctx["obs"], ctx["channels"]
    )
    return seed, values, jumps


def _resolve_workers(max_workers: int | None, n_tasks: int) -> int:
    if max_workers is None:
        env = os.environ.get(THREADS_ENV_VAR, "").strip()
        if env:
            try:
                max_workers = int(env)
            except ValueError as exc:
                raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}") from exc
        else:
            max_workers = os.cpu_count() or 1
    if max_workers < 1:
        raise ValueError(f"worker count must be >= 1, got {max_workers}")
    return min(max_workers, n_tasks)


def run_trajectories(
    h: TimeDependentHamiltonian,
    c_ops: list[SparseOperator],
    psi0: PureState,
    grid: TimeGrid,
    seeds,
    *,
    observables=None,
    space: SpaceConfig | None = None,
    channel_names: list[str] | None = None,
    max_workers: int | None = None,
) -> list[TrajectoryRecord]:
    """Independent trajectories for the given seeds, parallelized over processes.

    Results are returned in the order of ``seeds`` and are identical to
    running each seed alone, whatever the worker count (OEM_SYNC_THREADS
    caps it).
    """
    global _TASK_CONTEXT
    psi0.validate(normalized=True)
    seeds = [int(s) for s in seeds]
    obs_items = _resolve_observables(observables, space)
    names = channel_names if channel_names is not None else [f"c{k}" for k in range(len(c_ops))]
    if len(names) != len(c_ops):
        raise ValueError("channel_names must match c_ops in length")
    kernels.ensure_ready()
    pack = _trajectory_pack(h, c_ops)
    ctx = {
        "pack": pack,
        "c_ops": list(c_ops),
        "psi0": psi0.amplitudes,
        "grid": grid,
        "obs": obs_items,
        "channels": names,
    }
    workers = _resolve_workers(max_workers, len(seeds))

    payloads: list = []
    if workers == 1:
        _TASK_CONTEXT = ctx
        try:
            for seed in seeds:
                try:
                    payloads.append(_trajectory_task(seed))
                except SolverError as exc:
                    raise EnsembleError(f"trajectory with seed {seed} failed: {exc}") from exc
        finally:
            _TASK_CONTEXT = None
    else:
        _TASK_CONTEXT = ctx
        try:
            chunk = max(1, len(seeds) // (8 * workers))
            with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("fork")) as pool:
                iterator = pool.map(_trajectory_task, seeds, chunksize=chunk)
                payloads.extend(_iter_with_seed(iterator, seeds))
        finally:
            _TASK_CONTEXT = None

    times = grid.times()
    records = []
    for seed, values, jumps in payloads:
        rec = TrajectoryRecord(
            times=times.copy(),
            expectations={name: values[:, j].copy() for j, (name, _) in enumerate(obs_items)},
            seed=seed,
            jumps=jumps,
        )
        _derive_standard_fields(rec)
        records.append(rec)
    return records


def _iter_with_seed(iterator, seeds):
    for seed in seeds:
        try:
            yield next(iterator)
        except StopIteration:
            return
        except Exception as exc:
            raise EnsembleError(f"trajectory with seed {seed} failed: {exc}") from exc


def run_ensemble(
    h: TimeDependentHamiltonian,
    c_ops: list[SparseOperator],
    psi0: PureState,
    grid: TimeGrid,
    n_traj: int,
    base_seed: int,
    *,
    observables=None,
    space: SpaceConfig | None = None,
    channel_names: list[str] | None = None,
    max_workers: int | None = None,
) -> EnsembleRecord:
    """Trajectories for seeds base_seed .. base_seed + n_traj - 1, reduced.

    Means are plain arithmetic averages accumulated in ascending seed order;
    standard errors use the n-1 normalization (zero for a single run).
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    seeds = [base_seed + k for k in range(n_traj)]
    records = run_trajectories(
        h, c_ops, psi0, grid, seeds,
        observables=observables, space=space,
        channel_names=channel_names, max_workers=max_workers,
    )
    order = np.argsort([rec.seed for rec in records], kind="stable")
    records = [records[int(i)] for i in order]

    mean: dict[str, np.ndarray] = {}
    stderr: dict[str, np.ndarray] = {}
    names = list(records[0].expectations.keys())
    for name in names:
        stack = np.stack([rec.expectations[name] for rec in records], axis=0)
        mean[name] = stack.mean(axis=0)
        if n_traj > 1:
            se_re = np.std(stack.real, axis=0, ddof=1) / math.sqrt(n_traj)
            se_im = np.std(stack.imag, axis=0, ddof=1) / math.sqrt(n_traj)
            stderr[name] = se_re + 1j * se_im if np.any(se_im != 0) else se_re + 0j
        else:
            stderr[name] = np.zeros_like(stack[0])
    return EnsembleRecord(
        n_traj=n_traj,
        seeds=np.array(sorted(seeds), dtype=np.int64),
        times=grid.times(),
        mean=mean,
        stderr=stderr,
    )


# ---------------------------------------------------------------------------
# Truncation convergence.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationReport:
    base_space: SpaceConfig
    test_space: SpaceConfig
    n_traj: int
    time_avg_base: dict[str, float]
    time_avg_test: dict[str, float]
    rel_change: dict[str, float]
    threshold: float
    base_ensemble: EnsembleRecord | None = None

    @property
    def passed(self) -> bool:
        return all(v < self.threshold for v in self.rel_change.values())


def validate_truncation(
    params: ModelParams,
    space: SpaceConfig,
    grid: TimeGrid,
    n_traj: int,
    base_seed: int,
    *,
    qubit_amplitudes=(1.0, 1.0),
    factor: int = 2,
    threshold: float = 0.05,
    max_workers: int | None = None,
) -> TruncationReport:
    """Double both Fock truncations and compare time-averaged occupations.

    A small seeded ensemble is run at the base and doubled truncations; the
    report carries the relative change of the time-averaged mechanical and
    cavity occupations (absolute values, doubled run as reference).
    """
    if space.n_cav < 2:
        raise DimensionError("truncation validation needs the full model (n_cav >= 2)")
    test_space = SpaceConfig(n_mech=space.n_mech * factor, n_cav=space.n_cav * factor)

    def _averages(s: SpaceConfig) -> tuple[dict[str, float], EnsembleRecord]:
        h = build_total_hamiltonian(params, s)
        channels = collapse_channels(params, s)
        psi0 = initial_state(s, qubit_amplitudes)
        ens = run_ensemble(
            h, [op for _, op in channels], psi0, grid, n_traj, base_seed,
            space=s, channel_names=[name for name, _ in channels], max_workers=max_workers,
        )
        averages = {
            "n_mech": float(ens.mean["n_mech"].real.mean()),
            "n_cav": float(ens.mean["n_cav"].real.mean()),
        }
        return averages, ens

    avg_base, base_ens = _averages(space)
    avg_test, _ = _averages(test_space)
    rel = {
        key: abs(avg_test[key] - avg_base[key]) / max(abs(avg_test[key]), 1e-12)
        for key in avg_base
    }
    return TruncationReport(
        base_space=space,
        test_space=test_space,
        n_traj=n_traj,
        time_avg_base=avg_base,
        time_avg_test=avg_test,
        rel_change=rel,
        threshold=threshold,
        base_ensemble=base_ens,
    )
