"""Observable post-processing: phases, stroboscopic sampling, branch labels,
limit-cycle statistics and the synchronization order parameter.

Phase conventions
-----------------
* Mechanical quadratures: q = <b + b'>, p = i <b - b'>.  With this sign the
  oscillator phase psi = atan2(p, q) advances at +omega_m under free
  evolution, the same sense as the reference drive phase Omega t, so a
  locked limit cycle sits on the diagonal of a phase-versus-phase plot.
* Qubit phases: phi = atan2(<sy>, <sz>) and theta = atan2(<sy>, <sx> sin phi);
  the rotated-basis variants swap components accordingly.  atan2 is used
  throughout because a two-quadrant arctangent cannot separate antipodal
  phases.
* All phases are reported in (-pi, pi] except the drive phase in [0, 2 pi).
  Samples where a phase is ill-conditioned are flagged, never NaN.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GOLDEN_FRACTION",
    "PhaseSeries",
    "PhaseRecord",
    "BranchLabeling",
    "DwellInterval",
    "LimitCycleStats",
    "quadratures",
    "qubit_phases",
    "rotated_qubit_phases",
    "mech_phase",
    "drive_phase",
    "phase_record",
    "golden_target_times",
    "stroboscopic_sample",
    "classify_branches",
    "sync_order",
    "limit_cycle_stats",
]

GOLDEN_FRACTION = (math.sqrt(5.0) - 1.0) / 2.0

BRANCH_NAMES = {1: "blue", -1: "red", 0: "transit"}
BRANCH_CODES = {name: code for code, name in BRANCH_NAMES.items()}

_COMPONENT_TOL = 1e-9


@dataclass(frozen=True)
class PhaseSeries:
    """Phase values plus a per-sample validity flag (no NaN placeholders)."""

    values: np.ndarray
    defined: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.defined.shape:
            raise ValueError("phase values and flags must share a shape")


@dataclass(frozen=True)
class PhaseRecord:
    times: np.ndarray
    phi: PhaseSeries
    theta: PhaseSeries
    psi: PhaseSeries
    drive_phase: np.ndarray


@dataclass(frozen=True)
class DwellInterval:
    t_start: float
    t_end: float
    label: str
    i_start: int
    i_end: int

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class BranchLabeling:
    """Hysteresis labels (+1 blue, -1 red, 0 transit) and the dwell intervals."""

    labels: np.ndarray
    dwell_intervals: list[DwellInterval]
    threshold: float
    min_dwell: float

    def names(self) -> list[str]:
        return [BRANCH_NAMES[int(v)] for v in self.labels]

    def intervals(self, label: str) -> list[DwellInterval]:
        return [iv for iv in self.dwell_intervals if iv.label == label]


@dataclass(frozen=True)
class LimitCycleStats:
    mean_radius: float
    radial_spread: float
    centroid: tuple[float, float]
    n_samples: int
    per_branch: dict | None = None


def _wrap_half_open(values: np.ndarray) -> np.ndarray:
    """Map atan2 output onto (-pi, pi] (atan2 itself returns [-pi, pi])."""
    out = np.array(values, dtype=np.float64, copy=True)
    out[out <= -np.pi] = np.pi
    return out


def quadratures(b_expect) -> tuple[np.ndarray, np.ndarray]:
    """(q, p) from the mechanical coherence <b>; see the module phase notes."""
    if hasattr(b_expect, "expectations"):
        b_expect = b_expect.expectations["b"]
    b = np.asarray(b_expect, dtype=np.complex128)
    return 2.0 * b.real, -2.0 * b.imag


def qubit_phases(bloch: np.ndarray) -> tuple[PhaseSeries, PhaseSeries]:
    """Azimuth phi and secondary phase theta from (<sx>, <sy>, <sz>) rows.

    theta divides by <sx> sin(phi), so samples with |sin phi| or |<sx>|
    below 1e-9 are flagged undefined rather than reported.
    """
    bloch = np.asarray(bloch, dtype=np.float64)
    sx, sy, sz = bloch[:, 0], bloch[:, 1], bloch[:, 2]
    phi = _wrap_half_open(np.arctan2(sy, sz))
    phi_ok = ~((sy == 0.0) & (sz == 0.0))
    sin_phi = np.sin(phi)
    theta_ok = phi_ok & (np.abs(sin_phi) >= _COMPONENT_TOL) & (np.abs(sx) >= _COMPONENT_TOL)
    theta = np.zeros_like(phi)
    np.arctan2(sy, sx * sin_phi, out=theta, where=theta_ok)
    theta = _wrap_half_open(np.where(theta_ok, theta, 0.0))
    return PhaseSeries(phi, phi_ok), PhaseSeries(theta, theta_ok)


def rotated_qubit_phases(bloch_primed: np.ndarray) -> tuple[PhaseSeries, PhaseSeries]:
    """Qubit-eigenbasis variant: phi' = atan2(<sy'>, <sx'>), theta' over <sz'> sin(phi')."""
    bloch = np.asarray(bloch_primed, dtype=np.float64)
    sx, sy, sz = bloch[:, 0], bloch[:, 1], bloch[:, 2]
    phi = _wrap_half_open(np.arctan2(sy, sx))
    phi_ok = ~((sy == 0.0) & (sx == 0.0))
    sin_phi = np.sin(phi)
    theta_ok = phi_ok & (np.abs(sin_phi) >= _COMPONENT_TOL) & (np.abs(sz) >= _COMPONENT_TOL)
    theta = np.zeros_like(phi)
    np.arctan2(sy, sz * sin_phi, out=theta, where=theta_ok)
    theta = _wrap_half_open(np.where(theta_ok, theta, 0.0))
    return PhaseSeries(phi, phi_ok), PhaseSeries(theta, theta_ok)


def mech_phase(q: np.ndarray, p: np.ndarray) -> PhaseSeries:
    """psi = atan2(p, q); the origin carries no phase and is flagged."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    psi = _wrap_half_open(np.arctan2(p, q))
    return PhaseSeries(psi, ~((q == 0.0) & (p == 0.0)))


def drive_phase(times: np.ndarray, omega: float) -> np.ndarray:
    """(omega * t) mod 2 pi in [0, 2 pi)."""
    if not math.isfinite(omega):
        raise ValueError(f"drive frequency must be finite, got {omega}")
    return np.mod(omega * np.asarray(times, dtype=np.float64), 2.0 * np.pi)


def phase_record(record, omega: float, rotated: bool = False) -> PhaseRecord:
    """Bundle every phase series for a record carrying bloch and quadratures."""
    if record.bloch is None or record.quadratures is None:
        raise ValueError("phase_record needs bloch and quadrature series")
    extractor = rotated_qubit_phases if rotated else qubit_phases
    phi, theta = extractor(record.bloch)
    psi = mech_phase(record.quadratures[:, 0], record.quadratures[:, 1])
    return PhaseRecord(
        times=record.times,
        phi=phi,
        theta=theta,
        psi=psi,
        drive_phase=drive_phase(record.times, omega),
    )


# ---------------------------------------------------------------------------
# Stroboscopic sampling.
# ---------------------------------------------------------------------------


def golden_target_times(omega: float, t_max: float, t_start: float = 0.0) -> np.ndarray:
    """t_n = t_start + n (2 pi / omega) g with g the golden-ratio fraction.

    Successive drive phases 2 pi n g (mod 2 pi) never repeat, so the samples
    probe incommensurate moments of the drive cycle.
    """
    if omega == 0.0:
        raise ValueError("golden-ratio sampling requires a nonzero drive frequency")
    spacing = (2.0 * np.pi / abs(omega)) * GOLDEN_FRACTION
    n = int(math.floor((t_max - t_start) / spacing + 1e-12)) + 1
    return t_start + spacing * np.arange(max(n, 0))


def _take_record(record, idx: np.ndarray):
    """Slice every series field of a record dataclass along the sample axis."""
    n = record.times.shape[0]
    updates = {}
    for f in dataclasses.fields(record):
        value = getattr(record, f.name)
        if isinstance(value, np.ndarray) and value.shape[:1] == (n,):
            updates[f.name] = value[idx]
        elif isinstance(value, dict):
            updates[f.name] = {
                k: (v[idx] if isinstance(v, np.ndarray) and v.shape[:1] == (n,) else v)
                for k, v in value.items()
            }
    return dataclasses.replace(record, **updates)


def stroboscopic_sample(record, omega: float, rule: str = "golden_strobe"):
    """Select record samples nearest the golden-ratio drive moments.

    ``rule="uniform"`` returns the record unchanged.  The output sampling
    must resolve the strobe spacing, otherwise selections would collide.
    """
    if rule == "uniform":
        return record
    if rule != "golden_strobe":
        raise ValueError(f"unknown sampling rule {rule!r}")
    times = record.times
    if times.size < 2:
        return record
    targets = golden_target_times(omega, float(times[-1]), float(times[0]))
    dt = float(np.median(np.diff(times)))
    spacing = (2.0 * np.pi / abs(omega)) * GOLDEN_FRACTION
    if spacing < 2.0 * dt:
        raise ValueError(
            f"output interval {dt:.4g} too coarse for strobe spacing {spacing:.4g}"
        )
    pos = np.searchsorted(times, targets)
    pos = np.clip(pos, 1, times.size - 1)
    left = times[pos - 1]
    right = times[pos]
    idx = np.where(np.abs(targets - left) <= np.abs(right - targets), pos - 1, pos)
    return _take_record(record, idx)


# ---------------------------------------------------------------------------
# Branch classification.
# ---------------------------------------------------------------------------


def classify_branches(
    times: np.ndarray,
    sigma_x: np.ndarray,
    threshold: float = 0.1,
    min_dwell: float | None = None,
) -> BranchLabeling:
    """Hysteresis classifier over <sx>: blue above +threshold, red below
    -threshold, previous label in between; runs shorter than min_dwell are
    relabeled transit.  min_dwell defaults to ten mechanical periods at
    omega_m = 1.
    """
    times = np.asarray(times, dtype=np.float64)
    sigma_x = np.asarray(sigma_x, dtype=np.float64)
    if sigma_x.size == 0:
        raise ValueError("cannot classify an empty series")
    if sigma_x.shape != times.shape:
        raise ValueError("times and series must have matching shapes")
    if min_dwell is None:
        min_dwell = 10.0 * 2.0 * np.pi

    labels = np.zeros(sigma_x.size, dtype=np.int8)
    current = 0
    for i, x in enumerate(sigma_x):
        if x > threshold:
            current = 1
        elif x < -threshold:
            current = -1
        labels[i] = current

    runs = _runs(labels)
    for start, end, label in runs:
        if label != 0 and times[end] - times[start] < min_dwell:
            labels[start : end + 1] = 0

    intervals = [
        DwellInterval(float(times[s]), float(times[e]), BRANCH_NAMES[label], s, e)
        for s, e, label in _runs(labels)
        if label != 0
    ]
    return BranchLabeling(labels=labels, dwell_intervals=intervals,
                          threshold=threshold, min_dwell=float(min_dwell))


def _runs(labels: np.ndarray) -> list[tuple[int, int, int]]:
    """Maximal constant-label runs as (first_index, last_index, label)."""
    out = []
    start = 0
    for i in range(1, labels.size + 1):
        if i == labels.size or labels[i] != labels[start]:
            out.append((start, i - 1, int(labels[start])))
            start = i
    return out


# ---------------------------------------------------------------------------
# Synchronization and limit-cycle statistics.
# ---------------------------------------------------------------------------


def _series(phase) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(phase, PhaseSeries):
        return phase.values, phase.defined
    values = np.asarray(phase, dtype=np.float64)
    return values, np.ones(values.shape, dtype=bool)


def sync_order(phase_a, phase_b) -> float:
    """|mean exp(i (phase_a - phase_b))| over pairwise-defined samples.

    1 means perfect locking (any constant offset), 0 a uniform drift.
    """
    a, a_ok = _series(phase_a)
    b, b_ok = _series(phase_b)
    if a.shape != b.shape:
        raise ValueError("phase series must have matching lengths")
    ok = a_ok & b_ok
    if int(ok.sum()) < 2:
        raise ValueError("sync_order needs at least 2 pairwise-defined samples")
    return float(np.abs(np.mean(np.exp(1j * (a[ok] - b[ok])))))


def limit_cycle_stats(
    q: np.ndarray,
    p: np.ndarray,
    labeling: BranchLabeling | None = None,
    min_samples: int = 10,
) -> LimitCycleStats:
    """Centroid-subtracted radius statistics of the (q, p) cloud."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if q.shape != p.shape:
        raise ValueError("q and p must have matching shapes")
    if q.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {q.size}")

    def _stats(qs, ps):
        cq, cp = float(qs.mean()), float(ps.mean())
        radii = np.hypot(qs - cq, ps - cp)
        return float(radii.mean()), float(radii.std()), (cq, cp), qs.size

    mean_r, spread, centroid, n = _stats(q, p)
    per_branch = None
    if labeling is not None:
        if labeling.labels.shape != q.shape:
            raise ValueError("labeling does not match the sample count")
        per_branch = {}
        for code, name in ((1, "blue"), (-1, "red")):
            mask = labeling.labels == code
            if int(mask.sum()) >= min_samples:
                br, bs, bc, bn = _stats(q[mask], p[mask])
                per_branch[name] = LimitCycleStats(br, bs, bc, bn)
    return LimitCycleStats(mean_r, spread, centroid, n, per_branch)
