"""Hamiltonians and collapse operators of the hybrid qubit-mechanics-cavity model.

All rates and couplings are angular frequencies in units of the mechanical
frequency, so ``omega_m = 1`` sets the time unit.  In the frame rotating at
the primary laser frequency the static part reads

    H = -(epsilon/2) sz - (E_J/2) sx + g_q (b' + b) sz + omega_m b'b
        - Delta a'a - g_o a'a (b' + b) + i A_lp (a' - a)

with a, b the cavity and mechanical lowering operators (primes denote
adjoints).  A detuned reference drive i A_lr (a' e^{-i Omega t} - h.c.)
enters as a pair of harmonic drive terms.  Cavity decay at rate kappa and
mechanical damping at rate gamma are the only dissipation channels; thermal
occupation and qubit decay are neglected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .linalg import (
    DimensionError,
    PureState,
    SpaceConfig,
    SparseOperator,
    annihilation,
    embed,
    kron3,
    pauli,
    product_state,
)

__all__ = [
    "ModelError",
    "ModelParams",
    "HarmonicCoefficient",
    "DrivePair",
    "TimeDependentHamiltonian",
    "build_static_hamiltonian",
    "build_reference_drive",
    "build_total_hamiltonian",
    "build_rotated_hamiltonian",
    "build_qm_only",
    "collapse_operators",
    "collapse_channels",
    "standard_observables",
    "initial_state",
]


class ModelError(ValueError):
    pass


# Reference parameter set (E_J, g_q, Delta, g_o, A_lp, A_lr, Omega, kappa,
# gamma) in units of omega_m; loadable as the named preset "paper_fig2".
PAPER_FIG2 = {
    "E_J": 1.2,
    "g_q": 0.04,
    "Delta": 1.0,
    "g_o": 0.38,
    "A_lp": 0.6,
    "A_lr": 0.08,
    "Omega": 1.0,
    "kappa": 1.4,
    "gamma": 0.015,
}


@dataclass(frozen=True)
class ModelParams:
    """Physical rates and couplings, all in units of omega_m."""

    E_J: float
    g_q: float
    Delta: float
    g_o: float
    A_lp: float
    A_lr: float
    Omega: float
    kappa: float
    gamma: float
    omega_m: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ModelError(f"{name} must be finite, got {value}")
        if self.omega_m <= 0:
            raise ModelError(f"omega_m must be > 0, got {self.omega_m}")
        for name in ("kappa", "gamma", "A_lp", "A_lr"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def paper_fig2(cls, **overrides) -> "ModelParams":
        values = dict(PAPER_FIG2)
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class HarmonicCoefficient:
    """Scalar drive coefficient amplitude * exp(i frequency t)."""

    amplitude: complex
    frequency: float

    def __call__(self, t: float) -> complex:
        return self.amplitude * complex(np.exp(1j * self.frequency * t))

    def conjugate(self) -> "HarmonicCoefficient":
        return HarmonicCoefficient(np.conj(self.amplitude), -self.frequency)


class DrivePair(NamedTuple):
    op: SparseOperator
    coefficient: HarmonicCoefficient


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """Static operator plus harmonic drive pairs, H(t) = H_0 + sum_k c_k(t) O_k.

    Each pair contributes coefficient(t) * op on its own; Hermiticity of the
    full H(t) comes from pairs appearing in mutually conjugate couples.  The
    solvers never rebuild matrices per step; they evaluate the scalar
    coefficients only.
    """

    static: SparseOperator
    pairs: tuple[DrivePair, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple(self.pairs))
        for pair in self.pairs:
            if pair.op.dim != self.static.dim:
                raise DimensionError("drive operator dimension differs from static part")

    @property
    def dim(self) -> int:
        return self.static.dim

    def evaluate(self, t: float) -> SparseOperator:
        total = self.static
        for op, coeff in self.pairs:
            total = total + coeff(t) * op
        return total

    def hermiticity_defect(self, t: float) -> float:
        return self.evaluate(t).hermiticity_defect()


def _qubit_mech_terms(p: ModelParams, s: SpaceConfig) -> SparseOperator:
    b = annihilation(s.n_mech)
    x_m = b.dagger() + b
    i_cav = SparseOperator.identity(s.n_cav)
    i_mech = SparseOperator.identity(s.n_mech)
    h = (-0.5 * p.E_J) * kron3(pauli("x"), i_mech, i_cav)
    h = h + p.g_q * kron3(pauli("z"), x_m, i_cav)
    h = h + p.omega_m * kron3(SparseOperator.identity(2), b.dagger() @ b, i_cav)
    if p.epsilon != 0.0:
        # Charge bias away from the sweet point; epsilon is a direct input.
        h = h + (-0.5 * p.epsilon) * kron3(pauli("z"), i_mech, i_cav)
    return h


def _cavity_terms(p: ModelParams, s: SpaceConfig) -> SparseOperator:
    a = annihilation(s.n_cav)
    b = annihilation(s.n_mech)
    x_m = b.dagger() + b
    i_q = SparseOperator.identity(2)
    i_mech = SparseOperator.identity(s.n_mech)
    n_a = a.dagger() @ a
    h = (-p.Delta) * kron3(i_q, i_mech, n_a)
    h = h + (-p.g_o) * kron3(i_q, x_m, n_a)
    h = h + (1j * p.A_lp) * (kron3(i_q, i_mech, a.dagger()) - kron3(i_q, i_mech, a))
    return h


def build_static_hamiltonian(p: ModelParams, s: SpaceConfig) -> SparseOperator:
    """Full static part in the frame rotating at the primary laser frequency.

    Requires a real cavity slot (n_cav >= 2); use build_qm_only for the
    reduced model with the cavity factored out.
    """
    if s.n_cav < 2:
        raise DimensionError("build_static_hamiltonian needs n_cav >= 2")
    return _qubit_mech_terms(p, s) + _cavity_terms(p, s)


def build_reference_drive(p: ModelParams, s: SpaceConfig) -> list[DrivePair]:
    """Drive pairs for i A_lr (a' e^{-i Omega t} - a e^{i Omega t}).

    Returns two mutually conjugate pairs; empty when A_lr is zero.
    """
    if p.A_lr == 0.0:
        return []
    if s.n_cav < 2:
        raise DimensionError("reference drive requires a cavity slot (n_cav >= 2)")
    a = annihilation(s.n_cav)
    up = DrivePair(embed(a.dagger(), "cav", s), HarmonicCoefficient(1j * p.A_lr, -p.Omega))
    down = DrivePair(embed(a, "cav", s), HarmonicCoefficient(-1j * p.A_lr, p.Omega))
    return [up, down]


def build_total_hamiltonian(p: ModelParams, s: SpaceConfig) -> TimeDependentHamiltonian:
    return TimeDependentHamiltonian(build_static_hamiltonian(p, s), tuple(build_reference_drive(p, s)))


def build_rotated_hamiltonian(p: ModelParams, s: SpaceConfig) -> SparseOperator:
    """Static Hamiltonian in the qubit energy eigenbasis.

    The qubit part becomes (sqrt(epsilon^2 + E_J^2)/2) sz' and the phonon
    coupling splits into g_q (b'+b)(sx' cos(mix) - sz' sin(mix)) with
    tan(mix) = epsilon / E_J.  Mechanical and cavity terms are unchanged.
    Isospectral to the lab-frame Hamiltonian by construction.
    """
    if p.E_J == 0.0 and p.epsilon == 0.0:
        raise ModelError("mixing angle undefined: E_J and epsilon are both zero")
    level = math.hypot(p.epsilon, p.E_J)
    mix = math.atan2(p.epsilon, p.E_J)
    cos_mix, sin_mix = math.cos(mix), math.sin(mix)

    b = annihilation(s.n_mech)
    x_m = b.dagger() + b
    i_cav = SparseOperator.identity(s.n_cav)
    i_mech = SparseOperator.identity(s.n_mech)
    h = (0.5 * level) * kron3(pauli("z"), i_mech, i_cav)
    h = h + (p.g_q * cos_mix) * kron3(pauli("x"), x_m, i_cav)
    h = h + (-p.g_q * sin_mix) * kron3(pauli("z"), x_m, i_cav)
    h = h + p.omega_m * kron3(SparseOperator.identity(2), b.dagger() @ b, i_cav)
    if s.n_cav >= 2:
        h = h + _cavity_terms(p, s)
    return h


def build_qm_only(
    p: ModelParams,
    s: SpaceConfig,
    mech_drive: tuple[float, float] | None = None,
) -> TimeDependentHamiltonian:
    """Reduced qubit+mechanics model, optionally with a coherent phonon drive.

    The cavity slot may be factored out entirely (n_cav = 1).  The drive
    adds A_m (b' e^{-i W t} + b e^{i W t}) with (A_m, W) = mech_drive,
    defaulting to (A_lr, Omega) so the reduced model keeps a reference phase
    to lock to.  Pass (0.0, 0.0) to disable it.
    """
    static = _qubit_mech_terms(p, s)
    amp, freq = mech_drive if mech_drive is not None else (p.A_lr, p.Omega)
    if amp < 0:
        raise ModelError(f"mechanical drive amplitude must be >= 0, got {amp}")
    pairs: list[DrivePair] = []
    if amp > 0.0:
        b = annihilation(s.n_mech)
        pairs.append(DrivePair(embed(b.dagger(), "mech", s), HarmonicCoefficient(amp, -freq)))
        pairs.append(DrivePair(embed(b, "mech", s), HarmonicCoefficient(amp, freq)))
    return TimeDependentHamiltonian(static, tuple(pairs))


def collapse_channels(p: ModelParams, s: SpaceConfig) -> list[tuple[str, SparseOperator]]:
    """Named collapse operators [(\"cavity\", sqrt(kappa) a), (\"mech\", sqrt(gamma) b)].

    Channels with zero rate are omitted; the cavity channel is also omitted
    when the cavity slot is factored out.
    """
    if p.kappa < 0 or p.gamma < 0:
        raise ModelError("dissipation rates must be non-negative")
    channels: list[tuple[str, SparseOperator]] = []
    if p.kappa > 0 and s.n_cav >= 2:
        channels.append(("cavity", math.sqrt(p.kappa) * embed(annihilation(s.n_cav), "cav", s)))
    if p.gamma > 0:
        channels.append(("mech", math.sqrt(p.gamma) * embed(annihilation(s.n_mech), "mech", s)))
    return channels


def collapse_operators(p: ModelParams, s: SpaceConfig) -> list[SparseOperator]:
    return [op for _, op in collapse_channels(p, s)]


def standard_observables(s: SpaceConfig) -> list[tuple[str, SparseOperator]]:
    """Measurement set recorded by every composite-space run."""
    b = annihilation(s.n_mech)
    obs = [
        ("sx", embed(pauli("x"), "qubit", s)),
        ("sy", embed(pauli("y"), "qubit", s)),
        ("sz", embed(pauli("z"), "qubit", s)),
        ("b", embed(b, "mech", s)),
        ("n_mech", embed(b.dagger() @ b, "mech", s)),
    ]
    if s.n_cav >= 2:
        a = annihilation(s.n_cav)
        obs.append(("a", embed(a, "cav", s)))
        obs.append(("n_cav", embed(a.dagger() @ a, "cav", s)))
    return obs


def initial_state(
    s: SpaceConfig,
    qubit_amplitudes=(1.0, 1.0),
    mech_fock: int = 0,
    cav_fock: int = 0,
) -> PureState:
    """Product state used to start runs; defaults to (|0> + |1>)/sqrt(2) x vacuum.

    The equatorial qubit default makes the precession visible from t = 0.
    """
    return product_state(s, qubit_amplitudes, mech_fock, cav_fock)
