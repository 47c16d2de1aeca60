"""Run configuration: plain key=value text with [section] headers.

Grammar
-------
* UTF-8 text; ``#`` starts a comment anywhere on a line.
* ``[section]`` headers open one of: system, params, initial, run,
  analysis, output.  ``key = value`` lines assign within the open section.
* ``preset = paper_fig2`` is the only sectionless key and loads the
  reference parameter set before any explicit [params] assignment.
* Unknown sections or keys are rejected with their line number, as are
  unparsable numbers and values violating an invariant.

Missing keys take the documented defaults; the fully resolved configuration
is echoed into the header of every output artifact, so a run can be
reproduced from its own CSV alone.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

from .linalg import SpaceConfig
from .model import PAPER_FIG2, ModelParams
from .solvers import TimeGrid

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "PRESETS"]

PRESETS = {"paper_fig2": PAPER_FIG2}

MODES = ("trajectory", "ensemble", "master", "qm_only", "validate")
SAMPLE_RULES = ("uniform", "golden_strobe")
QUBIT_STATES = ("ground", "excited", "plus_x")
SVG_KINDS = (
    "auto",
    "timeseries_sx",
    "timeseries_q",
    "bloch_projection",
    "phase_portrait",
    "phase_vs_phase",
    "ensemble_decay",
)

_CUSTOM_RE = re.compile(r"^custom\((.+)\)$")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RunConfig:
    # [system]
    n_mech: int = 15
    n_cav: int = 10
    # [params]
    E_J: float = PAPER_FIG2["E_J"]
    g_q: float = PAPER_FIG2["g_q"]
    omega_m: float = 1.0
    Delta: float = PAPER_FIG2["Delta"]
    g_o: float = PAPER_FIG2["g_o"]
    A_lp: float = PAPER_FIG2["A_lp"]
    A_lr: float = PAPER_FIG2["A_lr"]
    Omega: float = PAPER_FIG2["Omega"]
    kappa: float = PAPER_FIG2["kappa"]
    gamma: float = PAPER_FIG2["gamma"]
    epsilon: float = 0.0
    # [initial]
    qubit_state: str = "plus_x"
    qubit_amplitudes: tuple[complex, complex] = (1.0 + 0j, 1.0 + 0j)
    mech_fock: int = 0
    cav_fock: int = 0
    # [run]
    mode: str = "trajectory"
    t_max: float = 200.0
    dt_out: float = 0.05
    n_traj: int = 100
    seed: int = 1
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    sample_rule: str = "uniform"
    # [analysis]
    branch_threshold: float = 0.1
    min_dwell: float | None = None
    # [output]
    csv_path: str = "oem_sync_run.csv"
    svg_path: str = ""
    svg_kind: str = "auto"

    # -- resolved views ----------------------------------------------------

    def params(self) -> ModelParams:
        return ModelParams(
            E_J=self.E_J, g_q=self.g_q, Delta=self.Delta, g_o=self.g_o,
            A_lp=self.A_lp, A_lr=self.A_lr, Omega=self.Omega,
            kappa=self.kappa, gamma=self.gamma,
            omega_m=self.omega_m, epsilon=self.epsilon,
        )

    def space(self) -> SpaceConfig:
        if self.mode == "qm_only":
            return SpaceConfig(n_mech=self.n_mech, n_cav=1)
        return SpaceConfig(n_mech=self.n_mech, n_cav=self.n_cav)

    def grid(self) -> TimeGrid:
        return TimeGrid(
            t_end=self.t_max, dt_out=self.dt_out,
            rel_tol=self.rel_tol, abs_tol=self.abs_tol,
        )

    def resolved_min_dwell(self) -> float:
        # Ten mechanical periods unless set explicitly.
        if self.min_dwell is not None:
            return self.min_dwell
        return 10.0 * 2.0 * math.pi / self.omega_m

    def resolved_qubit_amplitudes(self) -> tuple[complex, complex]:
        return {
            "ground": (1.0 + 0j, 0.0 + 0j),
            "excited": (0.0 + 0j, 1.0 + 0j),
            "plus_x": (1.0 + 0j, 1.0 + 0j),
        }.get(self.qubit_state, self.qubit_amplitudes)

    def resolved_items(self) -> list[tuple[str, str, str]]:
        """(section, key, value) triplets echoed into output headers."""
        def fmt(v) -> str:
            if isinstance(v, float):
                return repr(v)
            return str(v)

        items = [
            ("system", "n_mech", fmt(self.n_mech)),
            ("system", "n_cav", fmt(self.n_cav)),
        ]
        for key in ("E_J", "g_q", "omega_m", "Delta", "g_o", "A_lp", "A_lr",
                    "Omega", "kappa", "gamma", "epsilon"):
            items.append(("params", key, fmt(getattr(self, key))))
        if self.qubit_state == "custom":
            c0, c1 = self.qubit_amplitudes
            state = f"custom({c0},{c1})".replace(" ", "")
        else:
            state = self.qubit_state
        items += [
            ("initial", "qubit_state", state),
            ("initial", "mech_fock", fmt(self.mech_fock)),
            ("initial", "cav_fock", fmt(self.cav_fock)),
            ("run", "mode", self.mode),
            ("run", "t_max", fmt(self.t_max)),
            ("run", "dt_out", fmt(self.dt_out)),
            ("run", "n_traj", fmt(self.n_traj)),
            ("run", "seed", fmt(self.seed)),
            ("run", "rel_tol", fmt(self.rel_tol)),
            ("run", "abs_tol", fmt(self.abs_tol)),
            ("run", "sample_rule", self.sample_rule),
            ("analysis", "branch_threshold", fmt(self.branch_threshold)),
            ("analysis", "min_dwell", fmt(self.resolved_min_dwell())),
            ("output", "csv_path", self.csv_path),
            ("output", "svg_path", self.svg_path),
            ("output", "svg_kind", self.svg_kind),
        ]
        return items


def _parse_int(text: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", line) from None


def _parse_float(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", line) from None
    if not math.isfinite(value):
        raise ConfigError(f"value must be finite, got {text!r}", line)
    return value


def _parse_qubit_state(text: str, line: int):
    if text in QUBIT_STATES:
        return text, None
    match = _CUSTOM_RE.match(text.replace(" ", ""))
    if match:
        parts = match.group(1).split(",")
        if len(parts) != 2:
            raise ConfigError("custom qubit state needs exactly two amplitudes", line)
        try:
            c0, c1 = complex(parts[0]), complex(parts[1])
        except ValueError:
            raise ConfigError(f"unparsable complex amplitude in {text!r}", line) from None
        if abs(c0) == 0.0 and abs(c1) == 0.0:
            raise ConfigError("custom qubit amplitudes must not both be zero", line)
        return "custom", (c0, c1)
    raise ConfigError(
        f"qubit_state must be one of {QUBIT_STATES} or custom(c0,c1), got {text!r}", line
    )


def _check(cond: bool, message: str, line: int) -> None:
    if not cond:
        raise ConfigError(message, line)


# section -> key -> setter(value_text, line) returning {field: value}.
def _schema():
    return {
        "system": {
            "n_mech": lambda v, ln: {"n_mech": _req(_parse_int(v, ln), lambda x: x >= 2, "n_mech >= 2", ln)},
            "n_cav": lambda v, ln: {"n_cav": _req(_parse_int(v, ln), lambda x: x >= 1, "n_cav >= 1", ln)},
        },
        "params": {
            "E_J": lambda v, ln: {"E_J": _parse_float(v, ln)},
            "g_q": lambda v, ln: {"g_q": _parse_float(v, ln)},
            "omega_m": lambda v, ln: {"omega_m": _req(_parse_float(v, ln), lambda x: x > 0, "omega_m > 0", ln)},
            "Delta": lambda v, ln: {"Delta": _parse_float(v, ln)},
            "g_o": lambda v, ln: {"g_o": _parse_float(v, ln)},
            "A_lp": lambda v, ln: {"A_lp": _req(_parse_float(v, ln), lambda x: x >= 0, "A_lp >= 0", ln)},
            "A_lr": lambda v, ln: {"A_lr": _req(_parse_float(v, ln), lambda x: x >= 0, "A_lr >= 0", ln)},
            "Omega": lambda v, ln: {"Omega": _parse_float(v, ln)},
            "kappa": lambda v, ln: {"kappa": _req(_parse_float(v, ln), lambda x: x >= 0, "kappa >= 0", ln)},
            "gamma": lambda v, ln: {"gamma": _req(_parse_float(v, ln), lambda x: x >= 0, "gamma >= 0", ln)},
            "epsilon": lambda v, ln: {"epsilon": _parse_float(v, ln)},
        },
        "initial": {
            "qubit_state": _set_qubit_state,
            "mech_fock": lambda v, ln: {"mech_fock": _req(_parse_int(v, ln), lambda x: x >= 0, "mech_fock >= 0", ln)},
            "cav_fock": lambda v, ln: {"cav_fock": _req(_parse_int(v, ln), lambda x: x >= 0, "cav_fock >= 0", ln)},
        },
        "run": {
            "mode": lambda v, ln: {"mode": _req(v, lambda x: x in MODES, f"mode in {MODES}", ln)},
            "t_max": lambda v, ln: {"t_max": _req(_parse_float(v, ln), lambda x: x >= 0, "t_max >= 0", ln)},
            "dt_out": lambda v, ln: {"dt_out": _req(_parse_float(v, ln), lambda x: x > 0, "dt_out > 0", ln)},
            "n_traj": lambda v, ln: {"n_traj": _req(_parse_int(v, ln), lambda x: x >= 1, "n_traj >= 1", ln)},
            "seed": lambda v, ln: {"seed": _req(_parse_int(v, ln), lambda x: x >= 0, "seed >= 0", ln)},
            "rel_tol": lambda v, ln: {"rel_tol": _req(_parse_float(v, ln), lambda x: x > 0, "rel_tol > 0", ln)},
            "abs_tol": lambda v, ln: {"abs_tol": _req(_parse_float(v, ln), lambda x: x > 0, "abs_tol > 0", ln)},
            "sample_rule": lambda v, ln: {"sample_rule": _req(v, lambda x: x in SAMPLE_RULES, f"sample_rule in {SAMPLE_RULES}", ln)},
        },
        "analysis": {
            "branch_threshold": lambda v, ln: {"branch_threshold": _req(_parse_float(v, ln), lambda x: x >= 0, "branch_threshold >= 0", ln)},
            "min_dwell": lambda v, ln: {"min_dwell": _req(_parse_float(v, ln), lambda x: x >= 0, "min_dwell >= 0", ln)},
        },
        "output": {
            "csv_path": lambda v, ln: {"csv_path": v},
            "svg_path": lambda v, ln: {"svg_path": v},
            "svg_kind": lambda v, ln: {"svg_kind": _req(v, lambda x: x in SVG_KINDS, f"svg_kind in {SVG_KINDS}", ln)},
        },
    }


def _req(value, predicate, invariant: str, line: int):
    _check(predicate(value), f"value {value!r} violates invariant {invariant}", line)
    return value


def _set_qubit_state(v: str, ln: int):
    state, amps = _parse_qubit_state(v, ln)
    out = {"qubit_state": state}
    if amps is not None:
        out["qubit_amplitudes"] = amps
    return out


def parse_config(text: str) -> RunConfig:
    schema = _schema()
    updates: dict = {}
    assigned: set[tuple[str, str]] = set()
    section: str | None = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in schema:
                raise ConfigError(f"unknown section [{section}]", line_no)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            if key != "preset":
                raise ConfigError(f"key {key!r} appears before any [section]", line_no)
            if value not in PRESETS:
                raise ConfigError(f"unknown preset {value!r}; available: {sorted(PRESETS)}", line_no)
            for pkey, pval in PRESETS[value].items():
                updates[pkey] = pval
            continue
        if key not in schema[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", line_no)
        if (section, key) in assigned:
            raise ConfigError(f"duplicate key {key!r} in section [{section}]", line_no)
        assigned.add((section, key))
        updates.update(schema[section][key](value, line_no))

    cfg = RunConfig(**updates)
    _validate_cross_fields(cfg)
    return cfg


def _validate_cross_fields(cfg: RunConfig) -> None:
    if cfg.mech_fock >= cfg.n_mech:
        raise ConfigError(f"mech_fock {cfg.mech_fock} requires n_mech > {cfg.mech_fock}")
    if cfg.mode != "qm_only" and cfg.cav_fock >= cfg.n_cav:
        raise ConfigError(f"cav_fock {cfg.cav_fock} requires n_cav > {cfg.cav_fock}")
    if cfg.mode == "qm_only" and cfg.cav_fock != 0:
        raise ConfigError("qm_only mode has no cavity; cav_fock must be 0")


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """CLI-level overrides; preset (if any) is applied before the others."""
    preset = overrides.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        cfg = replace(cfg, **PRESETS[preset])
    clean = {k: v for k, v in overrides.items() if v is not None}
    if clean:
        cfg = replace(cfg, **clean)
    _validate_cross_fields(cfg)
    return cfg
