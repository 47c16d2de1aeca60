"""Bit-exact CSV emission and deterministic static SVG figures.

CSV layout (single-record runs): header lines prefixed with ``#`` carrying
the fully resolved configuration, then one fixed row of 16 columns:

    t, sx, sy, sz, q, p, re_a, im_a, n_cav, n_mech,
    phi, theta, psi, drive_phase, branch, jump_flag

Floats are written as their shortest round-trip decimal (Python repr), so
parse(write(record)) reproduces every value bitwise.  Missing series and
flagged-undefined phases are empty fields, never NaN text.  Ensemble CSVs
replace the observable columns with mean/stderr pairs; phases are computed
from the mean series.

SVG output is plain static markup built from the same table, byte-identical
across invocations for identical inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis

__all__ = ["OutputError", "RunTable", "build_table", "build_ensemble_table",
           "write_csv", "read_csv", "emit_figure", "FIGURE_KINDS"]

SINGLE_COLUMNS = (
    "t", "sx", "sy", "sz", "q", "p", "re_a", "im_a", "n_cav", "n_mech",
    "phi", "theta", "psi", "drive_phase", "branch", "jump_flag",
)

OBSERVABLE_COLUMNS = ("sx", "sy", "sz", "q", "p", "re_a", "im_a", "n_cav", "n_mech")

FIGURE_KINDS = (
    "timeseries_sx",
    "timeseries_q",
    "bloch_projection",
    "phase_portrait",
    "phase_vs_phase",
    "ensemble_decay",
)

BLUE, RED, GRAY = "#1f77b4", "#d62728", "#999999"
_BRANCH_COLORS = {1: BLUE, -1: RED, 0: GRAY}


class OutputError(ValueError):
    pass


@dataclass
class RunTable:
    """Column-oriented view of a record, ready for CSV or SVG emission."""

    columns: dict[str, np.ndarray | None]
    masks: dict[str, np.ndarray]
    branch: np.ndarray | None
    ensemble: bool = False
    stderr: dict[str, np.ndarray] | None = None

    @property
    def n_rows(self) -> int:
        return self.columns["t"].shape[0]


def _phase_columns(record, omega: float):
    if record.bloch is None or record.quadratures is None:
        n = record.times.shape[0]
        cols = {"phi": None, "theta": None, "psi": None,
                "drive_phase": analysis.drive_phase(record.times, omega)}
        masks = {"phi": np.zeros(n, bool), "theta": np.zeros(n, bool), "psi": np.zeros(n, bool)}
        return cols, masks
    phases = analysis.phase_record(record, omega)
    cols = {
        "phi": phases.phi.values,
        "theta": phases.theta.values,
        "psi": phases.psi.values,
        "drive_phase": phases.drive_phase,
    }
    masks = {
        "phi": phases.phi.defined,
        "theta": phases.theta.defined,
        "psi": phases.psi.defined,
    }
    return cols, masks


def build_table(record, omega: float, labeling=None) -> RunTable:
    """Assemble the fixed single-record column set from a record."""
    t = record.times
    cols: dict[str, np.ndarray | None] = {"t": t}
    bloch = record.bloch
    cols["sx"] = bloch[:, 0] if bloch is not None else None
    cols["sy"] = bloch[:, 1] if bloch is not None else None
    cols["sz"] = bloch[:, 2] if bloch is not None else None
    quad = record.quadratures
    cols["q"] = quad[:, 0] if quad is not None else None
    cols["p"] = quad[:, 1] if quad is not None else None
    cav = record.cavity
    cols["re_a"] = cav[:, 0] if cav is not None else None
    cols["im_a"] = cav[:, 1] if cav is not None else None
    cols["n_cav"] = cav[:, 2] if cav is not None else None
    cols["n_mech"] = record.mech_occupation

    phase_cols, masks = _phase_columns(record, omega)
    cols.update(phase_cols)

    branch = None
    if labeling is not None:
        branch = np.asarray(labeling.labels, dtype=np.int8)
    elif getattr(record, "branch", None) is not None:
        branch = np.asarray(record.branch, dtype=np.int8)
    if branch is not None and branch.shape[0] != t.shape[0]:
        raise OutputError("branch labels do not match the sample count")

    jump_flag = np.zeros(t.shape[0], dtype=np.int64)
    jumps = getattr(record, "jumps", None)
    if jumps:
        jump_times = np.sort(np.array([tj for tj, _ in jumps]))
        # flag[i] = 1 when a jump occurred in (t[i-1], t[i]]
        upper = np.searchsorted(jump_times, t, side="right")
        counts = np.diff(np.concatenate([[0], upper]))
        jump_flag = (counts > 0).astype(np.int64)
    cols["jump_flag"] = jump_flag
    return RunTable(columns=cols, masks=masks, branch=branch)


def build_ensemble_table(ensemble, omega: float) -> RunTable:
    """Mean/stderr columns plus phases of the mean series."""
    mean_rec = ensemble.mean_record()
    base = build_table(mean_rec, omega)
    cols: dict[str, np.ndarray | None] = {"t": ensemble.times}
    stderr: dict[str, np.ndarray] = {}
    se = ensemble.stderr

    def put(name, mean_col, se_col):
        cols[name] = mean_col
        stderr[name] = se_col

    for name in OBSERVABLE_COLUMNS:
        mean_col = base.columns[name]
        if mean_col is None:
            cols[name] = None
            continue
        if name in ("sx", "sy", "sz", "n_cav", "n_mech"):
            put(name, mean_col, se[name].real)
        elif name == "q":
            put(name, mean_col, 2.0 * se["b"].real)
        elif name == "p":
            put(name, mean_col, 2.0 * se["b"].imag)
        elif name == "re_a":
            put(name, mean_col, se["a"].real)
        else:  # im_a
            put(name, mean_col, se["a"].imag)
    phase_cols, masks = _phase_columns(mean_rec, omega)
    cols.update(phase_cols)
    return RunTable(columns=cols, masks=masks, branch=None, ensemble=True, stderr=stderr)


# ---------------------------------------------------------------------------
# CSV.
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    return repr(float(value))


def _cell(table: RunTable, name: str, i: int) -> str:
    if name == "branch":
        if table.branch is None:
            return ""
        return analysis.BRANCH_NAMES[int(table.branch[i])]
    if name == "jump_flag":
        col = table.columns.get("jump_flag")
        return "" if col is None else str(int(col[i]))
    col = table.columns.get(name)
    if col is None:
        return ""
    if name in table.masks and not bool(table.masks[name][i]):
        return ""
    return _fmt(col[i])


def write_csv(path: str, table: RunTable, config_items, extra_header=()) -> None:
    """Write the table with '#' header lines echoing the resolved config."""
    lines = ["# oem-sync run output"]
    section = None
    for sec, key, value in config_items:
        if sec != section:
            lines.append(f"# [{sec}]")
            section = sec
        lines.append(f"# {key} = {value}")
    if extra_header:
        lines.append("# [meta]")
        for key, value in extra_header:
            lines.append(f"# {key} = {value}")

    if table.ensemble:
        names = ["t"]
        for name in OBSERVABLE_COLUMNS:
            names += [f"{name}_mean", f"{name}_stderr"]
        names += ["phi", "theta", "psi", "drive_phase"]
        lines.append(",".join(names))
        for i in range(table.n_rows):
            row = [_fmt(table.columns["t"][i])]
            for name in OBSERVABLE_COLUMNS:
                col = table.columns[name]
                if col is None:
                    row += ["", ""]
                else:
                    row += [_fmt(col[i]), _fmt(table.stderr[name][i])]
            for name in ("phi", "theta", "psi", "drive_phase"):
                row.append(_cell(table, name, i))
            lines.append(",".join(row))
    else:
        lines.append(",".join(SINGLE_COLUMNS))
        for i in range(table.n_rows):
            lines.append(",".join(_cell(table, name, i) for name in SINGLE_COLUMNS))

    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_csv(path: str):
    """Parse a CSV written by write_csv.

    Returns (header: dict mapping 'section.key' -> value string,
    columns: dict mapping column name -> list of raw cell strings).
    """
    header: dict[str, str] = {}
    names: list[str] | None = None
    columns: dict[str, list[str]] = {}
    section = ""
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("[") and body.endswith("]"):
                    section = body[1:-1]
                elif "=" in body:
                    key, value = (part.strip() for part in body.split("=", 1))
                    header[f"{section}.{key}" if section else key] = value
                continue
            if names is None:
                names = line.split(",")
                columns = {name: [] for name in names}
                continue
            for name, cell in zip(names, line.split(",")):
                columns[name].append(cell)
    if names is None:
        raise OutputError(f"{path} contains no column header")
    return header, columns


# ---------------------------------------------------------------------------
# SVG.
# ---------------------------------------------------------------------------

_W, _H = 720, 540
_ML, _MR, _MT, _MB = 62, 18, 34, 44


def _axis_range(values: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        pad = max(abs(lo), 1.0) * 0.05
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, xlim, ylim):
        self.parts: list[str] = []
        self.xlim, self.ylim = xlim, ylim
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">'
        )
        self.parts.append(f'<rect width="{_W}" height="{_H}" fill="#ffffff"/>')
        self.parts.append(
            f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
            'fill="none" stroke="#333333" stroke-width="1"/>'
        )
        self.parts.append(
            f'<text x="{_W // 2}" y="20" font-family="monospace" font-size="13" '
            f'text-anchor="middle">{title}</text>'
        )
        self.parts.append(
            f'<text x="{_W // 2}" y="{_H - 10}" font-family="monospace" font-size="12" '
            f'text-anchor="middle">{xlabel}</text>'
        )
        self.parts.append(
            f'<text x="14" y="{_H // 2}" font-family="monospace" font-size="12" '
            f'text-anchor="middle" transform="rotate(-90 14 {_H // 2})">{ylabel}</text>'
        )
        for frac, value in ((0.0, xlim[0]), (1.0, xlim[1])):
            x = _ML + frac * (_W - _ML - _MR)
            self.parts.append(
                f'<text x="{x:.2f}" y="{_H - _MB + 16}" font-family="monospace" '
                f'font-size="11" text-anchor="middle">{value:.4g}</text>'
            )
        for frac, value in ((0.0, ylim[0]), (1.0, ylim[1])):
            y = _H - _MB - frac * (_H - _MT - _MB)
            self.parts.append(
                f'<text x="{_ML - 6}" y="{y:.2f}" font-family="monospace" '
                f'font-size="11" text-anchor="end">{value:.4g}</text>'
            )

    def px(self, x: float) -> float:
        lo, hi = self.xlim
        return _ML + (x - lo) / (hi - lo) * (_W - _ML - _MR)

    def py(self, y: float) -> float:
        lo, hi = self.ylim
        return _H - _MB - (y - lo) / (hi - lo) * (_H - _MT - _MB)

    def polyline(self, xs, ys, color: str, width: float = 1.2) -> None:
        if len(xs) == 0:
            return
        pts = " ".join(f"{self.px(float(x)):.2f},{self.py(float(y)):.2f}" for x, y in zip(xs, ys))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'
        )

    def dots(self, xs, ys, color: str, radius: float = 1.6) -> None:
        for x, y in zip(xs, ys):
            self.parts.append(
                f'<circle cx="{self.px(float(x)):.2f}" cy="{self.py(float(y)):.2f}" '
                f'r="{radius}" fill="{color}"/>'
            )

    def render(self, header_comments) -> str:
        comments = "".join(f"<!-- {line} -->\n" for line in header_comments)
        return comments + "\n".join(self.parts) + "\n</svg>\n"


def _require(table: RunTable, kind: str, *names: str):
    for name in names:
        if table.columns.get(name) is None:
            raise OutputError(f"figure kind {kind!r} requires the {name!r} series")


def _branch_groups(table: RunTable):
    n = table.n_rows
    codes = table.branch if table.branch is not None else np.zeros(n, dtype=np.int8)
    for code in (0, 1, -1):
        mask = codes == code
        if mask.any():
            yield _BRANCH_COLORS[int(code)], mask


def emit_figure(kind: str, path: str, table: RunTable, config_items, title: str = "") -> None:
    """Render one figure kind to a standalone SVG; byte-deterministic."""
    if kind not in FIGURE_KINDS:
        raise OutputError(f"unknown figure kind {kind!r}; choose from {FIGURE_KINDS}")
    header = [f"{sec}.{key} = {value}" for sec, key, value in config_items]
    t = table.columns["t"]

    if kind == "timeseries_sx":
        _require(table, kind, "sx")
        canvas = _Canvas(title or "qubit polarization", "t", "sx",
                         _axis_range(t), _axis_range(table.columns["sx"]))
        for color, mask in _branch_groups(table):
            canvas.dots(t[mask], table.columns["sx"][mask], color, radius=1.2)
    elif kind == "timeseries_q":
        _require(table, kind, "q")
        canvas = _Canvas(title or "mechanical quadrature", "t", "q",
                         _axis_range(t), _axis_range(table.columns["q"]))
        canvas.polyline(t, table.columns["q"], BLUE)
    elif kind == "bloch_projection":
        _require(table, kind, "sy", "sz")
        canvas = _Canvas(title or "qubit rotation plane", "sy", "sz", (-1.1, 1.1), (-1.1, 1.1))
        for color, mask in _branch_groups(table):
            canvas.dots(table.columns["sy"][mask], table.columns["sz"][mask], color)
    elif kind == "phase_portrait":
        _require(table, kind, "q", "p")
        q, p = table.columns["q"], table.columns["p"]
        lim = max(1e-9, float(np.max(np.abs(q))), float(np.max(np.abs(p)))) * 1.1
        canvas = _Canvas(title or "mechanical phase portrait", "q", "p", (-lim, lim), (-lim, lim))
        for color, mask in _branch_groups(table):
            canvas.dots(q[mask], p[mask], color)
    elif kind == "phase_vs_phase":
        _require(table, kind, "phi", "drive_phase")
        canvas = _Canvas(title or "qubit phase vs drive phase", "drive_phase", "phi",
                         (0.0, 2.0 * np.pi), (-np.pi, np.pi))
        ok = table.masks.get("phi", np.ones(table.n_rows, bool))
        for color, mask in _branch_groups(table):
            m = mask & ok
            canvas.dots(table.columns["drive_phase"][m], table.columns["phi"][m], color)
    else:  # ensemble_decay
        _require(table, kind, "sx")
        sx = table.columns["sx"]
        canvas = _Canvas(title or "ensemble mean qubit polarization", "t", "mean sx",
                         _axis_range(t), _axis_range(sx))
        canvas.polyline(t, sx, BLUE, width=1.5)
        if table.ensemble and table.stderr is not None and "sx" in table.stderr:
            se = table.stderr["sx"]
            canvas.polyline(t, sx + se, GRAY, width=0.8)
            canvas.polyline(t, sx - se, GRAY, width=0.8)

    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(canvas.render(header))
