"""Command-line entry point.

    oem-sync run --config cfg.txt [--preset paper_fig2] [--mode MODE]
                 [--seed N] [--out-csv PATH] [--out-svg PATH]
    oem-sync validate --config cfg.txt
    oem-sync bench [--n-mech N] [--n-cav M] [--t-max T]

Every run writes a CSV (always) and an SVG (when an svg path is set), both
embedding the fully resolved configuration.  One machine-readable summary
line goes to stdout.  The exit status is nonzero exactly when a solver or a
validation step fails.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import analysis, model, output, solvers
from .bench import format_benchmark, run_benchmark
from .config import ConfigError, RunConfig, apply_overrides, load_config

__all__ = ["main"]


def _build_problem(cfg: RunConfig):
    params = cfg.params()
    space = cfg.space()
    if cfg.mode == "qm_only":
        hamiltonian = model.build_qm_only(params, space)
    else:
        hamiltonian = model.build_total_hamiltonian(params, space)
    channels = model.collapse_channels(params, space)
    psi0 = model.initial_state(
        space, cfg.resolved_qubit_amplitudes(), cfg.mech_fock,
        0 if cfg.mode == "qm_only" else cfg.cav_fock,
    )
    return params, space, hamiltonian, channels, psi0


def _branch_sync_summary(sampled, labeling, params) -> list[tuple[str, str]]:
    """Per-branch dwell statistics and sync orders against the drive phase."""
    phases = analysis.phase_record(sampled, params.Omega)
    items: list[tuple[str, str]] = []
    for name, code in (("blue", 1), ("red", -1)):
        intervals = labeling.intervals(name)
        items.append((f"dwell_count_{name}", str(len(intervals))))
        mask = labeling.labels == code
        if mask.sum():
            items.append((f"mean_sx_{name}", f"{float(sampled.bloch[mask, 0].mean()):.6g}"))
        if int(mask.sum()) >= 2:
            phi = analysis.PhaseSeries(phases.phi.values[mask], phases.phi.defined[mask])
            psi = analysis.PhaseSeries(phases.psi.values[mask], phases.psi.defined[mask])
            drive = phases.drive_phase[mask]
            try:
                items.append((f"sync_phi_{name}", f"{analysis.sync_order(phi, drive):.4f}"))
                items.append((f"sync_psi_{name}", f"{analysis.sync_order(psi, drive):.4f}"))
            except ValueError:
                pass
    return items


def _emit(cfg: RunConfig, table, extra_header, summary_items) -> None:
    output.write_csv(cfg.csv_path, table, cfg.resolved_items(), extra_header)
    if cfg.svg_path:
        kind = cfg.svg_kind
        if kind == "auto":
            kind = {
                "trajectory": "timeseries_sx",
                "qm_only": "phase_portrait",
                "master": "timeseries_sx",
                "ensemble": "ensemble_decay",
                "validate": "timeseries_q",
            }[cfg.mode]
        output.emit_figure(kind, cfg.svg_path, table, cfg.resolved_items())
    print("summary: " + " ".join(f"{k}={v}" for k, v in summary_items))


def _run_trajectory_like(cfg: RunConfig) -> int:
    params, space, hamiltonian, channels, psi0 = _build_problem(cfg)
    record = solvers.evolve_trajectory(
        hamiltonian, [op for _, op in channels], psi0, cfg.grid(), cfg.seed,
        space=space, channel_names=[name for name, _ in channels],
    )
    sampled = analysis.stroboscopic_sample(record, params.Omega, cfg.sample_rule)
    labeling = analysis.classify_branches(
        sampled.times, sampled.bloch[:, 0], cfg.branch_threshold, cfg.resolved_min_dwell()
    )
    summary = [("mode", cfg.mode), ("seed", str(cfg.seed)), ("n_jumps", str(len(record.jumps)))]
    summary += _branch_sync_summary(sampled, labeling, params)
    table = output.build_table(sampled, params.Omega, labeling)
    _emit(cfg, table, [("record", "trajectory")], summary)
    return 0


def _run_master(cfg: RunConfig) -> int:
    params, space, hamiltonian, channels, psi0 = _build_problem(cfg)
    record = solvers.evolve_master(
        hamiltonian, [op for _, op in channels], psi0, cfg.grid(), space=space
    )
    sampled = analysis.stroboscopic_sample(record, params.Omega, cfg.sample_rule)
    table = output.build_table(sampled, params.Omega)
    summary = [("mode", "master")]
    for name in ("sx", "n_mech", "n_cav"):
        if name in record.expectations:
            summary.append((f"final_{name}", f"{float(record.expectations[name][-1].real):.6g}"))
    _emit(cfg, table, [("record", "master")], summary)
    return 0


def _run_ensemble(cfg: RunConfig) -> int:
    params, space, hamiltonian, channels, psi0 = _build_problem(cfg)
    ensemble = solvers.run_ensemble(
        hamiltonian, [op for _, op in channels], psi0, cfg.grid(),
        cfg.n_traj, cfg.seed,
        space=space, channel_names=[name for name, _ in channels],
    )
    mean_rec = ensemble.mean_record()
    phases = analysis.phase_record(mean_rec, params.Omega)
    tail = ensemble.times > 0.5 * ensemble.times[-1]
    summary = [
        ("mode", "ensemble"),
        ("n_traj", str(cfg.n_traj)),
        ("base_seed", str(cfg.seed)),
        ("tail_max_abs_sx", f"{float(np.abs(mean_rec.bloch[tail, 0]).max()):.6g}"),
        ("sync_phi_mean", f"{analysis.sync_order(phases.phi, phases.drive_phase):.4f}"),
        ("sync_psi_mean", f"{analysis.sync_order(phases.psi, phases.drive_phase):.4f}"),
    ]
    table = output.build_ensemble_table(ensemble, params.Omega)
    _emit(cfg, table, [("record", "ensemble")], summary)
    return 0


def _run_validate(cfg: RunConfig) -> int:
    params = cfg.params()
    report = solvers.validate_truncation(
        params, cfg.space(), cfg.grid(), cfg.n_traj, cfg.seed,
        qubit_amplitudes=cfg.resolved_qubit_amplitudes(),
    )
    verdict = "PASS" if report.passed else "FAIL"
    summary = [
        ("mode", "validate"),
        ("n_traj", str(cfg.n_traj)),
        ("base_dims", f"({report.base_space.n_mech},{report.base_space.n_cav})"),
        ("test_dims", f"({report.test_space.n_mech},{report.test_space.n_cav})"),
        ("avg_n_mech", f"{report.time_avg_base['n_mech']:.6g}"),
        ("avg_n_cav", f"{report.time_avg_base['n_cav']:.6g}"),
        ("rel_change_n_mech", f"{report.rel_change['n_mech']:.6g}"),
        ("rel_change_n_cav", f"{report.rel_change['n_cav']:.6g}"),
        ("threshold", f"{report.threshold:.6g}"),
        ("verdict", verdict),
    ]
    # The CSV records the base-truncation ensemble for inspection.
    table = output.build_ensemble_table(report.base_ensemble, params.Omega)
    _emit(cfg, table, [("record", "validate"), ("verdict", verdict)], summary)
    return 0 if report.passed else 1


_MODE_RUNNERS = {
    "trajectory": _run_trajectory_like,
    "qm_only": _run_trajectory_like,
    "master": _run_master,
    "ensemble": _run_ensemble,
    "validate": _run_validate,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oem-sync")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the mode selected by the config")
    run.add_argument("--config", help="path to a key=value config file")
    run.add_argument("--preset", choices=["paper_fig2"], help="load a named parameter preset")
    run.add_argument("--mode", choices=list(_MODE_RUNNERS), help="override the run mode")
    run.add_argument("--seed", type=int, help="override the seed / base seed")
    run.add_argument("--out-csv", help="override the CSV output path")
    run.add_argument("--out-svg", help="override the SVG output path")

    val = sub.add_parser("validate", help="truncation convergence check")
    val.add_argument("--config", help="path to a key=value config file")
    val.add_argument("--seed", type=int, help="override the base seed")

    bench = sub.add_parser("bench", help="time the numba and numpy backends")
    bench.add_argument("--n-mech", type=int, default=10)
    bench.add_argument("--n-cav", type=int, default=6)
    bench.add_argument("--t-max", type=float, default=20.0)
    bench.add_argument("--seed", type=int, default=7)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "bench":
            report = run_benchmark(
                n_mech=args.n_mech, n_cav=args.n_cav, t_max=args.t_max, seed=args.seed
            )
            print(format_benchmark(report))
            return 0
        cfg = load_config(args.config) if args.config else RunConfig()
        overrides = {"seed": args.seed}
        if args.command == "validate":
            overrides["mode"] = "validate"
        else:
            overrides.update(
                preset=args.preset, mode=args.mode,
                csv_path=args.out_csv, svg_path=args.out_svg,
            )
        cfg = apply_overrides(cfg, **overrides)
        return _MODE_RUNNERS[cfg.mode](cfg)
    except (ConfigError, solvers.SolverError, output.OutputError, model.ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
