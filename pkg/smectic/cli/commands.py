"""Command implementations: run, converge, sweep and check."""
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Optional

from prometheus_client import REGISTRY, write_to_textfile

from smectic.cli.run_config import RunConfig, effective_document, load_run_config
from smectic.config import get_settings
from smectic.core.errors import ConfigurationError, SmecticError
from smectic.core.fields import PeriodicGrid
from smectic.core.stepper import DIAGNOSTIC_COLUMNS, SimState, StepReport, initial_state, run
from smectic.metrics import smectic_runs_total
from smectic.services import get_snapshot_service
from smectic.services.checks import run_checks
from smectic.services.harness import (
    STUDY_COLUMNS,
    convergence_study,
    format_study_table,
    stability_sweep,
    standard_initial_data,
)

logger = logging.getLogger(__name__)

EFFECTIVE_CONFIG = "effective_config.json"
SUMMARY_FILE = "summary.json"
CHECK_REPORT = "check_report.txt"

ENERGY_AUDIT_COLUMNS = (
    "tau", "steps", "monotonicity_violations", "law_violations", "feasibility_violations",
    "xi_min", "xi_max", "exact", "relaxed", "clipped", "energy_drop",
)
MAX_BOUND_COLUMNS = (
    "tau", "kappa1", "eta", "kappa0", "g_min", "u_inf", "max_frobenius", "condition_met", "excursion",
)


def _prepare(cfg: RunConfig) -> Path:
    service = get_snapshot_service()
    out = service.run_directory(str(cfg.output_directory()))
    service.write_json(out / EFFECTIVE_CONFIG, effective_document(cfg))
    return out


def _write_metrics(out: Optional[Path]):
    if out is None:
        return
    try:
        write_to_textfile(str(out / get_settings().metrics_file), REGISTRY)
    except OSError as e:
        logger.warning(f"Could not write metrics file: {e}", extra={"component": "cli"})


def execute(
    command: str,
    body: Callable[[RunConfig, Path], tuple[int, Path]],
    config_path: Optional[str],
    overrides: list[str],
) -> int:
    """Load the config, run one command body and map failures to exit codes."""
    t0 = time.time()
    out: Optional[Path] = None
    try:
        cfg = load_run_config(config_path, overrides)
        out = _prepare(cfg)
        code, out = body(cfg, out)
    except SmecticError as e:
        smectic_runs_total.labels(command=command, status="failed").inc()
        logger.error(f"{command} failed: {e.detail}", extra={"component": "cli"})
        print(f"error reason={e.reason}", file=sys.stderr)
        _write_metrics(out)
        return e.exit_code

    status = "success" if code == 0 else "failed"
    smectic_runs_total.labels(command=command, status=status).inc()
    logger.info(f"{command} finished with status {status} in {time.time() - t0:.1f}s", extra={"component": "cli"})
    _write_metrics(out)
    return code


# ==================== run ====================

def initial_run_state(cfg: RunConfig) -> SimState:
    if cfg.init.kind == "snapshot":
        state = get_snapshot_service().read_snapshot(cfg.init.snapshot)
        if (state.grid.d, state.grid.J) != (cfg.grid.d, cfg.grid.J):
            raise ConfigurationError(
                "init.snapshot",
                f"snapshot grid d={state.grid.d}, J={state.grid.J} does not match the configured grid",
            )
        return state
    grid = PeriodicGrid(d=cfg.grid.d, J=cfg.grid.J, L=cfg.grid.L)
    Q0, u0 = standard_initial_data(grid, cfg.model, cfg.init.u0_amplitude, cfg.init.u0_wavenumber)
    return initial_state(Q0, u0, cfg.model)


def _run_body(cfg: RunConfig, out: Path) -> tuple[int, Path]:
    service = get_snapshot_service()
    state0 = initial_run_state(cfg)
    n_steps = cfg.time.steps()
    every = cfg.output.snapshot_every
    service.write_snapshot(out, state0, cfg.seed)

    with service.open_diagnostics(out / cfg.output.diagnostics, DIAGNOSTIC_COLUMNS, seed=cfg.seed) as writer:
        def on_step(state: SimState, report: StepReport):
            writer.write_report(report)
            if every and state.step % every == 0:
                service.write_snapshot(out, state, cfg.seed)

        traj = run(state0, cfg.time.tau, n_steps, cfg.model, cfg.scheme.kind, on_step=on_step)

    if n_steps and not (every and traj.final.step % every == 0):
        service.write_snapshot(out, traj.final, cfg.seed)
    summary = traj.summary.as_dict()
    summary["seed"] = cfg.seed
    summary["scheme"] = cfg.scheme.kind.value
    service.write_json(out / SUMMARY_FILE, summary)
    print(
        f"steps={traj.summary.steps} t={traj.final.t:.6g} "
        f"energy_drop={traj.summary.energy_drop:.6e} max_Q_F={traj.summary.max_frobenius:.6f}"
    )
    return 0, out


def cmd_run(config_path: Optional[str], overrides: list[str]) -> int:
    """Integrate one trajectory and write diagnostics, snapshots and a summary."""
    return execute("run", _run_body, config_path, overrides)


# ==================== converge ====================

def _converge_body(cfg: RunConfig, out: Path) -> tuple[int, Path]:
    service = get_snapshot_service()
    rows = convergence_study(cfg.convergence())
    service.write_table(out / cfg.output.study_table, STUDY_COLUMNS, [row.as_row() for row in rows], seed=cfg.seed)
    table = format_study_table(rows)
    service.write_text(out / "convergence.txt", table)
    print(table, end="")
    return 0, out


def cmd_converge(config_path: Optional[str], overrides: list[str]) -> int:
    return execute("converge", _converge_body, config_path, overrides)


# ==================== sweep ====================

def _sweep_body(cfg: RunConfig, out: Path) -> tuple[int, Path]:
    service = get_snapshot_service()
    report = stability_sweep(cfg.stability())
    energy_rows = []
    for row in report.energy:
        energy_rows.append({
            "tau": row.tau,
            "steps": row.steps,
            "monotonicity_violations": len(row.monotonicity_violations),
            "law_violations": len(row.law_violations),
            "feasibility_violations": len(row.feasibility_violations),
            "xi_min": row.xi_min,
            "xi_max": row.xi_max,
            "exact": row.branch_counts.get("exact", 0),
            "relaxed": row.branch_counts.get("relaxed", 0),
            "clipped": row.branch_counts.get("clipped", 0),
            "energy_drop": row.energy_drop,
        })
    bound_rows = [
        {
            "tau": r.tau,
            "kappa1": r.kappa1,
            "eta": r.eta,
            "kappa0": r.kappa0,
            "g_min": r.g_min,
            "u_inf": r.u_inf,
            "max_frobenius": r.max_frobenius,
            "condition_met": str(r.condition_met).lower(),
            "excursion": str(r.excursion).lower(),
        }
        for r in report.max_bound
    ]
    service.write_table(out / "energy_audit.csv", ENERGY_AUDIT_COLUMNS, energy_rows)
    service.write_table(out / "max_bound.csv", MAX_BOUND_COLUMNS, bound_rows)
    excursions = sum(1 for r in report.max_bound if r.excursion and r.condition_met)
    print(f"energy_violations={report.violations} guaranteed_bound_excursions={excursions}")
    return (0 if report.violations == 0 and excursions == 0 else 1), out


def cmd_sweep(config_path: Optional[str], overrides: list[str]) -> int:
    return execute("sweep", _sweep_body, config_path, overrides)


# ==================== check ====================

def _check_body(cfg: RunConfig, out: Path) -> tuple[int, Path]:
    results = run_checks(cfg.model, cfg.check, cfg.seed)
    lines = [f"seed={cfg.seed}"] + [r.line() for r in results]
    text = "\n".join(lines) + "\n"
    get_snapshot_service().write_text(out / CHECK_REPORT, text)
    print(text, end="")
    return (0 if all(r.passed for r in results) else 1), out


def cmd_check(config_path: Optional[str], overrides: list[str]) -> int:
    """Run the invariant battery; exit 0 only when every check passes."""
    return execute("check", _check_body, config_path, overrides)
