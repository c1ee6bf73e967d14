"""Services package."""
from smectic.services.snapshot_service import get_snapshot_service, SnapshotService
from smectic.services.harness import convergence_study, stability_sweep
from smectic.services.reference import brute_force_reference
from smectic.services.checks import run_checks, CheckResult

__all__ = [
    "get_snapshot_service",
    "SnapshotService",
    "convergence_study",
    "stability_sweep",
    "brute_force_reference",
    "run_checks",
    "CheckResult",
]
