"""Snapshot and diagnostics persistence for simulation runs."""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, TextIO

import numpy as np

from smectic.config import get_settings
from smectic.core.errors import ConfigurationError
from smectic.core.fields import PeriodicGrid, QTensorField, ScalarField
from smectic.core.stepper import DIAGNOSTIC_COLUMNS, SimState, StepReport

logger = logging.getLogger(__name__)

HEADER_FILE = "header.json"
RAW_DTYPE = "<f8"


def format_float(value: Any) -> str:
    """Machine CSV cell: integers verbatim, floats with 17 significant digits, None blank."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.16e}"


class DiagnosticsWriter:
    """Append-only CSV of per-step diagnostics; an optional `# seed=N` line precedes the header."""

    def __init__(self, handle: TextIO, columns: Iterable[str] = DIAGNOSTIC_COLUMNS, seed: Optional[int] = None):
        self.handle = handle
        self.columns = tuple(columns)
        self.writer = csv.writer(handle, lineterminator="\n")
        if seed is not None:
            handle.write(f"# seed={seed}\n")
        self.writer.writerow(self.columns)
        self.rows = 0

    def write(self, row: dict[str, Any]):
        self.writer.writerow([format_float(row[c]) for c in self.columns])
        self.rows += 1

    def write_report(self, report: StepReport):
        self.write(report.as_row())

    def close(self):
        self.handle.close()

    def __enter__(self) -> "DiagnosticsWriter":
        return self

    def __exit__(self, *exc):
        self.close()


class SnapshotService:
    """Service for reading and writing run artifacts under the output directory."""

    def __init__(self, root: Optional[str] = None):
        settings = get_settings()
        self.root = Path(root or settings.output_dir)

    # ==================== Directories ====================

    def run_directory(self, directory: Optional[str] = None) -> Path:
        path = Path(directory) if directory else self.root
        path.mkdir(parents=True, exist_ok=True)
        return path

    # ==================== Snapshot Operations ====================

    def write_snapshot(self, directory: Path, state: SimState, seed: Optional[int] = None) -> Path:
        """Write one state as a JSON header plus one raw little-endian file per component."""
        grid = state.grid
        target = Path(directory) / f"step_{state.step:06d}"
        target.mkdir(parents=True, exist_ok=True)

        names = list(state.Q.names()) + list(state.u.names())
        arrays = list(state.Q.values) + [state.u.values]
        for name, values in zip(names, arrays):
            np.ascontiguousarray(values, dtype=RAW_DTYPE).tofile(target / f"{name}.bin")

        header = {
            "d": grid.d,
            "J": grid.J,
            "L": grid.L,
            "components": names,
            "dtype": RAW_DTYPE,
            "order": "row-major (x, y, z)",
            "time": state.t,
            "step": state.step,
            "s": state.s,
            "seed": seed,
        }
        (target / HEADER_FILE).write_text(json.dumps(header, indent=2))
        logger.debug(f"Wrote snapshot {target}", extra={"component": "snapshots"})
        return target

    def read_snapshot(self, path: str) -> SimState:
        """Load a snapshot directory written by ``write_snapshot``."""
        target = Path(path)
        header_path = target / HEADER_FILE
        if not header_path.is_file():
            raise ConfigurationError("init.snapshot", f"no snapshot header at {header_path}")
        header = json.loads(header_path.read_text())
        grid = PeriodicGrid(d=int(header["d"]), J=int(header["J"]), L=float(header["L"]))

        def load(name: str) -> np.ndarray:
            file = target / f"{name}.bin"
            if not file.is_file():
                raise ConfigurationError("init.snapshot", f"missing component file {file}")
            return np.fromfile(file, dtype=header.get("dtype", RAW_DTYPE)).reshape(grid.shape)

        q_names = QTensorField.zeros(grid).names()
        Q = QTensorField(grid, np.stack([load(n) for n in q_names]))
        u = ScalarField(grid, load("u"))
        logger.info(f"Loaded snapshot {target} at step {header['step']}", extra={"component": "snapshots"})
        return SimState(Q=Q, u=u, s=float(header["s"]), t=float(header["time"]), step=int(header["step"]))

    # ==================== Tables and Documents ====================

    def open_diagnostics(
        self, path: Path, columns: Iterable[str] = DIAGNOSTIC_COLUMNS, seed: Optional[int] = None
    ) -> DiagnosticsWriter:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        return DiagnosticsWriter(open(path, "w", newline=""), columns, seed)

    def write_table(
        self, path: Path, columns: Iterable[str], rows: Iterable[dict[str, Any]], seed: Optional[int] = None
    ) -> Path:
        with self.open_diagnostics(path, columns, seed) as writer:
            for row in rows:
                writer.write(row)
        return Path(path)

    def write_json(self, path: Path, payload: dict) -> Path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
        return Path(path)

    def write_text(self, path: Path, text: str) -> Path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
        return Path(path)


# Singleton instance
_snapshot_service: Optional[SnapshotService] = None


def get_snapshot_service() -> SnapshotService:
    """Get or create the snapshot service singleton."""
    global _snapshot_service
    if _snapshot_service is None:
        _snapshot_service = SnapshotService()
    return _snapshot_service
