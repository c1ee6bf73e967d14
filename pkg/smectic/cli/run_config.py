"""Run configuration: a JSON document of nested sections plus dotted overrides."""
import json
import logging
import math
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, field_validator, model_validator

from smectic.config import get_settings
from smectic.core.energy import ModelParams
from smectic.core.errors import ConfigurationError
from smectic.core.stepper import Scheme
from smectic.services.checks import CheckConfig
from smectic.services.harness import ConvergenceConfig, SweepConfig, steps_for

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Section):
    d: Literal[2, 3] = 2
    J: int = Field(128, ge=2)
    L: float = Field(2.0 * math.pi, gt=0)

    @field_validator("J")
    @classmethod
    def _warn_non_power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            logger.warning(f"J={value} is not a power of two; transforms will be slower", extra={"component": "cli"})
        return value


class TimeSection(_Section):
    tau: float = Field(2.0**-8, gt=0)
    T: Optional[float] = Field(None, gt=0)
    n_steps: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _one_horizon(self) -> "TimeSection":
        if self.T is not None and self.n_steps is not None:
            raise ValueError("give either T or n_steps, not both")
        return self

    def steps(self) -> int:
        if self.T is None:
            return 100 if self.n_steps is None else self.n_steps
        return steps_for(self.T, self.tau, "time.T")


class SchemeSection(_Section):
    kind: Scheme = Scheme.ETD
    eta0: Optional[float] = Field(None, ge=0, le=1)


class InitSection(_Section):
    kind: Literal["director_wave", "snapshot"] = "director_wave"
    u0_amplitude: float = 0.25
    u0_wavenumber: Optional[float] = None
    snapshot: Optional[str] = None

    @model_validator(mode="after")
    def _snapshot_path(self) -> "InitSection":
        if self.kind == "snapshot" and not self.snapshot:
            raise ValueError("init.kind = snapshot needs init.snapshot")
        return self


class OutputSection(_Section):
    directory: Optional[str] = None
    snapshot_every: int = Field(0, ge=0)
    diagnostics: str = "diagnostics.csv"
    study_table: str = "convergence.csv"


class StudySection(_Section):
    J: Optional[int] = Field(64, ge=2)
    T: float = Field(0.5, gt=0)
    taus: list[float] = Field(default_factory=lambda: [2.0**-k for k in range(6, 12)], min_length=1)
    benchmark_tau: float = Field(2.0**-13, gt=0)
    workers: int = Field(1, ge=1)


class SweepSection(_Section):
    J: Optional[int] = Field(32, ge=2)
    taus: list[float] = Field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0], min_length=1)
    kappa1_values: list[PositiveFloat] = Field(default_factory=lambda: [1.0, 2.0, 5.0, 8.0, 16.0])
    mbp_taus: list[PositiveFloat] = Field(default_factory=lambda: [0.1, 1.0])
    n_steps: int = Field(100, ge=1)
    eta: Optional[float] = Field(None, gt=0)


class RunConfig(_Section):
    model: ModelParams = Field(default_factory=ModelParams)
    grid: GridSection = Field(default_factory=GridSection)
    time: TimeSection = Field(default_factory=TimeSection)
    scheme: SchemeSection = Field(default_factory=SchemeSection)
    init: InitSection = Field(default_factory=InitSection)
    output: OutputSection = Field(default_factory=OutputSection)
    study: StudySection = Field(default_factory=StudySection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    check: CheckConfig = Field(default_factory=CheckConfig)
    seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _inherit_dimension(cls, data: Any) -> Any:
        # The grid dimension is the default for the model dimension.
        if isinstance(data, dict):
            grid = data.get("grid") or {}
            model = data.get("model") or {}
            if isinstance(grid, dict) and isinstance(model, dict) and "d" in grid and "d" not in model:
                data = {**data, "model": {**model, "d": grid["d"]}}
        return data

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        if self.model.d != self.grid.d:
            raise ValueError(f"model.d={self.model.d} differs from grid.d={self.grid.d}")
        if self.scheme.eta0 is None:
            self.scheme.eta0 = self.model.eta0
        elif self.scheme.eta0 != self.model.eta0:
            self.model = self.model.model_copy(update={"eta0": self.scheme.eta0})
        return self

    def output_directory(self) -> Path:
        return Path(self.output.directory or get_settings().output_dir)

    def convergence(self) -> ConvergenceConfig:
        return ConvergenceConfig(
            model=self.model,
            J=self.study.J or self.grid.J,
            L=self.grid.L,
            T=self.study.T,
            taus=self.study.taus,
            benchmark_tau=self.study.benchmark_tau,
            scheme=self.scheme.kind,
            u0_amplitude=self.init.u0_amplitude,
            u0_wavenumber=self.init.u0_wavenumber,
            workers=self.study.workers,
        )

    def stability(self) -> SweepConfig:
        return SweepConfig(
            model=self.model,
            J=self.sweep.J or self.grid.J,
            L=self.grid.L,
            taus=self.sweep.taus,
            kappa1_values=self.sweep.kappa1_values,
            mbp_taus=self.sweep.mbp_taus,
            n_steps=self.sweep.n_steps,
            eta=self.sweep.eta,
            u0_amplitude=self.init.u0_amplitude,
            u0_wavenumber=self.init.u0_wavenumber,
            scheme=self.scheme.kind,
        )


# ==================== Loading ====================

def parse_override(text: str) -> tuple[list[str], Any]:
    """Split ``a.b=value``; the value is parsed as JSON and falls back to a string."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigurationError("set", f"override must look like section.key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(document: dict, overrides: list[str]) -> dict:
    for text in overrides:
        path, value = parse_override(text)
        node = document
        for part in path[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                raise ConfigurationError(".".join(path), f"{part} is not a section")
            node = child
        node[path[-1]] = value
    return document


def validation_reason(exc: ValidationError) -> str:
    """Dotted location of the first validation error."""
    errors = exc.errors()
    if not errors:
        return "config"
    loc = [str(part) for part in errors[0].get("loc", ())]
    return ".".join(loc) if loc else "config"


def load_run_config(path: Optional[str] = None, overrides: Optional[list[str]] = None) -> RunConfig:
    """Read the JSON document (or defaults when no path), apply overrides and validate."""
    path = path or get_settings().default_config
    document: dict = {}
    if path:
        file = Path(path)
        if not file.is_file():
            raise ConfigurationError("file", f"config file not found: {file}")
        try:
            document = json.loads(file.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError("file", f"config file is not valid JSON: {exc}")
        if not isinstance(document, dict):
            raise ConfigurationError("file", "config file must contain a JSON object")
    apply_overrides(document, overrides or [])
    try:
        return RunConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigurationError(validation_reason(exc), str(exc.errors()[0].get("msg", exc))) from exc


def effective_document(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json")
