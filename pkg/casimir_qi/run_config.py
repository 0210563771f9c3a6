import logging
import math
import os
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from casimir_qi.config_loader import ConfigLoader
from casimir_qi.modes import BoxSpec, PotentialSpec
from casimir_qi.numerics import Tolerances

logger = logging.getLogger(__name__)

Command = Literal["density", "qi", "sweep", "oracle", "modes"]
OutputFormat = Literal["csv", "json"]
WORKERS_ENV = "CASIMIR_QI_WORKERS"
MAX_BARRIER_WIDTH = 0.01
MIN_ORACLE_BOXES = 3


class EnergySettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    spectral_omega_start: float = Field(default=40.0, gt=0)
    spectral_cycles: int = Field(default=256, ge=4)
    beta_start_per_coupling: float = Field(default=40.0, gt=0)
    beta_cycles: int = Field(default=64, ge=4)
    beta_max_coupling: float = Field(default=100.0, ge=0)


class SweepSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    coupling_min: float = Field(default=0.01, gt=0)
    coupling_max: float = Field(default=1000.0, gt=0)
    coupling_points: int = Field(default=25, ge=1)
    tau_min: float = Field(default=0.1, gt=0)
    tau_max: float = Field(default=100.0, gt=0)
    tau_points: int = Field(default=25, ge=1)


class OracleSettings(BaseModel):
    """Lengths here are in units of a."""

    model_config = ConfigDict(frozen=True)

    box_sizes: Tuple[float, ...] = (50.0, 100.0, 200.0)
    modes_per_length: float = Field(default=40.0, gt=0)
    x_region1: float = 0.0
    x_region2: float = 0.75
    barrier_widths: Tuple[float, ...] = (0.005, 0.0025, 0.00125)
    shooting_box: float = Field(default=20.0, gt=0)
    shooting_modes: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _usable_widths(self) -> "OracleSettings":
        if not all(0 < w <= MAX_BARRIER_WIDTH for w in self.barrier_widths):
            raise ValueError(f"barrier_widths must lie in (0, {MAX_BARRIER_WIDTH:g}] (units of a), "
                             f"got {list(self.barrier_widths)!r}")
        if len(set(self.barrier_widths)) < 2:
            raise ValueError("barrier_widths needs at least two distinct widths to extrapolate")
        return self


class RunConfig(BaseModel):
    """Fully resolved parameters of one CLI invocation; embedded in every report."""

    model_config = ConfigDict(frozen=True)

    command: Command
    pot: PotentialSpec
    box: Optional[BoxSpec] = None
    box_sizes: Tuple[float, ...] = ()
    tau_list: Tuple[float, ...] = ()
    x_list: Tuple[float, ...] = ()
    over: Literal["lambda", "tau"] = "lambda"
    n_max: Optional[int] = Field(default=None, ge=1)
    with_beta: bool = True
    output_path: Optional[str] = None
    format: OutputFormat = "json"
    normalize_a: bool = False
    tolerances: Tolerances = Tolerances()
    energy: EnergySettings = EnergySettings()
    sweep: SweepSettings = SweepSettings()
    oracle: OracleSettings = OracleSettings()
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _enough_boxes(self) -> "RunConfig":
        if self.command == "oracle" and len(set(self.box_sizes)) < MIN_ORACLE_BOXES:
            raise ValueError(f"oracle needs >= {MIN_ORACLE_BOXES} distinct box lengths, got {list(self.box_sizes)!r}")
        return self


_SECTIONS = ("tolerances", "physics", "energy", "sweep", "oracle", "output")


def flatten_defaults(config: Mapping[str, Any]) -> Dict[str, Any]:
    """Packaged config sections collapse into one flat key space."""
    flat: Dict[str, Any] = {}
    for section in _SECTIONS:
        flat.update(config.get(section) or {})
    return flat


def parse_float_list(value: Any) -> Tuple[float, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        parts = [p for p in value.replace(";", ",").split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


def resolve_potential(sources: Sequence[Mapping[str, Any]], a: float) -> PotentialSpec:
    """The highest-precedence source naming lambda or coupling decides the potential."""
    for source in sources:
        has_lambda = source.get("lambda") is not None
        has_coupling = source.get("coupling") is not None
        if has_lambda and has_coupling:
            raise ValueError("give either lambda or coupling, not both")
        if has_lambda:
            return PotentialSpec(strength=float(source["lambda"]), a=a)
        if has_coupling:
            return PotentialSpec.from_coupling(float(source["coupling"]), a=a)
    return PotentialSpec.from_coupling(1.0, a=a)


def workers_from_env(default: int = 1) -> int:
    raw = os.getenv(WORKERS_ENV)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("Ignoring non-integer %s=%r", WORKERS_ENV, raw)
        return default


def build_run_config(
    command: Command,
    flags: Mapping[str, Any],
    file_values: Optional[Mapping[str, Any]] = None,
    defaults: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Merge packaged defaults < config file < flags into a RunConfig.

    `flags` holds only the options actually given on the command line.
    Config-file lengths follow the packaged convention (box sizes, x points and
    widths in units of a); flag lengths are absolute.
    """
    packaged = flatten_defaults(defaults if defaults is not None else ConfigLoader().config)
    file_values = dict(file_values or {})
    merged: Dict[str, Any] = {**packaged, **file_values}
    merged.update({k: v for k, v in flags.items() if v is not None})

    a = float(merged.get("a", 1.0))
    pot = resolve_potential([flags, file_values, {"coupling": packaged.get("coupling", 1.0)}], a)

    tolerances = Tolerances(**{k: merged[k] for k in ("rel_tol", "abs_tol", "max_iter") if k in merged})
    energy = EnergySettings(**{k: merged[k] for k in EnergySettings.model_fields if k in merged})
    sweep = SweepSettings(**{k: merged[k] for k in SweepSettings.model_fields if k in merged})
    oracle_values = {k: merged[k] for k in OracleSettings.model_fields if k in merged}
    for key in ("box_sizes", "barrier_widths"):
        if key in oracle_values:
            oracle_values[key] = parse_float_list(oracle_values[key])
    oracle = OracleSettings(**oracle_values)

    box_sizes = parse_float_list(flags.get("L"))
    if not box_sizes:
        box_sizes = parse_float_list(file_values.get("L")) or tuple(L * a for L in oracle.box_sizes)
    x_list = parse_float_list(merged.get("x"))
    if not x_list:
        x_list = (oracle.x_region1 * a, oracle.x_region2 * a)

    return RunConfig(
        command=command,
        pot=pot,
        box=BoxSpec(length=box_sizes[0]) if box_sizes else None,
        box_sizes=box_sizes,
        tau_list=parse_float_list(merged.get("tau")),
        x_list=x_list,
        over=merged.get("over", "lambda"),
        n_max=merged.get("n_max"),
        with_beta=bool(merged.get("with_beta", True)),
        output_path=None if merged.get("output") is None else str(merged["output"]),
        format=merged.get("format", "json"),
        normalize_a=bool(merged.get("normalize_a", False)),
        tolerances=tolerances,
        energy=energy,
        sweep=sweep,
        oracle=oracle,
        workers=int(merged.get("workers") or workers_from_env()),
    )


def log_grid(lo: float, hi: float, points: int) -> List[float]:
    if points == 1:
        return [lo]
    return [lo * (hi / lo) ** (k / (points - 1)) for k in range(points)]


def coupling_grid(settings: SweepSettings) -> List[float]:
    return log_grid(settings.coupling_min, settings.coupling_max, settings.coupling_points)


def tau_grid(settings: SweepSettings, a: float = 1.0) -> List[float]:
    return [a * t for t in log_grid(settings.tau_min, settings.tau_max, settings.tau_points)]


def is_positive(value: float) -> bool:
    return math.isfinite(value) and value > 0
