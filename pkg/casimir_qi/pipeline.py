"""Command orchestration: runs one RunConfig and assembles its report.

A report is a plain dict with keys command, status, config, then either
result/checks/rows (success or failed invariant) or error.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from casimir_qi.energy import DensityProfile, density_profile
from casimir_qi.errors import CasimirQIError
from casimir_qi.modes import BoxSpec, PotentialSpec, spectrum, validate_mode
from casimir_qi.oracle.finite_box import (
    cached_run,
    continuum_extrapolate,
    default_n_max,
    density_flatness_check,
    integrated_energy,
    jump_consistency,
)
from casimir_qi.oracle.shooting import extrapolate_barrier
from casimir_qi.qi import violation_report
from casimir_qi.run_config import RunConfig, coupling_grid, tau_grid

logger = logging.getLogger(__name__)

Outcome = Tuple[Dict[str, Any], List[Dict[str, Any]], Dict[str, bool]]

MODE_RESIDUAL_TOL = 1e-10
JUMP_MODES = 100
FLATNESS_REL_TOL = 1e-8
SHOOTING_REL_TOL = 1e-6
EXTRAPOLATION_REL_TOL = 1e-2
SLOPE_REL_TOL = 0.1
EXPONENT_TOL = 0.1

# Power of a that makes each quantity dimensionless under --normalize-a.
UNIT_POWERS = {
    "eta1": 2, "eta2": 2, "region1_value": 2, "eta": 2,
    "lhs": 2, "bound_paper": 2, "bound_quadrature": 2,
    "value": 2, "tail_bound": 2, "limit": 2, "continuum_value": 2,
    "fit_residual": 2, "spread": 2, "total_jump": 2, "density_difference": 2,
    "total_mismatch": 2, "flatness_deviation": 2,
    "beta": 1, "total_energy": 1, "slope": 1, "integrated_energy": 1,
    "omega": 1, "omega0": 1, "lambda": 1,
    "tau": -1, "tau_or_scale": -1, "critical_tau_paper": -1, "critical_tau_quadrature": -1,
    "L": -1, "x": -1, "B": -1, "a": -1,
}


def normalize_units(record: Any, a: float) -> Any:
    """Rescale known dimensional fields so that a becomes the length unit."""
    if isinstance(record, dict):
        out = {}
        for key, value in record.items():
            power = UNIT_POWERS.get(key)
            if power is not None and isinstance(value, (int, float)) and not isinstance(value, bool):
                out[key] = value * a ** power
            elif power is not None and isinstance(value, list) and all(isinstance(v, (int, float)) for v in value):
                out[key] = [v * a ** power for v in value]
            else:
                out[key] = normalize_units(value, a)
        return out
    if isinstance(record, list):
        return [normalize_units(item, a) for item in record]
    return record


def _profile_record(profile: DensityProfile) -> Dict[str, Any]:
    return {
        "coupling": profile.pot.coupling,
        "lambda": profile.pot.strength,
        "a": profile.pot.a,
        "eta1": profile.eta1,
        "eta2": profile.eta2,
        "region1_value": profile.region1_value,
        "eta": profile.eta,
        "beta": profile.beta,
        "total_energy": profile.total_energy,
        "total_energy_positive": profile.total_energy_positive,
    }


def _profile_checks(profile: DensityProfile) -> Dict[str, bool]:
    checks = {"eta_signs": profile.eta1 <= 0 <= profile.eta2 and profile.region1_value <= 0}
    if profile.beta is not None and profile.pot.coupling > 0:
        checks["total_energy_positive"] = bool(profile.total_energy_positive)
    return checks


class ExperimentRunner:
    """Dispatches a RunConfig to the matching command method."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.tol = config.tolerances
        logger.info("ExperimentRunner initialized for %s (Lambda=%g, a=%g)",
                    config.command, config.pot.coupling, config.pot.a)

    def _map(self, func: Callable, items: List[Any]) -> List[Any]:
        if self.config.workers <= 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            return list(pool.map(func, items))

    def _profile(self, pot: PotentialSpec, with_beta: bool) -> DensityProfile:
        energy = self.config.energy
        return density_profile(
            pot, self.tol,
            with_beta=with_beta,
            beta_max_coupling=energy.beta_max_coupling,
            beta_start_per_coupling=energy.beta_start_per_coupling,
            beta_cycles=energy.beta_cycles,
        )

    def execute(self) -> Outcome:
        return getattr(self, f"run_{self.config.command}")()

    def run_density(self) -> Outcome:
        profile = self._profile(self.config.pot, self.config.with_beta)
        record = _profile_record(profile)
        return record, [record], _profile_checks(profile)

    def _qi_rows(self, profile: DensityProfile, taus: List[float]) -> Tuple[List[Dict[str, Any]], Dict[str, bool]]:
        reports = self._map(lambda tau: violation_report(None, tau, profile=profile, tol=self.tol), taus)
        rows = [report.model_dump() for report in reports]
        checks: Dict[str, bool] = {}
        if profile.eta > 0:
            checks["lhs_inside_well_bounds"] = all(-profile.eta < r.lhs < 0 for r in reports)
            for name in ("paper", "quadrature"):
                critical = getattr(reports[0], f"critical_tau_{name}") if reports else None
                if critical is not None:
                    beyond = [getattr(r, f"violated_vs_{name}") for r in reports if r.tau_or_scale > critical]
                    checks[f"violated_beyond_critical_{name}"] = all(beyond)
        return rows, checks

    def run_qi(self) -> Outcome:
        profile = self._profile(self.config.pot, with_beta=False)
        rows, checks = self._qi_rows(profile, list(self.config.tau_list))
        result = {
            "eta": profile.eta,
            "critical_tau_paper": rows[0]["critical_tau_paper"] if rows else None,
            "critical_tau_quadrature": rows[0]["critical_tau_quadrature"] if rows else None,
            "reports": rows,
        }
        return result, rows, checks

    def run_sweep(self) -> Outcome:
        a = self.config.pot.a
        if self.config.over == "tau":
            profile = self._profile(self.config.pot, with_beta=False)
            taus = list(self.config.tau_list) or tau_grid(self.config.sweep, a)
            rows, checks = self._qi_rows(profile, taus)
            return {"over": "tau", "points": len(rows), "eta": profile.eta}, rows, checks

        pots = [PotentialSpec.from_coupling(c, a=a) for c in coupling_grid(self.config.sweep)]
        profiles = self._map(lambda pot: self._profile(pot, self.config.with_beta), pots)
        rows = [_profile_record(p) for p in profiles]
        checks: Dict[str, bool] = {}
        for p in profiles:
            for name, ok in _profile_checks(p).items():
                checks[name] = checks.get(name, True) and ok
        return {"over": "lambda", "points": len(rows)}, rows, checks

    def run_modes(self) -> Outcome:
        pot = self.config.pot
        box = self.config.box or BoxSpec(length=self.config.oracle.box_sizes[0] * pot.a)
        n_max = self.config.n_max or default_n_max(pot, box, self.config.oracle.modes_per_length)
        modes = spectrum(pot, box, n_max, self.tol)
        rows = []
        worst = 0.0
        for mode in modes:
            residuals = validate_mode(mode, pot, box)
            worst = max(worst, residuals.max_residual)
            rows.append({
                "j": mode.parity, "n": mode.index, "omega0": mode.omega0, "omega": mode.omega,
                "A": mode.amplitude, "delta": mode.phase, "B": mode.norm_B, "N": mode.norm_N,
                **residuals.model_dump(),
            })
        result = {"L": box.length, "n_max": n_max, "modes": len(rows), "max_residual": worst}
        return result, rows, {"mode_residuals": worst < MODE_RESIDUAL_TOL}

    def run_oracle(self) -> Outcome:
        config, pot = self.config, self.config.pot
        a, half = pot.a, pot.a / 2
        Ls = sorted(config.box_sizes)
        with_beta = config.with_beta and pot.coupling <= config.energy.beta_max_coupling
        profile = self._profile(pot, with_beta)

        rows: List[Dict[str, Any]] = []
        extrapolations = []
        agreement: Dict[str, bool] = {}
        for x in config.x_list:
            region = "I" if abs(x) < half else "II"
            ext = continuum_extrapolate(pot, Ls, x, config.oracle.modes_per_length, workers=config.workers)
            for L, value, tail in zip(ext.Ls, ext.values, ext.tail_bounds):
                rows.append({"x": x, "region": region, "L": L,
                             "n_max": default_n_max(pot, BoxSpec(length=L), config.oracle.modes_per_length),
                             "value": value, "tail_bound": tail})
            summary = {"x": x, "region": region, **ext.model_dump(include={"limit", "slope", "exponent",
                                                                          "fit_residual", "spread", "non_inverse_L"})}
            if region == "I":
                summary["continuum_value"] = profile.region1_value
                summary["relative_error"] = _relative(ext.limit, profile.region1_value)
                agreement["region1_extrapolation"] = (agreement.get("region1_extrapolation", True)
                                                      and summary["relative_error"] <= EXTRAPOLATION_REL_TOL)
            else:
                summary["continuum_value"] = 0.0
                decays = abs(ext.limit) <= EXTRAPOLATION_REL_TOL * profile.eta + 1e-12
                if ext.exponent is not None:
                    decays = decays and abs(ext.exponent + 1.0) <= EXPONENT_TOL
                if profile.beta is not None:
                    summary["beta"] = profile.beta
                    summary["relative_error"] = _relative(ext.slope, profile.beta)
                    decays = decays and summary["relative_error"] <= SLOPE_REL_TOL
                agreement["region2_decay"] = agreement.get("region2_decay", True) and decays
            extrapolations.append(summary)

        box = BoxSpec(length=Ls[0])
        run = cached_run(pot, box, config.n_max or default_n_max(pot, box, config.oracle.modes_per_length))
        jumps = jump_consistency(run, limit=JUMP_MODES)
        flat_1 = density_flatness_check(run, [0.0, a / 4, -a / 4, 0.4 * a, -0.4 * a])
        flat_2 = density_flatness_check(run, [0.75 * a, a, -a, 2 * a])
        energy_total = integrated_energy(run)
        flat_tol = FLATNESS_REL_TOL * abs(profile.region1_value) + 1e-12

        shooting = self._shooting_comparison()
        result = {
            "continuum": _profile_record(profile),
            "extrapolations": extrapolations,
            "jump": {
                "L": box.length, "n_max": run.n_max, "modes_compared": len(jumps.per_mode),
                "max_mode_mismatch": jumps.max_mode_mismatch, "total_jump": jumps.total_jump,
                "density_difference": jumps.density_difference, "total_mismatch": jumps.total_mismatch,
                "rounding_bound": jumps.rounding_bound,
            },
            "flatness_deviation": max(flat_1, flat_2),
            "integrated_energy": energy_total,
            "shooting": shooting,
        }
        checks = {
            "modes_valid": True,
            "jump_per_mode": jumps.max_mode_mismatch <= 1.0,
            "jump_total": jumps.total_mismatch <= jumps.rounding_bound,
            "flatness": max(flat_1, flat_2) <= flat_tol,
            "integrated_energy_nonnegative": energy_total >= 0,
            **agreement,
            "shooting_agrees": shooting["within_tolerance"],
            "shooting_parity": shooting["parity_match"],
        }
        return result, rows, checks

    def _shooting_comparison(self) -> Dict[str, Any]:
        pot, settings = self.config.pot, self.config.oracle
        box = BoxSpec(length=settings.shooting_box * pot.a)
        k = settings.shooting_modes
        ext = extrapolate_barrier(pot, box, [w * pot.a for w in settings.barrier_widths], k)
        closed = sorted(spectrum(pot, box, k // 2 + 2, self.tol), key=lambda m: m.omega)[:k]
        reference = np.array([m.omega for m in closed])
        errors = np.abs(ext.omega - reference) / reference
        return {
            "L": box.length,
            "modes": k,
            "max_relative_error": float(np.max(errors)),
            "parity_match": [int(p) for p in ext.parity] == [m.parity for m in closed],
            "within_tolerance": bool(np.max(errors) < SHOOTING_REL_TOL),
        }


def _relative(value: float, reference: float) -> float:
    if reference == 0:
        return abs(value)
    return abs(value - reference) / abs(reference)


def run(config: RunConfig) -> Tuple[int, Dict[str, Any]]:
    """Exit code and report: 0 success, 1 on a computation error or failed invariant."""
    report: Dict[str, Any] = {
        "command": config.command,
        "status": "ok",
        "config": config.model_dump(mode="json", by_alias=True),
    }
    try:
        result, rows, checks = ExperimentRunner(config).execute()
    except (CasimirQIError, ValueError) as e:
        logger.error("Error in %s: %s", config.command, str(e))
        error = e if isinstance(e, CasimirQIError) else CasimirQIError(str(e), cause=type(e).__name__)
        report["status"] = "error"
        report["error"] = error.to_dict()
        return 1, report

    if config.normalize_a:
        result, rows = normalize_units(result, config.pot.a), normalize_units(rows, config.pot.a)
    failed = [name for name, ok in checks.items() if not ok]
    report["result"] = result
    report["checks"] = checks
    report["rows"] = rows
    if failed:
        logger.error("Invariant checks failed for %s: %s", config.command, ", ".join(failed))
        report["status"] = "invariant_violation"
        report["failed_checks"] = failed
        return 1, report
    return 0, report
