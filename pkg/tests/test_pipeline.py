"""Report assembly, invariant gating and error mapping in the orchestration layer."""
import pytest

from casimir_qi import pipeline
from casimir_qi.oracle.finite_box import Extrapolation
from casimir_qi.pipeline import ExperimentRunner, normalize_units, run
from casimir_qi.run_config import build_run_config


def _oracle_config(**flags):
    values = {"coupling": 1.0, "L": (20.0, 40.0, 80.0), "n_max": 50, "with_beta": False}
    values.update(flags)
    return build_run_config("oracle", values, {})


def _fake_shooting(agrees: bool, parity: bool):
    def shooting(self):
        return {"L": 20.0, "modes": 10, "max_relative_error": 0.0 if agrees else 1.0,
                "parity_match": parity, "within_tolerance": agrees}
    return shooting


def _fixed_extrapolation(limit: float, values):
    def extrapolate(pot, Ls, x, modes_per_length, **kwargs):
        return Extrapolation(limit=limit, slope=0.0, Ls=list(Ls), values=list(values),
                             tail_bounds=[0.0] * len(Ls), fit_residual=0.0, spread=0.0,
                             non_inverse_L=False)
    return extrapolate


def test_oracle_gates_continuum_and_shooting_agreement(monkeypatch):
    monkeypatch.setattr(pipeline, "continuum_extrapolate", _fixed_extrapolation(1.0, [1.0, 1.0, 1.0]))
    monkeypatch.setattr(ExperimentRunner, "_shooting_comparison", _fake_shooting(False, False))
    code, report = run(_oracle_config())
    assert code == 1
    assert report["status"] == "invariant_violation"
    failed = set(report["failed_checks"])
    assert {"region1_extrapolation", "region2_decay", "shooting_agrees", "shooting_parity"} <= failed


def test_oracle_region_two_decay_needs_inverse_L(monkeypatch):
    # limit ~ 0 but the values fall like 1/L^2
    monkeypatch.setattr(pipeline, "continuum_extrapolate",
                        _fixed_extrapolation(0.0, [1.0 / 400, 1.0 / 1600, 1.0 / 6400]))
    monkeypatch.setattr(ExperimentRunner, "_shooting_comparison", _fake_shooting(True, True))
    code, report = run(_oracle_config(x=(0.75,)))
    assert report["checks"]["region2_decay"] is False
    assert report["checks"]["shooting_agrees"] is True
    assert code == 1


def test_value_errors_become_error_reports(monkeypatch):
    def broken(self):
        raise ValueError("bad input deep in the library")

    monkeypatch.setattr(ExperimentRunner, "run_density", broken)
    code, report = run(build_run_config("density", {"with_beta": False}, {}))
    assert code == 1
    assert report["status"] == "error"
    assert report["error"]["message"] == "bad input deep in the library"
    assert report["error"]["detail"] == {"cause": "ValueError"}
    assert report["config"]["command"] == "density"


def test_density_report_passes_its_checks():
    code, report = run(build_run_config("density", {"coupling": 1.0}, {}))
    assert code == 0, report.get("failed_checks")
    assert report["checks"] == {"eta_signs": True, "total_energy_positive": True}
    assert report["result"]["beta"] == pytest.approx(report["result"]["coupling"] / 3.141592653589793, rel=1e-3)


def test_normalize_units_rescales_known_fields():
    record = {"beta": 0.5, "eta": 0.25, "L": 10.0, "label": "I", "nested": [{"tau": 4.0}]}
    scaled = normalize_units(record, 2.0)
    assert scaled == {"beta": 1.0, "eta": 1.0, "L": 5.0, "label": "I", "nested": [{"tau": 2.0}]}
