from casimir_qi.oracle.finite_box import (
    FiniteBoxRun,
    JumpReport,
    continuum_extrapolate,
    density_flatness_check,
    finite_box_density,
    integrated_energy,
    jump_consistency,
)
from casimir_qi.oracle.shooting import extrapolate_barrier, shooting_spectrum

__all__ = [
    "FiniteBoxRun",
    "JumpReport",
    "continuum_extrapolate",
    "density_flatness_check",
    "extrapolate_barrier",
    "finite_box_density",
    "integrated_energy",
    "jump_consistency",
    "shooting_spectrum",
]
