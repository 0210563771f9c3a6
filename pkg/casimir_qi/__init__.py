"""Vacuum kinetic energy density of a scalar field between two delta plates, and spatial quantum inequalities."""
