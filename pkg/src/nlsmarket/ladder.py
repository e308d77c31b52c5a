"""Method-of-lines right-hand sides for the verification ladder.

Four semi-discrete systems of increasing difficulty share one grid and one
integrator: plain diffusion, diffusion with a potential, the linear
Schrodinger equation, and the cubic nonlinear Schrodinger equation. Mass
and energy diagnostics live here as well.

All builders return the explicit time derivative dpsi/dt, so the same
real-vector integrator serves every stage. Complex fields cross the
integrator boundary as interleaved (Re, Im) pairs; the layout is fixed to
[Re f0, Im f0, Re f1, Im f1, ...] so that recorded states are reproducible
bit-exactly.
"""

from __future__ import annotations

from typing import Callable, Union

import numpy as np

from .grid import BoundaryPolicy, Grid, second_difference
from .integrator import OdeSystem

Potential = Union[float, np.ndarray]


def potential_values(v: Potential, grid: Grid) -> np.ndarray:
    """Resolve a constant or tabulated per-node potential to node values."""
    if np.isscalar(v):
        return np.full(grid.n, float(v))
    v = np.asarray(v, dtype=float)
    if v.shape != (grid.n,):
        raise ValueError(f"tabulated potential length {v.shape} does not match grid n={grid.n}")
    if not np.all(np.isfinite(v)):
        raise ValueError("tabulated potential contains non-finite entries")
    return v


def pack_complex(field: np.ndarray) -> np.ndarray:
    """Interleave a complex field into [Re f0, Im f0, Re f1, Im f1, ...]."""
    return np.ascontiguousarray(field, dtype=np.complex128).view(np.float64).copy()


def unpack_complex(vec: np.ndarray) -> np.ndarray:
    """Inverse of pack_complex."""
    return np.ascontiguousarray(vec, dtype=np.float64).view(np.complex128).copy()


def heat_rhs(field: np.ndarray, grid: Grid, policy: BoundaryPolicy) -> np.ndarray:
    """Diffusion with coefficient one half: (1/2) d2f/dx2."""
    return 0.5 * second_difference(field, grid, policy)


def heat_potential_rhs(
    field: np.ndarray, grid: Grid, policy: BoundaryPolicy, v: Potential
) -> np.ndarray:
    """Diffusion plus a multiplicative potential term: (1/2) d2f/dx2 + V f."""
    return heat_rhs(field, grid, policy) + potential_values(v, grid) * field


def linear_schrodinger_rhs(
    field: np.ndarray, grid: Grid, policy: BoundaryPolicy, v: Potential
) -> np.ndarray:
    """df/dt = i [ (1/2) d2f/dx2 - V f ]."""
    field = np.asarray(field, dtype=complex)
    return 1j * (0.5 * second_difference(field, grid, policy) - potential_values(v, grid) * field)


def nls_rhs(field: np.ndarray, grid: Grid, policy: BoundaryPolicy, v: Potential) -> np.ndarray:
    """df/dt = i [ (1/2) d2f/dx2 - V |f|^2 f ] (cubic nonlinearity)."""
    field = np.asarray(field, dtype=complex)
    cubic = potential_values(v, grid) * np.abs(field) ** 2 * field
    return 1j * (0.5 * second_difference(field, grid, policy) - cubic)


def mass(field: np.ndarray, grid: Grid) -> float:
    """Riemann-sum mass: sum |f_k|^2 ds. Non-negative; zero iff f is zero."""
    field = np.asarray(field)
    return float(np.sum(np.abs(field) ** 2).real * grid.ds)


def energy(
    field: np.ndarray,
    grid: Grid,
    v: Potential,
    policy: BoundaryPolicy = BoundaryPolicy.PERIODIC,
) -> float:
    """Discrete Hamiltonian: sum[ (1/2)|df/dx|^2 + (V/2)|f|^4 ] ds.

    df/dx uses centered differences at interior nodes; end nodes wrap for
    the periodic policy and fall back to one-sided differences otherwise.
    """
    field = np.asarray(field, dtype=complex)
    if field.shape != (grid.n,):
        raise ValueError(f"field length {field.shape} does not match grid n={grid.n}")
    if policy is BoundaryPolicy.PERIODIC:
        dpsi = (np.roll(field, -1) - np.roll(field, 1)) / (2.0 * grid.ds)
    else:
        dpsi = np.empty_like(field)
        dpsi[1:-1] = (field[2:] - field[:-2]) / (2.0 * grid.ds)
        dpsi[0] = (field[1] - field[0]) / grid.ds
        dpsi[-1] = (field[-1] - field[-2]) / grid.ds
    vv = potential_values(v, grid)
    dens = 0.5 * np.abs(dpsi) ** 2 + 0.5 * vv * np.abs(field) ** 4
    return float(np.sum(dens) * grid.ds)


def complex_system(fn: Callable[[np.ndarray], np.ndarray], n: int) -> OdeSystem:
    """Wrap an autonomous complex-field map into a packed real ODE system."""

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return pack_complex(fn(unpack_complex(y)))

    return OdeSystem(dimension=2 * n, rhs=rhs)
